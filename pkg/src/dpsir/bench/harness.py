"""Monte-Carlo benchmark over simulated models.

Every replication draws a fresh dataset, a private slice plan and then runs
each requested method on the same data. Randomness comes from child streams
of ``SeedSequence([seed, cell, rep, stream])``, so a report depends only on
the master seed and the configuration, never on worker count or scheduling.

Reported losses are the unsquared projector distance ||P_B - P_Bhat||_F by
default (``metric="distance"``), the scale simulation tables are quoted on;
``metric="loss"`` reports its square.
"""

import hashlib
import json
import math
import os
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import __version__
from ..baselines import RayleighConfig, dp_rayleigh_flow, dp_truncated_rayleigh_flow, flow_noise_sds
from ..errors import DpsirError, InvalidInput
from ..linalg import projection_distance, projection_loss
from ..lowdim import DpSirConfig, dpsir_fit, dpsir_init, init_sigmas
from ..mechanisms import BudgetLedger, PrivacyBudget, merge_ledgers
from ..sir import oracle_sir, sir_fit
from ..slicing import estimate_slices
from ..sparse import DpSsirConfig, dpspca_fit, dpssir_fit, dpssir_init, sparse_init_sigmas
from .models import ModelSpec, generate_model

METHODS = ("SIR", "DP-Ini", "DP-RF", "DP-SIR", "DP-SIni", "DP-TRF", "DP-SSIR", "Oracle-SIR", "DP-SPCA")
LOW_DEFAULT = ("SIR", "DP-Ini", "DP-RF", "DP-SIR")
HIGH_DEFAULT = ("Oracle-SIR", "DP-SIni", "DP-TRF", "DP-SSIR")
WORKERS_ENV = "DPSIR_WORKERS"

# Uniform noise multiplier of the "table" preset. It equals 1/(p c_x^2) at
# p=15, c_x=1.5, i.e. it rescales the initializer sensitivities of that cell
# to those of a design with unit l2 row norm. It is far below 1, so runs
# using it are not formally private at the stated budget.
TABLE_NOISE_MULTIPLIER = 1.0 / (15 * 1.5**2)

# Stream ids inside a replication; fixed so adding a method never shifts another.
_DATA, _SLICES = 0, 1
_STREAM = {m: 10 + i for i, m in enumerate(METHODS)}


@dataclass
class RunConfig:
    """Benchmark configuration (the JSON config file maps onto these fields).

    ``delta=None`` means n^-1.1 per cell; ``H``/``m`` of None mean 20/100 in
    the low-dimensional regime and 10/50 in the high-dimensional one.
    ``k`` is ``"auto"`` (DP-BIC), ``"true"`` or an integer.
    ``noise_multiplier`` scales every calibrated noise level except the
    histogram's; any value below 1 forfeits the formal guarantee.
    """

    models: list
    methods: list = None
    replications: int = 100
    seed: int = 20240601
    epsilon: float = 1.0
    delta: float = None
    hist_epsilon: float = 0.1
    H: int = None
    m: int = None
    k: object = "auto"
    s_prime: int = 6
    oracle_support: int = 6
    c_x: float = None
    noise_multiplier: float = 1.0
    r_multiplier: float = 1.0
    rf_eta: float = 1.0
    rf_T: int = None
    metric: str = "distance"
    workers: int = None
    outputs: dict = field(default_factory=dict)
    keep_records: bool = True

    def __post_init__(self):
        self.models = [m if isinstance(m, ModelSpec) else ModelSpec(**m) for m in self.models]
        if not self.models:
            raise InvalidInput("at least one model is required")
        if self.replications < 1:
            raise InvalidInput("replications must be at least 1")
        if self.methods is not None:
            self.methods = list(self.methods)
            if not self.methods:
                raise InvalidInput("methods must be non-empty")
            unknown = set(self.methods) - set(METHODS)
            if unknown:
                raise InvalidInput(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.metric not in ("distance", "loss"):
            raise InvalidInput("metric must be 'distance' or 'loss'")
        if not (self.k in ("auto", "true") or (isinstance(self.k, int) and self.k >= 1)):
            raise InvalidInput("k must be 'auto', 'true' or a positive integer")
        if not self.noise_multiplier > 0:
            raise InvalidInput("noise_multiplier must be positive")

    def to_dict(self):
        d = asdict(self)
        d["models"] = [m.to_dict() for m in self.models]
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f for f in cls.__dataclass_fields__}
        extra = set(d) - known
        if extra:
            raise InvalidInput(f"unknown config keys {sorted(extra)}")
        return cls(**d)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def hash(self):
        d = self.to_dict()
        d.pop("workers", None)
        d.pop("outputs", None)
        blob = json.dumps(d, sort_keys=True, default=str).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def methods_for(self, spec):
        if self.methods is not None:
            return self.methods
        return list(LOW_DEFAULT if spec.regime == "low" else HIGH_DEFAULT)

    def cell_settings(self, spec):
        low = spec.regime == "low"
        H = self.H or (20 if low else 10)
        m = self.m or (100 if low else 50)
        delta = self.delta if self.delta is not None else spec.n ** -1.1
        return H, m, PrivacyBudget(self.epsilon, delta)


def resolve_workers(requested=None):
    env = os.environ.get(WORKERS_ENV)
    if env:
        try:
            value = int(env)
        except ValueError:
            raise InvalidInput(f"{WORKERS_ENV} must be an integer, got {env!r}") from None
        return max(1, value)
    if requested:
        return max(1, int(requested))
    return os.cpu_count() or 1


def _streams(seed, cell, rep):
    base = [int(seed), int(cell), int(rep)]

    def rng(stream):
        return np.random.default_rng(np.random.SeedSequence(base + [stream]))

    return rng


def declared_total(method, budget, hist_epsilon):
    """(epsilon, delta) each method is designed to spend in one replication."""
    e, d = budget.epsilon, budget.delta
    return {
        "SIR": (0.0, 0.0),
        "Oracle-SIR": (0.0, 0.0),
        "DP-Ini": (hist_epsilon + e, d),
        "DP-SIni": (hist_epsilon + e, d),
        "DP-SIR": (hist_epsilon + 2 * e, 2 * d),
        "DP-SSIR": (hist_epsilon + 2 * e, 2 * d),
        "DP-RF": (hist_epsilon + 2 * e, 2 * d),
        "DP-TRF": (hist_epsilon + 2 * e, 2 * d),
        "DP-SPCA": (2 * e, 2 * d),
    }[method]


class _Rep:
    """State shared by the methods of one replication."""

    def __init__(self, cfg, spec, cell, rep):
        self.cfg = cfg
        self.spec = spec
        self.rng = _streams(cfg.seed, cell, rep)
        self.H, self.m, self.budget = cfg.cell_settings(spec)
        self.data, self.B = generate_model(spec, self.rng(_DATA))
        self.c_x = cfg.c_x or self.data.coord_bound
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            self.plan = estimate_slices(self.data.y, self.H, self.m, PrivacyBudget(cfg.hist_epsilon), self.rng(_SLICES))
        self._cache = {}

    @property
    def k_request(self):
        k = self.cfg.k
        if k == "true":
            return self.spec.k
        return k

    def shared_k(self):
        """Dimension used by the non-private references.

        Under ``k="auto"`` this is the private DP-BIC choice, falling back to
        the true dimension when the private initializer itself failed.
        """
        if self.k_request != "auto":
            return self.k_request
        try:
            init = self.low_init() if self.spec.regime == "low" else self.sparse_init()
        except DpsirError:
            return self.spec.k
        return init.k_selected

    def stream(self, method):
        return self.rng(_STREAM[method])

    def score(self, B):
        if self.cfg.metric == "distance":
            return projection_distance(B, self.B)
        return projection_loss(B, self.B)

    def low_init(self):
        if "DP-Ini" not in self._cache:
            s1, s2 = init_sigmas(self.spec.p, self.spec.n, self.c_x)
            mult = self.cfg.noise_multiplier
            self._cache["DP-Ini"] = dpsir_init(
                self.data, self.plan, self.k_request, self.budget, self.stream("DP-Ini"),
                sigma1=mult * s1, sigma2=mult * s2, c_x=self.c_x,
            )
        return self._cache["DP-Ini"]

    def sparse_init(self):
        if "DP-SIni" not in self._cache:
            s0, s1, s2 = sparse_init_sigmas(self.cfg.s_prime, self.spec.n, self.c_x)
            mult = self.cfg.noise_multiplier
            self._cache["DP-SIni"] = dpssir_init(
                self.data, self.plan, self.k_request, self.cfg.s_prime, self.budget, self.stream("DP-SIni"),
                sigma=mult * s0, sigma1=mult * s1, sigma2=mult * s2, c_x=self.c_x,
            )
        return self._cache["DP-SIni"]

    def flow_config(self, init, s=None):
        T = self.cfg.rf_T or max(1, math.ceil(math.log(self.spec.n)))
        sd1, sd2 = flow_noise_sds(self.spec.p, self.spec.n, self.c_x, self.budget, T, self.cfg.noise_multiplier)
        return RayleighConfig(v0=init.B_hat[:, 0], sigma1=sd1, sigma2=sd2, eta=self.cfg.rf_eta, T=T, s=s)

    def run(self, method):
        cfg = self.cfg
        if method == "SIR":
            return sir_fit(self.data, self.plan, self.shared_k()), BudgetLedger()
        if method == "Oracle-SIR":
            support = np.arange(min(cfg.oracle_support, self.spec.p))
            return oracle_sir(self.data, self.plan, self.shared_k(), support), BudgetLedger()
        if method == "DP-Ini":
            est = self.low_init()
            return est, est.ledger
        if method == "DP-SIni":
            est = self.sparse_init()
            return est, est.ledger
        if method == "DP-SIR":
            init = self.low_init()
            dcfg = DpSirConfig(
                budget=self.budget, H=self.plan.H, c_x=self.c_x,
                noise_multiplier=cfg.noise_multiplier, r_multiplier=cfg.r_multiplier,
            )
            est = dpsir_fit(self.data, dcfg, init, self.stream("DP-SIR"), plan=self.plan)
            return est, merge_ledgers(init.ledger, est.ledger)
        if method == "DP-SSIR":
            init = self.sparse_init()
            dcfg = DpSsirConfig(
                budget=self.budget, H=self.plan.H, c_x=self.c_x, s_prime=cfg.s_prime,
                noise_multiplier=cfg.noise_multiplier, r_multiplier=cfg.r_multiplier,
            )
            est = dpssir_fit(self.data, dcfg, init, self.stream("DP-SSIR"), plan=self.plan)
            return est, merge_ledgers(init.ledger, est.ledger)
        if method == "DP-RF":
            init = self.low_init()
            est = dp_rayleigh_flow(self.data, self.plan, self.flow_config(init), self.stream("DP-RF"), budget=self.budget)
            return est, merge_ledgers(init.ledger, est.ledger)
        if method == "DP-TRF":
            init = self.sparse_init()
            rcfg = self.flow_config(init, s=cfg.s_prime)
            est = dp_truncated_rayleigh_flow(self.data, self.plan, rcfg, self.stream("DP-TRF"), budget=self.budget)
            return est, merge_ledgers(init.ledger, est.ledger)
        if method == "DP-SPCA":
            k = self.spec.k if self.k_request == "auto" else self.k_request
            dcfg = DpSsirConfig(
                budget=self.budget, k=k, c_x=self.c_x, s_prime=min(cfg.s_prime, self.spec.p),
                noise_multiplier=cfg.noise_multiplier, r_multiplier=cfg.r_multiplier,
            )
            est = dpspca_fit(self.data, dcfg, self.stream("DP-SPCA"))
            return est, est.ledger
        raise InvalidInput(f"unknown method {method!r}")


def run_replication(cfg, cell, rep):
    """All methods of one (cell, replication); returns a list of raw records."""
    spec = cfg.models[cell]
    state = _Rep(cfg, spec, cell, rep)
    records = []
    for method in cfg.methods_for(spec):
        rec = {"cell": cell, "rep": rep, "method": method}
        t0 = time.perf_counter()
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                est, ledger = state.run(method)
            rec["loss"] = state.score(est.B_hat)
            rec["k"] = int(est.B_hat.shape[1])
            rec["eps"], rec["delta"] = ledger.total()
            rec["error"] = None
        except (DpsirError, np.linalg.LinAlgError, FloatingPointError) as exc:
            rec.update(loss=None, k=None, eps=None, delta=None, error=f"{type(exc).__name__}: {exc}")
        except Exception as exc:  # a sweep never aborts on one bad replication
            rec.update(loss=None, k=None, eps=None, delta=None,
                       error=f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}")
        rec["runtime_ms"] = 1000.0 * (time.perf_counter() - t0)
        records.append(rec)
    return records


def _run_chunk(args):
    cfg_dict, tasks = args
    cfg = RunConfig.from_dict(cfg_dict)
    out = []
    for cell, rep in tasks:
        out.extend(run_replication(cfg, cell, rep))
    return out


def aggregate(cfg, records):
    """Per (cell, method) summary rows, ordered by cell then method roster."""
    rows = []
    for cell, spec in enumerate(cfg.models):
        H, m, budget = cfg.cell_settings(spec)
        for method in cfg.methods_for(spec):
            recs = [r for r in records if r["cell"] == cell and r["method"] == method]
            recs.sort(key=lambda r: r["rep"])
            ok = [r for r in recs if r["error"] is None]
            losses = np.array([r["loss"] for r in ok], dtype=float)
            ks = np.array([r["k"] for r in ok], dtype=float)
            times = np.array([r["runtime_ms"] for r in recs], dtype=float)
            eps = max((r["eps"] for r in ok), default=0.0)
            dlt = max((r["delta"] for r in ok), default=0.0)
            rows.append({
                "model": spec.model,
                "n": spec.n,
                "p": spec.p,
                "method": method,
                "mean_loss": float(losses.mean()) if losses.size else None,
                "sd_loss": float(losses.std(ddof=1)) if losses.size > 1 else None,
                "mean_k": float(ks.mean()) if ks.size else None,
                "mean_runtime_ms": float(times.mean()) if times.size else None,
                "eps": eps,
                "delta": dlt,
                "reps": int(losses.size),
                "failures": len(recs) - len(ok),
            })
    return rows


@dataclass
class RunReport:
    rows: list
    metadata: dict
    records: list = None

    def to_dict(self):
        return {"rows": self.rows, "metadata": self.metadata, "records": self.records}

    @classmethod
    def from_dict(cls, d):
        return cls(rows=d["rows"], metadata=d["metadata"], records=d.get("records"))

    def row(self, model, method, n=None, p=None):
        for r in self.rows:
            if r["model"] == model and r["method"] == method and (n is None or r["n"] == n) and (p is None or r["p"] == p):
                return r
        raise KeyError((model, method, n, p))


def _metadata(cfg):
    return {
        "seed": cfg.seed,
        "version": __version__,
        "config_hash": cfg.hash(),
        "metric": cfg.metric,
        "normalization": "B(B'B)^-1/2",
        "replications": cfg.replications,
        "noise_multiplier": cfg.noise_multiplier,
        "config": cfg.to_dict(),
    }


def run_benchmark(config, progress=None):
    """Run every (cell, replication) and aggregate; deterministic given ``config.seed``."""
    cfg = config
    tasks = [(c, r) for c in range(len(cfg.models)) for r in range(cfg.replications)]
    workers = resolve_workers(cfg.workers)
    records = []
    if workers <= 1 or len(tasks) <= 1:
        for cell, rep in tasks:
            records.extend(run_replication(cfg, cell, rep))
            if progress:
                progress(len(records))
    else:
        chunks = [tasks[i::workers] for i in range(workers)]
        payload = [(cfg.to_dict(), ch) for ch in chunks if ch]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for part in pool.map(_run_chunk, payload):
                records.extend(part)
    records.sort(key=lambda r: (r["cell"], r["rep"], METHODS.index(r["method"])))
    return RunReport(rows=aggregate(cfg, records), metadata=_metadata(cfg), records=records if cfg.keep_records else None)


def reaggregate(config_dict, records):
    """Rebuild a report from raw per-replication records."""
    cfg = RunConfig.from_dict(config_dict)
    records = sorted(records, key=lambda r: (r["cell"], r["rep"], METHODS.index(r["method"])))
    return RunReport(rows=aggregate(cfg, records), metadata=_metadata(cfg), records=records)
