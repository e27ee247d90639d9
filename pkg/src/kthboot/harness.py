"""Empirical-size experiments: configuration, parallel driver, tables and diagnostics.

A replication ``r`` of cell ``c`` draws its data from the stream keyed
``(c, r, DATA)`` and method ``M`` draws its multipliers from
``(c, r, M, level)``.  Results are aggregated as counts, so any schedule over
worker processes reproduces the sequential run exactly.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import itertools
import json
import logging
import math
import os
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import bootstrap as bs
from . import gaussian_reference as gref
from . import mixing
from .edgeworth import EdgeworthInputs, cornish_fisher_predict
from .errors import ConfigError, KthBootError
from .rng import Role, stream
from .sampling import Case, CorrelationSpec, build_correlation, cholesky, norm_ppf, sample_ar1_path, sample_copula_gamma
from .stats_core import kth_order_stat, normalized_sum

log = logging.getLogger(__name__)

METHODS = ("EB", "GB", "MB", "RB", "BB", "DB")
WILD_LAWS = {"GB": bs.GAUSSIAN, "MB": bs.MAMMEN, "RB": bs.RADEMACHER, "BB": bs.BETA}
CSV_COLUMNS = ("design", "case", "n", "rho", "method", "k", "alpha", "reps", "rate", "se", "runtime_s")
CHECKPOINT_FORMAT = "kthboot-checkpoint"
CHECKPOINT_VERSION = 1
# fields that change what a replication computes; others (threads, output) do not
_RESULT_FIELDS = ("design", "rho", "n", "d", "k", "case", "theta", "marginal", "methods", "alpha", "B1", "B2", "master_seed", "db_laws")
_SWEEP_FIELDS = ("design", "rho", "n", "d", "k", "case")
DB_LAW_NOTE = "DB multiplier laws default to gaussian (first level) and beta(0.1) (second level); change them with --db-laws"


def _law(name: str) -> bs.MultiplierLaw:
    name = name.lower()
    if name.startswith("beta"):
        nu = float(name[5:-1]) if "(" in name else 0.1
        return bs.MultiplierLaw(bs.Kind.BETA, nu)
    try:
        return bs.MultiplierLaw(bs.Kind(name))
    except ValueError:
        raise ConfigError("db_laws", f"unknown multiplier law {name!r}") from None


@dataclass(frozen=True)
class ExperimentConfig:
    """One cell of the size study plus run settings.

    ``theta`` defaults to 1 (asymmetric) or 1/2 (symmetric).
    ``threads`` is an integer or ``"auto"`` (all visible cores).  With
    ``record_runtime=False`` the ``runtime_s`` column is written as zero so
    the emitted table is a pure function of the configuration.
    """

    design: str = "I"
    rho: float = 0.2
    n: int = 200
    d: int = 400
    k: int = 2
    case: str = "asymmetric"
    theta: float | None = None
    methods: tuple = ("GB", "MB", "RB", "BB")
    alpha: float = 0.1
    B1: int = 499
    B2: int = 99
    reps: int = 1000
    master_seed: int = 20240601
    threads: int | str = 1
    marginal: str = "gamma"
    db_laws: tuple = ("gaussian", "beta(0.1)")
    record_runtime: bool = True
    batch: int = 10
    # diagnostics
    k0: int = 10
    diag_B: int = 20000
    diag_reps: int = 20000
    diag_paths: int = 10000

    def __post_init__(self):
        fix = lambda name, value: object.__setattr__(self, name, value)
        fix("methods", tuple(str(m).upper() for m in self.methods))
        fix("db_laws", tuple(self.db_laws))
        fix("case", str(self.case).lower())
        fix("design", str(self.design).upper())
        if self.theta is None:
            # symmetric differences of gamma(1/2) keep the marginal kurtosis on the asymmetric scale
            fix("theta", 1.0 if self.case == "asymmetric" else 0.5)
        self.validate()

    def validate(self) -> None:
        if self.design not in ("I", "II"):
            raise ConfigError("design", f"must be 'I' or 'II', got {self.design!r}")
        if self.case not in (c.value for c in Case):
            raise ConfigError("case", f"must be 'asymmetric' or 'symmetric', got {self.case!r}")
        lo = 0.0 if self.design == "I" else -1.0
        if not lo <= self.rho < 1.0:
            raise ConfigError("rho", f"out of range for design {self.design}: {self.rho}")
        for name in ("n", "d", "k", "B1", "reps", "batch", "k0", "diag_B", "diag_reps", "diag_paths"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(name, "must be >= 1")
        if self.k > self.d:
            raise ConfigError("k", f"must not exceed d={self.d}")
        if self.n < 2:
            raise ConfigError("n", "must be >= 2")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha", f"must lie in (0, 1), got {self.alpha}")
        if not self.methods:
            raise ConfigError("methods", "empty method list")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError("methods", f"unknown methods {bad}; choose from {list(METHODS)}")
        if len(set(self.methods)) != len(self.methods):
            raise ConfigError("methods", "duplicate methods")
        if "DB" in self.methods:
            if self.B2 < 1:
                raise ConfigError("B2", "DB requires B2 >= 1")
            if len(self.db_laws) != 2:
                raise ConfigError("db_laws", "need exactly two laws")
            law2 = _law(self.db_laws[1])
            _law(self.db_laws[0])
            if abs(law2.gamma - 1.0) > 1e-9:
                raise ConfigError("db_laws", f"second-level law {law2} must have E v^3 = 1")
        if self.theta <= 0:
            raise ConfigError("theta", "must be positive")
        if self.case == "asymmetric" and self.theta != 1.0:
            raise ConfigError("theta", "the asymmetric design uses theta = 1")
        if self.marginal not in ("gamma", "normal"):
            raise ConfigError("marginal", f"must be 'gamma' or 'normal', got {self.marginal!r}")
        if self.threads != "auto" and (not isinstance(self.threads, int) or self.threads < 1):
            raise ConfigError("threads", f"must be a positive integer or 'auto', got {self.threads!r}")

    @property
    def workers(self) -> int:
        return (os.cpu_count() or 1) if self.threads == "auto" else int(self.threads)

    @property
    def cell_key(self) -> int:
        """Stable 32-bit key for the data-generating cell."""
        s = f"{self.design}|{self.case}|{self.n}|{self.d}|{self.rho!r}|{self.k}|{self.theta!r}|{self.marginal}"
        return zlib.crc32(s.encode())

    def fingerprint(self) -> dict:
        return {f: (list(v) if isinstance(v := getattr(self, f), tuple) else v) for f in _RESULT_FIELDS}

    def replace(self, **kw) -> "ExperimentConfig":
        return dataclasses.replace(self, **kw)

    def correlation_spec(self) -> CorrelationSpec:
        return CorrelationSpec.design(self.design, self.rho, self.d)


_FIELD_NAMES = {f.name for f in dataclasses.fields(ExperimentConfig)}

PRESETS = {
    "desk": dict(
        design=["I", "II"], rho=[0.2, 0.8], n=200, d=100, k=2, case=["asymmetric", "symmetric"],
        methods=["GB", "MB", "RB", "BB"], B1=299, B2=49, reps=2000,
    ),
    # long-running: several hours on 8 cores
    "full": dict(
        design=["I", "II"], rho=[0.2, 0.8], n=[200, 400], d=400, k=2, case=["asymmetric", "symmetric"],
        methods=list(METHODS), B1=499, B2=99, reps=1000,
    ),
}


def expand_config(doc: dict) -> list[ExperimentConfig]:
    """Expand a JSON document into one config per cell of its sweep grid.

    ``design``, ``rho``, ``n``, ``d``, ``k`` and ``case`` may be lists; the
    cells are their cross product in the listed order.
    """
    unknown = set(doc) - _FIELD_NAMES
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")
    doc = dict(doc)
    axes = []
    for name in _SWEEP_FIELDS:
        v = doc.pop(name, None)
        if v is None:
            continue
        vals = v if isinstance(v, list) else [v]
        if not vals:
            raise ConfigError(name, "empty sweep list")
        axes.append((name, vals))
    out = []
    for combo in itertools.product(*(vals for _, vals in axes)):
        kw = dict(doc)
        kw.update({name: val for (name, _), val in zip(axes, combo)})
        try:
            out.append(ExperimentConfig(**kw))
        except TypeError as exc:
            raise ConfigError("config", str(exc)) from None
    return out


def load_config(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config", "top level must be a JSON object")
    return doc


# ---------------------------------------------------------------- driver

_FACTORS: dict = {}


def _factor(cfg: ExperimentConfig):
    key = (cfg.design, cfg.rho, cfg.d)
    if key not in _FACTORS:
        _FACTORS.clear()
        _FACTORS[key] = cholesky(build_correlation(cfg.correlation_spec()))
    return _FACTORS[key]


def replicate(cfg: ExperimentConfig, r: int) -> tuple[dict, dict]:
    """Run replication ``r``: returns ``({method: reject}, {method: seconds})``."""
    cell, seed = cfg.cell_key, cfg.master_seed
    data = sample_copula_gamma(
        cfg.n, cfg.correlation_spec(), cfg.theta, cfg.case,
        stream(seed, cell, r, Role.DATA), factor=_factor(cfg), marginal=cfg.marginal,
    )
    X = data.values
    T = kth_order_stat(normalized_sum(X), cfg.k)
    rejects, secs = {}, {}
    for m in cfg.methods:
        t0 = time.perf_counter()
        rng = stream(seed, cell, r, Role[m], 0)
        if m == "EB":
            crit = bs.critical_value(bs.empirical_bootstrap_draws(X, cfg.B1, cfg.k, rng), 1.0 - cfg.alpha)
        elif m == "DB":
            law1, law2 = (_law(x) for x in cfg.db_laws)
            out = bs.double_bootstrap(
                X, law1, law2, cfg.B1, cfg.B2, cfg.alpha, cfg.k, rng, inner_rng=stream(seed, cell, r, Role.DB, 1)
            )
            crit = out.critical
        else:
            crit = bs.critical_value(bs.wild_bootstrap_draws(X, WILD_LAWS[m], cfg.B1, cfg.k, rng), 1.0 - cfg.alpha)
        rejects[m] = bool(T >= crit)
        secs[m] = time.perf_counter() - t0
    return rejects, secs


def _run_batch(cfg: ExperimentConfig, reps: Sequence[int]) -> list:
    return [(r, *replicate(cfg, r)) for r in reps]


def _init_worker():
    try:
        from threadpoolctl import threadpool_limits

        threadpool_limits(1)
    except ImportError:  # pragma: no cover
        pass


class Checkpoint:
    """Append-only JSON-lines record of finished replications.

    Line 1 is a header ``{"format", "version", "config"}``; each further line
    is ``{"r": rep, "reject": {method: 0|1}, "sec": {method: seconds}}``.  A
    partially written last line (interrupted run) is ignored on resume.
    """

    def __init__(self, path, cfg: ExperimentConfig):
        self.path = Path(path)
        self.header = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION, "config": cfg.fingerprint()}

    def load(self) -> dict:
        if not self.path.exists() or self.path.stat().st_size == 0:
            return {}
        done = {}
        with open(self.path) as fh:
            lines = fh.read().splitlines()
        try:
            head = json.loads(lines[0])
        except (json.JSONDecodeError, IndexError):
            raise ConfigError("checkpoint", f"{self.path} has no valid header") from None
        if head.get("format") != CHECKPOINT_FORMAT or head.get("version") != CHECKPOINT_VERSION:
            raise ConfigError("checkpoint", f"{self.path} is not a version {CHECKPOINT_VERSION} checkpoint")
        if head.get("config") != self.header["config"]:
            raise ConfigError("checkpoint", f"{self.path} belongs to a different configuration")
        for line in lines[1:]:
            try:
                rec = json.loads(line)
            except json.JSONDecodeError:
                continue
            done[int(rec["r"])] = ({m: bool(v) for m, v in rec["reject"].items()}, rec["sec"])
        return done

    def open(self, fresh: bool):
        if fresh or not self.path.exists() or self.path.stat().st_size == 0:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "w") as fh:
                fh.write(json.dumps(self.header) + "\n")
        else:
            # drop a torn last line so appended records start on a fresh line
            with open(self.path, "rb+") as fh:
                data = fh.read()
                if not data.endswith(b"\n"):
                    fh.truncate(data.rfind(b"\n") + 1)
        return open(self.path, "a")

    @staticmethod
    def write(fh, r, rej, sec):
        fh.write(json.dumps({"r": r, "reject": {m: int(v) for m, v in rej.items()}, "sec": sec}) + "\n")


@dataclass(frozen=True)
class SizeRow:
    design: str
    case: str
    n: int
    rho: float
    method: str
    k: int
    alpha: float
    reps: int
    rate: float
    se: float
    runtime_s: float

    def key(self):
        return (self.design, self.case, self.n, self.rho, self.method, self.k, self.alpha)


def mc_se(rate: float, reps: int) -> float:
    return math.sqrt(rate * (1.0 - rate) / reps)


@dataclass
class SizeTable:
    rows: list = field(default_factory=list)

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)

    def extend(self, other: "SizeTable") -> "SizeTable":
        self.rows.extend(other.rows)
        return self

    def get(self, method: str, **where) -> SizeRow:
        hits = [r for r in self.rows if r.method == method and all(getattr(r, k) == v for k, v in where.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {method} {where}")
        return hits[0]

    def rate(self, method: str, **where) -> float:
        return self.get(method, **where).rate

    @property
    def methods(self) -> list:
        return list(dict.fromkeys(r.method for r in self.rows))


def run_experiment(cfg: ExperimentConfig, *, checkpoint=None, resume: bool = True, progress=None) -> SizeTable:
    """Monte Carlo rejection rates of every configured method for one cell.

    ``checkpoint`` names a JSON-lines file; with ``resume`` finished
    replications found there are reused and only the rest are computed.
    """
    cfg.validate()
    done: dict = {}
    ck = Checkpoint(checkpoint, cfg) if checkpoint else None
    if ck and resume:
        done = ck.load()
    todo = [r for r in range(cfg.reps) if r not in done]
    batches = [todo[i : i + cfg.batch] for i in range(0, len(todo), cfg.batch)]
    fh = ck.open(fresh=not resume or not done) if ck else None
    try:
        def absorb(results):
            for r, rej, sec in results:
                done[r] = (rej, sec)
                if fh:
                    Checkpoint.write(fh, r, rej, sec)
            if fh:
                fh.flush()
            if progress:
                progress(len(done), cfg.reps)

        workers = min(cfg.workers, max(1, len(batches)))
        if workers <= 1:
            for b in batches:
                absorb(_run_batch(cfg, b))
        else:
            with ProcessPoolExecutor(workers, initializer=_init_worker) as pool:
                for res in pool.map(_run_batch, itertools.repeat(cfg), batches):
                    absorb(res)
    finally:
        if fh:
            fh.close()
    rows = []
    for m in cfg.methods:
        hits = sum(done[r][0][m] for r in range(cfg.reps))
        rate = hits / cfg.reps
        runtime = sum(done[r][1][m] for r in range(cfg.reps)) if cfg.record_runtime else 0.0
        rows.append(SizeRow(cfg.design, cfg.case, cfg.n, cfg.rho, m, cfg.k, cfg.alpha, cfg.reps, rate, mc_se(rate, cfg.reps), runtime))
    return SizeTable(rows)


def run_grid(cfgs: Iterable[ExperimentConfig], *, checkpoint_dir=None, resume: bool = True, progress=None) -> SizeTable:
    table = SizeTable()
    for cfg in cfgs:
        ck = None
        if checkpoint_dir:
            ck = Path(checkpoint_dir) / f"cell-{cfg.cell_key:08x}-{zlib.crc32(json.dumps(cfg.fingerprint()).encode()):08x}.jsonl"
        log.info("cell design=%s case=%s n=%d rho=%s", cfg.design, cfg.case, cfg.n, cfg.rho)
        table.extend(run_experiment(cfg, checkpoint=ck, resume=resume, progress=progress))
    return table


# ---------------------------------------------------------------- emission


def table_to_csv(table: SizeTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in table:
        w.writerow([r.design, r.case, r.n, repr(float(r.rho)), r.method, r.k, repr(float(r.alpha)), r.reps,
                    f"{r.rate:.4f}", f"{r.se:.4f}", f"{r.runtime_s:.3f}"])
    return buf.getvalue()


def table_from_csv(text: str) -> SizeTable:
    rd = csv.DictReader(io.StringIO(text))
    if tuple(rd.fieldnames or ()) != CSV_COLUMNS:
        raise ValueError(f"unexpected columns {rd.fieldnames}")
    rows = [
        SizeRow(d["design"], d["case"], int(d["n"]), float(d["rho"]), d["method"], int(d["k"]), float(d["alpha"]),
                int(d["reps"]), float(d["rate"]), float(d["se"]), float(d["runtime_s"]))
        for d in rd
    ]
    return SizeTable(rows)


def table_to_markdown(table: SizeTable) -> str:
    """Panel A (asymmetric) and Panel B (symmetric), one column per method."""
    methods = table.methods
    lines = []
    for label, case in (("Panel A: Asymmetric", "asymmetric"), ("Panel B: Symmetric", "symmetric")):
        rows = [r for r in table if r.case == case]
        if not rows:
            continue
        cells = {}
        for r in rows:
            cells.setdefault((r.design, r.n, r.rho, r.k), {})[r.method] = r
        multi_k = len({key[3] for key in cells}) > 1
        lines += [f"**{label}**", ""]
        head = ["Design", "n", "rho"] + (["k"] if multi_k else []) + methods
        lines.append("| " + " | ".join(head) + " |")
        lines.append("|" + "---|" * len(head))
        for (design, n, rho, k), by_m in cells.items():
            vals = [f"{by_m[m].rate:.4f}" if m in by_m else "" for m in methods]
            lead = [design, str(n), f"{rho:g}"] + ([str(k)] if multi_k else [])
            lines.append("| " + " | ".join(lead + vals) + " |")
        lines.append("")
    return "\n".join(lines)


def emit_table(table: SizeTable, fmt: str = "csv", out=None) -> str:
    """Render ``table`` as CSV or markdown; write it to ``out`` when given."""
    if not len(table):
        raise ValueError("empty table")
    if fmt == "csv":
        text = table_to_csv(table)
    elif fmt == "markdown":
        text = table_to_markdown(table)
    else:
        raise ConfigError("format", f"must be 'csv' or 'markdown', got {fmt!r}")
    if out is not None:
        Path(out).write_text(text)
    return text


# ---------------------------------------------------------------- diagnostics


@dataclass
class DiagnosticRow:
    diagnostic: str
    values: dict
    note: str = ""


@dataclass
class DiagnosticReport:
    rows: list = field(default_factory=list)

    def add(self, diagnostic, note="", **values):
        self.rows.append(DiagnosticRow(diagnostic, values, note))

    def get(self, diagnostic) -> DiagnosticRow:
        return next(r for r in self.rows if r.diagnostic == diagnostic)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("diagnostic", "quantity", "value", "note"))
        for row in self.rows:
            for q, v in row.values.items():
                w.writerow((row.diagnostic, q, _fmt(v), row.note))
        return buf.getvalue()

    def to_markdown(self) -> str:
        lines = []
        for row in self.rows:
            lines += [f"**{row.diagnostic}**" + (f" ({row.note})" if row.note else ""), ""]
            lines += ["| " + " | ".join(row.values) + " |", "|" + "---|" * len(row.values)]
            lines += ["| " + " | ".join(_fmt(v) for v in row.values.values()) + " |", ""]
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float) and math.isfinite(v):
        return f"{v:.6g}"
    return str(v)


def _population_variance(cfg: ExperimentConfig) -> float:
    if cfg.marginal == "normal":
        return 1.0
    return cfg.theta if cfg.case == "asymmetric" else 2.0 * cfg.theta


def run_diagnostics(cfg: ExperimentConfig) -> DiagnosticReport:
    """Estimate/bound pairs from the reference theory at the config's scale.

    * ``poisson_gap``: ``|G_k(t) - h_k(lambda(t))|`` at ``lambda(t) = 2`` under
      the design correlation, with the exact binomial gap and the
      aggregation bound.
    * ``cornish_fisher``: predictor terms against a Beta-multiplier bootstrap
      quantile on data with independent coordinates.
    * ``remainder_rd``: the block remainder for an AR(1) path with
      coefficient ``rho``.
    * ``block_exceedance``: simulated ``P(N_d != S_d)`` against its bound.
    """
    cfg.validate()
    rep = DiagnosticReport()
    seed, cell = cfg.master_seed, cfg.cell_key
    d, k = cfg.d, cfg.k
    lam0 = 2.0
    t_pois = float(norm_ppf(1.0 - lam0 / d))

    R = build_correlation(cfg.correlation_spec())
    pg = gref.poisson_gap(t_pois, gref.GaussianMarginals.equal(d, 1.0), k, R, cfg.diag_reps, stream(seed, cell, 0, Role.ORACLE, 0))
    exact = gref.binomial_poisson_gap(d, k, lam0)
    rep.add(
        "poisson_gap", "" if pg.exact else "Monte Carlo G_k",
        t=pg.t, lam=pg.lam, gk=pg.gk, gk_se=pg.gk_se, gap=pg.gap, binomial_gap=exact, aggregation_bound=pg.bound,
    )
    if pg.exact:
        # independent coordinates: G_k is the Poisson-binomial CDF itself
        rep.rows[-1].values["within_binomial_gap"] = bool(pg.gap <= exact + 1e-12)

    sigma = math.sqrt(_population_variance(cfg))
    indep = CorrelationSpec.design("I", 0.0, d)
    X = sample_copula_gamma(cfg.n, indep, cfg.theta, cfg.case, stream(seed, cell, 0, Role.ORACLE, 1), marginal=cfg.marginal).values
    try:
        inputs = EdgeworthInputs.from_sample(X, sigma**2, 1.0, cfg.k0)
        cf = cornish_fisher_predict(cfg.alpha, k, d, sigma, inputs)
        draws = bs.wild_bootstrap_draws(X, bs.BETA, cfg.diag_B, k, stream(seed, cell, 0, Role.ORACLE, 2))
        observed = bs.critical_value(draws, 1.0 - cfg.alpha)
        rep.add(
            "cornish_fisher", "independent coordinates, beta(0.1) multipliers",
            c_gauss=cf.c_gauss, linear=cf.linear_term, quadratic=cf.quadratic_term, predicted=cf.predicted,
            observed=observed, gauss_error=abs(cf.c_gauss - observed), cf_error=abs(cf.predicted - observed),
        )
    except KthBootError as exc:
        rep.add("cornish_fisher", f"skipped: {exc}")

    ar_rho = min(abs(cfg.rho), 0.99)
    params = mixing.MixingParams.for_ar1(ar_rho, d, cfg.n, cfg.k0, k)
    layout = mixing.block_layout(params)
    rd = mixing.remainder_rd(params, layout, allow_degenerate=True)
    note = "degenerate layout (q_d = 0)" if layout.degenerate else ""
    rep.add(
        "remainder_rd", note, m_d=layout.m_d, ell_d=layout.ell_d, q_d=layout.q_d, s_d=layout.s_d,
        eta1=rd.eta1, inv_qd=rd.inv_qd, mixing_term=rd.mixing_term, poisson_tail=rd.poisson_tail, r_d=rd.r_d,
        log10_mixing_term=rd.log10_mixing_term,
    )

    paths = sample_ar1_path(d, ar_rho, 1.0, stream(seed, cell, 0, Role.PATH), size=cfg.diag_paths)
    cmp = mixing.block_exceedance_compare(paths, layout, t_pois, k)
    p_hat = float(np.mean(cmp.mismatch))
    rep.add(
        "block_exceedance", note, t=t_pois, paths=cfg.diag_paths, mismatch_rate=p_hat,
        mismatch_se=mc_se(p_hat, cfg.diag_paths), event_mismatch_rate=float(np.mean(cmp.event_mismatch)),
        bound=mixing.bad_event_bound(layout, t_pois, 1.0, ar_rho),
    )
    return rep
