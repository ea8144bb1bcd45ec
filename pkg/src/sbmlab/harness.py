"""Parameter sweeps: seeded trials of detection and recovery methods on
sampled graphs, written as a flat CSV.

One *cell* is (grid point, trial). Its graph is drawn from a seed derived
from (base seed, point, trial), so every method sees the same graph; each
method then gets its own seed derived from (base seed, point, method,
trial). Rows are sorted before writing, so the output does not depend on
the order in which cells finish.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import rng as rngmod
from .abp import abp_multiclass_seed
from .exact import exact_success, two_round_exact
from .graph import Graph, read_edgelist
from .metrics import agreement, overlap_star, partition_to_labels, read_labels, separation
from .model import SbmParams, fit_block_matrix, sample_sbm
from .spectral import (adjacency_second_eigvec, laplacian_second_eigvec, nb_power_detect,
                       nb_second_eigvec_detect)
from .sphere import agnostic_sphere_compare, sphere_compare_known
from .thresholds import i_plus, snr

SCHEMA_VERSION = 1
HEADER = ("point", "method", "seed", "metric", "value", "status", "ms")
METRICS = ("agreement", "separation", "overlap", "exact_success", "runtime")


class ConfigError(ValueError):
    """Invalid sweep configuration."""


# -- methods -----------------------------------------------------------

def _snr_hint(params: SbmParams):
    try:
        value = float(snr(params)[0])
    except Exception:
        return None
    return value if value > 1 else None


def _run_abp(g, params, seed):
    return abp_multiclass_seed(g, k=params.k, seed=seed, snr=_snr_hint(params))


def _run_nb_power(g, params, seed):
    return partition_to_labels(nb_power_detect(g, seed=seed, snr=_snr_hint(params)).partition)


def _run_nb_eig(g, params, seed):
    return partition_to_labels(nb_second_eigvec_detect(g, seed=seed).partition)


def _run_adjacency(g, params, seed):
    return partition_to_labels(adjacency_second_eigvec(g).partition)


def _run_laplacian(g, params, seed):
    return partition_to_labels(laplacian_second_eigvec(g).partition)


def _sphere_labels(outcome):
    if not outcome.ok:
        raise RuntimeError(f"sphere comparison declined: {outcome.reason}")
    return outcome.labels


def _run_sphere(g, params, seed):
    return _sphere_labels(agnostic_sphere_compare(g, float(params.p.min()) * 0.8, seed=seed))


def _run_sphere_count(g, params, seed):
    return _sphere_labels(agnostic_sphere_compare(g, float(params.p.min()) * 0.8, seed=seed,
                                                  statistic="count"))


def _run_sphere_known(g, params, seed):
    return _sphere_labels(sphere_compare_known(g, params, seed=seed))


def _run_exact(g, params, seed):
    return two_round_exact(g, params, "abp", seed=seed).labels


def _run_exact_nb(g, params, seed):
    return two_round_exact(g, params, "nb-power", seed=seed).labels


METHODS = {
    "abp": _run_abp,
    "nb-power": _run_nb_power,
    "nb-eig": _run_nb_eig,
    "adjacency": _run_adjacency,
    "laplacian": _run_laplacian,
    "sphere": _run_sphere,
    "sphere-count": _run_sphere_count,
    "sphere-known": _run_sphere_known,
    "exact": _run_exact,
    "exact-nb": _run_exact_nb,
}


# -- configuration -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class SweepPoint:
    id: str
    params: SbmParams
    n: int


@dataclass(frozen=True, eq=False)
class SweepConfig:
    points: tuple
    methods: tuple
    trials: int = 1
    seed: int = 0
    metrics: tuple = ("agreement",)
    timing: bool = False
    out: str | None = None

    def __post_init__(self):
        if not self.points:
            raise ConfigError("sweep grid is empty")
        ids = [p.id for p in self.points]
        if len(set(ids)) != len(ids):
            raise ConfigError("grid point ids must be unique")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.methods:
            raise ConfigError("no methods given")
        for m in self.metrics:
            if m not in METRICS:
                raise ConfigError(f"unknown metric {m!r}; expected one of {METRICS}")

    @classmethod
    def from_dict(cls, d: dict) -> "SweepConfig":
        try:
            n_default = d.get("n")
            points = []
            for i, p in enumerate(d["points"]):
                if "q" in p:
                    params = SbmParams.from_dict(p)
                else:
                    params = SbmParams.symmetric(int(p["k"]), float(p["a"]), float(p["b"]),
                                                 p.get("regime", "constant"))
                n = int(p.get("n", n_default))
                points.append(SweepPoint(str(p.get("id", i)), params, n))
            return cls(tuple(points), tuple(d["methods"]), int(d.get("trials", 1)),
                       int(d.get("seed", 0)), tuple(d.get("metrics", ("agreement",))),
                       bool(d.get("timing", False)), d.get("out"))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"malformed sweep config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "SweepConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc


def ks_recipe(n: int = 30_000, trials: int = 10, seed: int = 0, diffs=(1, 2, 3, 4, 5),
              total: float = 6.0, methods=("abp", "nb-power")) -> SweepConfig:
    """k = 2, a + b fixed, a - b over ``diffs``; separation per trial."""
    points = tuple(SweepPoint(f"a-b={d:g}", SbmParams.symmetric(2, (total + d) / 2, (total - d) / 2), n)
                   for d in diffs)
    return SweepConfig(points, tuple(methods), trials, seed, ("separation",))


def exact_recipe(n: int = 5000, trials: int = 20, seed: int = 0,
                 gaps=(1.0, 1.2, 1.414, 1.6, 2.0), b: float = 1.0, methods=("exact",)) -> SweepConfig:
    """k = 2 log regime with sqrt(a) - sqrt(b) over ``gaps``; exact success per trial."""
    points = tuple(SweepPoint(f"gap={s:g}",
                              SbmParams.symmetric(2, (math.sqrt(b) + s) ** 2, b, "logarithmic"), n)
                   for s in gaps)
    return SweepConfig(points, tuple(methods), trials, seed, ("exact_success",))


RECIPES = {"ks": ks_recipe, "exact": exact_recipe}


# -- execution ---------------------------------------------------------

@dataclass(frozen=True)
class ResultRow:
    point: str
    method: str
    seed: int
    metric: str
    value: str
    status: str
    ms: str = ""

    def as_tuple(self):
        return (self.point, self.method, self.seed, self.metric, self.value, self.status, self.ms)


def _fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    return f"{float(value):.10g}"


def _metric(name: str, truth: np.ndarray, labels: np.ndarray, ms: float):
    if name == "agreement":
        return agreement(truth, labels)
    if name == "overlap":
        return overlap_star(truth, labels)
    if name == "separation":
        return separation(truth, labels == 1)
    if name == "exact_success":
        return exact_success(truth, labels)
    return ms  # runtime


def _status(exc: BaseException) -> str:
    return f"error:{type(exc).__name__}"


def run_cell(config: SweepConfig, point_index: int, trial: int, methods=None) -> list:
    """All rows of one (grid point, trial) cell; exceptions become rows."""
    registry = METHODS if methods is None else methods
    point = config.points[point_index]
    graph_seed = rngmod.child_seed(config.seed, "graph", point.id, trial)
    rows = []
    try:
        truth, g = sample_sbm(point.params, point.n, graph_seed)
    except Exception as exc:
        for m in config.methods:
            for metric in config.metrics:
                rows.append(ResultRow(point.id, m, trial, metric, "", _status(exc)))
        return rows
    for m in config.methods:
        seed = rngmod.child_seed(config.seed, "method", point.id, m, trial)
        start = time.perf_counter()
        try:
            fn = registry.get(m)
            if fn is None:
                raise ConfigError(f"unknown method {m!r}")
            labels = np.asarray(fn(g, point.params, seed))
            error = None
        except Exception as exc:
            error = exc
        ms = (time.perf_counter() - start) * 1000
        ms_text = f"{ms:.1f}" if config.timing else ""
        for metric in config.metrics:
            if error is not None:
                rows.append(ResultRow(point.id, m, trial, metric, "", _status(error), ms_text))
                continue
            try:
                value, status = _fmt(_metric(metric, truth, labels, ms)), "ok"
            except Exception as exc:
                value, status = "", _status(exc)
            rows.append(ResultRow(point.id, m, trial, metric, value, status, ms_text))
    return rows


def _cell_job(args):
    config, i, t = args
    return i, t, run_cell(config, i, t)


def run_sweep(config: SweepConfig, workers: int = 1, methods=None) -> list:
    """Run every cell and return rows in (point, method, trial, metric)
    order of the configuration. ``methods`` overrides the registry (it must
    be picklable when ``workers > 1``)."""
    jobs = [(config, i, t) for i in range(len(config.points)) for t in range(config.trials)]
    results = {}
    if workers > 1 and methods is None:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for i, t, rows in pool.map(_cell_job, jobs):
                results[i, t] = rows
    else:
        for _, i, t in jobs:
            results[i, t] = run_cell(config, i, t, methods)
    m_order = {m: j for j, m in enumerate(config.methods)}
    k_order = {m: j for j, m in enumerate(config.metrics)}
    rows = [(i, row) for (i, _), cell in results.items() for row in cell]
    rows.sort(key=lambda ir: (ir[0], m_order[ir[1].method], ir[1].seed, k_order[ir[1].metric]))
    return [row for _, row in rows]


def rows_to_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(HEADER)
    for row in rows:
        writer.writerow(row.as_tuple())
    return buf.getvalue()


def write_csv(rows, path) -> None:
    Path(path).write_text(rows_to_csv(rows))


def summarize(rows) -> list:
    """``[(point, method, metric, mean, ok_count, total)]`` in row order."""
    groups: dict = {}
    for row in rows:
        key = (row.point, row.method, row.metric)
        vals = groups.setdefault(key, [[], 0])
        vals[1] += 1
        if row.status == "ok":
            vals[0].append(float(row.value))
    return [(p, m, k, float(np.mean(v)) if v else float("nan"), len(v), tot)
            for (p, m, k), (v, tot) in groups.items()]


# -- ingestion ---------------------------------------------------------

def ingest_edgelist(path, n: int | None = None) -> Graph:
    return read_edgelist(path, n)


def ingest_labels(path, n: int | None = None) -> np.ndarray:
    return read_labels(path, n)


@dataclass
class IngestReport:
    n: int
    edges: int
    params: SbmParams | None = None
    snr: float | None = None
    i_plus: float | None = None
    extra: dict = field(default_factory=dict)

    def to_text(self) -> str:
        lines = [f"n = {self.n}", f"edges = {self.edges}"]
        if self.params is not None:
            lines += [f"p = {self.params.p.tolist()}", f"q = {self.params.q.tolist()}",
                      f"snr = {self.snr!r}", f"i_plus = {self.i_plus!r}"]
        return "\n".join(lines) + "\n"


def ingest(edges_path, labels_path=None, regime: str = "constant") -> IngestReport:
    """Read a graph (and optionally labels); with labels, fit block
    parameters and report their SNR and exact-recovery divergence."""
    g = ingest_edgelist(edges_path)
    if labels_path is None:
        return IngestReport(g.n, g.num_edges)
    x = ingest_labels(labels_path)
    if x.size < g.n:
        raise ValueError(f"labels file has {x.size} entries for {g.n} vertices")
    if x.size > g.n:
        g = Graph.from_edges(x.size, g.edge_array())
    params = fit_block_matrix(g, x, regime)
    ratio = float(snr(params)[0])
    ip = i_plus(params) if params.k >= 2 else float("nan")
    return IngestReport(g.n, g.num_edges, params, ratio, ip)
