"""Config-driven Monte Carlo runner for the identification experiments.

A scenario is a JSON document with five sections (``graph``, ``filters``,
``input``, ``noise``, ``method``), a ``grid`` of dotted-path overrides whose
cartesian product defines the cells, and the trial count and master seed.
Every trial draws its own generator from ``(seed, cell, trial)``, so serial
and parallel runs emit identical rows.

Example
-------
>>> cfg = load_preset("fig1a")
>>> rows = run_scenario(cfg.with_trials(2))
>>> emit_csv(rows, "fig1a.csv", cfg.cell_keys)  # doctest: +SKIP
"""

from __future__ import annotations

import copy
import csv
import io
import itertools
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .dst import ObservationSet, Variant, build_system, filters_from_solution, true_coefficients
from .errors import ConfigError, GfidError, IoError
from .filters import (
    Bandlimited,
    CorrelatedNormal,
    DecreasingPositive,
    FirstEntryOne,
    FullNormal,
    IidNormal,
    IncrementBank,
    apply_filter,
    generate_filters,
    generate_input,
)
from .graphs import eigendecompose, generate_graph
from .noise import corrupt
from .recovery import SUCCESS_THRESHOLD, alignment_error, solve_nullspace
from .sparse import (
    CONSTRAINTS,
    DEFAULT_DELTA,
    SparseProblem,
    build_weights,
    certificate,
    constrained_variants,
    support_rank,
)

MAX_RESAMPLES = 1000
PRESETS = ("fig1a", "fig1b", "fig1c", "fig2a", "fig2b", "fig3a", "fig3b")
FIXED_COLUMNS = ("trial", "seed", "error", "success", "diag", "wall_ms")

__all__ = [
    "ScenarioConfig",
    "ResultRow",
    "load_config",
    "load_preset",
    "run_scenario",
    "emit_csv",
    "read_csv",
    "summarize",
    "child_seed",
    "PRESETS",
]

_GRAPH_PARAMS = {
    "er": ("n", "p"),
    "weighted_er": ("n", "p", "w_lo", "w_hi"),
    "watts_strogatz": ("n", "mean_degree", "rewire_p"),
    "sbm": ("n", "blocks", "p_within", "p_across"),
    "karate": (),
}
_RULES = {
    "correlated_normal": ("n_filters", "order", "a"),
    "iid_normal": ("orders",),
    "first_entry_one": ("orders",),
    "decreasing_positive": ("orders",),
}
_METHODS = ("ls", "l1_eq", "l1_ball")
_SECTIONS = ("graph", "filters", "input", "noise", "method")
_DISCRIMINATORS = {"graph": "model", "filters": "rule", "input": "kind"}


# --------------------------------------------------------------------------
# configuration


def _require(section, key, path):
    if key not in section:
        raise ConfigError(f"{path}.{key}", "missing")
    return section[key]


def _number(value, path, lo=None, hi=None, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if lo is not None and value < lo:
        raise ConfigError(path, f"must be >= {lo}, got {value}")
    if hi is not None and value > hi:
        raise ConfigError(path, f"must be <= {hi}, got {value}")
    return int(value) if integer else float(value)


def _int_list(value, path, lo=1):
    if not isinstance(value, list) or not value:
        raise ConfigError(path, "expected a non-empty list of integers")
    return tuple(_number(v, f"{path}[{i}]", lo=lo, integer=True) for i, v in enumerate(value))


@dataclass(frozen=True)
class CellSpec:
    """Fully validated settings of one grid cell."""

    graph_model: str
    graph_params: dict
    distinct_spectrum: bool
    rule: object
    nested: bool
    orders: tuple
    input_kind: object
    sigma: float
    method: str
    variant: Variant
    unknown_orders: tuple
    weights: str
    delta: float
    pin: int
    constraint: str
    enforce_rank: bool
    epsilon: object
    error_on: str
    error_metric: str
    threshold: float


def _graph_spec(sec, path):
    model = _require(sec, "model", path)
    if model not in _GRAPH_PARAMS:
        raise ConfigError(f"{path}.model", f"unknown model {model!r}; choose from {sorted(_GRAPH_PARAMS)}")
    params = {}
    for key in _GRAPH_PARAMS[model]:
        val = _require(sec, key, path)
        if key == "blocks" and isinstance(val, list):
            params[key] = list(_int_list(val, f"{path}.blocks"))
        elif key in ("n", "mean_degree", "blocks"):
            params[key] = _number(val, f"{path}.{key}", lo=1, integer=True)
        elif key in ("w_lo", "w_hi"):
            params[key] = _number(val, f"{path}.{key}", lo=0)
        else:
            params[key] = _number(val, f"{path}.{key}", lo=0, hi=1)
    extra = set(sec) - set(_GRAPH_PARAMS[model]) - {"model", "label", "distinct_spectrum"}
    if extra:
        raise ConfigError(path, f"unexpected keys {sorted(extra)} for model {model!r}")
    distinct = sec.get("distinct_spectrum", False)
    if not isinstance(distinct, bool):
        raise ConfigError(f"{path}.distinct_spectrum", "expected true/false")
    n = 34 if model == "karate" else params["n"]
    return model, params, distinct, n


def _filter_spec(sec, path):
    rule = _require(sec, "rule", path)
    if rule not in _RULES:
        raise ConfigError(f"{path}.rule", f"unknown rule {rule!r}; choose from {sorted(_RULES)}")
    for key in _RULES[rule]:
        _require(sec, key, path)
    nested = sec.get("nested", rule == "decreasing_positive")
    if not isinstance(nested, bool):
        raise ConfigError(f"{path}.nested", "expected true/false")
    if rule == "correlated_normal":
        m = _number(sec["n_filters"], f"{path}.n_filters", lo=2, integer=True)
        order = _number(sec["order"], f"{path}.order", lo=1, integer=True)
        a = _number(sec["a"], f"{path}.a", lo=0, hi=1)
        if nested:
            raise ConfigError(f"{path}.nested", "correlated filters cannot be nested")
        return CorrelatedNormal(m, order, a), False, (order,) * m
    orders = _int_list(sec["orders"], f"{path}.orders")
    if len(orders) < 2:
        raise ConfigError(f"{path}.orders", "need at least two filters")
    if nested and any(b <= a for a, b in zip(orders, orders[1:])):
        raise ConfigError(f"{path}.orders", "nested filters need strictly increasing orders")
    if rule == "iid_normal":
        return IidNormal(orders, nested), nested, orders
    if rule == "first_entry_one":
        return FirstEntryOne(orders, nested), nested, orders
    if not nested:
        raise ConfigError(f"{path}.nested", "decreasing_positive filters are always nested")
    lo = _number(sec.get("lo", 0.2), f"{path}.lo", lo=0)
    hi = _number(sec.get("hi", 1.0), f"{path}.hi", lo=lo)
    if lo <= 0:
        raise ConfigError(f"{path}.lo", "must be > 0")
    return DecreasingPositive(orders, lo, hi), True, orders


def _input_spec(sec, path, n):
    kind = _require(sec, "kind", path)
    if kind == "full":
        return FullNormal()
    if kind == "bandlimited":
        k = _number(_require(sec, "k", path), f"{path}.k", lo=1, hi=n, integer=True)
        return Bandlimited(k)
    raise ConfigError(f"{path}.kind", f"expected 'full' or 'bandlimited', got {kind!r}")


def _method_spec(sec, path, orders, nested, metric):
    kind = _require(sec, "kind", path)
    if kind not in _METHODS:
        raise ConfigError(f"{path}.kind", f"expected one of {_METHODS}, got {kind!r}")
    try:
        variant = Variant(_require(sec, "variant", path))
    except ValueError:
        raise ConfigError(f"{path}.variant", f"expected one of {[v.value for v in Variant]}") from None
    single = variant in (Variant.SINGLE_KNOWN, Variant.SINGLE_OVERSHOOT)
    if single != nested:
        raise ConfigError(f"{path}.variant",
                          f"{variant.value} needs {'nested' if single else 'independent'} filters")
    if variant in (Variant.MULTI_OVERSHOOT, Variant.SINGLE_OVERSHOOT):
        unknown = _int_list(_require(sec, "overshoot", path), f"{path}.overshoot")
        if len(unknown) != len(orders):
            raise ConfigError(f"{path}.overshoot", f"need {len(orders)} entries")
        if any(q < L for q, L in zip(unknown, orders)):
            raise ConfigError(f"{path}.overshoot", "overshoot orders must be >= the true orders")
    else:
        unknown = orders
    if kind == "ls" and variant not in (Variant.MULTI_KNOWN, Variant.SINGLE_KNOWN):
        raise ConfigError(f"{path}.variant", "least squares needs known orders")
    weights = sec.get("weights", "identity")
    if weights not in ("identity", "exponential"):
        raise ConfigError(f"{path}.weights", "expected 'identity' or 'exponential'")
    delta = _number(sec.get("delta", DEFAULT_DELTA), f"{path}.delta", lo=0)
    pin = _number(sec.get("pin", 0), f"{path}.pin", lo=0, hi=sum(unknown) - 1, integer=True)
    constraint = sec.get("constraint", "none")
    if constraint not in CONSTRAINTS:
        raise ConfigError(f"{path}.constraint", f"expected one of {CONSTRAINTS}")
    if constraint != "none" and kind == "ls":
        raise ConfigError(f"{path}.constraint", "priors apply to the l1 methods only")
    enforce = sec.get("enforce_rank", False)
    if not isinstance(enforce, bool):
        raise ConfigError(f"{path}.enforce_rank", "expected true/false")
    eps = sec.get("epsilon", "truth")
    if eps != "truth":
        eps = _number(eps, f"{path}.epsilon", lo=0)
    error_on = sec.get("error_on", "system")
    if error_on not in ("system", "last_filter"):
        raise ConfigError(f"{path}.error_on", "expected 'system' or 'last_filter'")
    if metric == "pinned" and (kind == "ls" or error_on != "system"):
        raise ConfigError("error_metric", "the pinned metric applies to l1 methods on the system vector")
    return dict(method=kind, variant=variant, unknown_orders=unknown, weights=weights, delta=delta,
                pin=pin, constraint=constraint, enforce_rank=enforce, epsilon=eps,
                error_on=error_on)


def _deep_set(doc, dotted, value, path):
    keys = dotted.split(".")
    target = doc
    for k in keys[:-1]:
        if not isinstance(target.get(k), dict):
            raise ConfigError(path, f"{dotted!r} does not name a config field")
        target = target[k]
    if isinstance(value, dict):
        if keys[-1] in _SECTIONS and len(keys) == 1:
            # switching graph model or filter rule drops the old parameters
            disc = _DISCRIMINATORS.get(keys[-1])
            old = target.get(keys[-1], {})
            merged = {} if disc in value and value[disc] != old.get(disc) else dict(old)
            merged.update(value)
            target[keys[-1]] = merged
        elif isinstance(target.get(keys[-1]), dict):
            target[keys[-1]].update(value)
        else:
            target[keys[-1]] = value
    else:
        target[keys[-1]] = value


def _label(value):
    if isinstance(value, dict):
        return str(value["label"])
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list):
        return "-".join(str(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class ScenarioConfig:
    """A validated scenario: base document, grid and trial settings."""

    name: str
    base: dict
    grid: tuple  # ((dotted key, (values...)), ...)
    trials: int
    full_trials: int
    seed: int
    success_threshold: float
    error_metric: str
    plot: dict | None = None
    description: str = ""

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "expected a JSON object")
        name = doc.get("name", "scenario")
        if not isinstance(name, str) or not name:
            raise ConfigError("name", "expected a non-empty string")
        trials = _number(_require(doc, "trials", "<root>"), "trials", lo=1, integer=True)
        full = _number(doc.get("full_trials", trials), "full_trials", lo=1, integer=True)
        seed = _number(doc.get("seed", 0), "seed", lo=0, integer=True)
        thr = _number(doc.get("success_threshold", SUCCESS_THRESHOLD), "success_threshold", lo=0)
        metric = doc.get("error_metric", "aligned")
        if metric not in ("aligned", "pinned"):
            raise ConfigError("error_metric", "expected 'aligned' or 'pinned'")
        base = {}
        for sec in _SECTIONS:
            val = doc.get(sec)
            if not isinstance(val, dict):
                raise ConfigError(sec, "missing section (expected an object)")
            base[sec] = copy.deepcopy(val)
        grid_doc = doc.get("grid", {})
        if not isinstance(grid_doc, dict):
            raise ConfigError("grid", "expected an object mapping dotted keys to lists")
        grid = []
        for key, values in grid_doc.items():
            path = f"grid.{key}"
            if not isinstance(values, list) or not values:
                raise ConfigError(path, "expected a non-empty list")
            if any(isinstance(v, dict) and "label" not in v for v in values):
                raise ConfigError(path, "object values need a 'label'")
            grid.append((key, tuple(copy.deepcopy(values))))
        known = set(_SECTIONS) | {"name", "trials", "full_trials", "seed", "success_threshold",
                                  "error_metric", "grid", "plot", "description"}
        extra = set(doc) - known
        if extra:
            raise ConfigError("<root>", f"unexpected keys {sorted(extra)}")
        plot = doc.get("plot")
        if plot is not None and not isinstance(plot, dict):
            raise ConfigError("plot", "expected an object")
        cfg = cls(name=name, base=base, grid=tuple(grid), trials=trials, full_trials=full,
                  seed=seed, success_threshold=thr, error_metric=metric, plot=plot,
                  description=str(doc.get("description", "")))
        for idx in range(cfg.n_cells):
            cfg.cell(idx)  # validates every combination
        return cfg

    def to_dict(self):
        doc = {"name": self.name, "description": self.description, "trials": self.trials,
               "full_trials": self.full_trials, "seed": self.seed,
               "success_threshold": self.success_threshold, "error_metric": self.error_metric}
        doc.update(copy.deepcopy(self.base))
        doc["grid"] = {k: list(v) for k, v in self.grid}
        if self.plot is not None:
            doc["plot"] = copy.deepcopy(self.plot)
        return doc

    @property
    def cell_keys(self):
        return tuple(k for k, _ in self.grid)

    @property
    def n_cells(self):
        return math.prod(len(v) for _, v in self.grid)

    def cell_values(self, index):
        combos = itertools.product(*(v for _, v in self.grid))
        return next(itertools.islice(combos, index, None))

    def cell_labels(self, index):
        return tuple(_label(v) for v in self.cell_values(index))

    def cell(self, index) -> CellSpec:
        doc = copy.deepcopy(self.base)
        for (key, _), value in zip(self.grid, self.cell_values(index)):
            _deep_set(doc, key, value, f"grid.{key}")
        model, params, distinct, n = _graph_spec(doc["graph"], "graph")
        rule, nested, orders = _filter_spec(doc["filters"], "filters")
        kind = _input_spec(doc["input"], "input", n)
        sigma = _number(_require(doc["noise"], "sigma", "noise"), "noise.sigma", lo=0)
        method = _method_spec(doc["method"], "method", orders, nested, self.error_metric)
        if method["method"] == "l1_ball" and sigma == 0 and method["epsilon"] == "truth":
            raise ConfigError("method.epsilon", "the ball method needs noise or an explicit epsilon")
        return CellSpec(graph_model=model, graph_params=params, distinct_spectrum=distinct,
                        rule=rule, nested=nested, orders=orders, input_kind=kind, sigma=sigma,
                        threshold=self.success_threshold, error_metric=self.error_metric,
                        **method)

    def with_trials(self, trials):
        return _replace(self, trials=int(trials))

    def with_seed(self, seed):
        return _replace(self, seed=int(seed))

    def full_scale(self):
        return _replace(self, trials=self.full_trials)


def _replace(cfg, **changes):
    doc = cfg.to_dict()
    doc.update(changes)
    if "trials" in changes:
        doc["full_trials"] = max(doc["full_trials"], changes["trials"])
    return ScenarioConfig.from_dict(doc)


def load_config(path) -> ScenarioConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("<file>", f"invalid JSON: {exc}") from exc
    return ScenarioConfig.from_dict(doc)


def preset_document(name):
    if name not in PRESETS:
        raise ConfigError("preset", f"unknown preset {name!r}; choose from {PRESETS}")
    text = resources.files("gfid").joinpath("presets", f"{name}.json").read_text()
    return json.loads(text)


def load_preset(name) -> ScenarioConfig:
    return ScenarioConfig.from_dict(preset_document(name))


# --------------------------------------------------------------------------
# trials


def child_seed(master, cell, trial):
    """Per-trial seed derived from ``(master seed, cell index, trial index)``."""
    return int(np.random.SeedSequence([master, cell, trial]).generate_state(1)[0])


@dataclass(frozen=True)
class ResultRow:
    scenario: str
    cell: tuple  # labels of the grid values, in grid-key order
    trial: int
    seed: int
    error: float
    success: bool
    diag: float
    wall_ms: float | None = None

    def fields(self):
        wall = "" if self.wall_ms is None else repr(round(self.wall_ms, 3))
        return [self.scenario, *self.cell, str(self.trial), str(self.seed), repr(float(self.error)),
                str(int(self.success)), repr(float(self.diag)), wall]


class _Resample(Exception):
    pass


def _draw_instance(spec: CellSpec, rng):
    gso = generate_graph(spec.graph_model, rng, **spec.graph_params)
    basis = eigendecompose(gso)
    if spec.distinct_spectrum and basis.n_distinct < basis.n:
        raise _Resample
    bank = generate_filters(spec.rule, rng)
    x, _ = generate_input(spec.input_kind, basis, rng)
    filters = bank.to_filter_bank() if isinstance(bank, IncrementBank) else bank
    clean = [apply_filter(f, basis, x) for f in filters]
    outputs = np.array([corrupt(y, spec.sigma, rng) for y in clean])
    obs = ObservationSet.from_outputs(outputs, basis)
    system = build_system(obs, basis, spec.unknown_orders, spec.variant)
    truth = true_coefficients(bank, spec.variant, spec.unknown_orders)
    return system, truth


def _sparse_problem(spec, system, truth):
    weights = build_weights(spec.weights, spec.unknown_orders)
    problem = SparseProblem.from_system(system, weights, truth=truth, pin=spec.pin)
    if spec.method == "l1_ball":
        eps = problem.truth_residual() if spec.epsilon == "truth" else spec.epsilon
        problem = SparseProblem(phi=problem.phi, b=problem.b, weights=problem.weights,
                                epsilon=float(eps), pin=problem.pin, truth=problem.truth,
                                support_truth=problem.support_truth, coeff_map=problem.coeff_map)
    return problem


def _error(spec, estimate, truth):
    if spec.error_on == "last_filter":
        est = filters_from_solution(estimate, spec.variant, spec.unknown_orders).filters[-1].coeffs
        ref = filters_from_solution(truth, spec.variant, spec.unknown_orders).filters[-1].coeffs
        width = max(est.size, ref.size)
        estimate = np.pad(est, (0, width - est.size))
        truth = np.pad(ref, (0, width - ref.size))
    if spec.error_metric == "aligned":
        return alignment_error(estimate, truth)
    if estimate[spec.pin] == 0:
        return math.inf
    est = np.delete(estimate / estimate[spec.pin], spec.pin)
    ref = np.delete(truth / truth[spec.pin], spec.pin)
    return float(np.linalg.norm(est - ref) / np.linalg.norm(ref))


def run_trial(spec: CellSpec, seed):
    """One trial: returns ``(error, success, diag)``; failures give ``(nan, False, nan)``."""
    rng = np.random.default_rng(seed)
    try:
        for _ in range(MAX_RESAMPLES):
            try:
                system, truth = _draw_instance(spec, rng)
                problem = None
                if spec.method != "ls":
                    problem = _sparse_problem(spec, system, truth)
                    on = problem.support_truth
                    if spec.enforce_rank and support_rank(problem.phi[:, on]) < on.size:
                        raise _Resample
                break
            except _Resample:
                continue
        else:
            return math.nan, False, math.nan
        if spec.method == "ls":
            res = solve_nullspace(system)
            estimate, diag = res.estimate, res.gap
        else:
            res = constrained_variants(problem, spec.constraint)
            estimate = res.full
            try:
                diag = certificate(problem, spec.delta).xi
            except GfidError:
                diag = math.nan
        error = _error(spec, estimate, truth)
    except (GfidError, np.linalg.LinAlgError, FloatingPointError):
        return math.nan, False, math.nan
    return error, bool(error < spec.threshold), float(diag)


def _task(args):
    name, labels, spec, trial, seed, timing = args
    start = time.perf_counter()
    error, success, diag = run_trial(spec, seed)
    wall = (time.perf_counter() - start) * 1e3 if timing else None
    return ResultRow(scenario=name, cell=labels, trial=trial, seed=seed, error=error,
                     success=success, diag=diag, wall_ms=wall)


def run_scenario(config: ScenarioConfig, workers=1, timing=False):
    """Yield one :class:`ResultRow` per (cell, trial), in that order.

    ``workers > 1`` runs trials in a process pool; rows still come out in
    deterministic order and are identical to a serial run.  ``wall_ms`` is
    filled only when ``timing`` is set, so that CSVs stay byte-reproducible.
    """
    tasks = []
    for cell in range(config.n_cells):
        spec = config.cell(cell)
        labels = config.cell_labels(cell)
        for trial in range(config.trials):
            tasks.append((config.name, labels, spec, trial,
                          child_seed(config.seed, cell, trial), timing))
    if workers <= 1:
        for t in tasks:
            yield _task(t)
        return
    chunk = max(1, len(tasks) // (workers * 8))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield from pool.map(_task, tasks, chunksize=chunk)


# --------------------------------------------------------------------------
# output


def header(cell_keys):
    return ["scenario", *cell_keys, *FIXED_COLUMNS]


def emit_csv(rows, path, cell_keys=()):
    """Write the header and ``rows`` to ``path`` (a path, or ``'-'``/a text stream).

    Returns the number of rows written.
    """
    def write(handle):
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header(cell_keys))
        count = 0
        for row in rows:
            writer.writerow(row.fields())
            count += 1
        return count

    if hasattr(path, "write"):
        return write(path)
    try:
        with open(path, "w", newline="") as handle:
            return write(handle)
    except OSError as exc:
        raise IoError(f"cannot write {path}: {exc}") from exc


def read_csv(path):
    """Load a results CSV as ``(cell_keys, records)`` with typed numeric fields."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    head = next(reader)
    cell_keys = tuple(head[1:-len(FIXED_COLUMNS)])
    records = []
    for fields in reader:
        rec = dict(zip(head, fields))
        rec["error"] = float(rec["error"])
        rec["success"] = rec["success"] == "1"
        rec["diag"] = float(rec["diag"])
        rec["trial"] = int(rec["trial"])
        records.append(rec)
    return cell_keys, records


def summarize(rows, cell_keys=None):
    """Per-cell aggregates: trial count, success rate, median and mean error.

    ``rows`` are :class:`ResultRow` objects or records from :func:`read_csv`.
    Failed trials (NaN error) count as unsuccessful and are left out of the
    error statistics.
    """
    groups = {}
    for row in rows:
        if isinstance(row, ResultRow):
            key, err, ok = row.cell, row.error, row.success
        else:
            key, err, ok = tuple(row[k] for k in cell_keys), row["error"], row["success"]
        groups.setdefault(key, []).append((err, ok))
    out = {}
    for key, vals in groups.items():
        errs = np.array([e for e, _ in vals], dtype=float)
        finite = errs[~np.isnan(errs)]
        out[key] = {
            "trials": len(vals),
            "rate": float(np.mean([ok for _, ok in vals])),
            "median_error": float(np.median(finite)) if finite.size else math.nan,
            "mean_error": float(np.mean(finite)) if finite.size else math.nan,
            "failed": int(np.isnan(errs).sum()),
        }
    return out
