"""Experiment configuration, seeded runs, trace export and multi-run comparison."""

import copy
import json
import logging
import math
import time
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import algorithms as alg
from .analysis import (TraceChecks, check_admissible, fit_rate, max_admissible_a,
                       running_min, theorem_bound)
from .graph import Topology, erdos_renyi, metropolis_weights, second_singular_value
from .problem import generate_lasso, lasso_instance, load_lasso, reference_solution

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
RESULT_FORMAT = "ndda-run/1"
COLUMNS = ("t", "residual_x1", "residual_max", "f_x1", "gap_x1",
           "f_avg", "gap_avg", "consensus", "bound")


class ConfigError(ValueError):
    """Invalid run configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class InadmissibleStepError(ConfigError):
    pass


# -- configuration ------------------------------------------------------------

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "seed": 1,
    "problem": {"kind": "lasso", "n": 10, "m": 100, "p_i": 10,
                "noise_sigma2": 0.01, "sparsity": 5},
    "topology": {"kind": "erdos_renyi", "ratio": 0.3},
    "algorithm": "NDDA",
    "control": {"kind": "max_admissible"},
    "horizon": 10_000,
    "stride": 1,
    "output": None,
    "force": False,
    "reference_tol": 1e-10,
    "timing": False,
}

CONTROL_KINDS = ("constant", "inverse_sqrt", "max_admissible", "inverse_m")


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("problem", "topology", "control"):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class RunConfig:
    """Validated run configuration (JSON-compatible via :meth:`to_dict`)."""

    problem: dict
    topology: dict
    algorithm: str
    control: dict
    horizon: int
    stride: int = 1
    seed: int = 1
    output: str = None
    force: bool = False
    reference_tol: float = 1e-10
    timing: bool = False
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError("schema_version", f"unsupported version {self.schema_version}")
        try:
            self.algorithm = alg.AlgorithmKind(self.algorithm).value
        except ValueError:
            raise ConfigError("algorithm", f"unknown algorithm {self.algorithm!r}") from None
        for name in ("horizon", "stride", "seed"):
            val = getattr(self, name)
            if not isinstance(val, int) or isinstance(val, bool):
                raise ConfigError(name, f"must be an integer, got {val!r}")
        if self.horizon < 1:
            raise ConfigError("horizon", "must be >= 1")
        if self.stride < 1:
            raise ConfigError("stride", "must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("seed", "must fit in 64 unsigned bits")
        if not self.reference_tol > 0:
            raise ConfigError("reference_tol", "must be positive")
        self._check_problem()
        self._check_topology()
        self._check_control()

    def _check_problem(self):
        p = self.problem
        kind = p.get("kind")
        if kind == "lasso":
            for key in ("n", "m", "p_i", "sparsity"):
                if not isinstance(p.get(key), int) or p[key] < (0 if key == "sparsity" else 1):
                    raise ConfigError(f"problem.{key}", f"invalid value {p.get(key)!r}")
            if p["sparsity"] > p["m"]:
                raise ConfigError("problem.sparsity", "exceeds m")
            if not isinstance(p.get("noise_sigma2"), (int, float)) or p["noise_sigma2"] < 0:
                raise ConfigError("problem.noise_sigma2", "must be a nonnegative number")
        elif kind == "file":
            path = p.get("path")
            if not path or not Path(path).with_suffix(".json").exists():
                raise ConfigError("problem.path", f"instance file not found: {path!r}")
        else:
            raise ConfigError("problem.kind", f"unknown problem kind {kind!r}")

    def _check_topology(self):
        t = self.topology
        kind = t.get("kind")
        if kind == "erdos_renyi":
            r = t.get("ratio")
            if not isinstance(r, (int, float)) or not 0 < r <= 1:
                raise ConfigError("topology.ratio", "must be in (0, 1]")
        elif kind == "edges":
            if not isinstance(t.get("edges"), list):
                raise ConfigError("topology.edges", "must be a list of [i, j] pairs")
        elif kind == "file":
            if not Path(t.get("path", "")).exists():
                raise ConfigError("topology.path", f"topology file not found: {t.get('path')!r}")
        elif kind != "complete":
            raise ConfigError("topology.kind", f"unknown topology kind {kind!r}")

    def _check_control(self):
        c = self.control
        kind = c.get("kind")
        if kind not in CONTROL_KINDS:
            raise ConfigError("control.kind", f"must be one of {CONTROL_KINDS}")
        if kind in ("constant", "inverse_sqrt"):
            v = c.get("value")
            if not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError("control.value", "must be a positive number")
        if self.algorithm == "NDDA" and kind == "inverse_sqrt":
            raise ConfigError("control.kind", "N-DDA needs a constant control parameter")

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise ConfigError("<root>", "config must be a JSON object")
        known = set(DEFAULTS)
        extra = set(doc) - known
        if extra:
            raise ConfigError(sorted(extra)[0], "unknown field")
        merged = _merge(DEFAULTS, doc)
        return cls(**merged)

    @classmethod
    def load(cls, path):
        try:
            doc = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError("<file>", str(exc)) from None
        return cls.from_dict(doc)

    def to_dict(self):
        return {k: copy.deepcopy(getattr(self, k)) for k in DEFAULTS}

    def with_(self, **changes):
        doc = self.to_dict()
        doc.update(changes)
        return RunConfig.from_dict(doc)

    def instance_key(self):
        return json.dumps({"problem": self.problem, "topology": self.topology,
                           "seed": self.seed, "tol": self.reference_tol}, sort_keys=True)


def preset(name, algorithm="NDDA", **changes):
    """Named configurations: ``desk`` (seconds) and ``paper`` (the full LASSO setting)."""
    algorithm = alg.AlgorithmKind(algorithm).value
    baseline = {"kind": "inverse_sqrt", "value": 1.0}
    if name == "desk":
        doc = {"control": {"kind": "max_admissible"} if algorithm in ("NDDA", "CDA") else baseline}
    elif name == "paper":
        doc = {
            "problem": {"kind": "lasso", "n": 50, "m": 10_000, "p_i": 20,
                        "noise_sigma2": 0.01, "sparsity": 50},
            "topology": {"kind": "erdos_renyi", "ratio": 0.1},
            "control": {"kind": "inverse_m"} if algorithm in ("NDDA", "CDA") else baseline,
            "horizon": 1000,
            "force": algorithm == "NDDA",
        }
    else:
        raise ConfigError("preset", f"unknown preset {name!r}")
    doc["algorithm"] = algorithm
    doc.update(changes)
    return RunConfig.from_dict(doc)


# -- instance construction --------------------------------------------------------

@dataclass
class Setup:
    inst: object
    data: object
    topology: Topology
    P: object
    beta: float
    reference: object


_SETUP_CACHE = {}


def build(config):
    """Instance, topology, weights, beta and reference optimum for ``config`` (memoized)."""
    key = config.instance_key()
    if key in _SETUP_CACHE:
        return _SETUP_CACHE[key]
    p = config.problem
    ref = None
    if p["kind"] == "lasso":
        inst, data = generate_lasso(p["n"], p["m"], p["p_i"], p["noise_sigma2"], p["sparsity"],
                                    p.get("seed", config.seed))
    else:
        data, ref = load_lasso(p["path"])
        inst = lasso_instance(data)
        if ref is not None and ref.tol > config.reference_tol:
            ref = None
    t = config.topology
    if t["kind"] == "erdos_renyi":
        topo = erdos_renyi(inst.n, t["ratio"], t.get("seed", config.seed))
    elif t["kind"] == "complete":
        topo = Topology.complete(inst.n)
    elif t["kind"] == "edges":
        topo = Topology.from_dict({"n": inst.n, "edges": t["edges"]})
    else:
        topo = Topology.from_dict(json.loads(Path(t["path"]).read_text()))
    if topo.n != inst.n:
        raise ConfigError("topology", f"topology has {topo.n} nodes, problem has {inst.n}")
    P = metropolis_weights(topo)
    beta = second_singular_value(P).beta
    if ref is None:
        ref = reference_solution(inst, config.reference_tol)
    setup = Setup(inst, data, topo, P, beta, ref)
    _SETUP_CACHE[key] = setup
    return setup


def control_sequence(config, setup):
    c = config.control
    if c["kind"] == "max_admissible":
        return alg.ControlSequence("constant", max_admissible_a(setup.beta, setup.inst.L))
    if c["kind"] == "inverse_m":
        return alg.ControlSequence("constant", 1.0 / setup.inst.m)
    return alg.ControlSequence(c["kind"], float(c["value"]))


# -- certification --------------------------------------------------------------

def certify(config):
    """Admissibility report for the constant step implied by ``config``."""
    setup = build(config)
    ctrl = control_sequence(config, setup)
    if ctrl.kind != "constant":
        raise ConfigError("control.kind", "certification needs a constant control parameter")
    report = check_admissible(setup.beta, setup.inst.L, ctrl.value)
    doc = report.to_dict()
    doc["max_admissible_a"] = max_admissible_a(setup.beta, setup.inst.L)
    doc["n"] = setup.inst.n
    doc["m"] = setup.inst.m
    return doc


# -- runs --------------------------------------------------------------------------

@dataclass
class RunResult:
    config: dict
    a: float
    admissibility: dict
    records: np.ndarray  # one row per recorded round, columns COLUMNS
    checks: TraceChecks = None
    slopes: dict = field(default_factory=dict)
    final: dict = field(default_factory=dict)
    elapsed: float = 0.0
    wall: list = None
    format: str = RESULT_FORMAT

    def column(self, name):
        return self.records[:, COLUMNS.index(name)]

    def to_dict(self):
        doc = {
            "format": self.format,
            "config": self.config,
            "a": self.a,
            "admissibility": self.admissibility,
            "checks": None if self.checks is None else self.checks.summary(),
            "slopes": self.slopes,
            "final": self.final,
        }
        if self.config.get("timing"):
            doc["elapsed_s"] = self.elapsed
        return doc


def _fmt(v):
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


def write_trace(path, records, wall=None):
    cols = COLUMNS + (("wall_s",) if wall is not None else ())
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for k, row in enumerate(records):
            vals = [str(int(row[0]))] + [_fmt(v) for v in row[1:]]
            if wall is not None:
                vals.append(_fmt(wall[k]))
            fh.write(",".join(vals) + "\n")


def read_trace(path):
    """Parse a trace file into ``{column: ndarray}``; rejects unknown layouts."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if tuple(header[:len(COLUMNS)]) != COLUMNS:
            raise ValueError(f"unexpected trace header {header}")
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    arr = np.array(rows).reshape(-1, len(header))
    return {name: arr[:, k] for k, name in enumerate(header)}


def run(config, verify=True):
    """Run one configuration; writes the trace when ``config.output`` is set.

    N-DDA with an inadmissible constant step raises :class:`InadmissibleStepError`
    unless ``config.force`` is true, in which case it warns and skips the
    trace certificate.
    """
    setup = build(config)
    inst, P, ref = setup.inst, setup.P, setup.reference
    ctrl = control_sequence(config, setup)
    kind = config.algorithm
    admissibility = None
    certified = False
    if ctrl.kind == "constant":
        report = check_admissible(setup.beta, inst.L, ctrl.value)
        admissibility = report.to_dict()
        if kind == "NDDA" and not report.admissible:
            msg = (f"step a={ctrl.value:.6g} is not admissible (rho={report.rho:.6g}, "
                   f"bound={report.bound_value:.6g})")
            if not config.force:
                raise InadmissibleStepError("control", msg + "; pass force to run anyway")
            warnings.warn(msg + "; running without a certificate", RuntimeWarning, stacklevel=2)
        certified = kind == "NDDA" and report.admissible

    x_star = ref.x_star
    xs2 = float(x_star @ x_star)
    f_star = ref.f_star
    d_xstar = 0.5 * xs2
    T, stride = config.horizon, config.stride
    rows, wall = [], [] if config.timing else None
    checks = None
    if kind == "NDDA" and verify and certified:
        guard = 2 * ref.tol * float(np.linalg.norm(inst.gradient(x_star)))
        checks = TraceChecks(inst.n, ctrl.value, setup.beta, inst.L, objective=inst.value,
                             x_star=x_star, f_star=f_star, f_guard=guard)

    def residuals(X):
        X = np.atleast_2d(X)
        r = np.sum((X - x_star) ** 2, axis=1) / (xs2 if xs2 > 0 else 1.0)
        return float(r[0]), float(r.max())

    def record(t, X, avg, bound):
        X = np.atleast_2d(X)
        r1, rmax = residuals(X)
        f1 = inst.value(X[0])
        fa = inst.value(avg)
        cons = float(np.sum((X - X.mean(axis=0)) ** 2))
        rows.append((t, r1, rmax, f1, f1 - f_star, fa, fa - f_star, cons, bound))

    start = time.perf_counter()
    tick = start
    if kind == "NDDA":
        a = ctrl.value
        state = alg.ndda_init(inst, P)
        aux = alg.auxiliary_init(inst.m)
        y_mean = alg.RunningMean()
        for t in range(T + 1):
            g = state.grad.mean(axis=0)
            aux_next = alg.auxiliary_round(aux, g, a, inst)
            if checks is not None:
                checks.observe(t, state.x, state.s, state.h, g, aux.y, aux_next.y)
            if t >= 1:
                y_avg = y_mean.update(aux.y)
                if t % stride == 0:
                    bound = theorem_bound(inst.n, d_xstar, a, t)
                    record(t, state.x, y_avg, bound)
                    if wall is not None:
                        now = time.perf_counter()
                        wall.append(now - tick)
                        tick = now
            if t == T:
                break
            state = alg.ndda_round(state, inst, P, a)
            aux = aux_next
    else:
        if kind == "CDA":
            state = alg.cda_init(inst)
            step = lambda s, t: alg.cda_round(s, inst, ctrl(t))
        elif kind == "DDA":
            state = alg.dda_init(inst, P)
            step = lambda s, t: alg.dda_round(s, inst, P, ctrl(t))
        else:
            state = alg.dpg_init(inst, P)
            step = lambda s, t: alg.dpg_round(s, inst, P, ctrl(t))
        x1_mean = alg.RunningMean()
        for t in range(T):
            state = step(state, t)
            X = np.atleast_2d(state.x)
            avg = x1_mean.update(X[0])
            if (t + 1) % stride == 0:
                record(t + 1, X, avg, math.nan)
                if wall is not None:
                    now = time.perf_counter()
                    wall.append(now - tick)
                    tick = now
    elapsed = time.perf_counter() - start

    records = np.array(rows, dtype=float).reshape(-1, len(COLUMNS))
    result = RunResult(config.to_dict(), ctrl.value if ctrl.kind == "constant" else None,
                       admissibility, records, checks, elapsed=elapsed, wall=wall)
    result.final = {"gap_x1": _last(records, "gap_x1"), "gap_avg": _last(records, "gap_avg"),
                    "residual_x1": _last(records, "residual_x1"), "f_star": f_star}
    result.slopes = _slopes(records, T)
    if config.output:
        out = Path(config.output)
        write_trace(out, records, wall)
        out.with_suffix(".result.json").write_text(json.dumps(result.to_dict(), indent=1) + "\n")
    return result


def _last(records, name):
    return float(records[-1, COLUMNS.index(name)]) if len(records) else math.nan


def _slopes(records, T, lo=100):
    """Log-log slopes over ``[lo, T]`` when that spans at least one decade."""
    if T < 10 * lo or not len(records):
        return {}
    t = records[:, 0]
    out = {}
    for name in ("gap_x1", "gap_avg"):
        g = records[:, COLUMNS.index(name)]
        try:
            out[name] = fit_rate(t, g, (lo, T)).slope
            out[name + "_envelope"] = fit_rate(t, running_min(g), (lo, T)).slope
        except ValueError:
            out[name] = math.nan
    return out


def compare(configs):
    """Run configurations that share one instance and topology; tabulate the outcome."""
    configs = list(configs)
    if not configs:
        raise ConfigError("configs", "nothing to compare")
    keys = {c.instance_key() for c in configs}
    if len(keys) != 1:
        raise ConfigError("configs", "configurations do not share the same problem and topology")
    horizons = {c.horizon for c in configs}
    results = [run(c) for c in configs]
    table = []
    for c, r in zip(configs, results):
        table.append({
            "algorithm": c.algorithm,
            "a": r.a,
            "gap_x1": r.final["gap_x1"],
            "gap_avg": r.final["gap_avg"],
            "residual_x1": r.final["residual_x1"],
            **{f"slope_{k}": v for k, v in r.slopes.items()},
        })
    return {"format": RESULT_FORMAT, "horizons": sorted(horizons), "table": table, "results": results}
