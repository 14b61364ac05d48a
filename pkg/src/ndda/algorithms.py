"""Synchronous-round engines: N-DDA, CDA, DDA, DPG and the auxiliary sequence.

Multi-agent state is stored stacked, one row per agent. Every round function
is a pure map from the round-``t`` state to a new round-``t+1`` state; all
neighbour reads go through ``P @ (round-t array)``, which is the two-phase
synchronous exchange.
"""

import enum
from dataclasses import dataclass

import numpy as np

from .prox import DualProjector, project_rows


class DivergenceError(ArithmeticError):
    """A non-finite value appeared in an iterate or tracker."""

    def __init__(self, algorithm, t, agent, field):
        self.algorithm, self.t, self.agent, self.field = algorithm, t, agent, field
        super().__init__(f"{algorithm}: non-finite {field} at agent {agent + 1}, round {t}")


class AlgorithmKind(str, enum.Enum):
    CDA = "CDA"
    DDA = "DDA"
    DPG = "DPG"
    NDDA = "NDDA"


@dataclass(frozen=True)
class ControlSequence:
    """Positive control parameters: ``constant`` gives ``a``, ``inverse_sqrt`` gives ``c/sqrt(t+1)``."""

    kind: str
    value: float

    def __post_init__(self):
        if self.kind not in ("constant", "inverse_sqrt"):
            raise ValueError(f"unknown control sequence {self.kind!r}")
        if not self.value > 0:
            raise ValueError("control parameters must be positive")

    def __call__(self, t):
        if self.kind == "constant":
            return self.value
        return self.value / np.sqrt(t + 1.0)

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


def _check_finite(name, t, **arrays):
    for field, arr in arrays.items():
        bad = ~np.isfinite(arr)
        if bad.any():
            agent = int(np.argwhere(bad.reshape(arr.shape[0], -1).any(axis=1))[0, 0])
            raise DivergenceError(name, t, agent, field)


def _projector(inst):
    return DualProjector(inst.feasible_set)


def _weights(P):
    return getattr(P, "entries", P)


@dataclass(frozen=True)
class NDDAState:
    """Stacked agent states for N-DDA.

    ``z`` holds the accumulated scaled dual ``sum_{k<t} a h_k`` and ``grad`` the
    cached ``grad f_i(x_{i,t})``.
    """

    t: int
    x: np.ndarray
    s: np.ndarray
    h: np.ndarray
    z: np.ndarray
    grad: np.ndarray

    def agent(self, i):
        return {k: getattr(self, k)[i] for k in ("x", "s", "h", "z", "grad")}


def ndda_init(inst, P):
    if _weights(P).shape[0] != inst.n:
        raise ValueError("weight matrix and instance disagree on n")
    x = np.zeros((inst.n, inst.m))
    g = inst.gradients(x)
    return NDDAState(0, x, g.copy(), g.copy(), np.zeros_like(x), g)


def ndda_round(state, inst, P, a):
    """One N-DDA round with constant control ``a``.

    Order: accumulate ``z += a h_t`` and project to get ``x_{t+1}``; evaluate
    the new local gradients; update ``s`` with the gradient difference; update
    ``h`` with the ``s`` difference. Mixing uses the round-``t`` ``s`` and ``h``.
    """
    W = _weights(P)
    t = state.t + 1
    z = state.z + a * state.h
    _check_finite("NDDA", t, z=z)
    x = project_rows(_projector(inst), z)
    g = inst.gradients(x)
    s = W @ state.s + g - state.grad
    h = W @ state.h + s - state.s
    _check_finite("NDDA", t, s=s, h=h)
    return NDDAState(t, x, s, h, z, g)


@dataclass(frozen=True)
class CDAState:
    t: int
    x: np.ndarray
    u: np.ndarray  # sum_{k<=t-1} grad f(x_k)


def cda_init(inst):
    return CDAState(0, np.zeros(inst.m), np.zeros(inst.m))


def cda_round(state, inst, a_t):
    u = state.u + inst.gradient(state.x)
    x = _projector(inst)(a_t * u)
    return CDAState(state.t + 1, x, u)


@dataclass(frozen=True)
class DDAState:
    t: int
    x: np.ndarray
    q: np.ndarray


def dda_init(inst, P):
    if _weights(P).shape[0] != inst.n:
        raise ValueError("weight matrix and instance disagree on n")
    x = np.zeros((inst.n, inst.m))
    return DDAState(0, x, np.zeros_like(x))


def dda_round(state, inst, P, a_t):
    """Classical DDA in causal form: ``q_{t+1} = P q_t + grad f_i(x_t)``."""
    t = state.t + 1
    q = _weights(P) @ state.q + inst.gradients(state.x)
    _check_finite("DDA", t, q=q)
    x = project_rows(_projector(inst), a_t * q)
    return DDAState(t, x, q)


@dataclass(frozen=True)
class DPGState:
    t: int
    x: np.ndarray


def dpg_init(inst, P, x0=None):
    if _weights(P).shape[0] != inst.n:
        raise ValueError("weight matrix and instance disagree on n")
    x = np.zeros((inst.n, inst.m)) if x0 is None else np.array(x0, dtype=float)
    return DPGState(0, x)


def dpg_round(state, inst, P, alpha_t):
    t = state.t + 1
    v = _weights(P) @ state.x
    with np.errstate(over="ignore", invalid="ignore"):
        step = v - alpha_t * inst.gradients(v)
    _check_finite("DPG", t, step=step)
    x = np.stack([inst.feasible_set.project(r) for r in step])
    return DPGState(t, x)


@dataclass(frozen=True)
class AuxState:
    """Auxiliary centralized sequence driven by the exact mean gradient."""

    t: int
    y: np.ndarray
    w: np.ndarray  # sum_{k<t} a g_k


def auxiliary_init(m):
    return AuxState(0, np.zeros(m), np.zeros(m))


def auxiliary_round(aux, g_t, a, inst):
    w = aux.w + a * np.asarray(g_t)
    return AuxState(aux.t + 1, _projector(inst)(w), w)


class RunningMean:
    """Mean of everything passed to :meth:`update`, kept as a running sum."""

    def __init__(self):
        self.count = 0
        self.total = None

    def update(self, v):
        v = np.asarray(v, dtype=float)
        self.count += 1
        self.total = v.copy() if self.total is None else self.total + v
        return self.value

    @property
    def value(self):
        return None if self.total is None else self.total / self.count


def running_averages(ys, xs=None):
    """Ergodic averages of ``y_1..y_t`` (and per-agent ``x_1..x_t``) for every t.

    ``ys`` is the sequence ``y_1, y_2, ...`` (``y_0`` excluded); returns the list
    of ``y~_t`` and, when ``xs`` is given, the list of stacked ``x~_t``.
    """
    ym, xm = RunningMean(), RunningMean()
    y_avg = [ym.update(y) for y in ys]
    if xs is None:
        return y_avg
    return y_avg, [xm.update(x) for x in xs]


__all__ = [
    "AlgorithmKind", "ControlSequence", "DivergenceError",
    "NDDAState", "ndda_init", "ndda_round",
    "CDAState", "cda_init", "cda_round",
    "DDAState", "dda_init", "dda_round",
    "DPGState", "dpg_init", "dpg_round",
    "AuxState", "auxiliary_init", "auxiliary_round",
    "RunningMean", "running_averages",
]
