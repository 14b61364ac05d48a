"""Local objectives, the distributed LASSO generator and reference optima."""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import _random
from .prox import FeasibleSet, L1Ball, Unconstrained

POWER_TOL = 1e-10
POWER_MAX_ITER = 1_000_000


def top_eigenvalue(B, tol=POWER_TOL, max_iter=POWER_MAX_ITER, seed=0):
    """Largest eigenvalue of a symmetric PSD matrix by power iteration."""
    v = _random.normals(_random.stream(seed, _random.START_VECTOR), B.shape[0])
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = B @ v
        lam = float(v @ w)
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        if np.linalg.norm(w - lam * v) <= tol * abs(lam):
            return lam
        v = w / nw
    raise ArithmeticError(f"power iteration did not converge in {max_iter} iterations")


class LocalObjective:
    """Convex ``f_i`` with ``smoothness``-Lipschitz gradient."""

    smoothness = None

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError


class LeastSquares(LocalObjective):
    """``f(x) = 0.5 ||y - A x||^2``."""

    def __init__(self, A, y):
        self.A = np.asarray(A, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if self.A.ndim != 2 or self.y.shape != (self.A.shape[0],):
            raise ValueError("A must be p x m and y of length p")
        self.smoothness = smoothness_of(self.A)

    @property
    def dim(self):
        return self.A.shape[1]

    def value(self, x):
        r = self.y - self.A @ x
        return 0.5 * float(r @ r)

    def gradient(self, x):
        return self.A.T @ (self.A @ x - self.y)


class Quadratic(LocalObjective):
    """``f(x) = 0.5 x^T Q x + c^T x`` with ``Q`` symmetric PSD."""

    def __init__(self, Q, c):
        self.Q = np.asarray(Q, dtype=float)
        self.c = np.asarray(c, dtype=float)
        self.smoothness = top_eigenvalue(self.Q) if np.any(self.Q) else 0.0

    @property
    def dim(self):
        return self.c.size

    def value(self, x):
        return 0.5 * float(x @ self.Q @ x) + float(self.c @ x)

    def gradient(self, x):
        return self.Q @ x + self.c


def smoothness_of(A):
    """``sigma_max(A)^2`` by power iteration on the smaller Gram matrix."""
    A = np.asarray(A, dtype=float)
    if not np.any(A):
        return 0.0
    G = A @ A.T if A.shape[0] < A.shape[1] else A.T @ A
    return top_eigenvalue(G)


@dataclass
class ProblemInstance:
    locals: list
    feasible_set: FeasibleSet

    def __post_init__(self):
        if not self.locals:
            raise ValueError("need at least one local objective")
        dims = {f.dim for f in self.locals}
        if dims != {self.feasible_set.dim}:
            raise ValueError(f"dimension mismatch: locals {dims}, set {self.feasible_set.dim}")
        if not self.L > 0:
            raise ValueError("smoothness constant must be positive")

    @property
    def n(self):
        return len(self.locals)

    @property
    def m(self):
        return self.feasible_set.dim

    @property
    def L(self):
        return max(f.smoothness for f in self.locals)

    def _stack(self):
        # batched path for equal-shape least-squares locals
        if not hasattr(self, "_stacked"):
            shapes = {f.A.shape for f in self.locals if isinstance(f, LeastSquares)}
            ok = len(shapes) == 1 and all(isinstance(f, LeastSquares) for f in self.locals)
            self._stacked = (np.stack([f.A for f in self.locals]),
                             np.stack([f.y for f in self.locals])) if ok else None
        return self._stacked

    def value(self, x):
        st = self._stack()
        if st is not None:
            r = st[0] @ x - st[1]
            return 0.5 * float(np.sum(r * r))
        return sum(f.value(x) for f in self.locals)

    def gradient(self, x):
        st = self._stack()
        if st is not None:
            A, y = st
            return np.einsum("npm,np->m", A, A @ x - y)
        return sum(f.gradient(x) for f in self.locals)

    def gradients(self, X):
        """Row ``i`` is ``grad f_i(X[i])``."""
        st = self._stack()
        if st is not None:
            A, y = st
            r = np.matmul(A, X[:, :, None])[:, :, 0] - y
            return np.matmul(r[:, None, :], A)[:, 0, :]
        return np.stack([f.gradient(x) for f, x in zip(self.locals, X)])


def local_gradient(inst, i, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (inst.m,):
        raise ValueError(f"expected a vector of length {inst.m}, got shape {x.shape}")
    return inst.locals[i].gradient(x)


def smoothness_constant(inst, i=None):
    return inst.L if i is None else inst.locals[i].smoothness


@dataclass
class LassoData:
    A: np.ndarray  # (n, p, m)
    y: np.ndarray  # (n, p)
    x_sharp: np.ndarray
    noise_sigma2: float
    R: float
    seed: int = 0


def generate_lasso(n, m, p_i, noise_sigma2, sparsity, seed, radius_factor=1.1):
    """Random distributed LASSO ``min sum_i 0.5 ||y_i - A_i x||^2, ||x||_1 <= R``.

    ``A_i`` has i.i.d. N(0, 1) entries, the planted ``x_sharp`` has ``sparsity``
    N(0, 1) entries on a uniformly random support, ``y_i = A_i x_sharp + b_i``
    with ``b_i ~ N(0, noise_sigma2)`` and ``R = radius_factor * ||x_sharp||_1``.
    When ``x_sharp = 0`` the radius falls back to 1 so the set stays a ball.
    """
    for name, val in (("n", n), ("m", m), ("p_i", p_i)):
        if int(val) < 1:
            raise ValueError(f"{name} must be positive, got {val}")
    if not 0 <= sparsity <= m:
        raise ValueError(f"sparsity must be in [0, m], got {sparsity}")
    if noise_sigma2 < 0:
        raise ValueError("noise variance must be nonnegative")
    A = np.stack([
        _random.normals(_random.stream(seed, _random.MATRIX_BASE + i), p_i * m).reshape(p_i, m)
        for i in range(n)
    ])
    x_sharp = np.zeros(m)
    if sparsity:
        keys = _random.uniforms(_random.stream(seed, _random.SUPPORT), m)
        support = np.sort(np.argsort(keys, kind="stable")[:sparsity])
        x_sharp[support] = _random.normals(_random.stream(seed, _random.SIGNAL), sparsity)
    b = np.sqrt(noise_sigma2) * _random.normals(_random.stream(seed, _random.NOISE), n * p_i)
    y = np.einsum("npm,m->np", A, x_sharp) + b.reshape(n, p_i)
    l1 = float(np.abs(x_sharp).sum())
    R = radius_factor * l1 if l1 > 0 else 1.0
    data = LassoData(A, y, x_sharp, float(noise_sigma2), R, int(seed))
    return lasso_instance(data), data


def lasso_instance(data):
    locals_ = [LeastSquares(Ai, yi) for Ai, yi in zip(data.A, data.y)]
    return ProblemInstance(locals_, L1Ball(data.A.shape[2], data.R))


@dataclass
class ReferenceSolution:
    x_star: np.ndarray
    f_star: float
    tol: float
    residual: float
    iterations: int


def reference_solution(inst, tol=1e-10, max_iter=10_000_000):
    """Accelerated projected gradient on ``f = sum_i f_i``.

    Step ``1/L_f`` with ``L_f`` the smoothness of the full sum, Nesterov
    momentum with function-value restart. Stops when the projected-gradient
    residual ``||x - proj(x - grad f(x) / L_f)||`` is at most ``tol``.
    """
    Lf = global_smoothness(inst)
    project = inst.feasible_set.project
    x = np.zeros(inst.m)
    z = x.copy()
    theta = 1.0
    fx = inst.value(x)
    for it in range(1, max_iter + 1):
        x_new = project(z - inst.gradient(z) / Lf)
        f_new = inst.value(x_new)
        if f_new > fx and theta > 1:
            # restart momentum from the last iterate
            theta = 1.0
            z = x
            continue
        theta_new = 0.5 * (1 + np.sqrt(1 + 4 * theta * theta))
        z = x_new + ((theta - 1) / theta_new) * (x_new - x)
        x, fx, theta = x_new, f_new, theta_new
        res = np.linalg.norm(x - project(x - inst.gradient(x) / Lf))
        if res <= tol:
            return ReferenceSolution(x, fx, tol, float(res), it)
    raise ArithmeticError(f"reference solver hit the iteration cap ({max_iter})")


def global_smoothness(inst):
    """Lipschitz constant of ``grad f`` for the full sum (not ``max_i L_i``)."""
    if all(isinstance(f, LeastSquares) for f in inst.locals):
        return smoothness_of(np.vstack([f.A for f in inst.locals]))
    Q = sum(f.Q for f in inst.locals if isinstance(f, Quadratic))
    if all(isinstance(f, Quadratic) for f in inst.locals):
        return top_eigenvalue(Q)
    return sum(f.smoothness for f in inst.locals)


# -- serialization --------------------------------------------------------

FORMAT = "ndda-lasso/1"


def save_lasso(data, path, reference=None):
    """Write ``<path>.json`` (header) and ``<path>.f64`` (little-endian doubles).

    The binary holds, in order and row-major: ``A_1 .. A_n`` (each p x m),
    ``y_1 .. y_n`` (each length p), then ``x_sharp`` (length m).
    """
    path = Path(path)
    n, p, m = data.A.shape
    header = {
        "format": FORMAT,
        "n": n, "m": m, "p_i": p,
        "seed": data.seed,
        "noise_sigma2": data.noise_sigma2,
        "R": data.R,
        "L": max(smoothness_of(Ai) for Ai in data.A),
        "dtype": "<f8",
        "layout": ["A (n, p, m)", "y (n, p)", "x_sharp (m,)"],
    }
    if reference is not None:
        header["reference"] = {"f_star": reference.f_star, "tol": reference.tol,
                               "x_star": reference.x_star.tolist()}
    blob = np.concatenate([data.A.ravel(), data.y.ravel(), data.x_sharp]).astype("<f8")
    path.with_suffix(".f64").write_bytes(blob.tobytes())
    path.with_suffix(".json").write_text(json.dumps(header, indent=1))


def load_lasso(path):
    """Inverse of :func:`save_lasso`; returns ``(data, reference or None)``."""
    path = Path(path)
    header = json.loads(path.with_suffix(".json").read_text())
    if header.get("format") != FORMAT:
        raise ValueError(f"unsupported instance format {header.get('format')!r}")
    n, m, p = header["n"], header["m"], header["p_i"]
    flat = np.frombuffer(path.with_suffix(".f64").read_bytes(), dtype="<f8").astype(float)
    if flat.size != n * p * m + n * p + m:
        raise ValueError("binary payload size does not match the header")
    A = flat[: n * p * m].reshape(n, p, m)
    y = flat[n * p * m: n * p * m + n * p].reshape(n, p)
    x_sharp = flat[n * p * m + n * p:]
    data = LassoData(A, y, x_sharp, header["noise_sigma2"], header["R"], header["seed"])
    ref = header.get("reference")
    if ref is not None:
        ref = ReferenceSolution(np.array(ref["x_star"]), ref["f_star"], ref["tol"], float("nan"), 0)
    return data, ref


__all__ = [
    "LocalObjective", "LeastSquares", "Quadratic", "ProblemInstance", "LassoData",
    "ReferenceSolution", "generate_lasso", "lasso_instance", "local_gradient",
    "smoothness_constant", "reference_solution", "global_smoothness", "Unconstrained",
    "save_lasso", "load_lasso",
]
