"""Prox-functions, Bregman divergences and the dual-averaging projection oracle."""

from dataclasses import dataclass

import numpy as np


def _finite(v, name="input"):
    v = np.asarray(v, dtype=float)
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains NaN or Inf")
    return v


def project_l1(v, R):
    """Euclidean projection of ``v`` onto ``{x : ||x||_1 <= R}``.

    Sort-and-threshold: sort ``|v|`` descending (stable, so ties keep
    coordinate order), find the last index ``k`` with
    ``|v|_(k) > (sum_{j<=k} |v|_(j) - R) / k`` and soft-threshold at that level.
    """
    v = _finite(v)
    if R <= 0:
        raise ValueError(f"radius must be positive, got {R}")
    a = np.abs(v)
    if a.sum() <= R:
        return v.copy()
    order = np.argsort(-a, kind="stable")
    mu = a[order]
    cssv = np.cumsum(mu) - R
    k = np.arange(1, mu.size + 1)
    rho = np.nonzero(mu * k > cssv)[0][-1]
    theta = cssv[rho] / (rho + 1.0)
    return np.sign(v) * np.maximum(a - theta, 0.0)


class FeasibleSet:
    """Closed convex set containing the origin, with a Euclidean projection."""

    kind = None

    def __init__(self, dim):
        self.dim = int(dim)

    def project(self, v):
        raise NotImplementedError

    def contains(self, x, tol=1e-12):
        raise NotImplementedError

    def to_dict(self):
        return {"kind": self.kind, "dim": self.dim}

    @staticmethod
    def from_dict(doc):
        kind = doc["kind"]
        if kind == "unconstrained":
            return Unconstrained(doc["dim"])
        if kind == "l1_ball":
            return L1Ball(doc["dim"], doc["radius"])
        if kind == "box":
            return Box(doc["lo"], doc["hi"])
        raise ValueError(f"unknown feasible set kind {kind!r}")


class Unconstrained(FeasibleSet):
    kind = "unconstrained"

    def project(self, v):
        return _finite(v).copy()

    def contains(self, x, tol=1e-12):
        return bool(np.all(np.isfinite(x)))


class L1Ball(FeasibleSet):
    kind = "l1_ball"

    def __init__(self, dim, radius):
        super().__init__(dim)
        if not radius > 0:
            raise ValueError(f"l1 radius must be positive, got {radius}")
        self.radius = float(radius)

    def project(self, v):
        return project_l1(v, self.radius)

    def contains(self, x, tol=1e-12):
        return float(np.abs(x).sum()) <= self.radius * (1 + tol)

    def to_dict(self):
        return {**super().to_dict(), "radius": self.radius}


class Box(FeasibleSet):
    kind = "box"

    def __init__(self, lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        if lo.shape != hi.shape:
            raise ValueError("box bounds differ in shape")
        if np.any(lo > 0) or np.any(hi < 0):
            raise ValueError("box must contain the origin (lo <= 0 <= hi)")
        super().__init__(lo.size)
        self.lo, self.hi = lo, hi

    def project(self, v):
        return np.clip(_finite(v), self.lo, self.hi)

    def contains(self, x, tol=1e-12):
        return bool(np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol))

    def to_dict(self):
        return {**super().to_dict(), "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class QuadraticProx:
    """``d(x) = 0.5 ||x||^2``, the 1-strongly convex prox centred at 0."""

    name = "quadratic"

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ x)

    def gradient(self, x):
        return np.array(x, dtype=float)


@dataclass
class DualProjector:
    """Evaluates ``u -> argmin_{x in X} <u, x> + d(x)``."""

    feasible_set: FeasibleSet
    prox: QuadraticProx = None

    def __post_init__(self):
        if self.prox is None:
            self.prox = QuadraticProx()

    def __call__(self, u):
        return da_project(self, u)


def bregman(d, x, y, feasible_set=None):
    """``D_d(x, y) = d(x) - d(y) - <grad d(y), x - y>``."""
    x, y = _finite(x, "x"), _finite(y, "y")
    if feasible_set is not None:
        for name, p in (("x", x), ("y", y)):
            if not feasible_set.contains(p, tol=1e-9):
                raise ValueError(f"{name} is outside the feasible set")
    return d.value(x) - d.value(y) - float(d.gradient(y) @ (x - y))


def da_project(proj, u):
    """Minimizer of ``<u, x> + d(x)`` over the feasible set.

    With the quadratic prox this is the Euclidean projection of ``-u``.
    """
    u = _finite(u, "dual vector")
    if not isinstance(proj.prox, QuadraticProx):
        raise NotImplementedError(f"no projection oracle for prox {proj.prox.name!r}")
    if not np.any(u):
        return np.zeros_like(u)
    return proj.feasible_set.project(-u)


def project_rows(proj, U):
    """Apply :func:`da_project` to each row of ``U``."""
    return np.stack([da_project(proj, u) for u in U])


def nonexpansiveness_check(proj, a, u, v):
    if not a > 0:
        raise ValueError("scale must be positive")
    u, v = _finite(u), _finite(v)
    lhs = np.linalg.norm(da_project(proj, a * u) - da_project(proj, a * v))
    return bool(lhs <= a * np.linalg.norm(u - v) + 1e-12)
