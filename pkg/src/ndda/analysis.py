"""Step-size certification, trace inequalities and rate fitting for N-DDA."""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .prox import QuadraticProx, bregman

REL_SLACK = 1e-8


def _check_params(beta, L, a):
    if not 0 <= beta < 1:
        raise ValueError(f"beta must lie in [0, 1), got {beta}")
    if not L > 0:
        raise ValueError(f"L must be positive, got {L}")
    if not a > 0:
        raise ValueError(f"a must be positive, got {a}")


def gain_matrix(beta, L, a):
    return np.array([[beta, a], [L * (beta + 1), beta + L * a]])


def rho_E(beta, L, a):
    """Spectral radius of the gain matrix, from its closed-form larger eigenvalue."""
    _check_params(beta, L, a)
    aL = a * L
    return (2 * beta + aL + math.sqrt(aL * aL + 4 * (beta + 1) * aL)) / 2


@dataclass
class AdmissibilityReport:
    beta: float
    L: float
    a: float
    rho: float
    rho_ok: bool
    bound_value: float  # aL + aL / (1 - rho)^2, inf when rho >= 1
    bound_ok: bool
    rho_margin: float  # 1 - rho
    bound_margin: float  # 0.5 - bound_value

    @property
    def admissible(self):
        return self.rho_ok and self.bound_ok

    def to_dict(self):
        return {**asdict(self), "admissible": self.admissible}


def check_admissible(beta, L, a):
    rho = rho_E(beta, L, a)
    rho_ok = rho < 1
    aL = a * L
    value = aL + aL / (1 - rho) ** 2 if rho_ok else math.inf
    return AdmissibilityReport(
        beta=float(beta), L=float(L), a=float(a), rho=rho, rho_ok=rho_ok,
        bound_value=value, bound_ok=value <= 0.5,
        rho_margin=1 - rho, bound_margin=0.5 - value,
    )


def max_admissible_a(beta, L, rel_tol=1e-12):
    """Largest admissible constant step, by bisection on ``(0, (beta+1)/L)``."""
    _check_params(beta, L, 1.0)
    lo, hi = 0.0, (beta + 1) / L
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if check_admissible(beta, L, mid).admissible:
            lo = mid
        else:
            hi = mid
    if lo == 0.0:
        raise ArithmeticError("bisection found no admissible step")
    return lo


def theorem_bound(n, d_xstar, a, t):
    """``n d(x*) / (a t)``."""
    if t < 1 or not a > 0:
        raise ValueError("need t >= 1 and a > 0")
    return n * d_xstar / (a * t)


# -- trace verification -----------------------------------------------------

CHECKS = ("tracking_h", "tracking_s", "consensus_sum", "inexact_da", "avg_deviation", "avg_consensus", "theorem")


@dataclass
class CheckSeries:
    """Per-horizon left/right sides of one inequality ``lhs <= rhs``."""

    name: str
    t: list = field(default_factory=list)
    lhs: list = field(default_factory=list)
    rhs: list = field(default_factory=list)
    tol: list = field(default_factory=list)
    first_violation: int = None

    def add(self, t, lhs, rhs, abs_tol=0.0, scale=None):
        tol = REL_SLACK * (abs(rhs) if scale is None else scale) + abs_tol
        self.t.append(t)
        self.lhs.append(float(lhs))
        self.rhs.append(float(rhs))
        self.tol.append(tol)
        if self.first_violation is None and not lhs <= rhs + tol:
            self.first_violation = t

    @property
    def ok(self):
        return self.first_violation is None

    def worst_slack(self):
        """Minimum of ``(rhs - lhs) / max(|rhs|, tiny)``."""
        if not self.t:
            return math.nan
        lhs, rhs = np.array(self.lhs), np.array(self.rhs)
        return float(np.min((rhs - lhs) / np.maximum(np.abs(rhs), 1e-300)))

    def summary(self):
        return {"checked": len(self.t), "ok": self.ok,
                "first_violation": self.first_violation, "worst_rel_slack": self.worst_slack()}


class TraceChecks:
    """Streaming verifier for an N-DDA run seen from the global view.

    Feed :meth:`observe` once per round ``t = 0, 1, ...`` with the round-``t``
    stacked iterates/trackers, the mean gradient ``g_t`` and the auxiliary
    ``y_t`` and ``y_{t+1}``. Checks that need ``x*`` are skipped (and listed in
    ``skipped``) when no reference is supplied.
    """

    def __init__(self, n, a, beta, L, objective=None, x_star=None, f_star=None,
                 f_guard=0.0, prox=None):
        self.n, self.a = n, a
        self.prox = prox or QuadraticProx()
        self.rho = rho_E(beta, L, a)
        self.coef = n / (1 - self.rho) ** 2 if self.rho < 1 else math.inf
        self.objective = objective
        self.x_star = None if x_star is None else np.asarray(x_star, dtype=float)
        self.f_star = f_star
        self.f_guard = f_guard
        self.d_xstar = None if self.x_star is None else self.prox.value(self.x_star)
        self.series = {name: CheckSeries(name) for name in CHECKS}
        self.skipped = [] if self.x_star is not None else ["inexact_da", "theorem"]
        self.consensus = []  # ||x_t - 1 y_t||^2
        self.increments = []  # ||y_{t+1} - y_t||^2
        self.gaps = []  # (t, f(y~_t) - f*)
        self._cum_x = 0.0  # sum_{k=0}^{t} ||x_k - 1 y_k||^2
        self._cum_x1 = 0.0  # same sum from k = 1
        self._cum_y = 0.0
        self._cum_ip = 0.0
        self._cum_breg = 0.0
        self._sum_y = None
        self._sum_x = None
        self._t = 0

    def observe(self, t, x, s, h, g, y, y_next):
        if t != self._t:
            raise ValueError(f"expected round {self._t}, got {t}")
        self._t += 1
        x, s, h = np.asarray(x), np.asarray(s), np.asarray(h)
        gnorm = float(np.linalg.norm(g))
        self.series["tracking_h"].add(t, np.linalg.norm(h.mean(axis=0) - g), 1e-9 * (1 + gnorm))
        self.series["tracking_s"].add(t, np.linalg.norm(s.mean(axis=0) - g), 1e-9 * (1 + gnorm))

        cons = float(np.sum((x - y) ** 2))
        inc = float(np.sum((y_next - y) ** 2))
        self.consensus.append(cons)
        self.increments.append(inc)
        self._cum_x += cons
        self._cum_y += inc
        # horizon t+1: sums over k = 0..t
        self.series["consensus_sum"].add(t + 1, self._cum_x, self.coef * self._cum_y)

        if self.x_star is not None:
            self._cum_ip += self.a * float(g @ (y_next - self.x_star))
            self._cum_breg += bregman(self.prox, y_next, y)
            self.series["inexact_da"].add(t + 1, self._cum_ip, self.d_xstar - self._cum_breg,
                                   scale=self.d_xstar + self._cum_breg)

        if t >= 1:
            self._cum_x1 += cons
            self._sum_y = y.copy() if self._sum_y is None else self._sum_y + y
            self._sum_x = x.copy() if self._sum_x is None else self._sum_x + x
            y_avg = self._sum_y / t
            x_avg = self._sum_x / t
            left = t * float(np.sum((x_avg - y_avg) ** 2))
            # floor for rounding in the two averages when both sides are ~0
            eps = 64 * np.finfo(float).eps * max(1.0, float(np.abs(x_avg).max()), float(np.abs(y_avg).max()))
            self.series["avg_deviation"].add(t, left, self._cum_x1, abs_tol=t * x.size * eps * eps)
            self.series["avg_consensus"].add(t, self._cum_x1, self.coef * self._cum_y)
            if self.x_star is not None and self.objective is not None:
                gap = self.objective(y_avg) - self.f_star
                self.gaps.append((t, gap))
                self.series["theorem"].add(
                    t, gap, theorem_bound(self.n, self.d_xstar, self.a, t), self.f_guard)

    @property
    def ok(self):
        return all(s.ok for s in self.series.values())

    def first_violation(self):
        hits = [(s.first_violation, name) for name, s in self.series.items()
                if s.first_violation is not None]
        return min(hits) if hits else None

    def summary(self):
        return {
            "ok": self.ok,
            "rho": self.rho,
            "rounds": self._t,
            "skipped": list(self.skipped),
            "checks": {name: s.summary() for name, s in self.series.items()
                       if name not in self.skipped},
        }


def verify_trace(rounds, n, a, beta, L, **kwargs):
    """Run :class:`TraceChecks` over an iterable of ``(t, x, s, h, g, y, y_next)``."""
    checks = TraceChecks(n, a, beta, L, **kwargs)
    for rec in rounds:
        checks.observe(*rec)
    return checks


# -- rate fitting -------------------------------------------------------------

@dataclass
class RateFit:
    slope: float
    intercept: float
    used: int
    excluded: int


def fit_rate(t, gap, window=None):
    """Least-squares slope of ``log gap`` against ``log t`` inside ``window``.

    Nonpositive gaps in the window are dropped and counted in ``excluded``.
    """
    t = np.asarray(t, dtype=float)
    gap = np.asarray(gap, dtype=float)
    mask = t > 0
    if window is not None:
        lo, hi = window
        mask &= (t >= lo) & (t <= hi)
    good = mask & (gap > 0) & np.isfinite(gap)
    excluded = int(mask.sum() - good.sum())
    if good.sum() < 2:
        raise ValueError("need at least two positive points to fit a rate")
    slope, intercept = np.polyfit(np.log(t[good]), np.log(gap[good]), 1)
    return RateFit(float(slope), float(intercept), int(good.sum()), excluded)


def running_min(values):
    return np.minimum.accumulate(np.asarray(values, dtype=float))
