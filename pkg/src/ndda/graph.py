"""Communication topologies, Metropolis-Hastings weights and spectral statistics.

Nodes are 0-based internally; the JSON form uses 1-based indices.
"""

import json
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import _random

DOUBLY_STOCHASTIC_TOL = 1e-12
MAX_RESAMPLES = 1000


class GraphError(ValueError):
    pass


@dataclass(frozen=True)
class Topology:
    """Undirected simple graph on nodes ``0..n-1``."""

    n: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if self.n < 1:
            raise GraphError(f"node count must be positive, got {self.n}")
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not (0 <= i < self.n and 0 <= j < self.n):
                raise GraphError(f"edge ({i}, {j}) out of range for n={self.n}")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def from_edges(cls, n, edges):
        edges = list(edges)
        seen = set()
        for i, j in edges:
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphError(f"duplicate edge {key}")
            seen.add(key)
        return cls(n, frozenset(edges))

    @classmethod
    def complete(cls, n):
        return cls(n, frozenset(combinations(range(n), 2)))

    @classmethod
    def path(cls, n):
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    def sorted_edges(self):
        return sorted(self.edges)

    def neighbors(self):
        nb = [[] for _ in range(self.n)]
        for i, j in self.edges:
            nb[i].append(j)
            nb[j].append(i)
        return [sorted(x) for x in nb]

    def degrees(self):
        deg = np.zeros(self.n, dtype=int)
        for i, j in self.edges:
            deg[i] += 1
            deg[j] += 1
        return deg

    def is_connected(self):
        nb = self.neighbors()
        seen = {0}
        stack = [0]
        while stack:
            for j in nb[stack.pop()]:
                if j not in seen:
                    seen.add(j)
                    stack.append(j)
        return len(seen) == self.n

    def to_dict(self):
        return {"n": self.n, "edges": [[i + 1, j + 1] for i, j in self.sorted_edges()]}

    @classmethod
    def from_dict(cls, doc):
        return cls.from_edges(int(doc["n"]), [(int(i) - 1, int(j) - 1) for i, j in doc["edges"]])


@dataclass(frozen=True)
class WeightMatrix:
    """Dense consensus matrix ``P``; validated doubly stochastic on construction."""

    entries: np.ndarray

    def __post_init__(self):
        P = np.array(self.entries, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise GraphError(f"weight matrix must be square, got shape {P.shape}")
        if not np.all(np.isfinite(P)) or np.any(P < 0) or np.any(P > 1):
            raise GraphError("weights must lie in [0, 1]")
        if np.any(np.diag(P) <= 0):
            raise GraphError("weight matrix needs a strictly positive diagonal")
        ones = np.ones(P.shape[0])
        if np.max(np.abs(P @ ones - 1)) > DOUBLY_STOCHASTIC_TOL:
            raise GraphError("rows do not sum to 1")
        if np.max(np.abs(ones @ P - 1)) > DOUBLY_STOCHASTIC_TOL:
            raise GraphError("columns do not sum to 1")
        P.setflags(write=False)
        object.__setattr__(self, "entries", P)

    @property
    def n(self):
        return self.entries.shape[0]

    def respects(self, topology):
        """True when every off-diagonal positive weight sits on an edge."""
        P = self.entries
        for i in range(self.n):
            for j in range(self.n):
                if i != j and P[i, j] > 0 and (min(i, j), max(i, j)) not in topology.edges:
                    return False
        return True

    def to_dict(self):
        return {"n": self.n, "rows": self.entries.tolist()}

    @classmethod
    def from_dict(cls, doc):
        P = np.array(doc["rows"], dtype=float)
        if P.shape != (int(doc["n"]), int(doc["n"])):
            raise GraphError("rows do not match n")
        return cls(P)


@dataclass(frozen=True)
class SpectralInfo:
    beta: float
    iterations: int = 0

    @property
    def spectral_gap(self):
        return 1.0 - self.beta


def erdos_renyi(n, ratio, seed):
    """Sample a connected G(n, ratio) graph.

    Pairs are visited in lexicographic order with one uniform draw each; a pair
    becomes an edge when its draw is below ``ratio``. A disconnected sample is
    redrawn with ``seed + 1``, ``seed + 2``, ... up to ``MAX_RESAMPLES`` times.
    """
    if n < 2:
        raise GraphError(f"need n >= 2, got {n}")
    if not 0 < ratio <= 1:
        raise GraphError(f"ratio must be in (0, 1], got {ratio}")
    pairs = list(combinations(range(n), 2))
    for attempt in range(MAX_RESAMPLES):
        u = _random.uniforms(_random.stream(seed + attempt, _random.GRAPH), len(pairs))
        topo = Topology(n, frozenset(p for p, ui in zip(pairs, u) if ui < ratio))
        if topo.is_connected():
            return topo
    raise GraphError(
        f"no connected sample in {MAX_RESAMPLES} draws for n={n}, ratio={ratio}; "
        "the edge probability is too small for this node count"
    )


def metropolis_weights(topology):
    """Metropolis-Hastings weights ``p_ij = 1 / (1 + max(d_i, d_j))`` on edges."""
    if not topology.is_connected():
        raise GraphError("Metropolis-Hastings weights need a connected topology")
    deg = topology.degrees()
    P = np.zeros((topology.n, topology.n))
    for i, j in topology.edges:
        P[i, j] = P[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(topology.n):
        # sum in fixed index order so symmetric inputs give reproducible diagonals
        P[i, i] = 1.0 - sum(P[i, j] for j in range(topology.n) if j != i)
    return WeightMatrix(P)


def second_singular_value(P, tol=1e-10, max_iter=100_000, seed=0):
    """``beta = ||P - J/n||_2``, i.e. sigma_2 of a doubly stochastic ``P``.

    Power iteration on ``M^T M`` with ``M = P - J/n``; the start vector comes
    from a fixed stream and is made orthogonal to the all-ones vector. Stops
    once the eigen-residual of ``M^T M`` is below ``tol`` relative to the
    Rayleigh quotient.
    """
    P = P.entries if isinstance(P, WeightMatrix) else np.asarray(P, dtype=float)
    n = P.shape[0]
    M = P - np.full((n, n), 1.0 / n)
    B = M.T @ M
    if n == 1 or not np.any(B):
        return SpectralInfo(0.0, 0)
    v = _random.normals(_random.stream(seed, _random.START_VECTOR), n)
    v -= v.mean()
    norm = np.linalg.norm(v)
    if norm == 0:
        return SpectralInfo(0.0, 0)
    v /= norm
    for it in range(1, max_iter + 1):
        w = B @ v
        lam = float(v @ w)
        if lam <= 0:
            # start vector in the null space; B has a positive eigenvalue elsewhere
            v = B @ np.roll(v, 1)
            v -= v.mean()
            v /= np.linalg.norm(v)
            continue
        if np.linalg.norm(w - lam * v) <= tol * lam:
            return SpectralInfo(float(np.sqrt(lam)), it)
        v = w - w.mean()
        v /= np.linalg.norm(v)
    raise ArithmeticError(f"power iteration did not converge in {max_iter} iterations")


def save_json(obj, path):
    with open(path, "w") as fh:
        json.dump(obj.to_dict(), fh, indent=1)
