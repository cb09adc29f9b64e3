"""Network topologies, doubly stochastic weights, and spectral diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import DisconnectedAfterRetries, NotMixing, ParseError, TooSmall

WEIGHT_TOL = 1e-12
MAX_ER_ATTEMPTS = 1000
MIXING_CAP = 10 ** 6


def _normalize_edges(n: int, edges) -> tuple[tuple[int, int], ...]:
    seen = set()
    for i, j in edges:
        if i == j:
            raise ValueError(f"self-loop ({i},{i}) is not a valid edge")
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i},{j}) out of range for n={n}")
        seen.add((min(i, j), max(i, j)))
    return tuple(sorted(seen))


def _is_connected(n: int, edges) -> bool:
    if n == 1:
        return True
    adj: list[list[int]] = [[] for _ in range(n)]
    for i, j in edges:
        adj[i].append(j)
        adj[j].append(i)
    seen = [False] * n
    stack = [0]
    seen[0] = True
    count = 1
    while stack:
        v = stack.pop()
        for u in adj[v]:
            if not seen[u]:
                seen[u] = True
                count += 1
                stack.append(u)
    return count == n


@dataclass(frozen=True)
class Topology:
    """Undirected connected graph; edges stored as sorted (i, j) pairs, i < j."""

    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        object.__setattr__(self, "edges", _normalize_edges(self.n, self.edges))
        if not _is_connected(self.n, self.edges):
            raise ValueError("topology must be connected")
        # adjacency lists sit on the consensus hot path; build them once
        adj: list[list[int]] = [[] for _ in range(self.n)]
        for i, j in self.edges:
            adj[i].append(j)
            adj[j].append(i)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))
        object.__setattr__(self, "_deg",
                           np.array([len(a) for a in adj], dtype=np.int64))

    def degrees(self) -> np.ndarray:
        return self._deg.copy()

    def degree(self, i: int) -> int:
        return int(self._deg[i])

    def peers(self, i: int) -> tuple[int, ...]:
        """Adjacent nodes of i, sorted ascending, self excluded."""
        return self._adj[i]

    def neighborhood(self, i: int) -> tuple[int, ...]:
        """Adjacent nodes of i including i itself (the consensus view)."""
        return tuple(sorted(self._adj[i] + (i,)))

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n))
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a


def gen_erdos_renyi(n: int, p: float, seed) -> Topology:
    """Erdos-Renyi graph, resampled (bounded retries) until connected."""
    if n < 2:
        raise TooSmall(f"Erdos-Renyi needs n >= 2, got {n}")
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    for _ in range(MAX_ER_ATTEMPTS):
        draws = rng.random(len(pairs))
        edges = tuple(pair for pair, u in zip(pairs, draws) if u < p)
        if _is_connected(n, edges):
            return Topology(n, edges)
    raise DisconnectedAfterRetries(
        f"no connected graph after {MAX_ER_ATTEMPTS} attempts (n={n}, p={p})"
    )


def gen_ring(n: int) -> Topology:
    if n < 3:
        raise TooSmall(f"ring needs n >= 3, got {n}")
    return Topology(n, tuple((i, (i + 1) % n) for i in range(n)))


def gen_star(n: int) -> Topology:
    if n < 3:
        raise TooSmall(f"star needs n >= 3, got {n}")
    return Topology(n, tuple((0, i) for i in range(1, n)))


def gen_complete(n: int) -> Topology:
    if n < 2:
        raise TooSmall(f"complete graph needs n >= 2, got {n}")
    return Topology(n, tuple((i, j) for i in range(n) for j in range(i + 1, n)))


def single_node() -> Topology:
    """Degenerate one-node network (consensus weight matrix is [[1]])."""
    return Topology(1, ())


@dataclass(frozen=True)
class WeightMatrix:
    """Symmetric doubly stochastic consensus weights tied to a topology."""

    w: np.ndarray
    topology: Topology

    def __post_init__(self):
        w = np.asarray(self.w, dtype=np.float64)
        object.__setattr__(self, "w", w)
        n = self.topology.n
        if w.shape != (n, n):
            raise ValueError(f"weights shape {w.shape} does not match n={n}")
        if np.any(w < -WEIGHT_TOL):
            raise ValueError("weights must be nonnegative")
        if np.linalg.norm(w - w.T) > WEIGHT_TOL:
            raise ValueError("weights must be symmetric")
        ones = np.ones(n)
        if np.max(np.abs(w @ ones - ones)) > WEIGHT_TOL:
            raise ValueError("row sums must equal 1")
        if np.max(np.abs(ones @ w - ones)) > WEIGHT_TOL:
            raise ValueError("column sums must equal 1")
        allowed = self.topology.adjacency() + np.eye(n)
        if np.any((np.abs(w) > WEIGHT_TOL) & (allowed == 0.0)):
            raise ValueError("nonzero weight outside the edge set")

    @property
    def n(self) -> int:
        return self.topology.n


def metropolis_weights(topology: Topology) -> WeightMatrix:
    """Local-degree weights: w_ij = 1/(1 + max(deg_i, deg_j)) on edges.

    The +1 keeps every self-weight strictly positive, so the chain is
    aperiodic on every connected topology (rings included).
    """
    n = topology.n
    deg = topology.degrees()
    w = np.zeros((n, n))
    for i, j in topology.edges:
        w[i, j] = w[j, i] = 1.0 / (1.0 + max(deg[i], deg[j]))
    for i in range(n):
        w[i, i] = 1.0 - w[i].sum()
    return WeightMatrix(w, topology)


def slem(weights: WeightMatrix) -> float:
    """Second-largest eigenvalue modulus of the weight matrix."""
    lam, _ = linalg.sym_eig(weights.w)
    if weights.n == 1:
        return 0.0
    rest = np.delete(lam, 0)  # drop the single Perron eigenvalue 1
    return float(np.max(np.abs(rest)))


def mixing_time(weights: WeightMatrix, cap: int = MIXING_CAP) -> int:
    """Smallest t with every row of W^t within 1/2 (l2) of uniform."""
    n = weights.n
    if slem(weights) >= 1.0 - 1e-15:
        raise NotMixing("chain has a unit-modulus eigenvalue besides 1")
    uniform = np.full(n, 1.0 / n)
    power = weights.w.copy()
    for t in range(1, cap + 1):
        dev = np.sqrt(((power - uniform) ** 2).sum(axis=1)).max()
        if dev <= 0.5:
            return t
        power = power @ weights.w
    raise NotMixing(f"not mixed after {cap} iterations")


def save_edge_list(topology: Topology, path) -> None:
    """One \"i j\" line per edge, 0-indexed."""
    with open(path, "w") as fh:
        for i, j in topology.edges:
            fh.write(f"{i} {j}\n")


def load_edge_list(path) -> Topology:
    edges = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ParseError(f"{path}: expected 'i j' at line {lineno}")
            try:
                edges.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise ParseError(
                    f"{path}: non-integer node id at line {lineno}") from None
    if not edges:
        raise ParseError(f"{path}: no edges")
    n = max(max(i, j) for i, j in edges) + 1
    return Topology(n, tuple(edges))
