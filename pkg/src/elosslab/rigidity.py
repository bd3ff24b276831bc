"""Sparse edge sets for the energy loss and the rigidity checks behind them.

Random k-regular graphs come from the pairing model with rejection of
loops and repeated pairs. Rigidity is certified numerically at a random
Gaussian placement: a rank check on the rigidity matrix, plus a random
equilibrium stress for global rigidity (sufficient, not necessary).
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .geometry import as_cloud

log = logging.getLogger(__name__)

RANK_RTOL = 1e-10
MAX_PAIRINGS = 10_000
POOL_ATTEMPTS = 100


class RigidityError(ValueError):
    pass


@dataclass(frozen=True)
class EdgeSet:
    """Simple undirected graph on ``n`` nodes, edges as sorted ``(i, j)``, ``i < j``."""

    n: int
    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            e = np.sort(e, axis=1)
            if e[:, 0].min() < 0 or e[:, 1].max() >= self.n:
                raise RigidityError("edge index out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise RigidityError("self-loop in edge set")
            e = e[np.lexsort((e[:, 1], e[:, 0]))]
            if np.any(np.all(e[1:] == e[:-1], axis=1)):
                raise RigidityError("repeated edge in edge set")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)

    @classmethod
    def complete(cls, n: int) -> "EdgeSet":
        ii, jj = np.triu_indices(n, k=1)
        return cls(n, np.stack([ii, jj], axis=1))

    @classmethod
    def from_pairs(cls, n: int, pairs) -> "EdgeSet":
        return cls(n, np.array(sorted({tuple(sorted(p)) for p in pairs}), dtype=np.int64))

    def __len__(self):
        return self.edges.shape[0]

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.n)

    def as_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}


@dataclass(frozen=True)
class Framework:
    edges: EdgeSet
    placement: np.ndarray

    def __post_init__(self):
        p = as_cloud(self.placement)
        if p.shape[0] != self.edges.n:
            raise RigidityError("placement and edge set disagree on node count")
        object.__setattr__(self, "placement", p)


@dataclass
class OrbitAction:
    """Permutation group given by generators, with its node orbits."""

    generators: list
    orbits: list = field(default=None)

    def __post_init__(self):
        gens = [np.asarray(g, dtype=np.int64) for g in self.generators]
        n = None
        for g in gens:
            if n is None:
                n = g.size
            if g.ndim != 1 or g.size != n or not np.array_equal(np.sort(g), np.arange(n)):
                raise RigidityError("generator is not a permutation of 0..n-1")
        self.generators = gens
        if self.orbits is None and n is not None:
            self.orbits = _orbits(gens, n)

    @classmethod
    def trivial(cls, n: int) -> "OrbitAction":
        return cls([np.arange(n)])


def _orbits(gens, n):
    seen = np.zeros(n, dtype=bool)
    out = []
    for start in range(n):
        if seen[start]:
            continue
        orbit, queue = [start], deque([start])
        seen[start] = True
        while queue:
            v = queue.popleft()
            for g in gens:
                w = int(g[v])
                if not seen[w]:
                    seen[w] = True
                    orbit.append(w)
                    queue.append(w)
        out.append(sorted(orbit))
    return out


def _pairing_round(stubs, existing_keys, n, rng):
    rng.shuffle(stubs)
    a = np.minimum(stubs[0::2], stubs[1::2])
    b = np.maximum(stubs[0::2], stubs[1::2])
    keys = a * n + b
    ok = a != b
    ok &= ~np.isin(keys, existing_keys)
    # keep the first occurrence of pairs repeated within this round
    _, first = np.unique(keys, return_index=True)
    is_first = np.zeros(keys.size, dtype=bool)
    is_first[first] = True
    ok &= is_first
    leftover = np.concatenate([a[~ok], b[~ok]])
    return keys[ok], leftover


def _can_finish(leftover, key_set, n):
    nodes = np.unique(leftover)
    for x in range(nodes.size):
        for y in range(x + 1, nodes.size):
            if int(nodes[x]) * n + int(nodes[y]) not in key_set:
                return True
    return False


def random_k_regular(n: int, k: int, seed=None) -> EdgeSet:
    """Random simple ``k``-regular graph on ``n`` nodes (pairing model)."""
    if k < 0 or k >= n:
        raise RigidityError(f"need 0 <= k < n, got k={k}, n={n}")
    if (n * k) % 2:
        raise RigidityError(f"n*k must be even, got n={n}, k={k}")
    rng = np.random.default_rng(seed)
    if k == 0:
        return EdgeSet(n, np.zeros((0, 2), dtype=np.int64))
    for _ in range(MAX_PAIRINGS):
        stubs = np.repeat(np.arange(n, dtype=np.int64), k)
        accepted = []
        existing = np.zeros(0, dtype=np.int64)
        while stubs.size:
            new, stubs = _pairing_round(stubs, existing, n, rng)
            if new.size:
                accepted.append(new)
                existing = np.concatenate([existing, new])
            elif not _can_finish(stubs, set(existing.tolist()), n):
                break
        if stubs.size == 0:
            keys = np.concatenate(accepted)
            return EdgeSet(n, np.stack([keys // n, keys % n], axis=1))
    raise RigidityError(f"no simple {k}-regular graph on {n} nodes after {MAX_PAIRINGS} pairings")


def rigidity_matrix(fw: Framework, d: int | None = None) -> np.ndarray:
    p = fw.placement
    if d is not None and p.shape[1] != d:
        raise RigidityError(f"placement is {p.shape[1]}-dimensional, expected {d}")
    n, dim = p.shape
    e = fw.edges.edges
    m = np.zeros((e.shape[0], n * dim))
    diff = p[e[:, 0]] - p[e[:, 1]]
    rows = np.arange(e.shape[0])
    for c in range(dim):
        m[rows, e[:, 0] * dim + c] = diff[:, c]
        m[rows, e[:, 1] * dim + c] = -diff[:, c]
    return m


def numerical_rank(s: np.ndarray, shape) -> int:
    """Rank from singular values with cutoff ``max_s * max(shape) * 1e-10``."""
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > s[0] * max(shape) * RANK_RTOL))


def generic_placement(n: int, d: int, seed=None) -> np.ndarray:
    return np.random.default_rng(seed).standard_normal((n, d))


def _rigid_rank(n: int, d: int) -> int:
    return n * d - d * (d + 1) // 2


def _check_rigid(edges: EdgeSet, placement: np.ndarray):
    n, d = placement.shape
    m = rigidity_matrix(Framework(edges, placement))
    if m.shape[0] == 0:
        return False, m, np.zeros((0, 0)), 0
    u, s, _ = np.linalg.svd(m, full_matrices=True)
    rank = numerical_rank(s, m.shape)
    return rank == _rigid_rank(n, d), m, u, rank


def is_rigid(edges: EdgeSet, d: int, seed=None) -> bool:
    """Infinitesimal rigidity at a seeded generic placement."""
    if edges.n <= d:
        raise RigidityError(f"need n >= d+1 nodes, got n={edges.n}, d={d}")
    ok, *_ = _check_rigid(edges, generic_placement(edges.n, d, seed))
    return ok


def stress_matrix(edges: EdgeSet, omega: np.ndarray) -> np.ndarray:
    n = edges.n
    e = edges.edges
    s = np.zeros((n, n))
    s[e[:, 0], e[:, 1]] = -omega
    s[e[:, 1], e[:, 0]] = -omega
    s[np.diag_indices(n)] = -s.sum(axis=1)
    return s


def is_globally_rigid(edges: EdgeSet, d: int, seed=None) -> bool:
    """Randomised global-rigidity certificate (rank check + random stress).

    ``False`` means "not certified": either not rigid, or the sampled
    equilibrium stress has a stress matrix of rank below ``n - d - 1``.
    """
    n = edges.n
    if n < d + 2:
        raise RigidityError(f"need n >= d+2 nodes, got n={n}, d={d}")
    rng = np.random.default_rng(seed)
    placement = rng.standard_normal((n, d))
    rigid, m, u, rank = _check_rigid(edges, placement)
    if not rigid:
        return False
    left_null = u[:, rank:]
    if left_null.shape[1] == 0:
        return False
    omega = left_null @ rng.standard_normal(left_null.shape[1])
    omega /= np.linalg.norm(omega)
    sm = stress_matrix(edges, omega)
    s = np.linalg.svd(sm, compute_uv=False)
    return numerical_rank(s, sm.shape) == n - d - 1


def symmetrize_edges(edges: EdgeSet, action: OrbitAction) -> EdgeSet:
    """Close ``edges`` under the permutation group generated by ``action``."""
    for g in action.generators:
        if g.size != edges.n:
            raise RigidityError("generator size does not match node count")
    seen = edges.as_set()
    queue = deque(seen)
    while queue:
        i, j = queue.popleft()
        for g in action.generators:
            a, b = int(g[i]), int(g[j])
            img = (a, b) if a < b else (b, a)
            if img not in seen:
                seen.add(img)
                queue.append(img)
    out = EdgeSet.from_pairs(edges.n, seen) if seen else edges
    log.debug("symmetrized %d edges into %d", len(edges), len(out))
    return out


def pool_degree(n: int, d: int, k: int | None = None) -> int:
    """Degree used for a pool: ``2d`` by default, bumped by one if ``n*k`` is odd."""
    k = 2 * d if k is None else k
    if (n * k) % 2:
        k += 1
    return k


def edge_pool(n: int, d: int, pool_size: int, seed=None, k: int | None = None) -> list[EdgeSet]:
    """``pool_size`` random rigid ``k``-regular edge sets (``k = 2d`` by default).

    Each candidate has its own seed split from ``seed``; a candidate failing
    :func:`is_rigid` is regenerated up to 100 times. When ``k >= n - 1`` the
    only such graph is complete, so the pool holds copies of it.
    """
    k = pool_degree(n, d, k)
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = ss.spawn(pool_size)
    if k >= n - 1:
        return [EdgeSet.complete(n) for _ in range(pool_size)]
    pool = []
    for child in children:
        rng = np.random.default_rng(child)
        for _ in range(POOL_ATTEMPTS):
            g = random_k_regular(n, k, rng)
            if n <= d or is_rigid(g, d, rng):
                pool.append(g)
                break
        else:
            raise RigidityError(f"no rigid {k}-regular graph on {n} nodes in {POOL_ATTEMPTS} attempts")
    return pool
