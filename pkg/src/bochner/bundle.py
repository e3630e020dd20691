"""Metric connections as orthogonal edge transports, plus fiber tensor algebra.

Transport convention: ``U_e`` for the edge ``i -> j`` carries the fiber at
``j`` back to the fiber at ``i``, so ``U_e @ u[j]`` is comparable with
``u[i]``.  Only canonical edges are stored; a reverse edge carries ``U_e.T``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import InvalidInput, InvalidLoop, ShapeMismatch
from .lattice import DiscreteSection, LatticeBase, LatticeKind
from .rng import Stream

SKEW_TOL = 1e-14
ORTHO_TOL = 1e-12

# stream keys keep connection and field draws independent for a shared seed
CONNECTION_STREAM = 0
FIELD_STREAM = 1


def skew_expm(a: np.ndarray) -> np.ndarray:
    """Exponential of a (stack of) skew matrices.

    Rank 2 uses the closed-form rotation; larger ranks use scaling and
    squaring with Pade approximants, followed by a polar projection back onto
    the orthogonal group (Pade round-off grows with the argument norm).
    """
    a = np.asarray(a, dtype=float)
    m = a.shape[-1]
    if m == 1:
        return np.ones_like(a)
    if m == 2:
        theta = a[..., 1, 0]
        c, s = np.cos(theta), np.sin(theta)
        out = np.empty_like(a)
        out[..., 0, 0] = c
        out[..., 0, 1] = -s
        out[..., 1, 0] = s
        out[..., 1, 1] = c
        return out
    w, _, vt = np.linalg.svd(scipy.linalg.expm(a))
    return w @ vt


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])


J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


def is_skew(a: np.ndarray, tol: float = SKEW_TOL) -> bool:
    a = np.asarray(a, dtype=float)
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)))
    return bool(np.max(np.abs(a + np.swapaxes(a, -1, -2)), initial=0.0) <= tol * scale)


@dataclass(frozen=True, eq=False)
class DiscreteConnection:
    base: LatticeBase
    rank: int
    transport: np.ndarray  # (C, m, m) on canonical edges

    def __post_init__(self):
        u = np.asarray(self.transport, dtype=float)
        c, m = self.base.canonical_count, self.rank
        if u.shape != (c, m, m):
            raise ShapeMismatch(f"transport shape {u.shape}, expected {(c, m, m)}")
        if c and np.max(np.abs(np.swapaxes(u, 1, 2) @ u - np.eye(m))) > ORTHO_TOL:
            raise InvalidInput(f"transports must be orthogonal to {ORTHO_TOL:g}")
        if c and np.any(np.linalg.det(u) <= 0):
            raise InvalidInput("transports must have determinant +1")
        u.setflags(write=False)
        object.__setattr__(self, "transport", u)

    def edge_transport(self, e: int) -> np.ndarray:
        c = self.base.canonical_count
        return self.transport[e] if e < c else self.transport[e - c].T

    def all_transports(self) -> np.ndarray:
        """Transports for every directed edge, shape ``(E, m, m)``."""
        return np.concatenate([self.transport, np.swapaxes(self.transport, 1, 2)])

    def orthogonality_residual(self) -> float:
        u = self.transport
        eye = np.eye(self.rank)
        return float(np.max(np.abs(np.swapaxes(u, 1, 2) @ u - eye), initial=0.0))


@dataclass(frozen=True, eq=False)
class SkewField:
    """Skew-endomorphism valued 1-form sampled on canonical edges."""

    base: LatticeBase
    rank: int
    value: np.ndarray  # (C, m, m)

    def __post_init__(self):
        a = np.asarray(self.value, dtype=float)
        c, m = self.base.canonical_count, self.rank
        if a.shape != (c, m, m):
            raise ShapeMismatch(f"field shape {a.shape}, expected {(c, m, m)}")
        if not is_skew(a):
            raise InvalidInput("skew field values must be skew-symmetric")
        a.setflags(write=False)
        object.__setattr__(self, "value", a)

    def reverse_values(self, conn: DiscreteConnection) -> np.ndarray:
        """Induced values on reverse edges: ``-U^T A U``."""
        u = conn.transport
        return -np.swapaxes(u, 1, 2) @ self.value @ u

    def scaled(self, c: float) -> "SkewField":
        return SkewField(self.base, self.rank, self.value * c)


def _check_pair(conn: DiscreteConnection, field: SkewField):
    if conn.rank != field.rank:
        raise ShapeMismatch(f"connection rank {conn.rank} vs field rank {field.rank}")
    if conn.base.canonical_count != field.base.canonical_count:
        raise ShapeMismatch("connection and field live on different lattices")


def trivial_connection(base: LatticeBase, m: int) -> DiscreteConnection:
    if m < 1:
        raise InvalidInput("rank must be >= 1")
    eye = np.broadcast_to(np.eye(m), (base.canonical_count, m, m)).copy()
    return DiscreteConnection(base, m, eye)


def constant_connection_cycle(base: LatticeBase, a: np.ndarray) -> DiscreteConnection:
    """Connection with constant local connection form ``a`` along a cycle."""
    if base.kind is not LatticeKind.CYCLE:
        raise InvalidInput("constant_connection_cycle needs a cycle base")
    a = np.atleast_2d(np.asarray(a, dtype=float))
    if a.shape[0] != a.shape[1] or not is_skew(a):
        raise InvalidInput("connection form must be a square skew matrix")
    h = base.spacings[0]
    u = skew_expm(h * a)
    return DiscreteConnection(base, a.shape[0],
                              np.broadcast_to(u, (base.canonical_count,) + u.shape).copy())


def _random_skew(stream: Stream, count: int, m: int, magnitude: float) -> np.ndarray:
    iu = np.triu_indices(m, k=1)
    draws = stream.normal(count * len(iu[0])).reshape(count, len(iu[0])) * magnitude
    s = np.zeros((count, m, m))
    s[:, iu[0], iu[1]] = draws
    s[:, iu[1], iu[0]] = -draws
    return s


def random_connection(base: LatticeBase, m: int, seed: int,
                      magnitude: float) -> DiscreteConnection:
    """``U_e = exp(h_e S_e)`` with upper-triangular entries of ``S_e`` ~ N(0, magnitude^2).

    Draws are consumed edge by edge, row-major over the strict upper triangle.
    """
    if magnitude < 0:
        raise InvalidInput("magnitude must be >= 0")
    if m < 1:
        raise InvalidInput("rank must be >= 1")
    c = base.canonical_count
    s = _random_skew(Stream(seed, CONNECTION_STREAM), c, m, magnitude)
    lengths = base.lengths[:c]
    return DiscreteConnection(base, m, skew_expm(lengths[:, None, None] * s))


def random_skew_field(base: LatticeBase, m: int, seed: int, magnitude: float) -> SkewField:
    if magnitude < 0:
        raise InvalidInput("magnitude must be >= 0")
    if m < 1:
        raise InvalidInput("rank must be >= 1")
    s = _random_skew(Stream(seed, FIELD_STREAM), base.canonical_count, m, magnitude)
    return SkewField(base, m, s)


def perturb(conn: DiscreteConnection, field: SkewField, t: float) -> DiscreteConnection:
    """Transports of ``nabla + t A``: ``U_e(t) = exp(t l_e A_e) U_e``."""
    _check_pair(conn, field)
    if t == 0:
        return conn
    c = conn.base.canonical_count
    lengths = conn.base.lengths[:c]
    step = skew_expm(t * lengths[:, None, None] * field.value)
    return DiscreteConnection(conn.base, conn.rank, step @ conn.transport)


def gauge_transform(conn: DiscreteConnection, g: np.ndarray) -> DiscreteConnection:
    """Change of fiber frames ``U_e -> g_i U_e g_j^T`` for per-vertex orthogonal ``g``."""
    g = np.asarray(g, dtype=float)
    base = conn.base
    c = base.canonical_count
    if g.shape != (base.vertex_count, conn.rank, conn.rank):
        raise ShapeMismatch(f"gauge shape {g.shape}")
    gi = g[base.tails[:c]]
    gj = g[base.heads[:c]]
    return DiscreteConnection(base, conn.rank, gi @ conn.transport @ np.swapaxes(gj, 1, 2))


def gauge_section(u: DiscreteSection, g: np.ndarray) -> DiscreteSection:
    return DiscreteSection(np.einsum("iab,ib->ia", g, u.values))


def holonomy(conn: DiscreteConnection, loop) -> np.ndarray:
    loop = [int(v) for v in loop]
    if len(loop) < 2 or loop[0] != loop[-1]:
        raise InvalidLoop("loop must start and end at the same vertex")
    out = np.eye(conn.rank)
    for i, j in zip(loop[:-1], loop[1:]):
        e = conn.base.edge_between(i, j)
        if e is None:
            raise InvalidLoop(f"vertices {i} and {j} are not adjacent")
        out = out @ conn.edge_transport(e)
    return out


def covariant_difference(u: DiscreteSection, conn: DiscreteConnection,
                         directed: bool = False) -> np.ndarray:
    """``(U_e u_j - u_i) / l_e`` per edge, living in the fiber at the tail."""
    base = conn.base
    n = base.edge_count if directed else base.canonical_count
    tr = conn.all_transports()[:n] if directed else conn.transport
    ui = u.values[base.tails[:n]]
    uj = u.values[base.heads[:n]]
    return (np.einsum("eab,eb->ea", tr, uj) - ui) / base.lengths[:n, None]


# fiber tensor algebra

def hs_inner(h: np.ndarray, k: np.ndarray) -> float:
    h, k = np.asarray(h, dtype=float), np.asarray(k, dtype=float)
    if h.shape != k.shape:
        raise ShapeMismatch(f"{h.shape} vs {k.shape}")
    return float(np.trace(h @ k.T))


def rank_one(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``(a (x) b)(w) = <w, b> a``, i.e. the matrix ``a b^T``."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} vs {b.shape}")
    return np.multiply.outer(a, b)


def wedge(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """``a b^T - b a^T`` (no 1/2 factor)."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} vs {b.shape}")
    ab = np.multiply.outer(a, b)
    return ab - ab.T


def so2_angles(conn: DiscreteConnection, tol: float = 1e-10) -> np.ndarray | None:
    """Rotation angle per canonical edge, or None if some transport is not in SO(2)."""
    if conn.rank != 2:
        return None
    u = conn.transport
    ok = (np.abs(u[:, 0, 0] - u[:, 1, 1]) <= tol) & (np.abs(u[:, 0, 1] + u[:, 1, 0]) <= tol)
    if not np.all(ok):
        return None
    return np.arctan2(u[:, 1, 0], u[:, 0, 0])
