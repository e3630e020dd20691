"""Uniform periodic lattices standing in for closed flat base manifolds.

Directed edges are numbered so that ids ``0..C-1`` are the canonical
(positive-direction) edges and ``e + C`` is the reverse of ``e``.  Torus
vertices are indexed row-major over ``(nx, ny)``: ``id = ix * ny + iy``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import InvalidGeometry, ShapeMismatch


class LatticeKind(str, Enum):
    CYCLE = "cycle"
    TORUS2 = "torus"


@dataclass(frozen=True, eq=False)
class LatticeBase:
    kind: LatticeKind
    shape: tuple[int, ...]
    sides: tuple[float, ...]
    tails: np.ndarray
    heads: np.ndarray
    lengths: np.ndarray
    axes: np.ndarray
    vertex_volume: float
    total_measure: float = field(repr=False)

    @property
    def vertex_count(self) -> int:
        return int(np.prod(self.shape))

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(s / n for s, n in zip(self.sides, self.shape))

    @property
    def edge_count(self) -> int:
        return len(self.tails)

    @property
    def canonical_count(self) -> int:
        return len(self.tails) // 2

    @property
    def volumes(self) -> np.ndarray:
        return np.full(self.vertex_count, self.vertex_volume)

    def reverse(self, e: int) -> int:
        c = self.canonical_count
        return e + c if e < c else e - c

    @property
    def reverse_ids(self) -> np.ndarray:
        c = self.canonical_count
        return np.concatenate([np.arange(c, 2 * c), np.arange(c)])

    def edge_between(self, i: int, j: int) -> int | None:
        hits = np.flatnonzero((self.tails == i) & (self.heads == j))
        return int(hits[0]) if hits.size else None

    def coordinates(self) -> np.ndarray:
        """Vertex positions, shape ``(N, dim)``."""
        if self.kind is LatticeKind.CYCLE:
            return (np.arange(self.shape[0]) * self.spacings[0])[:, None]
        nx, ny = self.shape
        hx, hy = self.spacings
        ix, iy = np.divmod(np.arange(nx * ny), ny)
        return np.stack([ix * hx, iy * hy], axis=1)

    def to_descriptor(self) -> dict:
        if self.kind is LatticeKind.CYCLE:
            return {"type": "cycle", "n": self.shape[0], "length": self.sides[0]}
        return {"type": "torus", "nx": self.shape[0], "ny": self.shape[1],
                "lx": self.sides[0], "ly": self.sides[1]}


def _check_count(n, name):
    if isinstance(n, bool) or int(n) != n or n < 3:
        raise InvalidGeometry(f"{name} must be an integer >= 3, got {n!r}")


def _check_side(s, name):
    if not (isinstance(s, (int, float)) and math.isfinite(s) and s > 0):
        raise InvalidGeometry(f"{name} must be a positive finite real, got {s!r}")


def _assemble(kind, shape, sides, tails, heads, lengths, axes):
    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    lengths = np.asarray(lengths, dtype=float)
    axes = np.asarray(axes, dtype=np.int64)
    # reverse edges follow the canonical block
    tails, heads = np.concatenate([tails, heads]), np.concatenate([heads, tails])
    lengths = np.concatenate([lengths, lengths])
    axes = np.concatenate([axes, axes])
    n = int(np.prod(shape))
    vol = float(np.prod([s / k for s, k in zip(sides, shape)]))
    for a in (tails, heads, lengths, axes):
        a.setflags(write=False)
    return LatticeBase(kind, tuple(shape), tuple(float(s) for s in sides), tails, heads,
                       lengths, axes, vol, float(np.prod(sides)))


def build_cycle(n: int, circumference: float) -> LatticeBase:
    _check_count(n, "n")
    _check_side(circumference, "circumference")
    n = int(n)
    h = circumference / n
    i = np.arange(n)
    return _assemble(LatticeKind.CYCLE, (n,), (circumference,), i, (i + 1) % n,
                     np.full(n, h), np.zeros(n))


def build_torus(nx: int, ny: int, lx: float, ly: float) -> LatticeBase:
    for k, name in ((nx, "nx"), (ny, "ny")):
        _check_count(k, name)
    for s, name in ((lx, "lx"), (ly, "ly")):
        _check_side(s, name)
    nx, ny = int(nx), int(ny)
    ix, iy = np.divmod(np.arange(nx * ny), ny)
    v = ix * ny + iy
    x_heads = ((ix + 1) % nx) * ny + iy
    y_heads = ix * ny + (iy + 1) % ny
    tails = np.concatenate([v, v])
    heads = np.concatenate([x_heads, y_heads])
    lengths = np.concatenate([np.full(nx * ny, lx / nx), np.full(nx * ny, ly / ny)])
    axes = np.concatenate([np.zeros(nx * ny), np.ones(nx * ny)])
    return _assemble(LatticeKind.TORUS2, (nx, ny), (lx, ly), tails, heads, lengths, axes)


def lattice_from_descriptor(desc: dict) -> LatticeBase:
    """Build a lattice from its JSON descriptor."""
    kind = desc.get("type")
    if kind == "cycle":
        return build_cycle(desc["n"], desc["length"])
    if kind == "torus":
        return build_torus(desc["nx"], desc["ny"], desc["lx"], desc["ly"])
    raise InvalidGeometry(f"unknown lattice type {kind!r}")


@dataclass(frozen=True, eq=False)
class DiscreteSection:
    """One fiber vector per vertex; ``values`` has shape ``(N, rank)``."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2:
            raise ShapeMismatch(f"section values must be 2-D, got shape {v.shape}")
        object.__setattr__(self, "values", v)

    @property
    def rank(self) -> int:
        return self.values.shape[1]

    @property
    def vertex_count(self) -> int:
        return self.values.shape[0]

    def flat(self) -> np.ndarray:
        """Vertex-major flattening matching the assembled operator layout."""
        return self.values.reshape(-1)

    @classmethod
    def from_flat(cls, x: np.ndarray, rank: int) -> "DiscreteSection":
        return cls(np.asarray(x, dtype=float).reshape(-1, rank))

    def __mul__(self, c: float) -> "DiscreteSection":
        return DiscreteSection(self.values * c)

    __rmul__ = __mul__


def l2_inner(a: DiscreteSection, b: DiscreteSection, base: LatticeBase) -> float:
    if a.values.shape != b.values.shape:
        raise ShapeMismatch(f"section shapes differ: {a.values.shape} vs {b.values.shape}")
    if a.vertex_count != base.vertex_count:
        raise ShapeMismatch(
            f"section has {a.vertex_count} vertices, base has {base.vertex_count}")
    pointwise = np.einsum("ij,ij->i", a.values, b.values)
    return float(pointwise @ base.volumes)


def l2_norm(a: DiscreteSection, base: LatticeBase) -> float:
    return math.sqrt(max(l2_inner(a, a, base), 0.0))
