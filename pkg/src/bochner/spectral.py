"""Assembly and solution of the discrete connection Laplacian.

Stencil: ``(L u)_i = sum_{e = (i -> j)} (u_i - U_e u_j) / l_e**2``.  Reverse
edges carry ``U_e^T`` so the assembled matrix is symmetric by construction.
Sections are laid out vertex-major: entry ``i * m + a`` is component ``a``
at vertex ``i``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle import DiscreteConnection, SkewField, perturb
from .errors import MatchingFailure, ShapeMismatch, SolverFailure, TooLarge, UsageError
from .lattice import LatticeBase

DIM_CAP = 6000
TOL_REL = 1e-8
TOL_ABS = 1e-10
MIN_OVERLAP = 0.7


@dataclass(frozen=True, eq=False)
class AssembledLaplacian:
    matrix: np.ndarray
    base: LatticeBase
    conn: DiscreteConnection | None = None

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def rank(self) -> int:
        return self.dim // self.base.vertex_count


def assemble_blocks(base: LatticeBase, m: int, diag_blocks: np.ndarray | None,
                    off_blocks: np.ndarray) -> np.ndarray:
    """Scatter per-directed-edge blocks into a dense ``(N m, N m)`` matrix.

    ``diag_blocks[e]`` is added at ``(tail, tail)`` and ``off_blocks[e]`` at
    ``(tail, head)``.
    """
    n = base.vertex_count
    out = np.zeros((n, n, m, m))
    if diag_blocks is not None:
        np.add.at(out, (base.tails, base.tails), diag_blocks)
    np.add.at(out, (base.tails, base.heads), off_blocks)
    return out.transpose(0, 2, 1, 3).reshape(n * m, n * m)


def assemble_laplacian(base: LatticeBase, conn: DiscreteConnection) -> AssembledLaplacian:
    if conn.base.canonical_count != base.canonical_count:
        raise ShapeMismatch("connection was built on a different lattice")
    m = conn.rank
    w = 1.0 / base.lengths**2
    eye = np.broadcast_to(np.eye(m), (base.edge_count, m, m))
    matrix = assemble_blocks(base, m, w[:, None, None] * eye,
                             -w[:, None, None] * conn.all_transports())
    return AssembledLaplacian(matrix, base, conn)


def dirichlet_energy(u: np.ndarray, base: LatticeBase, conn: DiscreteConnection) -> float:
    """``vol * sum_directed ||u_i - U_e u_j||^2 / (2 l_e^2)`` for a flat section vector."""
    vals = np.asarray(u, dtype=float).reshape(base.vertex_count, conn.rank)
    tr = conn.all_transports()
    diff = vals[base.tails] - np.einsum("eab,eb->ea", tr, vals[base.heads])
    return float(base.vertex_volume * np.sum(np.sum(diff**2, axis=1) / (2 * base.lengths**2)))


@dataclass(frozen=True, eq=False)
class EigenPairs:
    values: np.ndarray
    vectors: np.ndarray


def _fix_signs(vectors: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    # first component above tol made positive; reporting convention only
    idx = np.argmax(np.abs(vectors) > tol, axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def eigensolve(lap, count: int | None = None, cap: int = DIM_CAP) -> EigenPairs:
    """Ascending eigenpairs of a symmetric matrix or assembled Laplacian."""
    matrix = lap.matrix if isinstance(lap, AssembledLaplacian) else np.asarray(lap, dtype=float)
    dim = matrix.shape[0]
    if dim > cap:
        raise TooLarge(f"dimension {dim} exceeds cap {cap}")
    try:
        values, vectors = np.linalg.eigh(matrix)
    except np.linalg.LinAlgError as exc:
        raise SolverFailure(str(exc)) from exc
    if not np.all(np.isfinite(values)):
        raise SolverFailure("non-finite eigenvalues")
    if count is not None:
        values, vectors = values[:count], vectors[:, :count]
    return EigenPairs(values, _fix_signs(vectors))


@dataclass(frozen=True, eq=False)
class SpectralCluster:
    start: int
    values: np.ndarray
    basis: np.ndarray

    @property
    def multiplicity(self) -> int:
        return len(self.values)

    @property
    def stop(self) -> int:
        return self.start + len(self.values)

    @property
    def mean_eigenvalue(self) -> float:
        return float(np.mean(self.values))

    @property
    def spread(self) -> float:
        return float(self.values[-1] - self.values[0])

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T


def group_indices(values: np.ndarray, tol_rel: float, tol_abs: float) -> list[tuple[int, int]]:
    """Transitive grouping of sorted values into ``[start, stop)`` runs."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    scale = np.maximum(1.0, np.maximum(np.abs(values[:-1]), np.abs(values[1:])))
    joined = np.diff(values) <= tol_abs + tol_rel * scale
    cuts = np.flatnonzero(~joined) + 1
    edges = np.concatenate([[0], cuts, [len(values)]])
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:])]


def cluster(eigs: EigenPairs, tol_rel: float = TOL_REL,
            tol_abs: float = TOL_ABS) -> list[SpectralCluster]:
    return [SpectralCluster(a, eigs.values[a:b], eigs.vectors[:, a:b])
            for a, b in group_indices(eigs.values, tol_rel, tol_abs)]


def residual_norm(matrix: np.ndarray, c: SpectralCluster) -> float:
    return float(np.linalg.norm(matrix @ c.basis - c.basis * c.values, 2))


@dataclass(frozen=True, eq=False)
class EigenCurves:
    t_grid: np.ndarray
    values: np.ndarray  # (n_t, n_branch), branch order
    overlaps: np.ndarray  # (n_t, n_branch); overlap with previous sample, 1 at the start
    window: tuple[int, int]
    crossings: list = field(default_factory=list)  # (t, branch_a, branch_b)

    @property
    def branch_count(self) -> int:
        return self.values.shape[1]

    def branch(self, b: int) -> list[tuple[float, float]]:
        return list(zip(self.t_grid.tolist(), self.values[:, b].tolist()))

    def rows(self):
        for k, t in enumerate(self.t_grid):
            for b in range(self.branch_count):
                yield float(t), b, float(self.values[k, b]), float(self.overlaps[k, b])


def _kato_rotate(basis: np.ndarray, ldot: np.ndarray) -> np.ndarray:
    m = basis.T @ ldot @ basis
    _, w = np.linalg.eigh((m + m.T) / 2)
    return basis @ w


def _align(basis: np.ndarray, prev: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rotate a degenerate basis onto the previous branch vectors it contains."""
    ell = basis.shape[1]
    p = basis.T @ prev
    sel = np.sort(np.argsort(-np.linalg.norm(p, axis=0), kind="stable")[:ell])
    u, _, vt = np.linalg.svd(p[:, sel])
    return basis @ (u @ vt), sel


def _greedy_match(o: np.ndarray, prev_vals: np.ndarray, cur_vals: np.ndarray) -> np.ndarray:
    nb = o.shape[0]
    a, b = np.meshgrid(np.arange(nb), np.arange(nb), indexing="ij")
    dist = np.abs(prev_vals[:, None] - cur_vals[None, :])
    order = np.lexsort((dist.ravel(), -o.ravel()))
    assign = -np.ones(nb, dtype=int)
    used = np.zeros(nb, dtype=bool)
    for flat in order:
        i, j = a.ravel()[flat], b.ravel()[flat]
        if assign[i] < 0 and not used[j]:
            assign[i] = j
            used[j] = True
    return assign


def track_curves(base: LatticeBase, conn: DiscreteConnection, field: SkewField, t_grid,
                 window: tuple[int, int], tol_rel: float = TOL_REL, tol_abs: float = TOL_ABS,
                 min_overlap: float = MIN_OVERLAP) -> EigenCurves:
    """Follow eigenvalue branches of ``L(perturb(conn, field, t))`` over a monotone grid.

    Degenerate clusters at the first sample are rotated into the basis that
    diagonalizes the projected derivative; later degenerate clusters are
    rotated onto the previous branch vectors.  Branches are then matched by
    greedy maximal overlap.
    """
    from .perturbation import laplacian_derivative

    t_grid = np.asarray(t_grid, dtype=float)
    steps = np.diff(t_grid)
    if t_grid.ndim != 1 or t_grid.size == 0 or not (np.all(steps > 0) or np.all(steps < 0)):
        raise UsageError("t_grid must be a strictly monotone 1-D sequence")
    lo, hi = int(window[0]), int(window[1])
    nt, nb = len(t_grid), hi - lo
    if lo < 0 or nb < 1:
        raise UsageError(f"bad window {window}")
    values = np.empty((nt, nb))
    overlaps = np.ones((nt, nb))
    crossings = []
    prev_vecs = prev_vals = None
    for k, t in enumerate(t_grid):
        ct = perturb(conn, field, float(t))
        eig = eigensolve(assemble_laplacian(base, ct))
        if hi > len(eig.values):
            raise UsageError(f"window {window} exceeds spectrum size {len(eig.values)}")
        vals = eig.values[lo:hi].copy()
        vecs = eig.vectors[:, lo:hi].copy()
        groups = group_indices(eig.values, tol_rel, tol_abs)
        for a, b in groups:
            if a < lo < b or a < hi < b:
                raise UsageError(f"window {window} cuts a degenerate cluster at t={t}")
        ldot = laplacian_derivative(base, ct, field) if k == 0 else None
        for a, b in groups:
            if b - a < 2 or a < lo or b > hi:
                continue
            sl = slice(a - lo, b - lo)
            if k == 0:
                vecs[:, sl] = _kato_rotate(vecs[:, sl], ldot)
            else:
                vecs[:, sl], _ = _align(vecs[:, sl], prev_vecs)
        if k > 0:
            o = np.abs(prev_vecs.T @ vecs)
            assign = _greedy_match(o, prev_vals, vals)
            got = o[np.arange(nb), assign]
            if np.any(got < min_overlap):
                bad = int(np.argmin(got))
                raise MatchingFailure(
                    f"branch {bad} overlap {got[bad]:.3f} < {min_overlap} at t={t}; refine t_grid")
            vals, vecs = vals[assign], vecs[:, assign]
            overlaps[k] = got
        values[k] = vals
        prev_vecs, prev_vals = vecs, vals
        order = np.argsort(vals, kind="stable")
        for a, b in group_indices(vals[order], tol_rel, tol_abs):
            members = order[a:b]
            for i in range(len(members)):
                for j in range(i + 1, len(members)):
                    crossings.append((float(t), int(min(members[i], members[j])),
                                      int(max(members[i], members[j]))))
    return EigenCurves(t_grid, values, overlaps, (lo, hi), crossings)
