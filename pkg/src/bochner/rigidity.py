"""Diagnostics for wedge, norm and gradient-norm rigidity of eigensection pairs.

All residuals are scale-free: each is divided by the largest magnitude of
the quantity being compared, so jointly rescaling ``u`` and ``v`` leaves
them unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle import J2, DiscreteConnection, covariant_difference, so2_angles
from .errors import ShapeMismatch, UsageError
from .lattice import DiscreteSection, LatticeBase

GRAM_TOL = 1e-12


def _ratio(num: float, den: float) -> float:
    return float(num / den) if den > 0 else 0.0


@dataclass(frozen=True, eq=False)
class RigidityReport:
    res_wedge: float
    res_rigid: float
    res_infinitesimal: float
    bc_residual: float
    coeffs: np.ndarray  # (C, 4): a, b, c, d per canonical edge; NaN on flagged tails
    fit_residual: np.ndarray  # (C,) normalized span-fit residual per edge
    degenerate_gram: list = field(default_factory=list)
    mode: str = "incident"

    @property
    def max_residual(self) -> float:
        return max(self.res_wedge, self.res_rigid, self.res_infinitesimal)

    def to_dict(self, verbose: bool = False) -> dict:
        out = {
            "mode": self.mode,
            "res_wedge": self.res_wedge,
            "res_rigid": self.res_rigid,
            "res_infinitesimal": self.res_infinitesimal,
            "bc_residual": self.bc_residual,
            "degenerate_gram_vertices": list(self.degenerate_gram),
        }
        if verbose:
            out["coefficients"] = [
                {"edge": e, "a": r[0], "b": r[1], "c": r[2], "d": r[3],
                 "fit_residual": float(self.fit_residual[e])}
                for e, r in enumerate(self.coeffs.tolist())]
        return out


def _gradient_energy(grad: np.ndarray, base: LatticeBase, mode: str) -> np.ndarray:
    """Per-vertex ``||grad u||^2`` from outgoing directed differences.

    ``incident``: half the sum over all outgoing edges (one value per vertex).
    ``per_direction``: the same, split by lattice axis (shape ``(N, dim)``).
    """
    sq = np.sum(grad**2, axis=1)
    n = base.vertex_count
    if mode == "incident":
        out = np.zeros(n)
        np.add.at(out, base.tails, sq / 2)
        return out
    if mode == "per_direction":
        out = np.zeros((n, len(base.shape)))
        np.add.at(out, (base.tails, base.axes), sq / 2)
        return out
    raise UsageError(f"unknown infinitesimal mode {mode!r}")


def rigidity_report(u: DiscreteSection, v: DiscreteSection, conn: DiscreteConnection,
                    base: LatticeBase, mode: str = "incident",
                    gram_tol: float = GRAM_TOL) -> RigidityReport:
    if u.values.shape != v.values.shape or u.rank != conn.rank:
        raise ShapeMismatch("sections must share the bundle's shape")
    if u.vertex_count != base.vertex_count:
        raise ShapeMismatch("section does not live on this lattice")
    c = base.canonical_count
    tails = base.tails[:c]
    gu, gv = covariant_difference(u, conn), covariant_difference(v, conn)
    ui, vi = u.values[tails], v.values[tails]

    # wedge residual per canonical edge (one frame direction per edge)
    wu = np.einsum("ea,eb->eab", gu, ui)
    wu = wu - np.swapaxes(wu, 1, 2)
    wv = np.einsum("ea,eb->eab", gv, vi)
    wv = wv - np.swapaxes(wv, 1, 2)
    diff = np.sqrt(np.sum((wu - wv) ** 2, axis=(1, 2)))
    scale = (np.linalg.norm(gu, axis=1) * np.linalg.norm(ui, axis=1)
             + np.linalg.norm(gv, axis=1) * np.linalg.norm(vi, axis=1))
    res_wedge = _ratio(diff.max(initial=0.0), scale.max(initial=0.0))

    nu, nv = np.sum(u.values**2, axis=1), np.sum(v.values**2, axis=1)
    res_rigid = _ratio(np.abs(nu - nv).max(initial=0.0),
                       np.maximum(nu, nv).max(initial=0.0))

    eu = _gradient_energy(covariant_difference(u, conn, directed=True), base, mode)
    ev = _gradient_energy(covariant_difference(v, conn, directed=True), base, mode)
    res_inf = _ratio(np.abs(eu - ev).max(initial=0.0), np.maximum(eu, ev).max(initial=0.0))

    # coefficient system: grad u = a u + b v, grad v = c u + d v, via the 2x2 Gram matrix
    uv = np.einsum("ia,ia->i", u.values, v.values)
    det = nu * nv - uv**2
    degenerate = det <= gram_tol * nu.max(initial=0.0) * nv.max(initial=0.0)
    g11, g12, g22, dt = nu[tails], uv[tails], nv[tails], det[tails]
    ok = ~degenerate[tails]
    safe = np.where(ok, dt, 1.0)

    def solve(g):
        r1 = np.einsum("ea,ea->e", g, ui)
        r2 = np.einsum("ea,ea->e", g, vi)
        return (g22 * r1 - g12 * r2) / safe, (-g12 * r1 + g11 * r2) / safe

    a, b = solve(gu)
    cc, d = solve(gv)
    coeffs = np.stack([a, b, cc, d], axis=1)
    coeffs[~ok] = np.nan
    fit = (np.linalg.norm(gu - a[:, None] * ui - b[:, None] * vi, axis=1)
           + np.linalg.norm(gv - cc[:, None] * ui - d[:, None] * vi, axis=1))
    gscale = np.linalg.norm(gu, axis=1) + np.linalg.norm(gv, axis=1)
    fit = np.where(ok, fit / np.where(gscale > 0, gscale, 1.0), np.nan)
    bc = np.abs(b + cc)[ok]
    bc_res = _ratio(bc.max(initial=0.0), (np.abs(b) + np.abs(cc))[ok].max(initial=0.0))
    return RigidityReport(res_wedge, res_rigid, res_inf, bc_res, coeffs, fit,
                          np.flatnonzero(degenerate).tolist(), mode)


def is_j_paired(u: DiscreteSection, v: DiscreteSection, conn: DiscreteConnection,
                tol: float = 1e-6) -> bool:
    """True for rank-2 SO(2) bundles when ``v = +-J u`` fiberwise."""
    if conn.rank != 2 or so2_angles(conn) is None:
        return False
    ju = u.values @ J2.T
    scale = np.linalg.norm(u.values)
    err = min(np.linalg.norm(v.values - ju), np.linalg.norm(v.values + ju))
    return bool(err <= tol * scale)


def pair_record(x: np.ndarray, y: np.ndarray, conn: DiscreteConnection,
                base: LatticeBase) -> dict:
    """Rigidity residuals and classification for two flat eigenvectors."""
    u = DiscreteSection.from_flat(x, conn.rank)
    v = DiscreteSection.from_flat(y, conn.rank)
    rep = rigidity_report(u, v, conn, base)
    return {
        "res_wedge": rep.res_wedge,
        "res_rigid": rep.res_rigid,
        "res_infinitesimal": rep.res_infinitesimal,
        "bc_residual": rep.bc_residual,
        "pointwise_parallel": bool(rep.degenerate_gram),
        "j_paired": is_j_paired(u, v, conn),
    }


def parallel_coefficient_check(u: DiscreteSection, conn: DiscreteConnection,
                               base: LatticeBase) -> tuple[np.ndarray, float]:
    """Fit ``(grad u)_e = alpha_e u_i`` on every directed edge.

    The fit is ``U_e u_j ~ c_e u_i`` with ``c_e >= 0`` and
    ``alpha_e = (c_e - 1) / l_e``: the transported value may not flip sign,
    which is the lattice form of ``alpha = d log ||u||^2`` being defined.
    The residual is the worst ``||U_e u_j - c_e u_i|| / l_e`` relative to the
    largest ``||(grad u)_e||``.
    """
    if u.rank != conn.rank or u.vertex_count != base.vertex_count:
        raise ShapeMismatch("section does not match the bundle")
    if not np.any(u.values):
        raise UsageError("parallel_coefficient_check needs a nonzero section")
    tr = conn.all_transports()
    ui = u.values[base.tails]
    moved = np.einsum("eab,eb->ea", tr, u.values[base.heads])
    nui = np.sum(ui**2, axis=1)
    proj = np.einsum("ea,ea->e", moved, ui) / np.where(nui > 0, nui, 1.0)
    factor = np.where(nui > 0, np.maximum(proj, 0.0), 0.0)
    alpha = (factor - 1.0) / base.lengths
    miss = np.linalg.norm(moved - factor[:, None] * ui, axis=1) / base.lengths
    grad = np.linalg.norm(moved - ui, axis=1) / base.lengths
    return alpha, _ratio(miss.max(), grad.max())


def constant_rotation_fit(phi: DiscreteSection, psi: DiscreteSection,
                          base: LatticeBase | None = None) -> tuple[np.ndarray, float]:
    """Best constant ``T`` in O(2) with ``phi_i ~ T psi_i`` (weighted Procrustes).

    Returns ``T`` and the minimized weighted misfit divided by ``||phi||^2``.
    """
    p, q = phi.values, psi.values
    if p.shape != q.shape or p.shape[1] != 2:
        raise ShapeMismatch("constant_rotation_fit needs two rank-2 sections of equal size")
    if not np.any(p) or not np.any(q):
        raise UsageError("constant_rotation_fit needs nonzero sections")
    w = base.volumes if base is not None else np.ones(len(p))
    cross = (p * w[:, None]).T @ q
    s, _, vt = np.linalg.svd(cross)
    t = s @ vt
    misfit = float(np.sum(w * np.sum((p - q @ t.T) ** 2, axis=1)))
    return t, misfit / float(np.sum(w * np.sum(p**2, axis=1)))
