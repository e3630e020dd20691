"""First-order eigenvalue perturbation along ``nabla(t) = nabla + t A``.

Derivative of the stencil: with ``U_e(t) = exp(t l_e A_e) U_e`` the only
moving blocks are the off-diagonal ones, ``d/dt (-U_e / l^2) = -A_e U_e / l``
on canonical edges and its transpose on the reverse edge.

Geometric form of the slope.  For ``u`` with ``(grad u)_e = (U_e u_j - u_i) / l_e``::

    <Ldot u, u> = -2 vol sum_e <A_e U_e u_j, u_i> / l_e
                = 2 vol sum_e <A_e u_i, (grad u)_e>          (A_e skew kills <A_e u_i, u_i>)
                = vol sum_e <<A_e, wedge((grad u)_e, u_i)>>   (wedge = a b^T - b a^T)

where the sum runs over canonical edges, i.e. each undirected edge once.
The continuum factor 2 in front of the integral is absorbed by the
un-halved wedge.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field as dc_field

import numpy as np

from .bundle import (DiscreteConnection, SkewField, covariant_difference, perturb,
                     random_skew_field)
from .errors import ShapeMismatch, SolverFailure, StructurallyZero, UsageError
from .lattice import DiscreteSection, LatticeBase, l2_inner
from .rng import Stream
from .spectral import (TOL_ABS, TOL_REL, SpectralCluster, assemble_blocks,
                       assemble_laplacian, eigensolve, group_indices)

PROBE_TRIALS = 32
SCALAR_TOL = 1e-10
STEP_SAFETY = 0.1
MAX_HALVINGS = 30


def _check(base: LatticeBase, conn: DiscreteConnection, field: SkewField):
    if conn.rank != field.rank:
        raise ShapeMismatch(f"connection rank {conn.rank} vs field rank {field.rank}")
    if not (conn.base.canonical_count == field.base.canonical_count == base.canonical_count):
        raise ShapeMismatch("base, connection and field disagree on the lattice")


def laplacian_derivative(base: LatticeBase, conn: DiscreteConnection,
                         field: SkewField) -> np.ndarray:
    _check(base, conn, field)
    c = base.canonical_count
    au = field.value @ conn.transport / base.lengths[:c, None, None]
    off = -np.concatenate([au, np.swapaxes(au, 1, 2)])
    return assemble_blocks(base, conn.rank, None, off)


@dataclass(frozen=True, eq=False)
class FirstOrderMatrix:
    cluster_start: int
    matrix: np.ndarray
    slopes: np.ndarray
    rotation: np.ndarray  # columns: eigenvectors of matrix, ascending slopes

    def nonscalarity(self) -> float:
        ell = self.matrix.shape[0]
        return float(np.linalg.norm(self.matrix - np.trace(self.matrix) / ell * np.eye(ell), 2))

    def adapted_basis(self, basis: np.ndarray) -> np.ndarray:
        return basis @ self.rotation


def first_order_matrix(cluster: SpectralCluster, ldot: np.ndarray) -> FirstOrderMatrix:
    b = cluster.basis
    if ldot.shape != (b.shape[0], b.shape[0]):
        raise ShapeMismatch(f"derivative {ldot.shape} vs basis {b.shape}")
    m = b.T @ ldot @ b
    m = (m + m.T) / 2
    slopes, w = np.linalg.eigh(m)
    return FirstOrderMatrix(cluster.start, m, slopes, w)


@dataclass(frozen=True)
class VariationValue:
    value: float
    normalized: bool


def variation_formula_geometric(u: DiscreteSection, field: SkewField,
                                conn: DiscreteConnection, base: LatticeBase,
                                norm_tol: float = 1e-8) -> VariationValue:
    _check(base, conn, field)
    if u.rank != conn.rank or u.vertex_count != base.vertex_count:
        raise ShapeMismatch("section does not match the bundle")
    c = base.canonical_count
    grad = covariant_difference(u, conn)
    ui = u.values[base.tails[:c]]
    # <<A, wedge(g, u)>> = g^T A u - u^T A g
    hs = (np.einsum("ea,eab,eb->e", grad, field.value, ui)
          - np.einsum("ea,eab,eb->e", ui, field.value, grad))
    value = float(base.vertex_volume * hs.sum())
    normalized = abs(l2_inner(u, u, base) - 1.0) <= norm_tol
    return VariationValue(value, normalized)


def section_from_vector(x: np.ndarray, base: LatticeBase, rank: int) -> DiscreteSection:
    """L2-normalized section from a Euclidean unit eigenvector."""
    return DiscreteSection.from_flat(np.asarray(x) / np.sqrt(base.vertex_volume), rank)


def trial_seed(seed: int, *key: int) -> int:
    return Stream(seed, *key).state


@dataclass(frozen=True, eq=False)
class ProbeResult:
    field: SkewField
    spread: float
    nonscalarity: float
    trial: int
    seed: int
    first_order: FirstOrderMatrix
    ldot: np.ndarray
    tolerance: float
    spreads: list = dc_field(default_factory=list)

    @property
    def splits(self) -> bool:
        return self.spread > self.tolerance


def nontriviality_probe(cluster: SpectralCluster, base: LatticeBase, conn: DiscreteConnection,
                        trials: int = PROBE_TRIALS, seed: int = 0, magnitude: float = 1.0,
                        scalar_tol: float = SCALAR_TOL) -> ProbeResult:
    """Search random skew fields for one whose projected derivative is not scalar.

    The acceptance threshold is ``scalar_tol * ||Ldot||_2`` of the winning
    field; that norm bounds every entry of the projected matrix.
    """
    if conn.rank == 1:
        raise StructurallyZero("skew endomorphisms of a line bundle vanish")
    if cluster.multiplicity < 2:
        raise UsageError("probe needs a degenerate cluster (multiplicity >= 2)")
    if trials < 1:
        raise UsageError("trials must be >= 1")
    best = None
    spreads = []
    for k in range(trials):
        s = trial_seed(seed, k)
        f = random_skew_field(base, conn.rank, s, magnitude)
        ldot = laplacian_derivative(base, conn, f)
        fo = first_order_matrix(cluster, ldot)
        ns = fo.nonscalarity()
        spreads.append(float(fo.slopes[-1] - fo.slopes[0]))
        if best is None or ns > best[0]:
            best = (ns, k, s, f, fo, ldot)
    ns, k, s, f, fo, ldot = best
    tol = scalar_tol * float(np.linalg.norm(ldot, 2))
    return ProbeResult(f, float(fo.slopes[-1] - fo.slopes[0]), ns, k, s, fo, ldot, tol, spreads)


class SplitStatus(str, enum.Enum):
    SIMPLIFIED = "Simplified"
    IRREDUCIBLE = "IrreducibleStructure"
    BUDGET = "BudgetExhausted"


@dataclass(eq=False)
class SplitReport:
    status: SplitStatus
    final_connection: DiscreteConnection
    iterations: list = dc_field(default_factory=list)
    leading_eigenvalues: list = dc_field(default_factory=list)
    multiplicities: list = dc_field(default_factory=list)
    min_gap: float = float("nan")
    rigidity_pairs: list = dc_field(default_factory=list)
    params: dict = dc_field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "params": self.params,
            "iterations": self.iterations,
            "leading_eigenvalues": self.leading_eigenvalues,
            "multiplicities": self.multiplicities,
            "min_gap": self.min_gap,
            "rigidity_pairs": self.rigidity_pairs,
        }


def _leading_groups(values, n, delta, tol_rel, tol_abs):
    groups = group_indices(values, tol_rel, max(delta, tol_abs))
    return [g for g in groups if g[0] < n]


def _progress(groups, n):
    mults = [b - a for a, b in groups]
    simple = sum(1 for a, b in groups if b - a == 1 and a < n)
    return max(mults), simple, mults


def _min_gap(values, n):
    return float(np.min(np.diff(values[: n + 1]))) if n >= 1 and len(values) > 1 else float("inf")


def _isolation_gap(values, a, b):
    gaps = []
    if a > 0:
        gaps.append(values[a] - values[a - 1])
    if b < len(values):
        gaps.append(values[b] - values[b - 1])
    return float(min(gaps)) if gaps else 1.0


def simplify_spectrum(base: LatticeBase, conn: DiscreteConnection, n: int, delta: float,
                      budget: int = 50, seed: int = 0, trials: int = PROBE_TRIALS,
                      magnitude: float = 1.0, t_max: float = 1.0,
                      tol_rel: float = TOL_REL, tol_abs: float = TOL_ABS,
                      examine_pairs: bool = True, zero_tol: float = 1e-8) -> SplitReport:
    """Perturb ``conn`` until the first ``n`` eigenvalues are simple and ``delta``-separated.

    Each iteration probes degenerate leading groups from the bottom up and
    steps along the first splittable field with
    ``t = min(0.1 * isolation_gap / ||Ldot||_2, t_max)``.  A step that would
    raise the largest multiplicity or lower the number of simple leading
    eigenvalues is halved until it does not.
    """
    from .rigidity import pair_record

    if n < 1 or delta <= 0 or budget < 1 or trials < 1 or t_max <= 0:
        raise UsageError("need n >= 1, delta > 0, budget >= 1, trials >= 1, t_max > 0")
    params = {"n": n, "delta": delta, "budget": budget, "seed": seed, "trials": trials,
              "magnitude": magnitude, "t_max": t_max, "tol_rel": tol_rel, "tol_abs": tol_abs}
    report = SplitReport(SplitStatus.BUDGET, conn, params=params)
    lap = assemble_laplacian(base, conn)
    eig = eigensolve(lap)
    if n > len(eig.values):
        raise UsageError(f"n={n} exceeds spectrum size {len(eig.values)}")

    def finish(status):
        groups = _leading_groups(eig.values, n, delta, tol_rel, tol_abs)
        report.status = status
        report.final_connection = conn
        report.leading_eigenvalues = eig.values[:n].tolist()
        report.multiplicities = [b - a for a, b in groups]
        report.min_gap = _min_gap(eig.values, n)
        return report

    for it in range(budget + 1):
        groups = _leading_groups(eig.values, n, delta, tol_rel, tol_abs)
        max_mult, simple, _ = _progress(groups, n)
        if max_mult == 1:
            return finish(SplitStatus.SIMPLIFIED)
        if it == budget:
            break
        chosen = None
        for gi, (a, b) in enumerate(groups):
            if b - a < 2:
                continue
            cl = SpectralCluster(a, eig.values[a:b], eig.vectors[:, a:b])
            probe = nontriviality_probe(cl, base, conn, trials, trial_seed(seed, it, gi),
                                        magnitude)
            if examine_pairs and cl.mean_eigenvalue > zero_tol:
                adapted = probe.first_order.adapted_basis(cl.basis)
                for p in range(adapted.shape[1]):
                    for q in range(p + 1, adapted.shape[1]):
                        rec = pair_record(adapted[:, p], adapted[:, q], conn, base)
                        rec.update(iteration=it, cluster_start=a)
                        report.rigidity_pairs.append(rec)
            if probe.splits:
                chosen = (a, b, cl, probe)
                break
        if chosen is None:
            return finish(SplitStatus.IRREDUCIBLE)
        a, b, cl, probe = chosen
        gap = _isolation_gap(eig.values, a, b)
        ldot_norm = float(np.linalg.norm(probe.ldot, 2))
        t = min(STEP_SAFETY * gap / ldot_norm, t_max)
        for halvings in range(MAX_HALVINGS + 1):
            new_conn = perturb(conn, probe.field, t)
            new_lap = assemble_laplacian(base, new_conn)
            new_eig = eigensolve(new_lap)
            new_groups = _leading_groups(new_eig.values, n, delta, tol_rel, tol_abs)
            new_max, new_simple, _ = _progress(new_groups, n)
            if new_max <= max_mult and new_simple >= simple:
                break
            t /= 2
        else:
            raise SolverFailure(f"iteration {it}: no step size keeps progress monotone")
        movement = float(np.max(np.abs(new_eig.values - eig.values)))
        bound = float(np.linalg.norm(new_lap.matrix - lap.matrix, 2))
        if movement > bound + 1e-12 * max(1.0, float(np.abs(eig.values).max())):
            raise SolverFailure(f"iteration {it}: eigenvalue movement {movement} exceeds "
                                f"perturbation norm {bound}")
        report.iterations.append({
            "iteration": it,
            "seed": probe.seed,
            "trial": probe.trial,
            "cluster_start": a,
            "cluster_multiplicity": b - a,
            "cluster_eigenvalue": cl.mean_eigenvalue,
            "slope_spread": probe.spread,
            "t_step": t,
            "halvings": halvings,
            "max_multiplicity_before": max_mult,
            "max_multiplicity_after": new_max,
            "simple_before": simple,
            "simple_after": new_simple,
            "min_gap": _min_gap(new_eig.values, n),
            "weyl_movement": movement,
            "weyl_bound": bound,
        })
        conn, lap, eig = new_conn, new_lap, new_eig
    return finish(SplitStatus.BUDGET)
