"""SO(2) principal-bundle picture of rank-2 connection Laplacians.

A rank-2 section ``u`` is identified with the complex function
``z = u^1 + i u^2``; a rotation transport ``R(theta)`` then acts as
multiplication by ``exp(i theta)``.  Functions on the total space with fiber
Fourier weight ``k`` see the phase ``exp(i k theta_e)`` along each edge, and
the fiber direction contributes the constant ``k^2 / r^2`` exactly, so the
total space is never meshed along the fiber.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bundle import DiscreteConnection, so2_angles
from .errors import ShapeMismatch, StructureViolation, UnsupportedStructureGroup
from .lattice import LatticeBase
from .spectral import (TOL_ABS, TOL_REL, AssembledLaplacian, assemble_laplacian, eigensolve,
                       group_indices)

_W2 = np.array([[1.0, 1j], [1.0, -1j]]) / np.sqrt(2.0)


def _angles(conn: DiscreteConnection) -> np.ndarray:
    theta = so2_angles(conn)
    if theta is None:
        raise UnsupportedStructureGroup("need a rank-2 connection with SO(2) transports")
    return theta


@dataclass(frozen=True, eq=False)
class EquivariantOperator:
    hermitian: np.ndarray  # horizontal part, complex (N, N)
    weight: int
    fiber_radius: float

    @property
    def vertical(self) -> float:
        return self.weight**2 / self.fiber_radius**2

    def realified(self, include_vertical: bool = True) -> np.ndarray:
        h = self.hermitian
        if include_vertical:
            h = h + self.vertical * np.eye(h.shape[0])
        a, b = h.real, h.imag
        return np.block([[a, -b], [b, a]])


def equivariant_laplacian(base: LatticeBase, conn: DiscreteConnection, weight: int,
                          fiber_radius: float = 1.0) -> EquivariantOperator:
    if fiber_radius <= 0:
        raise ShapeMismatch("fiber_radius must be positive")
    theta = _angles(conn)
    theta = np.concatenate([theta, -theta])
    w = 1.0 / base.lengths**2
    n = base.vertex_count
    h = np.zeros((n, n), dtype=complex)
    np.add.at(h, (base.tails, base.tails), w)
    np.add.at(h, (base.tails, base.heads), -w * np.exp(1j * weight * theta))
    return EquivariantOperator(h, int(weight), float(fiber_radius))


@dataclass(frozen=True, eq=False)
class EquivariantSpectrum:
    weight: int
    fiber_radius: float
    horizontal_eigs: np.ndarray
    total_eigs: np.ndarray


def equivariant_spectrum(base: LatticeBase, conn: DiscreteConnection, weight: int,
                         fiber_radius: float = 1.0) -> EquivariantSpectrum:
    op = equivariant_laplacian(base, conn, weight, fiber_radius)
    # realification doubles every eigenvalue; average the consecutive pairs
    vals = eigensolve(op.realified(include_vertical=False)).values
    horizontal = (vals[0::2] + vals[1::2]) / 2
    return EquivariantSpectrum(op.weight, op.fiber_radius, horizontal, horizontal + op.vertical)


def fiber_fourier_blocks(lap: AssembledLaplacian) -> tuple[np.ndarray, np.ndarray, float]:
    """Conjugate a rank-2 Laplacian by the fiberwise Fourier unitary.

    Returns the weight +1 block, the weight -1 block and the max-norm of the
    off-diagonal blocks.
    """
    if lap.rank != 2:
        raise ShapeMismatch("fiber Fourier blocks need a rank-2 Laplacian")
    n = lap.base.vertex_count
    w = np.kron(np.eye(n), _W2)
    c = w @ lap.matrix @ w.conj().T
    plus, minus = np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2)
    off = max(np.abs(c[np.ix_(plus, minus)]).max(), np.abs(c[np.ix_(minus, plus)]).max())
    return c[np.ix_(plus, plus)], c[np.ix_(minus, minus)], float(off)


def j_operator(n: int) -> np.ndarray:
    return np.kron(np.eye(n), np.array([[0.0, -1.0], [1.0, 0.0]]))


def j_commutator(lap: AssembledLaplacian) -> float:
    """``max |L J - J L|`` with ``J`` the fiberwise quarter turn."""
    j = j_operator(lap.base.vertex_count)
    return float(np.max(np.abs(lap.matrix @ j - j @ lap.matrix)))


def xi(u_values: np.ndarray) -> np.ndarray:
    u_values = np.asarray(u_values, dtype=float)
    if u_values.ndim != 2 or u_values.shape[1] != 2:
        raise ShapeMismatch("xi needs a rank-2 section")
    return u_values[:, 0] + 1j * u_values[:, 1]


def xi_inverse(z: np.ndarray) -> np.ndarray:
    return np.stack([z.real, z.imag], axis=1)


def equivariant_norm_sq(z: np.ndarray, base: LatticeBase) -> float:
    """L2 norm on the total space with fiber measure normalized to one."""
    return float(np.sum(np.abs(z) ** 2) * base.vertex_volume)


@dataclass(frozen=True, eq=False)
class CorrespondenceResult:
    section_eigs: np.ndarray
    shifted_total_eigs: np.ndarray
    deviations: np.ndarray

    @property
    def max_deviation(self) -> float:
        return float(self.deviations.max(initial=0.0))

    def to_dict(self) -> dict:
        return {
            "max_deviation": self.max_deviation,
            "eigenvalues": [
                {"section": float(a), "total_minus_shift": float(b), "deviation": float(d)}
                for a, b, d in zip(self.section_eigs, self.shifted_total_eigs, self.deviations)],
        }


def xi_correspondence_check(conn: DiscreteConnection, base: LatticeBase) -> CorrespondenceResult:
    """Compare the rank-2 section spectrum with the weight +-1 total spectra minus one."""
    _angles(conn)
    section = eigensolve(assemble_laplacian(base, conn)).values
    totals = [equivariant_spectrum(base, conn, k, 1.0).total_eigs for k in (1, -1)]
    shifted = np.sort(np.concatenate(totals)) - 1.0
    return CorrespondenceResult(section, shifted, np.abs(section - shifted))


@dataclass(frozen=True)
class GCluster:
    eigenvalue: float
    real_mult: int
    complex_mult: int
    g_simple: bool


@dataclass(frozen=True, eq=False)
class GSimplicityReport:
    clusters: list = field(default_factory=list)
    commutator: float = 0.0

    @property
    def all_g_simple(self) -> bool:
        return all(c.g_simple for c in self.clusters)


def g_simplicity_report(conn: DiscreteConnection, base: LatticeBase, count: int,
                        tol_rel: float = TOL_REL, tol_abs: float = TOL_ABS,
                        zero_tol: float = 1e-8) -> GSimplicityReport:
    _angles(conn)
    lap = assemble_laplacian(base, conn)
    comm = j_commutator(lap)
    if comm > 1e-10 * max(1.0, float(np.abs(lap.matrix).max())):
        raise StructureViolation(f"Laplacian does not commute with J ({comm:.3e})")
    values = eigensolve(lap).values
    out = []
    for a, b in group_indices(values, tol_rel, tol_abs):
        if a >= count:
            break
        real = b - a
        lam = float(np.mean(values[a:b]))
        if real % 2 and abs(lam) > zero_tol:
            raise StructureViolation(f"odd real multiplicity {real} at eigenvalue {lam}")
        cm = real // 2
        out.append(GCluster(lam, real, cm, cm == 1))
    return GSimplicityReport(out, comm)
