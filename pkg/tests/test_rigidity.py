import numpy as np
import pytest
from hypothesis import given, strategies as st

from bochner.bundle import J2, constant_connection_cycle, random_connection, rotation, \
    trivial_connection
from bochner.errors import ShapeMismatch, UsageError
from bochner.lattice import DiscreteSection, build_cycle, build_torus
from bochner.perturbation import nontriviality_probe
from bochner.rigidity import (constant_rotation_fit, is_j_paired, pair_record,
                              parallel_coefficient_check, rigidity_report)
from bochner.spectral import assemble_laplacian, cluster, eigensolve

from conftest import TWO_PI


def _section(eig, k, m):
    return DiscreteSection.from_flat(eig.vectors[:, k], m)


def _j_pair(conn, base, k=3):
    u = _section(eigensolve(assemble_laplacian(base, conn)), k, 2)
    return u, DiscreteSection(u.values @ J2.T)


def test_identical_pair_is_rigid():
    base = build_torus(4, 4, TWO_PI, TWO_PI)
    conn = random_connection(base, 3, 1, 1.0)
    u = DiscreteSection(np.random.default_rng(1).normal(size=(16, 3)))
    rep = rigidity_report(u, u, conn, base)
    assert rep.res_wedge == rep.res_rigid == rep.res_infinitesimal == 0
    assert rep.max_residual == 0


@pytest.mark.parametrize("make", [
    lambda b: constant_connection_cycle(b, 0.3 * J2),
    lambda b: random_connection(b, 2, 7, 1.0),
])
def test_j_doublet_is_rigid_and_non_parallel(make):
    base = build_cycle(16, TWO_PI)
    conn = make(base)
    u, v = _j_pair(conn, base)
    rep = rigidity_report(u, v, conn, base)
    assert max(rep.res_wedge, rep.res_rigid, rep.res_infinitesimal) <= 1e-10
    assert rep.degenerate_gram == []
    assert rep.bc_residual <= 1e-8
    assert is_j_paired(u, v, conn)
    rec = pair_record(u.flat(), v.flat(), conn, base)
    assert rec["j_paired"] and not rec["pointwise_parallel"]


def test_probe_doublet_is_not_rigid():
    base = build_torus(8, 8, TWO_PI, TWO_PI)
    conn = trivial_connection(base, 3)
    cl = next(c for c in cluster(eigensolve(assemble_laplacian(base, conn)))
              if c.mean_eigenvalue > 1e-8)
    probe = nontriviality_probe(cl, base, conn, trials=20, seed=1)
    basis = probe.first_order.adapted_basis(cl.basis)
    worst = min(rigidity_report(DiscreteSection.from_flat(basis[:, p], 3),
                                DiscreteSection.from_flat(basis[:, q], 3), conn, base).max_residual
                for p in range(basis.shape[1]) for q in range(p + 1, basis.shape[1]))
    assert worst > 1e-6


def test_bc_residual_tracks_wedge_residual():
    base = build_torus(6, 6, TWO_PI, TWO_PI)
    conn = trivial_connection(base, 3)
    cl = next(c for c in cluster(eigensolve(assemble_laplacian(base, conn)))
              if c.mean_eigenvalue > 1e-8)
    u = DiscreteSection.from_flat(cl.basis[:, 0], 3)
    v = DiscreteSection.from_flat(cl.basis[:, 5], 3)
    rep = rigidity_report(u, v, conn, base)
    assert rep.res_wedge > 1e-6 and rep.bc_residual > 1e-8


@given(st.floats(0.1, 50), st.integers(0, 2**16))
def test_residuals_scale_free(scale, seed):
    base = build_cycle(9, TWO_PI)
    conn = random_connection(base, 3, seed, 1.0)
    g = np.random.default_rng(seed)
    u, v = (DiscreteSection(g.normal(size=(9, 3))) for _ in range(2))
    a = rigidity_report(u, v, conn, base)
    b = rigidity_report(u * scale, v * scale, conn, base)
    for k in ("res_wedge", "res_rigid", "res_infinitesimal", "bc_residual"):
        assert getattr(a, k) == pytest.approx(getattr(b, k), rel=1e-10, abs=1e-14)


def test_modes_and_errors():
    base = build_torus(3, 3, 1.0, 1.0)
    conn = trivial_connection(base, 2)
    u = DiscreteSection(np.random.default_rng(0).normal(size=(9, 2)))
    rep = rigidity_report(u, u * -1.0, conn, base, mode="per_direction")
    assert rep.mode == "per_direction" and rep.res_infinitesimal == 0
    assert rep.to_dict(verbose=True)["coefficients"][0]["edge"] == 0
    with pytest.raises(UsageError):
        rigidity_report(u, u, conn, base, mode="bogus")
    with pytest.raises(ShapeMismatch):
        rigidity_report(u, DiscreteSection(np.zeros((9, 3))), conn, base)


def test_parallel_pair_flags_degenerate_gram():
    base = build_cycle(8, TWO_PI)
    u = DiscreteSection(np.random.default_rng(2).normal(size=(8, 2)))
    rep = rigidity_report(u, u * 3.0, trivial_connection(base, 2), base)
    assert rep.degenerate_gram == list(range(8))
    assert np.all(np.isnan(rep.coeffs))


def test_parallel_coefficient_constant_section():
    base = build_torus(4, 4, 1.0, 1.0)
    u = DiscreteSection(np.tile([1.0, -2.0, 0.5], (16, 1)))
    alpha, res = parallel_coefficient_check(u, trivial_connection(base, 3), base)
    assert not np.any(alpha) and res == 0


def test_parallel_coefficient_cycle_eigenfunction():
    base = build_cycle(32, TWO_PI)
    conn = trivial_connection(base, 1)
    u = _section(eigensolve(assemble_laplacian(base, conn)), 1, 1)
    alpha, res = parallel_coefficient_check(u, conn, base)
    assert res > 0.1
    alpha2, res2 = parallel_coefficient_check(u * 2.0, conn, base)
    assert np.allclose(alpha, alpha2, rtol=1e-12, atol=1e-12) and res2 == pytest.approx(res)


def test_parallel_coefficient_exact_scaling_field():
    # u_i = r_i * w under the trivial connection: grad u is exactly parallel to u
    base = build_cycle(16, TWO_PI)
    r = 2 + np.cos(TWO_PI * np.arange(16) / 16)
    u = DiscreteSection(np.outer(r, [0.6, 0.8]))
    alpha, res = parallel_coefficient_check(u, trivial_connection(base, 2), base)
    assert res <= 1e-14
    h = base.spacings[0]
    assert np.allclose(alpha[:16], (np.roll(r, -1) / r - 1) / h, atol=1e-12)


def test_parallel_coefficient_zero_section():
    base = build_cycle(4, 1.0)
    with pytest.raises(UsageError):
        parallel_coefficient_check(DiscreteSection(np.zeros((4, 1))), trivial_connection(base, 1),
                                   base)


def _phi(n=40):
    ang = TWO_PI * np.arange(n) / n
    return np.stack([np.cos(ang) + 0.5, 0.8 * np.sin(2 * ang) - 0.3], axis=1)


def test_rotation_fit_constant_rotation():
    phi = _phi()
    psi = phi @ rotation(0.7).T
    t, res = constant_rotation_fit(DiscreteSection(phi), DiscreteSection(psi))
    assert np.abs(t - rotation(0.7).T).max() <= 1e-10 and res <= 1e-12


def test_rotation_fit_varying_rotation():
    phi = _phi()
    n = len(phi)
    rots = np.array([rotation(np.sin(TWO_PI * i / n)) for i in range(n)])
    psi = np.einsum("iab,ib->ia", rots, phi)
    _, res = constant_rotation_fit(DiscreteSection(phi), DiscreteSection(psi))
    assert res > 1e-3


def test_rotation_fit_reflection():
    phi = _phi()
    t, res = constant_rotation_fit(DiscreteSection(phi), DiscreteSection(phi * [1.0, -1.0]))
    assert np.linalg.det(t) == pytest.approx(-1.0) and res <= 1e-12


@given(st.floats(-np.pi, np.pi), st.floats(-np.pi, np.pi), st.integers(0, 2**16))
def test_rotation_fit_conjugation_invariance(theta, beta, seed):
    g = np.random.default_rng(seed)
    phi = g.normal(size=(12, 2))
    psi = phi @ rotation(theta).T + 0.1 * g.normal(size=(12, 2))
    base = build_cycle(12, 3.0)
    t, res = constant_rotation_fit(DiscreteSection(phi), DiscreteSection(psi), base)
    r = rotation(beta)
    t2, res2 = constant_rotation_fit(DiscreteSection(phi @ r.T), DiscreteSection(psi @ r.T), base)
    assert np.abs(t2 - r @ t @ r.T).max() <= 1e-10
    assert abs(res - res2) <= 1e-10


def test_rotation_fit_errors():
    z = DiscreteSection(np.zeros((4, 2)))
    with pytest.raises(UsageError):
        constant_rotation_fit(z, DiscreteSection(np.ones((4, 2))))
    with pytest.raises(ShapeMismatch):
        constant_rotation_fit(DiscreteSection(np.ones((4, 3))), DiscreteSection(np.ones((4, 3))))
