import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from bochner.bundle import (J2, SkewField, constant_connection_cycle, perturb, random_connection,
                            random_skew_field, trivial_connection)
from bochner.errors import StructurallyZero, UsageError
from bochner.lattice import DiscreteSection, build_cycle, build_torus, l2_norm
from bochner.perturbation import (SplitStatus, first_order_matrix, laplacian_derivative,
                                  nontriviality_probe, section_from_vector, simplify_spectrum,
                                  variation_formula_geometric)
from bochner.spectral import SpectralCluster, assemble_laplacian, cluster, eigensolve

from conftest import TWO_PI

FIXTURES = Path(__file__).parent / "fixtures"
BASES = [build_cycle(10, TWO_PI), build_torus(4, 5, TWO_PI, 3.0)]


def _instance(seed, m=3, k=0):
    base = BASES[k]
    return base, random_connection(base, m, seed, 1.0), random_skew_field(base, m, seed + 1, 1.0)


def _first_nonzero_cluster(base, conn):
    return next(c for c in cluster(eigensolve(assemble_laplacian(base, conn)))
                if c.mean_eigenvalue > 1e-8)


def test_derivative_trivial_cases():
    base, conn, f = _instance(3)
    zero = SkewField(base, 3, np.zeros_like(f.value))
    assert not np.any(laplacian_derivative(base, conn, zero))
    c1 = random_connection(base, 1, 3, 1.0)
    assert not np.any(laplacian_derivative(base, c1, random_skew_field(base, 1, 3, 1.0)))


@given(st.integers(0, 2**20), st.sampled_from([0, 1]), st.integers(2, 4))
def test_derivative_matches_central_difference(seed, k, m):
    base, conn, f = _instance(seed, m, k)
    t = 1e-4
    fd = (assemble_laplacian(base, perturb(conn, f, t)).matrix
          - assemble_laplacian(base, perturb(conn, f, -t)).matrix) / (2 * t)
    ldot = laplacian_derivative(base, conn, f)
    assert np.abs(ldot - fd).max() <= 1e-6
    assert np.array_equal(ldot, ldot.T)


def test_first_order_matrix_simple_eigenvalue():
    base, conn, f = _instance(5, 3, 1)
    eig = eigensolve(assemble_laplacian(base, conn))
    ldot = laplacian_derivative(base, conn, f)
    cl = SpectralCluster(4, eig.values[4:5], eig.vectors[:, 4:5])
    fo = first_order_matrix(cl, ldot)
    u = eig.vectors[:, 4]
    assert fo.matrix.shape == (1, 1) and abs(fo.matrix[0, 0] - u @ ldot @ u) <= 1e-14


def test_first_order_matrix_contract():
    base = build_torus(6, 6, TWO_PI, TWO_PI)
    conn = trivial_connection(base, 3)
    cl = _first_nonzero_cluster(base, conn)
    fo = first_order_matrix(cl, laplacian_derivative(base, conn, random_skew_field(base, 3, 2, 1)))
    assert np.abs(fo.matrix - fo.matrix.T).max() <= 1e-12
    assert abs(np.trace(fo.matrix) - fo.slopes.sum()) <= 1e-10
    adapted = fo.adapted_basis(cl.basis)
    assert np.abs(adapted.T @ adapted - np.eye(cl.multiplicity)).max() <= 1e-12


def test_j_doublet_first_order_matrix_is_scalar():
    base = build_cycle(16, TWO_PI)
    conn = constant_connection_cycle(base, 0.3 * J2)
    for c in cluster(eigensolve(assemble_laplacian(base, conn))):
        assert c.multiplicity == 2
        fo = first_order_matrix(c, laplacian_derivative(base, conn,
                                                        random_skew_field(base, 2, c.start, 1)))
        assert np.abs(fo.matrix - np.trace(fo.matrix) / 2 * np.eye(2)).max() <= 1e-10


def test_geometric_formula_trivial_cases():
    base, conn, f = _instance(1)
    u = DiscreteSection(np.random.default_rng(0).normal(size=(base.vertex_count, 3)))
    zero = SkewField(base, 3, np.zeros_like(f.value))
    assert variation_formula_geometric(u, zero, conn, base).value == 0
    const = DiscreteSection(np.tile([0.3, -1.0, 2.0], (base.vertex_count, 1)))
    assert variation_formula_geometric(const, f, trivial_connection(base, 3), base).value == 0


@given(st.integers(0, 2**20), st.sampled_from([0, 1]), st.integers(2, 4), st.integers(0, 29))
def test_geometric_formula_identity(seed, k, m, idx):
    base, conn, f = _instance(seed, m, k)
    eig = eigensolve(assemble_laplacian(base, conn))
    u = section_from_vector(eig.vectors[:, idx], base, m)
    res = variation_formula_geometric(u, f, conn, base)
    assert res.normalized and abs(l2_norm(u, base) - 1) <= 1e-12
    direct = base.vertex_volume * (u.flat() @ laplacian_derivative(base, conn, f) @ u.flat())
    assert abs(res.value - direct) <= 1e-12


def test_hellmann_feynman_second_order():
    base = build_torus(5, 6, TWO_PI, 3.0)
    conn = random_connection(base, 3, 4, 1.0)
    f = random_skew_field(base, 3, 4, 1.0)
    eig = eigensolve(assemble_laplacian(base, conn))
    gaps = np.minimum(np.diff(eig.values[:21])[:-1], np.diff(eig.values[:21])[1:])
    i = int(np.argmax(gaps)) + 1
    slope = eig.vectors[:, i] @ laplacian_derivative(base, conn, f) @ eig.vectors[:, i]
    errs = []
    for t in (1e-3, 1e-4):
        lp = eigensolve(assemble_laplacian(base, perturb(conn, f, t))).values[i]
        lm = eigensolve(assemble_laplacian(base, perturb(conn, f, -t))).values[i]
        errs.append(abs((lp - lm) / (2 * t) - slope))
    assert 80 <= errs[0] / errs[1] <= 120


def test_probe_regression_fixture():
    want = json.loads((FIXTURES / "probe_torus8_rank3.json").read_text())
    base = build_torus(8, 8, TWO_PI, TWO_PI)
    conn = trivial_connection(base, 3)
    cl = _first_nonzero_cluster(base, conn)
    probe = nontriviality_probe(cl, base, conn, trials=20, seed=1)
    assert probe.splits and probe.spread > 0
    assert (cl.start, cl.multiplicity, probe.trial) == (want["cluster_start"],
                                                         want["multiplicity"], want["trial"])
    assert np.abs(probe.first_order.slopes - want["slopes"]).max() <= 1e-9


def test_probe_j_doublet_is_obstructed():
    base = build_cycle(16, TWO_PI)
    conn = constant_connection_cycle(base, 0.3 * J2)
    cl = _first_nonzero_cluster(base, conn)
    probe = nontriviality_probe(cl, base, conn, trials=32, seed=3)
    assert not probe.splits
    assert max(probe.spreads) <= 1e-10


def test_probe_errors():
    base = build_cycle(8, TWO_PI)
    eig = eigensolve(assemble_laplacian(base, trivial_connection(base, 3)))
    with pytest.raises(UsageError):
        nontriviality_probe(SpectralCluster(0, eig.values[:1], eig.vectors[:, :1]), base,
                            trivial_connection(base, 3))
    c1 = trivial_connection(base, 1)
    e1 = eigensolve(assemble_laplacian(base, c1))
    with pytest.raises(StructurallyZero):
        nontriviality_probe(SpectralCluster(1, e1.values[1:3], e1.vectors[:, 1:3]), base, c1)


def test_already_simple_needs_no_iterations():
    base = build_torus(5, 6, TWO_PI, 3.0)
    rep = simplify_spectrum(base, random_connection(base, 3, 2, 1.0), n=5, delta=1e-6)
    assert rep.status is SplitStatus.SIMPLIFIED and rep.iterations == []


def test_split_regression_fixture():
    want = json.loads((FIXTURES / "split_torus12_rank3.json").read_text())
    base = build_torus(12, 12, TWO_PI, TWO_PI)
    rep = simplify_spectrum(base, trivial_connection(base, 3), n=12, delta=1e-6, seed=1)
    assert rep.status.value == want["status"] == "Simplified"
    assert len(rep.iterations) == want["iterations"] <= 50
    assert rep.multiplicities == [1] * 12
    assert abs(rep.min_gap - want["min_gap"]) <= 1e-9 and rep.min_gap > 1e-6
    assert np.abs(np.array(rep.leading_eigenvalues) - want["leading_eigenvalues"]).max() <= 1e-9
    for rec in rep.iterations:
        assert rec["max_multiplicity_after"] <= rec["max_multiplicity_before"]
        assert rec["weyl_movement"] <= rec["weyl_bound"] + 1e-12


def test_rank2_split_is_irreducible():
    base = build_cycle(16, TWO_PI)
    rep = simplify_spectrum(base, trivial_connection(base, 2), n=6, delta=1e-6, seed=1)
    assert rep.status is SplitStatus.IRREDUCIBLE
    assert rep.multiplicities == [2, 2, 2]


def test_rank3_on_cycle_keeps_doublets():
    # every SO(3) connection on a cycle is an axis plus a rotation plane
    base = build_cycle(12, TWO_PI)
    rep = simplify_spectrum(base, trivial_connection(base, 3), n=20, delta=1e-6, seed=1)
    assert rep.status is SplitStatus.IRREDUCIBLE
    assert set(rep.multiplicities) == {1, 2}


def test_budget_exhausted():
    base = build_torus(6, 6, TWO_PI, TWO_PI)
    rep = simplify_spectrum(base, trivial_connection(base, 3), n=8, delta=0.5, seed=1, budget=2)
    assert rep.status is SplitStatus.BUDGET and len(rep.iterations) == 2


def test_split_is_deterministic():
    base = build_torus(6, 6, TWO_PI, TWO_PI)
    a = simplify_spectrum(base, trivial_connection(base, 3), n=30, delta=1e-6, seed=4)
    b = simplify_spectrum(base, trivial_connection(base, 3), n=30, delta=1e-6, seed=4)
    assert a.to_dict() == b.to_dict()
    assert np.array_equal(a.final_connection.transport, b.final_connection.transport)


def test_split_argument_checks():
    base = build_cycle(6, TWO_PI)
    with pytest.raises(UsageError):
        simplify_spectrum(base, trivial_connection(base, 2), n=0, delta=1e-6)
    with pytest.raises(UsageError):
        simplify_spectrum(base, trivial_connection(base, 2), n=13, delta=1e-6)
