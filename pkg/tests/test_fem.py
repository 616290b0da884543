import numpy as np
import pytest

import gperot.fem as fem
from gperot import build_discretization, preset
from gperot.model import Component, ConfigurationError, ModelSpec, Potential

import oracles


def test_dof_counts_m64():
    disc = build_discretization(preset("model1"))
    assert disc.n_nodes == 129 * 129 == 16641
    assert disc.n == 127 * 127


def test_full_mass_matrix_sums_to_domain_area(spec_m2):
    M, S, R, V, quad = fem.assemble_constant_matrices(spec_m2)
    assert M.sum() == pytest.approx(400.0, rel=1e-12)


def test_stiffness_annihilates_constants(spec_m2):
    M, S, R, V, quad = fem.assemble_constant_matrices(spec_m2)
    c = np.ones(S.shape[0])
    assert np.abs(S @ c).max() < 1e-12 * abs(S).max()


def test_constant_matrices_match_dense_oracle(spec_m2, dense_m2):
    disc = build_discretization(spec_m2)
    I = dense_m2["interior"]
    assert np.allclose(disc.M.toarray(), dense_m2["M"], atol=1e-12)
    assert np.allclose(disc.S.toarray(), dense_m2["S"], atol=1e-12)
    assert np.allclose(disc.R.toarray(), dense_m2["R"], atol=1e-12)
    for j in range(spec_m2.p):
        assert np.allclose(disc.Vmass[j].toarray(), dense_m2["V"][j], atol=1e-11)


def test_rotation_exactly_skew():
    for m in (2, 3, 5):
        disc = build_discretization(preset("model1").with_mesh(m))
        dev = abs(disc.R + disc.R.T).max()
        assert dev <= 1e-13 * abs(disc.R).max()


def test_matrices_symmetric(problem_m4):
    d = problem_m4.disc
    assert abs(d.M - d.M.T).max() < 1e-14 * abs(d.M).max()
    assert abs(d.S - d.S.T).max() < 1e-13 * abs(d.S).max()


def test_trap_dominance_check_reports_component_and_point():
    # rotation too fast for the trap: check must fail and name the culprit
    comp = Component(mass=1.0, frequency=-5.0, potential=Potential(a=0.5, b=0.5))
    spec = ModelSpec(domain=(-8.0, 8.0, -8.0, 8.0), elements_per_dir=4,
                     components=(comp,), interaction=np.array([[1.0]]))
    with pytest.raises(ConfigurationError, match="component 0.*quadrature point"):
        build_discretization(spec)


def test_eval_quadrature_constant_and_linear(spec_m4):
    disc = build_discretization(spec_m4)
    # interpolant of 1 on interior nodes: value 1 on elements away from the boundary
    coeffs = np.ones(disc.n, dtype=complex)
    vals = np.asarray(fem.eval_quadrature(disc, coeffs)).reshape(
        disc.quad.n_elements, disc.quad.nq)
    m = spec_m4.elements_per_dir
    interior_elems = [ex * m + ey for ex in range(1, m - 1) for ey in range(1, m - 1)]
    for e in interior_elems:
        assert np.allclose(vals[e], 1.0, atol=1e-13)
    # interpolant of x reproduces x at quadrature points of interior elements
    xs = disc.nodes[disc.free_to_node, 0]
    vals = np.asarray(fem.eval_quadrature(disc, xs.astype(complex))).reshape(
        disc.quad.n_elements, disc.quad.nq)
    for e in interior_elems:
        assert np.allclose(vals[e], disc.quad.points[e, :, 0], atol=1e-12)


def test_eval_quadrature_matches_basis_summation_oracle(spec_m2):
    disc = build_discretization(spec_m2)
    rng = np.random.default_rng(3)
    coeffs = rng.standard_normal(disc.n) + 1j * rng.standard_normal(disc.n)
    vals = np.asarray(fem.eval_quadrature(disc, coeffs))
    gp, _ = oracles.quad_points_1d(4)
    pts = []
    for ex in range(2):
        for ey in range(2):
            for qx in range(4):
                for qy in range(4):
                    pts.append((ex, ey, gp[qx], gp[qy]))
    ref = oracles.eval_field(spec_m2, coeffs, pts)
    # package order: elements (ex-major), then tensor points x-fastest
    assert np.allclose(vals, ref, atol=1e-12)


def test_eval_quadrature_length_check(problem_m4):
    with pytest.raises(ValueError):
        fem.eval_quadrature(problem_m4.disc, np.ones(3))


def test_weighted_mass_trivial_weights(problem_m4):
    disc = problem_m4.disc
    nqt = disc.quad.total_points
    W0 = fem.assemble_weighted_mass(disc, np.zeros(nqt))
    assert abs(W0).max() == 0.0
    W1 = fem.assemble_weighted_mass(disc, np.ones(nqt))
    assert abs(W1 - disc.M).max() < 1e-13


def test_weighted_mass_rejects_negative(problem_m4):
    w = np.zeros(problem_m4.disc.quad.total_points)
    w[5] = -1e-6
    with pytest.raises(ValueError, match="negative"):
        fem.assemble_weighted_mass(problem_m4.disc, w)


def test_weighted_mass_matches_dense_oracle(spec_m2):
    disc = build_discretization(spec_m2)
    rng = np.random.default_rng(7)
    coeffs = rng.standard_normal(disc.n) + 1j * rng.standard_normal(disc.n)
    w = np.abs(np.asarray(fem.eval_quadrature(disc, coeffs))) ** 2
    W = fem.assemble_weighted_mass(disc, w)
    Wd = oracles.weighted_mass_dense(spec_m2, w, q=4)
    assert np.allclose(W.toarray(), Wd, atol=1e-12 * max(1.0, abs(Wd).max()))


def test_weighted_mass_linear_in_weight(problem_m4):
    disc = problem_m4.disc
    rng = np.random.default_rng(11)
    w1 = rng.random(disc.quad.total_points)
    w2 = rng.random(disc.quad.total_points)
    W = fem.assemble_weighted_mass(disc, w1 + w2)
    W12 = fem.assemble_weighted_mass(disc, w1) + fem.assemble_weighted_mass(disc, w2)
    assert abs(W - W12).max() < 1e-13 * abs(W).max()


def test_quartic_interactions(spec_m2):
    disc = build_discretization(spec_m2)
    rng = np.random.default_rng(5)
    C = rng.standard_normal((disc.n, 2)) + 1j * rng.standard_normal((disc.n, 2))
    Q = fem.quartic_interactions(disc, C)
    assert np.allclose(Q, Q.T)
    assert Q.min() >= 0.0
    Qd = oracles.quartic_overlaps(spec_m2, C, q=4)
    assert np.allclose(Q, Qd, rtol=1e-12)
    # zero frame and identical columns
    assert abs(fem.quartic_interactions(disc, np.zeros_like(C))).max() == 0.0
    C2 = np.column_stack([C[:, 0], C[:, 0]])
    Q2 = fem.quartic_interactions(disc, C2)
    assert Q2[0, 0] == pytest.approx(Q2[0, 1]) == pytest.approx(Q2[1, 1])


def test_quartic_phase_invariant(problem_m4):
    disc = problem_m4.disc
    rng = np.random.default_rng(9)
    C = rng.standard_normal((disc.n, 2)) + 1j * rng.standard_normal((disc.n, 2))
    theta = np.array([1j, -1.0])     # exactly representable unimodular phases
    assert np.array_equal(fem.quartic_interactions(disc, C),
                          fem.quartic_interactions(disc, C * theta))


def test_assemble_load_adjoint_of_eval(spec_m2):
    # sum_q w_q f_q (eval c)_q == c^T load(f): duality of the two operations
    disc = build_discretization(spec_m2)
    rng = np.random.default_rng(13)
    c = rng.standard_normal(disc.n)
    f = rng.standard_normal(disc.quad.total_points)
    lhs = np.sum(disc.quad.global_weights * f * np.asarray(
        fem.eval_quadrature(disc, c.astype(complex))).real)
    rhs = c @ fem.assemble_load(disc, f).real
    assert lhs == pytest.approx(rhs, rel=1e-12)
