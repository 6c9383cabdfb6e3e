import numpy as np
import pytest

from igamortar.bspline import (
    SplineSpace1D,
    eval_basis,
    make_knot_vector,
    make_open_knot_vector,
    make_special_space,
    merge_end_elements,
    open_spline_space,
    refinement_matrix,
    uniform_open_space,
)
from igamortar.errors import (
    DegreeTooLowError,
    NonMonotoneError,
    MultiplicityOutOfRangeError,
    OutOfDomainError,
    TooFewElementsError,
)

UNIFORM8 = np.arange(1, 8) / 8.0


def fd_derivative(f, x, order=1, h=1e-6):
    if order == 1:
        return (f(x + h) - f(x - h)) / (2 * h)
    if order == 2:
        return (f(x + h) - 2 * f(x) + f(x - h)) / h**2
    raise ValueError(order)


class TestKnotVectorConstruction:
    def test_open_uniform_degree3(self):
        kv = make_open_knot_vector(3, UNIFORM8)
        expected = np.concatenate([[0] * 4, UNIFORM8, [1] * 4])
        np.testing.assert_allclose(kv.knots, expected)
        assert kv.num_basis == 11
        assert kv.is_open

    def test_bernstein_degree2(self):
        kv = make_open_knot_vector(2, [])
        np.testing.assert_allclose(kv.knots, [0, 0, 0, 1, 1, 1])
        assert kv.num_basis == 3

    def test_non_monotone_rejected(self):
        with pytest.raises(NonMonotoneError):
            make_open_knot_vector(2, [0.5, 0.3])

    def test_multiplicity_out_of_range(self):
        with pytest.raises(MultiplicityOutOfRangeError):
            make_open_knot_vector(2, [0.5], [4])
        with pytest.raises(MultiplicityOutOfRangeError):
            make_open_knot_vector(2, [0.5], [0])

    def test_multiplicity_bookkeeping(self):
        kv = make_open_knot_vector(3, [0.25, 0.5], [2, 1])
        assert kv.multiplicities.sum() == len(kv.knots)
        np.testing.assert_allclose(kv.breakpoints, [0, 0.25, 0.5, 1])


class TestMergeEndElements:
    def test_degree1_matches_reference_layout(self):
        # {0,0, h..7h, 1,1} -> {0,0, 2h..6h, 1,1} with h = 1/8
        kv = make_knot_vector(1, UNIFORM8, 2)
        merged = merge_end_elements(kv)
        expected = np.concatenate([[0, 0], np.arange(2, 7) / 8.0, [1, 1]])
        np.testing.assert_allclose(merged.knots, expected)

    def test_degree3_same_rule(self):
        kv = make_open_knot_vector(3, UNIFORM8)
        merged = merge_end_elements(kv)
        expected = np.concatenate([[0] * 4, np.arange(2, 7) / 8.0, [1] * 4])
        np.testing.assert_allclose(merged.knots, expected)
        assert merged.end_multiplicity == (4, 4)

    def test_too_few_interior(self):
        kv = make_open_knot_vector(2, [0.3, 0.6])
        with pytest.raises(TooFewElementsError):
            merge_end_elements(kv)


class TestSpecialSpaces:
    def test_multiplier_merged_p3(self):
        sp = make_special_space("multiplier_merged", 3, UNIFORM8)
        assert sp.degree == 1
        expected = np.concatenate([[0, 0], np.arange(2, 7) / 8.0, [1, 1]])
        np.testing.assert_allclose(sp.knot_vector.knots, expected)
        assert sp.dimension == 7

    def test_primal_clamped_p3(self):
        sp = make_special_space("primal_clamped", 3, UNIFORM8)
        assert sp.degree == 3
        assert sp.dimension == 11
        assert sp.constrained_dimension == 7

    def test_degree_too_low(self):
        with pytest.raises(DegreeTooLowError):
            make_special_space("multiplier_merged", 1, UNIFORM8)

    def test_reduced_pair_dimensions_match(self):
        # same dimension is what the coefficient pairing of the corner test needs
        for p in range(2, 7):
            a = make_special_space("reduced_zero_bc", p, UNIFORM8)
            b = make_special_space("reduced_merged", p, UNIFORM8)
            assert a.dimension == b.dimension == p + 8 - 3

    def test_reduced_zero_bc_vanishes_at_ends(self):
        sp = make_special_space("reduced_zero_bc", 4, UNIFORM8)
        for x in (0.0, 1.0):
            be = eval_basis(sp, x)
            assert np.all(np.abs(be.values) < 1e-14)

    def test_multiplier_p2_dimension_matches_merged_elements(self):
        # degree-0 multipliers are one constant per merged element: 8 - 2 = 6
        sp = make_special_space("multiplier_merged", 2, UNIFORM8)
        assert sp.degree == 0
        assert sp.dimension == 6


class TestEvalBasis:
    def test_bernstein_p2_midpoint(self):
        sp = SplineSpace1D(make_open_knot_vector(2, []))
        be = eval_basis(sp, 0.5, max_deriv=1)
        np.testing.assert_allclose(be.values, [0.25, 0.5, 0.25], atol=1e-15)
        # closed form: d/dx[(1-x)^2, 2x(1-x), x^2] at 0.5 = [-1, 0, 1]
        np.testing.assert_allclose(be.derivatives[0], [-1.0, 0.0, 1.0], atol=1e-14)

    def test_partition_of_unity_random(self):
        rng = np.random.default_rng(0)
        for p in (1, 2, 3, 4):
            sp = uniform_open_space(p, 8)
            for x in rng.random(200):
                be = eval_basis(sp, float(x), max_deriv=1)
                assert abs(be.values.sum() - 1.0) <= 1e-12
                assert abs(be.derivatives[0].sum()) <= 1e-9

    def test_first_derivative_matches_central_fd(self):
        # p=3 uniform 8-element space at x=0.37, step 1e-6, 1e-6 relative
        sp = uniform_open_space(3, 8)
        x = 0.37
        be = eval_basis(sp, x, max_deriv=1)
        for j in range(4):
            idx = be.first_active_index + j

            def f(t, idx=idx):
                b = eval_basis(sp, t)
                k = idx - b.first_active_index
                return b.values[k] if 0 <= k <= sp.degree else 0.0

            fd = fd_derivative(f, x, order=1, h=1e-6)
            assert abs(be.derivatives[0][j] - fd) <= 1e-6 * max(1.0, abs(fd))

    def test_second_derivative_matches_central_fd(self):
        sp = uniform_open_space(4, 8)
        x = 0.3141
        be = eval_basis(sp, x, max_deriv=2)
        for j in range(5):
            idx = be.first_active_index + j

            def f(t, idx=idx):
                b = eval_basis(sp, t)
                k = idx - b.first_active_index
                return b.values[k] if 0 <= k <= sp.degree else 0.0

            fd = fd_derivative(f, x, order=2, h=1e-5)
            assert abs(be.derivatives[1][j] - fd) <= 1e-5 * max(1.0, abs(fd))

    def test_endpoint_interpolation(self):
        for p in (1, 2, 3, 5):
            sp = uniform_open_space(p, 5)
            b0 = eval_basis(sp, 0.0)
            assert b0.first_active_index == 0
            assert abs(b0.values[0] - 1.0) <= 1e-15
            b1 = eval_basis(sp, 1.0)
            assert b1.first_active_index + p == sp.dimension - 1
            assert abs(b1.values[-1] - 1.0) <= 1e-15

    def test_out_of_domain(self):
        sp = uniform_open_space(2, 4)
        with pytest.raises(OutOfDomainError):
            eval_basis(sp, 1.5)

    def test_local_support(self):
        sp = uniform_open_space(3, 8)
        kv = sp.knot_vector
        xs = np.linspace(0, 1, 173)
        table = sp.eval_all(xs)[0]
        for i in range(sp.dimension):
            lo, hi = kv.knots[i], kv.knots[i + 3 + 1]
            outside = (xs < lo - 1e-14) | (xs > hi + 1e-14)
            assert np.all(np.abs(table[outside, i]) == 0.0)

    def test_smoothness_across_breakpoints(self):
        # multiplicity m_j leaves p - m_j continuous derivatives
        sp = SplineSpace1D(make_open_knot_vector(3, [0.25, 0.5, 0.75], [1, 2, 3]))
        eps = 1e-9
        for zeta, m in zip([0.25, 0.5, 0.75], [1, 2, 3]):
            smooth = 3 - m
            left = sp.eval_all([zeta - eps], max_deriv=max(smooth, 0))
            right = sp.eval_all([zeta + eps], max_deriv=max(smooth, 0))
            for k in range(smooth + 1):
                assert np.max(np.abs(left[k] - right[k])) <= 1e-6

    def test_higher_order_derivatives_zero(self):
        sp = uniform_open_space(2, 4)
        be = eval_basis(sp, 0.4, max_deriv=4)
        assert np.all(be.derivatives[2] == 0.0)
        assert np.all(be.derivatives[3] == 0.0)


class TestSpaceQueries:
    def test_dimension_counts(self):
        assert open_spline_space(3, UNIFORM8).dimension == 11
        assert open_spline_space(2, []).dimension == 3

    def test_element_lookup(self):
        sp = uniform_open_space(2, 8)
        assert sp.element_of(0.3) == 2
        assert sp.element_of(0.0) == 0
        assert sp.element_of(1.0) == 7

    def test_mesh_size_and_uniformity(self):
        sp = open_spline_space(2, [0.2, 0.5])
        assert sp.mesh_size == pytest.approx(0.5)
        assert sp.quasi_uniformity == pytest.approx(0.2 / 0.5)

    def test_regularity_tags(self):
        sp = SplineSpace1D(make_open_knot_vector(3, [0.5], [2]))
        np.testing.assert_array_equal(sp.regularity(), [1])


class TestRefinementMatrix:
    def test_function_invariance_under_insertion(self):
        rng = np.random.default_rng(3)
        sp = uniform_open_space(3, 4)
        coefs = rng.standard_normal(sp.dimension)
        kv2, T = refinement_matrix(sp.knot_vector, [0.1, 0.6, 0.6001])
        sp2 = SplineSpace1D(kv2)
        coefs2 = T @ coefs
        for x in rng.random(50):
            v1 = sp.eval_all([x])[0] @ coefs
            v2 = sp2.eval_all([x])[0] @ coefs2
            assert abs(v1[0] - v2[0]) <= 1e-12
