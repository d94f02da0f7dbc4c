import numpy as np
import pytest

from gncoder.activations import Activation
from gncoder.exceptions import ShapeError, SmoothnessError
from gncoder.grids import constant, make_grid, norm
from gncoder.network import (
    Params,
    directional_derivative,
    eval_psi,
    jacobian,
    lipschitz_constants,
    second_derivative_bilinear,
)
from gncoder.sampling import sample_params, unit_direction

SIGMOID = Activation.sigmoid(1.0)
TANH = Activation.tanh()


def perturbed(p, flat):
    return Params.from_flat(flat, p.units, p.input_dim)


def fd_jacobian_column(p, a, g, index, h=1e-5):
    e = np.zeros(p.n_star)
    e[index] = h
    up = eval_psi(perturbed(p, p.flatten() + e), a, g)
    down = eval_psi(perturbed(p, p.flatten() - e), a, g)
    return (up.values - down.values) / (2.0 * h)


def fd_bilinear(p, a, g, h1, h2, step=1e-4):
    def psi(flat):
        return eval_psi(perturbed(p, flat), a, g).values

    f = p.flatten()
    return (
        psi(f + step * (h1 + h2))
        - psi(f + step * (h1 - h2))
        - psi(f - step * (h1 - h2))
        + psi(f - step * (h1 + h2))
    ) / (4.0 * step * step)


def weighted_rel_err(g, approx, exact):
    num = np.sqrt(np.sum(g.weights * (approx - exact) ** 2))
    den = np.sqrt(np.sum(g.weights * exact**2))
    return num / den


class TestParams:
    def test_flatten_layout(self):
        p = Params([1.0, 2.0], [[3.0, 4.0], [5.0, 6.0]], [7.0, 8.0])
        assert p.n_star == 8
        assert p.flatten().tolist() == [1, 2, 3, 4, 5, 6, 7, 8]
        assert p.w_index(1, 0) == 4
        assert p.theta_index(0) == 6

    def test_flat_round_trip_and_index_description(self):
        rng = np.random.default_rng(0)
        p = sample_params(rng, 3, 2)
        q = Params.from_flat(p.flatten(), 3, 2)
        assert np.array_equal(q.alpha, p.alpha)
        assert np.array_equal(q.w, p.w)
        assert np.array_equal(q.theta, p.theta)
        flat = p.flatten()
        for i in range(p.n_star):
            block, s, t = p.describe_index(i)
            if block == "alpha":
                assert flat[i] == p.alpha[s]
            elif block == "w":
                assert flat[i] == p.w[s, t]
            else:
                assert flat[i] == p.theta[s]

    def test_shape_validation(self):
        with pytest.raises(ShapeError):
            Params([1.0], [[1.0], [2.0]], [1.0])
        with pytest.raises(ShapeError):
            Params.from_flat(np.zeros(5), 2, 1)

    def test_json_round_trip(self):
        p = Params([0.5, -1.5], [[2.0], [-3.0]], [0.1, 0.2])
        q = Params.from_json(p.to_json())
        assert np.array_equal(q.flatten(), p.flatten())
        d = p.to_json_dict()
        assert d["N"] == 2 and d["n"] == 1


class TestEvalPsi:
    def test_zero_output_weights_give_zero_function(self):
        g = make_grid(1, 16)
        p = Params([0.0, 0.0], [[1.0], [2.0]], [0.5, -0.5])
        assert np.all(eval_psi(p, SIGMOID, g).values == 0.0)

    def test_single_unit_at_origin_is_half(self):
        g = make_grid(2, 4)
        p = Params([1.0], [[0.0, 0.0]], [0.0])
        assert np.allclose(eval_psi(p, SIGMOID, g).values, 0.5)

    def test_identical_units_with_opposite_weights_cancel(self):
        g = make_grid(1, 32)
        p = Params([1.0, -1.0], [[1.0], [1.0]], [0.0, 0.0])
        assert np.all(eval_psi(p, TANH, g).values == 0.0)

    def test_linearity_in_output_weights(self):
        g = make_grid(1, 32)
        rng = np.random.default_rng(5)
        w = rng.uniform(-2, 2, (2, 1))
        theta = rng.uniform(-1, 1, 2)
        a1 = rng.uniform(-2, 2, 2)
        a2 = rng.uniform(-2, 2, 2)
        combined = eval_psi(Params(a1 + a2, w, theta), SIGMOID, g)
        split = (
            eval_psi(Params(a1, w, theta), SIGMOID, g)
            + eval_psi(Params(a2, w, theta), SIGMOID, g)
        )
        assert np.allclose(combined.values, split.values, rtol=0, atol=1e-15)

    def test_dimension_mismatch_rejected(self):
        g = make_grid(2, 4)
        p = Params([1.0], [[1.0]], [0.0])
        with pytest.raises(ShapeError):
            eval_psi(p, SIGMOID, g)


class TestJacobian:
    def test_theta_column_formula(self):
        g = make_grid(1, 32)
        p = Params([2.0, -1.0], [[1.5], [-0.5]], [0.25, 0.75])
        jac = jacobian(p, SIGMOID, g)
        z0 = g.nodes[:, 0] * 1.5 + 0.25
        expected = 2.0 * SIGMOID.d1(z0)
        assert np.allclose(jac.matrix[:, p.theta_index(0)], expected,
                           rtol=1e-14, atol=0)

    def test_zero_alpha_zeroes_inner_columns(self):
        g = make_grid(2, 8)
        p = Params([0.0, 1.0], [[1.0, -1.0], [0.5, 0.5]], [0.0, 0.2])
        jac = jacobian(p, SIGMOID, g)
        for t in range(2):
            assert np.all(jac.matrix[:, p.w_index(0, t)] == 0.0)
        assert np.all(jac.matrix[:, p.theta_index(0)] == 0.0)
        assert np.any(jac.matrix[:, p.alpha_index(0)] != 0.0)

    @pytest.mark.parametrize("act", [SIGMOID, TANH], ids=lambda a: a.descriptor)
    def test_columns_match_finite_differences(self, act):
        g = make_grid(2, 16)
        rng = np.random.default_rng(17)
        for _ in range(5):
            p = sample_params(rng, 2, 2, box=(-3, 3), alpha_band=0.5)
            jac = jacobian(p, act, g)
            for i in range(p.n_star):
                fd = fd_jacobian_column(p, act, g, i)
                assert weighted_rel_err(g, fd, jac.matrix[:, i]) < 1e-6

    def test_column_order_matches_flattening(self):
        g = make_grid(1, 16)
        p = Params([1.5, -2.0], [[1.0], [2.0]], [0.3, -0.3])
        jac = jacobian(p, SIGMOID, g)
        for i in range(p.n_star):
            fd = fd_jacobian_column(p, SIGMOID, g, i)
            assert weighted_rel_err(g, fd, jac.matrix[:, i]) < 1e-6

    def test_mirrored_theta_column_is_identical(self):
        g = make_grid(2, 8)
        rng = np.random.default_rng(29)
        p = sample_params(rng, 2, 2, box=(-3, 3))
        mirrored = Params(p.alpha, -p.w, -p.theta)
        col = jacobian(p, SIGMOID, g).matrix[:, p.theta_index(1)]
        col_m = jacobian(mirrored, SIGMOID, g).matrix[:, p.theta_index(1)]
        assert np.allclose(col, col_m, rtol=1e-12, atol=1e-300)

    def test_degeneracy_surface_rank_drop(self):
        # a vanishing output weight kills that unit's n+1 inner columns
        g = make_grid(2, 16)
        rng = np.random.default_rng(31)
        p = sample_params(rng, 3, 2, box=(-3, 3))
        p = Params(np.concatenate([[0.0], p.alpha[1:]]), p.w, p.theta)
        matrix = jacobian(p, SIGMOID, g).matrix * np.sqrt(g.weights)[:, None]
        sv = np.linalg.svd(matrix, compute_uv=False)
        rank = int(np.sum(sv > 1e-10 * sv[0]))
        assert rank <= p.n_star - (p.input_dim + 1)

    def test_step_activation_rejected(self):
        g = make_grid(1, 8)
        p = Params([1.0], [[1.0]], [0.0])
        with pytest.raises(SmoothnessError):
            jacobian(p, Activation.step(), g)

    def test_directional_derivative_matches_matrix(self):
        g = make_grid(1, 32)
        rng = np.random.default_rng(37)
        p = sample_params(rng, 2, 1, box=(-3, 3))
        d = unit_direction(rng, p.n_star)
        jac = jacobian(p, SIGMOID, g)
        direct = directional_derivative(p, SIGMOID, g, d)
        assert np.allclose(direct.values, jac.matrix @ d, rtol=1e-13, atol=1e-15)


class TestSecondDerivative:
    def test_pure_alpha_direction_vanishes(self):
        g = make_grid(1, 16)
        p = Params([1.0, 2.0], [[1.0], [2.0]], [0.0, 0.1])
        h = np.zeros(p.n_star)
        h[:2] = [1.0, -2.0]
        out = second_derivative_bilinear(p, SIGMOID, g, h, h)
        assert np.all(out.values == 0.0)

    def test_cross_unit_directions_vanish(self):
        g = make_grid(1, 16)
        p = Params([1.0, 2.0], [[1.0], [2.0]], [0.0, 0.1])
        h1 = np.zeros(p.n_star)
        h2 = np.zeros(p.n_star)
        # unit 0 inner coordinates against unit 1 inner coordinates
        h1[p.w_index(0, 0)] = 1.0
        h1[p.theta_index(0)] = -0.5
        h2[p.w_index(1, 0)] = 2.0
        h2[p.theta_index(1)] = 1.0
        out = second_derivative_bilinear(p, SIGMOID, g, h1, h2)
        assert np.all(out.values == 0.0)

    @pytest.mark.parametrize("act", [SIGMOID, TANH], ids=lambda a: a.descriptor)
    def test_matches_nested_differences(self, act):
        g = make_grid(2, 8)
        rng = np.random.default_rng(41)
        for _ in range(5):
            p = sample_params(rng, 2, 2, box=(-3, 3), alpha_band=0.5)
            h1 = unit_direction(rng, p.n_star)
            h2 = unit_direction(rng, p.n_star)
            exact = second_derivative_bilinear(p, act, g, h1, h2).values
            approx = fd_bilinear(p, act, g, h1, h2)
            assert weighted_rel_err(g, approx, exact) < 1e-4

    def test_relu_rejected(self):
        g = make_grid(1, 8)
        p = Params([1.0], [[1.0]], [0.0])
        h = np.ones(3)
        with pytest.raises(SmoothnessError):
            second_derivative_bilinear(p, Activation.relu(), g, h, h)


def hessian_operator_norm_bound(p, act, g):
    """Upper bound on the bilinear second-derivative norm at one point.

    Per node, the Hessian is block diagonal across units; the bound stacks
    the per-node largest block singular value through the quadrature.
    """
    n = p.input_dim
    z = g.nodes @ p.w.T + p.theta
    d1 = act.d1(z)
    d2 = act.d2(z)
    worst = np.zeros(g.node_count)
    for k in range(g.node_count):
        x = g.nodes[k]
        for s in range(p.units):
            H = np.zeros((n + 2, n + 2))
            H[0, 1 : 1 + n] = d1[k, s] * x
            H[0, n + 1] = d1[k, s]
            H[1 : 1 + n, 0] = d1[k, s] * x
            H[n + 1, 0] = d1[k, s]
            H[1 : 1 + n, 1 : 1 + n] = p.alpha[s] * d2[k, s] * np.outer(x, x)
            H[1 : 1 + n, n + 1] = p.alpha[s] * d2[k, s] * x
            H[n + 1, 1 : 1 + n] = p.alpha[s] * d2[k, s] * x
            H[n + 1, n + 1] = p.alpha[s] * d2[k, s]
            worst[k] = max(worst[k], np.linalg.norm(H, 2))
    return float(np.sqrt(np.sum(g.weights * worst**2)))


class TestLipschitzConstants:
    def test_single_sample_flags_missing_pairs(self):
        g = make_grid(1, 16)
        p = Params([1.0, -1.0], [[1.0], [2.0]], [0.0, 0.5])
        c = lipschitz_constants(p, SIGMOID, g, radius=0.5, samples=1, seed=0)
        assert c.lipschitz_bound == 0.0
        assert "insufficient samples" in c.flags
        assert c.samples == 1

    def test_alpha_scaling_lifts_derivative_bound(self):
        g = make_grid(1, 64)
        p = Params([2.0, -1.5], [[2.0], [-1.0]], [0.3, 0.7])
        scaled = Params(2.0 * p.alpha, p.w, p.theta)
        # oracle: direct SVD of the inner-coordinate block at the base point
        matrix = jacobian(p, SIGMOID, g).matrix * np.sqrt(g.weights)[:, None]
        inner_block_norm = np.linalg.svd(matrix[:, p.units :], compute_uv=False)[0]
        c = lipschitz_constants(scaled, SIGMOID, g, radius=1e-9, samples=4, seed=1)
        assert c.derivative_bound >= 2.0 * inner_block_norm * (1 - 1e-6)

    def test_lipschitz_bound_below_curvature_bound(self):
        g = make_grid(1, 64)
        p = Params([1.5, -1.0], [[2.0], [-1.5]], [0.2, 0.8])
        radius = 0.2
        c = lipschitz_constants(p, SIGMOID, g, radius=radius, samples=24, seed=5)
        # oracle: sampled supremum of the second-derivative norm on the ball
        rng = np.random.default_rng(905)
        bound = hessian_operator_norm_bound(p, SIGMOID, g)
        for _ in range(200):
            u = rng.standard_normal(p.n_star)
            u *= radius * rng.uniform() ** (1 / p.n_star) / np.linalg.norm(u)
            q = Params.from_flat(p.flatten() + u, p.units, p.input_dim)
            bound = max(bound, hessian_operator_norm_bound(q, SIGMOID, g))
        assert c.lipschitz_bound <= 1.05 * bound

    def test_ball_must_stay_inside_box(self):
        g = make_grid(1, 16)
        p = Params([9.9], [[1.0]], [0.0])
        with pytest.raises(ValueError):
            lipschitz_constants(p, SIGMOID, g, radius=0.5, samples=2, seed=0)
        with pytest.raises(ValueError):
            lipschitz_constants(p, SIGMOID, g, radius=-1.0, samples=2, seed=0)

    def test_constant_function_norm_sanity(self):
        # operator norm of the derivative dominates any single column norm
        g = make_grid(1, 32)
        p = Params([1.0], [[0.0]], [0.0])
        c = lipschitz_constants(p, SIGMOID, g, radius=1e-9, samples=2, seed=3)
        assert c.derivative_bound >= norm(constant(g, 0.5)) * (1 - 1e-9)
