import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import linprog

from randinv.core import RngStream, compose, identity_fn, make_random_fn
from randinv.inversion import (
    amplify,
    spread_gap,
    check_invertibility,
    composition_counterexample,
    composition_rank_test,
    least_favorable_objective,
    map_estimator,
    minimax_inverter,
    pairwise_distances,
    return_probabilities,
    separates,
    strict_inverter,
    minimax_lower_bound,
)

from .conftest import random_fn
from .helpers import plurality_bruteforce


def minimax_scipy(X):
    """Reference minimax value from an independent LP solver."""
    na, nu = X.shape
    nv = na * nu
    c = np.zeros(nv + 1)
    c[-1] = -1
    A_ub = np.zeros((na, nv + 1))
    for a in range(na):
        for u in range(nu):
            A_ub[a, u * na + a] = -X[a, u]
        A_ub[a, -1] = 1
    A_eq = np.zeros((nu, nv + 1))
    for u in range(nu):
        A_eq[u, u * na : (u + 1) * na] = 1
    res = linprog(c, A_ub, np.zeros(na), A_eq, np.ones(nu), bounds=[(0, None)] * (nv + 1), method="highs")
    return -res.fun


class TestMAP:
    def test_two_point_example(self, ex22):
        g = map_estimator(ex22)
        assert g.matrix.tolist() == [[1.0, 0.0], [0.0, 1.0]]
        r = return_probabilities(ex22, g)
        assert r["1"] == 1.0 and r["2"] == pytest.approx(1 / 3, abs=1e-15)

    def test_identity_returns_one(self):
        xi = identity_fn("abc")
        assert set(return_probabilities(xi, map_estimator(xi)).values()) == {1.0}

    def test_ties_uniform_and_first(self):
        xi = make_random_fn("ab", "xy", [[0.5, 0.5], [0.5, 0.5]])
        assert map_estimator(xi).matrix.tolist() == [[0.5, 0.5], [0.5, 0.5]]
        assert map_estimator(xi, ties="first").matrix.tolist() == [[1.0, 0.0], [1.0, 0.0]]

    def test_weights(self, ex22):
        g = map_estimator(ex22, w=[0.1, 0.9])
        # u1: 0.1 vs 0.6 -> 2
        assert g.matrix[0].tolist() == [0.0, 1.0]

    def test_weight_validation(self, ex22):
        with pytest.raises(ValueError):
            map_estimator(ex22, w=[-1.0, 2.0])
        with pytest.raises(ValueError):
            map_estimator(ex22, w=[1.0])


class TestSeparation:
    def test_example(self, ex22):
        ok, d = separates(ex22)
        assert ok and d == pytest.approx(2 / 3)

    def test_duplicate_rows(self):
        xi = make_random_fn("ab", "xy", [[0.3, 0.7], [0.3, 0.7]])
        assert separates(xi) == (False, 0.0)
        with pytest.raises(ValueError, match="separate"):
            strict_inverter(xi)

    def test_distance_matrix_symmetric(self, nprng):
        D = pairwise_distances(random_fn(nprng, 4, 3))
        assert np.allclose(D, D.T) and np.all(np.diag(D) == 0)


class TestStrict:
    def test_example_margin(self, ex22):
        rep = strict_inverter(ex22)
        assert rep.invertible
        # |a_2| = sqrt(5)/3, a_2 . a_1 / |a_1| = 2/3
        assert rep.unscaled_margins[("2", "1")] == pytest.approx(math.sqrt(5) / 3 - 2 / 3, abs=1e-12)
        assert rep.unscaled_margins[("1", "2")] == pytest.approx(1 - 2 / math.sqrt(5), abs=1e-12)
        for key, m in rep.margins.items():
            assert m == pytest.approx(rep.scale * rep.unscaled_margins[key], abs=1e-12)

    @given(st.integers(2, 5), st.integers(2, 5), st.integers(0, 2**32))
    @settings(max_examples=60)
    def test_random_separating(self, n, m, seed):
        xi = random_fn(np.random.default_rng(seed), n, m)
        if not separates(xi)[0]:
            return
        rep = strict_inverter(xi)
        G = rep.inverter.matrix
        assert np.all(G >= 0)
        assert np.allclose(G.sum(axis=1), 1, atol=1e-12)
        assert rep.min_margin > 0


class TestMinimax:
    def test_example_value(self, ex22):
        res = minimax_inverter(ex22)
        assert res.value == pytest.approx(0.6, abs=1e-9)
        assert res.mu["1"] == pytest.approx(0.4, abs=1e-9)
        assert res.mu["2"] == pytest.approx(0.6, abs=1e-9)
        assert res.duality_gap <= 1e-9
        assert min(res.r.values()) == pytest.approx(0.6, abs=1e-9)

    def test_identity(self):
        assert minimax_inverter(identity_fn("abc")).value == pytest.approx(1.0)

    def test_single_input(self):
        xi = make_random_fn(["a"], "xy", [[0.2, 0.8]])
        assert minimax_inverter(xi).value == pytest.approx(1.0)

    @pytest.mark.parametrize("seed", range(25))
    def test_against_scipy(self, seed):
        rng = np.random.default_rng(seed)
        xi = random_fn(rng, rng.integers(2, 6), rng.integers(2, 6), alpha=0.5)
        res = minimax_inverter(xi)
        assert res.value == pytest.approx(minimax_scipy(xi.matrix), abs=1e-9)
        assert res.dual_value == pytest.approx(least_favorable_objective(xi, list(res.mu.values())), abs=1e-9)
        assert min(res.r.values()) >= res.value - 1e-9

    @pytest.mark.parametrize("seed", range(10))
    def test_conservative_bound(self, seed):
        xi = random_fn(np.random.default_rng(seed), 3, 4)
        assert minimax_inverter(xi).value >= minimax_lower_bound(xi) - 1e-9

    def test_bound_variants_on_example(self, ex22):
        assert minimax_lower_bound(ex22, "stated") == pytest.approx(2 / 3)
        assert minimax_lower_bound(ex22, "conservative") == pytest.approx(7 / 12)
        with pytest.raises(ValueError):
            minimax_lower_bound(ex22, "other")


class TestBnums:
    def test_values(self):
        assert spread_gap([1, 0, 0]) == pytest.approx((2.0, 2 / 3))
        assert spread_gap([1, 1]) == (0.0, 0.0)

    @given(st.lists(st.floats(-10, 10), min_size=2, max_size=8))
    def test_inequality(self, b):
        n = len(b)
        s, gap = spread_gap(b)
        assert gap >= s / (n * (n - 1)) - 1e-9


class TestCompositionRank:
    def test_identity_full(self):
        res = composition_rank_test(identity_fn("abc"))
        assert res.full and res.rank == 3 and res.null_vector is None

    def test_three_by_two_deficient(self):
        ups = make_random_fn(["u1", "u2", "u3"], "xy", [[0.5, 0.5], [0.2, 0.8], [0.9, 0.1]])
        res = composition_rank_test(ups)
        assert not res.full and res.rank == 2
        xi = composition_counterexample(ups, res.null_vector)
        assert np.abs(xi.matrix[0] - xi.matrix[1]).sum() == pytest.approx(2.0)
        comp = compose(xi, ups).matrix
        assert np.abs(comp[0] - comp[1]).max() < 1e-9

    @given(st.integers(2, 5), st.integers(1, 6), st.integers(0, 2**32))
    @settings(max_examples=60)
    def test_rank_matches_numpy(self, nu, nz, seed):
        rng = np.random.default_rng(seed)
        Y = rng.dirichlet(np.ones(nz), size=nu)
        if rng.random() < 0.3:
            Y[-1] = Y[0]
        ups = make_random_fn([f"u{i}" for i in range(nu)], [f"z{j}" for j in range(nz)], Y)
        res = composition_rank_test(ups)
        ext = np.vstack([Y.T, np.ones(nu)])
        assert res.rank == np.linalg.matrix_rank(ext, tol=1e-9)
        assert res.full == (res.rank == nu)
        if not res.full:
            assert np.abs(ext @ res.null_vector).max() < 1e-9

    def test_counterexample_rejects_non_solution(self):
        ups = identity_fn("ab")
        with pytest.raises(ValueError):
            composition_counterexample(ups, [1.0, -1.0])


class TestAmplify:
    def test_certain_input_stays_certain(self, ex22):
        res = amplify(ex22, map_estimator(ex22), 3, "1")
        assert res.exact and res.probability == pytest.approx(1.0)

    def test_precondition(self, ex22):
        with pytest.raises(ValueError, match="invert"):
            amplify(ex22, map_estimator(ex22), 3, "2")

    @pytest.mark.parametrize("make", [lambda x: strict_inverter(x).inverter, lambda x: minimax_inverter(x).inverter])
    def test_monotone_in_m(self, ex22, make):
        g = make(ex22)
        vals = [amplify(ex22, g, m, "2").probability for m in (1, 3, 5)]
        assert vals[0] == pytest.approx(return_probabilities(ex22, g)["2"])
        assert vals[0] <= vals[1] <= vals[2]
        assert vals[2] > 1 / 3

    @pytest.mark.parametrize("m", [1, 2, 3, 4, 5])
    def test_exact_matches_sequence_enumeration(self, m, nprng):
        xi = random_fn(nprng, 3, 3)
        g = minimax_inverter(xi).inverter
        q = compose(xi, g).matrix[0]
        if min(check_invertibility(xi, g).margins_for("a0").values()) <= 0:
            pytest.skip("random instance not invertible at a0")
        got = amplify(xi, g, m, "a0").probability
        assert got == pytest.approx(plurality_bruteforce(q, 0, m), abs=1e-12)

    def test_monte_carlo_path(self, ex22):
        g = strict_inverter(ex22).inverter
        exact = amplify(ex22, g, 7, "2").probability
        mc = amplify(ex22, g, 7, "2", rng=RngStream(5), exact_cap=1, trials=4000)
        assert not mc.exact
        assert mc.probability == pytest.approx(exact, abs=0.03)
