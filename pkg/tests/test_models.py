import math
import pickle

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from randinv.core import Counts, RngStream, cdf_of
from randinv.models import (
    PATTERNS,
    TOPOLOGIES,
    TRIG_CODOMAIN,
    CFNFamily,
    EdgeProbs,
    LinearFamily,
    TrigFamily,
    cfn_check_P,
    cfn_distribution,
    cfn_patterns_batch,
    family_from_descriptor,
    format_pattern_csv,
    linear_check_delta,
    linear_ratio_floor,
    linear_sup_log_likelihoods,
    parse_angle,
    parse_truth,
    trig_majority,
    trig_tie_probability,
)
from randinv.parametric import ParamPoint, _loglik_rows, class_suprema, log_likelihood, mle_candidates

from .helpers import cfn_bruteforce

edge = st.floats(0.0, 0.5)
edges = st.lists(edge, min_size=5, max_size=5)


class TestLinear:
    def test_delta_condition(self):
        assert linear_check_delta(0.1)
        assert 2 * 0.8**0.05 > 1
        with pytest.raises(ValueError):
            linear_check_delta(0.5)

    def test_points(self):
        F = LinearFamily(10, 0.1)
        a = F.point("a")
        assert a.probs[0] == pytest.approx(0.1) and a.probs.sum() == pytest.approx(1)
        b = F.point("b", np.full(10, 0.1))
        assert b.probs[0] == pytest.approx(0.2)
        with pytest.raises(ValueError):
            F.point("b", np.full(9, 1 / 9))

    @given(st.integers(0, 2**32))
    @settings(max_examples=30)
    def test_class_b_sup_dominates_grid(self, seed):
        rng = np.random.default_rng(seed)
        F = LinearFamily(6, 0.1)
        c = Counts(F.codomain, rng.integers(0, 4, size=7))
        if c.total == 0:
            return
        sup_b, attained = F.sup_log_likelihood("b", c)
        assert attained
        _, P = F.grid_matrix("b", 4)
        assert sup_b >= _loglik_rows(P, c.counts).max() - 1e-12
        lam = c.counts[1:] / max(1, c.counts[1:].sum()) if c.counts[1:].sum() else np.full(6, 1 / 6)
        assert sup_b == pytest.approx(log_likelihood(F.point("b", lam), c), abs=1e-12)

    @given(st.lists(st.integers(0, 40), min_size=1, max_size=20), st.floats(0.01, 0.3))
    def test_ratio_floor(self, seq, delta):
        F = LinearFamily(40, delta)
        l1, l2 = linear_sup_log_likelihoods(F, seq)
        rho = sum(1 for u in seq if u == 0) / len(seq)
        assert l2 - l1 >= len(seq) * math.log(linear_ratio_floor(delta, rho)) - 1e-9

    def test_mle_prefers_b_on_distinct_draws(self):
        F = LinearFamily(1000, 0.1)
        rng = RngStream(4)
        counts = Counts(F.codomain, rng.categorical_counts(cdf_of(F.point("a").probs), 100))
        assert mle_candidates(F, counts) == ["b"]


class TestTrig:
    def test_points_sum_to_one(self):
        F = TrigFamily()
        for cls, t in [("a1", math.pi / 4), ("a1", 2.0), ("a2", 1.0), ("a2", 3 * math.pi / 4)]:
            assert F.point(cls, t).probs.sum() == pytest.approx(1.0)

    def test_first_coordinate_mass(self):
        F = TrigFamily()
        p = F.point("a1", math.pi / 3)  # j = 0
        assert p["(1,0)"] == pytest.approx(math.sin(math.pi / 3) ** 2)
        assert p["(2,0)"] == pytest.approx(math.cos(math.pi / 3) ** 2)
        p = F.point("a2", 2 * math.pi / 3)  # j = 1
        assert p["(1,1)"] == pytest.approx(math.cos(2 * math.pi / 3) ** 2)

    @pytest.mark.parametrize("cls,t", [("a1", 3 * math.pi / 4), ("a2", math.pi / 4), ("a1", 0.5), ("a2", 2.5)])
    def test_parameter_sets(self, cls, t):
        with pytest.raises(ValueError):
            TrigFamily().point(cls, t)

    @given(st.integers(0, 12), st.integers(0, 12), st.integers(0, 1), st.sampled_from(["a1", "a2"]))
    def test_sup_against_fine_grid(self, n1, n2, j, cls):
        if n1 + n2 == 0:
            return
        F = TrigFamily()
        counts = np.zeros(4, dtype=np.int64)
        counts[j], counts[2 + j] = n1, n2
        c = Counts(TRIG_CODOMAIN, counts)
        sup, _ = F.sup_log_likelihood(cls, c)
        best = max(log_likelihood(d, c) for _, d in F.grid(cls, 10))
        assert sup >= best - 1e-12
        assert sup - best < 0.05

    def test_tie_probability(self):
        assert trig_tie_probability(20) == pytest.approx(184756 / 2**20)
        assert (1 + trig_tie_probability(20)) / 2 == pytest.approx(0.588, abs=5e-4)
        with pytest.warns(UserWarning):
            assert trig_tie_probability(21) == 0.0

    def test_majority(self):
        mk = lambda *v: Counts(TRIG_CODOMAIN, np.array(v))  # noqa: E731
        assert trig_majority(mk(3, 0, 1, 0)) == "a1"
        assert trig_majority(mk(2, 0, 2, 0)) == "a1"
        assert trig_majority(mk(0, 2, 0, 2)) == "a2"
        with pytest.raises(ValueError):
            trig_majority(mk(1, 1, 0, 0))

    def test_mixed_second_coordinate_has_zero_likelihood(self):
        c = Counts(TRIG_CODOMAIN, np.array([1, 1, 0, 0]))
        assert TrigFamily().sup_log_likelihood("a1", c)[0] == -math.inf

    @pytest.mark.parametrize("text,val", [("pi/4", math.pi / 4), ("3*pi/4", 3 * math.pi / 4), ("3pi/4", 3 * math.pi / 4), ("pi", math.pi), ("0.5", 0.5)])
    def test_parse_angle(self, text, val):
        assert parse_angle(text) == pytest.approx(val)

    def test_endpoint_majority_is_a_coin_flip(self):
        # at (a1, pi/4) the two first coordinates are equally likely
        F = TrigFamily()
        k, trials = 20, 4000
        cdf = cdf_of(F.point("a1", math.pi / 4).probs)
        wins = sum(trig_majority(Counts(TRIG_CODOMAIN, RngStream(2, t).categorical_counts(cdf, k))) == "a1" for t in range(trials))
        assert wins / trials == pytest.approx((1 + trig_tie_probability(k)) / 2, abs=0.025)


class TestCFN:
    @given(st.integers(0, 2), edges)
    def test_matches_bruteforce(self, t, p):
        got = cfn_distribution(TOPOLOGIES[t], EdgeProbs.from_vector(p)).probs
        assert np.allclose(got, cfn_bruteforce(t, p), atol=1e-12, rtol=0)
        assert got.sum() == pytest.approx(1.0, abs=1e-12)

    @given(st.integers(0, 2), edges)
    def test_complement_symmetry(self, t, p):
        got = cfn_distribution(TOPOLOGIES[t], EdgeProbs.from_vector(p)).probs
        assert np.allclose(got, got[::-1], atol=1e-15)

    @given(st.integers(0, 2), st.lists(edges, min_size=1, max_size=6))
    def test_batch_matches_scalar(self, t, rows):
        P = np.array(rows)
        batch = cfn_patterns_batch(t, P)
        for i, row in enumerate(rows):
            assert np.allclose(batch[i], cfn_distribution(TOPOLOGIES[t], EdgeProbs.from_vector(row)).probs, atol=1e-15)

    def test_closed_forms(self):
        for top in TOPOLOGIES:
            zero = cfn_distribution(top, EdgeProbs((0, 0, 0, 0), 0)).probs
            assert zero[0] == 0.5 and zero[15] == 0.5 and zero[1:15].sum() == 0
            half = cfn_distribution(top, EdgeProbs((0.5,) * 4, 0.5)).probs
            assert np.all(half == 1 / 16)

    def test_pattern_bits_leaf_order(self):
        # only leaf 1 mutates: pattern 1000 carries the mass with 0111
        d = cfn_distribution("12|34", EdgeProbs((0.5, 0, 0, 0), 0))
        assert d["1000"] == 0.25 and d["0111"] == 0.25 and d["0000"] == 0.25

    def test_edge_validation(self):
        with pytest.raises(ValueError):
            EdgeProbs((0.1, 0.2, 0.3, 0.6), 0.1)
        with pytest.raises(ValueError):
            cfn_distribution("12|43", EdgeProbs((0.1,) * 4, 0.1))

    def test_condition_p(self):
        assert cfn_check_P(EdgeProbs((0.1,) * 4, 0.3), f=0.2, g=0.15)
        assert not cfn_check_P(EdgeProbs((0.1, 0.2, 0.1, 0.1), 0.3), f=0.2, g=0.15)

    def test_degenerate_instance_ties_all_topologies(self):
        F = CFNFamily()
        c = Counts(PATTERNS, np.eye(16, dtype=np.int64)[0] * 7 + np.eye(16, dtype=np.int64)[15] * 5)
        sups = class_suprema(F, c)
        for v, attained in sups.values():
            assert v == pytest.approx(-math.log(2), abs=1e-9) and attained
        assert len(mle_candidates(F, c, tie_tol=1e-9)) == 3

    @pytest.mark.parametrize("seed", range(6))
    def test_ascent_beats_lattice(self, seed):
        rng = np.random.default_rng(seed)
        F = CFNFamily(grid_resolution=4)
        truth = EdgeProbs.from_vector(rng.uniform(0, 0.4, 5))
        c = Counts(PATTERNS, RngStream(seed).categorical_counts(cdf_of(cfn_distribution("13|24", truth).probs), 200))
        for top in TOPOLOGIES:
            sup, arg = F.sup_with_argmax(top, c)
            _, P = F.grid_matrix(top, 3)
            assert sup >= _loglik_rows(P, c.counts).max() - 1e-10
            assert sup == pytest.approx(log_likelihood(F.point(top, arg), c), abs=1e-9)
            assert np.all((arg >= 0) & (arg <= 0.5))

    def test_pickle_roundtrip(self):
        F = CFNFamily(0.1, 0.3, grid_resolution=3)
        G = pickle.loads(pickle.dumps(F))
        assert G.descriptor() == F.descriptor()
        assert len(G._start_probs) == 3

    def test_grid_filter(self):
        F = CFNFamily(0.25, 0.25)
        thetas, P = F.grid_matrix("12|34", 1)
        assert all(cfn_check_P(t, 0.25, 0.25) for t in thetas)
        assert P.shape == (len(thetas), 16)

    def test_pattern_csv(self):
        text = format_pattern_csv(cfn_distribution("12|34", EdgeProbs((0.1,) * 4, 0.2)))
        lines = text.strip().split("\n")
        assert lines[0] == "pattern,probability" and len(lines) == 17
        assert lines[1].startswith("0000,")


def test_descriptor_roundtrip():
    for F in (LinearFamily(5, 0.1), TrigFamily(), CFNFamily(grid_resolution=3)):
        G = family_from_descriptor(F.descriptor())
        assert type(G) is type(F) and G.descriptor() == F.descriptor()
    with pytest.raises(ValueError):
        family_from_descriptor({"type": "nope"})


def test_parse_truth_forms():
    assert parse_truth(TrigFamily(), {"class": "a1", "theta": "pi/4"}).theta == pytest.approx(math.pi / 4)
    t = parse_truth(CFNFamily(grid_resolution=2), {"topology": "13|24", "pendant": [0.1] * 4, "central": 0.2})
    assert t == ParamPoint("13|24", EdgeProbs((0.1,) * 4, 0.2))
    t = parse_truth(CFNFamily(grid_resolution=2), {"class": "12|34", "theta": [0.1, 0.1, 0.1, 0.1, 0.3]})
    assert t.theta.central == 0.3
    with pytest.raises(ValueError):
        parse_truth(TrigFamily(), {"class": "a2", "theta": "pi/4"})
