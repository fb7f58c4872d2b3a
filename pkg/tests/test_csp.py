import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from app.spidercert.bench import brute_optimum
from app.spidercert.csp import (
    csp_instance,
    decompose_instance,
    distinct_keys,
    flatten_even,
    fourier,
    gen_csp,
    gen_weighted_xor,
    instance_from_model,
    instance_objective,
    lift_odd,
    predicted_rho,
    proposition_ell,
    reduce_to_pairs,
    refute_predicate,
    refute_xor,
    weight_dist_stats,
    wn_zero_probability,
    xor_from_graph,
    xor_graph,
    xor_instance,
    xor_value,
)
from app.spidercert.graph import graph_objective
from app.spidercert.schemas import WeightSpec
from app.spidercert.utils import child_rng


def assignments(n):
    return [list(x) for x in itertools.product((1, -1), repeat=n)]


def random_xor(n, k, count, seed):
    rng = child_rng(seed)
    terms = [(rng.integers(0, n, size=k).tolist(), int(rng.choice([-2, -1, 1, 3]))) for _ in range(count)]
    return xor_instance(n, k, terms)


def test_xor_instance_merges_and_drops_zeros():
    I = xor_instance(3, 2, [([0, 1], 2), ([0, 1], -2), ([1, 2], 1), ([1, 2], 1)])
    assert I.terms == {(1, 2): 2}
    assert I.m_abs == 2
    with pytest.raises(ValueError):
        xor_instance(3, 2, [([0, 3], 1)])
    with pytest.raises(ValueError):
        xor_instance(3, 2, [([0], 1)])


def test_objective_of_empty_instances():
    empty = xor_instance(3, 2, [])
    assert instance_objective(empty, [1, 1, 1]) == Fraction(1, 2)
    csp = csp_instance(3, 2, "0110", [])
    assert instance_objective(csp, [1, 1, 1]) == 0


def test_xor_value_accepts_bitmask():
    I = xor_instance(3, 3, [([0, 1, 2], 1), ([0, 0, 1], -1)])
    # x = (-1, 1, 1): x0 x1 x2 = -1 and x0 x0 x1 = x1 = 1
    assert xor_value(I, [-1, 1, 1]) == -2
    assert xor_value(I, 0b001) == -2


def test_flatten_preserves_objective():
    I = random_xor(3, 4, 25, seed=1)
    flat, fmap = flatten_even(I)
    assert (flat.n, flat.k) == (9, 2)
    for x in assignments(3):
        y = fmap.pullback(x).tolist()
        assert xor_value(flat, y) == xor_value(I, x)


def test_lift_preserves_objective_with_unit_side():
    I = random_xor(3, 3, 20, seed=2)
    lifted, lmap = lift_odd(I, seed=5)
    assert (lifted.n, lifted.k) == (18, 2)
    for x in assignments(3):
        z = lmap.pullback(x).tolist()
        assert xor_value(lifted, z) == xor_value(I, x)


def test_lift_rejects_arity_one():
    with pytest.raises(ValueError, match="arity-1"):
        lift_odd(xor_instance(4, 1, [([0], 1)]))
    with pytest.raises(ValueError):
        flatten_even(xor_instance(4, 3, [([0, 1, 2], 1)]))


def test_reduce_to_pairs_factors():
    assert reduce_to_pairs(random_xor(4, 2, 5, 0))[1:] == ("identity", 1)
    assert reduce_to_pairs(random_xor(4, 4, 5, 0))[1:] == ("flatten", 2)
    assert reduce_to_pairs(random_xor(4, 5, 5, 0))[1:] == ("lift", 3)


def test_xor_graph_rescales_objective():
    I2 = xor_instance(4, 2, [([0, 1], 2), ([1, 0], 1), ([2, 2], -1), ([2, 3], -3), ([3, 1], 1), ([0, 3], 1)])
    xg = xor_graph(I2)
    assert xg.vertices.tolist() == [0, 1, 2, 3]
    scale = Fraction(xg.vol, 2 * xg.m_abs)
    for x in assignments(4):
        lhs = instance_objective(I2, x) - Fraction(1, 2)
        rhs = scale * (graph_objective(xg.graph, [x[v] for v in xg.vertices]) - Fraction(1, 2))
        assert lhs == rhs


def test_xor_graph_cancelling_pairs():
    I2 = xor_instance(3, 2, [([0, 1], 1), ([1, 0], -1)])
    xg = xor_graph(I2)
    assert xg.graph is None
    assert xg.scale == 0.0
    rep = refute_xor(I2, k=3, ell=1)
    assert rep.refuted
    assert rep.bound_obj == 0.5


def test_xor_from_graph_matches_graph_objective(signed_c4):
    I = xor_from_graph(signed_c4)
    for x in assignments(4):
        assert instance_objective(I, x) == graph_objective(signed_c4, x)


def test_refute_xor_paley(paley61):
    rep = refute_xor(xor_from_graph(paley61), epsilon=0.4)
    assert rep.reduction == "identity"
    assert rep.refuted
    assert rep.rho == pytest.approx(math.sqrt(61) / 60, rel=1e-9)
    assert rep.bound_obj < 1
    assert rep.rounds == rep.certificate.R
    assert rep.bound_obj <= rep.nominal_bound + 1e-12 or rep.nominal_bound >= 1


def test_refute_xor_is_sound_on_small_instances():
    for seed in range(4):
        I = gen_weighted_xor(6, 4, WeightSpec(kind="rademacher", p=0.5), seed=seed)
        if I.m_abs == 0:
            continue
        opt = float(brute_optimum(I))
        rep = refute_xor(I, k=3, ell=1, seed=seed)
        assert opt <= rep.bound_obj + 1e-12
        assert opt <= rep.eig_bound + 1e-12
        assert rep.reduction == "flatten"
        assert rep.factor == 2


def test_refute_xor_reports_failed_premise():
    I = gen_weighted_xor(12, 4, WeightSpec(kind="rademacher", p=0.5), seed=0)
    rep = refute_xor(I, epsilon=0.1)
    assert not rep.refuted
    assert rep.bound_obj == 1.0
    assert "premise" in rep.reason or "cap" in rep.reason
    assert rep.eig_bound is not None


def test_predicted_rho_and_proposition_ell():
    assert predicted_rho(1.0, 0.0, 1, 2, 10, 1.0) is None
    rho = predicted_rho(0.5, 0.5, 1, 2, 100, math.log(10 ** 4))
    assert rho == pytest.approx(math.sqrt(0.5) * math.log(10 ** 4) / (0.5 * 100))
    ell = proposition_ell(10 ** 4, 1e-3, 0.5, 12)
    assert ell is not None
    assert (10 ** 4) ** (1 / (4 * ell)) * 1e-3 <= 0.5 * 0.5 ** (2 * ell)
    assert proposition_ell(10 ** 4, 0.9, 0.5, 3) is None


@pytest.mark.parametrize("P", ["0110", "1000", "01101001", "10000000", "01111111", "0000000000000001"])
def test_fourier_parseval_and_inversion(P):
    k = int(math.log2(len(P)))
    ft = fourier(P)
    assert ft.k == k
    assert ft.parseval() == ft.mean == Fraction(P.count("1"), len(P))
    for index, bit in enumerate(P):
        assert ft.evaluate(index) == int(bit)


def test_fourier_of_parity():
    ft = fourier("0110")
    assert ft.coefficients == (Fraction(1, 2), 0, 0, Fraction(-1, 2))
    assert ft.support() == [0, 3]


def test_decomposition_reproduces_objective():
    I = gen_csp(5, 3, "10010110", m=30, seed=3)
    ft = fourier(I.predicate, I.k)
    dec = decompose_instance(I)
    for x in assignments(5):
        total = sum(ft.coefficients[mask] * dec.value(mask, x) for mask in range(2 ** I.k))
        assert total == instance_objective(I, x)


def test_refute_predicate_bounds_optimum():
    I = gen_csp(8, 3, "01101001", m=200, seed=1)
    rep = refute_predicate(I, epsilon=0.5, k=3, ell=1, seed=1)
    assert float(brute_optimum(I)) <= rep.bound + 1e-12
    assert rep.mean_P == "1/2"
    assert {tuple(a.alpha) for a in rep.alphas} == {(0, 1, 2)}
    assert rep.delta == pytest.approx(math.log(I.m) / math.log(8) - 2)


def test_refute_predicate_uses_l1_for_singletons():
    I = gen_csp(6, 2, "1000", m=20, seed=0)
    rep = refute_predicate(I, epsilon=0.5, k=3, ell=1)
    singles = [a for a in rep.alphas if a.size == 1]
    assert singles and all(a.method == "l1" for a in singles)
    assert float(brute_optimum(I)) <= rep.bound + 1e-12
    for a in rep.alphas:
        if a.method == "l1-fallback":
            assert a.alpha in rep.blocking


def test_refute_predicate_theorem_rounds():
    I = gen_csp(6, 4, "0110100110010110", m=200, seed=0)
    rep = refute_predicate(I, epsilon=0.5, delta=0.5, k=3, ell=1)
    assert rep.ell_theorem == 2
    assert rep.rounds_theorem == math.ceil(4 * 2 * (3 * 2 / 0.5) ** 4 + 4)
    with pytest.raises(ValueError):
        refute_predicate(csp_instance(4, 2, "0110", []), epsilon=0.5)


def test_gen_csp_clause_count_concentrates():
    for seed in range(20):
        I = gen_csp(20, 3, "01101001", m=400, seed=seed)
        assert abs(I.m - 400) <= 4 * math.sqrt(400)
        assert len(set(I.codes.tolist())) == I.m


def test_gen_weighted_xor_reproducible_and_guarded():
    a = gen_weighted_xor(10, 3, WeightSpec(kind="wn", N=4, p=0.3), seed=9)
    b = gen_weighted_xor(10, 3, WeightSpec(kind="wn", N=4, p=0.3), seed=9)
    assert np.array_equal(a.codes, b.codes) and np.array_equal(a.weights, b.weights)
    assert np.all(a.weights != 0)
    with pytest.raises(ValueError, match="exceeds"):
        gen_weighted_xor(2 ** 13, 4)


def test_table_weights():
    spec = WeightSpec(kind="table", values=[0, 2, -2], probs=[0.5, 0.25, 0.25])
    I = gen_weighted_xor(8, 2, spec, seed=0)
    assert set(np.abs(I.weights).tolist()) <= {2, 4}
    with pytest.raises(ValueError):
        WeightSpec(kind="table", values=[1], probs=[0.5])


def test_distinct_keys():
    rng = child_rng(0)
    keys = distinct_keys(10 ** 9, 1000, rng)
    assert keys.size == 1000 == np.unique(keys).size
    assert distinct_keys(10, 10, rng).tolist() == list(range(10))
    with pytest.raises(ValueError):
        distinct_keys(5, 6, rng)


def test_wn_zero_probability():
    assert wn_zero_probability(1, 0.3) == pytest.approx(0.7)
    # N = 2: c = 0 w.p. (1-p)^2, c = 2 splits evenly w.p. 1/2
    p = 0.4
    assert wn_zero_probability(2, p) == pytest.approx((1 - p) ** 2 + 0.5 * p * p)
    assert wn_zero_probability(3, 1.0) == 0.0
    assert wn_zero_probability(5, 0.0) == 1.0


@pytest.mark.parametrize("N, p", [(100, 0.5), (100, 0.005), (1000, 0.05), (1, 1.0)])
def test_weight_distribution_statistics(N, p):
    stats = weight_dist_stats(N, p, samples=100_000, seed=0)
    assert stats.passed, stats.violations
    assert stats.branch == ("pN>=1" if N * p >= 1 else "pN<1")
    assert stats.second_moment == pytest.approx(N * p, rel=0.05)


def test_instance_model_round_trip():
    I = gen_csp(5, 2, "0110", m=10, seed=2)
    again = instance_from_model(I.to_model())
    assert np.array_equal(again.codes, I.codes)
    assert np.array_equal(again.zeta, I.zeta)
    X = random_xor(4, 3, 6, seed=3)
    assert instance_from_model(X.to_model()).terms == X.terms


def test_four_parity_pipeline_stays_sound():
    n = 12
    I = gen_csp(n, 4, "0110100110010110", m=math.ceil(n ** 2.25), seed=0)
    rep = refute_predicate(I, epsilon=0.5)
    assert float(brute_optimum(I)) <= rep.bound + 1e-12
    assert rep.refuted or [list(a) for a in rep.blocking] == [[0, 1, 2, 3]]
    assert rep.ell_theorem is not None
