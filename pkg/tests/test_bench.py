import itertools
from fractions import Fraction

import numpy as np
import pytest

from app.spidercert import config
from app.spidercert.bench import (
    brute_optimum,
    eig_bounds,
    experiment_violations,
    gen_complete,
    gen_gnp,
    gen_regular,
    max_parity_polynomial,
    random_signs,
    run_experiment,
    run_single,
    soundness_sweep,
)
from app.spidercert.csp import gen_csp, instance_objective, xor_instance
from app.spidercert.graph import build_graph, graph_objective
from app.spidercert.schemas import Experiment, ExperimentConfig


def naive_graph_optimum(G):
    return max(graph_objective(G, x) for x in itertools.product((1, -1), repeat=G.n))


def test_brute_force_known_graphs(edge, triangle, cycle5):
    assert brute_optimum(edge) == 1
    assert brute_optimum(triangle) == Fraction(2, 3)
    assert brute_optimum(cycle5) == Fraction(4, 5)
    assert brute_optimum(gen_complete(4)) == Fraction(2, 3)


def test_brute_force_matches_enumeration(monkeypatch):
    # a small low-bit block forces the Gray-code walk over the high bits
    monkeypatch.setattr(config, "BRUTE_LOW_BITS", 3)
    for seed in range(3):
        G = random_signs(gen_gnp(9, 4, seed=seed), seed)
        assert brute_optimum(G) == naive_graph_optimum(G)


def test_brute_force_with_loops():
    G = build_graph([(0, 0, 2, 1), (0, 1, 1, -1), (1, 2, 3, 1), (2, 2, 1, -1)])
    assert brute_optimum(G) == naive_graph_optimum(G)


def test_brute_force_xor_and_csp():
    I = xor_instance(5, 3, [([0, 1, 2], 2), ([1, 2, 3], -1), ([0, 3, 4], 1), ([2, 2, 4], -3)])
    naive = max(instance_objective(I, list(x)) for x in itertools.product((1, -1), repeat=5))
    assert brute_optimum(I) == naive
    C = gen_csp(6, 3, "10000000", m=40, seed=0)
    naive = max(instance_objective(C, list(x)) for x in itertools.product((1, -1), repeat=6))
    assert brute_optimum(C) == naive


def test_parity_polynomial_limit():
    with pytest.raises(ValueError):
        max_parity_polynomial(np.array([1]), np.array([1]), config.BRUTE_MAX_N + 1)
    assert max_parity_polynomial(np.array([], dtype=np.int64), np.array([], dtype=np.int64), 4) == 0


def test_eig_bounds_k256(k256):
    eig = eig_bounds(k256)
    assert eig.walk_bound == pytest.approx(0.5 + 1 / 510)
    assert eig.laplacian_bound == pytest.approx(eig.walk_bound)
    assert eig.signed_bound == pytest.approx(eig.walk_bound)


def test_eig_bounds_are_sound(cycle5, signed_c4):
    for G in (cycle5, gen_gnp(12, 4, seed=2)):
        opt = float(brute_optimum(G))
        eig = eig_bounds(G)
        assert opt <= eig.laplacian_bound + 1e-12
        assert opt <= eig.walk_bound + 1e-12
    assert float(brute_optimum(signed_c4)) <= eig_bounds(signed_c4).signed_bound + 1e-12


def test_gen_regular():
    G = gen_regular(20, 3, seed=1)
    assert np.all(G.deg == 3)
    S = gen_regular(20, 3, seed=1, simple=True)
    assert all(u != v and m == 1 for u, v, m, _ in S.edges)
    with pytest.raises(ValueError, match="even"):
        gen_regular(5, 3)


def test_gen_gnp_edge_count():
    G = gen_gnp(200, 10, seed=0)
    assert abs(G.num_edges - 1000) <= 4 * np.sqrt(1000)
    assert np.all(G.deg > 0)
    with pytest.raises(ValueError):
        gen_gnp(1, 3)


def test_random_signs_keeps_structure(cycle5):
    S = random_signs(cycle5, seed=3)
    assert [(u, v, m) for u, v, m, _ in S.edges] == [(u, v, m) for u, v, m, _ in cycle5.edges]
    assert random_signs(cycle5, seed=3).edges == S.edges


def test_run_experiment_from_fixture(data_dir):
    cfg = ExperimentConfig.model_validate_json((data_dir / "experiment.json").read_text())
    rows = run_experiment(cfg, jobs=2)
    assert [r.seed for r in rows] == cfg.seeds
    for row in rows:
        assert row.violations == 0, experiment_violations(row)
        assert row.optimum is not None and row.cert_bound is not None
        assert row.optimum <= row.cert_bound_sharp + 1e-12
        assert row.feasible_value >= 0.5


def test_run_single_records_errors():
    cfg = ExperimentConfig(generator="complete", n=6, kind="2xor", epsilon=0.2)
    row = run_single(cfg, 0)
    # random signs on K6 give a radius well above 0.2
    assert "certify" in row.errors
    assert row.cert_bound is None
    assert row.optimum is not None


def test_experiment_violations_flags_unsound_rows():
    row = Experiment(name="x", generator="gnp", n=4, seed=0, kind="maxcut", optimum=0.9, cert_bound=0.51,
                     cert_bound_sharp=0.85, R=4, feasible_value=0.4)
    issues = experiment_violations(row)
    assert any("cert_bound" in msg for msg in issues)
    assert any("below the 8-round feasible value" in msg for msg in issues)
    assert any(msg.startswith("feasible value") for msg in issues)


@pytest.mark.parametrize("kind, flagged", [("maxcut", False), ("2xor", True)])
def test_feasible_floor_uses_certificate_locality(kind, flagged):
    # R = 4: the 2-XOR floor is 1/2 + f(1/11)/2 ~ 0.529, the 8-local max-cut floor ~ 0.517
    row = Experiment(name="x", generator="gnp", n=4, seed=0, kind=kind, cert_bound=0.52, R=4)
    issues = experiment_violations(row)
    assert bool(issues) is flagged, issues


def test_soundness_sweep():
    report = soundness_sweep(count=200, seed=0, jobs=2)
    assert report.passed, report.failures[:5]
    assert report.violations == 0
    assert sum(report.by_family.values()) == 200
    assert report.certified_below_one > 0
