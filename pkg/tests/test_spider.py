import math
from dataclasses import replace

import numpy as np
import pytest

from app.spidercert.spider import (
    build_psi,
    build_psi_dot,
    build_spider,
    corollary_c0,
    psi_dot_block,
    spider_alpha,
    spider_dump,
    theorem_inner_products,
    verify_psi,
)

SMALL = [(3, 1), (4, 1), (9, 2), (16, 2), (27, 3)]


def test_spider_layout():
    sp = build_spider(9, 2)
    assert sp.size == 19
    assert sp.vertex(0, 0) == 0
    assert sp.vertex(0, 1) == 1
    assert sp.vertex(1, 2) == 4
    assert sp.vertex(8, 2) == 18
    assert sp.diameter == 4
    tip_a, tip_b = sp.vertex(0, 2), sp.vertex(5, 2)
    assert sp.dist[tip_a, tip_b] == 4
    assert sp.dist[sp.vertex(3, 1), sp.vertex(3, 2)] == 1
    assert sp.tree.size == sp.size
    with pytest.raises(ValueError):
        sp.vertex(9, 1)


def test_build_spider_rejects_bad_sizes():
    with pytest.raises(ValueError):
        build_spider(0, 1)
    with pytest.raises(ValueError):
        build_spider(3, 0)
    with pytest.raises(ValueError, match="k >= 2"):
        build_psi(build_spider(1, 2))


@pytest.mark.parametrize("k, ell", SMALL)
def test_psi_matches_closed_forms(k, ell):
    rep = verify_psi(build_psi(build_spider(k, ell)))
    assert rep.dense
    assert rep.passed
    assert rep.psd
    assert max(rep.residuals) < 1e-9
    assert max(abs(a - b) for a, b in zip(rep.tilde_inner, rep.tilde_formula)) < 1e-9
    assert rep.corollary_applicable
    assert rep.corollary_ok


def test_known_values():
    sm = build_psi(build_spider(3, 1))
    assert sm.inner == pytest.approx([1.5, math.sqrt(3), 1.0])
    sm = build_psi(build_spider(9, 2))
    assert sm.c0 == pytest.approx(1.875)
    assert sm.inner[1] == pytest.approx(math.sqrt(3))
    assert sm.top == pytest.approx(4.0)
    assert corollary_c0(9, 2) == pytest.approx(1.875)


@pytest.mark.parametrize("k, ell", [(4, 2), (10, 3), (81, 2)])
def test_level_form_agrees_with_dense(k, ell):
    sp = build_spider(k, ell)
    dense = verify_psi(build_psi(sp, dense=True))
    level = verify_psi(build_psi(sp, dense=False))
    assert not level.dense
    assert level.inner == pytest.approx(dense.inner, rel=1e-10, abs=1e-10)
    assert level.psd and dense.psd


def test_large_spider_uses_level_form():
    sp = build_spider(390625, 2)
    sm = build_psi(sp)
    assert sm.Psi is None
    assert spider_alpha(390625, 2) == pytest.approx(25.0)
    rep = verify_psi(sm)
    assert rep.passed
    assert 1.5 <= rep.inner[0] <= 2.0


def test_corollary_range_holds_for_many_spiders():
    for ell in (1, 2, 3):
        for k in (3 ** ell, 3 ** ell + 1, 10 * 3 ** ell, 10 ** 6):
            c0 = corollary_c0(k, ell)
            assert 1.5 - 1e-12 <= c0 <= 2.0 + 1e-12


def test_custom_alpha_has_no_corollary():
    sm = build_psi(build_spider(9, 2), alpha=1.5)
    rep = verify_psi(sm)
    assert not rep.corollary_applicable
    assert rep.corollary_ok is None
    assert rep.passed
    assert rep.formula == pytest.approx(list(theorem_inner_products(9, 2, 1.5)))


def test_alpha_one_rejected():
    with pytest.raises(ValueError, match="alpha = 1"):
        build_psi(build_spider(4, 2), alpha=1.0)


def test_psi_dot_is_psd():
    sm = build_psi(build_spider(9, 2))
    for theta in (0.1, 0.5, 1.0):
        ev = np.linalg.eigvalsh(build_psi_dot(sm, theta))
        assert ev[0] >= -1e-10
    assert np.linalg.matrix_rank(psi_dot_block(0.3)) == 1
    with pytest.raises(ValueError):
        build_psi_dot(sm, 0.0)


def test_spider_dump_fields():
    sm = build_psi(build_spider(4, 1))
    dump = spider_dump(sm)
    assert dump["k"] == 4 and dump["ell"] == 1
    assert len(dump["inner"]) == 3
    assert dump["inner"] == pytest.approx(dump["formula"])


@pytest.mark.parametrize("entry", [(0, 0), (0, 1)])
def test_verify_psi_rejects_perturbed_matrix(entry):
    sm = build_psi(build_spider(4, 1), dense=True)
    assert verify_psi(sm).passed
    bump = np.zeros_like(sm.Psi)
    i, j = entry
    bump[i, j] = bump[j, i] = 1e-3
    rep = verify_psi(replace(sm, Psi=sm.Psi + bump))
    assert rep.passed is False
    assert max(rep.residuals) > 1e-4
