import itertools
from math import comb

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from heom import bath as bm
from heom.config import build_model, bundled_config
from heom.hierarchy import (AdoNotFound, Direction, HierarchyError, HierarchySpace,
                            closed_form_count, count_space, enumerate_space, importance)

TABLE = {  # n_max -> counts for I_th = 1e-3 ... 1e-10, 0
    1: [57, 57, 57, 57, 57, 57, 57, 57, 57],
    2: [249, 873, 1193, 1421, 1569, 1597, 1597, 1597, 1597],
    3: [305, 1489, 4241, 12713, 18933, 23693, 27161, 28645, 29317],
    4: [305, 1489, 5011, 18901, 49713, 126715, 205803, 274249, 396607],
    5: [305, 1489, 5011, 19013, 55173, 170297, 418589, 931551, 4216423],
    6: [305, 1489, 5011, 19013, 55201, 171557, 444979, 1137239, 36684859],
}
THRESHOLDS = [1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8, 1e-9, 1e-10, 0.0]


@pytest.fixture(scope="module")
def example1_exponents():
    model = build_model(bundled_config("example1"), 0.0)
    fer = [e for b in model.baths for e in b.exponents]
    assert len(fer) == 56
    return fer


@pytest.mark.parametrize("n_max", [1, 2, 3, 4])
def test_table_rows(n_max, example1_exponents):
    got = [count_space(0, 56, 0, n_max, I, ([], example1_exponents)) for I in THRESHOLDS]
    assert got == TABLE[n_max]


@pytest.mark.slow
@pytest.mark.parametrize("n_max", [5, 6])
def test_table_rows_deep(n_max, example1_exponents):
    got = [count_space(0, 56, 0, n_max, I, ([], example1_exponents)) for I in THRESHOLDS[:-2]]
    assert got == TABLE[n_max][:-2]
    assert count_space(0, 56, 0, n_max) == TABLE[n_max][-1]


def test_materialized_space_matches_count(example1_exponents):
    space = enumerate_space(0, 56, 0, 3, 1e-7, ([], example1_exponents))
    assert len(space) == 18933


def test_budget_guard():
    with pytest.raises(HierarchyError, match="count-only"):
        enumerate_space(0, 56, 0, 6, max_ados=10**6)


def test_small_spaces():
    assert len(enumerate_space(0, 0, 0, 0)) == 1
    assert len(enumerate_space(3, 0, 2, 0)) == 10
    assert len(enumerate_space(0, 56, 0, 2)) == 1597


def test_stars_and_bars_brute_force():
    K_b, m_max = 3, 3
    brute = {tuple(sorted(c)) for m in range(m_max + 1)
             for c in itertools.product(range(K_b), repeat=m)}
    space = enumerate_space(K_b, 0, m_max, 0)
    assert {j for j, _ in space.keys} == brute


def test_domain_errors():
    with pytest.raises(HierarchyError):
        enumerate_space(-1, 0, 0, 0)
    with pytest.raises(HierarchyError):
        enumerate_space(0, 2, 0, 1, I_th=-1.0)
    with pytest.raises(HierarchyError):
        enumerate_space(0, 2, 0, 2, I_th=1e-3)  # no exponents to rate importance


def toy_lead_space(n_max=2, I_th=0.0):
    d = np.array([[0, 1], [0, 0]], dtype=complex)
    b = bm.lorentzian_pade_fermion(d, 1.0, 3.0, 0.3, 0.7, 3)
    return HierarchySpace.from_baths([b], 0, n_max, I_th), b


def test_root_and_roundtrip():
    space, _ = toy_lead_space()
    assert space.index_of(((), ())) == 0
    assert space.ado_at(0).key == ((), ())
    for i in range(len(space)):
        assert space.index_of(space.ado_at(i)) == i
        assert space.ado_at(space.index_of(space.keys[i])).flat == i


def test_level_major_order():
    space, _ = toy_lead_space()
    levels = [len(j) + len(q) for j, q in space.keys]
    assert levels == sorted(levels)
    assert space.level_indices(0, 1) == list(range(1, 7))
    assert [space.keys[i] for i in space.level_indices(0, 1)] == [((), (k,)) for k in range(6)]


def test_not_found_reasons():
    space, b = toy_lead_space(n_max=1)
    with pytest.raises(AdoNotFound) as exc:
        space.index_of(((), (0, 1)))
    assert exc.value.reason == "exceeds tier"
    pruned, _ = toy_lead_space(n_max=2, I_th=1e9)
    with pytest.raises(AdoNotFound) as exc:
        pruned.index_of(((), (0, 1)))
    assert "pruned" in exc.value.reason
    with pytest.raises(IndexError):
        space.ado_at(len(space))


def test_importance_values():
    space, b = toy_lead_space()
    assert space.importance((), ()) == 1.0
    e = b.exponents[2]
    assert space.importance((), (2,)) == pytest.approx(abs(e.eta) / e.gamma.real**2)
    e0, e1 = b.exponents[0], b.exponents[1]
    expected = (abs(e0.eta) / e0.gamma.real / e0.gamma.real
                * abs(e1.eta) / e1.gamma.real / (e0.gamma.real + e1.gamma.real))
    assert importance(((), (0, 1)), ([], b.exponents)) == pytest.approx(expected)


def test_always_kept_levels():
    d = np.diag([1.0, -1.0]).astype(complex)
    bos = bm.drude_lorentz_pade_boson(d, 0.01, 0.5, 0.5, 2)
    f = bm.lorentzian_pade_fermion(np.array([[0, 1], [0, 0]], dtype=complex), 0.1, 3.0, 0, 0.5, 2)
    space = HierarchySpace.from_baths([bos, f], 2, 2, I_th=1e6)
    assert {(len(j), len(q)) for j, q in space.keys} == {(0, 0), (0, 1), (1, 0), (1, 1)}
    assert len(space) == (1 + 3) * (1 + 4)


def test_neighbors_of_root():
    d = np.array([[0, 1], [0, 0]], dtype=complex)
    b = bm.fermionic_bath(d, [1.0], [1.0], [1.0], [1.0])
    space = HierarchySpace.from_baths([b], 0, 2)
    up = [space.keys[nb.flat] for nb in space.neighbors(0) if nb.direction is Direction.UP_F]
    assert up == [((), (0,)), ((), (1,))]


def test_down_f_positions_and_signs():
    space = enumerate_space(0, 4, 0, 2)
    nbs = [nb for nb in space.neighbors(((), (1, 3))) if nb.direction is Direction.DOWN_F]
    got = {(space.keys[nb.flat], nb.position, nb.factor) for nb in nbs}
    # removing the id at rank w of n=2 carries (-1)^(n-w)
    assert got == {(((), (3,)), 1, -1), (((), (1,)), 2, 1)}


def test_down_b_multiplicity():
    space = enumerate_space(2, 0, 3, 0)
    nbs = [nb for nb in space.neighbors(((0, 0, 1), ())) if nb.direction is Direction.DOWN_B]
    assert {(space.keys[nb.flat], nb.factor) for nb in nbs} == {(((0, 1), ()), 2), (((0, 0), ()), 1)}


# -- properties ---------------------------------------------------------------

small = st.tuples(st.integers(0, 3), st.integers(0, 5), st.integers(0, 3), st.integers(0, 3))


@settings(max_examples=60, deadline=None)
@given(small)
def test_closed_form_count(params):
    K_b, K_f, m_max, n_max = params
    expected = (sum(comb(K_f, n) for n in range(n_max + 1))
                * sum(comb(K_b + m - 1, m) for m in range(m_max + 1)) if K_b else
                sum(comb(K_f, n) for n in range(n_max + 1)))
    assert closed_form_count(K_b, K_f, m_max, n_max) == expected
    space = enumerate_space(K_b, K_f, m_max, n_max)
    assert len(space) == expected
    assert len(set(space.keys)) == expected
    for j, q in space.keys:
        assert len(j) <= m_max and len(q) <= n_max
        assert list(q) == sorted(set(q))
        assert list(j) == sorted(j)


def _random_baths(seed):
    rng = np.random.default_rng(seed)
    d = np.array([[0, 1], [0, 0]], dtype=complex)
    V = np.diag([1.0, -1.0]).astype(complex)
    fer = bm.fermionic_bath(d, rng.uniform(0.1, 2, 2) + 0j, rng.uniform(0.5, 3, 2) + 0j,
                            rng.uniform(0.1, 2, 2) + 0j, rng.uniform(0.5, 3, 2) + 0j)
    bos = bm.bosonic_bath(V, list(rng.uniform(0.1, 2, 2)), list(rng.uniform(0.5, 3, 2)))
    return [bos, fer]


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 10**6), tiers=st.tuples(st.integers(0, 3), st.integers(0, 3)))
def test_threshold_monotone_and_bijective(seed, tiers):
    baths = _random_baths(seed)
    sizes = []
    for I_th in (0.0, 1e-3, 1e-2, 1e-1, 1.0):
        space = HierarchySpace.from_baths(baths, tiers[0], tiers[1], I_th)
        assert all(space.lookup[k] == i for i, k in enumerate(space.keys))
        assert space.keys[0] == ((), ())
        for j, q in space.keys:
            if len(j) > 1 or len(q) > 1:
                assert space.importance(j, q) >= I_th
        sizes.append(len(space))
    assert sizes == sorted(sizes, reverse=True)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), I_th=st.sampled_from([0.0, 1e-2, 1e-1]))
def test_neighbor_symmetry(seed, I_th):
    space = HierarchySpace.from_baths(_random_baths(seed), 2, 2, I_th)
    edges = {(a, nb.flat, nb.direction) for a in range(len(space)) for nb in space.neighbors(a)}
    flip = {Direction.UP_B: Direction.DOWN_B, Direction.DOWN_B: Direction.UP_B,
            Direction.UP_F: Direction.DOWN_F, Direction.DOWN_F: Direction.UP_F}
    for a, b, direction in edges:
        assert (b, a, flip[direction]) in edges
