import csv
import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from diffgsp.errors import BudgetOutOfRange, IndexOutOfRange, NotSymmetric, TooManyCombinations
from diffgsp.graph_core import FrequencySupport, random_connected_graph, spectral_basis
from diffgsp.sampling import (
    MAX_DET,
    MAX_LAMBDA_MIN,
    SamplingDesign,
    SelectionObjective,
    exhaustive_select,
    expected_gram,
    greedy_select,
    lambda_min,
    log_pseudo_det,
    objective_value,
    random_select,
    reconstruction_condition,
    score_rows,
    weighted_rows,
    write_selection_csv,
)

MAXDET = SelectionObjective(MAX_DET)
MAXLMIN = SelectionObjective(MAX_LAMBDA_MIN)


def random_instance(seed, n_max=10, f_max=4):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, n_max + 1))
    f = int(rng.integers(1, min(n, f_max) + 1))
    g = random_connected_graph(n, rng)
    sup = spectral_basis(g).lowest(f)
    design = SamplingDesign(rng.uniform(0.1, 1.0, n), rng.uniform(0.0, 0.1, n))
    return rng, sup, design


# -- designs and reconstruction ---------------------------------------------

def test_design_validation():
    with pytest.raises(ValueError):
        SamplingDesign([0.5, 1.2], [0, 0])
    with pytest.raises(ValueError):
        SamplingDesign([0.5, 0.5], [0, -1])
    d = SamplingDesign.from_set(5, [3, 1], p=0.5, noise_variances=0.01)
    assert d.expected_set == (1, 3)
    assert d.probabilities.tolist() == [0, 0.5, 0, 0.5, 0]
    with pytest.raises(IndexOutOfRange):
        SamplingDesign.from_set(3, [3])


def test_reconstruction_examples(geo20_support):
    ok, norm = reconstruction_condition(geo20_support, range(20))
    assert ok and norm == 0.0
    ok, norm = reconstruction_condition(geo20_support, [0, 1, 2, 3])
    assert not ok and norm >= 1 - 1e-12
    order = greedy_select(MAXDET, geo20_support, SamplingDesign.uniform(20), 5)
    ok, norm = reconstruction_condition(geo20_support, order)
    assert ok and norm < 0.95


def test_expected_gram_examples(geo20_support):
    np.testing.assert_allclose(expected_gram(geo20_support, SamplingDesign.uniform(20)), np.eye(5), atol=1e-12)
    np.testing.assert_array_equal(expected_gram(geo20_support, SamplingDesign.uniform(20, 0.0)), np.zeros((5, 5)))
    d = SamplingDesign.from_set(20, [0, 4, 9], p=0.3)
    c = geo20_support.u_f[[0, 4, 9]]
    assert np.linalg.matrix_rank(expected_gram(geo20_support, d)) == np.linalg.matrix_rank(c.T @ c) == 3


@pytest.mark.parametrize("seed", range(25))
def test_reconstruction_implies_invertible_gram(seed):
    rng, sup, design = random_instance(seed)
    subset = rng.choice(sup.n_nodes, int(rng.integers(1, sup.n_nodes + 1)), replace=False)
    d = design.restricted_to(subset)
    ok, _ = reconstruction_condition(sup, d.expected_set)
    if ok:
        assert np.linalg.eigvalsh(expected_gram(sup, d))[0] > 0


# -- objective functions ----------------------------------------------------

@pytest.mark.parametrize("m, expected", [
    (np.eye(3), 0.0),
    (np.diag([2.0, 0.0]), math.log(2)),
    (np.diag([2.0, 3.0]), math.log(6)),
])
def test_log_pseudo_det(m, expected):
    assert log_pseudo_det(m) == pytest.approx(expected, abs=1e-14)


def test_log_pseudo_det_sentinel_and_symmetry():
    assert log_pseudo_det(np.zeros((3, 3))) == -math.inf
    with pytest.raises(NotSymmetric):
        log_pseudo_det([[1.0, 1.0], [0.0, 1.0]])
    assert lambda_min(np.diag([2.0, 0.0])) == 0.0
    assert lambda_min(np.diag([2.0, 0.5])) == pytest.approx(0.5)


def test_objective_value_examples(geo20_support):
    d = SamplingDesign.uniform(20)
    assert objective_value(MAXDET, geo20_support, d, []) == -math.inf
    assert objective_value(MAXDET, geo20_support, d, range(20)) == pytest.approx(0.0, abs=1e-12)
    assert objective_value(MAXLMIN, geo20_support, d, range(20)) == pytest.approx(1.0)
    assert objective_value(MAXLMIN, geo20_support, d, [0, 1]) == 0.0


@pytest.mark.parametrize("seed", range(10))
def test_weight_doubling_shifts_by_rank_log2(seed):
    rng, sup, design = random_instance(seed)
    # doubling p_i doubles every weight p_i / (1 + s_i^2); keep p_i <= 1
    scale = 0.5 / design.probabilities.max()
    base = SamplingDesign(design.probabilities * scale, design.noise_variances)
    doubled = SamplingDesign(design.probabilities * scale * 2, design.noise_variances)
    subset = sorted(rng.choice(sup.n_nodes, int(rng.integers(1, sup.n_nodes + 1)), replace=False))
    rows = weighted_rows(sup, base)[subset]
    rank = np.linalg.matrix_rank(rows.T @ rows, tol=1e-10 * max(1e-300, np.linalg.norm(rows) ** 2))
    shift = objective_value(MAXDET, sup, doubled, subset) - objective_value(MAXDET, sup, base, subset)
    assert shift == pytest.approx(rank * math.log(2), abs=1e-9)
    m = int(rng.integers(1, sup.n_nodes + 1))
    assert greedy_select(MAXDET, sup, base, m) == greedy_select(MAXDET, sup, doubled, m)


# -- selection engines ------------------------------------------------------

def test_greedy_first_pick_largest_row():
    c = np.array([0.9, 0.3, 0.1])
    sup = FrequencySupport((0,), (c / np.linalg.norm(c))[:, None])
    assert greedy_select(MAXDET, sup, SamplingDesign.uniform(3), 1) == [0]
    assert greedy_select(MAXDET, sup, SamplingDesign.uniform(3), 3)[0] == 0


def test_greedy_budget(geo20_support):
    d = SamplingDesign.uniform(20)
    assert sorted(greedy_select(MAXDET, geo20_support, d, 20)) == list(range(20))
    for bad in (0, 21):
        with pytest.raises(BudgetOutOfRange):
            greedy_select(MAXDET, geo20_support, d, bad)


def test_greedy_reaches_full_rank_at_bandwidth(geo20_support):
    # the rank-first comparison key keeps the first |F| picks linearly independent
    for obj in (MAXDET, MAXLMIN):
        order = greedy_select(obj, geo20_support, SamplingDesign.uniform(20), 5)
        rows = geo20_support.u_f[order]
        assert np.linalg.matrix_rank(rows) == 5


def test_greedy_tie_goes_to_lowest_index():
    u = np.full((4, 1), 0.5)
    sup = FrequencySupport((0,), u)
    assert greedy_select(MAXDET, sup, SamplingDesign.uniform(4), 2) == [0, 1]


def test_lambda_min_tiebreak_uses_logdet(geo20_support):
    # before |F| picks every candidate has lambda_min = 0; the second entry of
    # the key must still separate them
    rows = weighted_rows(geo20_support, SamplingDesign.uniform(20))
    k0 = score_rows(MAXLMIN, [rows[0]], 5)
    k1 = score_rows(MAXLMIN, [rows[1]], 5)
    assert k0[1] == k1[1] == 0.0
    assert k0 != k1


def test_exhaustive_examples():
    rng, sup, design = random_instance(3, n_max=8)
    n = sup.n_nodes
    score = lambda s: objective_value(MAXDET, sup, design, s)
    assert exhaustive_select(score, n, n) == tuple(range(n))
    assert exhaustive_select(score, n, 1)[0] == greedy_select(MAXDET, sup, design, 1)[0]
    with pytest.raises(TooManyCombinations):
        exhaustive_select(score, 30, 15)
    # lexicographically first on ties
    assert exhaustive_select(lambda s: 0.0, 5, 2) == (0, 1)


def test_exhaustive_dominates_greedy_n8_f3():
    rng = np.random.default_rng(8)
    g = random_connected_graph(8, rng)
    sup = spectral_basis(g).lowest(3)
    d = SamplingDesign(rng.uniform(0.2, 1, 8), rng.uniform(0, 0.1, 8))
    score = lambda s: objective_value(MAXDET, sup, d, s)
    best = exhaustive_select(score, 8, 3)
    assert score(best) >= score(greedy_select(MAXDET, sup, d, 3))


def test_random_select():
    assert random_select(6, 6, 1) == tuple(range(6))
    assert random_select(20, 5, 42) == random_select(20, 5, 42)
    assert len(set(random_select(20, 5, 7))) == 5
    with pytest.raises(BudgetOutOfRange):
        random_select(4, 5, 0)


# -- structural properties --------------------------------------------------

@given(st.integers(0, 10_000))
def test_monotone_once_full_rank(seed):
    # with a full-rank base set, adding a row multiplies det by 1 + w c^T G^-1 c >= 1
    rng, sup, design = random_instance(seed)
    n, f = sup.n_nodes, sup.bandwidth
    base = greedy_select(MAXDET, sup, design, f)
    rows = weighted_rows(sup, design)
    if np.linalg.matrix_rank(rows[base]) < f:
        return
    extra = [j for j in range(n) if j not in base]
    s = list(base) + list(rng.permutation(extra)[: int(rng.integers(0, len(extra) + 1))])
    h = objective_value(MAXDET, sup, design, s)
    for j in set(range(n)) - set(s):
        assert objective_value(MAXDET, sup, design, s + [j]) >= h - 1e-12


@given(st.integers(0, 10_000))
def test_diminishing_returns_once_full_rank(seed):
    rng, sup, design = random_instance(seed, n_max=8)
    n, f = sup.n_nodes, sup.bandwidth
    base = greedy_select(MAXDET, sup, design, f)
    if np.linalg.matrix_rank(weighted_rows(sup, design)[base]) < f:
        return
    rest = [j for j in range(n) if j not in base]
    h = lambda s: objective_value(MAXDET, sup, design, s)
    for k in range(len(rest)):
        for extra in itertools.combinations(rest, k):
            t = list(base) + list(extra)
            for j in set(rest) - set(extra):
                assert h(base + [j]) - h(base) >= h(t + [j]) - h(t) - 1e-10


@pytest.mark.parametrize("seed", range(10))
def test_greedy_invariant_to_uniform_weight_scaling(seed):
    rng, sup, design = random_instance(seed)
    m = int(rng.integers(1, sup.n_nodes + 1))
    scaled = SamplingDesign(design.probabilities * 0.37, design.noise_variances)
    for obj in (MAXDET, MAXLMIN):
        assert greedy_select(obj, sup, design, m) == greedy_select(obj, sup, scaled, m)


def test_selection_csv(tmp_path):
    p = tmp_path / "sel.csv"
    write_selection_csv(p, [4, 2], [-1.5, 0.25])
    rows = list(csv.reader(open(p)))
    assert rows == [["rank", "node", "objective_value"], ["0", "4", "-1.5"], ["1", "2", "0.25"]]
