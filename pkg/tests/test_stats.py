import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import t as student_t

from emgtrans.errors import ParameterError
from emgtrans.stats import (
    dunn_sidak,
    kruskal_wallis,
    pearson,
    sidak_adjust,
    student_t_two_sided_p,
)


def simple_ranks(pooled):
    """Independent midrank computation for oracles."""
    order = sorted(range(len(pooled)), key=lambda i: pooled[i])
    ranks = [0.0] * len(pooled)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and pooled[order[j + 1]] == pooled[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def simple_h(groups):
    """Independent H computation (rank-sum formula, tie-corrected)."""
    pooled = [v for g in groups for v in g]
    n = len(pooled)
    ranks = simple_ranks(pooled)
    h = 0.0
    pos = 0
    for g in groups:
        rs = sum(ranks[pos:pos + len(g)])
        h += rs * rs / len(g)
        pos += len(g)
    h = 12.0 / (n * (n + 1)) * h - 3 * (n + 1)
    ties = {}
    for v in pooled:
        ties[v] = ties.get(v, 0) + 1
    tie_sum = sum(t**3 - t for t in ties.values())
    c = 1 - tie_sum / (n**3 - n)
    return h / c if c > 0 else 0.0


def exact_permutation_p(groups):
    """Exhaustive permutation distribution of H (N <= 12)."""
    pooled = np.concatenate([np.asarray(g, dtype=float) for g in groups])
    sizes = [len(g) for g in groups]
    h_obs = kruskal_wallis(groups).h
    universe = set(range(len(pooled)))
    hits = 0
    total = 0

    def recurse(remaining, chosen):
        nonlocal hits, total
        if len(chosen) == len(sizes) - 1:
            parts = chosen + [sorted(remaining)]
            gs = [pooled[list(p)] for p in parts]
            total += 1
            hits += kruskal_wallis(gs).h >= h_obs - 1e-12
            return
        size = sizes[len(chosen)]
        for combo in itertools.combinations(sorted(remaining), size):
            recurse(remaining - set(combo), chosen + [list(combo)])

    recurse(universe, [])
    return hits / total


class TestKruskalWallis:
    def test_identical_groups(self):
        result = kruskal_wallis([[1, 2, 3], [1, 2, 3]])
        assert result.h == pytest.approx(0.0, abs=1e-12)
        assert result.p_value == pytest.approx(1.0, abs=1e-9)
        assert result.df == 1

    def test_separated_groups_significant(self):
        result = kruskal_wallis([[1, 2, 3], [100, 101, 102]])
        assert result.p_value < 0.05

    def test_h_matches_hand_formula(self):
        rng = np.random.default_rng(0)
        for _ in range(30):
            k = int(rng.integers(2, 5))
            groups = [
                list(rng.uniform(0, 10, int(rng.integers(2, 8)))) for _ in range(k)
            ]
            result = kruskal_wallis(groups)
            assert result.h == pytest.approx(simple_h(groups), abs=1e-9)
            assert result.df == k - 1

    def test_with_ties_matches_hand_formula(self):
        groups = [[1, 1, 2, 3], [2, 2, 3, 4], [1, 4, 4, 4]]
        result = kruskal_wallis(groups)
        assert result.h == pytest.approx(simple_h(groups), abs=1e-9)

    def test_empty_group_rejected(self):
        with pytest.raises(ParameterError):
            kruskal_wallis([[1, 2], []])

    def test_single_group_rejected(self):
        with pytest.raises(ParameterError):
            kruskal_wallis([[1, 2, 3]])

    def test_permutation_agreement_on_strong_and_null_instances(self):
        # chi-square approximation vs exhaustive permutation at N <= 12;
        # agreement is checked where significance calls live (clear effects)
        # and on fully tied null instances
        rng = np.random.default_rng(1)
        for _ in range(6):
            shift = float(rng.uniform(3, 8))
            groups = [list(rng.normal(i * shift, 1.0, 4)) for i in range(3)]
            kw = kruskal_wallis(groups)
            assert abs(kw.p_value - exact_permutation_p(groups)) <= 0.02
        null = [[5.0] * 4, [5.0] * 4, [5.0] * 4]
        assert abs(kruskal_wallis(null).p_value - exact_permutation_p(null)) <= 0.02

    @given(
        st.lists(
            st.lists(st.integers(-100, 100), min_size=2, max_size=6),
            min_size=2,
            max_size=4,
        )
    )
    @settings(max_examples=60)
    def test_monotone_transform_invariance(self, groups):
        # cubing integers is strictly monotone and exact in float64
        h0 = kruskal_wallis(groups).h
        transformed = [[float(v) ** 3 for v in g] for g in groups]
        h1 = kruskal_wallis(transformed).h
        assert h0 == pytest.approx(h1, abs=1e-9)


class TestDunnSidak:
    def test_identical_groups_not_significant(self):
        result = dunn_sidak([[1, 2, 3, 4], [1, 2, 3, 4]], alpha=0.05)
        (cmp,) = result.comparisons
        assert cmp.p_adjusted > 0.9
        assert not cmp.significant

    def test_single_comparison_unadjusted(self):
        result = dunn_sidak([[1, 2, 3], [4, 5, 6]], alpha=0.05)
        assert result.m == 1
        (cmp,) = result.comparisons
        assert cmp.p_adjusted == pytest.approx(cmp.p_raw, abs=1e-12)

    def test_shifted_group_flagged(self):
        rng = np.random.default_rng(2)
        a = list(rng.normal(0, 1, 8))
        b = list(rng.normal(0, 1, 8))
        c = list(rng.normal(40, 1, 8))
        result = dunn_sidak([a, b, c], alpha=0.05)
        flags = {(cmp.a, cmp.b): cmp.significant for cmp in result.comparisons}
        assert flags[(0, 2)] and flags[(1, 2)]
        assert not flags[(0, 1)]

    def test_shifted_group_matches_pairwise_permutation_oracle(self):
        # oracle: exact two-sample permutation test on rank sums per pair,
        # Sidak-adjusted, at the same alpha
        rng = np.random.default_rng(3)
        a = list(rng.normal(0, 1, 8))
        b = list(rng.normal(0, 1, 8))
        c = list(rng.normal(40, 1, 8))
        groups = [a, b, c]
        result = dunn_sidak(groups, alpha=0.05)
        for cmp in result.comparisons:
            x, y = groups[cmp.a], groups[cmp.b]
            pooled = np.array(x + y)
            obs = abs(np.mean(simple_ranks(list(pooled))[:len(x)]) -
                      (len(pooled) + 1) / 2)
            hits = 0
            total = 0
            for combo in itertools.combinations(range(len(pooled)), len(x)):
                ranks = simple_ranks(list(pooled))
                stat = abs(np.mean([ranks[i] for i in combo]) - (len(pooled) + 1) / 2)
                hits += stat >= obs - 1e-12
                total += 1
            p_perm = sidak_adjust(hits / total, result.m)
            assert (p_perm < 0.05) == cmp.significant

    def test_fewer_than_two_groups_rejected(self):
        with pytest.raises(ParameterError):
            dunn_sidak([[1, 2, 3]], alpha=0.05)


class TestSidakAdjust:
    def test_m_one_identity(self):
        assert sidak_adjust(0.3, 1) == pytest.approx(0.3, abs=1e-12)

    def test_monotone_and_dominating(self):
        rng = np.random.default_rng(4)
        for _ in range(1000):
            p = float(rng.uniform(0, 1))
            m = int(rng.integers(1, 20))
            adj = sidak_adjust(p, m)
            assert adj >= p - 1e-12
            assert 0.0 <= adj <= 1.0
            adj2 = sidak_adjust(min(p + 0.01, 1.0), m)
            assert adj2 >= adj - 1e-12

    def test_edge_values(self):
        assert sidak_adjust(0.0, 5) == 0.0
        assert sidak_adjust(1.0, 5) == 1.0


class TestPearson:
    def test_perfect_linear(self):
        x = [1.0, 2.0, 3.0, 4.0, 5.0]
        y = [2 * v + 1 for v in x]
        result = pearson(x, y)
        assert result.r == pytest.approx(1.0, abs=1e-12)
        assert result.p_value < 1e-20

    def test_perfect_negative(self):
        x = [1.0, 2.0, 3.0]
        assert pearson(x, [-v for v in x]).r == pytest.approx(-1.0, abs=1e-12)

    def test_documented_four_point_instance(self):
        result = pearson([1, 2, 3, 4], [1, 3, 2, 4])
        assert result.r == pytest.approx(0.8, abs=1e-12)
        assert result.n == 4

    def test_zero_variance_rejected(self):
        with pytest.raises(ParameterError):
            pearson([1, 1, 1], [1, 2, 3])

    def test_short_input_rejected(self):
        with pytest.raises(ParameterError):
            pearson([1, 2], [3, 4])

    def test_p_matches_scipy(self):
        from scipy.stats import pearsonr

        rng = np.random.default_rng(5)
        for _ in range(20):
            n = int(rng.integers(4, 30))
            x = rng.standard_normal(n)
            y = 0.5 * x + rng.standard_normal(n)
            mine = pearson(x, y)
            ref_r, ref_p = pearsonr(x, y)
            assert mine.r == pytest.approx(ref_r, abs=1e-12)
            assert mine.p_value == pytest.approx(ref_p, abs=1e-10)

    @given(
        st.floats(0.1, 10.0),
        st.floats(-5.0, 5.0),
    )
    @settings(max_examples=50)
    def test_affine_invariance(self, scale, shift):
        rng = np.random.default_rng(6)
        x = rng.standard_normal(20)
        y = rng.standard_normal(20) + 0.3 * x
        base = pearson(x, y).r
        transformed = pearson(scale * x + shift, y).r
        assert transformed == pytest.approx(base, abs=1e-9)
        flipped = pearson(-x, y).r
        assert flipped == pytest.approx(-base, abs=1e-9)


class TestStudentT:
    def test_accuracy_against_scipy(self):
        for df in (1, 2, 5, 10, 28, 100):
            for t in np.linspace(-50, 50, 41):
                want = 2.0 * student_t.sf(abs(t), df)
                got = student_t_two_sided_p(float(t), df)
                assert abs(got - want) < 1e-10
