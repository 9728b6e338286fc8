import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ucsl.metrics import (
    adjusted_rand_index,
    balanced_accuracy,
    cluster_balanced_accuracy,
    contingency,
    homogeneity_completeness_v,
    v_measure,
)


def ari_pairs(a, b):
    """Pair-counting oracle: loop over every unordered pair."""
    n = len(a)
    both = only_a = only_b = 0
    for i, j in itertools.combinations(range(n), 2):
        sa, sb = a[i] == a[j], b[i] == b[j]
        both += sa and sb
        only_a += sa and not sb
        only_b += sb and not sa
    total = n * (n - 1) // 2
    pa, pb = both + only_a, both + only_b
    expected = Fraction(pa * pb, total)
    maximum = Fraction(pa + pb, 2)
    if maximum == expected:
        return 1.0
    return float((both - expected) / (maximum - expected))


def v_oracle(truth, pred):
    n = len(truth)

    def H(labels):
        return -sum(c / n * math.log(c / n) for c in (list(labels).count(v) for v in set(labels)))

    def Hcond(x, given):
        out = 0.0
        for g in set(given):
            xs = [xi for xi, gi in zip(x, given) if gi == g]
            for v in set(xs):
                c = xs.count(v)
                out -= c / n * math.log(c / len(xs))
        return out

    ht, hp = H(truth), H(pred)
    hom = 1.0 if ht == 0 else 1 - Hcond(truth, pred) / ht
    com = 1.0 if hp == 0 else 1 - Hcond(pred, truth) / hp
    return 0.0 if hom + com == 0 else 2 * hom * com / (hom + com)


def test_ari_examples():
    assert adjusted_rand_index([0, 0, 1, 1], [0, 0, 1, 1]) == 1.0
    assert adjusted_rand_index([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert adjusted_rand_index([0, 0, 1, 1], [0, 1, 0, 1]) == -0.5
    assert ari_pairs([0, 0, 1, 1], [0, 1, 0, 1]) == -0.5


def test_ari_errors():
    with pytest.raises(ValueError):
        adjusted_rand_index([0], [0])
    with pytest.raises(ValueError):
        adjusted_rand_index([0, 1], [0, 1, 1])


def _random_pairs(n_pairs=50, seed=0):
    rng = np.random.default_rng(seed)
    for _ in range(n_pairs):
        n = int(rng.integers(2, 31))
        yield rng.integers(0, rng.integers(1, 6), n), rng.integers(0, rng.integers(1, 6), n)


def test_ari_matches_pair_counting_exactly():
    for a, b in _random_pairs():
        assert adjusted_rand_index(a, b) == ari_pairs(list(a), list(b))


def test_v_measure_matches_entropy_oracle():
    for a, b in _random_pairs(seed=1):
        assert abs(v_measure(a, b) - v_oracle(list(a), list(b))) <= 1e-12


def test_v_measure_examples():
    assert v_measure([0, 0, 1, 1], [5, 5, 3, 3]) == 1.0
    assert v_measure([0, 0, 1, 1], [0, 0, 0, 0]) == 0.0
    h, c, _ = homogeneity_completeness_v([0, 0, 1, 1], [0, 0, 0, 0])
    assert (h, c) == (0.0, 1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=2, max_size=40))
def test_symmetry_and_relabeling(pairs):
    a = np.array([p[0] for p in pairs])
    b = np.array([p[1] for p in pairs])
    assert adjusted_rand_index(a, b) == adjusted_rand_index(b, a)
    assert v_measure(a, b) == pytest.approx(v_measure(b, a), abs=1e-12)
    perm = np.array([2, 0, 3, 1])
    assert adjusted_rand_index(a, perm[b]) == adjusted_rand_index(a, b)
    assert v_measure(a, perm[b]) == pytest.approx(v_measure(a, b), abs=1e-12)
    assert cluster_balanced_accuracy(a, perm[b]) == pytest.approx(cluster_balanced_accuracy(a, b), abs=1e-12)
    assert -1.0 <= adjusted_rand_index(a, b) <= 1.0
    assert 0.0 <= v_measure(a, b) <= 1.0 + 1e-12


def test_contingency_marginals():
    t = contingency([0, 0, 1, 2], [1, 0, 0, 0])
    assert t.total == 4
    np.testing.assert_array_equal(t.row_sums, [2, 1, 1])
    np.testing.assert_array_equal(t.col_sums, [3, 1])


def test_balanced_accuracy_examples():
    assert balanced_accuracy([1, -1, 1], [1, -1, 1]) == 1.0
    assert balanced_accuracy([1, 1, -1, -1], [1, -1, -1, -1]) == 0.75
    assert balanced_accuracy([1, 1, -1, -1], [1, 1, 1, 1]) == 0.5
    with pytest.raises(ValueError):
        balanced_accuracy([], [])


def cba_bruteforce(truth, clusters):
    classes, cl = sorted(set(truth)), sorted(set(clusters))
    best = 0.0
    truth, clusters = np.asarray(truth), np.asarray(clusters)
    # injective maps from clusters to classes; extra clusters map to nothing
    for r in range(0, min(len(cl), len(classes)) + 1):
        for chosen in itertools.combinations(cl, r):
            for targets in itertools.permutations(classes, r):
                m = dict(zip(chosen, targets))
                pred = np.array([m.get(c, None) for c in clusters], dtype=object)
                rec = [np.mean(pred[truth == k] == k) for k in classes]
                best = max(best, float(np.mean(rec)))
    return best


def test_cluster_balanced_accuracy_matches_bruteforce():
    rng = np.random.default_rng(2)
    for _ in range(30):
        n = int(rng.integers(2, 25))
        t, c = rng.integers(0, 3, n), rng.integers(0, 4, n)
        assert cluster_balanced_accuracy(t, c) == pytest.approx(cba_bruteforce(t, c), abs=1e-12)


def test_cluster_balanced_accuracy_examples():
    assert cluster_balanced_accuracy([0, 0, 1, 1], [1, 1, 0, 0]) == 1.0
    assert cluster_balanced_accuracy([0, 0, 1, 1], [0, 0, 0, 0]) == 0.5


def test_cluster_balanced_accuracy_chance_level():
    rng = np.random.default_rng(3)
    truth = np.repeat([0, 1, 2], 2000)
    vals = [cluster_balanced_accuracy(truth, rng.permutation(truth)) for _ in range(1000)]
    # the maximum over matchings biases upward only slightly at this n
    assert abs(np.mean(vals) - 1 / 3) < 0.02
