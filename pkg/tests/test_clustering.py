import itertools

import numpy as np
import pytest

from covariation.clustering import (NO_STRUCTURE_SILHOUETTE, ClusteringError, build_feature_matrix,
                                    cluster_composition, cluster_means, euclidean_distances, optimal_k, pam,
                                    silhouette_widths)
from covariation.inventory import Variable
from covariation.profiles import SpeakerProfile, VariableStats


def blobs(seed=0, sizes=(10, 10, 10), spread=0.05):
    rng = np.random.default_rng(seed)
    centres = np.array([[0, 0], [5, 0], [0, 5], [5, 5], [10, 10]], dtype=float)[:len(sizes)]
    pts = np.vstack([c + spread * rng.normal(size=(s, 2)) for c, s in zip(centres, sizes)])
    truth = np.repeat(np.arange(len(sizes)), sizes)
    return pts, truth


def same_partition(a, b):
    return len({(x, y) for x, y in zip(a, b)}) == len(set(a)) == len(set(b))


def brute_force_cost(d, k):
    n = d.shape[0]
    return min(d[:, list(m)].min(axis=1).sum() for m in itertools.combinations(range(n), k))


def test_separated_blobs_recovered():
    pts, truth = blobs()
    res = pam(euclidean_distances(pts), 3)
    assert same_partition(res.labels, truth)
    assert res.sizes() == [10, 10, 10]
    assert res.avg_silhouette > 0.9


@pytest.mark.parametrize("seed", range(15))
def test_multistart_pam_near_brute_force_optimum(seed):
    rng = np.random.default_rng(seed)
    n, k = int(rng.integers(6, 11)), int(rng.integers(2, 4))
    d = euclidean_distances(rng.normal(size=(n, 3)))
    res = pam(d, k, n_starts=5, seed=seed)
    assert res.total_deviation <= brute_force_cost(d, k) * 1.02 + 1e-12


def test_k_equals_n_minus_one():
    pts, _ = blobs(sizes=(2, 2, 2))
    res = pam(euclidean_distances(pts), 5)
    assert sorted(res.sizes()) == [1, 1, 1, 1, 2]
    assert len(set(res.medoids)) == 5


def test_k_out_of_range():
    d = euclidean_distances(np.arange(5.0)[:, None])
    with pytest.raises(ClusteringError):
        pam(d, 5)
    with pytest.raises(ClusteringError):
        pam(d, 1)


def test_swap_trace_is_monotone():
    rng = np.random.default_rng(2)
    d = euclidean_distances(rng.normal(size=(40, 4)))
    trace = []
    pam(d, 4, trace=trace)
    assert all(b < a for a, b in zip(trace, trace[1:]))


def test_permutation_invariance():
    pts, _ = blobs(seed=5, spread=0.4)
    d = euclidean_distances(pts)
    base = pam(d, 3)
    perm = np.random.default_rng(9).permutation(len(pts))
    moved = pam(d[np.ix_(perm, perm)], 3)
    assert moved.total_deviation == pytest.approx(base.total_deviation)
    assert same_partition(moved.labels, base.labels[perm])


def test_determinism():
    pts, _ = blobs(seed=1, spread=1.0)
    d = euclidean_distances(pts)
    a, b = pam(d, 4), pam(d, 4)
    assert a.medoids == b.medoids and np.array_equal(a.labels, b.labels)


def _manual_silhouette(d, labels):
    out = []
    for i in range(len(labels)):
        own = [j for j in range(len(labels)) if labels[j] == labels[i] and j != i]
        if not own:
            out.append(0.0)
            continue
        a = sum(d[i, j] for j in own) / len(own)
        b = min(np.mean([d[i, j] for j in range(len(labels)) if labels[j] == c])
                for c in set(labels) if c != labels[i])
        out.append((b - a) / max(a, b))
    return np.array(out)


def test_silhouette_matches_definition():
    rng = np.random.default_rng(6)
    d = euclidean_distances(rng.normal(size=(17, 3)))
    labels = np.array([0] * 6 + [1] * 10 + [2])
    assert np.allclose(silhouette_widths(d, labels), _manual_silhouette(d, labels), atol=1e-12)
    assert silhouette_widths(d, labels)[-1] == 0.0
    with pytest.raises(ClusteringError):
        silhouette_widths(d, np.zeros(17))


def test_optimal_k_picks_true_structure():
    pts, _ = blobs(sizes=(8, 8, 8, 8), spread=0.1)
    choice = optimal_k(euclidean_distances(pts), range(2, 9))
    assert choice.k == 4
    assert choice.has_structure
    assert set(choice.curve) == set(range(2, 9))


def test_uniform_data_has_no_structure():
    pts = np.random.default_rng(0).random((200, 4))
    choice = optimal_k(euclidean_distances(pts), range(2, 7))
    assert choice.curve[choice.k] < NO_STRUCTURE_SILHOUETTE
    assert not choice.has_structure


def test_optimal_k_range_checks():
    d = euclidean_distances(np.arange(5.0)[:, None])
    with pytest.raises(ClusteringError):
        optimal_k(d, range(2, 6))
    with pytest.raises(ClusteringError):
        optimal_k(d, [1, 2])


def test_composition_and_means():
    pts, truth = blobs()
    res = pam(euclidean_distances(pts), 3)
    ids = [f"S{i}" for i in range(30)]
    cats = {sid: "D1" if i < 10 else "D2" for i, sid in enumerate(ids)}
    comp = cluster_composition(res, ids, cats)
    assert comp.categories == ("D1", "D2")
    assert comp.counts.sum() == 30
    assert np.allclose(comp.category_shares().sum(axis=0), 1.0)
    assert comp.max_share() == {"D1": 1.0, "D2": 0.5}
    assert comp.verdicts() == {"D1": True, "D2": False}
    means = cluster_means(res, pts)
    for c in range(3):
        assert np.allclose(means[c], pts[res.labels == c].mean(axis=0))


def _profile(sid, rates, n=10):
    return SpeakerProfile(sid, {v: VariableStats(round(r * n), n) for v, r in zip(Variable, rates)})


def test_feature_matrix_scaling_and_imputation():
    profiles = [_profile("A", [0.1, 0.2, 0.3, 0.4]), _profile("B", [0.5, 0.6, 0.2, 0.9]),
                _profile("C", [0.9, 0.1, 0.7, 0.3]), SpeakerProfile("D", {Variable.PRO2P: VariableStats(3, 4)})]
    fm = build_feature_matrix(profiles)
    assert fm.n == 4
    assert np.allclose(fm.values.mean(axis=0), 0.0)
    assert np.allclose(fm.values.std(axis=0, ddof=1), 1.0)
    assert fm.raw[3, 0] == 0.0
    assert build_feature_matrix(profiles, imputation="exclude").speaker_ids == ("A", "B", "C")
    with pytest.raises(ClusteringError):
        build_feature_matrix(profiles, imputation="mean")


def test_zero_variance_column_is_reported():
    profiles = [_profile(s, [0.5, r, 0.2, r]) for s, r in zip("ABCD", (0.1, 0.4, 0.6, 0.9))]
    with pytest.raises(ClusteringError, match="det-poss"):
        build_feature_matrix(profiles)
    fm = build_feature_matrix(profiles, variables=[Variable.PRO2P, Variable.POSS2P])
    assert fm.values.shape == (4, 2)
