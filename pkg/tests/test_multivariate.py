import io

import numpy as np
import pytest

from covariation.clustering import scale
from covariation.multivariate import PROJECTION_COLUMNS, PcaError, jacobi_eigh, pca, project_2d, write_projection


def scaled(x):
    return scale(np.asarray(x, dtype=float))[0]


def test_jacobi_against_known_spectrum():
    rng = np.random.default_rng(1)
    q, _ = np.linalg.qr(rng.normal(size=(5, 5)))
    lam = np.array([7.0, 3.0, 1.5, 0.2, 0.01])
    a = q @ np.diag(lam) @ q.T
    vals, vecs = jacobi_eigh(a)
    assert np.allclose(np.sort(vals)[::-1], lam, atol=1e-10)
    assert np.allclose(vecs.T @ vecs, np.eye(5), atol=1e-10)
    assert np.allclose(a @ vecs, vecs * vals, atol=1e-10)


def test_jacobi_rejects_asymmetric():
    with pytest.raises(PcaError):
        jacobi_eigh(np.array([[1.0, 2.0], [0.0, 1.0]]))


def test_rank_one_data():
    t = np.random.default_rng(2).normal(size=50)
    x = scaled(np.column_stack([t, 2 * t, -t, 0.5 * t]))
    res = pca(x)
    assert res.variance_proportion[0] == pytest.approx(1.0, abs=1e-10)
    assert np.allclose(res.variance_proportion[1:], 0.0, atol=1e-10)


def test_isotropic_data_spreads_variance():
    x = scaled(np.random.default_rng(3).normal(size=(20000, 4)))
    res = pca(x)
    assert np.allclose(res.variance_proportion, 0.25, atol=0.02)


@pytest.fixture
def result():
    rng = np.random.default_rng(4)
    base = rng.normal(size=(60, 2))
    x = scaled(np.column_stack([base[:, 0], base[:, 0] + 0.3 * rng.normal(size=60), base[:, 1],
                                rng.normal(size=60)]))
    return x, pca(x, [f"S{i}" for i in range(60)])


def test_eigenvalues_of_correlation_matrix_sum_to_p(result):
    _, res = result
    assert res.eigenvalues.sum() == pytest.approx(4.0, abs=1e-10)
    assert np.all(np.diff(res.eigenvalues) <= 0)
    assert res.variance_proportion.sum() == pytest.approx(1.0)


def test_loadings_orthonormal_and_signed(result):
    _, res = result
    assert np.allclose(res.loadings.T @ res.loadings, np.eye(4), atol=1e-10)
    for j in range(4):
        col = res.loadings[:, j]
        assert col[np.argmax(np.abs(col))] > 0


def test_reconstruction(result):
    x, res = result
    assert np.max(np.abs(res.scores @ res.loadings.T - x)) < 1e-8


def test_matches_numpy_eigh(result):
    x, res = result
    ref = np.linalg.eigh(np.corrcoef(x, rowvar=False))[0][::-1]
    assert np.allclose(res.eigenvalues, ref, atol=1e-10)


def test_row_permutation_invariance(result):
    x, res = result
    perm = np.random.default_rng(5).permutation(x.shape[0])
    moved = pca(x[perm])
    assert np.allclose(moved.eigenvalues, res.eigenvalues, atol=1e-12)
    assert np.allclose(moved.loadings, res.loadings, atol=1e-10)
    assert np.allclose(moved.scores, res.scores[perm], atol=1e-10)


def test_too_few_rows():
    with pytest.raises(PcaError):
        pca(np.zeros((3, 4)))


def test_projection_output(result):
    _, res = result
    labels = np.arange(60) % 3
    rows = project_2d(res, labels)
    assert rows[0][0] == "S0" and rows[4][3] == 2
    buf = io.StringIO()
    write_projection(rows, buf)
    lines = buf.getvalue().splitlines()
    assert lines[0] == ",".join(PROJECTION_COLUMNS)
    assert len(lines) == 61
    assert project_2d(res)[0][3] is None
