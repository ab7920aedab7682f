import math

import numpy as np
import pytest

from mclab.errors import ArgumentError, GenerationError
from mclab.groundtruth import (gen_ground_truth, load_ground_truth, measure_incoherence,
                               save_ground_truth, spectrum_for)


def test_rank_one_unit_spectrum():
    t = gen_ground_truth(10, 10, 1, 1.0, seed=0)
    np.testing.assert_array_equal(t.factors.spectrum, [1.0])
    with pytest.raises(ArgumentError):
        gen_ground_truth(10, 10, 1, 2.0)


@pytest.mark.parametrize("r", [2, 3, 5])
def test_unit_condition_number_flat_spectrum(r):
    t = gen_ground_truth(20, 20, r, 1.0, seed=r)
    assert np.all(t.factors.spectrum == 1.0)


def test_spectrum_endpoints_and_order():
    s = spectrum_for(4, 8.0)
    assert s[0] == 8.0 and s[-1] == 1.0
    assert np.all(np.diff(s) < 0)


def test_symmetric_truth_is_psd_rank_r():
    t = gen_ground_truth(30, 30, 3, 4.0, seed=1)
    M = t.matrix
    np.testing.assert_allclose(M, M.T, atol=1e-14)
    w = np.sort(np.linalg.eigvalsh(M))[::-1]
    np.testing.assert_allclose(w[:3], [4.0, 2.0, 1.0], atol=1e-12)
    assert np.abs(w[3:]).max() <= 1e-12
    assert t.kappa == pytest.approx(4.0) and t.sigma1 == 4.0 and t.sigmar == 1.0


def test_rectangular_truth():
    t = gen_ground_truth(12, 9, 2, 3.0, "rectangular", seed=2)
    assert t.matrix.shape == (12, 9)
    np.testing.assert_allclose(np.linalg.svd(t.matrix, compute_uv=False)[:2], [3.0, 1.0], atol=1e-12)
    mu = measure_incoherence(t.factors)
    assert isinstance(mu, tuple) and t.mu == pytest.approx(max(mu))


def test_incoherence_rarely_exceeds_three_log_d():
    d, r = 100, 4
    mus = np.array([gen_ground_truth(d, d, r, 1.0, seed=s).mu for s in range(200)])
    assert np.mean(mus <= 3 * math.log(d)) >= 0.95


def test_incoherence_extremes():
    d, r = 12, 3
    assert measure_incoherence(np.eye(d)[:, :r]) == pytest.approx(d / r)
    H = np.array([[1, 1, 1, 1], [1, -1, 1, -1], [1, 1, -1, -1], [1, -1, -1, 1]]) / 2.0
    assert measure_incoherence(H[:, :2]) == pytest.approx(1.0)


def test_incoherence_row_scan_oracle():
    gen = np.random.default_rng(4)
    Q, _ = np.linalg.qr(gen.standard_normal((40, 3)))
    brute = max(40 / 3 * sum(Q[i, k] ** 2 for k in range(3)) for i in range(40))
    assert abs(measure_incoherence(Q) - brute) <= 1e-12


def test_incoherence_rejects_non_orthonormal():
    with pytest.raises(ArgumentError):
        measure_incoherence(np.ones((5, 2)))


def test_infeasible_shapes():
    with pytest.raises(ArgumentError):
        gen_ground_truth(5, 6, 2, 1.0, "sym-psd")
    with pytest.raises(ArgumentError):
        gen_ground_truth(5, 5, 6, 1.0)
    with pytest.raises(ArgumentError):
        gen_ground_truth(5, 5, 2, 0.5)


def test_incoherence_cap_and_rejection_budget():
    t = gen_ground_truth(50, 50, 2, 1.0, seed=3, max_mu=4.0)
    assert t.mu <= 4.0
    with pytest.raises(GenerationError):
        gen_ground_truth(50, 50, 2, 1.0, seed=3, max_mu=1.0, max_tries=5)


def test_reproducible_by_seed():
    a = gen_ground_truth(15, 15, 2, 2.0, seed=11)
    b = gen_ground_truth(15, 15, 2, 2.0, seed=11)
    assert np.array_equal(a.matrix, b.matrix)


@pytest.mark.parametrize("variant", ["sym-psd", "rectangular"])
def test_save_load_roundtrip(tmp_path, variant):
    t = gen_ground_truth(8, 8, 2, 2.0, variant, seed=5)
    save_ground_truth(tmp_path / "gt", t)
    back = load_ground_truth(tmp_path / "gt")
    assert np.array_equal(back.matrix, t.matrix)
    assert back.mu == t.mu and back.seed == 5 and back.symmetric == t.symmetric
