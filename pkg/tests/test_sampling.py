import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mclab.errors import ArgumentError
from mclab.sampling import (ObservationMask, default_k0, golfing_q, golfing_split, h_omega,
                            h_omega_minus_entryline, h_omega_minus_line, h_omega_w, pi_omega,
                            r_omega, read_mask, sample_mask, write_mask)


def test_full_probability_observes_everything():
    m = sample_mask(7, 5, 1.0, False, seed=3)
    assert m.observed.all()
    assert m.count == 35


def test_symmetric_mask_is_symmetric():
    m = sample_mask(30, 30, 0.3, True, seed=1)
    assert np.array_equal(m.observed, m.observed.T)


def test_mask_is_reproducible_and_seed_dependent():
    a = sample_mask(20, 20, 0.4, False, seed=5)
    b = sample_mask(20, 20, 0.4, False, seed=5)
    c = sample_mask(20, 20, 0.4, False, seed=6)
    assert np.array_equal(a.observed, b.observed)
    assert not np.array_equal(a.observed, c.observed)


def test_masks_are_nested_in_p():
    lo = sample_mask(25, 25, 0.2, True, seed=9)
    hi = sample_mask(25, 25, 0.6, True, seed=9)
    assert np.all(hi.observed | ~lo.observed)


def test_fill_fraction_binomial_oracle():
    p, d, n = 0.3, 50, 1000
    fills = np.array([sample_mask(d, d, p, False, s).estimated_p() for s in range(n)])
    se = np.sqrt(p * (1 - p) / (d * d * n))
    assert abs(fills.mean() - p) <= 3 * se


@pytest.mark.parametrize("p", [0.0, -0.1, 1.5])
def test_bad_probability(p):
    with pytest.raises(ArgumentError):
        sample_mask(4, 4, p, False, 0)


def test_symmetric_constructor_validation():
    obs = np.array([[True, True], [False, True]])
    with pytest.raises(ArgumentError):
        ObservationMask(obs, 0.5, symmetric=True)


def test_pi_omega_trivial_masks():
    Z = np.arange(6.0).reshape(2, 3)
    full = ObservationMask(np.ones((2, 3), bool), 1.0)
    empty = ObservationMask(np.zeros((2, 3), bool), 0.5)
    assert np.array_equal(pi_omega(Z, full), Z)
    assert np.array_equal(pi_omega(Z, empty), np.zeros((2, 3)))
    m = sample_mask(2, 3, 0.5, False, 0)
    assert np.array_equal(pi_omega(pi_omega(Z, m), m), pi_omega(Z, m))
    with pytest.raises(ArgumentError):
        pi_omega(np.ones((3, 2)), m)


def test_h_omega_full_observation_vanishes():
    m = ObservationMask(np.ones((4, 4), bool), 1.0)
    Z = np.random.default_rng(0).standard_normal((4, 4))
    assert np.array_equal(h_omega(Z, m), np.zeros((4, 4)))


def test_h_omega_single_entry():
    obs = np.zeros((2, 2), bool)
    obs[0, 0] = True
    m = ObservationMask(obs, 0.5)
    Z = np.array([[2.0, 3.0], [4.0, 5.0]])
    np.testing.assert_array_equal(h_omega(Z, m), [[-2.0, 3.0], [4.0, 5.0]])


def test_h_omega_zero_probability_override():
    m = sample_mask(3, 3, 0.5, False, 0)
    with pytest.raises(ArgumentError):
        h_omega(np.ones((3, 3)), m, prob_override=0.0)


def test_rescaled_sampling_is_unbiased():
    p, n = 0.3, 10_000
    Z = np.array([[1.0, -2.0, 0.5], [3.0, 0.0, -1.0], [0.25, 2.0, 1.5]])
    acc = np.zeros_like(Z)
    for s in range(n):
        acc += r_omega(Z, sample_mask(3, 3, p, False, s))
    se = np.abs(Z) * np.sqrt((1 - p) / p / n)
    assert np.all(np.abs(acc / n - Z) <= 3 * se + 1e-15)


def test_minus_line_operator():
    d, m_line = 8, 3
    mask = sample_mask(d, d, 0.4, True, seed=2)
    gen = np.random.default_rng(1)
    Z = np.zeros((d, d))
    Z[m_line] = gen.standard_normal(d)
    assert np.array_equal(h_omega_minus_line(Z, mask, m_line), np.zeros((d, d)))
    Z = gen.standard_normal((d, d))
    keep = np.ones((d, d), bool)
    keep[m_line] = keep[:, m_line] = False
    assert np.array_equal(h_omega_minus_line(Z, mask, m_line)[keep], h_omega(Z, mask)[keep])
    with pytest.raises(ArgumentError):
        h_omega_minus_line(Z, mask, d)


def test_minus_line_operator_norm_is_smaller():
    d = 20
    mask = sample_mask(d, d, 0.3, True, seed=4)
    gen = np.random.default_rng(2)
    for k in range(100):
        Z = gen.standard_normal((d, d))
        m = k % d
        full = np.linalg.norm(h_omega(Z, mask), 2)
        assert np.linalg.norm(h_omega_minus_line(Z, mask, m), 2) <= full + 1e-12


def test_entryline_decomposition_is_exact():
    mask = sample_mask(9, 6, 0.35, False, seed=8)
    gen = np.random.default_rng(3)
    Z = gen.standard_normal((9, 6))
    for w in [(0, 0), (4, 2), (8, 5)]:
        assert np.array_equal(h_omega_minus_entryline(Z, mask, w, 0.35) + h_omega_w(Z, mask, w, 0.35),
                              h_omega(Z, mask, 0.35))
    cross = np.zeros((9, 6))
    cross[4] = 1.0
    cross[:, 2] = -1.0
    assert not h_omega_minus_entryline(cross, mask, (4, 2), 0.35).any()
    with pytest.raises(ArgumentError):
        h_omega_w(Z, mask, (9, 0), 0.35)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**31), st.floats(0.05, 1.0))
def test_h_omega_self_adjoint(seed, p):
    mask = sample_mask(6, 5, p, False, seed)
    gen = np.random.default_rng(seed)
    X, Y = gen.standard_normal((2, 6, 5))
    lhs = np.vdot(h_omega(X, mask), Y)
    rhs = np.vdot(X, h_omega(Y, mask))
    assert abs(lhs - rhs) <= 1e-12 * (1 + abs(lhs)) / p


def test_golfing_q_closed_forms():
    assert golfing_q(0.75, 2) == pytest.approx(0.5)
    part = golfing_split(10, 10, 0.3, 1, seed=0)
    assert part.q == pytest.approx(0.3) and len(part.layers) == 1
    for p, k in [(0.4, 3), (0.9, 5)]:
        q = golfing_q(p, k)
        assert 1 - (1 - q) ** k == pytest.approx(p, abs=1e-15)


def test_golfing_union_fill_binomial_oracle():
    d, p, n = 40, 0.4, 1000
    fills = np.array([golfing_split(d, d, p, 3, s).union().observed.mean() for s in range(n)])
    se = np.sqrt(p * (1 - p) / (d * d * n))
    assert abs(fills.mean() - p) <= 3 * se


def test_golfing_errors():
    with pytest.raises(ArgumentError):
        golfing_split(5, 5, 0.0, 2, 0)
    with pytest.raises(ArgumentError):
        golfing_split(5, 5, 0.5, 0, 0)


def test_default_k0():
    assert default_k0(1.0, 1) == 1
    assert default_k0(5.0, 2) == 3  # ceil(log 10)
    with pytest.raises(ArgumentError):
        default_k0(5.0, 2, c0=0.0)


def test_estimated_p_symmetric_counts_upper_triangle():
    obs = np.eye(4, dtype=bool)
    m = ObservationMask(obs, 0.5, symmetric=True)
    assert m.estimated_p() == pytest.approx(4 / 10)
    assert m.with_p(0.4).p == 0.4


def test_mask_roundtrip(tmp_path):
    m = sample_mask(6, 6, 0.4, True, seed=1)
    write_mask(tmp_path / "m.txt", m)
    back = read_mask(tmp_path / "m.txt")
    assert np.array_equal(back.observed, m.observed)
    assert back.p == m.p and back.symmetric
