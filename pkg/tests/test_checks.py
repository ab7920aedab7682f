import json
import math

import numpy as np
import pytest

from mclab.checks import (BERNSTEIN, DETERMINISTIC, PROBABILISTIC, check_bernstein, check_deterministic,
                          check_probabilistic, reference_constant)
from mclab.errors import ArgumentError
from mclab.matcore import procrustes, sin_theta, top_r_eig_sym


@pytest.mark.parametrize("lemma", DETERMINISTIC)
def test_deterministic_lemmas_hold(lemma):
    res = check_deterministic(lemma, trials=200, seed=1)
    assert res.violations == 0 and res.ok
    assert res.trials == 200 and res.worst_margin >= -1e-9


def test_deterministic_unknown_lemma():
    with pytest.raises(ArgumentError):
        check_deterministic("pythagoras")


def test_unperturbed_eigenvectors_align_exactly():
    # With E = 0 the aligned factors coincide, so every commutator is zero.
    gen = np.random.default_rng(0)
    F, _ = np.linalg.qr(gen.standard_normal((12, 3)))
    lam = np.array([3.0, 2.0, 1.0])
    top = top_r_eig_sym((F * lam) @ F.T, 3)
    G = procrustes(F, top.F)
    assert np.abs(lam[:, None] * G - G * top.spectrum).max() <= 1e-12
    assert sin_theta(F, top.F) <= 1e-12


def test_davis_kahan_zero_perturbation():
    A = np.diag([4.0, 3.0, 1.0, 0.5])
    U = top_r_eig_sym(A, 2).F
    assert sin_theta(U, top_r_eig_sym(A + 0.0, 2).F) == 0.0


def test_probabilistic_full_observation():
    res = check_probabilistic("candes0", 30, 2, 1.0, trials=10)
    assert res.satisfaction == 1.0 and res.fitted_constant == 0.0


def test_candes0_constant_calibration():
    res = check_probabilistic("candes0", 100, 2, 0.3, trials=1000, seed=0)
    assert res.violations == 0
    assert 0 < res.fitted_constant <= reference_constant("candes0")
    assert res.satisfaction == 1.0


def test_rip_in_neighbourhood():
    res = check_probabilistic("prop1-rip", 80, 2, 0.5, trials=40, seed=0)
    assert res.satisfaction >= 0.95


@pytest.mark.parametrize("lemma", PROBABILISTIC)
def test_probabilistic_report_shape(lemma):
    res = check_probabilistic(lemma, 24, 2, 0.5, trials=3, seed=2)
    assert res.violations == 0
    assert 0.0 <= res.satisfaction <= 1.0
    assert res.fitted_constant >= 0.0 and math.isfinite(res.fitted_constant)
    data = json.loads(json.dumps(res.to_json()))
    assert {"lemma", "trials", "violations", "satisfaction", "fitted_constant", "worst_margin"} <= set(data)


@pytest.mark.parametrize("lemma", ["candes0", "yudong2", "hpterm"])
def test_fitted_constant_shrinks_with_p(lemma):
    fitted = [check_probabilistic(lemma, 40, 2, p, trials=5, seed=3).fitted_constant for p in (0.2, 0.5, 0.9)]
    assert fitted[0] >= fitted[1] >= fitted[2]


def test_satisfaction_monotone_in_constant():
    a = check_probabilistic("yudong0", 30, 2, 0.4, trials=8, seed=4)
    sats = [check_probabilistic("yudong0", 30, 2, 0.4, trials=8, seed=4, constant=c).satisfaction
            for c in (0.25 * a.fitted_constant, 0.75 * a.fitted_constant, a.fitted_constant)]
    assert sats == sorted(sats) and sats[-1] == 1.0


def test_probabilistic_argument_checks():
    with pytest.raises(ArgumentError):
        check_probabilistic("nope", 20, 2, 0.5)
    with pytest.raises(ArgumentError):
        check_probabilistic("candes0", 20, 2, 0.0)


@pytest.mark.parametrize("kind", BERNSTEIN)
def test_bernstein_tails(kind):
    res = check_bernstein(kind, trials=10_000, seed=0)
    assert res.violations == 0
    rows = res.details["thresholds"]
    assert len(rows) == 5
    assert all(r["empirical"] <= r["bound"] + r["slack"] for r in rows)


def test_bernstein_rademacher_at_three_sqrt_n():
    rows = check_bernstein("scalar", trials=10_000, seed=5).details["thresholds"]
    top = rows[-1]
    assert top["t"] == pytest.approx(30.0)
    assert top["bound"] == pytest.approx(2 * math.exp(-900 / (200 + 20)))


def test_bernstein_unknown_kind():
    with pytest.raises(ArgumentError):
        check_bernstein("tensor")
