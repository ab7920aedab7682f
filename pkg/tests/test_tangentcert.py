import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mclab.errors import ArgumentError, ConvergenceError
from mclab.groundtruth import GroundTruth, gen_ground_truth
from mclab.matcore import RankRFactors
from mclab.sampling import (GolfingPartition, ObservationMask, default_k0, golfing_split, h_omega,
                            h_omega_minus_entryline, sample_mask)
from mclab.tangentcert import (TangentProjector, build_certificate, check_candes1, default_t0,
                               make_tangent, opnorm_matrix_operator, run_nnm_loo, solve_nnm_primal,
                               write_report)


def rect_truth(d=30, r=2, kappa=1.0, seed=0, d2=None):
    return gen_ground_truth(d, d2 or d, r, kappa, "rectangular", seed=seed)


def test_truth_lies_in_tangent_space():
    t = rect_truth(d=20, d2=14, kappa=3.0)
    P = make_tangent(t)
    np.testing.assert_allclose(P.P_T(t.matrix), t.matrix, atol=1e-12)
    assert np.abs(P.P_T_perp(t.matrix)).max() <= 1e-12


def test_symmetric_truth_projector():
    t = gen_ground_truth(15, 15, 2, 2.0, seed=1)
    P = make_tangent(t)
    np.testing.assert_allclose(P.P_T(t.matrix), t.matrix, atol=1e-12)


def test_rank_deficient_truth_rejected():
    F, _ = np.linalg.qr(np.random.default_rng(0).standard_normal((6, 2)))
    t = GroundTruth(RankRFactors(F, np.array([1.0, 0.0]), F.copy()), 1.0, np.inf, 0)
    with pytest.raises(ArgumentError):
        make_tangent(t)


def test_projector_rejects_non_orthonormal():
    with pytest.raises(ArgumentError):
        TangentProjector(np.ones((4, 1)), np.eye(4)[:, :1])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31))
def test_projector_algebra(seed):
    gen = np.random.default_rng(seed)
    U, _ = np.linalg.qr(gen.standard_normal((9, 2)))
    V, _ = np.linalg.qr(gen.standard_normal((7, 2)))
    P = TangentProjector(U, V)
    X, Y = gen.standard_normal((2, 9, 7))
    PX = P.P_T(X)
    assert np.abs(P.P_T(PX) - PX).max() <= 1e-12
    assert np.abs(PX + P.P_T_perp(X) - X).max() <= 1e-12
    assert abs(np.vdot(PX, Y) - np.vdot(X, P.P_T(Y))) <= 1e-11


def test_opnorm_identity_and_projector():
    assert opnorm_matrix_operator(lambda Z: Z, (5, 4)) == pytest.approx(1.0, abs=1e-12)
    P = make_tangent(rect_truth(d=12))
    assert opnorm_matrix_operator(P.P_T, P.shape) == pytest.approx(1.0, abs=1e-8)


@pytest.mark.parametrize("d", [3, 4])
@pytest.mark.parametrize("seed", range(5))
def test_opnorm_matches_matricization(d, seed):
    gen = np.random.default_rng(seed)
    A = gen.standard_normal((d * d, d * d))

    def op(Z):
        return (A @ Z.ravel()).reshape(d, d)

    def adj(Z):
        return (A.T @ Z.ravel()).reshape(d, d)

    ref = np.linalg.svd(A, compute_uv=False)[0]
    assert abs(opnorm_matrix_operator(op, (d, d), adjoint=adj) - ref) <= 1e-8 * ref


def test_opnorm_budget_exhausted():
    A = np.diag(np.linspace(1.0, 0.999, 16))
    with pytest.raises(ConvergenceError) as info:
        opnorm_matrix_operator(lambda Z: (A @ Z.ravel()).reshape(4, 4), (4, 4), max_iter=2, block=1)
    assert info.value.estimate > 0


def test_candes1_full_observation_is_zero():
    t = rect_truth(d=20)
    mask = ObservationMask(np.ones((20, 20), bool), 1.0)
    assert check_candes1(mask, make_tangent(t)) == 0.0


def test_candes1_depends_only_on_subspaces():
    a, b = rect_truth(d=30, kappa=1.0, seed=4), rect_truth(d=30, kappa=6.0, seed=4)
    mask = sample_mask(30, 30, 0.5, False, 4)
    assert check_candes1(mask, make_tangent(a)) == check_candes1(mask, make_tangent(b))


@pytest.mark.xfail(strict=True, reason="measured value is 0.63-0.84 at d=60, p=0.5; below 0.5 needs p near 0.7")
def test_candes1_small_at_moderate_p():
    vals = [check_candes1(sample_mask(60, 60, 0.5, False, s), make_tangent(rect_truth(d=60, seed=s)))
            for s in range(50)]
    assert np.mean(np.array(vals) <= 0.5) >= 0.95


def test_certificate_identity_and_support():
    for seed in range(3):
        t = rect_truth(d=40, d2=30, seed=seed)
        part = golfing_split(40, 30, 0.5, 2, seed)
        cert = build_certificate(t, part, t0=6, seed=seed)
        rep = cert.report
        assert rep.identity_residual <= 1e-10
        assert rep.support_ok
        assert not cert.Y[~part.union().observed].any()
        assert len(cert.W) == 2 and len(cert.Z) == 7
        assert rep.thresholds[2] == pytest.approx(1 / 160)


def test_certificate_full_observation():
    t = rect_truth(d=20)
    part = golfing_split(20, 20, 1.0, 1, 0)
    cert = build_certificate(t, part)
    assert all(not Z.any() for Z in cert.Z[1:])
    assert cert.report.cond1 == 0.0
    # P_T(U V^T) reproduces U V^T only to round-off.
    assert cert.report.cond2b <= 1e-14
    assert cert.report.passed


def test_certificate_rejects_zero_layers():
    t = rect_truth(d=10)
    part = GolfingPartition(0, (sample_mask(10, 10, 0.5, False, 0),), 0.5, 0.5)
    with pytest.raises(ArgumentError):
        build_certificate(t, part)


def test_default_t0():
    assert default_t0(100) == 16


@pytest.mark.xfail(strict=True, reason="cond1 is 0.7-0.85 at d=100, p=0.4 in every seed")
def test_certificate_passes_at_moderate_p():
    passed = 0
    for seed in range(20):
        t = rect_truth(d=100, seed=seed)
        part = golfing_split(100, 100, 0.4, default_k0(t.mu, 2), seed)
        passed += build_certificate(t, part, seed=seed).report.passed
    assert passed >= 18


def test_report_json(tmp_path):
    t = rect_truth(d=20)
    rep = build_certificate(t, golfing_split(20, 20, 0.6, 2, 1), seed=1).report
    write_report(tmp_path / "cert.json", rep)
    data = json.loads((tmp_path / "cert.json").read_text())
    assert {"cond1", "cond2a", "cond2b", "support_ok", "pass", "k0", "t0", "q", "seed"} <= set(data)


def loo_setup(d=40, p=0.8, seed=0, t0=12):
    t = rect_truth(d=d, seed=seed)
    part = golfing_split(d, d, p, 1, seed)
    cert = build_certificate(t, part, t0=t0, seed=seed)
    return t, part.layers[-1], cert.W[-1]


def test_nnm_loo_shared_start_and_cross_operator():
    t, layer, Z0 = loo_setup()
    led = run_nnm_loo(t, layer, Z0, 5, [(0, 0), (3, 7)])
    assert np.all(led.dist[0] == 0.0)
    Z = np.random.default_rng(0).standard_normal(layer.shape)
    Z[3] = 0.0
    Z[:, 7] = 0.0
    assert np.array_equal(h_omega_minus_entryline(Z, layer, (3, 7), layer.p), h_omega(Z, layer, layer.p))


def test_nnm_loo_rejects_off_tangent_start():
    t, layer, _ = loo_setup()
    with pytest.raises(ArgumentError):
        run_nnm_loo(t, layer, np.ones(layer.shape), 3, [(0, 0)])


def test_nnm_loo_distance_decays_at_generous_p(tmp_path):
    t, layer, Z0 = loo_setup(seed=2)
    gen = np.random.default_rng(2)
    w = [tuple(x) for x in gen.integers(0, 40, size=(20, 2))]
    led = run_nnm_loo(t, layer, Z0, 12, w)
    assert np.mean(led.dist_decay() < 1) >= 0.9
    led.write_csv(tmp_path / "nnm_ledger.csv")
    assert (tmp_path / "nnm_ledger.csv").read_text().startswith("t,w1,w2,quantity,value,rhs,ratio")


def test_nnm_loo_g_scale():
    t, layer, Z0 = loo_setup()
    led = run_nnm_loo(t, layer, Z0, 2, [(1, 1)], k0=3, g_exponent=2.0)
    assert led.G_scale == pytest.approx(0.25 * (t.mu * 2) ** -2.0)


def test_primal_full_observation():
    t = rect_truth(d=15, kappa=2.0)
    mask = ObservationMask(np.ones((15, 15), bool), 1.0)
    np.testing.assert_array_equal(solve_nnm_primal(t.matrix, mask), t.matrix)


def test_primal_zero_observation():
    mask = sample_mask(12, 12, 0.3, False, 0)
    assert not solve_nnm_primal(np.zeros((12, 12)), mask).any()


def test_primal_budget_exhausted():
    t = rect_truth(d=20)
    mask = sample_mask(20, 20, 0.5, False, 0)
    with pytest.raises(ConvergenceError):
        solve_nnm_primal(np.where(mask.observed, t.matrix, 0.0), mask, max_iter=2)


def test_primal_exact_recovery():
    good = 0
    for seed in range(20):
        t = rect_truth(d=60, seed=seed)
        mask = sample_mask(60, 60, 0.4, False, seed)
        try:
            X = solve_nnm_primal(np.where(mask.observed, t.matrix, 0.0), mask)
        except ConvergenceError:
            continue
        good += np.linalg.norm(X - t.matrix) <= 1e-6 * np.linalg.norm(t.matrix)
    assert good >= 18
