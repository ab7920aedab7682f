import csv
from dataclasses import replace

import numpy as np
import pytest

from mclab.errors import ArgumentError, DegenerateIterateError, DivergenceError
from mclab.groundtruth import gen_ground_truth
from mclab.loodiag import QUANTITIES, build_svp_ledger, clemma1_rows, run_loo_family
from mclab.sampling import ObservationMask, sample_mask
from mclab.svp import run_svp


def setup(d=40, r=2, kappa=2.0, p=0.6, seed=0):
    return gen_ground_truth(d, d, r, kappa, seed=seed), sample_mask(d, d, p, True, seed)


def test_full_observation_members_coincide():
    truth, _ = setup(d=20)
    mask = ObservationMask(np.ones((20, 20), bool), 1.0, True)
    fam = run_loo_family(truth, mask, t_max=3)
    for k in range(fam.members.size):
        np.testing.assert_allclose(fam.iterate(1, k), truth.matrix, atol=1e-12)
    assert np.allclose(fam.F[2], fam.F[2, :1])


def test_member_ignores_its_own_cross():
    truth, mask = setup(d=30, seed=2)
    m = 5
    obs = mask.observed.copy()
    obs[m - 1, :] = obs[:, m - 1] = False
    sparse = ObservationMask(obs, mask.p, True)
    obs2 = obs.copy()
    obs2[m - 1, ::2] = obs2[::2, m - 1] = True
    dense = ObservationMask(obs2, mask.p, True)
    a = run_loo_family(truth, sparse, t_max=6, members=[m])
    b = run_loo_family(truth, dense, t_max=6, members=[m])
    assert np.array_equal(a.F[:, 1], b.F[:, 1]) and np.array_equal(a.lam[:, 1], b.lam[:, 1])


def test_member_zero_bitwise_matches_svp():
    truth, mask = setup(seed=3)
    fam = run_loo_family(truth, mask, t_max=12, members=[0, 4, 17])
    ref = run_svp(np.where(mask.observed, truth.matrix, 0.0), mask, 2, t_max=12,
                  tol_objective=0.0, keep_iterates=True)
    for t in range(1, 13):
        assert np.array_equal(ref.iterates[t].F, fam.F[t, 0])
        assert np.array_equal(ref.iterates[t].spectrum, fam.lam[t, 0])


def test_zero_start_and_labels():
    truth, mask = setup(d=20)
    fam = run_loo_family(truth, mask, t_max=2, members=[3, 1])
    assert fam.members.tolist() == [0, 1, 3]
    assert not fam.F[0].any()
    with pytest.raises(ArgumentError):
        run_loo_family(truth, mask, t_max=2, members=[21])


def test_rejects_rectangular_inputs():
    truth = gen_ground_truth(10, 10, 2, 1.0, "rectangular")
    with pytest.raises(ArgumentError):
        run_loo_family(truth, sample_mask(10, 10, 0.5, False, 0))


def test_divergence_names_member_and_step():
    truth, mask = setup(d=150, r=3, kappa=3.0, p=0.25, seed=0)
    with pytest.raises(DivergenceError) as info:
        run_loo_family(truth, mask, t_max=100, members=[0])
    assert info.value.member == 0 and info.value.t >= 1


def test_ledger_basic_structure(tmp_path):
    truth, mask = setup(seed=4)
    fam = run_loo_family(truth, mask, t_max=10, members=[0, 2, 9, 31])
    led = build_svp_ledger(fam)
    assert led.t.tolist() == list(range(1, 11))
    for a in range(10):
        assert np.all(np.diag(led.D[a]) == 0.0)
    assert led.S[:, 0].max() <= 1e-12
    for name, arr in zip(QUANTITIES, (led.E, led.Delta, led.D, led.S)):
        assert np.array_equal(led.aggregate(name), arr.reshape(10, -1).max(axis=1))
    led.write_csv(tmp_path / "ledger.csv")
    with open(tmp_path / "ledger.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert set(rows[0]) == {"t", "m", "i", "quantity", "value", "rhs", "ratio"}
    names = {r["quantity"] for r in rows}
    assert {"E_op_max", "err_inf_early_1_over_d", "err_inf_early_r_over_d"} <= names


def test_ledger_rhs_scales_with_constant():
    truth, mask = setup(seed=5)
    fam = run_loo_family(truth, mask, t_max=4, members=[0, 1])
    a, b = build_svp_ledger(fam, c_hyp=1.0), build_svp_ledger(fam, c_hyp=3.0)
    for name in QUANTITIES:
        np.testing.assert_allclose(b.rhs[name], 3 * a.rhs[name])
    assert a.rhs["E_op"][0] == pytest.approx(0.25 * truth.sigmar)


def test_degenerate_iterate_detected():
    truth, mask = setup(d=20)
    fam = run_loo_family(truth, mask, t_max=3, members=[0, 1])
    lam = fam.lam.copy()
    lam[2, 1, -1] = -1e-3
    with pytest.raises(DegenerateIterateError):
        build_svp_ledger(replace(fam, lam=lam))


def test_aggregates_decay_at_generous_p():
    good = 0
    for seed in range(10):
        truth, mask = setup(d=60, p=0.6, seed=seed)
        members = [0] + list(np.random.default_rng(seed).choice(60, 8, replace=False) + 1)
        led = build_svp_ledger(run_loo_family(truth, mask, t_max=25, members=members))
        good += all(led.decay(name)[0] < 1 for name in QUANTITIES)
    assert good >= 9


def test_eigenvector_perturbation_rows_hold():
    truth, mask = setup(d=50, p=0.5, seed=6)
    fam = run_loo_family(truth, mask, t_max=8, members=[0, 3, 7])
    rows = clemma1_rows(fam, build_svp_ledger(fam))
    assert rows.shape[0] > 0
    assert np.all(rows[:, 0] <= rows[:, 1] * (1 + 1e-9) + 1e-12)
