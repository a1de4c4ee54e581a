import math

import numpy as np
import pytest

from nslab.discrete import MultiplierSet, Operators
from nslab.noise import covariance_oracle
from nslab.solver import Model, NoiseSource, SimConfig, default_u0, nonlinear_drift, run, run_ensemble, run_reference
from nslab.spectral import UNIT_MEAN, SpectralField, divergence, resize
from nslab.besov import besov_norm

from conftest import random_real_field

SMALL = dict(N=6, eps=0.4, dt=2e-3, T=0.02)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(z=0.4)
    with pytest.raises(ValueError):
        SimConfig(dt=0)
    with pytest.raises(ValueError):
        SimConfig(L=0)
    with pytest.raises(ValueError):
        SimConfig(preset="spline")
    with pytest.raises(ValueError):
        SimConfig(N=4, u0=SpectralField.zeros(5, (3,)))


def test_default_initial_data():
    u = default_u0(8, 0.6)
    assert abs(besov_norm(u, -0.6) - 1.0) < 1e-12
    assert divergence(u).max_abs() < 1e-14
    u.check()


def test_drift_vanishes_at_zero_and_is_divergence_free():
    ops = Operators.approx(4, 0.4, MultiplierSet())
    assert nonlinear_drift(SpectralField.zeros(4, (3,)), ops, np.ones((3, 3, 3))).max_abs() == 0
    u = random_real_field(4, (3,), 1)
    assert divergence(nonlinear_drift(u, ops, np.ones((3, 3, 3)))).max_abs() < 1e-11


def test_drift_by_hand_for_continuum_operators():
    # u = (cos x2, 0, cos x1): (u.grad)u = (0, 0, -cos x2 sin x1), already divergence-free
    N = 3
    c = UNIT_MEAN / 2
    u = SpectralField.zeros(N, (3,))
    u.coeffs[0] = SpectralField.from_modes(N, {(0, 1, 0): c}).coeffs
    u.coeffs[2] = SpectralField.from_modes(N, {(1, 0, 0): c}).coeffs
    d = nonlinear_drift(u, Operators.exact(N))
    # 1/2 cos x2 sin x1 = 1/4 (sin(x1 + x2) + sin(x1 - x2))
    expect = SpectralField.zeros(N, (3,))
    expect.coeffs[2] = SpectralField.from_modes(N, {(1, 1, 0): -0.25j * c, (1, -1, 0): -0.25j * c}).coeffs
    assert (d - expect).max_abs() < 1e-12


def test_symmetric_stencil_has_no_counterterm_effect():
    cfg = SimConfig(a=1.0, b=1.0, **SMALL)
    res = run_ensemble(cfg, [0], ("approx", "approx_off"), keep="final")
    np.testing.assert_array_equal(res.trajectories["approx"][0].final.coeffs,
                                  res.trajectories["approx_off"][0].final.coeffs)


def test_zero_noise_zero_data_stays_zero():
    cfg = SimConfig(noise_scale=0.0, u0=SpectralField.zeros(6, (3,)), **SMALL)
    tr = run(cfg)
    assert tr.final.max_abs() == 0
    assert np.all(tr.norms == 0)


def test_determinism_and_recorded_norms():
    cfg = SimConfig(seed=3, **SMALL)
    a, b = run(cfg), run(cfg)
    np.testing.assert_array_equal(a.final.coeffs, b.final.coeffs)
    np.testing.assert_array_equal(a.norms, b.norms)
    assert len(a.norms) == cfg.n_steps + 1
    assert np.all(np.isfinite(a.norms))
    assert a.stop_reason == "horizon" and a.tau == cfg.T


def test_invariants_every_step():
    cfg = SimConfig(**SMALL)
    res = run_ensemble(cfg, [0, 1], ("approx", "reference"), keep="all")
    for v in ("approx", "reference"):
        for snap in res.trajectories[v][0].snapshots:
            snap.check(tol=1e-12)
            assert divergence(snap).max_abs() < 1e-11


def test_blowup_is_recorded():
    cfg = SimConfig(L=0.5, **SMALL)
    tr = run(cfg)
    assert tr.stop_reason == "blowup"
    assert tr.tau == 0.0                      # the initial datum already has norm 1
    cfg = SimConfig(L=1.02, noise_scale=30.0, **SMALL)
    tr = run(cfg)
    assert tr.stop_reason == "blowup" and 0 < tr.tau <= cfg.T
    k = int(round(tr.tau / cfg.dt))
    assert tr.norms[k] >= cfg.L and np.all(np.isnan(tr.norms[k + 1:]))


def test_tiny_noise_runs_to_horizon():
    tr = run(SimConfig(L=1e6, noise_scale=1e-6, **SMALL))
    assert tr.stop_reason == "horizon"


def test_continuum_preset_matches_reference():
    cfg = SimConfig(preset="continuum", **SMALL)
    a = run(cfg)
    b = run_reference(cfg)
    assert (a.final - b.final).max_abs() < 1e-10
    src = NoiseSource(cfg, [0])
    xi, xib = src.increments(cfg.dt)
    np.testing.assert_array_equal(xi, xib)


def test_shared_increments_between_equations():
    cfg = SimConfig(preset="galerkin", **SMALL)
    xi, xib = NoiseSource(cfg, [5]).increments(cfg.dt)
    np.testing.assert_array_equal(xi, xib)


def test_working_cube_is_exact():
    cfg = SimConfig(N=8, eps=0.4, dt=2e-3, T=0.01)
    m = Model.build(cfg, "approx")
    assert m.N_work == 5
    full = SimConfig(N=5, eps=0.4, dt=2e-3, T=0.01)
    a = run(cfg)
    b = run(full)
    # the extra modes carry nothing, and the rest is identical
    assert np.max(np.abs(resize(a.final, 5).coeffs - resize(b.final, 5).coeffs)) < 1e-14


def test_linear_dynamics_reproduce_ou_law():
    N, eps, T = 2, 0.4, 0.05
    cfg = SimConfig(N=N, eps=eps, dt=0.01, T=T, nonlinear=False, u0=SpectralField.zeros(N, (3,)))
    res = run_ensemble(cfg, range(1500), ("approx",), keep="final")
    X = res.trajectories["approx"]
    k = (1, 1, 0)
    idx = (0,) + tuple(N + q for q in k)
    vals = np.array([np.abs(tr.final.coeffs[idx]) ** 2 for tr in X])
    # central-difference Laplacian symbol at k = (1, 1, 0)
    lam = 2 * 4 * math.sin(eps / 2) ** 2 / eps**2
    assert lam == pytest.approx(Operators.approx(N, eps, cfg.ms).lam[idx[1:]], rel=1e-14)
    stat = covariance_oracle(k, 0, 0, 0, 0, "approx_approx", eps, cfg.ms)
    ref = stat * (1 - math.exp(-2 * lam * T))
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - ref) < 3.5 * se


def test_richardson_ratio_on_fixed_noise_path():
    # one noise path drawn at dt = 1e-3 drives all three runs; the error is
    # measured in l2 over an 8-member ensemble to average out path roughness
    finals = []
    for dt, fine in ((0.004, 4), (0.002, 2), (0.001, 1)):
        res = run_ensemble(SimConfig(N=6, eps=0.4, T=0.04, dt=dt), range(8), ("approx",), keep="final", fine=fine)
        finals.append(np.stack([tr.final.coeffs for tr in res.trajectories["approx"]]))
    ratio = np.linalg.norm(finals[0] - finals[1]) / np.linalg.norm(finals[1] - finals[2])
    assert 1.7 <= ratio <= 2.3


def test_richardson_ratio_without_noise():
    finals = []
    for dt in (0.004, 0.002, 0.001):
        finals.append(run(SimConfig(N=6, eps=0.4, T=0.04, dt=dt, noise_scale=0.0)).final)
    ratio = (finals[0] - finals[1]).max_abs() / (finals[1] - finals[2]).max_abs()
    assert 1.9 <= ratio <= 2.1


def test_discrepancy_bookkeeping():
    cfg = SimConfig(**SMALL)
    res = run_ensemble(cfg, [0, 1], ("approx", "approx_off", "reference"))
    assert res.sup_discrepancy().shape == (2,)
    assert np.all(res.sup_discrepancy() >= res.terminal_discrepancy())
    assert not res.blown_up("approx").any()
    assert res.discrepancy["approx"][0, 0] == 0.0
