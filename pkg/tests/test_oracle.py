"""Brute-force Lindblad oracle: model assembly, propagators, rate extraction.

The slow end-to-end comparisons against the analytic route live in the
acceptance suite; here we pin the oracle against *independently solvable*
configurations (decoupled motion, thermal cavity, vacuum Rabi, bad-cavity
decay) and exercise the fitting/convergence plumbing on synthetic data.
"""

from __future__ import annotations

import numpy as np
import pytest

from cavicool.liouville import vec
from cavicool.oracle import (
    ConvergenceRecord,
    LindbladModel,
    Trajectory,
    build_model,
    convergence_sweep,
    default_levels,
    evolve,
    evolve_expm,
    fit_cooling,
    initial_state,
    steady_state,
    thermal_cavity_state,
)
from cavicool.params import SystemParams


def _traj_from_series(p, t, n):
    """Minimal synthetic trajectory carrying only what fit_cooling reads."""
    z = np.zeros_like(t)
    return Trajectory(
        params=p, dims=(2, 2, 2), t=t, n_mot=n, n_cav=z, rho_ee=z,
        trace_dev=z, herm_dev=z, min_eig=z, top_mot=z, top_cav=z,
        substeps=2, richardson_delta=0.0, tilde_gamma_N=1.0,
        final_rho=np.eye(2, dtype=complex) / 2.0)


# ---------------------------------------------------------------------------
# model assembly


def test_generator_is_trace_preserving_and_hermitian():
    p = SystemParams(g=0.3, kappa=2.0, Omega=0.8, Delta=-1.0, Delta_c=1.5,
                     N=0.4, eta=0.1, eta_c=0.05)
    m = build_model(p, 4, 5)
    assert m.trace_residual < 1e-10
    assert m.herm_residual < 1e-12
    assert m.dims == (2, 4, 5)
    assert m.liouville_dim == (2 * 4 * 5) ** 2


def test_generator_spectral_abscissa_nonpositive():
    # small enough for a dense eigensolve of the full generator
    p = SystemParams(g=0.3, kappa=1.5, Omega=0.6, Delta=-1.0, Delta_c=0.5,
                     N=0.2, eta=0.08, eta_c=0.04)
    m = build_model(p, 2, 3)
    lam = np.linalg.eigvals(m.L.toarray())
    assert lam.real.max() <= 1e-9


def test_dimension_cap_and_level_floors():
    p = SystemParams(g=0.2, kappa=2.0, Omega=0.5, Delta=-1.0, Delta_c=0.0)
    with pytest.raises(ValueError, match="exceeds cap"):
        build_model(p, 8, 10, dim_cap=10_000)
    with pytest.raises(ValueError, match="two levels"):
        build_model(p, 1, 5)
    m = build_model(p, 3, 5)
    with pytest.raises(ValueError, match="outside"):
        initial_state(m, n_init=5)


def test_default_levels_track_thermal_occupation():
    cold = SystemParams(g=0.2, kappa=2.0, Omega=0.5, Delta=-1.0, Delta_c=0.0,
                        N=0.0)
    hot = cold.replace(N=2.0)
    nc_cold, nm_cold = default_levels(cold)
    nc_hot, nm_hot = default_levels(hot)
    assert nc_hot >= nc_cold + 6      # ceil(3N) headroom for N=2
    assert nm_hot == nm_cold          # motion floor set by n_init only
    assert nm_cold == 3 + 5 + 1


def test_thermal_cavity_state_mean_and_norm():
    probs = thermal_cavity_state(0.5, 40)
    assert probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert probs @ np.arange(40) == pytest.approx(0.5, abs=1e-9)
    vac = thermal_cavity_state(0.0, 5)
    assert vac[0] == 1.0 and vac[1:].sum() == 0.0


def test_stark_compensation_is_a_pure_sigma_z_shift():
    from cavicool.bloch import bloch_coefficients

    p = SystemParams(g=0.3, kappa=2.0, Omega=0.9, Delta=-1.0, Delta_c=2.0,
                     N=0.1)
    m_comp = build_model(p, 3, 4)
    m_bare = build_model(p, 3, 4, stark_compensated=False)
    shift = bloch_coefficients(p).tilde_delta
    diff = (m_bare.H - m_comp.H).toarray()
    sz = np.kron(np.diag([1.0, -1.0]), np.eye(12))
    assert np.abs(diff + 0.5 * shift * sz).max() < 1e-14


# ---------------------------------------------------------------------------
# independently solvable configurations


def test_motion_is_frozen_without_recoil_couplings():
    # eta = eta_c = 0: the generator block-diagonalizes over motional quanta
    p = SystemParams(g=0.4, kappa=2.0, Omega=1.0, Delta=-1.0, Delta_c=1.0,
                     N=0.3, eta=0.0, eta_c=0.0)
    m = build_model(p, 4, 5)
    t = np.linspace(0.0, 30.0, 40)
    traj = evolve(m, initial_state(m, n_init=3), t, rtol=1e-6)
    assert np.abs(traj.n_mot - 3.0).max() < 1e-9
    fit = fit_cooling(traj)
    assert fit.W == 0.0
    assert "no-dynamics" in fit.flags
    assert fit.n0 == pytest.approx(3.0, abs=1e-9)


def test_bare_cavity_thermalizes_to_mean_occupation():
    p = SystemParams(g=0.0, kappa=1.0, Omega=0.0, Delta=-1.0, Delta_c=0.0,
                     N=0.5)
    m = build_model(p, 16, 2)
    # start from |g> (x) cavity vacuum (x) |0>, not the default thermal stack
    rho0 = np.zeros((m.hilbert_dim, m.hilbert_dim), dtype=complex)
    rho0[16 * 2, 16 * 2] = 1.0
    t = np.linspace(0.0, 10.0 / p.kappa, 60)
    traj = evolve_expm(m, rho0, t)
    # occupation relaxes at 2*kappa from vacuum toward the bath mean
    assert traj.n_cav[0] == pytest.approx(0.0, abs=1e-12)
    assert abs(traj.n_cav[-1] - 0.5) < 1e-6
    assert not traj.flags


def test_vacuum_rabi_oscillation_period():
    # kappa ~ 0: |e,0> <-> |g,1> exchange at frequency 2g, period pi/g
    p = SystemParams(g=0.5, kappa=1e-12, Omega=0.0, Delta=0.0, Delta_c=0.0,
                     N=0.0, eta=0.0, eta_c=0.0)
    m = build_model(p, 2, 2)
    period = np.pi / p.g
    t = np.linspace(0.0, period, 81)
    traj = evolve_expm(m, initial_state(m, n_init=0, tls="e"), t,
                       check_physical=False)
    assert np.abs(traj.rho_ee - np.cos(p.g * t) ** 2).max() < 1e-7
    assert traj.rho_ee[-1] == pytest.approx(1.0, abs=1e-9)
    assert traj.n_cav[40] == pytest.approx(1.0, abs=1e-6)   # half period


def test_bad_cavity_excited_state_decay_rate():
    # resonant bad cavity: rho_ee decays at 2 g^2 / kappa
    p = SystemParams(g=0.05, kappa=2.0, Omega=0.0, Delta=0.0, Delta_c=0.0,
                     N=0.0, eta=0.0, eta_c=0.0)
    gamma = 2.0 * p.g ** 2 / p.kappa
    m = build_model(p, 3, 2)
    t = np.linspace(0.0, 2.0 / gamma, 100)
    traj = evolve(m, initial_state(m, n_init=0, tls="e"), t,
                  rtol=1e-9, atol=1e-12, check_physical=False)
    i, j = 20, 80
    rate = -np.log(traj.rho_ee[j] / traj.rho_ee[i]) / (t[j] - t[i])
    assert rate == pytest.approx(gamma, rel=0.05)


def test_trace_and_positivity_along_driven_trajectory():
    p = SystemParams(g=0.5, kappa=5.0, Omega=0.8, Delta=-1.0, Delta_c=0.0,
                     N=0.0, eta=0.1, eta_c=0.05)
    m = build_model(p, 4, 8)
    t = np.linspace(0.0, 100.0 / p.kappa, 60)
    traj = evolve(m, initial_state(m, n_init=2), t, rtol=1e-6)
    assert traj.trace_dev.max() < 1e-8
    assert traj.herm_dev.max() < 1e-10
    assert traj.min_eig.min() > -1e-8
    purity = np.trace(traj.final_rho @ traj.final_rho).real
    assert purity <= 1.0 + 1e-8
    assert not traj.flags


def test_bdf2_agrees_with_krylov_propagator():
    p = SystemParams(g=0.4, kappa=2.0, Omega=0.7, Delta=-1.0, Delta_c=0.8,
                     N=0.3, eta=0.1, eta_c=0.05)
    m = build_model(p, 3, 5)
    rho0 = initial_state(m, n_init=2)
    t = np.linspace(0.0, 10.0, 41)
    # second-order stepping over the oscillatory transient: 1e-5 agreement is
    # what the refinement target buys without thousands of substeps
    a = evolve(m, rho0, t, rtol=3e-6, atol=1e-9, check_physical=False)
    b = evolve_expm(m, rho0, t, check_physical=False)
    assert np.abs(a.n_mot - b.n_mot).max() < 1e-5
    assert np.abs(a.n_cav - b.n_cav).max() < 1e-5
    assert np.abs(a.rho_ee - b.rho_ee).max() < 1e-5
    assert a.method == "bdf2" and b.method == "expm"


def test_truncation_health_flag_fires_at_ladder_top():
    p = SystemParams(g=0.3, kappa=2.0, Omega=0.5, Delta=-1.0, Delta_c=0.0,
                     N=0.0)
    m = build_model(p, 2, 5)
    t = np.linspace(0.0, 5.0, 10)
    traj = evolve(m, initial_state(m, n_init=4), t, rtol=1e-6)
    assert "truncation-unhealthy" in traj.flags
    assert traj.top_mot.max() > 0.9


def test_evolve_rejects_bad_grids_and_states():
    p = SystemParams(g=0.3, kappa=2.0, Omega=0.5, Delta=-1.0, Delta_c=0.0)
    m = build_model(p, 2, 3)
    rho0 = initial_state(m, n_init=1)
    with pytest.raises(ValueError, match="uniform"):
        evolve(m, rho0, np.array([0.0, 1.0, 3.0]))
    with pytest.raises(ValueError, match="two time points"):
        evolve(m, rho0, np.array([0.0]))
    with pytest.raises(ValueError, match="dimension"):
        evolve(m, np.eye(5, dtype=complex) / 5.0, np.linspace(0, 1, 5))


# ---------------------------------------------------------------------------
# rate extraction


def test_fit_recovers_synthetic_exponential():
    p = SystemParams(g=0.2, kappa=2.0, Omega=0.5, Delta=-1.0, Delta_c=0.0)
    t = np.linspace(0.0, 4000.0, 200)
    w_true, n0_true = 1.7e-3, 0.042
    n = n0_true + (3.0 - n0_true) * np.exp(-w_true * t)
    fit = fit_cooling(_traj_from_series(p, t, n), t0=0.0)
    assert fit.W == pytest.approx(w_true, rel=1e-6)
    assert fit.n0 == pytest.approx(n0_true, rel=1e-6)
    assert fit.residual_rms < 1e-9
    assert "non-exponential" not in fit.flags


def test_fit_flags_non_exponential_series():
    p = SystemParams(g=0.2, kappa=2.0, Omega=0.5, Delta=-1.0, Delta_c=0.0)
    t = np.linspace(0.0, 4000.0, 200)
    n = 0.05 + 2.95 * np.exp(-1.5e-3 * t)
    rng = np.random.default_rng(7)
    n_noisy = n + 0.01 * np.ptp(n) * rng.standard_normal(n.size)
    fit = fit_cooling(_traj_from_series(p, t, n_noisy), t0=0.0)
    assert "non-exponential" in fit.flags
    assert fit.residual_rms > 1e-3 * fit.swing


def test_fit_handles_heating_series():
    # growing exponential: W < 0 is a first-class result, not an error
    p = SystemParams(g=0.2, kappa=2.0, Omega=0.5, Delta=1.0, Delta_c=0.0)
    t = np.linspace(0.0, 2000.0, 150)
    w_true = -4.0e-4
    n = -0.5 + 3.5 * np.exp(-w_true * t)
    fit = fit_cooling(_traj_from_series(p, t, n), t0=0.0, w_hint=w_true)
    assert fit.W == pytest.approx(w_true, rel=1e-6)
    assert fit.W < 0.0


def test_blue_sideband_evolution_heats():
    # mirror of the red-sideband cooling point: fitted W flips sign with Delta
    from cavicool.cooling import rates_from_spectrum

    p = SystemParams(g=0.5, kappa=5.0, Omega=0.1, Delta=1.0, Delta_c=0.0,
                     N=0.0, eta=0.05, eta_c=0.0)
    pred = rates_from_spectrum(p)
    assert pred.W < 0.0
    m = build_model(p, 3, 12)
    t = np.linspace(0.0, 600.0, 50)
    traj = evolve(m, initial_state(m, n_init=3), t, rtol=1e-6, atol=1e-9)
    assert traj.n_mot[-1] > traj.n_mot[0]
    fit = fit_cooling(traj, w_hint=pred.W)
    assert fit.W < 0.0
    assert "truncation-unhealthy" not in traj.flags


def test_equilibrium_cavity_reservoir_gives_vanishing_rate():
    # undriven gradient coupling to a thermal cavity: pure diffusion, so the
    # fitted exponential rate must vanish against the internal linewidth scale
    p = SystemParams(g=0.4, kappa=2.0, Omega=0.0, Delta=-1.0, Delta_c=1.0,
                     N=0.1, eta=0.05, eta_c=0.05)
    gamma = 2.0 * p.g ** 2 * p.kappa / (p.kappa ** 2 + p.Delta_c ** 2)
    m = build_model(p, 7, 10, dim_cap=25_000)
    t = np.linspace(0.0, 400.0, 60)
    traj = evolve(m, initial_state(m, n_init=3), t, rtol=1e-7, atol=1e-10)
    fit = fit_cooling(traj)
    assert abs(fit.W) < 1e-3 * gamma
    assert traj.n_mot[-1] >= traj.n_mot[0]   # diffusion only adds quanta


# ---------------------------------------------------------------------------
# steady states and truncation sweeps


def test_steady_state_is_physical_and_stationary():
    p = SystemParams(g=0.3, kappa=2.0, Omega=0.8, Delta=-1.0, Delta_c=1.0,
                     N=0.2, eta=0.05, eta_c=0.05)
    m = build_model(p, 3, 6)
    rho = steady_state(m)
    assert np.trace(rho).real == pytest.approx(1.0, abs=1e-12)
    assert np.abs(rho - rho.conj().T).max() < 1e-14
    assert np.linalg.eigvalsh(rho).min() > -1e-12
    scale = np.abs(m.L.data).max()
    assert np.linalg.norm(m.L @ vec(rho)) < 1e-8 * scale


def test_steady_state_dimension_guard():
    p = SystemParams(g=0.3, kappa=2.0, Omega=0.8, Delta=-1.0, Delta_c=1.0)
    m = build_model(p, 3, 6)
    with pytest.raises(ValueError, match="dimension"):
        steady_state(m, dim_cap=100)


def test_sweep_without_recoil_converges_at_minimal_dims():
    p = SystemParams(g=0.3, kappa=2.0, Omega=0.6, Delta=-1.0, Delta_c=0.5,
                     N=0.0, eta=0.0, eta_c=0.0)
    rec = convergence_sweep(p, levels=[(2, 4), (2, 5)], n_init=2,
                            t_final=50.0, n_samples=30, rtol=1e-6)
    assert rec.converged
    assert rec.W == 0.0
    assert rec.n0 == pytest.approx(2.0, abs=1e-9)
    assert all(e.n0_route == "fit" for e in rec.entries)
    assert len(rec.deltas) == len(rec.entries) - 1


def test_sweep_record_structure_on_fast_cooling_point():
    p = SystemParams(g=0.2, kappa=2.0, Omega=1.2, Delta=-1.0, Delta_c=1.0,
                     N=0.0, eta=0.25, eta_c=0.0)
    rec = convergence_sweep(p, levels=[(3, 9), (4, 11)], t_final=250.0,
                            n_samples=40, rtol=1e-6, atol=1e-9, rel_tol=0.05)
    assert isinstance(rec, ConvergenceRecord)
    assert rec.converged
    assert rec.W > 0.0
    assert rec.spectral_W is not None and rec.spectral_W > 0.0
    assert abs(rec.W - rec.spectral_W) / rec.spectral_W < 0.5
    last = rec.entries[-1]
    assert last.n0_route == "nullspace"
    assert last.top_mot_max < 1e-6 and last.top_cav_max < 1e-6
    assert not last.flags
