"""Observables, tension recovery, and scaling studies."""

from __future__ import annotations

import numpy as np
import pytest

from vefiber import beambasis as bb
from vefiber.diagnostics import (
    Observable,
    center_of_mass,
    decay_rate_fit,
    delta_scaling_study,
    displacement,
    energy,
    h1_norm,
    kappa_bar_midpoints,
    mode_amplitude_series,
    periodicity_residual,
    solve_tension,
    solve_tension_system,
    speed_formula,
    standard_observables,
    velocity_reconstruction_check,
    write_observables_csv,
    write_study_csv,
)
from vefiber.forcing import ForcingSpec, PolynomialProfile
from vefiber.simcore import (
    FilamentState,
    SimParams,
    Trajectory,
    eigenmode_state,
    integrate,
    straight_state,
)
from vefiber.theory import FluidParams

PARABOLA = [1.0, -2.0, 1.0]


def bad_swimmer(amplitude: float = 1.0) -> ForcingSpec:
    return ForcingSpec(f1=PolynomialProfile(PARABOLA),
                       f2=PolynomialProfile(PARABOLA), amplitude=amplitude)


def shifted_trajectory(x0s, times) -> Trajectory:
    states = []
    for t, x0 in zip(times, x0s):
        s = straight_state(8, t=t)
        s.t, s.x0 = t, x0
        states.append(s)
    times = np.asarray(times, dtype=float)
    return Trajectory(times=times, states=states, step_times=times,
                      step_states=None, n_accepted=0, n_rejected=0,
                      nfev=0, njev=0)


# -- COM and displacement ---------------------------------------------------

def test_center_of_mass_straight_rod():
    assert np.allclose(center_of_mass(straight_state(64)), [0.5, 0.0],
                       atol=1e-15)


def test_displacement_interpolates_and_adds():
    traj = shifted_trajectory([0.0, 1.0, 4.0], [0.0, 1.0, 2.0])
    d = displacement(traj, 0.25, 1.5)
    assert d[0] == pytest.approx(2.5 - 0.25, abs=1e-14)
    assert d[1] == pytest.approx(0.0, abs=1e-15)
    total = displacement(traj, 0.0, 2.0)
    parts = displacement(traj, 0.0, 0.8) + displacement(traj, 0.8, 2.0)
    assert np.allclose(total, parts, atol=5e-15)
    with pytest.raises(ValueError):
        displacement(traj, -0.5, 1.0)
    with pytest.raises(ValueError):
        displacement(traj, 0.0, 2.5)


def test_equilibrium_run_does_not_swim():
    p = SimParams(N=16, fluid=FluidParams(mu=1.0, delta=1.0), t_end=0.01)
    traj = integrate(straight_state(16), None, p, sample_times=[0.0, 0.01])
    assert np.array_equal(displacement(traj, 0.0, 0.01), np.zeros(2))


# -- speed formula and energy -----------------------------------------------

def test_speed_formula_free_relaxation_is_tiny():
    # kappa0 = 0, xi = 0: the integrand is an exact derivative of kappa^2/2
    # with clamped ends, so only stencil error survives.
    basis = bb.build_basis(1)
    state = eigenmode_state(100, basis.pairs[0], amplitude=0.1)
    p = SimParams(N=100, fluid=FluidParams(mu=2.0, delta=1.0))
    assert abs(speed_formula(state, ForcingSpec(), p)) < 1e-3


def test_speed_formula_newtonian_is_mu_independent():
    forcing = bad_swimmer(0.5)
    basis = bb.build_basis(2)
    state = eigenmode_state(48, basis.pairs[1], amplitude=0.2)
    state.xi[1:-1] = 0.3
    u_mu0 = speed_formula(state, forcing, SimParams(N=48, fluid=FluidParams()))
    u_frozen = speed_formula(
        state, forcing, SimParams(N=48, fluid=FluidParams(mu=5.0, delta=0.0)))
    assert u_mu0 == u_frozen  # bit-identical Newtonian reduction


def test_energy_values():
    p_newt = SimParams(N=32, fluid=FluidParams())
    assert energy(straight_state(32), p_newt) == 0.0
    basis = bb.build_basis(1)
    state = eigenmode_state(200, basis.pairs[0], amplitude=0.01)
    # ||psi_1|| = 1, so E ~ amplitude^2 / 2 for the pure mode
    assert energy(state, p_newt) == pytest.approx(0.5e-4, rel=2e-2)
    p_ve = SimParams(N=32, fluid=FluidParams(mu=3.0, delta=1.0))
    bent = straight_state(32)
    bent.xi[1:-1] = 0.25
    e = energy(bent, p_ve)
    assert e == pytest.approx(0.5 * 3.0 * 0.25**2 * 30 / 32, rel=1e-12)
    assert energy(bent, p_newt) == 0.0  # memory inert without mu


# -- tension BVP ------------------------------------------------------------

def test_tension_solver_manufactured_convergence():
    gamma = 1.0
    orders = []
    errs = []
    for N in (32, 64, 128):
        s = np.arange(1, N) / N
        tau_star = np.sin(np.pi * s)
        q = np.cos(2.0 * np.pi * s) ** 2
        rhs = -(1.0 + gamma) * np.pi**2 * tau_star - q * tau_star
        tau = solve_tension_system(gamma, q, rhs)
        assert tau[0] == 0.0 and tau[-1] == 0.0
        errs.append(np.max(np.abs(tau[1:-1] - tau_star)))
    orders = [np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])]
    assert all(1.8 <= o <= 2.2 for o in orders)


def test_tension_solver_linearity():
    N = 40
    rng = np.random.default_rng(3)
    q = rng.uniform(0.0, 4.0, N - 1)
    r1 = rng.standard_normal(N - 1)
    r2 = rng.standard_normal(N - 1)
    t1 = solve_tension_system(1.0, q, r1)
    t2 = solve_tension_system(1.0, q, r2)
    t12 = solve_tension_system(1.0, q, 2.0 * r1 - 3.0 * r2)
    assert np.allclose(t12, 2.0 * t1 - 3.0 * t2, atol=1e-12)


def test_solve_tension_equilibrium_and_mu0_xi_independence():
    p = SimParams(N=32, fluid=FluidParams())
    prof = solve_tension(straight_state(32), ForcingSpec(), p)
    assert np.max(np.abs(prof.tau_bar)) == 0.0
    forcing = bad_swimmer(0.3)
    basis = bb.build_basis(1)
    state = eigenmode_state(32, basis.pairs[0], amplitude=0.2)
    other = state.copy()
    other.xi[1:-1] = 0.7
    a = solve_tension(state, forcing, p).tau_bar
    b = solve_tension(other, forcing, p).tau_bar
    assert np.array_equal(a, b)
    # with memory active the xi term matters
    p_ve = SimParams(N=32, fluid=FluidParams(mu=2.0, delta=1.0))
    c = solve_tension(other, forcing, p_ve).tau_bar
    assert np.max(np.abs(c - b)) > 0.0


def test_velocity_reconstruction_refines():
    # simulate briefly so the fields satisfy the clamped-end conditions the
    # integrated-by-parts identity assumes, then refine the grid
    forcing = bad_swimmer(0.1)
    for mu in (0.0, 2.0):
        res = []
        for N in (24, 48, 96):
            p = SimParams(N=N, fluid=FluidParams(mu=mu, delta=1.0),
                          reltol=1e-8, abstol=1e-10)
            traj = integrate(straight_state(N, forcing), forcing, p,
                             t_end=0.012)
            res.append(velocity_reconstruction_check(traj.states[-1],
                                                     forcing, p))
        assert res[1] < 0.5 * res[0]
        assert res[2] < 0.5 * res[1]
        assert res[2] < 0.01
    # equilibrium: both velocities vanish
    p = SimParams(N=24, fluid=FluidParams())
    assert velocity_reconstruction_check(straight_state(24), ForcingSpec(),
                                         p) == 0.0


# -- periodicity, H1 scaling, decay fits ------------------------------------

def test_periodicity_residual_on_synthetic_series():
    T = 0.25
    times = np.arange(13) * (T / 4.0)
    states = []
    for t in times:
        s = straight_state(8)
        s.t = t
        s.theta = s.theta + 0.1 * np.sin(2.0 * np.pi * t / T)
        states.append(s)
    traj = Trajectory(times=times, states=states, step_times=times,
                      step_states=None, n_accepted=0, n_rejected=0,
                      nfev=0, njev=0)
    obs = periodicity_residual(traj, T)
    assert obs.name == "periodicity_residual"
    assert np.max(obs.values) < 1e-12
    with pytest.raises(ValueError):
        periodicity_residual(traj, 2.0)
    misaligned = shifted_trajectory([0.0] * 5,
                                    np.array([0.0, 0.37, 0.9, 1.55, 2.04]))
    with pytest.raises(ValueError):
        periodicity_residual(misaligned, 1.0)


def test_h1_norm_against_continuum():
    N = 400
    x = (np.arange(N) + 0.5) / N
    u = np.sin(np.pi * x)
    expect = np.sqrt(0.5 + 0.5 * np.pi**2)
    assert h1_norm(u, N) == pytest.approx(expect, rel=1e-2)


def test_delta_scaling_skips_newtonian_and_decreases():
    spec = bad_swimmer()
    p0 = SimParams(N=16, fluid=FluidParams(mu=0.0, delta=1.0))
    with pytest.warns(RuntimeWarning):
        assert delta_scaling_study(spec, p0, [0.1]) == []
    p1 = SimParams(N=16, fluid=FluidParams(mu=1.0, delta=1.0))
    rows = delta_scaling_study(spec, p1, [0.05, 0.0125],
                               burn_in=1.0 / 16.0, samples_per_period=9)
    assert len(rows) == 2 and all(v > 0.0 for _, v in rows)
    assert rows[1][1] < rows[0][1]


def test_decay_rate_fit_recovers_exponent():
    t = np.linspace(0.0, 2.0, 41)
    vals = 3.0 * np.exp(-7.0 * t)
    assert decay_rate_fit(t, vals) == pytest.approx(-7.0, rel=1e-10)
    with pytest.raises(ValueError):
        decay_rate_fit(t, np.exp(+0.5 * t))
    with pytest.raises(ValueError):
        decay_rate_fit(t[:4], vals[:4], window=(0.9, 1.0))


def test_mode_amplitude_series_tracks_eigenmode():
    basis = bb.build_basis(1)
    states = [eigenmode_state(100, basis.pairs[0], amplitude=a)
              for a in (1e-3, 5e-4)]
    states[1].t = 1.0
    traj = Trajectory(times=np.array([0.0, 1.0]), states=states,
                      step_times=np.array([0.0, 1.0]), step_states=None,
                      n_accepted=0, n_rejected=0, nfev=0, njev=0)
    amps = mode_amplitude_series(traj, basis.pairs[0])
    assert amps == pytest.approx([1e-3, 5e-4], rel=1e-2)


def test_kappa_bar_midpoints_ends_are_pinned():
    forcing = bad_swimmer(0.4)
    basis = bb.build_basis(1)
    state = eigenmode_state(32, basis.pairs[0], amplitude=0.2)
    kb = kappa_bar_midpoints(state, forcing)
    assert kb[0] == 0.0 and kb[-1] == 0.0
    assert np.max(np.abs(kb)) > 0.0


# -- tidy output ------------------------------------------------------------

def test_observable_validation():
    with pytest.raises(ValueError):
        Observable("x", np.array([0.0, 1.0]), np.array([1.0]))
    with pytest.raises(ValueError):
        Observable("x", np.array([0.0, 0.0]), np.array([1.0, 2.0]))


def test_standard_observables_and_csv(tmp_path):
    forcing = bad_swimmer()
    p = SimParams(N=12, fluid=FluidParams(mu=1.0, delta=1.0), t_end=1e-3)
    traj = integrate(straight_state(12, forcing), forcing, p,
                     sample_times=np.linspace(0.0, 1e-3, 3))
    obs = standard_observables(traj, forcing, p)
    assert [o.name for o in obs] == ["x_com", "y_com", "speed_formula",
                                     "energy"]
    assert np.all(obs[3].values >= 0.0)
    path = tmp_path / "obs.csv"
    write_observables_csv(obs, "run0", path, metadata={"N": 12})
    lines = path.read_text().splitlines()
    assert lines[0] == "# N=12"
    assert lines[1] == "run_id,name,t,value"
    assert len(lines) == 2 + 4 * 3
    assert lines[2].startswith("run0,x_com,0,")

    study = tmp_path / "study.csv"
    write_study_csv([(0.1, 0.5), (0.025, 0.2)], ["delta", "h1"], study,
                    metadata={"kind": "delta-scaling"})
    txt = study.read_text().splitlines()
    assert txt[0] == "# kind=delta-scaling"
    assert txt[1] == "delta,h1"
    assert len(txt) == 4
