"""Spectral response coefficients, averaged speed, eigenvalues, optimizer."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vefiber import beambasis as bb
from vefiber import theory as th
from vefiber.forcing import ForcingSpec, PolynomialProfile, WaveProfile

OMEGA = 32.0 * np.pi

# Frozen oracles, independently evaluated with 40-digit arithmetic.
Q11_ORACLE = 0.099319409180117399  # (m=1, k=1, mu=1, delta=1, omega=32pi)
H11_ORACLE = 0.010467871145027849
NU_MINUS_ORACLE = -1001.6280531991697  # (k=1, delta=1, mu=1)
NU_PLUS_ORACLE = -0.49975028169553225
QN_ORACLE = 0.19304882781127186  # Newtonian (k=1, omega=32pi)
HN_ORACLE = 0.038771043753003395


@pytest.fixture(scope="module")
def basis():
    return bb.build_basis(8)


@pytest.fixture(scope="module")
def basis12():
    return bb.build_basis(12)


def test_fluid_params_validation_and_period():
    p = th.FluidParams(gamma=1.0, mu=1.0, delta=1.0, omega=OMEGA)
    assert p.period * p.omega == pytest.approx(2 * np.pi, rel=1e-15)
    with pytest.raises(ValueError):
        th.FluidParams(mu=-0.1)
    with pytest.raises(ValueError):
        th.FluidParams(omega=0.0)


def test_q_h_newtonian_limits(basis):
    lam1 = basis.lam[0]
    for p in (th.FluidParams(mu=0.0, delta=1.0, omega=OMEGA),
              th.FluidParams(mu=1.0, delta=0.0, omega=OMEGA)):
        Q, H = th.q_h(1, 1, p, basis)
        assert Q == pytest.approx(lam1 * OMEGA / (lam1**2 + OMEGA**2), rel=1e-13)
        assert H == pytest.approx(OMEGA**2 / (lam1**2 + OMEGA**2), rel=1e-13)
    Q, H = th.q_h(1, 1, th.FluidParams(mu=0.0, omega=OMEGA), basis)
    assert Q == pytest.approx(QN_ORACLE, rel=1e-14)
    assert H == pytest.approx(HN_ORACLE, rel=1e-14)


def test_q_h_viscoelastic_oracle(basis):
    p = th.FluidParams(gamma=1.0, mu=1.0, delta=1.0, omega=OMEGA)
    Q, H = th.q_h(1, 1, p, basis)
    assert Q == pytest.approx(Q11_ORACLE, rel=1e-13)
    assert H == pytest.approx(H11_ORACLE, rel=1e-13)


def test_q_h_positivity_bounds(basis):
    for mu in (0.0, 0.5, 3.0):
        for delta in (0.0, 0.01, 1.0, 10.0):
            p = th.FluidParams(mu=mu, delta=delta, omega=OMEGA)
            Q, H = th._qh_arrays(p, basis, M=3)
            assert np.all(Q > 0)
            assert np.all((H > 0) & (H < 1))


def test_w_coeffs_mu_zero_reduces(basis):
    p = th.FluidParams(mu=0.0, delta=2.0, omega=OMEGA)
    Q, H = th.q_h(1, 3, p, basis)
    W1, W2, W3, W4 = th.w_coeffs(1, 2, 3, p, basis)
    assert (W1, W2) == pytest.approx((Q, H), rel=1e-14)
    assert W3 == 0.0 and W4 == 0.0


def test_w_coeffs_large_delta(basis):
    # W2 + W4 -> H_k at leading order in 1/lam_l: the neglected terms carry
    # Q_l ~ omega/lam_l, so probe a high partner mode for a tight bound and
    # a low one for the loose trend
    p = th.FluidParams(mu=1.0, delta=1e6, omega=OMEGA)
    _, H1 = th.q_h(1, 1, p, basis)
    _, W2, _, W4 = th.w_coeffs(1, 8, 1, p, basis)
    assert W2 + W4 == pytest.approx(H1, rel=2e-3)
    _, W2l, _, W4l = th.w_coeffs(1, 2, 1, p, basis)
    assert W2l + W4l == pytest.approx(H1, rel=0.2)


def test_w_coeffs_finite(basis):
    p = th.FluidParams(mu=1.0, delta=1.0, omega=OMEGA)
    for (m, l, k) in [(1, 1, 1), (1, 2, 5), (2, 3, 1)]:
        vals = th.w_coeffs(m, l, k, p, basis)
        assert all(np.isfinite(v) for v in vals)


def test_lin_solution_zero_and_delta_zero(basis):
    K = basis.K
    p = th.FluidParams(mu=1.0, delta=1.0, omega=OMEGA)
    sol = th.lin_periodic_solution(np.zeros(K), np.zeros(K), p, basis)
    for arr in (sol.c, sol.d, sol.e, sol.f):
        assert np.all(arr == 0.0)
    p0 = th.FluidParams(mu=1.0, delta=0.0, omega=OMEGA)
    rng = np.random.default_rng(1)
    sol0 = th.lin_periodic_solution(rng.normal(size=K), rng.normal(size=K), p0, basis)
    assert np.all(sol0.e == 0.0) and np.all(sol0.f == 0.0)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1),
       st.floats(0.0, 8.0),
       # delta: exactly Newtonian or a resolvable relaxation time (subnormal
       # delta has no physical meaning and no floating-point headroom)
       st.one_of(st.just(0.0), st.floats(1e-12, 4.0)),
       st.floats(4.0, 400.0))
def test_lin_solution_residual_property(seed, mu, delta, omega):
    basis = bb.build_basis(6)
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=6), rng.normal(size=6)
    p = th.FluidParams(mu=mu, delta=delta, omega=omega)
    sol = th.lin_periodic_solution(a, b, p, basis)
    assert sol.residual() < 1e-10


def test_lin_solution_multi_harmonic_residual(basis):
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=(3, basis.K)), rng.normal(size=(3, basis.K))
    p = th.FluidParams(mu=2.0, delta=0.3, omega=OMEGA)
    sol = th.lin_periodic_solution(a, b, p, basis)
    assert sol.residual() < 1e-10
    # field reconstruction sanity: kappa_bar at t=0 is sum_k c psi_k
    s = np.linspace(0, 1, 11)
    ref = sum(sol.c[m] @ np.stack([bb.eval_psi(pr, s) for pr in basis.pairs])
              for m in range(3))
    assert np.max(np.abs(sol.kappa_bar(s, 0.0) - ref)) < 1e-12


def test_avg_speed_parity_null_exact(basis):
    p = th.FluidParams(mu=1.0, delta=1.0, omega=OMEGA)
    a = np.zeros(basis.K)
    b = np.zeros(basis.K)
    a[[0, 2, 4]] = [1.0, -0.7, 0.3]  # modes 1, 3, 5: all odd indices
    b[[0, 2]] = [0.5, 2.0]
    assert th.avg_speed_ve(a, b, p, basis) == 0.0
    a2 = np.zeros(basis.K)
    b2 = np.zeros(basis.K)
    a2[[1, 3]] = [1.0, 0.4]  # modes 2, 4
    b2[[3, 5]] = [1.0, -0.2]
    assert th.avg_speed_ve(a2, b2, p, basis) == 0.0


def test_avg_speed_scale_quadratic(basis):
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=basis.K), rng.normal(size=basis.K)
    p = th.FluidParams(mu=1.5, delta=0.2, omega=OMEGA)
    u = th.avg_speed_ve(a, b, p, basis)
    u3 = th.avg_speed_ve(3.0 * a, 3.0 * b, p, basis)
    assert u3 == pytest.approx(9.0 * u, rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 3.0), st.floats(50.0, 150.0))
def test_newtonian_reduction_property(seed, delta, omega):
    basis = bb.build_basis(6)
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=6), rng.normal(size=6)
    p = th.FluidParams(mu=0.0, delta=delta, omega=omega)
    u_ve = th.avg_speed_ve(a, b, p, basis)
    u_nw = th.avg_speed_newtonian(a, b, p, basis)
    assert u_ve == pytest.approx(u_nw, rel=1e-14, abs=1e-300)


def test_avg_speed_f1_equals_f2_collapses_to_symmetric_kernel(basis12):
    """With a = b only the symmetric kernel survives; cross-check the
    contraction against an explicit double loop over the periodic solution."""
    spec = ForcingSpec(f1=PolynomialProfile([1, -2, 1]), f2=PolynomialProfile([1, -2, 1]))
    a, b = spec.mode_coeffs(basis12)
    assert np.max(np.abs(a - b)) < 1e-14
    p = th.FluidParams(gamma=1.0, mu=1.0, delta=1.0, omega=OMEGA)
    u = th.avg_speed_ve(a, b, p, basis12)
    sol = th.lin_periodic_solution(a, b, p, basis12)
    S = basis12.S
    total = 0.0
    for k in range(12):
        for l in range(12):
            total += (0.5 * (a[l] * sol.c[0, k] + b[l] * sol.d[0, k])
                      + 0.5 * p.mu * ((a[l] + sol.c[0, l]) * sol.e[0, k]
                                      + (b[l] + sol.d[0, l]) * sol.f[0, k])) * S[k, l]
    assert u == pytest.approx(-p.gamma * total, rel=1e-12)


def test_bad_swimmer_speed_pattern(basis12):
    """Slowdown with mu at delta = 1, and the known magnitude ballpark."""
    spec = ForcingSpec(f1=PolynomialProfile([1, -2, 1]), f2=PolynomialProfile([1, -2, 1]))
    a, b = spec.mode_coeffs(basis12)
    u_prev = None
    for mu in (0.0, 1.0, 2.0, 4.0, 8.0):
        p = th.FluidParams(gamma=1.0, mu=mu, delta=1.0 if mu else 0.0, omega=OMEGA)
        u = th.avg_speed_ve(a, b, p, basis12)
        assert u < 0
        if u_prev is not None:
            assert abs(u) < abs(u_prev)
        u_prev = u
    p0 = th.FluidParams(gamma=1.0, mu=0.0, delta=0.0, omega=OMEGA)
    assert th.avg_speed_ve(a, b, p0, basis12) == pytest.approx(-0.036, abs=0.004)


def test_matrix_eigenvalues_oracle_and_limits(basis):
    p = th.FluidParams(mu=1.0, delta=1.0, omega=OMEGA)
    nu_m, nu_p = th.matrix_eigenvalues(1, p, basis)
    assert nu_m == pytest.approx(NU_MINUS_ORACLE, rel=1e-12)
    assert nu_p == pytest.approx(NU_PLUS_ORACLE, rel=1e-12)
    # independent companion-matrix oracle
    lam = basis.lam[0]
    roots = np.sort(np.roots([p.delta, 1 + (1 + p.mu) * p.delta * lam, lam]))
    assert nu_m == pytest.approx(roots[0], rel=1e-10)
    assert nu_p == pytest.approx(roots[1], rel=1e-10)
    with pytest.raises(ValueError, match="Newtonian"):
        th.matrix_eigenvalues(1, th.FluidParams(mu=1.0, delta=0.0, omega=OMEGA), basis)


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 8), st.floats(1e-3, 10.0), st.floats(0.0, 8.0))
def test_matrix_eigenvalues_vieta_property(k, delta, mu):
    basis = bb.build_basis(8)
    p = th.FluidParams(mu=mu, delta=delta, omega=OMEGA)
    nu_m, nu_p = th.matrix_eigenvalues(k, p, basis)
    lam = basis.lam[k - 1]
    assert nu_m <= nu_p < 0
    assert nu_m * nu_p == pytest.approx(lam / delta, rel=1e-10)
    assert nu_m + nu_p == pytest.approx(-(1 + (1 + mu) * delta * lam) / delta, rel=1e-10)


def test_matrix_eigenvalues_large_k_limit(basis12):
    p = th.FluidParams(mu=3.0, delta=0.7, omega=OMEGA)
    vals = [p.delta * th.matrix_eigenvalues(k, p, basis12)[1] for k in range(1, 13)]
    target = -1.0 / (1.0 + p.mu)
    gaps = np.abs(np.array(vals) - target)
    assert np.all(np.diff(gaps) < 0)  # monotone approach
    assert gaps[-1] < 5e-4


def test_speed_table_and_quad_form_consistency(basis):
    p = th.FluidParams(gamma=1.3, mu=2.0, delta=0.05, omega=OMEGA)
    table = th.build_speed_table(p, basis, M=2)
    assert table.Q.shape == (2, basis.K)
    assert table.W1.shape == (2, basis.K, basis.K)
    assert np.max(np.abs(table.M_quad - table.M_quad.T)) == 0.0
    W1, W2, W3, W4 = th.w_coeffs(2, 3, 5, p, basis)
    assert table.W1[1, 2, 4] == pytest.approx(W1, rel=1e-14)
    assert table.W4[1, 2, 4] == pytest.approx(W4, rel=1e-14)
    rng = np.random.default_rng(11)
    for _ in range(5):
        x = rng.normal(size=2 * basis.K)
        u_form = x @ table.M_quad @ x
        u_direct = th.avg_speed_ve(x[: basis.K], x[basis.K:], p, basis)
        assert u_form == pytest.approx(u_direct, rel=1e-12)


def test_optimizer_rejects_degenerate_budget():
    p = th.FluidParams(omega=OMEGA)
    with pytest.raises(ValueError, match="degenerate"):
        th.optimize_forcing(1, p)


def test_optimizer_dominates_traveling_wave_and_random(basis12):
    p = th.FluidParams(gamma=1.0, mu=0.0, delta=0.0, omega=OMEGA)
    opt = th.optimize_forcing(12, p, basis=basis12)
    assert opt.converged
    x = np.concatenate([opt.a, opt.b])
    assert np.linalg.norm(x) == pytest.approx(1.0, rel=1e-12)
    # fixed point of the shifted power map
    M = th._quad_form_matrix(p, basis12)
    y = M @ x + np.linalg.norm(M) * x
    y /= np.linalg.norm(y)
    assert np.linalg.norm(y - x) < 1e-10
    # beats the normalized traveling wave projected on the same budget
    wave = ForcingSpec(f1=WaveProfile("sin", 2 * np.pi), f2=WaveProfile("cos", 2 * np.pi))
    aw, bw = wave.mode_coeffs(basis12)
    xw = np.concatenate([aw, bw])
    xw /= np.linalg.norm(xw)
    u_wave = th.avg_speed_ve(xw[:12], xw[12:], p, basis12)
    assert opt.speed >= abs(u_wave) - 1e-12
    # beats seeded random unit vectors
    rng = np.random.default_rng(12345)
    best = -np.inf
    for _ in range(300):
        v = rng.standard_normal(24)
        v /= np.linalg.norm(v)
        best = max(best, th.avg_speed_ve(v[:12], v[12:], p, basis12))
    assert opt.speed >= best - 1e-12
    # eigen-solve oracle: optimum is the leading eigenvalue of M_quad
    assert opt.speed == pytest.approx(np.linalg.eigvalsh(M)[-1], rel=1e-10)


def test_reduced_w_and_gen_speed(basis):
    p = th.FluidParams(mu=1.0, delta=4.0, omega=OMEGA)
    Q1, H1 = th.q_h(1, 1, p, basis)
    r1, r2, r3, r4 = th.reduced_w_coeffs(1, 2, 1, p, basis)
    beta = p.delta * p.omega
    fac2, fac1 = p.mu * beta**2 / (1 + beta**2), p.mu * beta / (1 + beta**2)
    assert r1 == pytest.approx(Q1 * (1 + fac2), rel=1e-13)
    assert r2 == pytest.approx(H1 - fac1 * Q1, rel=1e-13)
    assert r3 == pytest.approx(-fac2 * H1, rel=1e-13)
    assert r4 == pytest.approx(fac1 * H1, rel=1e-13)
    # gen_speed keeps only the Q-antisymmetric part; for a large-delta
    # traveling-wave-like forcing it lands near the full answer
    wave = ForcingSpec(f1=WaveProfile("sin", 2 * np.pi), f2=WaveProfile("cos", 2 * np.pi))
    a, b = wave.mode_coeffs(basis)
    u_full = th.avg_speed_ve(a, b, p, basis)
    u_lead = th.gen_speed_leading(a, b, p, basis)
    assert np.sign(u_full) == np.sign(u_lead)
    assert u_lead == pytest.approx(u_full, rel=0.25)


def test_csv_emission_roundtrip(tmp_path, basis):
    import csv as _csv

    p = th.FluidParams(gamma=1.0, mu=1.0, delta=0.5, omega=OMEGA)
    coeff_path = tmp_path / "coeffs.csv"
    th.write_coefficient_csv(coeff_path, p, basis, M=1)
    with open(coeff_path) as fh:
        header = fh.readline()
        assert header.startswith("#") and "mu=1" in header
        rows = list(_csv.DictReader(fh))
    assert len(rows) == basis.K**2
    row = next(r for r in rows if r["l"] == "2" and r["k"] == "3")
    W1, W2, W3, W4 = th.w_coeffs(1, 2, 3, p, basis)
    assert float(row["W1"]) == pytest.approx(W1, rel=1e-15)
    assert float(row["S_kl"]) == pytest.approx(basis.S[2, 1], rel=1e-15)

    grid_path = tmp_path / "grid.csv"
    rng = np.random.default_rng(2)
    a, b = rng.normal(size=basis.K), rng.normal(size=basis.K)
    th.write_speed_grid_csv(grid_path, a, b, p, basis, mus=[0.0, 1.0], deltas=[0.1, 1.0])
    with open(grid_path) as fh:
        fh.readline()
        rows = list(_csv.DictReader(fh))
    assert len(rows) == 4
    row = next(r for r in rows if r["mu"] == "1" and r["delta"] == "1")
    pg = th.FluidParams(gamma=1.0, mu=1.0, delta=1.0, omega=OMEGA)
    assert float(row["U_ve"]) == pytest.approx(th.avg_speed_ve(a, b, pg, basis), rel=1e-15)
