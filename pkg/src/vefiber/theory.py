"""Closed-form spectral predictions for the driven viscoelastic filament.

Linearizing the filament dynamics about a straight shape and expanding the
curvature deviation kappa_bar = theta_s - kappa0 and the memory difference
z = kappa_bar - xi in the clamped beam eigenbasis gives, per temporal
harmonic m and spatial mode k, a 2x2 linear response with the rational
coefficients Q_{m,k}, H_{m,k}.  Averaging the leading-order speed over one
period yields a quadratic form in the forcing coefficients (a, b); this
module evaluates the response, the averaged speed, the per-mode relaxation
eigenvalues, and optimizes the forcing over a fixed mode budget.

Conventions.  All temporal expansions here are sin-positive,

    kappa0(s, t) = sum_k (a_k cos(m omega t) + b_k sin(m omega t)) psi_k(s),

matching ForcingSpec.mode_coeffs (a from the cos profile F1, b from the sin
profile F2).  The classical W-coefficient tables (w_coeffs) are reported in
their familiar printed form; the averaged speed itself is assembled directly
from the periodic solution (c, d, e, f), which is the form that satisfies
the frequency-domain equations to machine precision and matches the
nonlinear simulator (the two assemblies differ in H-order cross terms).
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .beambasis import EigenBasis, build_basis
from .forcing import DEFAULT_OMEGA


@dataclass(frozen=True)
class FluidParams:
    """Fluid / rheology parameters of the swimming problem.

    gamma: RFT drag anisotropy factor (about 1 for a very slender filament);
    mu: polymer-to-solvent viscosity ratio; delta: polymer relaxation time;
    omega: angular forcing frequency.  mu = 0 or delta = 0 is the Newtonian
    limit.
    """

    gamma: float = 1.0
    mu: float = 0.0
    delta: float = 0.0
    omega: float = DEFAULT_OMEGA

    def __post_init__(self):
        if self.gamma < 0 or self.mu < 0 or self.delta < 0:
            raise ValueError("gamma, mu, delta must be nonnegative")
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")

    @property
    def period(self) -> float:
        """Forcing period T = 2 pi / omega."""
        return 2.0 * np.pi / self.omega


def _as_coeff_2d(a) -> np.ndarray:
    """Coefficient arrays are (K,) for m = 1 or (M, K) for M harmonics."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        return a[None, :]
    if a.ndim == 2:
        return a
    raise ValueError(f"coefficients must be 1-d or 2-d, got shape {a.shape}")


def _qh_arrays(p: FluidParams, basis: EigenBasis, M: int = 1):
    """(Q, H) with shape (M, K); row m-1 is temporal harmonic m."""
    lam = basis.lam[None, :]
    w = p.omega * np.arange(1, M + 1, dtype=float)[:, None]
    if p.mu == 0.0:
        # the common (1 + beta^2) factor cancels algebraically; the reduced
        # form keeps the Newtonian identity exact in floating point as well
        den = lam**2 + w**2
        return lam * w / den, w**2 / den
    beta = p.delta * w
    num_q = lam * w * (1.0 + (1.0 + p.mu) * beta**2)
    num_h = w**2 * (p.mu * p.delta * lam + 1.0 + beta**2)
    den = lam**2 * (1.0 + (1.0 + p.mu) ** 2 * beta**2) + w**2 * (
        2.0 * p.mu * p.delta * lam + 1.0 + beta**2
    )
    return num_q / den, num_h / den


def q_h(m: int, k: int, p: FluidParams, basis: EigenBasis) -> tuple[float, float]:
    """Response coefficients (Q_{m,k}, H_{m,k}) for harmonic m, mode k."""
    if m < 1 or k < 1:
        raise ValueError("temporal and spatial indices start at 1")
    Q, H = _qh_arrays(p, basis, M=m)
    return float(Q[m - 1, k - 1]), float(H[m - 1, k - 1])


def w_coeffs(m: int, l: int, k: int, p: FluidParams, basis: EigenBasis):
    """Classical averaged-speed coefficients (W1, W2, W3, W4)_{m, l, k}.

    Printed-table form built from Q, H at indices k and l.  Note: the
    symmetric-in-(a,b) content of these tables carries known sign slips in
    H-order cross terms; avg_speed_ve therefore does not sum them (see
    module docstring), but they remain the standard reference table.
    """
    if m < 1 or l < 1 or k < 1:
        raise ValueError("indices start at 1")
    Q, H = _qh_arrays(p, basis, M=m)
    Qk, Hk = Q[m - 1, k - 1], H[m - 1, k - 1]
    Ql, Hl = Q[m - 1, l - 1], H[m - 1, l - 1]
    w = p.omega * m
    beta = p.delta * w
    P = beta / (1.0 + beta**2)
    mP = p.mu * P
    W1 = Qk - mP * (-beta * (1.0 - Hl) * Qk + Ql * Qk)
    W2 = Hk - mP * (beta * Ql * Qk + (1.0 - Hl) * Qk)
    W3 = -mP * (beta * (1.0 - Hl) * Hk + Ql * Hk)
    W4 = -mP * (beta * Ql * Hk - (1.0 - Hl) * Hk)
    return W1, W2, W3, W4


def reduced_w_coeffs(m: int, l: int, k: int, p: FluidParams, basis: EigenBasis):
    """Large-lambda_k reduction of the W tables (reporting helper only)."""
    if m < 1 or l < 1 or k < 1:
        raise ValueError("indices start at 1")
    Q, H = _qh_arrays(p, basis, M=m)
    Qk, Hk = Q[m - 1, k - 1], H[m - 1, k - 1]
    w = p.omega * m
    b2 = (p.delta * w) ** 2
    r2 = p.mu * b2 / (1.0 + b2)
    r1 = p.mu * (p.delta * w) / (1.0 + b2)
    return Qk + r2 * Qk, Hk - r1 * Qk, -r2 * Hk, r1 * Hk


@dataclass(frozen=True)
class LinSolution:
    """Periodic solution of the linearized dynamics in mode space.

    kappa_bar = sum_{m,k} (c cos + d sin) psi_k and the memory difference
    z = kappa_bar - xi = sum (e cos + f sin) psi_k, with all arrays (M, K).
    """

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    e: np.ndarray
    f: np.ndarray
    p: FluidParams
    basis: EigenBasis = field(repr=False)

    def _field(self, coef_cos, coef_sin, s, t: float):
        s = np.asarray(s, dtype=float)
        M = self.a.shape[0]
        from .beambasis import eval_psi

        psi = np.stack([eval_psi(pr, s) for pr in self.basis.pairs])  # (K, ...)
        out = np.zeros_like(s, dtype=float)
        for m in range(1, M + 1):
            wt = m * self.p.omega * t
            mix = coef_cos[m - 1] * np.cos(wt) + coef_sin[m - 1] * np.sin(wt)
            out = out + np.tensordot(mix, psi, axes=(0, 0))
        return out

    def kappa_bar(self, s, t: float):
        """Curvature deviation kappa_bar^lin(s, t)."""
        return self._field(self.c, self.d, s, t)

    def z_field(self, s, t: float):
        """Memory difference z^lin(s, t) = kappa_bar - xi."""
        return self._field(self.e, self.f, s, t)

    def residual(self) -> float:
        """Max relative residual of the frequency-domain equations.

        Substitutes (c, d, e, f) into the four (cos, sin) x (kappa_bar, z)
        component equations; each residual is scaled by the magnitude of
        its largest term.
        """
        p, lam = self.p, self.basis.lam[None, :]
        M = self.a.shape[0]
        w = p.omega * np.arange(1, M + 1, dtype=float)[:, None]
        a, b, c, d, e, f = self.a, self.b, self.c, self.d, self.e, self.f
        mu = p.mu
        # kappa_bar_t = -lam kappa_bar - mu lam z - kappa0_t, per (cos, sin)
        r1 = d * w + lam * c + mu * lam * e + b * w
        s1 = np.abs(d * w) + lam * np.abs(c) + mu * lam * np.abs(e) + np.abs(b) * w
        r2 = -c * w + lam * d + mu * lam * f - a * w
        s2 = np.abs(c * w) + lam * np.abs(d) + mu * lam * np.abs(f) + np.abs(a) * w
        res = max(np.max(np.abs(r1) / np.maximum(s1, 1e-300)),
                  np.max(np.abs(r2) / np.maximum(s2, 1e-300)))
        if p.delta > 0:
            r3 = f * w - d * w + e / p.delta
            s3 = np.abs(f * w) + np.abs(d * w) + np.abs(e) / p.delta
            r4 = -e * w + c * w + f / p.delta
            s4 = np.abs(e * w) + np.abs(c * w) + np.abs(f) / p.delta
            res = max(res, np.max(np.abs(r3) / np.maximum(s3, 1e-300)),
                      np.max(np.abs(r4) / np.maximum(s4, 1e-300)))
        return float(res)


def lin_periodic_solution(a, b, p: FluidParams, basis: EigenBasis) -> LinSolution:
    """Periodic mode coefficients (c, d, e, f) driven by forcing (a, b).

    Componentwise per harmonic m and mode k (beta = delta omega m,
    P = beta/(1+beta^2)):

        c = -H a - Q b,                 d = Q a - H b,
        e = P[(Q - beta H) a - (beta Q + H) b],
        f = P[(beta Q + H) a + (Q - beta H) b].
    """
    a2, b2 = _as_coeff_2d(a), _as_coeff_2d(b)
    if a2.shape != b2.shape:
        raise ValueError(f"a and b must share a shape, got {a2.shape} vs {b2.shape}")
    if a2.shape[1] != basis.K:
        raise ValueError(f"coefficient length {a2.shape[1]} != basis K {basis.K}")
    M = a2.shape[0]
    Q, H = _qh_arrays(p, basis, M=M)
    w = p.omega * np.arange(1, M + 1, dtype=float)[:, None]
    beta = p.delta * w
    P = beta / (1.0 + beta**2)
    c = -H * a2 - Q * b2
    d = Q * a2 - H * b2
    e = P * ((Q - beta * H) * a2 - (beta * Q + H) * b2)
    f = P * ((beta * Q + H) * a2 + (Q - beta * H) * b2)
    return LinSolution(a=a2, b=b2, c=c, d=d, e=e, f=f, p=p, basis=basis)


def _speed_from_solution(sol: LinSolution) -> float:
    """<U> = -gamma sum_m [ <(kappa0)_s kappa_bar> + mu <z (kappa_bar+kappa0)_s> ]."""
    p, S = sol.p, sol.basis.S
    St = S.T
    total = 0.0
    M = sol.a.shape[0]
    for m in range(M):
        a, b, c, d = sol.a[m], sol.b[m], sol.c[m], sol.d[m]
        e, f = sol.e[m], sol.f[m]
        term1 = a @ (St @ c) + b @ (St @ d)
        term2 = (a + c) @ (St @ e) + (b + d) @ (St @ f)
        total += term1 + p.mu * term2
    return float(-0.5 * p.gamma * total)


def avg_speed_ve(a, b, p: FluidParams, basis: EigenBasis) -> float:
    """Time-averaged swimming speed <U> of the viscoelastic model, O(eps^2)."""
    return _speed_from_solution(lin_periodic_solution(a, b, p, basis))


def avg_speed_newtonian(a, b, p: FluidParams, basis: EigenBasis) -> float:
    """Newtonian averaged speed (mu = 0 response) on the same coefficients."""
    a2, b2 = _as_coeff_2d(a), _as_coeff_2d(b)
    if a2.shape != b2.shape:
        raise ValueError(f"a and b must share a shape, got {a2.shape} vs {b2.shape}")
    if a2.shape[1] != basis.K:
        raise ValueError(f"coefficient length {a2.shape[1]} != basis K {basis.K}")
    lam = basis.lam[None, :]
    M = a2.shape[0]
    w = p.omega * np.arange(1, M + 1, dtype=float)[:, None]
    Q = lam * w / (lam**2 + w**2)
    H = w**2 / (lam**2 + w**2)
    St = basis.S.T
    total = 0.0
    for m in range(M):
        c = -H[m] * a2[m] - Q[m] * b2[m]
        d = Q[m] * a2[m] - H[m] * b2[m]
        total += a2[m] @ (St @ c) + b2[m] @ (St @ d)
    return float(-0.5 * p.gamma * total)


def gen_speed_leading(a, b, p: FluidParams, basis: EigenBasis) -> float:
    """Large-delta leading-order speed estimate (reporting helper).

    Keeps only the Q-weighted antisymmetric coupling with the viscoelastic
    enhancement factor (1 + (1+mu) beta^2)/(1 + beta^2); subdominant for
    H-order terms, useful as a quick design heuristic.
    """
    a2, b2 = _as_coeff_2d(a), _as_coeff_2d(b)
    S = basis.S
    M = a2.shape[0]
    Qve, _ = _qh_arrays(p, basis, M=M)
    total = 0.0
    for m in range(1, M + 1):
        w = p.omega * m
        b2m = (p.delta * w) ** 2
        factor = (1.0 + (1.0 + p.mu) * b2m) / (1.0 + b2m)
        am, bm = a2[m - 1], b2[m - 1]
        anti = np.outer(am, bm)  # anti[l, k] = a_l b_k
        total += factor * np.einsum("k,lk,kl->", Qve[m - 1], anti - anti.T, S)
    return float(0.5 * p.gamma * total)


def matrix_eigenvalues(k: int, p: FluidParams, basis: EigenBasis) -> tuple[float, float]:
    """Per-mode relaxation eigenvalues (nu_k^-, nu_k^+), both negative.

    Roots of delta nu^2 + (1 + (1+mu) delta lam_k) nu + lam_k = 0.  The
    Newtonian limit delta = 0 degenerates (single root -lam_k(1+mu)) and is
    signalled instead of silently returned.
    """
    if k < 1:
        raise ValueError("mode index starts at 1")
    if p.delta == 0:
        raise ValueError(
            "delta = 0 is the Newtonian limit: the memory mode degenerates; "
            "use -lam_k (1+mu) for the single relaxation rate"
        )
    lam = basis.lam[k - 1]
    bq = 1.0 + (1.0 + p.mu) * p.delta * lam
    disc = bq * bq - 4.0 * p.delta * lam
    root = np.sqrt(max(disc, 0.0))
    qq = -0.5 * (bq + root)  # stable quadratic formula: bq > 0
    nu_minus = qq / p.delta
    nu_plus = lam / qq
    return float(nu_minus), float(nu_plus)


@dataclass(frozen=True)
class SpeedTable:
    """Response and speed-coefficient tables over a mode basis.

    Q, H: (M, K); W1..W4: (M, K, K) with [m-1, l-1, k-1] ordering; S: the
    basis overlap matrix; M_quad: 2K x 2K symmetric matrix with
    <U>(a, b) = x^T M_quad x for x = (a, b) stacked, harmonic m = 1,
    assembled from the machine-checked periodic solution so that the
    optimizer maximizes the same speed avg_speed_ve reports.
    """

    p: FluidParams
    Q: np.ndarray
    H: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    W3: np.ndarray
    W4: np.ndarray
    S: np.ndarray
    M_quad: np.ndarray


def _quad_form_matrix(p: FluidParams, basis: EigenBasis) -> np.ndarray:
    """Symmetric 2K x 2K matrix of the m = 1 speed quadratic form."""
    K = basis.K
    Q, H = _qh_arrays(p, basis, M=1)
    Q, H = np.diag(Q[0]), np.diag(H[0])
    w = p.omega
    beta = p.delta * w
    P = beta / (1.0 + beta**2)
    eye = np.eye(K)
    # response maps: c = C1 a + C2 b, etc.
    C1, C2 = -H, -Q
    D1, D2 = Q, -H
    E1, E2 = P * (Q - beta * H), -P * (beta * Q + H)
    F1, F2 = P * (beta * Q + H), P * (Q - beta * H)
    St = basis.S.T
    # <U> = -(gamma/2) [a' St c + b' St d + mu((a+c)' St e + (b+d)' St f)]
    B_aa = St @ C1 + p.mu * (eye + C1).T @ St @ E1
    B_ab = St @ C2 + p.mu * (eye + C1).T @ St @ E2
    B_ba = p.mu * C2.T @ St @ E1
    B_bb = p.mu * C2.T @ St @ E2
    B_aa += p.mu * D1.T @ St @ F1
    B_ab += p.mu * D1.T @ St @ F2
    B_ba += St @ D1 + p.mu * (eye + D2).T @ St @ F1
    B_bb += St @ D2 + p.mu * (eye + D2).T @ St @ F2
    B = np.block([[B_aa, B_ab], [B_ba, B_bb]])
    B *= -0.5 * p.gamma
    return 0.5 * (B + B.T)


def build_speed_table(p: FluidParams, basis: EigenBasis, M: int = 1) -> SpeedTable:
    """Assemble the full coefficient table for M temporal harmonics."""
    K = basis.K
    Q, H = _qh_arrays(p, basis, M=M)
    W = np.empty((4, M, K, K))
    for m in range(1, M + 1):
        w = p.omega * m
        beta = p.delta * w
        P = beta / (1.0 + beta**2)
        mP = p.mu * P
        Qk, Hk = Q[m - 1][None, :], H[m - 1][None, :]
        Ql, Hl = Q[m - 1][:, None], H[m - 1][:, None]
        W[0, m - 1] = Qk - mP * (-beta * (1.0 - Hl) * Qk + Ql * Qk)
        W[1, m - 1] = Hk - mP * (beta * Ql * Qk + (1.0 - Hl) * Qk)
        W[2, m - 1] = -mP * (beta * (1.0 - Hl) * Hk + Ql * Hk)
        W[3, m - 1] = -mP * (beta * Ql * Hk - (1.0 - Hl) * Hk)
    return SpeedTable(p=p, Q=Q, H=H, W1=W[0], W2=W[1], W3=W[2], W4=W[3],
                      S=basis.S.copy(), M_quad=_quad_form_matrix(p, basis))


@dataclass(frozen=True)
class OptimalForcing:
    """Unit-norm forcing coefficients maximizing the averaged speed."""

    a: np.ndarray
    b: np.ndarray
    speed: float
    iterations: int
    converged: bool


def optimize_forcing(K: int, p: FluidParams, basis: EigenBasis | None = None,
                     tol: float = 1e-13, max_iter: int = 100_000,
                     seed: int = 0) -> OptimalForcing:
    """Maximize <U>(a, b) over ||(a, b)||_2 = 1 with K spatial modes.

    Power iteration on the shifted symmetric form matrix (shift by its
    Frobenius norm makes it positive definite, so the iteration converges
    to the leading eigenvector of M_quad).  K < 2 cannot swim at all --
    every same-parity overlap vanishes -- and is rejected.
    """
    if K < 2:
        raise ValueError(
            f"degenerate mode budget K={K}: a single beam mode cannot swim "
            "(all same-parity overlaps vanish)"
        )
    if basis is None:
        basis = build_basis(K)
    if basis.K < K:
        raise ValueError(f"basis holds {basis.K} modes < requested K={K}")
    if basis.K > K:
        basis = build_basis(K, n_nodes=len(basis.nodes))
    M = _quad_form_matrix(p, basis)
    shift = float(np.linalg.norm(M))  # Frobenius >= spectral radius
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(2 * K)
    v /= np.linalg.norm(v)
    n_iter = 0
    converged = False
    for n_iter in range(1, max_iter + 1):
        v_new = M @ v + shift * v
        v_new /= np.linalg.norm(v_new)
        if np.linalg.norm(v_new - v) < tol:
            v = v_new
            converged = True
            break
        v = v_new
    if not converged:
        warnings.warn("power iteration did not reach tolerance; "
                      "returning the current iterate", stacklevel=2)
    nz = np.flatnonzero(np.abs(v) > 1e-8)
    if len(nz) and v[nz[0]] < 0:
        v = -v  # deterministic orientation
    speed = float(v @ M @ v)
    return OptimalForcing(a=v[:K].copy(), b=v[K:].copy(), speed=speed,
                          iterations=n_iter, converged=converged)


# ---------------------------------------------------------------------------
# CSV emission


def write_coefficient_csv(path, p: FluidParams, basis: EigenBasis, M: int = 1) -> None:
    """Write the (l, k)-indexed coefficient tables for harmonics 1..M."""
    table = build_speed_table(p, basis, M=M)
    with open(path, "w", newline="") as fh:
        fh.write(f"# gamma={p.gamma:.17g} mu={p.mu:.17g} delta={p.delta:.17g} "
                 f"omega={p.omega:.17g} K={basis.K} M={M}\n")
        writer = csv.writer(fh)
        writer.writerow(["m", "l", "k", "Q_k", "H_k", "W1", "W2", "W3", "W4", "S_kl"])
        for m in range(1, M + 1):
            for l in range(1, basis.K + 1):
                for k in range(1, basis.K + 1):
                    writer.writerow(
                        [m, l, k]
                        + [f"{v:.17g}" for v in (
                            table.Q[m - 1, k - 1], table.H[m - 1, k - 1],
                            table.W1[m - 1, l - 1, k - 1], table.W2[m - 1, l - 1, k - 1],
                            table.W3[m - 1, l - 1, k - 1], table.W4[m - 1, l - 1, k - 1],
                            table.S[k - 1, l - 1],
                        )]
                    )


def write_speed_grid_csv(path, a, b, p: FluidParams, basis: EigenBasis,
                         mus, deltas) -> None:
    """Write <U> (viscoelastic and Newtonian) over a (mu, delta) grid."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# gamma={p.gamma:.17g} omega={p.omega:.17g} K={basis.K}\n")
        writer = csv.writer(fh)
        writer.writerow(["mu", "delta", "U_ve", "U_newtonian"])
        for mu in mus:
            for delta in deltas:
                pg = FluidParams(gamma=p.gamma, mu=mu, delta=delta, omega=p.omega)
                writer.writerow([
                    f"{mu:.17g}", f"{delta:.17g}",
                    f"{avg_speed_ve(a, b, pg, basis):.17g}",
                    f"{avg_speed_newtonian(a, b, pg, basis):.17g}",
                ])
