"""Finite-segment simulation of a swimming filament in a viscoelastic fluid.

The filament is N rigid segments of length 1/N with tangent angles theta_i;
inextensibility is exact by construction.  Moment-balance row j integrates
the resistive-force-theory drag over segments 1..j (midpoint-rule partial
sums of segment midpoint velocities); two further rows impose zero total
drag over the whole filament.  The memory field xi lives on the same
midpoint grid and follows its own relaxation ODE.  Every right-hand-side
evaluation assembles and solves an (N+1)x(N+1) linear system for
(x0_dot, y0_dot, theta_dot_1..N-1); theta_N is slaved to the free-end
curvature condition, and xi_1 = xi_N = 0.

Time stepping uses the TR-BDF2 integrator with a hybrid Jacobian (exact
memory-coupling blocks, differenced angle columns).  delta = 0 short-
circuits to the Newtonian limit: the memory terms cancel exactly in that
limit, so the mu-dependent terms are dropped and xi is frozen.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .forcing import ForcingSpec
from .stiffode import integrate_trbdf2
from .theory import FluidParams

__all__ = [
    "SimParams", "FilamentState", "VelocitySystem", "Trajectory",
    "mobility_block", "assemble_velocity_system", "straight_state",
    "eigenmode_state", "theta_constraint_residual", "com_velocity",
    "integrate", "write_trajectory_csv", "read_trajectory_csv",
    "write_positions_csv", "midpoints",
]

_BOUNDARY_MODES = ("consistent", "verbatim")
_STENCIL_MODES = ("central", "verbatim")

_TRIL_MASKS: dict[int, np.ndarray] = {}


def _tril_mask(m: int) -> np.ndarray:
    mask = _TRIL_MASKS.get(m)
    if mask is None:
        mask = _TRIL_MASKS[m] = np.tril(np.ones((m, m)))
    return mask


@dataclass(frozen=True)
class SimParams:
    """Discretization and stepping controls for one simulation run."""

    N: int = 100
    fluid: FluidParams = field(default_factory=FluidParams)
    reltol: float = 1e-6
    abstol: float = 1e-8
    dt_init: float = 1e-6
    dt_max: float = np.inf
    boundary_row_mode: str = "consistent"
    curvature_stencil: str = "central"
    t_end: float = 2.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 8:
            raise ValueError(f"N must be an integer >= 8, got {self.N}")
        object.__setattr__(self, "N", int(self.N))
        if self.reltol <= 0 or self.abstol <= 0:
            raise ValueError("tolerances must be positive")
        if self.dt_init <= 0 or self.dt_init > self.dt_max:
            raise ValueError("need 0 < dt_init <= dt_max")
        if self.boundary_row_mode not in _BOUNDARY_MODES:
            raise ValueError(f"boundary_row_mode must be one of {_BOUNDARY_MODES}")
        if self.curvature_stencil not in _STENCIL_MODES:
            raise ValueError(f"curvature_stencil must be one of {_STENCIL_MODES}")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")

    @property
    def memory_active(self) -> bool:
        """True when the xi field feeds back on the motion (mu, delta > 0)."""
        return self.fluid.mu > 0.0 and self.fluid.delta > 0.0

    @property
    def stencil_factor(self) -> float:
        """Coefficient of (theta_{j+1} - theta_{j-1}) in the xi relaxation."""
        return self.N / 2.0 if self.curvature_stencil == "central" else 2.0 * self.N


def midpoints(N: int) -> np.ndarray:
    """Arclength midpoints s_{i-1/2} = (i - 1/2)/N, i = 1..N."""
    return (np.arange(N) + 0.5) / N


@dataclass
class FilamentState:
    """Filament configuration: anchor point, segment angles, memory field."""

    t: float
    x0: float
    y0: float
    theta: np.ndarray
    xi: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        if self.theta.ndim != 1 or self.theta.shape != self.xi.shape:
            raise ValueError("theta and xi must be 1-d arrays of equal length")

    @property
    def N(self) -> int:
        return len(self.theta)

    def positions(self) -> np.ndarray:
        """Node positions X_0..X_N, shape (N+1, 2)."""
        seg = np.stack([np.cos(self.theta), np.sin(self.theta)], axis=1) / self.N
        out = np.empty((self.N + 1, 2))
        out[0] = (self.x0, self.y0)
        out[1:] = out[0] + np.cumsum(seg, axis=0)
        return out

    def segment_midpoints(self) -> np.ndarray:
        """Segment midpoints X_{i-1/2}, shape (N, 2)."""
        nodes = self.positions()
        return 0.5 * (nodes[:-1] + nodes[1:])

    def com(self) -> np.ndarray:
        """Center of mass (midpoint rule over segments)."""
        return self.segment_midpoints().mean(axis=0)

    def copy(self) -> "FilamentState":
        return FilamentState(self.t, self.x0, self.y0,
                             self.theta.copy(), self.xi.copy())


def mobility_block(theta_i: float, gamma: float) -> np.ndarray:
    """RFT mobility I - (gamma/(1+gamma)) e_t e_t^T for one segment."""
    return _mobility_blocks(np.atleast_1d(float(theta_i)), gamma)[0]


def _mobility_blocks(theta: np.ndarray, gamma: float) -> np.ndarray:
    fac = gamma / (1.0 + gamma)
    c, s = np.cos(theta), np.sin(theta)
    G = np.empty((len(theta), 2, 2))
    G[:, 0, 0] = 1.0 - fac * c * c
    G[:, 0, 1] = -fac * c * s
    G[:, 1, 0] = G[:, 0, 1]
    G[:, 1, 1] = 1.0 - fac * s * s
    return G


def _slaved_theta_last(theta_prev: float, forcing: ForcingSpec, t: float,
                       N: int) -> float:
    """theta_N from the free-end curvature condition."""
    sN = (N - 0.5) / N
    return (theta_prev + float(forcing.kappa0(sN, t)) / N
            - float(forcing.dkappa0_ds(sN, t)) / (2.0 * N * N))


def theta_constraint_residual(state: FilamentState, forcing: ForcingSpec | None) -> float:
    """Residual of the theta_N free-end constraint (0 when satisfied)."""
    forcing = forcing if forcing is not None else ForcingSpec()
    target = _slaved_theta_last(state.theta[-2], forcing, state.t, state.N)
    return float(state.theta[-1] - target)


def straight_state(N: int, forcing: ForcingSpec | None = None,
                   t: float = 0.0) -> FilamentState:
    """Straight filament along the x-axis from (0,0) to (1,0), xi = 0."""
    forcing = forcing if forcing is not None else ForcingSpec()
    theta = np.zeros(N)
    theta[-1] = _slaved_theta_last(0.0, forcing, t, N)
    return FilamentState(t=t, x0=0.0, y0=0.0, theta=theta, xi=np.zeros(N))


def eigenmode_state(N: int, pair, amplitude: float = 1e-3) -> FilamentState:
    """Unforced state whose curvature is amplitude * psi_k (beam eigenmode).

    theta is the eigenfunction antiderivative at the midpoint grid, so
    theta_s recovers amplitude * psi_k; used for linear-decay studies.
    """
    from .beambasis import eval_psi_int

    smid = midpoints(N)
    theta = amplitude * eval_psi_int(pair, smid)
    theta[-1] = theta[-2]  # free-end constraint with kappa0 = 0
    return FilamentState(t=0.0, x0=0.0, y0=0.0, theta=theta, xi=np.zeros(N))


@dataclass
class VelocitySystem:
    """Linear system A v = rhs for v = (x0_dot, y0_dot, theta_dot_1..N-1)."""

    A: np.ndarray
    rhs: np.ndarray

    def solve(self) -> np.ndarray:
        try:
            v = np.linalg.solve(self.A, self.rhs)
            res = np.linalg.norm(self.A @ v - self.rhs)
            if res <= 1e-9 * np.linalg.norm(self.rhs) + 1e-30:
                return v
        except np.linalg.LinAlgError:
            pass
        # A perfectly straight rod makes the system rank-deficient: an
        # alternating theta_dot pattern with a compensating translation has
        # zero normal velocity at every segment midpoint, so midpoint
        # collocation cannot see it.  The min-norm least-squares solution
        # drops that grid-scale component and keeps the smooth part.
        v, _, rank, _ = np.linalg.lstsq(self.A, self.rhs, rcond=1e-10)
        if rank == self.A.shape[0]:
            res = np.linalg.norm(self.A @ v - self.rhs)
            raise RuntimeError(
                f"velocity solve residual {res:.3e} exceeds tolerance")
        return v


def _effective_mu(fluid: FluidParams) -> float:
    # delta = 0 is the Newtonian limit: the memory terms cancel exactly
    return fluid.mu if fluid.delta > 0.0 else 0.0


def assemble_velocity_system(state: FilamentState, forcing: ForcingSpec,
                             p: SimParams) -> VelocitySystem:
    """Build the force/torque balance system at the current state.

    Row j (j = 1..N-1) is the moment balance integrated over segments 1..j
    (midpoint-rule partial sums of the segment drag).  The last two rows
    are total force balance over all N segments; theta_dot_N is eliminated
    there through the time derivative of the algebraic end constraint, so
    it contributes to the theta_dot_{N-1} column and the right side.
    """
    A, rhs = _assemble_batch(state.theta[None, :], state.xi, state.t,
                             forcing, p)
    return VelocitySystem(A=A[0], rhs=rhs[0])


def _assemble_batch(th: np.ndarray, xi: np.ndarray, t: float,
                    forcing: ForcingSpec, p: SimParams):
    """Velocity systems for a batch of theta profiles at shared (xi, t).

    th has shape (B, N); returns A of shape (B, N+1, N+1) and rhs of
    shape (B, N+1).  Shared by assemble_velocity_system (B = 1) and the
    finite-difference Jacobian (B = N-1 perturbed profiles).
    """
    B, N = th.shape
    mu = _effective_mu(p.fluid)
    n_vec = np.stack([-np.sin(th), np.cos(th)], axis=2)     # (B, N, 2)
    fac = p.fluid.gamma / (1.0 + p.fluid.gamma)
    c, s = np.cos(th), np.sin(th)
    G = np.empty((B, N, 2, 2))
    G[:, :, 0, 0] = 1.0 - fac * c * c
    G[:, :, 0, 1] = -fac * c * s
    G[:, :, 1, 0] = G[:, :, 0, 1]
    G[:, :, 1, 1] = 1.0 - fac * s * s
    cumG = np.cumsum(G, axis=1)
    Gn = (G @ n_vec[:, :, :, None])[:, :, :, 0]         # G_k n_k
    cumGn = (cumG @ n_vec[:, :, :, None])[:, :, :, 0]   # (sum_{i<=k} G_i) n_k
    nm = n_vec[:, :N - 1]
    nmT = nm.transpose(0, 2, 1)
    njcum = (nm[:, :, None, :] @ cumG[:, :N - 1])[:, :, 0, :]

    # theta_dot_k appears in Xdot_{i-1/2} with full weight for i > k and
    # half weight for i = k, so its coefficient in moment row j (k <= j) is
    # n_j^T [(cumG_j - cumG_k) + G_k/2] n_k / N^2.
    t1 = njcum @ nmT                    # n_j . cumG_j n_k
    t2 = nm @ cumGn[:, :N - 1].transpose(0, 2, 1)
    t3 = nm @ Gn[:, :N - 1].transpose(0, 2, 1)
    Atheta = (t1 - t2 + 0.5 * t3) / (N * N)
    Atheta *= _tril_mask(N - 1)         # theta_dot_k only in rows j >= k

    A = np.empty((B, N + 1, N + 1))     # every entry is assigned below
    A[:, :N - 1, 0:2] = njcum / N
    A[:, :N - 1, 2:] = Atheta
    CN = cumG[:, -1]                    # sum over all N segments
    A[:, N - 1, 0:2] = CN[:, 0] / N
    A[:, N, 0:2] = CN[:, 1] / N
    fcol = ((CN[:, None, :, :] - cumG[:, :N - 1] + 0.5 * G[:, :N - 1])
            @ nm[:, :, :, None])[:, :, :, 0] / (N * N)
    # slaved theta_dot_N rides on theta_dot_{N-1} in segment N's half term
    fcol[:, N - 2] += Gn[:, N - 1] / (2.0 * N * N)
    A[:, N - 1, 2:] = fcol[:, :, 0]
    A[:, N, 2:] = fcol[:, :, 1]

    smid = midpoints(N)
    k0 = forcing.kappa0(smid, t)
    dk0 = forcing.dkappa0_ds(smid, t)
    rhs = np.zeros((B, N + 1))
    lap = th[:, :-2] - 2.0 * th[:, 1:-1] + th[:, 2:]
    rhs[:, 1:N - 1] = (-(N * N) * (1.0 + mu) * lap
                       + (1.0 + mu) * dk0[1:-1]
                       + mu * (N / 2.0) * (xi[2:] - xi[:-2]))
    end_row = -(N * N) * (2.0 * th[:, 1] - 2.0 * th[:, 0]) + 2.0 * N * k0[0]
    if p.boundary_row_mode == "consistent":
        # match interior-row structure: (1+mu) scaling plus the kappa0_s
        # term (the xi_s term is zero by the xi_s = 0 end condition)
        rhs[:, 0] = (1.0 + mu) * (end_row + dk0[0])
    else:
        rhs[:, 0] = end_row
    # known part of slaved theta_dot_N moves to the force-row right side
    g_slave = (float(forcing.dkappa0_dt(smid[-1], t)) / N
               - float(forcing.d2kappa0_dsdt(smid[-1], t)) / (2.0 * N * N))
    rhs[:, N - 1:] = -Gn[:, N - 1] * g_slave / (2.0 * N * N)
    return A, rhs


def _residual_batch(th: np.ndarray, xi: np.ndarray, t: float,
                    forcing: ForcingSpec, p: SimParams,
                    v: np.ndarray) -> np.ndarray:
    """rhs(theta_b) - A(theta_b) @ v for each row of th, without forming A.

    The matrix-vector product collapses to prefix sums once the velocity
    vector is fixed: build the midpoint velocities from v, apply the drag
    blocks, and accumulate.  O(N) per profile instead of O(N^2), which is
    what makes the differenced Jacobian columns cheap.
    """
    B, N = th.shape
    mu = _effective_mu(p.fluid)
    fac = p.fluid.gamma / (1.0 + p.fluid.gamma)
    c, s = np.cos(th), np.sin(th)
    n_vec = np.stack([-s, c], axis=2)                       # (B, N, 2)
    G = np.empty((B, N, 2, 2))
    G[:, :, 0, 0] = 1.0 - fac * c * c
    G[:, :, 0, 1] = -fac * c * s
    G[:, :, 1, 0] = G[:, :, 0, 1]
    G[:, :, 1, 1] = 1.0 - fac * s * s

    smid = midpoints(N)
    k0 = forcing.kappa0(smid, t)
    dk0 = forcing.dkappa0_ds(smid, t)
    g_slave = (float(forcing.dkappa0_dt(smid[-1], t)) / N
               - float(forcing.d2kappa0_dsdt(smid[-1], t)) / (2.0 * N * N))
    td = np.empty(N)
    td[:N - 1] = v[2:N + 1]
    td[N - 1] = v[N] + g_slave          # slaved theta_dot_N
    nw = n_vec * td[None, :, None]
    cnw = np.cumsum(nw, axis=1)
    Xdot = np.empty((B, N, 2))
    Xdot[:, 0] = v[None, 0:2] + nw[:, 0] / (2.0 * N)
    Xdot[:, 1:] = (v[None, None, 0:2] + cnw[:, :-1] / N
                   + nw[:, 1:] / (2.0 * N))
    F = (G @ Xdot[:, :, :, None])[:, :, :, 0]               # drag density
    P = np.cumsum(F, axis=1)
    lhs_m = (n_vec[:, :N - 1] * P[:, :N - 1]).sum(axis=2) / N

    resid = np.empty((B, N + 1))
    lap = th[:, :-2] - 2.0 * th[:, 1:-1] + th[:, 2:]
    resid[:, 1:N - 1] = (-(N * N) * (1.0 + mu) * lap
                         + (1.0 + mu) * dk0[1:-1]
                         + mu * (N / 2.0) * (xi[2:] - xi[:-2])
                         - lhs_m[:, 1:])
    end_row = -(N * N) * (2.0 * th[:, 1] - 2.0 * th[:, 0]) + 2.0 * N * k0[0]
    if p.boundary_row_mode == "consistent":
        resid[:, 0] = (1.0 + mu) * (end_row + dk0[0]) - lhs_m[:, 0]
    else:
        resid[:, 0] = end_row - lhs_m[:, 0]
    resid[:, N - 1] = -P[:, N - 1, 0] / N
    resid[:, N] = -P[:, N - 1, 1] / N
    return resid


# -- packed ODE state: y = (x0, y0, theta_1..N-1, xi_2..N-1) ----------------

def _pack_state(state: FilamentState, p: SimParams) -> np.ndarray:
    N = p.N
    y = np.empty(2 * N - 1)
    y[0], y[1] = state.x0, state.y0
    y[2:N + 1] = state.theta[:N - 1]
    y[N + 1:] = state.xi[1:-1]
    return y


def _state_from_vector(t: float, y: np.ndarray, forcing: ForcingSpec,
                       p: SimParams) -> FilamentState:
    N = p.N
    theta = np.empty(N)
    theta[:N - 1] = y[2:N + 1]
    theta[N - 1] = _slaved_theta_last(theta[N - 2], forcing, t, N)
    xi = np.zeros(N)
    xi[1:-1] = y[N + 1:]
    return FilamentState(t=t, x0=float(y[0]), y0=float(y[1]),
                         theta=theta, xi=xi)


def _rhs(t: float, y: np.ndarray, forcing: ForcingSpec,
         p: SimParams) -> np.ndarray:
    N = p.N
    state = _state_from_vector(t, y, forcing, p)
    vel = assemble_velocity_system(state, forcing, p).solve()
    dy = np.empty_like(y)
    dy[:N + 1] = vel
    if p.memory_active:
        theta = state.theta
        k0 = forcing.kappa0(midpoints(N), t)
        curv = p.stencil_factor * (theta[2:] - theta[:-2]) - k0[1:-1]
        dy[N + 1:] = (curv - state.xi[1:-1]) / p.fluid.delta
    else:
        dy[N + 1:] = 0.0
    return dy


def _jacobian(t: float, y: np.ndarray, forcing: ForcingSpec,
              p: SimParams) -> np.ndarray:
    """Hybrid Jacobian: exact xi blocks, differenced theta columns.

    The translation columns (x0, y0) are exactly zero; the velocity-block
    xi columns come from one multi-right-hand-side solve since the system
    matrix does not depend on xi.
    """
    N = p.N
    n = 2 * N - 1
    state = _state_from_vector(t, y, forcing, p)
    system = assemble_velocity_system(state, forcing, p)
    try:
        lu = lu_factor(system.A)
        v0 = lu_solve(lu, system.rhs)
        bad = not np.all(np.isfinite(v0)) or (
            np.linalg.norm(system.A @ v0 - system.rhs)
            > 1e-9 * np.linalg.norm(system.rhs) + 1e-30)
    except np.linalg.LinAlgError:
        bad = True
    if bad:
        # degenerate configuration: mirror the pinv behaviour of solve()
        pinv = np.linalg.pinv(system.A, rcond=1e-10)
        v0 = pinv @ system.rhs
        solve_cols = lambda B: pinv @ B
    else:
        solve_cols = lambda B: lu_solve(lu, B)
    J = np.zeros((n, n))

    if p.memory_active:
        mu, delta = p.fluid.mu, p.fluid.delta
        B = np.zeros((N + 1, N - 2))
        js = np.arange(2, N - 1)                # xi_{j+1} free for j <= N-2
        B[js - 1, js - 1] = mu * N / 2.0
        js = np.arange(3, N)                    # xi_{j-1} free for j >= 3
        B[js - 1, js - 3] = -mu * N / 2.0
        J[:N + 1, N + 1:] = solve_cols(B)

        c_over_d = p.stencil_factor / delta
        rows = np.arange(N + 1, n)
        J[rows, rows] = -1.0 / delta
        for j in range(2, N):
            row = N + 1 + (j - 2)
            col_plus = 2 + min(j + 1, N - 1) - 1    # theta_N slaved to theta_{N-1}
            J[row, col_plus] += c_over_d
            J[row, 2 + (j - 1) - 1] -= c_over_d

    # Velocity-block theta columns: dv/dtheta_k = A^{-1}(drhs_k - dA_k v0).
    # The bracket is the derivative of resid(theta) = rhs(theta) - A(theta) v0,
    # differenced forward on the O(N)-per-profile residual batch (row 0 is
    # the unperturbed profile) and back-substituted through the base
    # factorization.  Step size: solve roundoff (cond(A) ~ N^2) dominates
    # below ~1e-7, truncation stays ~4e-6 relative at 1e-6.
    h = 1e-6 * np.maximum(np.abs(y[2:N + 1]), 1.0)
    th_batch = np.repeat(state.theta[None, :], N, axis=0)
    th_batch[1 + np.arange(N - 1), np.arange(N - 1)] += h
    # re-slave theta_N for the perturbed last column
    th_batch[N - 1, N - 1] = _slaved_theta_last(th_batch[N - 1, N - 2],
                                                forcing, t, p.N)
    resid = _residual_batch(th_batch, state.xi, t, forcing, p, v0)
    R = resid[1:] - resid[0]
    J[:N + 1, 2:N + 1] = solve_cols(R.T / h)
    return J


def _theta_dot_full(t: float, vel: np.ndarray, forcing: ForcingSpec,
                    N: int) -> np.ndarray:
    """All N angle rates; theta_dot_N from the differentiated constraint."""
    sN = (N - 0.5) / N
    td = np.empty(N)
    td[:N - 1] = vel[2:]
    td[N - 1] = (td[N - 2] + float(forcing.dkappa0_dt(sN, t)) / N
                 - float(forcing.d2kappa0_dsdt(sN, t)) / (2.0 * N * N))
    return td


def com_velocity(state: FilamentState, forcing: ForcingSpec | None,
                 p: SimParams) -> np.ndarray:
    """Instantaneous center-of-mass velocity from the solved system."""
    forcing = forcing if forcing is not None else ForcingSpec()
    vel = assemble_velocity_system(state, forcing, p).solve()
    td = _theta_dot_full(state.t, vel, forcing, p.N)
    n_vec = np.stack([-np.sin(state.theta), np.cos(state.theta)], axis=1)
    ntd = n_vec * td[:, None]
    csum = np.vstack([np.zeros(2), np.cumsum(ntd, axis=0)[:-1]])
    xdot = vel[0:2] + csum / p.N + ntd / (2.0 * p.N)    # (N, 2) midpoint rates
    return xdot.mean(axis=0)


@dataclass
class Trajectory:
    """Sampled simulation output plus accepted-step history and counters."""

    times: np.ndarray
    states: list
    step_times: np.ndarray
    step_states: list | None
    n_accepted: int
    n_rejected: int
    nfev: int
    njev: int

    def x0_series(self) -> np.ndarray:
        return np.array([s.x0 for s in self.states])

    def state_at(self, t: float) -> FilamentState:
        idx = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[idx] - t) > 1e-9 * max(1.0, abs(t)):
            raise ValueError(f"time {t} not among sampled times")
        return self.states[idx]


def integrate(state: FilamentState, forcing: ForcingSpec | None, p: SimParams,
              t_end: float | None = None, sample_times=None,
              record_steps: bool = False) -> Trajectory:
    """Advance a filament state and return sampled states.

    t_end defaults to p.t_end.  sample_times requests dense output; with
    neither sampling nor record_steps only the final state is returned.
    """
    forcing = forcing if forcing is not None else ForcingSpec()
    if state.N != p.N:
        raise ValueError(f"state has N={state.N}, params expect N={p.N}")
    t_end = p.t_end if t_end is None else float(t_end)
    if t_end <= state.t:
        raise ValueError("t_end must exceed the state time")
    if p.fluid.mu > 0.0 and p.fluid.delta > 0.0 and p.fluid.delta < 1e-12:
        raise ValueError("delta too small to integrate; use delta = 0 (Newtonian)")

    y0 = _pack_state(state, p)
    res = integrate_trbdf2(
        lambda t, y: _rhs(t, y, forcing, p),
        (state.t, t_end), y0,
        reltol=p.reltol, abstol=p.abstol,
        jac=lambda t, y: _jacobian(t, y, forcing, p),
        dt_init=p.dt_init, dt_max=p.dt_max,
        sample_times=sample_times, record_steps=record_steps)
    if not res.success:
        raise RuntimeError(f"integration failed: {res.message}")
    if not np.all(np.isfinite(res.y)):
        raise RuntimeError("integration produced non-finite state")

    states = [_state_from_vector(tt, yy, forcing, p)
              for tt, yy in zip(res.t, res.y)]
    step_states = None
    if record_steps:
        step_states = [_state_from_vector(tt, yy, forcing, p)
                       for tt, yy in zip(res.step_t, res.step_y)]
    return Trajectory(times=res.t, states=states, step_times=res.step_t,
                      step_states=step_states, n_accepted=res.n_accepted,
                      n_rejected=res.n_rejected, nfev=res.nfev, njev=res.njev)


# -- CSV input/output -------------------------------------------------------

def write_trajectory_csv(traj: Trajectory, path, metadata: dict | None = None):
    """Columns t, x0, y0, theta_1..theta_N, xi_1..xi_N; '#' metadata lines."""
    N = traj.states[0].N
    names = (["t", "x0", "y0"] + [f"theta_{i}" for i in range(1, N + 1)]
             + [f"xi_{i}" for i in range(1, N + 1)])
    rows = np.array([np.concatenate(([s.t, s.x0, s.y0], s.theta, s.xi))
                     for s in traj.states])
    with open(path, "w") as fh:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}={val}\n")
        fh.write(",".join(names) + "\n")
        np.savetxt(fh, rows, fmt="%.17g", delimiter=",")


def read_trajectory_csv(path) -> Trajectory:
    """Rebuild a (states-only) Trajectory from write_trajectory_csv output."""
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    names = lines[0].strip().split(",")
    n_theta = sum(1 for c in names if c.startswith("theta_"))
    data = np.loadtxt(io.StringIO("".join(lines[1:])), delimiter=",", ndmin=2)
    states = [FilamentState(t=row[0], x0=row[1], y0=row[2],
                            theta=row[3:3 + n_theta],
                            xi=row[3 + n_theta:3 + 2 * n_theta])
              for row in data]
    times = data[:, 0]
    return Trajectory(times=times, states=states, step_times=times,
                      step_states=None, n_accepted=0, n_rejected=0,
                      nfev=0, njev=0)


def write_positions_csv(state: FilamentState, path):
    """Node coordinates of one snapshot: columns node, x, y."""
    nodes = state.positions()
    rows = np.column_stack([np.arange(state.N + 1), nodes])
    with open(path, "w") as fh:
        fh.write(f"# t={state.t:.17g}\n")
        fh.write("node,x,y\n")
        np.savetxt(fh, rows, fmt=["%d", "%.17g", "%.17g"], delimiter=",")
