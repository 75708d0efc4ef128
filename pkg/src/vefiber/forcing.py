"""Actuation profiles and the time-harmonic intrinsic-curvature drive.

The drive is kappa0(s, t) = eps (F1(s) cos(omega t) + F2(s) sin(omega t)).
F1/F2 come from a small profile menu (polynomial in s, sin/cos waves,
eigenmode combinations, tabulated data) and are by default rescaled to unit
L2 norm so eps alone sets the forcing strength.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

DEFAULT_OMEGA = 32.0 * np.pi

_NORM_NODES, _NORM_WEIGHTS = np.polynomial.legendre.leggauss(256)
_NORM_NODES = 0.5 * (_NORM_NODES + 1.0)
_NORM_WEIGHTS = 0.5 * _NORM_WEIGHTS


class PolynomialProfile:
    """F(s) = sum_j c_j s^j on [0, 1]."""

    def __init__(self, coeffs):
        self.poly = np.polynomial.Polynomial(np.asarray(coeffs, dtype=float))
        self._dpoly = self.poly.deriv()

    def value(self, s):
        return self.poly(np.asarray(s, dtype=float))

    def deriv(self, s):
        return self._dpoly(np.asarray(s, dtype=float))


class WaveProfile:
    """F(s) = prefactor * sin(q s) or cos(q s)."""

    def __init__(self, kind: str, q: float, prefactor: float = 1.0):
        if kind not in ("sin", "cos"):
            raise ValueError(f"wave kind must be 'sin' or 'cos', got {kind!r}")
        self.kind = kind
        self.q = float(q)
        self.prefactor = float(prefactor)

    def value(self, s):
        s = np.asarray(s, dtype=float)
        f = np.sin if self.kind == "sin" else np.cos
        return self.prefactor * f(self.q * s)

    def deriv(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == "sin":
            return self.prefactor * self.q * np.cos(self.q * s)
        return -self.prefactor * self.q * np.sin(self.q * s)


class ModalProfile:
    """F(s) = sum_k c_k psi_k(s) over a beam eigenbasis."""

    def __init__(self, coeffs, basis):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.ndim != 1 or len(coeffs) > basis.K:
            raise ValueError("need a 1-d coefficient vector with at most basis.K entries")
        self.coeffs = coeffs
        self.pairs = basis.pairs[: len(coeffs)]

    def value(self, s):
        from .beambasis import eval_psi

        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, p in zip(self.coeffs, self.pairs):
            if c != 0.0:
                out = out + c * eval_psi(p, s)
        return out

    def deriv(self, s):
        from .beambasis import eval_dpsi

        s = np.asarray(s, dtype=float)
        out = np.zeros_like(s)
        for c, p in zip(self.coeffs, self.pairs):
            if c != 0.0:
                out = out + c * eval_dpsi(p, s)
        return out


class TabulatedProfile:
    """Natural cubic spline through (s, value) samples on [0, 1]."""

    def __init__(self, s_table, v_table):
        s_table = np.asarray(s_table, dtype=float)
        v_table = np.asarray(v_table, dtype=float)
        if s_table.ndim != 1 or s_table.shape != v_table.shape or len(s_table) < 4:
            raise ValueError("need matching 1-d tables with at least 4 samples")
        if np.any(np.diff(s_table) <= 0):
            raise ValueError("sample locations must be strictly increasing")
        self._spline = CubicSpline(s_table, v_table, bc_type="natural")
        self._dspline = self._spline.derivative()

    def value(self, s):
        return self._spline(np.asarray(s, dtype=float))

    def deriv(self, s):
        return self._dspline(np.asarray(s, dtype=float))


def load_profile_csv(path) -> TabulatedProfile:
    """Read a two-column (s, value) CSV, '#' comments allowed."""
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if data.shape[1] != 2:
        raise ValueError(f"expected two columns (s, value) in {path}")
    return TabulatedProfile(data[:, 0], data[:, 1])


def _l2_norm(profile) -> float:
    vals = profile.value(_NORM_NODES)
    return float(np.sqrt(np.sum(_NORM_WEIGHTS * vals * vals)))


@dataclass
class ForcingSpec:
    """Curvature drive kappa0 = eps (F1 cos(omega t) + F2 sin(omega t)).

    f1/f2 may be None (that component is zero). With normalize=True each
    profile is rescaled to unit L2 norm before the amplitude is applied, so
    amplitude is the forcing strength eps of the combined drive.
    """

    f1: object | None = None
    f2: object | None = None
    omega: float = DEFAULT_OMEGA
    amplitude: float = 1.0
    normalize: bool = True
    _scale1: float = field(init=False, repr=False, default=0.0)
    _scale2: float = field(init=False, repr=False, default=0.0)

    def __post_init__(self):
        if self.f1 is None and self.f2 is None:
            self._scale1 = self._scale2 = 0.0
            return
        if self.omega <= 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        for name, prof in (("f1", self.f1), ("f2", self.f2)):
            scale = 0.0
            if prof is not None:
                if self.normalize:
                    nrm = _l2_norm(prof)
                    if nrm < 1e-14:
                        raise ValueError(f"cannot normalize near-zero profile {name}")
                    scale = self.amplitude / nrm
                else:
                    scale = self.amplitude
            if name == "f1":
                self._scale1 = scale
            else:
                self._scale2 = scale

    @property
    def period(self) -> float:
        """Temporal period 2 pi / omega of the drive."""
        return 2.0 * np.pi / self.omega

    # -- scaled profile components ------------------------------------
    def f1_values(self, s):
        s = np.asarray(s, dtype=float)
        return self._scale1 * self.f1.value(s) if self.f1 is not None else np.zeros_like(s)

    def f2_values(self, s):
        s = np.asarray(s, dtype=float)
        return self._scale2 * self.f2.value(s) if self.f2 is not None else np.zeros_like(s)

    def df1_values(self, s):
        s = np.asarray(s, dtype=float)
        return self._scale1 * self.f1.deriv(s) if self.f1 is not None else np.zeros_like(s)

    def df2_values(self, s):
        s = np.asarray(s, dtype=float)
        return self._scale2 * self.f2.deriv(s) if self.f2 is not None else np.zeros_like(s)

    # -- space-time fields --------------------------------------------
    def kappa0(self, s, t: float):
        c, sn = np.cos(self.omega * t), np.sin(self.omega * t)
        return self.f1_values(s) * c + self.f2_values(s) * sn

    def dkappa0_ds(self, s, t: float):
        c, sn = np.cos(self.omega * t), np.sin(self.omega * t)
        return self.df1_values(s) * c + self.df2_values(s) * sn

    def dkappa0_dt(self, s, t: float):
        c, sn = np.cos(self.omega * t), np.sin(self.omega * t)
        return self.omega * (-self.f1_values(s) * sn + self.f2_values(s) * c)

    def d2kappa0_dsdt(self, s, t: float):
        c, sn = np.cos(self.omega * t), np.sin(self.omega * t)
        return self.omega * (-self.df1_values(s) * sn + self.df2_values(s) * c)

    # -- projections and structure ------------------------------------
    def mode_coeffs(self, basis):
        """(a, b) with a_k = <F1, psi_k>, b_k = <F2, psi_k>, amplitudes included."""
        wpsi = basis.weights[None, :] * basis.psi
        a = wpsi @ self.f1_values(basis.nodes)
        b = wpsi @ self.f2_values(basis.nodes)
        return a, b

    def parity_class(self, tol: float = 1e-10) -> str:
        """'even' / 'odd' / 'mixed' about the midpoint s = 1/2.

        A zero component is compatible with either class.
        """
        s = np.linspace(0.0, 1.0, 257)
        verdicts = []
        for vals_of in (self.f1_values, self.f2_values):
            v, vr = vals_of(s), vals_of(s[::-1])
            scale = np.max(np.abs(v))
            if scale < 1e-300:
                continue  # zero: matches anything
            if np.max(np.abs(v - vr)) < tol * scale:
                verdicts.append("even")
            elif np.max(np.abs(v + vr)) < tol * scale:
                verdicts.append("odd")
            else:
                verdicts.append("mixed")
        if not verdicts:
            return "even"  # zero drive: conventionally even
        if all(v == verdicts[0] for v in verdicts):
            return verdicts[0]
        return "mixed"
