"""Single-photon wavepackets: Gaussian and Lorentzian mode functions.

The two inputs are labelled by ``branch``: branch ``"a"`` takes the upper
sign in ``t +/- offset/2`` and ``omega0 +/- delta/2``, branch ``"b"`` the lower
one. Thus a Lorentzian photon in ``a`` is released at ``-delta_t/2`` and the
one in ``b`` at ``+delta_t/2``.

Intensity quantities never depend on ``omega0``; it is kept only so that
mode functions and spectral densities carry the true carrier.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, replace
from typing import Literal, Sequence

import numpy as np
from scipy import integrate

from .core import NumericalError, TimeGrid

Branch = Literal["a", "b"]
Shape = Literal["gaussian", "lorentzian"]


def _branch_sign(branch: Branch) -> int:
    if branch == "a":
        return 1
    if branch == "b":
        return -1
    raise ValueError(f"branch must be 'a' or 'b', got {branch!r}")


@dataclass(frozen=True)
class GaussianModeParams:
    sigma: float
    delta_tau: float = 0.0
    omega0: float = 0.0
    delta: float = 0.0
    branch: Branch = "a"

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        _branch_sign(self.branch)

    @property
    def offset(self) -> float:
        return self.delta_tau


@dataclass(frozen=True)
class LorentzianModeParams:
    gamma: float
    delta_t: float = 0.0
    omega0: float = 0.0
    delta: float = 0.0
    branch: Branch = "a"

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        _branch_sign(self.branch)

    @property
    def offset(self) -> float:
        return self.delta_t


ModeParams = GaussianModeParams | LorentzianModeParams


class ModeFunction:
    """Spatio-temporal mode ``zeta(t) = envelope(t) * exp(-i carrier t)``.

    Subclasses provide ``envelope``, ``carrier``, ``support`` and
    ``breakpoints`` (points where ``zeta`` is discontinuous).
    """

    carrier: float = 0.0

    def envelope(self, t):
        raise NotImplementedError

    def __call__(self, t):
        if type(t) is float:
            # scalar fast path for quadrature integrands
            return complex(self.envelope(t)) * cmath.exp(-1j * self.carrier * t)
        t = np.asarray(t, dtype=float)
        out = self.envelope(t) * np.exp(-1j * self.carrier * t)
        return out if out.ndim else complex(out)

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def breakpoints(self) -> list[float]:
        return []

    def norm(self) -> float:
        """Numerical ``integral |zeta|^2 dt`` over the support."""
        lo, hi = self.support()
        pts = [p for p in self.breakpoints() if lo < p < hi]
        val, err = integrate.quad(
            lambda t: abs(self(t)) ** 2, lo, hi, points=pts or None, limit=500,
            epsabs=1e-13, epsrel=1e-11,
        )
        return val

    def shifted(self, shift: float) -> "ShiftedMode":
        return ShiftedMode(self, shift)


class GaussianMode(ModeFunction):
    def __init__(self, params: GaussianModeParams):
        self.params = params
        s = _branch_sign(params.branch)
        self.center = -s * params.delta_tau / 2
        self.carrier = params.omega0 + s * params.delta / 2
        self._amp = (1.0 / (math.pi * params.sigma**2)) ** 0.25

    def envelope(self, t):
        sig = self.params.sigma
        if type(t) is float:
            return self._amp * math.exp(-((t - self.center) ** 2) / (2 * sig**2))
        return self._amp * np.exp(-((np.asarray(t) - self.center) ** 2) / (2 * sig**2))

    def support(self, width: float = 10.0):
        sig = self.params.sigma
        return self.center - width * sig, self.center + width * sig

    def __repr__(self):
        return f"GaussianMode({self.params})"


class LorentzianMode(ModeFunction):
    """Truncated exponential; the unit step is taken with ``u(0) = 1``."""

    def __init__(self, params: LorentzianModeParams):
        self.params = params
        s = _branch_sign(params.branch)
        self.release = -s * params.delta_t / 2
        self.carrier = params.omega0 + s * params.delta / 2
        self._amp = math.sqrt(2 * params.gamma)

    def envelope(self, t):
        if type(t) is float:
            x = t - self.release
            return self._amp * math.exp(-self.params.gamma * x) if x >= 0 else 0.0
        x = np.asarray(t, dtype=float) - self.release
        on = x >= 0
        return np.where(on, self._amp * np.exp(-self.params.gamma * np.where(on, x, 0.0)), 0.0)

    def support(self, decay_times: float = 20.0):
        return self.release, self.release + decay_times / self.params.gamma

    def breakpoints(self):
        return [self.release]

    def __repr__(self):
        return f"LorentzianMode({self.params})"


class ShiftedMode(ModeFunction):
    """Envelope delayed by ``shift``; the carrier stays referenced to t = 0."""

    def __init__(self, base: ModeFunction, shift: float):
        self.base = base
        self.shift = float(shift)
        self.carrier = base.carrier

    def envelope(self, t):
        if type(t) is float:
            return self.base.envelope(t - self.shift)
        return self.base.envelope(np.asarray(t, dtype=float) - self.shift)

    def support(self):
        lo, hi = self.base.support()
        return lo + self.shift, hi + self.shift

    def breakpoints(self):
        return [p + self.shift for p in self.base.breakpoints()]

    def __repr__(self):
        return f"ShiftedMode({self.base!r}, {self.shift:g})"


class SampledMode(ModeFunction):
    """Mode known only on a uniform grid, e.g. after filtering.

    Samples hold the full complex mode in the frame rotating at ``omega0``.
    Between grid points the mode is linearly interpolated; outside the grid
    it is zero. ``meta`` records e.g. the filter and its alignment convention.
    """

    def __init__(self, grid: TimeGrid, samples, meta: dict | None = None):
        samples = np.asarray(samples, dtype=complex)
        if samples.shape != (grid.n,):
            raise ValueError(f"{samples.shape} samples for a grid of {grid.n} points")
        self.grid = grid
        self.samples = samples
        self.meta = dict(meta or {})
        self.carrier = 0.0

    def envelope(self, t):
        t = np.asarray(t, dtype=float)
        x = self.grid.points
        re = np.interp(t, x, self.samples.real, left=0.0, right=0.0)
        im = np.interp(t, x, self.samples.imag, left=0.0, right=0.0)
        return re + 1j * im

    def support(self):
        return self.grid.t0, self.grid.stop

    def norm(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dt)

    def __repr__(self):
        return f"SampledMode(n={self.grid.n}, dt={self.grid.dt:g})"


def make_mode(params: ModeParams, branch: Branch | None = None) -> ModeFunction:
    if branch is not None:
        params = replace(params, branch=branch)
    if isinstance(params, GaussianModeParams):
        return GaussianMode(params)
    if isinstance(params, LorentzianModeParams):
        return LorentzianMode(params)
    raise TypeError(f"unsupported mode parameters {type(params).__name__}")


def mode_pair(params: ModeParams) -> tuple[ModeFunction, ModeFunction]:
    """The two input modes (branch a, branch b) sharing ``params``."""
    return make_mode(params, "a"), make_mode(params, "b")


def eval_gaussian_mode(p: GaussianModeParams, t):
    return GaussianMode(p)(t)


def eval_lorentzian_mode(p: LorentzianModeParams, t):
    return LorentzianMode(p)(t)


def lorentzian_spectral_density(p: LorentzianModeParams, omega):
    """Fourier amplitude ``Phi(omega)`` of the Lorentzian mode.

    Uses ``Phi(w) = (2 pi)^-1/2 * integral zeta(t) exp(+i w t) dt``; the delay
    phase follows the release time of the branch, ``-/+ delta_t/2``.
    """
    s = _branch_sign(p.branch)
    detuning = np.asarray(omega, dtype=float) - (p.omega0 + s * p.delta / 2)
    release = -s * p.delta_t / 2
    return math.sqrt(p.gamma / math.pi) / (p.gamma - 1j * detuning) * np.exp(1j * detuning * release)


def pair_intensity_correlation(mode_a, mode_b, t, tau):
    """Output intensity (auto, cross) correlation for one photon per input,
    ``|zeta_a(t+tau) zeta_b(t) +/- zeta_b(t+tau) zeta_a(t)|^2 / 4``."""
    t = np.asarray(t, dtype=float)
    t2 = t + np.asarray(tau, dtype=float)
    x = mode_a(t2) * mode_b(t)
    y = mode_b(t2) * mode_a(t)
    return 0.25 * np.abs(x + y) ** 2, 0.25 * np.abs(x - y) ** 2


def g2_gaussian_closed(p: GaussianModeParams, tau):
    """Closed-form (auto, cross) G2 for a Gaussian photon pair."""
    tau = np.asarray(tau, dtype=float)
    sig2 = p.sigma**2
    # cosh(x) * exp(-y) folded into exponentials to avoid overflow at large tau
    e_plus = np.exp(tau * p.delta_tau / sig2 - (p.delta_tau**2 + tau**2) / (2 * sig2))
    e_minus = np.exp(-tau * p.delta_tau / sig2 - (p.delta_tau**2 + tau**2) / (2 * sig2))
    env = np.exp(-(p.delta_tau**2 + tau**2) / (2 * sig2))
    pref = 1.0 / (2 * math.sqrt(2 * math.pi * sig2))
    ch = 0.5 * (e_plus + e_minus)
    osc = np.cos(tau * p.delta) * env
    return pref * (ch + osc), pref * (ch - osc)


def g2_lorentzian_closed(p: LorentzianModeParams, tau):
    """Closed-form (auto, cross) G2 for a Lorentzian photon pair.

    Evaluated at ``|tau|`` and ``|delta_t|``: both correlations are even in
    the delay and symmetric under exchanging the two sources.
    """
    tau = np.abs(np.asarray(tau, dtype=float))
    g = p.gamma
    dt = abs(p.delta_t)
    c2 = np.cos(p.delta * tau / 2) ** 2
    s2 = np.sin(p.delta * tau / 2) ** 2
    # the two branches differ only by swapping tau and delta_t; written with
    # non-positive exponents so neither overflows
    lo = np.minimum(tau, dt)
    hi = np.maximum(tau, dt)
    sinh_part = 0.5 * (np.exp(-2 * g * (hi - lo)) - np.exp(-2 * g * (hi + lo)))
    decay = np.exp(-2 * g * (hi + lo))
    auto = g / 2 * (sinh_part + 2 * decay * c2)
    cross = g / 2 * (sinh_part + 2 * decay * s2)
    return auto, cross


def g2_closed(params: ModeParams, tau):
    if isinstance(params, GaussianModeParams):
        return g2_gaussian_closed(params, tau)
    return g2_lorentzian_closed(params, tau)


@dataclass(frozen=True)
class ProbabilityTable:
    p_aa: float
    p_ab: float
    p_ba: float
    p_bb: float

    @property
    def total(self) -> float:
        return self.p_aa + self.p_ab + self.p_ba + self.p_bb

    @property
    def coincidence(self) -> float:
        """``P_c``: one photon in each output port."""
        return self.p_ab + self.p_ba

    @property
    def coalescence(self) -> float:
        return self.p_aa + self.p_bb

    @classmethod
    def symmetric(cls, p_aa: float, p_ab: float) -> "ProbabilityTable":
        return cls(p_aa, p_ab, p_ab, p_aa)


def _check_shape(shape: Shape, params: ModeParams):
    expected = {"gaussian": GaussianModeParams, "lorentzian": LorentzianModeParams}
    if shape not in expected:
        raise ValueError(f"shape must be 'gaussian' or 'lorentzian', got {shape!r}")
    if not isinstance(params, expected[shape]):
        raise TypeError(f"{shape} shape needs {expected[shape].__name__}")


def overlap_visibility(shape: Shape, params: ModeParams) -> float:
    """``|<zeta_a|zeta_b>|^2``, the interference visibility of the pair."""
    _check_shape(shape, params)
    if shape == "gaussian":
        p = params
        return math.exp(-(p.delta**2) * p.sigma**2 / 2 - p.delta_tau**2 / (2 * p.sigma**2))
    p = params
    return 4 * p.gamma**2 / (4 * p.gamma**2 + p.delta**2) * math.exp(-2 * p.gamma * abs(p.delta_t))


def correlation_probabilities(shape: Shape, params: ModeParams) -> ProbabilityTable:
    """Probabilities ``P_cd`` of one photon in output c and one in d."""
    v = overlap_visibility(shape, params)
    return ProbabilityTable.symmetric(0.25 * (1 + v), 0.25 * (1 - v))


def hom_dip_scan(
    shape: Shape,
    params: ModeParams,
    sweep: Sequence[float],
    variable: Literal["offset", "delta"] = "offset",
) -> list[tuple[float, float]]:
    """Coincidence probability ``P_c`` across a sweep of the temporal offset
    (``delta_tau`` / ``delta_t``) or of the carrier difference."""
    if len(sweep) == 0:
        raise ValueError("sweep must not be empty")
    if variable == "offset":
        key = "delta_tau" if shape == "gaussian" else "delta_t"
    elif variable == "delta":
        key = "delta"
    else:
        raise ValueError(f"variable must be 'offset' or 'delta', got {variable!r}")
    out = []
    for value in sweep:
        table = correlation_probabilities(shape, replace(params, **{key: float(value)}))
        out.append((float(value), table.coincidence))
    return out


def integration_window(*modes: ModeFunction, margin: float = 0.0) -> tuple[float, float]:
    lo = min(m.support()[0] for m in modes) - margin
    hi = max(m.support()[1] for m in modes) + margin
    if not np.isfinite([lo, hi]).all():
        raise NumericalError("mode support is not finite")
    return lo, hi
