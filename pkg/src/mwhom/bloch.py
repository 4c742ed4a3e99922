"""Continuously driven two-level emitters as beam-splitter inputs.

The emitter state is the vector ``v = (<s+>, <s->, <sz>)`` obeying the
optical Bloch equations ``dv/dt = A v + b`` in the frame rotating at the
drive. Two-time correlations follow from the same linear flow (quantum
regression), using the propagator

    v(t + tau) = C(tau) v(t) + d(tau),    C = X exp(L tau) X^-1,
    d(tau) = (1 - C(tau)) v_ss,

where ``A = X L X^-1``. Resonant closed forms for G1 and G2 are provided
alongside and are the default for the output-port correlations.

Rates are angular (rad/s). ``G1(tau) = <s+(t) s-(t+tau)>`` and
``G2(tau) = <s+(t) s+(t+tau) s-(t+tau) s-(t)>`` in steady state; the
proportionality constant between field and lowering operator is never used.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from .core import NumericalError

#: Eigenvector condition number above which the propagator falls back to expm.
COND_LIMIT = 1e8

#: Below this ``|kappa * tau|`` the hyperbolic ratios use their power series.
SERIES_LIMIT = 1e-4


class DegenerateParametersError(ValueError):
    """The Bloch system matrix is singular for these parameters."""


@dataclass(frozen=True)
class TlsParams:
    """Two-level emitter.

    ``detuning_share`` is the detuning of this emitter from the drive,
    entering the Bloch matrix directly. For two detuned sources the
    output-port functions instead take the carrier difference as an explicit
    argument and keep each emitter resonant.
    """

    gamma1: float
    gamma_p: float = 0.0
    omega: complex = 0.0
    detuning_share: float = 0.0
    pol_angle: float = 0.0

    def __post_init__(self):
        if not self.gamma1 > 0:
            raise ValueError(f"gamma1 must be positive, got {self.gamma1}")
        if not self.gamma_p >= 0:
            raise ValueError(f"gamma_p must be non-negative, got {self.gamma_p}")
        if not cmath.isfinite(complex(self.omega)):
            raise ValueError("omega must be finite")

    @property
    def gamma2(self) -> float:
        return self.gamma1 + 2 * self.gamma_p

    @property
    def resonant(self) -> bool:
        return self.detuning_share == 0.0


@dataclass(frozen=True)
class BlochVector:
    sp: complex
    sm: complex
    sz: float

    @classmethod
    def from_array(cls, v) -> "BlochVector":
        return cls(complex(v[0]), complex(v[1]), float(np.real(v[2])))

    def as_array(self) -> np.ndarray:
        return np.array([self.sp, self.sm, self.sz], dtype=complex)

    @property
    def excited_population(self) -> float:
        """``<s+ s-> = (1 + sz) / 2``."""
        return 0.5 * (1 + self.sz)

    def is_physical(self, eps: float = 1e-10) -> bool:
        return (
            abs(self.sm - np.conj(self.sp)) <= eps
            and abs(self.sz) <= 1 + eps
            and abs(self.sp) ** 2 <= (1 + self.sz) * (1 - self.sz) / 4 + eps
        )


@dataclass(frozen=True)
class BlochPropagator:
    c_matrix: np.ndarray
    d_vector: np.ndarray
    tau: float
    meta: dict = field(default_factory=dict, compare=False)

    def apply(self, v) -> np.ndarray:
        return self.c_matrix @ np.asarray(v, dtype=complex) + self.d_vector


def bloch_system(p: TlsParams) -> tuple[np.ndarray, np.ndarray]:
    """System matrix ``A`` and drive vector ``b`` of ``dv/dt = A v + b``."""
    g1, g2 = p.gamma1, p.gamma2
    w = complex(p.omega)
    dd = p.detuning_share
    a = np.array(
        [
            [-g2 / 2 + 1j * dd, 0, -0.5j * np.conj(w)],
            [0, -g2 / 2 - 1j * dd, 0.5j * w],
            [-1j * w, 1j * np.conj(w), -g1],
        ],
        dtype=complex,
    )
    b = np.array([0, 0, -g1], dtype=complex)
    return a, b


def steady_state(p: TlsParams) -> BlochVector:
    return BlochVector.from_array(BlochDynamics(p).v_ss)


class BlochDynamics:
    """Eigendecomposition of one parameter set, shared by all delays."""

    def __init__(self, p: TlsParams):
        self.params = p
        self.a, self.b = bloch_system(p)
        if np.linalg.cond(self.a) > 1e14:
            raise DegenerateParametersError(f"singular Bloch matrix for {p}")
        self.v_ss = np.linalg.solve(self.a, -self.b)
        self.eigvals, self.x = np.linalg.eig(self.a)
        self.cond = float(np.linalg.cond(self.x))
        self.use_expm = self.cond > COND_LIMIT
        self.x_inv = None if self.use_expm else np.linalg.inv(self.x)

    def c_matrix(self, tau: float) -> np.ndarray:
        if tau < 0:
            raise ValueError("tau must be non-negative")
        if self.use_expm:
            return linalg.expm(self.a * tau)
        return (self.x * np.exp(self.eigvals * tau)) @ self.x_inv

    def propagator(self, tau: float) -> BlochPropagator:
        c = self.c_matrix(tau)
        d = self.v_ss - c @ self.v_ss
        return BlochPropagator(c, d, tau, {"fallback_expm": self.use_expm, "cond_x": self.cond})

    def evolve(self, u0: np.ndarray, inhom: complex, tau) -> np.ndarray:
        """``C(tau) u0 + d(tau) * inhom`` for every delay, shape ``(len(tau), 3)``.

        ``inhom`` scales the drive term, as needed for two-time averages
        where the earlier operator multiplies the constant part.
        """
        tau = np.atleast_1d(np.asarray(tau, dtype=float))
        if np.any(tau < 0):
            raise ValueError("tau must be non-negative")
        u0 = np.asarray(u0, dtype=complex)
        if self.use_expm:
            out = np.empty((tau.size, 3), dtype=complex)
            for i, t in enumerate(tau):
                c = linalg.expm(self.a * t)
                out[i] = c @ u0 + (self.v_ss - c @ self.v_ss) * inhom
            return out
        delta = u0 - self.v_ss * inhom
        coeffs = self.x_inv @ delta
        return (np.exp(np.outer(tau, self.eigvals)) * coeffs) @ self.x.T + self.v_ss * inhom

    def g1(self, tau) -> np.ndarray:
        v = self.v_ss
        pop = 0.5 * (1 + v[2])
        # <s+ s+>, <s+ s->, <s+ sz> at equal times
        u0 = np.array([0.0, pop, -v[0]])
        return self.evolve(u0, v[0], tau)[:, 1]

    def g2(self, tau) -> np.ndarray:
        pop = 0.5 * (1 + self.v_ss[2])
        # <s+ s+ s->, <s+ s- s->, <s+ sz s-> at equal times
        w0 = np.array([0.0, 0.0, -pop])
        sz = self.evolve(w0, pop, tau)[:, 2]
        return (0.5 * pop + 0.5 * sz).real


def propagator(p: TlsParams, tau: float) -> BlochPropagator:
    return BlochDynamics(p).propagator(tau)


def g1_tls_regression(p: TlsParams, tau) -> np.ndarray:
    return BlochDynamics(p).g1(tau)


def g2_tls_regression(p: TlsParams, tau) -> np.ndarray:
    return BlochDynamics(p).g2(tau)


# --- resonant closed forms ---------------------------------------------------

def _kappa(p: TlsParams) -> complex:
    w2 = abs(complex(p.omega)) ** 2
    return 0.25 * cmath.sqrt((2 * p.gamma1 - p.gamma2) ** 2 - 16 * w2)


def _damped_hyperbolics(decay: float, kappa: complex, tau: np.ndarray):
    """``exp(-decay tau) cosh(kappa tau)`` and ``exp(-decay tau) sinh(kappa tau) / kappa``.

    Written with exponents of non-positive real part, and with the series of
    ``sinh(x) / x`` for small ``kappa tau`` so ``kappa -> 0`` is regular.
    """
    x = kappa * tau
    up = np.exp((kappa - decay) * tau)
    down = np.exp((-kappa - decay) * tau)
    ch = 0.5 * (up + down)
    small = np.abs(x) < SERIES_LIMIT
    with np.errstate(divide="ignore", invalid="ignore"):
        sh = np.where(small, 0.0, 0.5 * (up - down) / (kappa if kappa != 0 else 1.0))
    x2 = x[small] ** 2
    sh[small] = np.exp(-decay * tau[small]) * tau[small] * (1 + x2 / 6 + x2 * x2 / 120 + x2**3 / 5040)
    return ch, sh


def _require_resonant(p: TlsParams):
    if not p.resonant:
        raise ValueError("closed forms assume resonant drive; use the regression path")


def g1_tls_closed(p: TlsParams, tau) -> np.ndarray:
    """Resonant ``G1(tau)`` for ``tau >= 0``."""
    _require_resonant(p)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    g1, g2 = p.gamma1, p.gamma2
    w2 = abs(complex(p.omega)) ** 2
    d = g1 * g2 + 2 * w2
    pop = w2 / d
    kappa = _kappa(p)
    lam_sum = 2 * (2 * w2 - 2 * g1**2 + g1 * g2) / d
    # (lam+ - lam-) = lam_diff / kappa; the 1/kappa is absorbed by sinh/kappa
    lam_diff = (2 * w2 * (6 * g1 - g2) - g1 * (2 * g1 - g2) ** 2) / (2 * d)
    ch, sh = _damped_hyperbolics((2 * g1 + g2) / 4, kappa, tau)
    value = pop * (g1**2 / d + 0.5 * np.exp(-g2 * tau / 2) + 0.25 * (lam_sum * ch + lam_diff * sh))
    if np.max(np.abs(value.imag), initial=0.0) > 1e-10 * pop:
        raise NumericalError("G1 closed form acquired an imaginary part")
    return value.real


def g2_tls_closed(p: TlsParams, tau) -> tuple[np.ndarray, np.ndarray]:
    """Resonant ``(G2(tau), g2(tau))`` with ``g2 = G2 / G1(0)^2``."""
    _require_resonant(p)
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    g1, g2 = p.gamma1, p.gamma2
    w2 = abs(complex(p.omega)) ** 2
    pop = w2 / (g1 * g2 + 2 * w2)
    decay = (2 * g1 + g2) / 4
    ch, sh = _damped_hyperbolics(decay, _kappa(p), tau)
    norm = (1 - (ch + decay * sh)).real
    return pop**2 * norm, norm


def coherent_fraction(p: TlsParams) -> float:
    """``|<s->|^2 / <s+ s->``, the long-delay plateau of ``G1 / G1(0)``."""
    v = steady_state(p)
    return abs(v.sm) ** 2 / v.excited_population


# --- output-port correlations ------------------------------------------------

@dataclass(frozen=True)
class ContinuousOutput:
    """Output correlations of two driven emitters; ``*_norm`` divide by
    the product of mean input intensities."""

    tau: np.ndarray
    auto: np.ndarray
    cross: np.ndarray
    auto_norm: np.ndarray
    cross_norm: np.ndarray
    normalization: float
    meta: dict = field(default_factory=dict, compare=False)


def _source_correlations(p: TlsParams, tau: np.ndarray, method: str):
    if method == "auto":
        method = "closed" if p.resonant else "regression"
    if method == "closed":
        g1 = np.asarray(g1_tls_closed(p, tau), dtype=complex)
        g2, _ = g2_tls_closed(p, tau)
        g1_0 = float(np.real(g1_tls_closed(p, 0.0)[0]))
    elif method == "regression":
        dyn = BlochDynamics(p)
        g1, g2 = dyn.g1(tau), dyn.g2(tau)
        g1_0 = 0.5 * (1 + dyn.v_ss[2].real)
    else:
        raise ValueError(f"unknown method {method!r}")
    return g1, g2, g1_0


def g2_continuous_output(p_a: TlsParams, p_b: TlsParams, delta: float, tau,
                         method: str = "auto") -> ContinuousOutput:
    """Output G2 for emitters whose carriers differ by ``delta``.

    Source ``a`` sits at ``+delta/2`` and ``b`` at ``-delta/2`` from the
    common frame, which multiplies their G1 by ``exp(-/+ i delta tau / 2)``.
    The interference term then carries ``exp(+/- i delta tau)`` and, for
    identical sources, reduces to ``cos(delta tau) |G1|^2``.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    g1a, g2a, g1a0 = _source_correlations(p_a, tau, method)
    g1b, g2b, g1b0 = _source_correlations(p_b, tau, method)
    g1a = g1a * np.exp(-0.5j * delta * tau)
    g1b = g1b * np.exp(0.5j * delta * tau)
    common = 0.25 * (g2a + g2b + 2 * g1a0 * g1b0)
    interference = 0.25 * 2 * (np.conj(g1a) * g1b).real
    auto = common + interference
    cross = common - interference
    norm = g1a0 * g1b0
    meta = {
        "coherent_fraction": [coherent_fraction(p_a), coherent_fraction(p_b)],
        # half the product of coherent fractions survives at long delay
        "plateau_residual": 0.5 * coherent_fraction(p_a) * coherent_fraction(p_b),
    }
    return ContinuousOutput(tau, auto, cross, auto / norm, cross / norm, norm, meta)


def g2_polarized_output(p: TlsParams, phi: float, tau, method: str = "auto") -> ContinuousOutput:
    """Output G2 for identical emitters whose polarizations differ by ``phi``.

    Only the parallel component interferes, so the interference term is
    scaled by ``cos(phi)^2``.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    g1, g2, g1_0 = _source_correlations(p, tau, method)
    common = 0.5 * (g2 + g1_0**2)
    interference = 0.5 * math.cos(phi) ** 2 * np.abs(g1) ** 2
    norm = g1_0**2
    auto, cross = common + interference, common - interference
    meta = {"plateau_residual": 0.5 * math.cos(phi) ** 2 * coherent_fraction(p) ** 2}
    return ContinuousOutput(tau, auto, cross, auto / norm, cross / norm, norm, meta)
