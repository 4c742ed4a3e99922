"""Beam-splitter transform and output correlation functions.

Field amplitudes are plain Python/numpy complex numbers. Mode functions are
any callable ``t -> complex`` (see :mod:`mwhom.pulsed`), so this module has no
dependency on a particular photon shape.

The output ports are labelled ``a`` and ``b`` and follow

    a = (a' - b') / sqrt(2),    b = (a' + b') / sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations
from typing import Callable, Literal, Sequence

import numpy as np

#: Tolerance below zero tolerated for second-order correlation values.
EPS_NUM = 1e-9

SQRT2 = math.sqrt(2.0)

#: Balanced beam-splitter matrix acting on (a', b').
BS_MATRIX = np.array([[1.0, -1.0], [1.0, 1.0]]) / SQRT2

Port = Literal["auto", "cross"]
Kind = Literal["G1", "G2_auto", "G2_cross", "intensity"]


class GridMismatchError(ValueError):
    """Correlation series were evaluated on different delay grids."""


class NegativeCorrelationError(ValueError):
    """A second-order correlation fell below ``-EPS_NUM``."""


class NumericalError(RuntimeError):
    """A quadrature, ODE solve or linear solve did not reach its tolerance."""


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t0 + k*dt`` for ``k = 0 .. n-1``."""

    t0: float
    dt: float
    n: int

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"grid step must be positive, got {self.dt}")
        if self.n < 2:
            raise ValueError(f"grid needs at least 2 points, got {self.n}")

    @classmethod
    def symmetric(cls, half_width: float, dt: float) -> "TimeGrid":
        """Grid on ``[-half_width, half_width]`` that contains 0 exactly."""
        k = int(math.floor(half_width / dt + 1e-9))
        return cls(-k * dt, dt, 2 * k + 1)

    @classmethod
    def span(cls, start: float, stop: float, dt: float) -> "TimeGrid":
        n = int(math.floor((stop - start) / dt + 1e-9)) + 1
        return cls(start, dt, n)

    @property
    def points(self) -> np.ndarray:
        return self.t0 + np.arange(self.n) * self.dt

    @property
    def stop(self) -> float:
        return self.t0 + (self.n - 1) * self.dt

    def index_of(self, t: float) -> int:
        """Index of the grid point nearest to ``t``."""
        return int(np.clip(round((t - self.t0) / self.dt), 0, self.n - 1))


@dataclass(frozen=True)
class CorrelationSeries:
    """Correlation values on a delay grid.

    ``normalization`` is the scale factor already divided out of ``values``
    (1.0 for raw series). G2 values must be real and not below
    ``-EPS_NUM * max(1, magnitude)`` before normalization, so the bound stays
    meaningful in SI units; violations raise rather than being clamped.
    ``magnitude`` is the size of the computation the values came from
    (default: their own peak), which matters for series that are nearly
    zero throughout.
    """

    grid: TimeGrid
    values: np.ndarray
    kind: Kind
    normalization: float = 1.0
    meta: dict = field(default_factory=dict, compare=False)
    magnitude: float | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.grid.n,):
            raise ValueError(
                f"{values.shape[0] if values.ndim else 0} values for a grid of {self.grid.n} points"
            )
        if not np.all(np.isfinite(values)):
            raise NumericalError(f"non-finite values in {self.kind} series")
        if self.kind.startswith("G2") or self.kind == "intensity":
            if np.iscomplexobj(values):
                if np.max(np.abs(values.imag), initial=0.0) > EPS_NUM * max(1.0, np.max(np.abs(values))):
                    raise ValueError(f"{self.kind} values must be real")
                values = values.real
            raw = values * self.normalization
            peak = float(np.max(np.abs(raw), initial=0.0))
            bound = EPS_NUM * max(1.0, peak, self.magnitude or 0.0)
            if raw.min(initial=0.0) < -bound:
                raise NegativeCorrelationError(
                    f"{self.kind} reaches {raw.min():.3e} < -{bound:.3g}"
                )
        object.__setattr__(self, "values", values)

    @property
    def tau(self) -> np.ndarray:
        return self.grid.points

    def normalized(self, scale: float) -> "CorrelationSeries":
        """Divide by ``scale``; the factor is accumulated in ``normalization``."""
        return CorrelationSeries(
            self.grid, self.values / scale, self.kind, self.normalization * scale, dict(self.meta),
            self.magnitude,
        )

    def clamped(self) -> np.ndarray:
        """Values with tiny negative excursions set to zero, for output only."""
        if self.kind == "G1":
            return self.values
        return np.where(self.values < 0.0, 0.0, self.values)


@dataclass(frozen=True)
class InputCorrelations:
    """First- and second-order correlations of the two beam-splitter inputs."""

    g1_a: CorrelationSeries
    g1_b: CorrelationSeries
    g2_a: CorrelationSeries
    g2_b: CorrelationSeries
    g1_a0: float
    g1_b0: float

    def __post_init__(self):
        grids = {s.grid for s in (self.g1_a, self.g1_b, self.g2_a, self.g2_b)}
        if len(grids) != 1:
            raise GridMismatchError("input correlation series must share one delay grid")

    @property
    def grid(self) -> TimeGrid:
        return self.g1_a.grid

    @classmethod
    def identical(cls, g1: CorrelationSeries, g2: CorrelationSeries, g1_0: float) -> "InputCorrelations":
        return cls(g1, g1, g2, g2, g1_0, g1_0)


def beamsplitter_transform(a_in: complex, b_in: complex) -> tuple[complex, complex]:
    """Output amplitudes ``(a, b)`` of the balanced beam splitter."""
    return (a_in - b_in) / SQRT2, (a_in + b_in) / SQRT2


def output_intensities(i_a: float, i_b: float) -> tuple[float, float]:
    """Mean output intensities for separable, phase-averaged inputs."""
    mean = 0.5 * (i_a + i_b)
    return mean, mean


def output_g2_from_inputs(inputs: InputCorrelations, port: Port) -> CorrelationSeries:
    """Output G2 from the input first- and second-order correlations.

    Sums ``G2_c + G1_c(0) G1_d(0) +/- conj(G1_c) G1_d`` over both orderings of
    the inputs, with ``+`` for the auto- and ``-`` for the cross-correlation.
    """
    sign = _port_sign(port)
    pairs = [
        (inputs.g2_a.values, inputs.g1_a.values, inputs.g1_b.values, inputs.g1_a0 * inputs.g1_b0),
        (inputs.g2_b.values, inputs.g1_b.values, inputs.g1_a.values, inputs.g1_b0 * inputs.g1_a0),
    ]
    total = np.zeros(inputs.grid.n)
    for g2_c, g1_c, g1_d, prod0 in pairs:
        total = total + g2_c + prod0 + sign * (np.conj(g1_c) * g1_d).real
    kind = "G2_auto" if port == "auto" else "G2_cross"
    return CorrelationSeries(inputs.grid, 0.25 * total, kind)


def _port_sign(port: Port) -> int:
    if port == "auto":
        return 1
    if port == "cross":
        return -1
    raise ValueError(f"port must be 'auto' or 'cross', got {port!r}")


def _output_rows(port: Port) -> tuple[int, int, int, int]:
    # beam-splitter rows of r^+(t), a^+(t+tau), a(t+tau), r(t)
    return (0, 0, 0, 0) if _port_sign(port) > 0 else (1, 0, 0, 1)


# --- full expansion with phase-dependent moments ---------------------------

# Single-source moment of a normally ordered operator string. ``ops`` holds
# ``(dagger, time)`` pairs; ``source`` is 0 for a' and 1 for b'.
Op = tuple[bool, float]
SourceMoment = Callable[[int, Sequence[Op]], complex]

# Positions of the four operators in <r^+(t) a^+(t+tau) a(t+tau) r(t)>.
_R_DAG, _A_DAG, _A, _R = range(4)

# For each of the eight terms (per input ordering), the operator positions
# that belong to the second input of the ordering.
TERM_LAYOUT: tuple[frozenset[int], ...] = (
    frozenset(),                # <c+ c+ c c>
    frozenset({_A_DAG, _A}),    # <c+(t) c(t)> <d+(t+tau) d(t+tau)>
    frozenset({_R_DAG, _A}),    # <c+(t+tau) c(t)> <d+(t) d(t+tau)>
    frozenset({_A, _R}),        # <c+(t+tau) c+(t)> <d(t+tau) d(t)>
    frozenset({_R}),            # <d(t)> <c+ c+ c>
    frozenset({_R_DAG}),        # <d+(t)> <c+ c c>
    frozenset({_A}),            # <d(t+tau)> <c+ c+ c>
    frozenset({_A_DAG}),        # <d+(t+tau)> <c+ c c>
)


def term_signs(port: Port) -> np.ndarray:
    """Sign of each of the eight terms for the given output port.

    Derived from the products of beam-splitter matrix elements; identical
    for both input orderings.
    """
    out = _output_rows(port)
    signs = []
    for layout in TERM_LAYOUT:
        src = [1 if pos in layout else 0 for pos in range(4)]
        coef = np.prod([BS_MATRIX[out[p], src[p]] * SQRT2 for p in range(4)])
        signs.append(int(round(coef)))
    return np.array(signs)


def output_intensity_terms(
    moment: SourceMoment, t: float, tau: float, port: Port
) -> np.ndarray:
    """The eight terms of the output intensity correlation, each summed over
    both input orderings (including the overall 1/4)."""
    out = _output_rows(port)
    ops: list[Op] = [(True, t), (True, t + tau), (False, t + tau), (False, t)]
    terms = np.zeros(len(TERM_LAYOUT), dtype=complex)
    for c, d in permutations((0, 1)):
        for j, layout in enumerate(TERM_LAYOUT):
            src = [d if pos in layout else c for pos in range(4)]
            coef = np.prod([BS_MATRIX[out[p], src[p]] for p in range(4)])
            c_ops = [ops[p] for p in range(4) if p not in layout]
            d_ops = [ops[p] for p in range(4) if p in layout]
            value = moment(c, c_ops)
            if d_ops:
                value *= moment(d, d_ops)
            terms[j] += coef * value
    return terms


def direct_output_intensity(moment: SourceMoment, t: float, tau: float, port: Port) -> complex:
    """Brute-force expansion of all sixteen input moments.

    Independent of the eight-term grouping; used to cross-check it.
    """
    out = _output_rows(port)
    ops: list[Op] = [(True, t), (True, t + tau), (False, t + tau), (False, t)]
    total = 0.0j
    for src in np.ndindex(2, 2, 2, 2):
        coef = np.prod([BS_MATRIX[out[p], src[p]] for p in range(4)])
        value = 1.0 + 0.0j
        for s in (0, 1):
            sub = [ops[p] for p in range(4) if src[p] == s]
            if sub:
                value *= moment(s, sub)
        total += coef * value
    return total


def fock_moment(mode: Callable[[float], complex], ops: Sequence[Op], n: int = 1) -> complex:
    """Moment of a normally ordered string for ``n`` photons in one mode.

    With ``c(t) = zeta(t) c0``, the result is the product of mode factors
    times ``<n| c0^+^p c0^q |n> = delta_pq n!/(n-p)!``.
    """
    daggers = [d for d, _ in ops]
    p = sum(daggers)
    q = len(ops) - p
    if daggers != sorted(daggers, reverse=True):
        raise ValueError("operator string is not normally ordered")
    if p != q or p > n:
        return 0.0j
    value = complex(math.factorial(n) // math.factorial(n - p))
    for dagger, t in ops:
        z = complex(mode(t))
        value *= z.conjugate() if dagger else z
    return value


def coherent_moment(mode: Callable[[float], complex], alpha: complex, ops: Sequence[Op]) -> complex:
    """Moment of a normally ordered string for a coherent state ``|alpha>``."""
    value = 1.0 + 0.0j
    for dagger, t in ops:
        z = alpha * complex(mode(t))
        value *= z.conjugate() if dagger else z
    return value


def full_output_intensity_correlation(mode_a, mode_b, t: float, tau: float) -> tuple[float, float]:
    """Output intensity (auto, cross) correlation for one photon per input,
    evaluated term by term including the phase-dependent moments."""
    modes = (mode_a, mode_b)

    def moment(source: int, ops: Sequence[Op]) -> complex:
        return fock_moment(modes[source], ops)

    auto = output_intensity_terms(moment, t, tau, "auto").sum()
    cross = output_intensity_terms(moment, t, tau, "cross").sum()
    return float(auto.real), float(cross.real)
