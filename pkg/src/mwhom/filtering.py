"""Finite-impulse-response filtering of sampled photon modes.

Filters act on the mode envelope in the frame rotating at the common
carrier, so only the relative detuning survives. Kernels are applied by full
discrete convolution; the default alignment is zero-phase (the output is
re-centred by half the kernel length) with a causal option.

FIR files are plain text: a ``# dt=<seconds>`` header line, then
one real coefficient per line.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Literal

import numpy as np
from scipy import signal

from .core import TimeGrid
from .pulsed import ModeFunction, SampledMode

FilterKind = Literal["identity", "square_window", "fir_coefficients", "windowed_lowpass"]
Alignment = Literal["centered", "causal"]


@dataclass(frozen=True)
class FilterSpec:
    """Description of a detection filter sampled at ``sample_dt``.

    ``cutoff`` (rad/s) and ``taps`` define a ``windowed_lowpass``; ``taps``
    alone defines a ``square_window``; ``coefficients`` gives explicit taps.
    """

    kind: FilterKind = "identity"
    sample_dt: float = 1e-9
    cutoff: float | None = None
    taps: int | None = None
    coefficients: tuple[float, ...] | None = None
    alignment: Alignment = "centered"

    def __post_init__(self):
        if not self.sample_dt > 0:
            raise ValueError("sample_dt must be positive")
        if self.kind == "windowed_lowpass":
            if self.cutoff is None or not self.cutoff > 0:
                raise ValueError("windowed_lowpass needs a positive cutoff")
            if self.taps is None or self.taps < 1:
                raise ValueError("windowed_lowpass needs taps >= 1")
        elif self.kind == "square_window":
            if self.taps is None or self.taps < 1:
                raise ValueError("square_window needs taps >= 1")
        elif self.kind == "fir_coefficients":
            if not self.coefficients:
                raise ValueError("fir_coefficients needs at least one coefficient")
            if not all(math.isfinite(c) for c in self.coefficients):
                raise ValueError("coefficients must be finite")
        elif self.kind != "identity":
            raise ValueError(f"unknown filter kind {self.kind!r}")
        if self.alignment not in ("centered", "causal"):
            raise ValueError(f"unknown alignment {self.alignment!r}")

    @classmethod
    def lowpass(cls, width: float, sample_dt: float, **kw) -> "FilterSpec":
        """Lowpass whose impulse response lasts about ``width`` seconds."""
        taps, cutoff = lowpass_taps_for_width(width, sample_dt)
        return cls("windowed_lowpass", sample_dt, cutoff=cutoff, taps=taps, **kw)


@dataclass(frozen=True)
class FilterKernel:
    """Taps for a fixed sample step ``dt``."""

    taps: np.ndarray
    dt: float
    alignment: Alignment = "centered"
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def is_identity(self) -> bool:
        return self.taps.size == 1 and self.taps[0] == 1.0

    @property
    def dc_gain(self) -> float:
        return float(self.taps.sum())

    @property
    def offset(self) -> int:
        """Samples by which the output grid starts before the input grid."""
        return (self.taps.size - 1) // 2 if self.alignment == "centered" else 0

    def apply(self, mode: SampledMode) -> SampledMode:
        return filter_mode(mode, self)

    def response(self, omega) -> np.ndarray:
        """Discrete-time frequency response at angular frequencies ``omega``."""
        _, h = signal.freqz(self.taps, worN=np.asarray(omega, dtype=float) * self.dt)
        return h


def lowpass_taps_for_width(width: float, dt: float) -> tuple[int, float]:
    """Tap count (odd) and cutoff (rad/s) for a lowpass of duration ``width``."""
    if not width > 0:
        raise ValueError("width must be positive")
    taps = max(1, int(round(width / dt)))
    if taps % 2 == 0:
        taps += 1
    return taps, 4 * math.pi / width


def make_filter(spec: FilterSpec) -> FilterKernel:
    dt = spec.sample_dt
    if spec.kind == "identity":
        taps = np.array([1.0])
    elif spec.kind == "square_window":
        taps = np.full(spec.taps, 1.0 / spec.taps)
    elif spec.kind == "fir_coefficients":
        taps = np.asarray(spec.coefficients, dtype=float)
    else:
        nyquist = math.pi / dt
        if spec.cutoff >= nyquist:
            raise ValueError(f"cutoff {spec.cutoff:g} rad/s is above the Nyquist rate {nyquist:g}")
        if spec.taps == 1:
            taps = np.array([1.0])
        else:
            taps = signal.firwin(spec.taps, spec.cutoff / nyquist, window="hamming")
            taps = taps / taps.sum()
    kernel = FilterKernel(taps, dt, spec.alignment, {"kind": spec.kind})
    kernel.meta["dc_gain"] = kernel.dc_gain
    kernel.meta["alignment"] = spec.alignment
    return kernel


def sample_mode(mode: ModeFunction, dt: float, support: tuple[float, float] | None = None) -> SampledMode:
    """Samples of ``mode`` on the lattice ``j * dt`` covering its support,
    with the common carrier removed."""
    if isinstance(mode, SampledMode):
        return mode
    lo, hi = support or mode.support()
    j0, j1 = int(math.floor(lo / dt)) - 1, int(math.ceil(hi / dt)) + 1
    grid = TimeGrid(j0 * dt, dt, j1 - j0 + 1)
    omega0 = getattr(getattr(mode, "params", None), "omega0", 0.0)
    return SampledMode(grid, mode(grid.points) * np.exp(1j * omega0 * grid.points))


def filter_mode(mode: SampledMode, kernel: FilterKernel) -> SampledMode:
    """Convolve the mode samples with the kernel taps."""
    if not math.isclose(mode.grid.dt, kernel.dt, rel_tol=1e-9):
        raise ValueError(f"mode step {mode.grid.dt:g} differs from kernel step {kernel.dt:g}")
    if kernel.is_identity:
        return mode
    out = np.convolve(mode.samples, kernel.taps.astype(complex))
    grid = TimeGrid(mode.grid.t0 - kernel.offset * mode.grid.dt, mode.grid.dt, out.size)
    meta = dict(mode.meta, filter=kernel.meta.get("kind"), taps=int(kernel.taps.size),
                alignment=kernel.alignment)
    return SampledMode(grid, out, meta)


def load_fir(path: str | Path) -> FilterKernel:
    """Read a FIR file; raises ``ValueError`` if the step header is missing."""
    dt = None
    coeffs = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if body.startswith("dt="):
                dt = float(body[3:])
            continue
        try:
            coeffs.append(float(line))
        except ValueError:
            raise ValueError(f"{path}:{lineno}: not a coefficient: {raw!r}") from None
    if dt is None:
        raise ValueError(f"{path}: missing '# dt=<seconds>' header")
    return make_filter(FilterSpec("fir_coefficients", dt, coefficients=tuple(coeffs)))


def save_fir(kernel: FilterKernel, path: str | Path) -> None:
    lines = [f"# dt={kernel.dt!r}"] + [repr(float(c)) for c in kernel.taps]
    Path(path).write_text("\n".join(lines) + "\n")
