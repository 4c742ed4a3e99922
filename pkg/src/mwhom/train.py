"""Trains of single photons and their circular second-order correlations.

Each source emits ``2N + 1`` photons, one per spatio-temporal mode, with the
``k``-th mode delayed by ``k * t_p``. Correlations are integrated over the
first detection time and, by default, evaluated as circular correlations:
the train is treated as one period of length ``T = (2N + 1) t_p`` and the
second detection time is wrapped around it, so every peak at ``k * t_p``
receives the same number of photon pairs.

Integration over the first detection time is done one of three ways:

``analytic``
    exact exponential integrals, unfiltered Lorentzian photons only;
``sampled``
    FFT circular correlation of modes sampled on a uniform lattice, used for
    Gaussian photons and for filtered modes;
``quadrature``
    adaptive quadrature per delay, slow, for spot checks.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Literal, Sequence

import numpy as np
from scipy import integrate

from .filtering import FilterKernel, sample_mode
from .core import CorrelationSeries, NumericalError, TimeGrid
from .pulsed import (
    GaussianModeParams,
    LorentzianModeParams,
    ModeFunction,
    SampledMode,
    Shape,
    ShiftedMode,
    mode_pair,
)

Method = Literal["auto", "analytic", "sampled", "quadrature"]


@dataclass(frozen=True)
class PulseTrainConfig:
    """Two trains of ``n_pulses`` photons with period ``t_p``.

    ``delta_t`` is the offset between the sources (``delta_tau`` for Gaussian
    photons) and ``delta`` their carrier difference. Exactly one of
    ``gamma`` (Lorentzian field decay rate) or ``sigma`` (Gaussian width) is
    set, matching ``shape``.
    """

    shape: Shape
    n_pulses: int
    t_p: float
    gamma: float | None = None
    sigma: float | None = None
    delta_t: float = 0.0
    delta: float = 0.0
    omega0: float = 0.0

    def __post_init__(self):
        if self.n_pulses < 1 or self.n_pulses % 2 == 0:
            raise ValueError(f"n_pulses must be a positive odd count, got {self.n_pulses}")
        if not self.t_p > 0:
            raise ValueError(f"t_p must be positive, got {self.t_p}")
        if self.shape == "lorentzian":
            if self.gamma is None or self.sigma is not None:
                raise ValueError("a Lorentzian train takes gamma and no sigma")
        elif self.shape == "gaussian":
            if self.sigma is None or self.gamma is not None:
                raise ValueError("a Gaussian train takes sigma and no gamma")
        else:
            raise ValueError(f"unknown shape {self.shape!r}")
        self.base_params()  # validates gamma/sigma
        if self.time_scale > self.t_p / 4:
            warnings.warn(
                f"pulse duration {self.time_scale:.3g} exceeds t_p/4 = {self.t_p / 4:.3g}; "
                "neighbouring photons overlap",
                stacklevel=2,
            )

    @property
    def half(self) -> int:
        return self.n_pulses // 2

    @property
    def period(self) -> float:
        return self.n_pulses * self.t_p

    @property
    def time_scale(self) -> float:
        return 1.0 / self.gamma if self.shape == "lorentzian" else self.sigma

    def base_params(self):
        if self.shape == "lorentzian":
            return LorentzianModeParams(self.gamma, self.delta_t, self.omega0, self.delta)
        return GaussianModeParams(self.sigma, self.delta_t, self.omega0, self.delta)

    def indistinguishable(self) -> "PulseTrainConfig":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return replace(self, delta_t=0.0, delta=0.0)


@dataclass(frozen=True)
class TrainCorrelationResult:
    series_auto: CorrelationSeries
    series_cross: CorrelationSeries
    normalization: float
    wrapped: bool
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def tau(self) -> np.ndarray:
        return self.series_cross.tau


def train_modes(config: PulseTrainConfig) -> tuple[list[ShiftedMode], list[ShiftedMode]]:
    """Modes ``k = -N .. N`` of both inputs."""
    base_a, base_b = mode_pair(config.base_params())
    ks = range(-config.half, config.half + 1)
    return (
        [base_a.shifted(k * config.t_p) for k in ks],
        [base_b.shifted(k * config.t_p) for k in ks],
    )


def train_intensity_correlation(config: PulseTrainConfig, t, tau):
    """Output intensity (auto, cross) correlation of the finite train.

    With one photon per mode, the intra-mode fourth moment vanishes and each
    sum over pairs of distinct modes is written as a full double sum minus
    its diagonal, so the cost is linear in the number of pulses.
    """
    modes_a, modes_b = train_modes(config)
    return _train_intensity(modes_a, modes_b, t, tau)


def _train_intensity(modes_a, modes_b, t, tau):
    t = np.asarray(t, dtype=float)
    t2 = t + np.asarray(tau, dtype=float)
    stats = []
    for modes in (modes_a, modes_b):
        z1 = np.array([m(t) for m in modes])
        z2 = np.array([m(t2) for m in modes])
        p1, p2 = np.abs(z1) ** 2, np.abs(z2) ** 2
        stats.append(dict(
            a=np.sum(np.conj(z2) * z1, axis=0),   # sum_k zeta_k*(t+tau) zeta_k(t)
            i1=p1.sum(axis=0),
            i2=p2.sum(axis=0),
            diag=np.sum(p1 * p2, axis=0),
        ))
    common = 0.0
    interference = 0.0
    for c, d in ((0, 1), (1, 0)):
        sc, sd = stats[c], stats[d]
        same_source = (np.abs(sc["a"]) ** 2 - sc["diag"]) + (sc["i1"] * sc["i2"] - sc["diag"])
        common = common + same_source + sc["i1"] * sd["i2"]
        interference = interference + (sc["a"] * np.conj(sd["a"])).real
    return 0.25 * (common + interference), 0.25 * (common - interference)


# --- integrated correlations -------------------------------------------------

@dataclass(frozen=True)
class _Member:
    source: int
    index: int
    image: int
    release: float
    carrier: float


def _lorentz_members(config: PulseTrainConfig, images: Sequence[int]) -> list[_Member]:
    base_a, base_b = mode_pair(config.base_params())
    members = []
    for source, base in enumerate((base_a, base_b)):
        for k in range(-config.half, config.half + 1):
            for p in images:
                members.append(_Member(source, k, p, base.release + k * config.t_p + p * config.period,
                                       base.carrier))
    return members


def _image_range(config: PulseTrainConfig, tau_max: float, support: float) -> range:
    reach = tau_max + config.n_pulses * config.t_p + support
    p = int(math.ceil(reach / config.period))
    return range(-p, p + 1)


def _exp_product_integral(gamma, rA, wA, rB, wB, rC, wC, rD, wD, tau):
    """``integral zeta_A*(t) zeta_B(t) zeta_C*(t+tau) zeta_D(t+tau) dt`` for
    truncated exponentials with release times ``r`` and carriers ``w``."""
    low = np.maximum(np.maximum(rA, rB), np.maximum(rC, rD) - tau)
    nu = wA - wB + wC - wD
    expo = gamma * ((rA - low) + (rB - low) + (rC - tau - low) + (rD - tau - low))
    phase = (wC - wD) * tau + nu * low
    return 4 * gamma**2 * np.exp(expo + 1j * phase) / (4 * gamma - 1j * nu)


def _analytic_g2(config: PulseTrainConfig, tau: np.ndarray, wrap: bool, chunk: int = 256,
                 threads: int = 1):
    g = config.gamma
    support = 40.0 / g
    images = _image_range(config, float(np.max(np.abs(tau), initial=0.0)), support) if wrap else [0]
    members = _lorentz_members(config, images)
    anchors = [m for m in members if m.image == 0]

    def arr(ms, attr):
        return np.array([getattr(m, attr) for m in ms], dtype=float)

    # index tuples (A, B, C, D, weight) for every anchored term
    blocks = []
    for c, d in ((0, 1), (1, 0)):
        anc = [m for m in anchors if m.source == c]
        same = [m for m in members if m.source == c]
        other = [m for m in members if m.source == d]
        pairs_same = [(a, n) for a in anc for n in same if n.index != a.index]
        pairs_other = [(a, l) for a in anc for l in other]
        if pairs_same:
            A = [a for a, _ in pairs_same]
            N = [n for _, n in pairs_same]
            blocks.append(("common", A, N, N, A))   # zeta_k*(t) zeta_n(t) zeta_n*(t+tau) zeta_k(t+tau)
            blocks.append(("common", A, A, N, N))   # |zeta_k(t)|^2 |zeta_n(t+tau)|^2
        A = [a for a, _ in pairs_other]
        L = [l for _, l in pairs_other]
        blocks.append(("common", A, A, L, L))       # |zeta_ck(t)|^2 |zeta_dl(t+tau)|^2
        blocks.append(("interference", L, A, A, L))  # zeta_dl*(t) zeta_ck(t) zeta_ck*(t+tau) zeta_dl(t+tau)

    packed = []
    for kind, *ms in blocks:
        cols = []
        for group in ms:
            cols.append(arr(group, "release")[:, None])
            cols.append(arr(group, "carrier")[:, None])
        packed.append((kind, cols))

    def run(sl):
        tt = tau[sl][None, :]
        common = np.zeros(tt.shape[1])
        interference = np.zeros(tt.shape[1])
        for kind, cols in packed:
            val = _exp_product_integral(g, *cols, tt).sum(axis=0).real
            if kind == "common":
                common += val
            else:
                interference += val
        return common, interference

    slices = [slice(i, i + chunk) for i in range(0, tau.size, chunk)]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            parts = list(pool.map(run, slices))
    else:
        parts = [run(sl) for sl in slices]
    common = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0)
    interference = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0)
    return 0.25 * (common + interference), 0.25 * (common - interference)


def _quadrature_g2(modes_a, modes_b, config_period: float | None, tau: np.ndarray,
                   epsabs: float = 1e-13, epsrel: float = 1e-11):
    """Per-delay adaptive quadrature of the anchored intensity correlation."""
    n = len(modes_a)
    if config_period is not None:
        span = max(m.support()[1] for m in modes_a + modes_b) - min(m.support()[0] for m in modes_a + modes_b)
        p = int(math.ceil((float(np.max(np.abs(tau), initial=0.0)) + span) / config_period))
        images = range(-p, p + 1)
    else:
        images = [0]
    partners = [[(k, m.shifted(q * config_period) if q else m) for k, m in enumerate(ms) for q in images]
                for ms in (modes_a, modes_b)]
    anchors = (list(enumerate(modes_a)), list(enumerate(modes_b)))

    index = [np.array([k for k, _ in ps]) for ps in partners]
    own = [idx[None, :] != np.arange(n)[:, None] for idx in index]

    def values(ms, x):
        return np.array([m(x) for _, m in ms], dtype=complex)

    def integrand(t, tau_val, sign):
        t2 = t + tau_val
        a1 = [values(anchors[s], t) for s in (0, 1)]
        a2 = [values(anchors[s], t2) for s in (0, 1)]
        p1 = [values(partners[s], t) for s in (0, 1)]
        p2 = [values(partners[s], t2) for s in (0, 1)]
        total = 0.0
        for c, d in ((0, 1), (1, 0)):
            z1, z2, w1, w2 = a1[c], a2[c], p1[c], p2[c]
            # distinct photons of one source; images of the anchor are excluded
            pair = ((np.conj(z1) * z2)[:, None] * (w1 * np.conj(w2))[None, :]).real
            pair += (np.abs(z1) ** 2)[:, None] * (np.abs(w2) ** 2)[None, :]
            total += pair[own[c]].sum()
            total += np.sum(np.abs(z1) ** 2) * np.sum(np.abs(p2[d]) ** 2)
            total += sign * (np.sum(z1 * np.conj(z2)) * np.sum(np.conj(p1[d]) * p2[d])).real
        return 0.25 * total

    lo = min(m.support()[0] for m in modes_a + modes_b)
    hi = max(m.support()[1] for m in modes_a + modes_b)
    out = np.zeros((2, tau.size))
    for i, tv in enumerate(tau.tolist()):
        pts = sorted({b for m in modes_a + modes_b for b in m.breakpoints()}
                     | {b - tv for _, m in partners[0] + partners[1] for b in m.breakpoints()})
        pts = [x for x in pts if lo < x < hi]
        for j, sign in enumerate((1, -1)):
            out[j, i] = integrate.quad(integrand, lo, hi, args=(tv, sign), points=pts or None,
                                       limit=2000, epsabs=epsabs, epsrel=epsrel, full_output=1)[0]
    return out[0], out[1]


def _ccorr(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Circular ``sum_j conj(f[j]) g[j + l]`` for all lags ``l``."""
    return np.fft.ifft(np.conj(np.fft.fft(f)) * np.fft.fft(g))


def _place(mode: SampledMode, n: int, j_start: int, periodic: bool) -> np.ndarray:
    """Samples of ``mode`` on lattice indices ``j_start .. j_start + n - 1``.

    Periodic placement wraps every sample modulo ``n``.
    """
    out = np.zeros(n, dtype=complex)
    idx = int(round(mode.grid.t0 / mode.grid.dt)) + np.arange(mode.grid.n) - j_start
    if periodic:
        np.add.at(out, idx % n, mode.samples)
    else:
        if idx.min() < 0 or idx.max() >= n:
            raise NumericalError("sampled mode does not fit the padded correlation window")
        out[idx] = mode.samples
    return out


def _period_samples(t_p: float, dt: float) -> int:
    n_p = t_p / dt
    if abs(n_p - round(n_p)) > 1e-6 * n_p:
        raise ValueError(f"t_p = {t_p:g} is not a multiple of the sample step {dt:g}")
    return int(round(n_p))


def _sampled_g2(base_a: SampledMode, base_b: SampledMode, n_pulses: int, n_p: int,
                dt: float, wrap: bool):
    """Lattice correlations for all lags; returns (window length, auto, cross)."""
    M = n_pulses
    N = n_pulses // 2
    if wrap:
        n = M * n_p
        j_start = -N * n_p - n_p // 2
    else:
        lo = min(base_a.grid.t0, base_b.grid.t0) / dt - N * n_p
        hi = max(base_a.grid.stop, base_b.grid.stop) / dt + N * n_p
        span = int(math.ceil(hi - lo)) + 2
        n = 1 << int(math.ceil(math.log2(2 * span)))
        j_start = int(math.floor(lo)) - 1

    def member(base, k):
        shifted = SampledMode(TimeGrid(base.grid.t0 + k * n_p * dt, dt, base.grid.n), base.samples)
        return _place(shifted, n, j_start, wrap)

    z = [np.array([member(b, k) for k in range(-N, N + 1)]) for b in (base_a, base_b)]
    intensity = [np.sum(np.abs(zc) ** 2, axis=0) for zc in z]

    common = np.zeros(n)
    interference = np.zeros(n)
    for c, d in ((0, 1), (1, 0)):
        zc, zd = z[c], z[d]
        # |zeta_ck(t)|^2 summed against all modes of both sources at t + tau
        common += _ccorr(intensity[c], intensity[c] + intensity[d]).real
        if wrap:
            # translation invariance: every mode index is an anchor of equal weight
            pc0 = np.abs(zc[N]) ** 2
            common -= M * _ccorr(pc0, pc0).real
            for j in range(M):
                if j != N:
                    x = np.conj(zc[N]) * zc[j]
                    common += M * _ccorr(x, x).real
                y = zc[N] * np.conj(zd[j])
                interference += M * _ccorr(y, y).real
        else:
            for k in range(M):
                pk = np.abs(zc[k]) ** 2
                common -= _ccorr(pk, pk).real
                for j in range(M):
                    if j != k:
                        x = np.conj(zc[k]) * zc[j]
                        common += _ccorr(x, x).real
                    y = zc[k] * np.conj(zd[j])
                    interference += _ccorr(y, y).real
    auto = 0.25 * dt * (common + interference)
    cross = 0.25 * dt * (common - interference)
    return n, auto, cross


def _lags_for(grid: TimeGrid, dt: float, n: int) -> np.ndarray:
    ratio = grid.dt / dt
    start = grid.t0 / dt
    if abs(ratio - round(ratio)) > 1e-6 * ratio or abs(start - round(start)) > 1e-6 * max(1.0, abs(start)):
        raise ValueError("delay grid must lie on the sample lattice")
    lags = int(round(start)) + int(round(ratio)) * np.arange(grid.n)
    if np.any(np.abs(lags) >= n // 2 + 1):
        raise ValueError("delay grid exceeds the correlation window")
    return lags % n


def _resolve_method(config: PulseTrainConfig, method: Method, filtered: bool) -> str:
    if method == "auto":
        if filtered or config.shape == "gaussian":
            return "sampled"
        return "analytic"
    if method == "analytic" and (filtered or config.shape != "lorentzian"):
        raise ValueError("the analytic path covers unfiltered Lorentzian trains only")
    if method not in ("analytic", "sampled", "quadrature"):
        raise ValueError(f"unknown method {method!r}")
    return method


def _check_resolution(config: PulseTrainConfig, step: float):
    limit = config.time_scale / 10
    if step > limit * (1 + 1e-9):
        raise ValueError(
            f"step {step:g} is coarser than {limit:g} (1/10 of the pulse time scale)"
        )


def g2_train(
    config: PulseTrainConfig,
    tau_grid: TimeGrid,
    *,
    wrap: bool = True,
    method: Method = "auto",
    kernel: FilterKernel | None = None,
    sample_dt: float | None = None,
    normalize: bool = True,
    threads: int = 1,
) -> TrainCorrelationResult:
    """Output G2 (auto and cross) of the two trains on ``tau_grid``.

    The series are normalized so that the cross-correlation peaks at
    ``+/- t_p`` equal one for indistinguishable photons of the same train
    (``delta_t = delta = 0``, same filter), computed by a reference run.

    ``kernel`` is a :class:`~mwhom.filtering.FilterKernel` applied to both
    input modes; any kernel other than the identity forces the sampled path.
    ``sample_dt`` is the lattice step of the sampled path (default: the
    delay-grid step); ``t_p`` and the delay grid must lie on that lattice.
    """
    filtered = kernel is not None and not kernel.is_identity
    chosen = _resolve_method(config, method, filtered)
    # quadrature is for spot checks at sparse delays; the other paths must
    # resolve the pulse shape
    if chosen != "quadrature":
        _check_resolution(config, tau_grid.dt if tau_grid.n > 1 else 0.0)
    if chosen == "sampled" and (sample_dt is not None or filtered):
        _check_resolution(config, sample_dt or kernel.dt)
        if filtered and sample_dt is not None and not math.isclose(sample_dt, kernel.dt, rel_tol=1e-9):
            raise ValueError("sample_dt must equal the filter step")
    tau = tau_grid.points
    meta = {"method": chosen, "wrap": wrap, "n_pulses": config.n_pulses}

    def evaluate(cfg: PulseTrainConfig, taus: np.ndarray | None):
        if chosen == "analytic":
            t = taus if taus is not None else tau
            return _analytic_g2(cfg, t, wrap, threads=threads)
        if chosen == "quadrature":
            modes_a, modes_b = train_modes(cfg)
            t = taus if taus is not None else tau
            return _quadrature_g2(modes_a, modes_b, cfg.period if wrap else None, t)
        dt = sample_dt or (kernel.dt if filtered else tau_grid.dt)
        base = [sample_mode(m, dt) for m in mode_pair(cfg.base_params())]
        if filtered:
            base = [kernel.apply(b) for b in base]
        n, auto, cross = _sampled_g2(base[0], base[1], cfg.n_pulses, _period_samples(cfg.t_p, dt),
                                     dt, wrap)
        if taus is None:
            lags = _lags_for(tau_grid, dt, n)
        else:
            lags = np.round(taus / dt).astype(int) % n
        meta["sample_dt"] = dt
        return auto[lags], cross[lags]

    auto, cross = evaluate(config, None)
    if not (np.all(np.isfinite(auto)) and np.all(np.isfinite(cross))):
        raise NumericalError("non-finite train correlation")

    scale = 1.0
    if normalize:
        ref = config.indistinguishable()
        _, ref_cross = evaluate(ref, np.array([config.t_p]))
        scale = float(ref_cross[0])
        if not scale > 0:
            raise NumericalError("reference peak at t_p is not positive")
    meta["reference_peak"] = scale

    size = max(float(np.max(np.abs(auto), initial=0.0)), scale if normalize else 0.0)
    series_auto = CorrelationSeries(tau_grid, auto, "G2_auto", meta=dict(meta), magnitude=size)
    series_cross = CorrelationSeries(tau_grid, cross, "G2_cross", meta=dict(meta), magnitude=size)
    if normalize:
        series_auto = series_auto.normalized(scale)
        series_cross = series_cross.normalized(scale)
    return TrainCorrelationResult(series_auto, series_cross, scale, wrap, meta)


def g2_pair_sampled(mode_a: ModeFunction, mode_b: ModeFunction, tau_grid: TimeGrid,
                    kernel: FilterKernel | None = None,
                    sample_dt: float | None = None) -> tuple[CorrelationSeries, CorrelationSeries]:
    """Output (auto, cross) G2 of a single photon pair from lattice samples,
    optionally after filtering both modes."""
    dt = sample_dt or (kernel.dt if kernel is not None else tau_grid.dt)
    base = [sample_mode(m, dt) for m in (mode_a, mode_b)]
    if kernel is not None:
        base = [kernel.apply(b) for b in base]
    n, auto, cross = _sampled_g2(base[0], base[1], 1, 1, dt, wrap=False)
    lags = _lags_for(tau_grid, dt, n)
    meta = {"method": "sampled", "sample_dt": dt}
    # roundoff in a suppressed cross series scales with the auto peak
    size = float(np.max(np.abs(auto)))
    return (CorrelationSeries(tau_grid, auto[lags], "G2_auto", meta=dict(meta), magnitude=size),
            CorrelationSeries(tau_grid, cross[lags], "G2_cross", meta=dict(meta), magnitude=size))


def peak_fwhm(tau: np.ndarray, values: np.ndarray, center: float) -> float:
    """Full width at half maximum of the peak nearest ``center``.

    The half-maximum crossings are located by linear interpolation.
    """
    i = int(np.argmin(np.abs(tau - center)))
    # climb to the local maximum
    while 0 < i < len(values) - 1 and max(values[i - 1], values[i + 1]) > values[i]:
        i = i - 1 if values[i - 1] > values[i + 1] else i + 1
    half = values[i] / 2
    lo = i
    while lo > 0 and values[lo] > half:
        lo -= 1
    hi = i
    while hi < len(values) - 1 and values[hi] > half:
        hi += 1
    if values[lo] > half or values[hi] > half:
        raise ValueError("peak does not fall to half maximum inside the grid")
    t_lo = np.interp(half, [values[lo], values[lo + 1]], [tau[lo], tau[lo + 1]])
    t_hi = np.interp(half, [values[hi], values[hi - 1]], [tau[hi], tau[hi - 1]])
    return float(t_hi - t_lo)
