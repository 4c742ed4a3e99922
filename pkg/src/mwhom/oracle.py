"""Brute-force reference computations.

Nothing here reuses the closed forms it is meant to check. Pulse-pair
correlations come from two-photon detection amplitudes integrated by
adaptive quadrature. Emitter correlations come from the density-matrix
master equation integrated in time. Train correlations use naive per-mode
sums. Every comparison yields an :class:`OracleReport`.
"""

from __future__ import annotations

import functools
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate

from .core import BS_MATRIX, NumericalError, TimeGrid
from .pulsed import (
    GaussianModeParams,
    LorentzianModeParams,
    ModeFunction,
    ModeParams,
    ProbabilityTable,
    Shape,
    g2_closed,
)

#: Absolute floor below which comparison errors count as zero.
ABS_FLOOR = 1e-12

# --- reports -----------------------------------------------------------------


@dataclass
class OracleReport:
    quantity: str
    closed_form: np.ndarray
    oracle: np.ndarray
    max_rel_err: float
    tolerance: float
    passed: bool
    floor: float = ABS_FLOOR
    meta: dict = field(default_factory=dict)

    @classmethod
    def compare(cls, quantity: str, closed_form, oracle, tolerance: float,
                floor: float = ABS_FLOOR, **meta) -> "OracleReport":
        c = np.atleast_1d(np.asarray(closed_form))
        o = np.atleast_1d(np.asarray(oracle))
        if c.shape != o.shape:
            raise ValueError(f"{quantity}: shapes {c.shape} and {o.shape} differ")
        diff = np.abs(c - o)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(diff <= floor, 0.0, diff / np.abs(o))
        err = float(np.max(rel, initial=0.0))
        return cls(quantity, c, o, err, tolerance, bool(err <= tolerance), floor, meta)

    def as_dict(self) -> dict:
        d = asdict(self)
        for key in ("closed_form", "oracle"):
            arr = np.asarray(d[key])
            d[key] = [[float(x.real), float(x.imag)] for x in arr] if np.iscomplexobj(arr) else arr.tolist()
        return d


def reports_to_json(reports: Sequence[OracleReport]) -> str:
    body = {
        "passed": all(r.passed for r in reports),
        "reports": [r.as_dict() for r in reports],
    }
    return json.dumps(body, indent=2, sort_keys=True)


# --- pulse pairs ---------------------------------------------------------------


_PORT_ROWS = {"auto": (0, 0), "cross": (1, 0)}


def _two_photon_amplitude(mode_a: ModeFunction, mode_b: ModeFunction, t: float, tau: float,
                          port: str) -> complex:
    """Detection amplitude for the first photon at ``t`` and the second at
    ``t + tau`` in the output ports of ``port``.

    The beam splitter sends input photon ``x`` to output ``o`` with amplitude
    ``BS_MATRIX[o, x]``; both routings of the two photons add coherently.
    """
    first, second = _PORT_ROWS[port]
    u = BS_MATRIX
    return (u[second, 0] * u[first, 1] * mode_a(t + tau) * mode_b(t)
            + u[second, 1] * u[first, 0] * mode_b(t + tau) * mode_a(t))


def g2_numeric_pulsed(mode_a: ModeFunction, mode_b: ModeFunction, tau,
                      epsabs: float = 1e-13, epsrel: float = 1e-12):
    """Output (auto, cross) G2 by quadrature over the first detection time."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    lo = min(mode_a.support()[0], mode_b.support()[0])
    hi = max(mode_a.support()[1], mode_b.support()[1])
    knots = mode_a.breakpoints() + mode_b.breakpoints()
    out = np.zeros((2, tau.size))
    for i, tv in enumerate(tau.tolist()):
        a, b = lo - max(tv, 0.0), hi - min(tv, 0.0)
        pts = sorted({k for k in knots} | {k - tv for k in knots})
        pts = [x for x in pts if a < x < b] or None
        for j, port in enumerate(("auto", "cross")):
            f = lambda t: abs(_two_photon_amplitude(mode_a, mode_b, t, tv, port)) ** 2
            # full_output reports trouble as a message instead of a warning,
            # which keeps this usable from worker threads
            res = integrate.quad(f, a, b, points=pts, limit=1000, epsabs=epsabs,
                                 epsrel=epsrel, full_output=1)
            if len(res) > 3:
                raise NumericalError(f"pulse-pair quadrature at tau={tv:g} "
                                     f"(error {res[1]:.2e}): {res[3].splitlines()[0]}")
            out[j, i] = res[0]
    return out[0], out[1]


def _g2_window(shape: Shape, params: ModeParams) -> tuple[float, float, float]:
    """Half-width beyond which G2 is bounded by ``tail``, and the knots."""
    if shape == "gaussian":
        reach = abs(params.delta_tau) + 14 * params.sigma
        tail = math.exp(-98)
        return reach, tail, abs(params.delta_tau)
    reach = abs(params.delta_t) + 40 / params.gamma
    tail = math.exp(-80)
    return reach, tail, abs(params.delta_t)


def probabilities_numeric(shape: Shape, params: ModeParams, inner: str = "closed",
                          epsabs: float = 1e-14, epsrel: float = 1e-12) -> ProbabilityTable:
    """Output-port probabilities by integrating G2 over the delay.

    ``inner="closed"`` integrates the closed-form G2; ``inner="numeric"``
    also integrates the detection time numerically (slow). The tolerances
    apply to both levels of quadrature.
    """
    reach, tail, knot = _g2_window(shape, params)
    if inner == "closed":
        def g2(tv):
            auto, cross = g2_closed(params, tv)
            return float(auto), float(cross)
    elif inner == "numeric":
        from .pulsed import mode_pair
        ma, mb = mode_pair(params)

        @functools.lru_cache(maxsize=None)
        def g2(tv):
            auto, cross = g2_numeric_pulsed(ma, mb, tv, epsabs=epsabs, epsrel=epsrel)
            return float(auto[0]), float(cross[0])
    else:
        raise ValueError(f"inner must be 'closed' or 'numeric', got {inner!r}")
    edges = sorted({-reach, -knot, 0.0, knot, reach})
    totals = []
    for j in range(2):
        total = 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            if b > a:
                val, _ = integrate.quad(lambda x: g2(x)[j], a, b, limit=1000,
                                        epsabs=epsabs, epsrel=epsrel)
                total += val
        totals.append(0.5 * total)
    return ProbabilityTable.symmetric(totals[0], totals[1])


# --- driven emitters -------------------------------------------------------------

_SP = np.array([[0, 1], [0, 0]], dtype=complex)   # |e><g|
_SM = _SP.conj().T
_SZ = np.diag([1.0, -1.0]).astype(complex)
_I2 = np.eye(2, dtype=complex)


def lindbladian(p) -> Callable[[np.ndarray], np.ndarray]:
    """Right-hand side of the master equation for a ``TlsParams``."""
    w = complex(p.omega)
    h = 0.5 * p.detuning_share * _SZ + 0.5 * (w * _SP + np.conj(w) * _SM)
    ops = [math.sqrt(p.gamma1) * _SM, math.sqrt(p.gamma_p / 2) * _SZ]

    def rhs(rho: np.ndarray) -> np.ndarray:
        out = -1j * (h @ rho - rho @ h)
        for c in ops:
            cd = c.conj().T
            out += c @ rho @ cd - 0.5 * (cd @ c @ rho + rho @ cd @ c)
        return out

    return rhs


def bloch_matrix_from_lindbladian(p) -> tuple[np.ndarray, np.ndarray]:
    """``(A, b)`` read off the master equation through the affine map
    ``v -> rho(v) = I/2 + sz/2 * SZ + <s+> SM + <s-> SP``."""
    rhs = lindbladian(p)
    obs = (_SP, _SM, _SZ)

    def flow(v):
        rho = 0.5 * _I2 + 0.5 * v[2] * _SZ + v[0] * _SM + v[1] * _SP
        drho = rhs(rho)
        return np.array([np.trace(o @ drho) for o in obs])

    b = flow(np.zeros(3, dtype=complex))
    a = np.column_stack([flow(e) - b for e in np.eye(3, dtype=complex)])
    return a, b


def _integrate_rho(rhs, rho0: np.ndarray, t_eval: np.ndarray, rtol: float, atol: float) -> np.ndarray:
    def f(_, y):
        return rhs(y.reshape(2, 2)).ravel()

    if t_eval[-1] == 0:
        return rho0[None].copy()
    sol = integrate.solve_ivp(f, (0.0, float(t_eval[-1])), rho0.ravel(), method="DOP853",
                              t_eval=t_eval, rtol=rtol, atol=atol)
    if not sol.success:
        raise NumericalError(f"master-equation integration failed: {sol.message}")
    return sol.y.T.reshape(-1, 2, 2)


def steady_state_numeric(p, tol: float = 1e-12, rtol: float = 1e-12) -> np.ndarray:
    """Density matrix reached by evolving the ground state until it stops moving."""
    rhs = lindbladian(p)
    rho = np.diag([0.0, 1.0]).astype(complex)
    chunk = 10.0 / p.gamma1
    for _ in range(400):
        nxt = _integrate_rho(rhs, rho, np.array([0.0, chunk]), rtol, 1e-15)[-1]
        if np.max(np.abs(nxt - rho)) < tol:
            return nxt
        rho = nxt
    raise NumericalError("master equation did not settle to a steady state")


def tls_correlation_numeric(p, tau, rtol: float = 1e-12, atol: float = 1e-15):
    """``(G1(tau), G2(tau))`` from the master equation and quantum regression.

    ``G1 = Tr[s- exp(L tau)(rho s+)]`` and
    ``G2 = Tr[s+ s- exp(L tau)(s- rho s+)]`` with ``rho`` the steady state.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if tau[0] < 0 or np.any(np.diff(tau) <= 0):
        raise ValueError("tau must increase from a non-negative start")
    rhs = lindbladian(p)
    rho = steady_state_numeric(p)
    t_eval = tau if tau[0] == 0 else np.r_[0.0, tau]
    drop = 0 if tau[0] == 0 else 1
    x1 = _integrate_rho(rhs, rho @ _SP, t_eval, rtol, atol)[drop:]
    x2 = _integrate_rho(rhs, _SM @ rho @ _SP, t_eval, rtol, atol)[drop:]
    g1 = np.einsum("ij,tji->t", _SM, x1)
    g2 = np.einsum("ij,tji->t", _SP @ _SM, x2).real
    return g1, g2


def polarized_output_expansion(p, phi: float, tau, g1=None, g2=None):
    """Output (auto, cross) G2 by expanding both detectors into horizontal
    and vertical components.

    Input ``a`` is horizontal, input ``b`` is split ``(cos phi, sin phi)``.
    Each operator position is assigned to one source and the resulting
    single-source moments are those of an emitter with random phase: only
    terms with equal numbers of raising and lowering operators per source
    survive.
    """
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if g1 is None or g2 is None:
        g1, g2 = tls_correlation_numeric(p, tau)
    pop = float(np.real(tls_correlation_numeric(p, np.array([0.0]))[0][0]))

    def moment(positions: frozenset):
        # positions: 0 r+(t), 1 a+(t+tau), 2 a(t+tau), 3 r(t)
        table = {
            frozenset(): 1.0,
            frozenset({0, 3}): pop,
            frozenset({1, 2}): pop,
            frozenset({0, 1, 2, 3}): g2,
            frozenset({0, 2}): g1,
            frozenset({1, 3}): np.conj(g1),
        }
        return table.get(positions, 0.0)

    pol = {0: (1.0, 0.0), 1: (math.cos(phi), math.sin(phi))}  # source -> (h, v)
    result = {}
    for port, rows in {"auto": (0, 0, 0, 0), "cross": (1, 0, 0, 1)}.items():
        total = 0.0
        for pol_r in range(2):
            for pol_a in range(2):
                pols = (pol_r, pol_a, pol_a, pol_r)
                for assign in np.ndindex(2, 2, 2, 2):
                    coeff = 1.0
                    for pos in range(4):
                        coeff *= BS_MATRIX[rows[pos], assign[pos]] * pol[assign[pos]][pols[pos]]
                    if coeff == 0.0:
                        continue
                    src_a = frozenset(i for i in range(4) if assign[i] == 0)
                    src_b = frozenset(i for i in range(4) if assign[i] == 1)
                    total = total + coeff * moment(src_a) * moment(src_b)
        result[port] = np.real(total)
    return result["auto"], result["cross"]


# --- pulse trains ------------------------------------------------------------------


def naive_train_intensity(modes_a: Sequence[ModeFunction], modes_b: Sequence[ModeFunction],
                          t: float, tau: float) -> tuple[float, float]:
    """Output (auto, cross) intensity correlation by explicit mode sums.

    Every mode holds one photon, so the same-mode fourth moment vanishes and
    only pairs of distinct modes of one source contribute to the intra-source
    terms.
    """
    t2 = t + tau
    sources = [([m(t) for m in ms], [m(t2) for m in ms]) for ms in (modes_a, modes_b)]
    auto = cross = 0.0
    for c, d in ((0, 1), (1, 0)):
        z1, z2 = sources[c]
        w1, w2 = sources[d]
        m_count = len(z1)
        same = 0.0
        for m in range(m_count):
            for n in range(m_count):
                if m == n:
                    continue
                same += (np.conj(z1[m]) * z2[m] * np.conj(z2[n]) * z1[n]).real
                same += abs(z1[n]) ** 2 * abs(z2[m]) ** 2
        other = 0.0
        inter = 0.0
        for k in range(m_count):
            for l in range(len(w1)):
                other += abs(z1[k]) ** 2 * abs(w2[l]) ** 2
                inter += (np.conj(z2[k]) * z1[k] * np.conj(w1[l]) * w2[l]).real
        auto += same + other + inter
        cross += same + other - inter
    return 0.25 * auto, 0.25 * cross


class PeriodicMode(ModeFunction):
    """Sum of the images ``mode(t - p * period)``."""

    def __init__(self, mode: ModeFunction, period: float, images: int):
        self.mode = mode
        self.period = period
        self.images = range(-images, images + 1)
        self.carrier = 0.0

    def __call__(self, t):
        return sum(self.mode(t - p * self.period) for p in self.images)

    def envelope(self, t):
        return self(t)


def circular_train_g2(config, tau, epsabs: float = 1e-13) -> tuple[np.ndarray, np.ndarray]:
    """Circular correlation: detection time integrated over one period of
    the periodically repeated train, with every mode periodized."""
    from .train import train_modes

    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    modes_a, modes_b = train_modes(config)
    period = config.period
    images = int(math.ceil((np.max(np.abs(tau), initial=0.0) + 2 * period) / period)) + 1
    pa = [PeriodicMode(m, period, images) for m in modes_a]
    pb = [PeriodicMode(m, period, images) for m in modes_b]
    start = -config.half * config.t_p - config.t_p / 2
    knots = []
    for m in modes_a + modes_b:
        knots += m.breakpoints()
    out = np.zeros((2, tau.size))
    for i, tv in enumerate(tau.tolist()):
        pts = sorted({(k - start) % period + start for k in knots}
                     | {(k - tv - start) % period + start for k in knots})
        pts = [x for x in pts if start < x < start + period] or None
        for j in range(2):
            # near-zero cross values cannot meet epsabs through roundoff, so
            # the convergence message is dropped
            out[j, i] = integrate.quad(lambda t: naive_train_intensity(pa, pb, t, tv)[j],
                                       start, start + period, points=pts, limit=2000,
                                       epsabs=epsabs, epsrel=1e-11, full_output=1)[0]
    return out[0], out[1]


def mode_overlap(m1: ModeFunction, m2: ModeFunction) -> complex:
    """``integral conj(m1) m2 dt`` by quadrature over the joint support."""
    lo = min(m1.support()[0], m2.support()[0])
    hi = max(m1.support()[1], m2.support()[1])
    pts = sorted(x for x in m1.breakpoints() + m2.breakpoints() if lo < x < hi) or None
    re = integrate.quad(lambda t: (np.conj(m1(t)) * m2(t)).real, lo, hi, points=pts, limit=500,
                        epsabs=1e-15)[0]
    im = integrate.quad(lambda t: (np.conj(m1(t)) * m2(t)).imag, lo, hi, points=pts, limit=500,
                        epsabs=1e-15)[0]
    return complex(re, im)


# --- verification suite --------------------------------------------------------------


def _check_pulsed(rng: np.random.Generator, count: int) -> list[OracleReport]:
    from .pulsed import mode_pair

    reports = []
    for shape in ("gaussian", "lorentzian"):
        closed, numeric = [], []
        for _ in range(count):
            if shape == "gaussian":
                sigma = rng.uniform(0.5, 2.0)
                params = GaussianModeParams(sigma, rng.uniform(-2, 2) * sigma, 0.0,
                                            rng.uniform(-2, 2) / sigma)
                tv = rng.uniform(-3, 3) * sigma
            else:
                gamma = rng.uniform(0.5, 2.0)
                params = LorentzianModeParams(gamma, rng.uniform(-2, 2) / gamma, 0.0,
                                              rng.uniform(-4, 4) * gamma)
                tv = rng.uniform(-3, 3) / gamma
            closed.append(np.array(g2_closed(params, tv), dtype=float).ravel())
            numeric.append(np.array(g2_numeric_pulsed(*mode_pair(params), tv)).ravel())
        reports.append(OracleReport.compare(f"pulsed G2 {shape}", np.concatenate(closed),
                                            np.concatenate(numeric), 1e-6))
    return reports


def _check_tls(rng: np.random.Generator, count: int) -> list[OracleReport]:
    from .bloch import TlsParams, g1_tls_closed, g2_tls_closed

    closed_g1, num_g1, closed_g2, num_g2 = [], [], [], []
    for i in range(count):
        gamma_p = (0.0, 0.5, 2.0)[i % 3]
        omega = 10 ** rng.uniform(-1, math.log10(20))
        p = TlsParams(1.0, gamma_p, omega)
        tau = np.linspace(0, 10, 101)
        g1, g2 = tls_correlation_numeric(p, tau)
        closed_g1.append(g1_tls_closed(p, tau))
        num_g1.append(g1.real)
        closed_g2.append(g2_tls_closed(p, tau)[1])
        num_g2.append(g2 / g1[0].real ** 2)
    return [
        OracleReport.compare("emitter G1", np.concatenate(closed_g1), np.concatenate(num_g1),
                             1e-4, floor=1e-10),
        OracleReport.compare("emitter g2", np.concatenate(closed_g2), np.concatenate(num_g2),
                             1e-4, floor=1e-10),
    ]


def _check_probabilities(rng: np.random.Generator, count: int) -> list[OracleReport]:
    from .pulsed import correlation_probabilities

    closed, numeric = [], []
    for i in range(count):
        if i % 2:
            params = GaussianModeParams(1.0, rng.uniform(-3, 3), 0.0, rng.uniform(-3, 3))
            shape = "gaussian"
        else:
            params = LorentzianModeParams(1.0, rng.uniform(-2, 2), 0.0, rng.uniform(-4, 4))
            shape = "lorentzian"
        c = correlation_probabilities(shape, params)
        n = probabilities_numeric(shape, params)
        closed += [c.p_aa, c.p_ab]
        numeric += [n.p_aa, n.p_ab]
    return [OracleReport.compare("output probabilities", closed, numeric, 1e-6)]


def _check_train(rng: np.random.Generator) -> list[OracleReport]:
    from .train import PulseTrainConfig, g2_train

    # gamma * period = 36 keeps overlapping images of one mode below 1e-15
    config = PulseTrainConfig("lorentzian", 3, 1.0, gamma=12.0, delta_t=0.1, delta=2.0)
    tau = np.array([-1.0, -0.1, 0.0, 0.1, 0.5, 1.1])
    grid = TimeGrid(-1.1, 0.005, 441)
    result = g2_train(config, grid, normalize=False)
    idx = [grid.index_of(t) for t in tau]
    auto, cross = circular_train_g2(config, grid.points[idx])
    return [
        OracleReport.compare("train circular G2 auto", result.series_auto.values[idx], auto, 1e-6),
        OracleReport.compare("train circular G2 cross", result.series_cross.values[idx], cross, 1e-6),
    ]


def run_verification(seed: int = 0, quick: bool = False, threads: int = 1) -> list[OracleReport]:
    """Closed forms against oracles; reports come back in a fixed order."""
    n = 5 if quick else 25
    jobs = [
        lambda: _check_pulsed(np.random.default_rng(seed), n),
        lambda: _check_tls(np.random.default_rng(seed + 1), 6 if quick else 20),
        lambda: _check_probabilities(np.random.default_rng(seed + 2), 2 * n),
        lambda: _check_train(np.random.default_rng(seed + 3)),
    ]
    if threads > 1:
        with ThreadPoolExecutor(threads) as pool:
            groups = list(pool.map(lambda f: f(), jobs))
    else:
        groups = [f() for f in jobs]
    return [r for g in groups for r in g]
