"""Command-line front end.

    mwhom <command> --config run.ini [--out curve.csv] [--format csv|json] [--threads N]

Commands: ``pulsed-pair``, ``train``, ``dip``, ``continuous``, ``polarized``,
``verify``. Configs are INI files (or a JSON sidecar written by an earlier
run); every section and key is checked against the schema in
``docs/config.md`` and unknown names are rejected.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 verification failure.
"""

from __future__ import annotations

import argparse
import configparser
import io
import json
import math
import sys
import warnings
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .core import NegativeCorrelationError, NumericalError, TimeGrid

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_VERIFY = 0, 2, 3, 4

TIME_UNITS = {"ns": Fraction(1, 10**9), "us": Fraction(1, 10**6), "s": Fraction(1)}
# "MHz" and "GHz" are cyclic frequencies; internally everything is rad/s
RATE_UNITS = {"MHz": (Fraction(10**6), True), "GHz": (Fraction(10**9), True),
              "rad_per_s": (Fraction(1), False)}

COMMANDS = ("pulsed-pair", "train", "dip", "continuous", "polarized", "verify")

# section -> key -> default (None: no default)
SCHEMA: dict[str, dict[str, str | None]] = {
    "units": {"time": "ns", "rate": "MHz"},
    "source": {"shape": "lorentzian", "gamma": "8", "sigma": None, "delta_t": "0", "delta": "0"},
    "pulsed": {"method": "closed"},
    "train": {"t_p": "500", "n_pulses": "11", "wrap": "true", "method": "auto", "sample_dt": None},
    "tau": {"start": None, "stop": None, "step": None},
    "filter": {"kind": "identity", "width": None, "cutoff": None, "taps": None,
               "coefficients_file": None, "sample_dt": None, "alignment": "centered"},
    "dip": {"variable": "offset", "start": None, "stop": None, "step": None},
    "emitter": {"gamma1": "1", "gamma_p": "0", "omega": "0.5", "delta": "0", "phi": "0",
                "method": "auto"},
    "output": {"path": None, "format": "csv"},
    "verify": {"seed": "0", "quick": "false"},
}

SECTIONS = {
    "pulsed-pair": ("units", "source", "pulsed", "tau", "filter", "output"),
    "train": ("units", "source", "train", "tau", "filter", "output"),
    "dip": ("units", "source", "dip", "output"),
    "continuous": ("units", "emitter", "tau", "output"),
    "polarized": ("units", "emitter", "tau", "output"),
    "verify": ("verify", "output"),
}


class ConfigError(Exception):
    """Invalid configuration; the message names the offending field."""


@dataclass
class Outcome:
    columns: list[str]
    rows: list[list[float]]
    meta: dict


# --- configuration -----------------------------------------------------------


def _line_of(text: str, section: str, key: str | None = None) -> int | None:
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return lineno
        elif current == section and key is not None:
            name = line.split("=", 1)[0].split(":", 1)[0].strip()
            if name == key:
                return lineno
    return None


def _where(path: str, text: str, section: str, key: str | None = None) -> str:
    line = _line_of(text, section, key) if text else None
    loc = f"{path}:{line}" if line else path
    field = f"[{section}] {key}" if key else f"[{section}]"
    return f"{loc}: {field}"


def load_config(path: str | Path, command: str) -> dict[str, dict[str, str]]:
    """Raw config values (strings) with defaults filled in."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: {exc.strerror or exc}") from None
    raw: dict[str, dict[str, str]] = {}
    if path.suffix == ".json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
        if isinstance(data, dict) and "config" in data:
            data = data["config"]
        if not isinstance(data, dict) or not all(isinstance(v, dict) for v in data.values()):
            raise ConfigError(f"{path}: expected an object of sections")
        raw = {s: {k: str(v) for k, v in kv.items()} for s, kv in data.items()}
        text = ""
    else:
        parser = configparser.ConfigParser(interpolation=None, default_section="__defaults__")
        parser.optionxform = str
        try:
            parser.read_string(text, source=str(path))
        except configparser.Error as exc:
            raise ConfigError(str(exc).replace("\n", " ")) from None
        raw = {s: dict(parser[s]) for s in parser.sections()}

    allowed = SECTIONS[command]
    resolved: dict[str, dict[str, str]] = {}
    for section, values in raw.items():
        if section not in allowed:
            raise ConfigError(f"{_where(str(path), text, section)}: unknown section for '{command}'"
                              f" (allowed: {', '.join(allowed)})")
        for key in values:
            if key not in SCHEMA[section]:
                raise ConfigError(f"{_where(str(path), text, section, key)}: unknown key"
                                  f" (allowed: {', '.join(SCHEMA[section])})")
    for section in allowed:
        given = raw.get(section, {})
        resolved[section] = {k: given[k] for k in SCHEMA[section] if k in given}
        for k, default in SCHEMA[section].items():
            if k not in resolved[section] and default is not None:
                resolved[section][k] = default
    resolved["_origin"] = {"path": str(path), "text": text}
    return resolved


class Reader:
    """Typed access to one resolved config with unit conversion."""

    def __init__(self, cfg: dict[str, dict[str, str]]):
        self.cfg = cfg
        origin = cfg.get("_origin", {})
        self.path, self.text = origin.get("path", "<config>"), origin.get("text", "")
        units = cfg.get("units", {"time": "ns", "rate": "MHz"})
        self.time_unit = units.get("time", "ns")
        self.rate_unit = units.get("rate", "MHz")
        if self.time_unit not in TIME_UNITS:
            raise self.error("units", "time", f"unknown unit {self.time_unit!r} (ns, us, s)")
        if self.rate_unit not in RATE_UNITS:
            raise self.error("units", "rate", f"unknown unit {self.rate_unit!r} (MHz, GHz, rad_per_s)")

    def error(self, section: str, key: str, msg: str) -> ConfigError:
        return ConfigError(f"{_where(self.path, self.text, section, key)}: {msg}")

    def has(self, section: str, key: str) -> bool:
        return key in self.cfg.get(section, {})

    def raw(self, section: str, key: str) -> str:
        try:
            return self.cfg[section][key]
        except KeyError:
            raise self.error(section, key, "required value missing") from None

    def number(self, section: str, key: str) -> Fraction:
        text = self.raw(section, key).strip()
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise self.error(section, key, f"not a number: {text!r}") from None

    def numbers(self, section: str, key: str) -> list[Fraction]:
        out = []
        for part in self.raw(section, key).split(","):
            try:
                out.append(Fraction(part.strip()))
            except (ValueError, ZeroDivisionError):
                raise self.error(section, key, f"not a number: {part.strip()!r}") from None
        return out

    def time(self, section: str, key: str) -> float:
        return float(self.number(section, key) * TIME_UNITS[self.time_unit])

    def time_of(self, value: Fraction) -> float:
        return float(value * TIME_UNITS[self.time_unit])

    def rate(self, section: str, key: str) -> float:
        return self.rate_of(self.number(section, key))

    def rate_of(self, value: Fraction) -> float:
        scale, cyclic = RATE_UNITS[self.rate_unit]
        return float(value * scale) * (2 * math.pi if cyclic else 1.0)

    def integer(self, section: str, key: str) -> int:
        value = self.number(section, key)
        if value.denominator != 1:
            raise self.error(section, key, "must be an integer")
        return int(value)

    def flag(self, section: str, key: str) -> bool:
        text = self.raw(section, key).strip().lower()
        if text in ("true", "yes", "1", "on"):
            return True
        if text in ("false", "no", "0", "off"):
            return False
        raise self.error(section, key, f"not a boolean: {text!r}")

    def choice(self, section: str, key: str, options) -> str:
        text = self.raw(section, key).strip()
        if text not in options:
            raise self.error(section, key, f"{text!r} is not one of {', '.join(options)}")
        return text

    def sweep(self, section: str, defaults: tuple[Fraction, Fraction, Fraction]):
        """Exact ``(start, step, count)`` of a start/stop/step range in user units."""
        values = []
        for key, default in zip(("start", "stop", "step"), defaults):
            values.append(self.number(section, key) if self.has(section, key) else default)
        start, stop, step = values
        if step <= 0:
            raise self.error(section, "step", "must be positive")
        if stop <= start:
            raise self.error(section, "stop", "must exceed start")
        return start, step, int((stop - start) // step) + 1


# --- pipelines -----------------------------------------------------------------


def _mode_params(r: Reader):
    from .pulsed import GaussianModeParams, LorentzianModeParams

    shape = r.choice("source", "shape", ("lorentzian", "gaussian"))
    delta = r.rate("source", "delta")
    if shape == "lorentzian":
        if r.has("source", "sigma"):
            raise r.error("source", "sigma", "not used by a Lorentzian source")
        return shape, lambda dt: LorentzianModeParams(r.rate("source", "gamma"), dt, 0.0, delta)
    if not r.has("source", "sigma"):
        raise r.error("source", "sigma", "required for a Gaussian source")
    return shape, lambda dt: GaussianModeParams(r.time("source", "sigma"), dt, 0.0, delta)


def _time_scale(r: Reader, shape: str) -> Fraction:
    """Pulse time scale in user units, for default grids."""
    if shape == "gaussian":
        return r.number("source", "sigma")
    rate = r.rate("source", "gamma")
    return Fraction(1 / rate) / TIME_UNITS[r.time_unit]


def _grid(r: Reader, defaults) -> tuple[TimeGrid, list[float]]:
    start, step, n = r.sweep("tau", defaults)
    grid = TimeGrid(r.time_of(start), r.time_of(step), n)
    return grid, [float(start + k * step) for k in range(n)]


def _kernel(r: Reader, default_dt: float):
    from .filtering import FilterSpec, load_fir, make_filter

    if "filter" not in r.cfg:
        return None
    kind = r.choice("filter", "kind", ("identity", "square_window", "fir_coefficients",
                                       "windowed_lowpass"))
    dt = r.time("filter", "sample_dt") if r.has("filter", "sample_dt") else default_dt
    alignment = r.choice("filter", "alignment", ("centered", "causal"))
    try:
        if kind == "identity":
            return None
        if kind == "fir_coefficients":
            if not r.has("filter", "coefficients_file"):
                raise r.error("filter", "coefficients_file", "required for fir_coefficients")
            fir_path = Path(r.raw("filter", "coefficients_file"))
            if not fir_path.is_absolute():
                fir_path = Path(r.path).parent / fir_path
            kernel = load_fir(fir_path)
            if not math.isclose(kernel.dt, dt, rel_tol=1e-9):
                raise r.error("filter", "sample_dt", f"FIR file step {kernel.dt:g} s differs from {dt:g} s")
            return make_filter(FilterSpec("fir_coefficients", dt,
                                          coefficients=tuple(kernel.taps), alignment=alignment))
        if kind == "square_window":
            if not r.has("filter", "width"):
                raise r.error("filter", "width", "required for square_window")
            taps = max(1, round(r.time("filter", "width") / dt))
            return make_filter(FilterSpec("square_window", dt, taps=taps, alignment=alignment))
        if r.has("filter", "cutoff"):
            taps = r.integer("filter", "taps") if r.has("filter", "taps") else None
            if taps is None:
                raise r.error("filter", "taps", "required together with cutoff")
            return make_filter(FilterSpec("windowed_lowpass", dt, cutoff=r.rate("filter", "cutoff"),
                                          taps=taps, alignment=alignment))
        if not r.has("filter", "width"):
            raise r.error("filter", "width", "windowed_lowpass needs width or cutoff + taps")
        return make_filter(FilterSpec.lowpass(r.time("filter", "width"), dt, alignment=alignment))
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{_where(r.path, r.text, 'filter')}: {exc}") from None


def run_pulsed_pair(r: Reader, threads: int) -> Outcome:
    from .oracle import g2_numeric_pulsed
    from .pulsed import g2_closed, mode_pair
    from .train import g2_pair_sampled

    shape, make = _mode_params(r)
    params = make(r.time("source", "delta_t"))
    scale = _time_scale(r, shape)
    offset = abs(r.number("source", "delta_t"))
    grid, tau_user = _grid(r, (-(offset + 10 * scale), offset + 10 * scale, scale / 20))
    kernel = _kernel(r, grid.dt)
    method = r.choice("pulsed", "method", ("closed", "numeric"))
    if kernel is not None:
        auto_s, cross_s = g2_pair_sampled(*mode_pair(params), grid, kernel)
        auto, cross, method = auto_s.values, cross_s.values, "sampled"
    elif method == "closed":
        auto, cross = g2_closed(params, grid.points)
    else:
        auto, cross = g2_numeric_pulsed(*mode_pair(params), grid.points)
    rows = [[t, c, a] for t, c, a in zip(tau_user, cross, auto)]
    resolved = dict(vars(params), tau_grid={"t0": grid.t0, "dt": grid.dt, "n": grid.n})
    return Outcome([f"tau_{r.time_unit}", "g2_cross", "g2_auto"], rows,
                   {"method": method, "normalization": None, "resolved_si": resolved})


def run_train(r: Reader, threads: int, delta_t_user: Fraction) -> Outcome:
    from .train import PulseTrainConfig, g2_train

    shape, _ = _mode_params(r)
    n_pulses = r.integer("train", "n_pulses")
    t_p_user = r.number("train", "t_p")
    half = Fraction(n_pulses, 2)
    grid, tau_user = _grid(r, (-half * t_p_user, half * t_p_user, Fraction(1)))
    kernel = _kernel(r, grid.dt)
    kw = {"gamma": r.rate("source", "gamma")} if shape == "lorentzian" else {
        "sigma": r.time("source", "sigma")}
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            config = PulseTrainConfig(shape, n_pulses, r.time_of(t_p_user),
                                      delta_t=r.time_of(delta_t_user),
                                      delta=r.rate("source", "delta"), **kw)
    except ValueError as exc:
        raise ConfigError(f"{_where(r.path, r.text, 'train')}: {exc}") from None
    method = r.choice("train", "method", ("auto", "analytic", "sampled", "quadrature"))
    sample_dt = r.time("train", "sample_dt") if r.has("train", "sample_dt") else None
    try:
        result = g2_train(config, grid, wrap=r.flag("train", "wrap"), method=method,
                          kernel=kernel, sample_dt=sample_dt, threads=threads)
    except NumericalError:
        raise
    except ValueError as exc:
        raise ConfigError(f"{_where(r.path, r.text, 'train')}: {exc}") from None
    auto, cross = result.series_auto.values, result.series_cross.values
    scale = result.normalization
    rows = [[t, c * scale, a * scale, c, a] for t, c, a in zip(tau_user, cross, auto)]
    resolved = {k: v for k, v in vars(config).items()}
    resolved["tau_grid"] = {"t0": grid.t0, "dt": grid.dt, "n": grid.n}
    meta = {"method": result.meta["method"], "normalization": scale, "resolved_si": resolved,
            "warnings": [str(w.message) for w in caught]}
    return Outcome([f"tau_{r.time_unit}", "g2_cross", "g2_auto", "g2_cross_norm", "g2_auto_norm"],
                   rows, meta)


def run_dip(r: Reader, threads: int) -> Outcome:
    from .pulsed import hom_dip_scan

    shape, make = _mode_params(r)
    variable = r.choice("dip", "variable", ("offset", "delta"))
    scale = _time_scale(r, shape)
    base = make(r.time("source", "delta_t"))
    if variable == "offset":
        start, step, n = r.sweep("dip", (-6 * scale, 6 * scale, scale / 10))
        values = [start + k * step for k in range(n)]
        sweep = [r.time_of(v) for v in values]
        label = f"offset_{r.time_unit}"
    else:
        default = Fraction(1) / scale / TIME_UNITS[r.time_unit]
        unit_rate = Fraction(r.rate_of(Fraction(1)))
        span = 6 * default / unit_rate
        start, step, n = r.sweep("dip", (-span, span, span / 60))
        values = [start + k * step for k in range(n)]
        sweep = [r.rate_of(v) for v in values]
        label = f"delta_{r.rate_unit}"
    scan = hom_dip_scan(shape, base, sweep, variable)
    rows = [[float(v), p] for v, (_, p) in zip(values, scan)]
    return Outcome([label, "p_c"], rows, {"variable": variable})


def _emitter(r: Reader):
    from .bloch import TlsParams

    try:
        return TlsParams(r.rate("emitter", "gamma1"), r.rate("emitter", "gamma_p"),
                         r.rate("emitter", "omega"))
    except ValueError as exc:
        raise ConfigError(f"{_where(r.path, r.text, 'emitter')}: {exc}") from None


def _emitter_grid(r: Reader, p):
    scale = Fraction(1 / p.gamma1) / TIME_UNITS[r.time_unit]
    grid, tau_user = _grid(r, (Fraction(0), 10 * scale, scale / 100))
    if grid.t0 < 0:
        raise r.error("tau", "start", "emitter correlations need tau >= 0")
    return grid, tau_user


def _emitter_outcome(r: Reader, p, grid: TimeGrid, out, tau_user, extra: dict) -> Outcome:
    rows = [[t, c, a, cn, an] for t, c, a, cn, an in
            zip(tau_user, out.cross, out.auto, out.cross_norm, out.auto_norm)]
    meta = {"normalization": out.normalization, **out.meta, **extra,
            "resolved_si": {"gamma1": p.gamma1, "gamma_p": p.gamma_p, "omega": abs(p.omega),
                            "tau_grid": {"t0": grid.t0, "dt": grid.dt, "n": grid.n}}}
    return Outcome([f"tau_{r.time_unit}", "g2_cross", "g2_auto", "g2_cross_norm", "g2_auto_norm"],
                   rows, meta)


def run_continuous(r: Reader, threads: int) -> Outcome:
    from .bloch import g2_continuous_output

    p = _emitter(r)
    grid, tau_user = _emitter_grid(r, p)
    method = r.choice("emitter", "method", ("auto", "closed", "regression"))
    out = g2_continuous_output(p, p, r.rate("emitter", "delta"), grid.points, method=method)
    return _emitter_outcome(r, p, grid, out, tau_user, {"method": method})


def run_polarized(r: Reader, threads: int) -> Outcome:
    from .bloch import g2_polarized_output

    p = _emitter(r)
    grid, tau_user = _emitter_grid(r, p)
    method = r.choice("emitter", "method", ("auto", "closed", "regression"))
    phi = float(r.number("emitter", "phi"))
    out = g2_polarized_output(p, phi, grid.points, method=method)
    return _emitter_outcome(r, p, grid, out, tau_user, {"method": method, "phi": phi})


# --- output ------------------------------------------------------------------------


def _fmt(x) -> str:
    return repr(float(x))


def render(outcome: Outcome, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        buf.write(",".join(outcome.columns) + "\n")
        for row in outcome.rows:
            buf.write(",".join(_fmt(x) for x in row) + "\n")
        return buf.getvalue()
    body = {"columns": outcome.columns,
            "data": {c: [float(row[i]) for row in outcome.rows] for i, c in enumerate(outcome.columns)},
            "meta": outcome.meta}
    return json.dumps(body, indent=1, sort_keys=True) + "\n"


def sidecar(command: str, cfg: dict, outcome: Outcome) -> str:
    clean = {s: dict(v) for s, v in cfg.items() if not s.startswith("_")}
    body = {"command": command, "config": clean, "meta": outcome.meta, "version": __version__}
    return json.dumps(body, indent=1, sort_keys=True, default=_json_default) + "\n"


def _json_default(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    raise TypeError(f"cannot serialize {type(x).__name__}")


def _write(path: Path | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_text(text)


def _suffixed(path: Path, tag: str) -> Path:
    return path.with_name(f"{path.stem}_{tag}{path.suffix}")


# --- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mwhom", description="Two-photon interference correlations at a balanced beam splitter.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI config, or a JSON sidecar from an earlier run")
        p.add_argument("--out", help="output file (default: [output] path, else stdout)")
        p.add_argument("--format", choices=("csv", "json"), help="output format (default csv)")
        p.add_argument("--threads", type=int, default=1, help="worker threads across delays")
    return parser


def _default_config(command: str) -> dict:
    cfg = {s: {k: v for k, v in SCHEMA[s].items() if v is not None} for s in SECTIONS[command]}
    cfg["_origin"] = {"path": "<defaults>", "text": ""}
    return cfg


def run(command: str, cfg: dict, out: str | None, fmt: str | None, threads: int) -> int:
    r = Reader(cfg) if command != "verify" else None
    out_cfg = cfg.get("output", {})
    fmt = fmt or out_cfg.get("format", "csv")
    if fmt not in ("csv", "json"):
        raise ConfigError(f"[output] format: {fmt!r} is not one of csv, json")
    target = out or out_cfg.get("path")
    path = Path(target) if target else None
    if threads < 1:
        raise ConfigError("--threads must be at least 1")

    if command == "verify":
        from .oracle import reports_to_json, run_verification

        v = cfg.get("verify", {})
        try:
            seed = int(v.get("seed", "0"))
        except ValueError:
            raise ConfigError(f"[verify] seed: not an integer: {v.get('seed')!r}") from None
        quick = v.get("quick", "false").strip().lower() in ("true", "yes", "1", "on")
        reports = run_verification(seed=seed, quick=quick, threads=threads)
        _write(path, reports_to_json(reports) + "\n")
        return EXIT_OK if all(rep.passed for rep in reports) else EXIT_VERIFY

    outcomes: list[tuple[Path | None, dict, Outcome]] = []
    if command == "train":
        # a list of offsets yields one curve per value; each sidecar records
        # its own single offset so it can be re-run on its own
        offsets = r.numbers("source", "delta_t")
        for text, value in zip(r.raw("source", "delta_t").split(","), offsets):
            target_path = path
            if path is not None and len(offsets) > 1:
                target_path = _suffixed(path, f"dt{value}".replace("/", "_"))
            single = {s: dict(v) for s, v in cfg.items()}
            single["source"]["delta_t"] = text.strip()
            outcomes.append((target_path, single, run_train(r, threads, value)))
    else:
        runner = {"pulsed-pair": run_pulsed_pair, "dip": run_dip,
                  "continuous": run_continuous, "polarized": run_polarized}[command]
        outcomes.append((path, cfg, runner(r, threads)))

    for target_path, used, outcome in outcomes:
        _write(target_path, render(outcome, fmt))
        if target_path is not None and fmt == "csv":
            Path(str(target_path) + ".json").write_text(sidecar(command, used, outcome))
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.command) if args.config else _default_config(args.command)
        return run(args.command, cfg, args.out, args.format, args.threads)
    except ConfigError as exc:
        print(f"mwhom: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, NegativeCorrelationError, FloatingPointError) as exc:
        print(f"mwhom: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"mwhom: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BrokenPipeError:
        # downstream reader closed early (e.g. piped into head)
        sys.stderr.close()
        return EXIT_OK
