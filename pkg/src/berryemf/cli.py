"""Command-line runner.

Every subcommand reads an INI file (``--config``) whose sections and keys
are checked against a fixed schema; anything unknown is a parse error. The
``run`` subcommand takes the command name from ``[run] command``.

Exit codes: 0 success, 2 parse/usage error, 3 validation error,
4 computation or output error.
"""

from __future__ import annotations

import argparse
import configparser
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import io
from .emf import (MovingLoop, TimeDependentB, berry_emf_line_form, berry_emf_step,
                  faraday_sweep)
from .errors import BerryEmfError, ComputationError, InvalidConfig, ValidationError
from .field_core import VortexConfig, chi_gradient, constant_field
from .manybody import (GridWaveFunction, MixtureEnsemble, berry_connection_mb,
                       factorization_check, mixture_connection)
from .nernst import SCHEMA_VERSION, NernstScenario, density_sweep, run_ensemble
from .topology import DEFAULT_TOL, PolyLoop, line_integral, verify_quantization, winding_number
from .units import get_units

COMMANDS = ("winding", "quantize", "manybody-check", "faraday", "berry-emf", "nernst")

EXIT_OK, EXIT_PARSE, EXIT_INVALID, EXIT_COMPUTE = 0, 2, 3, 4


class ConfigError(Exception):
    """Malformed configuration: unknown keys, missing keys, unparsable values."""


# -- schema ------------------------------------------------------------------

def _floats(text):
    return [float(t) for t in text.replace(",", " ").split()]


def _rows(width):
    def parse(text):
        rows = []
        for chunk in text.replace("\n", ";").split(";"):
            if chunk.strip():
                vals = _floats(chunk)
                if len(vals) != width:
                    raise ValueError(f"expected {width} numbers per entry, got {chunk.strip()!r}")
                rows.append(vals)
        return rows
    return parse


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


RUN = {"command": str, "seed": int, "units": str, "tol": float, "out": str, "workers": int}
DOMAIN = {"lx": float, "ly": float, "eps_core": float}
VORTICES = {"file": str, "cores": _rows(3)}
LOOP = {"file": str, "vertices": _rows(2), "rectangle": _floats, "drift": _floats}

SCHEMA = {
    "winding": {"run": RUN, "domain": DOMAIN, "vortices": VORTICES, "loop": LOOP},
    "quantize": {"run": RUN, "domain": DOMAIN, "vortices": VORTICES, "loop": LOOP},
    "berry-emf": {"run": RUN, "domain": DOMAIN, "vortices": VORTICES, "loop": LOOP,
                  "emf": {"t": float, "dt": float, "tol": float, "verify": _bool}},
    "faraday": {"run": RUN, "loop": LOOP,
                "field": {"family": str, "b0": float, "gamma": float, "beta": float,
                          "amplitude": float, "kx": float, "ky": float, "omega": float},
                "faraday": {"t0": float, "t1": float, "samples": int, "dt": float, "tol": float}},
    "manybody-check": {
        "run": RUN,
        "wavefunction": {"source": str, "file": str, "format": str, "spacing": float,
                         "origin": _floats, "n": int, "length": float, "kx": float,
                         "ky": float, "sigma": float, "winding": int, "exclude_radius": float},
        "phase": {"kind": str, "kx": float, "ky": float, "center": _floats, "winding": int},
        "mixture": {"connections": _rows(2), "probabilities": _floats, "energies": _floats,
                    "temperature": float, "points": _rows(2)},
    },
    "nernst": {"run": RUN,
               "nernst": {"lx": float, "ly": float, "n_m": float, "n_a": float, "v0": float,
                          "dt": float, "n_steps": int, "grad_t": float, "realizations": int,
                          "edge_start": float, "overhang": float, "eps_core": float,
                          "quadrature_checks": int, "tol": float},
               "sweep": {"differences": _floats, "realizations": int, "total": float}},
}


def load_config(path, command: str | None = None) -> tuple[str, dict]:
    """Parse and schema-check ``path``; returns ``(command, {section: {key: value}})``."""
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";;"))
    parser.optionxform = str
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    named = parser.get("run", "command", fallback=None) if parser.has_section("run") else None
    if command is None:
        if named is None:
            raise ConfigError("[run] command is required when using the 'run' subcommand")
        command = named.strip()
    elif named is not None and named.strip() != command:
        raise ConfigError(f"config is for command {named.strip()!r}, not {command!r}")
    if command not in SCHEMA:
        raise ConfigError(f"unknown command {command!r}; choose from {', '.join(COMMANDS)}")

    schema = SCHEMA[command]
    out: dict[str, dict] = {}
    for section in parser.sections():
        if section not in schema:
            raise ConfigError(f"unknown section [{section}] for command {command!r}")
        keys = schema[section]
        out[section] = {}
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            try:
                out[section][key] = keys[key](raw.strip())
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key}: {exc}") from None
    return command, out


def _need(cfg, section, key):
    try:
        return cfg[section][key]
    except KeyError:
        raise ConfigError(f"missing required key {key!r} in [{section}]") from None


# -- builders ------------------------------------------------------------------

def build_vortices(cfg, base: Path) -> VortexConfig:
    dom = cfg.get("domain", {})
    vtx = cfg.get("vortices", {})
    eps = dom.get("eps_core")
    if "file" in vtx:
        if "cores" in vtx:
            raise ConfigError("[vortices] takes either 'file' or 'cores', not both")
        try:
            config = io.read_vortices(base / vtx["file"], eps)
        except OSError as exc:
            raise ConfigError(f"cannot read vortex file: {exc}") from None
        return config
    lx, ly = _need(cfg, "domain", "lx"), _need(cfg, "domain", "ly")
    cores = [(x, y, w) for x, y, w in vtx.get("cores", [])]
    for _, _, w in cores:
        if w != int(w):
            raise InvalidConfig(f"winding {w!r} is not an integer")
    return VortexConfig.from_cores([(x, y, int(w)) for x, y, w in cores], lx, ly, eps)


def build_loop(cfg, base: Path) -> PolyLoop:
    lp = cfg.get("loop", {})
    given = [k for k in ("file", "vertices", "rectangle") if k in lp]
    if len(given) != 1:
        raise ConfigError("[loop] needs exactly one of 'file', 'vertices' or 'rectangle'")
    if "file" in lp:
        try:
            return io.read_loop(base / lp["file"])
        except OSError as exc:
            raise ConfigError(f"cannot read loop file: {exc}") from None
    if "vertices" in lp:
        return PolyLoop(lp["vertices"])
    rect = lp["rectangle"]
    if len(rect) != 4:
        raise ConfigError("[loop] rectangle takes x0 y0 x1 y1")
    return PolyLoop.rectangle(*rect)


def build_moving_loop(cfg, base: Path) -> MovingLoop:
    drift = cfg.get("loop", {}).get("drift", [0.0, 0.0])
    if len(drift) != 2:
        raise ConfigError("[loop] drift takes two numbers")
    return MovingLoop(build_loop(cfg, base), tuple(drift))


# -- commands ------------------------------------------------------------------

def cmd_winding(cfg, ctx):
    config, loop = build_vortices(cfg, ctx["base"]), build_loop(cfg, ctx["base"])
    w = winding_number(config, loop)
    summary = {"schema_version": SCHEMA_VERSION, "command": "winding", "winding": w}
    return summary, {"winding": w}, {}


def cmd_quantize(cfg, ctx):
    config, loop = build_vortices(cfg, ctx["base"]), build_loop(cfg, ctx["base"])
    tol = cfg.get("run", {}).get("tol", DEFAULT_TOL)
    report = verify_quantization(config, loop, tol)
    chi_int = line_integral(chi_gradient(config), loop, tol)
    summary = {"schema_version": SCHEMA_VERSION, "command": "quantize", "tol": tol,
               "report": report.as_dict(), "chi_integral": chi_int,
               "chi_winding": chi_int / (2 * math.pi), "consistent": report.consistent}
    line = {"nearest_quantum": report.nearest_quantum, "deviation": report.deviation}
    return summary, line, {}


def _built_in_wavefunction(wf, kind):
    n = wf.get("n", 31)
    length = wf.get("length", 8.0)
    h = length / (n - 1)
    x = h * np.arange(n)
    xx, yy = np.meshgrid(x, x, indexing="ij")
    c = length / 2
    sigma = wf.get("sigma", length * 0.75)
    env = np.exp(-((xx - c) ** 2 + (yy - c) ** 2) / (2 * sigma ** 2))
    if kind == "plane_wave":
        k = np.array([wf.get("kx", 0.7), wf.get("ky", -0.4)])
        psi = env * np.exp(1j * (k[0] * xx + k[1] * yy))
        expected = np.broadcast_to(k, xx.shape + (2,))
        return GridWaveFunction.from_orbital(psi, h), expected, None
    w = wf.get("winding", 2)
    if w % 2:
        raise InvalidConfig("a single-valued scalar vortex state needs an even winding")
    m = w // 2
    r = np.hypot(xx - c, yy - c)
    theta = np.arctan2(yy - c, xx - c)
    psi = r ** abs(m) * np.exp(-1j * m * theta) * np.exp(-r ** 2 / 8.0)
    safe = np.where(r > 0, r, 1.0)
    # A = -(w/2) grad(theta)
    expected = np.stack([m * (yy - c) / safe ** 2, -m * (xx - c) / safe ** 2], axis=-1)
    region = r >= wf.get("exclude_radius", 1.5)
    return GridWaveFunction.from_orbital(psi, h), expected, region


def _phase_samples(ph, psi: GridWaveFunction):
    kind = ph.get("kind", "none")
    xx, yy = psi.mesh()
    if kind == "none":
        return np.ones(xx.shape, complex)
    if kind == "plane_wave":
        # exp(-i chi / 2) with chi = -2 k.r
        return np.exp(1j * (ph.get("kx", 0.0) * xx + ph.get("ky", 0.0) * yy))
    if kind == "vortex":
        w = ph.get("winding", 2)
        if w % 2:
            raise InvalidConfig("phase winding must be even for single-valued samples")
        cx, cy = ph.get("center", [float(psi.x.mean()), float(psi.y.mean())])
        return np.exp(-0.5j * w * np.arctan2(yy - cy, xx - cx))
    raise InvalidConfig(f"unknown phase kind {kind!r}")


def cmd_manybody(cfg, ctx):
    summary = {"schema_version": SCHEMA_VERSION, "command": "manybody-check"}
    line = {}
    wf = cfg.get("wavefunction")
    if wf is None and "mixture" not in cfg:
        raise ConfigError("manybody-check needs a [wavefunction] or a [mixture] section")
    if wf is not None:
        source = wf.get("source", "file")
        expected = region = None
        if source == "file":
            path = ctx["base"] / _need(cfg, "wavefunction", "file")
            fmt = wf.get("format", "auto")
            if fmt not in ("auto", "binary", "text"):
                raise InvalidConfig("format must be auto, binary or text")
            try:
                amp = io.read_wavefunction(path, None if fmt == "auto" else fmt == "binary")
            except OSError as exc:
                raise ConfigError(f"cannot read wave function: {exc}") from None
            psi = GridWaveFunction(amp, _need(cfg, "wavefunction", "spacing"),
                                   tuple(wf.get("origin", [0.0, 0.0])))
        elif source in ("plane_wave", "vortex"):
            psi, expected, region = _built_in_wavefunction(wf, source)
        else:
            raise InvalidConfig(f"unknown wavefunction source {source!r}")
        conn = berry_connection_mb(psi)
        block = {"electron_count": psi.electron_count, "shape": list(psi.shape),
                 "spacing": psi.spacing, "n_masked": conn.n_masked}
        if expected is not None:
            keep = ~conn.masked if region is None else (~conn.masked & region)
            err = np.hypot(*(conn.values - expected)[keep].T)
            block["max_error_vs_analytic"] = float(err.max())
            line["max_error"] = block["max_error_vs_analytic"]
        if "phase" in cfg:
            rep = factorization_check(psi, _phase_samples(cfg["phase"], psi), region=region)
            block["factorization_residual"] = rep.residual
            block["residual_over_h2"] = rep.residual / psi.spacing ** 2
            line["residual"] = rep.residual
        summary["wavefunction"] = block
    if "mixture" in cfg:
        mx = cfg["mixture"]
        conns = [constant_field(v) for v in _need(cfg, "mixture", "connections")]
        if "energies" in mx:
            ens = MixtureEnsemble.boltzmann(conns, mx["energies"], _need(cfg, "mixture", "temperature"),
                                            ctx["units"])
        else:
            ens = MixtureEnsemble(conns, _need(cfg, "mixture", "probabilities"))
        pts = np.array(mx.get("points", [[0.0, 0.0]]), float)
        values = mixture_connection(ens)(pts)
        summary["mixture"] = {"probabilities": np.asarray(ens.probabilities).tolist(),
                              "points": pts.tolist(), "values": values.tolist()}
        line["mixture_values"] = values.tolist()
    return summary, line, {}


def cmd_faraday(cfg, ctx):
    fld = dict(cfg.get("field", {}))
    family = fld.pop("family", None)
    if family is None:
        raise ConfigError("missing required key 'family' in [field]")
    b = TimeDependentB.from_family(family, **fld)
    loop = build_moving_loop(cfg, ctx["base"])
    fa = cfg.get("faraday", {})
    t0, t1 = fa.get("t0", 0.0), fa.get("t1", 1.0)
    samples = fa.get("samples", 5)
    dt = fa.get("dt", 1e-2)
    tol = fa.get("tol", 1e-13)
    if samples < 1:
        raise InvalidConfig("samples must be positive")
    if not dt > 0:
        raise InvalidConfig("dt must be positive")
    times = np.linspace(t0, t1, samples) if samples > 1 else np.array([t0])
    sweep = faraday_sweep(b, loop, times, dt, tol)
    diff = np.abs(sweep.total - sweep.decomposed)
    summary = {"schema_version": SCHEMA_VERSION, "command": "faraday",
               "field": {"family": family, **b.params}, "drift": list(loop.drift), "dt": dt,
               "samples": [{"t": t, "flux_rule": a, "induction": i, "lorentz": l}
                           for t, a, i, l in zip(times, sweep.total, sweep.induction, sweep.lorentz)],
               "max_discrepancy": float(diff.max())}
    rows = zip(times, sweep.total, sweep.induction, sweep.lorentz, sweep.decomposed)
    artifacts = {"faraday.csv": ("csv", ["t", "flux_rule", "induction", "lorentz", "decomposed"],
                                 list(rows)),
                 "faraday_terms.dat": ("plot", sweep)}
    return summary, {"max_discrepancy": summary["max_discrepancy"]}, artifacts


def cmd_berry_emf(cfg, ctx):
    config = build_vortices(cfg, ctx["base"])
    loop = build_moving_loop(cfg, ctx["base"])
    em = cfg.get("emf", {})
    t, dt = em.get("t", 0.0), _need(cfg, "emf", "dt")
    tol = em.get("tol", 1e-8)
    units = ctx["units"]
    step = berry_emf_step(config, loop, t, dt, units, tol, em.get("verify", True))
    line_form = berry_emf_line_form(config, loop, t, dt, units, tol)
    summary = {"schema_version": SCHEMA_VERSION, "command": "berry-emf", "t": t, "dt": dt,
               "units": units.as_dict(), "emf_flux_rule": step.emf, "emf_line_form": line_form,
               "winding_before": step.winding_before, "winding_after": step.winding_after,
               "meron_crossings": step.meron_crossings,
               "antimeron_crossings": step.antimeron_crossings,
               "quadrature": list(step.quadrature) if step.quadrature else None,
               "engines_agree": abs(step.emf - line_form) <= tol * max(1.0, abs(step.emf))}
    return summary, {"emf": step.emf, "emf_line_form": line_form}, {}


def cmd_nernst(cfg, ctx):
    params = dict(cfg.get("nernst", {}))
    n_real = params.pop("realizations", 200)
    seed = ctx["seed"]
    if seed is None:
        raise ConfigError("nernst needs a seed: pass --seed or set [run] seed")
    scenario = NernstScenario(**params, seed=seed, units=ctx["units"].mode)
    ens = run_ensemble(scenario, n_real, ctx["workers"])
    summary = ens.summary()
    first = ens.realizations[0]
    rows = [(k, t, e, int(d)) for k, (t, e, d) in
            enumerate(zip(first.times, first.emf_samples, first.winding_changes))]
    artifacts = {"nernst_trace.csv": ("csv", ["step", "t", "emf", "winding_change"], rows),
                 "emf_trace.dat": ("plot", first)}
    if "sweep" in cfg:
        sw = cfg["sweep"]
        sweep = density_sweep(scenario, sw.get("differences", [-2, -1, 0, 1, 2]),
                              sw.get("realizations", 4), sw.get("total"))
        summary["sweep"] = {"differences": sweep.differences.tolist(), "E_y": sweep.e_y.tolist(),
                            "E_y_predicted": sweep.predicted.tolist(),
                            "n_realizations": sweep.n_realizations}
        artifacts["nernst_sweep.dat"] = ("plot", sweep)
    line = {"E_y_mean": summary["E_y_mean"], "E_y_stderr": summary["E_y_stderr"],
            "E_y_predicted": summary["E_y_predicted"]}
    return summary, line, artifacts


HANDLERS = {"winding": cmd_winding, "quantize": cmd_quantize, "manybody-check": cmd_manybody,
            "faraday": cmd_faraday, "berry-emf": cmd_berry_emf, "nernst": cmd_nernst}


# -- driver --------------------------------------------------------------------

def _write_outputs(out: Path, command: str, summary: dict, artifacts: dict) -> list[Path]:
    io.ensure_dir(out)
    written = []
    path = out / f"{command.replace('-', '_')}_summary.json"
    io.write_json(summary, path)
    written.append(path)
    for name, spec in artifacts.items():
        target = out / name
        if spec[0] == "csv":
            io.write_csv(target, spec[1], spec[2])
        else:
            io.emit_plot_data(spec[1], target)
        written.append(target)
    return written


def execute(command: str | None, config_path, seed=None, workers=None, out=None,
            units=None) -> tuple[dict, str]:
    """Run one configured command; returns the summary and the one-line report.

    Raises ``ConfigError``, ``ValidationError`` or ``ComputationError``.
    """
    command, cfg = load_config(config_path, command)
    run = cfg.get("run", {})
    mode = units or run.get("units", "natural")
    ctx = {"base": Path(config_path).resolve().parent,
           "units": get_units(mode),
           "seed": seed if seed is not None else run.get("seed"),
           "workers": workers if workers is not None else run.get("workers", 1)}
    if ctx["workers"] < 1:
        raise InvalidConfig("workers must be at least 1")
    summary, line, artifacts = HANDLERS[command](cfg, ctx)
    out_dir = Path(out if out is not None else run.get("out", "."))
    if not out_dir.is_absolute() and out is None and "out" in run:
        out_dir = ctx["base"] / out_dir
    _write_outputs(out_dir, command, summary, artifacts)
    return summary, json.dumps(io._jsonable(line), sort_keys=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="berryemf",
        description="Berry-connection EMF engines: winding census, quantization, "
                    "many-body connections, Faraday checks and the Nernst Monte Carlo.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS + ("run",):
        p = sub.add_parser(name, help="run the command named in [run] command"
                           if name == "run" else f"{name} scenario")
        p.add_argument("--config", required=True, metavar="PATH", help="INI scenario file")
        p.add_argument("--seed", type=int, default=None, metavar="N")
        p.add_argument("--workers", type=int, default=None, metavar="N",
                       help="parallel realizations (default 1, bit-reproducible)")
        p.add_argument("--out", default=None, metavar="DIR", help="output directory")
        p.add_argument("--units", choices=("natural", "si"), default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    command = None if args.subcommand == "run" else args.subcommand
    try:
        _, line = execute(command, args.config, args.seed, args.workers, args.out, args.units)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValidationError as exc:
        print(f"invalid input ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (ComputationError, BerryEmfError) as exc:
        print(f"computation failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    print(line)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
