"""Text and binary formats, CSV/JSON writers and plot-column files.

Vortex files (``.vtx`` by convention)::

    # comment lines and blank lines are ignored
    10.0 10.0          <- Lx Ly
    2.5  3.0  1        <- x y w, one core per line
    7.1  4.2 -1

Loop files hold one ``x y`` vertex per line in traversal order, same
comment rules; the closing edge back to the first vertex is implicit.

Wave-function tensors come in two flavours.

Binary (little-endian throughout)::

    bytes 0..7    magic b"BEMFWF1\\0"
    bytes 8..23   four int32: nx, ny, N, spin_dim
    then          float64 pairs (re, im) for every amplitude, row-major over
                  the index order (x1, y1, s1[, x2, y2, s2])

Text: first non-comment line ``nx ny N spin_dim``, then one ``re im`` pair
per line in the same row-major order.

Neither tensor format stores the mesh spacing or origin; those travel in
the run configuration.
"""

from __future__ import annotations

import csv
import json
import math
import os
import struct
from pathlib import Path

import numpy as np

from .errors import InvalidConfig
from .field_core import VortexConfig
from .topology import PolyLoop

WF_MAGIC = b"BEMFWF1\x00"
_WF_HEADER = struct.Struct("<4i")


def _data_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line.split()


def _floats(tokens, lineno, expect):
    if len(tokens) != expect:
        raise InvalidConfig(f"line {lineno}: expected {expect} fields, got {len(tokens)}")
    try:
        return [float(t) for t in tokens]
    except ValueError:
        raise InvalidConfig(f"line {lineno}: non-numeric field in {' '.join(tokens)!r}") from None


# -- vortex configurations -------------------------------------------------

def parse_vortices(text: str, eps_core: float | None = None) -> VortexConfig:
    lines = list(_data_lines(text))
    if not lines:
        raise InvalidConfig("vortex file is empty (missing the 'Lx Ly' header)")
    lx, ly = _floats(lines[0][1], lines[0][0], 2)
    cores = []
    for lineno, tok in lines[1:]:
        x, y, w = _floats(tok, lineno, 3)
        if w != int(w):
            raise InvalidConfig(f"line {lineno}: winding {tok[2]!r} is not an integer")
        cores.append((x, y, int(w)))
    return VortexConfig.from_cores(cores, lx, ly, eps_core)


def format_vortices(config: VortexConfig) -> str:
    out = [f"{config.lx!r} {config.ly!r}"]
    out += [f"{x!r} {y!r} {w:d}" for x, y, w in config.cores]
    return "\n".join(out) + "\n"


def read_vortices(path, eps_core: float | None = None) -> VortexConfig:
    return parse_vortices(Path(path).read_text(), eps_core)


def write_vortices(config: VortexConfig, path) -> None:
    Path(path).write_text(format_vortices(config))


# -- loops -----------------------------------------------------------------

def parse_loop(text: str) -> PolyLoop:
    verts = [_floats(tok, lineno, 2) for lineno, tok in _data_lines(text)]
    return PolyLoop(verts)


def format_loop(loop: PolyLoop) -> str:
    return "".join(f"{x!r} {y!r}\n" for x, y in loop.vertices.tolist())


def read_loop(path) -> PolyLoop:
    return parse_loop(Path(path).read_text())


def write_loop(loop: PolyLoop, path) -> None:
    Path(path).write_text(format_loop(loop))


# -- wave-function tensors -------------------------------------------------

def _wf_shape(nx, ny, n, ns):
    if n not in (1, 2):
        raise InvalidConfig(f"electron count must be 1 or 2, got {n}")
    if min(nx, ny, ns) < 1:
        raise InvalidConfig("tensor dimensions must be positive")
    return (nx, ny, ns) * n


def write_wavefunction(amplitudes, path, binary: bool = True) -> None:
    """Store a ``(nx, ny, ns)`` or ``(nx, ny, ns, nx, ny, ns)`` complex tensor."""
    amp = np.asarray(amplitudes, complex)
    if amp.ndim == 2:
        amp = amp[..., None]
    if amp.ndim not in (3, 6):
        raise InvalidConfig(f"cannot store tensor of shape {amp.shape}")
    nx, ny, ns = amp.shape[:3]
    n = amp.ndim // 3
    pairs = np.stack([amp.real.ravel(), amp.imag.ravel()], axis=-1)
    if binary:
        with open(path, "wb") as fh:
            fh.write(WF_MAGIC)
            fh.write(_WF_HEADER.pack(nx, ny, n, ns))
            fh.write(pairs.astype("<f8").tobytes())
    else:
        with open(path, "w") as fh:
            fh.write(f"{nx} {ny} {n} {ns}\n")
            for re, im in pairs.tolist():
                fh.write(f"{re!r} {im!r}\n")


def read_wavefunction(path, binary: bool | None = None) -> np.ndarray:
    """Load a tensor; ``binary=None`` sniffs the magic bytes."""
    raw = Path(path).read_bytes()
    if binary is None:
        binary = raw.startswith(WF_MAGIC)
    if binary:
        if not raw.startswith(WF_MAGIC):
            raise InvalidConfig(f"{path}: missing wave-function magic header")
        off = len(WF_MAGIC)
        nx, ny, n, ns = _WF_HEADER.unpack_from(raw, off)
        shape = _wf_shape(nx, ny, n, ns)
        count = int(np.prod(shape))
        body = raw[off + _WF_HEADER.size:]
        if len(body) != 16 * count:
            raise InvalidConfig(f"{path}: expected {count} complex values, found {len(body) / 16:g}")
        pairs = np.frombuffer(body, dtype="<f8").reshape(count, 2)
    else:
        lines = list(_data_lines(raw.decode()))
        if not lines:
            raise InvalidConfig(f"{path}: empty wave-function file")
        head = lines[0][1]
        if len(head) != 4:
            raise InvalidConfig(f"{path}: header must be 'nx ny N spin_dim'")
        try:
            nx, ny, n, ns = (int(t) for t in head)
        except ValueError:
            raise InvalidConfig(f"{path}: header fields must be integers") from None
        shape = _wf_shape(nx, ny, n, ns)
        count = int(np.prod(shape))
        if len(lines) - 1 != count:
            raise InvalidConfig(f"{path}: expected {count} amplitude lines, found {len(lines) - 1}")
        pairs = np.array([_floats(tok, ln, 2) for ln, tok in lines[1:]])
    return (pairs[:, 0] + 1j * pairs[:, 1]).reshape(shape)


# -- tabular and JSON output -----------------------------------------------

def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else None
    return obj


def dumps_json(obj) -> str:
    """Canonical JSON: sorted keys, fixed indentation, NaN/inf mapped to null."""
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(obj, path) -> None:
    Path(path).write_text(dumps_json(obj))


def write_columns(path, header, columns) -> None:
    """Whitespace-separated column file with a ``#`` header line."""
    cols = [np.asarray(c).reshape(-1) for c in columns]
    n = cols[0].size if cols else 0
    if any(c.size != n for c in cols):
        raise ValueError("columns differ in length")
    with open(path, "w") as fh:
        fh.write("# " + " ".join(header) + "\n")
        for i in range(n):
            fh.write(" ".join(str(_cell(c[i])) for c in cols) + "\n")


def emit_plot_data(result, path) -> Path:
    """Write plot-ready columns for a Nernst trace, a density sweep or a Faraday sweep."""
    from .emf import FaradaySweep
    from .nernst import DensitySweep, NernstResult

    path = Path(path)
    if path.parent and not path.parent.exists():
        raise FileNotFoundError(f"directory {str(path.parent)!r} does not exist")
    if isinstance(result, NernstResult):
        write_columns(path, ["t", "emf"], [result.times, result.emf_samples])
    elif isinstance(result, DensitySweep):
        write_columns(path, ["n_a_minus_n_m", "E_y"], [result.differences, result.e_y])
    elif isinstance(result, FaradaySweep):
        write_columns(path, ["induction", "lorentz"], [result.induction, result.lorentz])
    else:
        raise TypeError(f"no plot layout for {type(result).__name__}")
    return path


def ensure_dir(path) -> Path:
    p = Path(path)
    os.makedirs(p, exist_ok=True)
    return p
