"""Binary field dumps and deterministic text artifacts.

Field dump layout (little-endian):
  u32 d, u32 n, 8-byte ASCII tag 'spectral' or 'physical', then n^d
  complex64 values (float32 re/im pairs) in row-major order; spectral files
  order each axis by ascending integer frequency -n/2+1 .. n/2, physical
  files by ascending sample index.

State dumps extend the header with a u32 slot count N and carry (n^d)^N
complex64 amplitudes in row-major slot order.

CSV and JSON writers format floats by shortest round-trip repr so reruns of
the same seeded configuration are byte-identical.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .grids import GridSpec, TorusField
from .manybody import BosonicState, ManyBodyConfig

_LAYOUTS = ("spectral", "physical")


def _ascending_freq_order(n: int) -> np.ndarray:
    """Indices into FFT layout for frequencies -n/2+1, ..., n/2."""
    freqs = np.arange(-n // 2 + 1, n // 2 + 1)
    return freqs % n


def dump_field(f: TorusField, path, layout: str = "spectral") -> None:
    if layout not in _LAYOUTS:
        raise ValueError(f"layout must be one of {_LAYOUTS}")
    grid = f.grid
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", grid.d, grid.n))
        fh.write(layout.encode("ascii").ljust(8, b"\0"))
        if layout == "spectral":
            order = _ascending_freq_order(grid.n)
            data = f.coefficients[np.ix_(*[order] * grid.d)]
        else:
            data = f.values
        fh.write(np.ascontiguousarray(data, dtype=np.complex64).tobytes())


def load_field(path) -> TorusField:
    with open(path, "rb") as fh:
        d, n = struct.unpack("<II", fh.read(8))
        layout = fh.read(8).rstrip(b"\0").decode("ascii")
        if layout not in _LAYOUTS:
            raise ValueError(f"unknown layout tag {layout!r}")
        grid = GridSpec(d, n)
        raw = np.frombuffer(fh.read(), dtype=np.complex64).astype(np.complex128)
        data = raw.reshape(grid.shape)
    if layout == "physical":
        return TorusField.from_values(grid, data)
    order = _ascending_freq_order(n)
    coeffs = np.empty(grid.shape, dtype=np.complex128)
    coeffs[np.ix_(*[order] * d)] = data
    return TorusField(grid, coeffs)


def dump_state(psi: BosonicState, path) -> None:
    grid = psi.config.grid
    with open(path, "wb") as fh:
        fh.write(struct.pack("<II", grid.d, grid.n))
        fh.write(b"physical".ljust(8, b"\0"))
        fh.write(struct.pack("<I", psi.config.N))
        fh.write(np.ascontiguousarray(psi.amps, dtype=np.complex64).tobytes())


def load_state(config: ManyBodyConfig, path) -> BosonicState:
    with open(path, "rb") as fh:
        d, n = struct.unpack("<II", fh.read(8))
        fh.read(8)
        (N,) = struct.unpack("<I", fh.read(4))
        if (d, n, N) != (config.grid.d, config.grid.n, config.N):
            raise ValueError(
                f"file geometry (d={d}, n={n}, N={N}) does not match the configuration"
            )
        raw = np.frombuffer(fh.read(), dtype=np.complex64).astype(np.complex128)
    return BosonicState(config, raw.reshape(config.state_shape))


def format_number(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, header: list[str], rows: list[list]) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_number(v) if not isinstance(v, str) else v for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_json(path, payload: dict) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
