"""File formats: CSV tables, trajectory exports and binary ADO dumps."""

from __future__ import annotations

import contextlib
import os
import struct
from pathlib import Path

import numpy as np

__all__ = [
    "CSV_FORMAT",
    "ADO_MAGIC",
    "ADO_VERSION",
    "partial_path",
    "atomic_output",
    "write_csv",
    "write_spectrum",
    "write_sweep",
    "write_trajectory",
    "write_ados",
    "read_ados",
]

CSV_FORMAT = "%.12g"
ADO_MAGIC = b"HEOMADOS\0"
ADO_VERSION = 1
_HEADER = struct.Struct("<12sI")  # magic NUL-padded to 12 bytes + u32 version = 16 bytes


def partial_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".partial")


@contextlib.contextmanager
def atomic_output(path):
    """Write to ``<path>.partial`` and rename on success.

    On an exception the partial file is kept for inspection.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = partial_path(path)
    with open(tmp, "w", newline="") as fh:
        yield fh
    os.replace(tmp, path)


def _fmt(x) -> str:
    return CSV_FORMAT % x


def write_csv(path, header, rows) -> None:
    """Plain numeric CSV; every value is formatted with ``%.12g``."""
    with atomic_output(path) as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_spectrum(path, omega, values) -> None:
    write_csv(path, ["omega", "value"], zip(omega, values))


def write_sweep(path, phi, currents, conductance=None) -> None:
    if conductance is None:
        write_csv(path, ["phi", "current"], zip(phi, currents))
    else:
        write_csv(path, ["phi", "current", "conductance"], zip(phi, currents, conductance))


def write_trajectory(path, times, columns: dict) -> None:
    """``t, re(name), im(name), ...`` for each complex series in ``columns``."""
    header = ["t"]
    data = [np.asarray(times, dtype=float)]
    for name, series in columns.items():
        series = np.asarray(series, dtype=complex)
        header += [f"re({name})", f"im({name})"]
        data += [series.real, series.imag]
    write_csv(path, header, zip(*data))


def write_ados(path, data, n_ados: int, dim: int) -> None:
    """Binary dump of a stacked ADO vector.

    Layout: 16-byte header (``HEOMADOS\\0`` NUL-padded to 12 bytes, u32
    version), then u64 ``n_ados`` and u64 ``dim``, then ``n_ados * dim^2``
    little-endian float64 ``(re, im)`` pairs in vector order.
    """
    data = np.asarray(data, dtype=complex).reshape(-1)
    if data.size != n_ados * dim * dim:
        raise ValueError("vector length does not match n_ados * dim^2")
    path = Path(path)
    tmp = partial_path(path)
    with open(tmp, "wb") as fh:
        fh.write(_HEADER.pack(ADO_MAGIC, ADO_VERSION))
        fh.write(struct.pack("<QQ", n_ados, dim))
        fh.write(data.astype("<c16").tobytes())
    os.replace(tmp, path)


def read_ados(path):
    """Inverse of :func:`write_ados`; returns ``(data, n_ados, dim)``."""
    raw = Path(path).read_bytes()
    magic, version = _HEADER.unpack_from(raw, 0)
    if magic != ADO_MAGIC.ljust(12, b"\0"):
        raise ValueError("not an ADO dump (bad magic)")
    if version != ADO_VERSION:
        raise ValueError(f"unsupported ADO dump version {version}")
    n_ados, dim = struct.unpack_from("<QQ", raw, _HEADER.size)
    data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size + 16)
    if data.size != n_ados * dim * dim:
        raise ValueError("truncated ADO dump")
    return data.astype(complex), int(n_ados), int(dim)
