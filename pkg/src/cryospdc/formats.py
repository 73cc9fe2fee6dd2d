"""On-disk formats: JSI grids, tag files, tuning-curve CSV, JSON reports.

Text files start with ``# key = <json value>`` header lines followed by CSV
rows. Binary variants are ``MAGIC | uint32-LE header length | JSON header |
little-endian payload``:

* grid (``CSPDCJSI``): float64 signal axis, float64 idler axis, float64
  intensity row-major with shape (len(signal), len(idler)).
* tags (``CSPDCTAG``): records of (uint32 channel, int64 tick), sorted by
  tick then channel.
"""

from __future__ import annotations

import io
import json
import os
import struct
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .counts import TagStream
from .jsa import JsiGrid

GRID_MAGIC = b"CSPDCJSI"
TAG_MAGIC = b"CSPDCTAG"
TAG_DTYPE = np.dtype([("channel", "<u4"), ("tick", "<i8")])


class FormatError(ValueError):
    pass


def atomic_write(path: str | Path, data: bytes) -> None:
    """Write via a temporary file in the target directory, then rename."""
    if str(path) == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_bytes(path: str | Path) -> bytes:
    if str(path) == "-":
        return sys.stdin.buffer.read()
    return Path(path).read_bytes()


def _header_lines(kind: str, header: dict) -> str:
    lines = [f"# cryospdc {kind} v1"]
    for key in sorted(header):
        lines.append(f"# {key} = {json.dumps(header[key], sort_keys=True)}")
    return "\n".join(lines) + "\n"


def _parse_text(data: bytes, kind: str) -> tuple[dict, list[str]]:
    try:
        text = data.decode()
    except UnicodeDecodeError:
        raise FormatError(f"not a cryospdc {kind} file") from None
    lines = text.splitlines()
    if not lines or lines[0].strip() != f"# cryospdc {kind} v1":
        raise FormatError(f"not a cryospdc {kind} file (missing '# cryospdc {kind} v1' line)")
    header, rows = {}, []
    for line in lines[1:]:
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep:
                header[key.strip()] = json.loads(value)
        elif line.strip():
            rows.append(line)
    return header, rows


def _binary(magic: bytes, header: dict, payload: bytes) -> bytes:
    blob = json.dumps(header, sort_keys=True).encode()
    return magic + struct.pack("<I", len(blob)) + blob + payload


def _split_binary(magic: bytes, data: bytes) -> tuple[dict, bytes]:
    if not data.startswith(magic):
        raise FormatError(f"not a {magic.decode()} file")
    (n,) = struct.unpack_from("<I", data, len(magic))
    start = len(magic) + 4
    return json.loads(data[start : start + n]), data[start + n :]


def _fmt(x: float) -> str:
    return repr(float(x))


# --- JSI grid ---------------------------------------------------------------


def grid_bytes(grid: JsiGrid, config_hash: str, fmt: str = "csv") -> bytes:
    header = {
        "toolkit_version": __version__,
        "config_hash": config_hash,
        "normalization": grid.normalization,
        "units": "m",
        **{k: v for k, v in grid.metadata.items()},
    }
    if fmt == "bin":
        header["shape"] = list(grid.intensity.shape)
        payload = b"".join(
            np.ascontiguousarray(a, dtype="<f8").tobytes()
            for a in (grid.signal_axis, grid.idler_axis, grid.intensity)
        )
        return _binary(GRID_MAGIC, header, payload)
    header["signal_axis_m"] = [float(x) for x in grid.signal_axis]
    header["idler_axis_m"] = [float(x) for x in grid.idler_axis]
    out = io.StringIO()
    out.write(_header_lines("jsi-grid", header))
    for row in grid.intensity:
        out.write(",".join(_fmt(v) for v in row) + "\n")
    return out.getvalue().encode()


def parse_grid(data: bytes) -> tuple[JsiGrid, dict]:
    if data.startswith(GRID_MAGIC):
        header, payload = _split_binary(GRID_MAGIC, data)
        ns, ni = header.pop("shape")
        values = np.frombuffer(payload, dtype="<f8")
        if values.size != ns + ni + ns * ni:
            raise FormatError("grid payload size does not match header shape")
        s, i, z = values[:ns], values[ns : ns + ni], values[ns + ni :].reshape(ns, ni)
    else:
        header, rows = _parse_text(data, "jsi-grid")
        try:
            s = np.array(header.pop("signal_axis_m"), dtype=float)
            i = np.array(header.pop("idler_axis_m"), dtype=float)
        except KeyError as exc:
            raise FormatError(f"grid file missing header {exc}") from None
        z = np.array([[float(v) for v in r.split(",")] for r in rows], dtype=float)
    meta_keys = ("temperature_K", "effective_length_m", "poling_period_ref_m", "pump_central_m", "pump_fwhm_m")
    meta = {k: header[k] for k in meta_keys if k in header}
    grid = JsiGrid(s, i, z, header.get("normalization", "raw_counts"), meta)
    return grid, header


def spectrum_bytes(wavelength, intensity, config_hash: str, axis: str) -> bytes:
    out = io.StringIO()
    out.write(_header_lines("marginal", {"toolkit_version": __version__, "config_hash": config_hash, "axis": axis}))
    out.write("wavelength_nm,intensity\n")
    for x, y in zip(wavelength, intensity):
        out.write(f"{_fmt(x * 1e9)},{_fmt(y)}\n")
    return out.getvalue().encode()


# --- tag files --------------------------------------------------------------


def tags_bytes(streams: list[TagStream], config_hash: str, channel_names: dict[int, str], fmt: str = "csv") -> bytes:
    if not streams:
        raise FormatError("no streams to write")
    tick = streams[0].tick_resolution
    header = {
        "toolkit_version": __version__,
        "config_hash": config_hash,
        "tick_resolution_s": tick,
        "duration_s": streams[0].duration,
        "origin_tick": streams[0].origin,
        "channels": {str(s.channel): channel_names.get(s.channel, "") for s in streams},
    }
    records = np.concatenate(
        [np.rec.fromarrays([np.full(s.counts, s.channel, "<u4"), s.timestamps], dtype=TAG_DTYPE) for s in streams]
    )
    records = records[np.lexsort((records["channel"], records["tick"]))]
    if fmt == "bin":
        return _binary(TAG_MAGIC, header, records.tobytes())
    out = io.StringIO()
    out.write(_header_lines("tags", header))
    out.write("channel,tick\n")
    out.writelines(f"{c},{t}\n" for c, t in zip(records["channel"].tolist(), records["tick"].tolist()))
    return out.getvalue().encode()


def parse_tags(data: bytes) -> tuple[list[TagStream], dict]:
    if data.startswith(TAG_MAGIC):
        header, payload = _split_binary(TAG_MAGIC, data)
        records = np.frombuffer(payload, dtype=TAG_DTYPE)
        channels, ticks = records["channel"].astype(int), records["tick"].astype(np.int64)
    else:
        header, rows = _parse_text(data, "tags")
        body = [r for r in rows if not r.startswith("channel")]
        arr = np.array([[int(v) for v in r.split(",")] for r in body], dtype=np.int64).reshape(-1, 2)
        channels, ticks = arr[:, 0], arr[:, 1]
    try:
        tick = float(header["tick_resolution_s"])
        duration = float(header["duration_s"])
        names = header["channels"]
    except KeyError as exc:
        raise FormatError(f"tag file missing header {exc}") from None
    origin = int(header.get("origin_tick", 0))
    streams = []
    for key in sorted(names, key=int):
        ch = int(key)
        # stable sort keeps equal ticks in file order
        ts = np.sort(ticks[channels == ch], kind="stable")
        streams.append(TagStream(ch, ts, tick, duration, origin))
    return streams, header


# --- tables and reports -----------------------------------------------------


def sweep_bytes(points, config_hash: str, extra: dict) -> bytes:
    out = io.StringIO()
    out.write(_header_lines("pm-sweep", {"toolkit_version": __version__, "config_hash": config_hash, **extra}))
    out.write("temperature_K,lambda_s_nm,lambda_i_nm,residual\n")
    for p in points:
        if hasattr(p, "signal_wavelength"):
            out.write(
                f"{_fmt(p.temperature)},{_fmt(p.signal_wavelength * 1e9)},"
                f"{_fmt(p.idler_wavelength * 1e9)},{_fmt(p.residual_mismatch)}\n"
            )
        else:
            out.write(f"{_fmt(p.temperature)},nan,nan,nan\n")
    return out.getvalue().encode()


def table_bytes(kind: str, config_hash: str, columns: list[str], rows, extra: dict | None = None) -> bytes:
    """Generic CSV table with the standard header block."""
    out = io.StringIO()
    out.write(_header_lines(kind, {"toolkit_version": __version__, "config_hash": config_hash, **(extra or {})}))
    out.write(",".join(columns) + "\n")
    for row in rows:
        out.write(",".join(v if isinstance(v, str) else _fmt(v) for v in row) + "\n")
    return out.getvalue().encode()


def report_bytes(report: dict, config_hash: str) -> bytes:
    body = {"toolkit_version": __version__, "config_hash": config_hash, **report}
    return (json.dumps(body, sort_keys=True, indent=2, default=_plain) + "\n").encode()


def _plain(value):
    if hasattr(value, "tolist"):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")
