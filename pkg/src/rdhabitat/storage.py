"""Deterministic artifact files: snapshots, series CSV, reports, graymaps.

All text is UTF-8 with `\\n` line ends and floats written via repr (shortest
round-trip form), so a rerun with the same config produces byte-identical
files.  A snapshot is a plain-text header terminated by an `end_header`
line, followed by two row-major float64 little-endian planes (u then v) of
nx*ny cells each; cells outside the domain mask hold NaN.  The optional
companion `<path>.mask` is a binary portable graymap of the mask.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass

import numpy as np

from .domain import GridGeometry
from .errors import ConfigError, ShapeMismatch
from .solver import FieldState, TimeSeries

SNAPSHOT_MAGIC = "rdhabitat-snapshot 1"
SERIES_MAGIC = "rdhabitat-series 1"
SERIES_COLUMNS = ("t", "mean_u_d1", "mean_v_d1", "mean_u_d2", "mean_v_d2",
                  "mean_u_all", "mean_v_all")


@dataclass(frozen=True)
class SnapshotFile:
    """A parsed snapshot: the field state plus its full text header."""

    state: FieldState
    header: dict[str, str]


def _fmt(value: float) -> str:
    return repr(float(value))


def _header_block(pairs: list[tuple[str, str]]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in pairs)


def write_snapshot(path: str, state: FieldState, g: GridGeometry,
                   config_pairs: list[tuple[str, str]],
                   extra_pairs: list[tuple[str, str]] | None = None) -> None:
    """Write header + u,v planes; config_pairs are embedded under `config.`."""
    if state.u.shape != (g.ny, g.nx) or state.v.shape != (g.ny, g.nx):
        raise ShapeMismatch(
            f"state shape {state.u.shape} does not match grid ({g.ny}, {g.nx})")
    pairs = [
        ("nx", str(g.nx)),
        ("ny", str(g.ny)),
        ("h", _fmt(g.h)),
        ("t", _fmt(state.t)),
    ]
    pairs += list(extra_pairs or [])
    pairs += [(f"config.{k}", v) for k, v in config_pairs]
    buf = io.BytesIO()
    buf.write(SNAPSHOT_MAGIC.encode())
    buf.write(b"\n")
    buf.write(_header_block(pairs).encode())
    buf.write(b"end_header\n")
    buf.write(np.ascontiguousarray(state.u, dtype="<f8").tobytes())
    buf.write(np.ascontiguousarray(state.v, dtype="<f8").tobytes())
    _atomic_write_bytes(path, buf.getvalue())


def read_snapshot(path: str) -> SnapshotFile:
    with open(path, "rb") as fh:
        data = fh.read()
    nl = data.find(b"\n")
    if nl < 0 or data[:nl].decode(errors="replace") != SNAPSHOT_MAGIC:
        raise ConfigError(f"{path}: not a snapshot file (bad magic line)")
    marker = b"end_header\n"
    end = data.find(marker, nl)
    if end < 0:
        raise ConfigError(f"{path}: snapshot header never ends")
    header: dict[str, str] = {}
    for raw in data[nl + 1:end].decode().splitlines():
        line = raw.strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}: bad header line {raw!r}")
        header[key.strip()] = value.strip()
    for need in ("nx", "ny", "h", "t"):
        if need not in header:
            raise ConfigError(f"{path}: header is missing {need!r}")
    nx, ny = int(header["nx"]), int(header["ny"])
    t = float(header["t"])
    planes = data[end + len(marker):]
    expect = 2 * nx * ny * 8
    if len(planes) != expect:
        raise ConfigError(
            f"{path}: expected {expect} plane bytes for {nx}x{ny}, found {len(planes)}")
    flat = np.frombuffer(planes, dtype="<f8")
    u = flat[:nx * ny].reshape(ny, nx).copy()
    v = flat[nx * ny:].reshape(ny, nx).copy()
    return SnapshotFile(state=FieldState(u=u, v=v, t=t), header=header)


def embedded_config_pairs(header: dict[str, str]) -> dict[str, str]:
    """The `config.*` keys of a snapshot header, with the prefix stripped."""
    return {k[len("config."):]: v for k, v in header.items() if k.startswith("config.")}


def write_series(path: str, series: TimeSeries,
                 config_pairs: list[tuple[str, str]],
                 extra_pairs: list[tuple[str, str]] | None = None) -> None:
    """Series CSV with the resolved config embedded as `# key = value` lines."""
    lines = [f"# {SERIES_MAGIC}"]
    lines += [f"# {k} = {v}" for k, v in (extra_pairs or [])]
    lines += [f"# config.{k} = {v}" for k, v in config_pairs]
    lines.append(",".join(SERIES_COLUMNS))
    cols = [getattr(series, name) for name in SERIES_COLUMNS]
    for row in zip(*cols):
        lines.append(",".join(_fmt(x) for x in row))
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def read_series(path: str) -> tuple[TimeSeries, dict[str, str]]:
    header: dict[str, str] = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body_started = False
    for line in lines:
        if line.startswith("#"):
            text = line[1:].strip()
            key, sep, value = text.partition("=")
            if sep:
                header[key.strip()] = value.strip()
            continue
        if not line.strip():
            continue
        if not body_started:
            if tuple(line.split(",")) != SERIES_COLUMNS:
                raise ConfigError(f"{path}: unexpected series columns {line!r}")
            body_started = True
            continue
        parts = line.split(",")
        if len(parts) != len(SERIES_COLUMNS):
            raise ConfigError(f"{path}: bad series row {line!r}")
        rows.append([float(x) for x in parts])
    if not body_started:
        raise ConfigError(f"{path}: no column header found")
    data = np.array(rows, dtype=np.float64).reshape(len(rows), len(SERIES_COLUMNS))
    kwargs = {name: data[:, i] for i, name in enumerate(SERIES_COLUMNS)}
    return TimeSeries(**kwargs), header


def write_report(path: str, pairs: list[tuple[str, str]],
                 config_pairs: list[tuple[str, str]]) -> None:
    """Key-value report file with the resolved config appended."""
    lines = [f"{k} = {v}" for k, v in pairs]
    lines += [f"config.{k} = {v}" for k, v in config_pairs]
    _atomic_write_bytes(path, ("\n".join(lines) + "\n").encode())


def write_mask_pgm(path: str, g: GridGeometry) -> None:
    """Domain mask as a binary portable graymap (255 inside, 0 outside)."""
    levels = np.where(g.mask, 255, 0).astype(np.uint8)
    _write_pgm(path, levels)


def write_threshold_pgm(path: str, field: np.ndarray, g: GridGeometry) -> None:
    """Tri-level graymap of a field: above/below +-0.5 std vs the middle.

    White marks cells above mean + 0.5 std, black cells below mean - 0.5 std,
    gray the rest; outside-mask cells are black.  Row 0 of the grid is the
    bottom of the domain, so the image is flipped to the usual top-down
    raster order.
    """
    values = field[g.mask]
    mean, std = float(values.mean()), float(values.std())
    levels = np.full(field.shape, 128, dtype=np.uint8)
    levels[field > mean + 0.5 * std] = 255
    levels[field < mean - 0.5 * std] = 0
    levels[~g.mask] = 0
    _write_pgm(path, levels)


def _write_pgm(path: str, levels: np.ndarray) -> None:
    ny, nx = levels.shape
    buf = io.BytesIO()
    buf.write(f"P5\n{nx} {ny}\n255\n".encode())
    buf.write(np.ascontiguousarray(levels[::-1]).tobytes())
    _atomic_write_bytes(path, buf.getvalue())


def _atomic_write_bytes(path: str, payload: bytes) -> None:
    tmp = f"{path}.tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)
