"""Force-plate ingestion: parse per-plate recordings, fuse plates into one
global centre of pressure and resample it to a uniform timebase.

Axis convention used throughout the package: +x is anterior (the walking
direction), +y is rightward.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from itertools import groupby
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import SchemaError

DEFAULT_CONTACT_THRESHOLD = 20.0  # N, total vertical force
DEFAULT_RATE = 100.0  # Hz
DEFAULT_MAX_GAP = 0.05  # s

PLATE_HEADER = ("t", "plate_id", "fz", "cop_x", "cop_y")
LAYOUT_HEADER = ("plate_id", "origin_x", "origin_y")
COP_HEADER = ("t", "x", "y", "valid")


@dataclass(frozen=True)
class PlateFrame:
    """One force-plate reading, CoP expressed in the plate's own frame."""

    plate_id: int
    t: float
    fz: float
    cop_local_x: float
    cop_local_y: float
    origin_x: float = 0.0
    origin_y: float = 0.0

    @property
    def global_x(self) -> float:
        return self.origin_x + self.cop_local_x

    @property
    def global_y(self) -> float:
        return self.origin_y + self.cop_local_y


@dataclass(frozen=True)
class CoPSample:
    """Timestamped planar CoP in the global frame.

    ``valid`` is False when the total vertical force is below the contact
    threshold; x and y then carry the last valid position (NaN if none).
    """

    t: float
    x: float
    y: float
    valid: bool = True


def _read_rows(path, header):
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        first = next(reader, None)
        if first is None:
            raise SchemaError("missing header", line=1, path=path)
        if tuple(c.strip() for c in first) != header:
            raise SchemaError(
                f"expected header {','.join(header)!r}, got {','.join(first)!r}",
                line=1,
                path=path,
            )
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise SchemaError(
                    f"expected {len(header)} columns, got {len(row)}",
                    line=reader.line_num,
                    path=path,
                )
            yield reader.line_num, [c.strip() for c in row]


def _number(text, line, path, kind=float):
    try:
        value = kind(text)
    except ValueError:
        raise SchemaError(f"non-numeric field {text!r}", line=line, path=path) from None
    if kind is float and not math.isfinite(value):
        raise SchemaError(f"non-finite field {text!r}", line=line, path=path)
    return value


def load_layout(path) -> dict[int, tuple[float, float]]:
    """Read a plate layout file (``plate_id,origin_x,origin_y``, meters)."""
    layout = {}
    for line, (pid, ox, oy) in _read_rows(path, LAYOUT_HEADER):
        plate_id = _number(pid, line, path, int)
        if plate_id in layout:
            raise SchemaError(f"duplicate plate_id {plate_id}", line=line, path=path)
        layout[plate_id] = (_number(ox, line, path), _number(oy, line, path))
    return layout


def row_layout(n_plates: int, plate_length: float = 0.6) -> dict[int, tuple[float, float]]:
    """Layout of ``n_plates`` plates placed in a row along +x, ids from 1."""
    return {i + 1: (i * plate_length, 0.0) for i in range(n_plates)}


def parse_plate_file(path, layout: dict[int, tuple[float, float]]) -> list[PlateFrame]:
    """Parse a plate CSV (``t,plate_id,fz,cop_x,cop_y``) into PlateFrames.

    Frames come back sorted by ``(t, plate_id)``. Raises SchemaError, with the
    offending line number, on wrong column counts, non-numeric fields,
    negative forces, unknown plates or timestamps that go backwards within
    a plate.
    """
    frames = []
    last_t: dict[int, float] = {}
    for line, (t, pid, fz, cx, cy) in _read_rows(path, PLATE_HEADER):
        t = _number(t, line, path)
        plate_id = _number(pid, line, path, int)
        fz = _number(fz, line, path)
        cx = _number(cx, line, path)
        cy = _number(cy, line, path)
        if plate_id not in layout:
            raise SchemaError(f"plate_id {plate_id} not in layout", line=line, path=path)
        if fz < 0:
            raise SchemaError(f"negative vertical force {fz}", line=line, path=path)
        if plate_id in last_t and t < last_t[plate_id]:
            raise SchemaError(
                f"timestamp {t} goes backwards for plate {plate_id}", line=line, path=path
            )
        last_t[plate_id] = t
        ox, oy = layout[plate_id]
        frames.append(PlateFrame(plate_id, t, fz, cx, cy, ox, oy))
    frames.sort(key=lambda f: (f.t, f.plate_id))
    return frames


def fuse_plates(
    frames: Sequence[PlateFrame],
    contact_threshold: float = DEFAULT_CONTACT_THRESHOLD,
    last_valid: tuple[float, float] | None = None,
) -> CoPSample:
    """Force-weighted centroid of the plates' global CoPs at one instant."""
    if not frames:
        raise ValueError("fuse_plates needs at least one frame")
    t = frames[0].t
    if any(f.t != t for f in frames):
        raise ValueError("all frames passed to fuse_plates must share one timestamp")
    total = math.fsum(f.fz for f in frames)
    if total < contact_threshold or total <= 0.0:
        x, y = last_valid if last_valid is not None else (math.nan, math.nan)
        return CoPSample(t, x, y, False)
    x = math.fsum(f.fz * f.global_x for f in frames) / total
    y = math.fsum(f.fz * f.global_y for f in frames) / total
    # rounding in the division can step a hair outside the hull
    xs = [f.global_x for f in frames if f.fz > 0]
    ys = [f.global_y for f in frames if f.fz > 0]
    x = min(max(x, min(xs)), max(xs))
    y = min(max(y, min(ys)), max(ys))
    return CoPSample(t, x, y, True)


def fuse_recording(
    frames: Iterable[PlateFrame], contact_threshold: float = DEFAULT_CONTACT_THRESHOLD
) -> list[CoPSample]:
    """Fuse a whole recording, one CoPSample per distinct timestamp."""
    out = []
    last = None
    for _, group in groupby(sorted(frames, key=lambda f: (f.t, f.plate_id)), key=lambda f: f.t):
        sample = fuse_plates(list(group), contact_threshold, last)
        if sample.valid:
            last = (sample.x, sample.y)
        out.append(sample)
    return out


def resample_uniform(
    samples: Sequence[CoPSample], rate: float = DEFAULT_RATE, max_gap: float = DEFAULT_MAX_GAP
) -> list[CoPSample]:
    """Linearly interpolate a CoP stream onto a uniform grid.

    The grid is ``t_first + k / rate`` spanning ``[t_first, t_last]``. Only
    valid samples are interpolated; a grid point that falls inside a run of
    invalid input longer than ``max_gap`` seconds is emitted as invalid,
    carrying the last valid position.
    """
    if rate <= 0:
        raise ValueError("rate must be positive")
    if len(samples) < 2:
        raise ValueError("resample_uniform needs at least 2 samples")
    t = np.array([s.t for s in samples], dtype=float)
    if np.any(np.diff(t) <= 0):
        raise ValueError("sample timestamps must be strictly increasing")
    valid = np.array([s.valid for s in samples], dtype=bool)
    if valid.sum() < 2:
        raise ValueError("resample_uniform needs at least 2 valid samples")
    tv = t[valid]
    xv = np.array([s.x for s in samples], dtype=float)[valid]
    yv = np.array([s.y for s in samples], dtype=float)[valid]

    t0 = t[0]
    n = int(math.floor((t[-1] - t0) * rate + 1e-9)) + 1
    grid = t0 + np.arange(n) / rate
    gx = np.interp(grid, tv, xv)
    gy = np.interp(grid, tv, yv)

    # a valid-to-valid interval is a gap when invalid input lies inside it
    # and it is longer than max_gap
    valid_idx = np.flatnonzero(valid)
    has_invalid = np.diff(valid_idx) > 1
    too_long = np.diff(tv) > max_gap
    gap = has_invalid & too_long
    ok = np.ones(n, dtype=bool)
    # grid points before the first or after the last valid sample are extrapolated
    ok &= (grid >= tv[0] - 1e-12) & (grid <= tv[-1] + 1e-12)
    if gap.any():
        seg = np.clip(np.searchsorted(tv, grid, side="right") - 1, 0, len(tv) - 2)
        inside = (grid > tv[seg]) & (grid < tv[seg + 1])
        ok &= ~(gap[seg] & inside)

    out = []
    last = (float(xv[0]), float(yv[0]))
    for ti, xi, yi, oki in zip(grid.tolist(), gx.tolist(), gy.tolist(), ok.tolist()):
        if oki:
            last = (xi, yi)
            out.append(CoPSample(ti, xi, yi, True))
        else:
            out.append(CoPSample(ti, last[0], last[1], False))
    return out


def read_cop_csv(path) -> list[CoPSample]:
    """Read a fused-CoP CSV (``t,x,y,valid``)."""
    out = []
    prev = -math.inf
    for line, (t, x, y, valid) in _read_rows(path, COP_HEADER):
        t = _number(t, line, path)
        if t <= prev:
            raise SchemaError("timestamps must be strictly increasing", line=line, path=path)
        prev = t
        if valid not in ("0", "1"):
            raise SchemaError(f"valid must be 0 or 1, got {valid!r}", line=line, path=path)
        is_valid = valid == "1"
        try:
            xf, yf = float(x), float(y)
        except ValueError:
            raise SchemaError("non-numeric coordinate", line=line, path=path) from None
        if is_valid and not (math.isfinite(xf) and math.isfinite(yf)):
            raise SchemaError("valid sample with non-finite coordinate", line=line, path=path)
        out.append(CoPSample(t, xf, yf, is_valid))
    return out


def write_cop_csv(path, samples: Iterable[CoPSample]) -> None:
    """Write a fused-CoP CSV (``t,x,y,valid``) with round-trip float precision."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COP_HEADER)
        for s in samples:
            writer.writerow([repr(float(s.t)), repr(float(s.x)), repr(float(s.y)), int(s.valid)])
