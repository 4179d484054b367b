"""Reference CoP paths: synthesis of a slow walk, file I/O and time lookups."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import SchemaError


@dataclass(frozen=True)
class GaitParams:
    """Parameters of a synthetic slow walk.

    Defaults describe small steps over a 3 m row of force plates.
    """

    step_length: float = 0.3
    step_period: float = 2.0
    ml_amplitude: float = 0.05
    path_length: float = 3.0
    double_support_fraction: float = 0.3

    def __post_init__(self):
        for name in ("step_length", "step_period", "path_length"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.ml_amplitude < 0:
            raise ValueError("ml_amplitude must be non-negative")
        if not 0 <= self.double_support_fraction < 1:
            raise ValueError("double_support_fraction must lie in [0, 1)")


@dataclass(frozen=True, eq=False)
class ReferencePath:
    """Uniformly sampled planar CoP trajectory starting at t = 0."""

    rate: float
    x: np.ndarray
    y: np.ndarray
    _xs: list = field(init=False, repr=False)
    _ys: list = field(init=False, repr=False)

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("rate must be positive")
        x = np.array(self.x, dtype=float)
        y = np.array(self.y, dtype=float)
        if x.ndim != 1 or x.shape != y.shape:
            raise ValueError("x and y must be 1-D arrays of equal length")
        if len(x) < 2:
            raise ValueError("a reference path needs at least 2 points")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("reference points must be finite")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        # plain lists make scalar lookups several times faster than ndarray indexing
        object.__setattr__(self, "_xs", x.tolist())
        object.__setattr__(self, "_ys", y.tolist())

    def __len__(self):
        return len(self._xs)

    @property
    def duration(self) -> float:
        return (len(self._xs) - 1) / self.rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(len(self._xs)) / self.rate

    def lookup(self, t: float) -> tuple[float, float]:
        """Reference point at time ``t``, linearly interpolated and clamped."""
        pos = t * self.rate
        last = len(self._xs) - 1
        if not pos > 0:
            return self._xs[0], self._ys[0]
        if pos >= last:
            return self._xs[last], self._ys[last]
        i = int(pos)
        frac = pos - i
        if frac == 0.0:
            return self._xs[i], self._ys[i]
        x0, y0 = self._xs[i], self._ys[i]
        return x0 + frac * (self._xs[i + 1] - x0), y0 + frac * (self._ys[i + 1] - y0)

    def lookup_many(self, t) -> tuple[np.ndarray, np.ndarray]:
        """Vectorised :meth:`lookup`."""
        grid = self.times
        t = np.asarray(t, dtype=float)
        return np.interp(t, grid, self.x), np.interp(t, grid, self.y)

    def resampled(self, rate: float) -> "ReferencePath":
        """The same trajectory sampled at ``rate`` over the same duration."""
        if rate == self.rate:
            return self
        n = int(round(self.duration * rate)) + 1
        x, y = self.lookup_many(np.arange(n) / rate)
        return ReferencePath(rate, x, y)


def lookup(path: ReferencePath, t: float) -> tuple[float, float]:
    return path.lookup(t)


def anticipatory_lookup(path: ReferencePath, t: float, t_a: float) -> tuple[float, float]:
    """Reference point ``t_a`` seconds ahead of ``t``."""
    if t_a < 0:
        raise ValueError("anticipation interval must be non-negative")
    return path.lookup(t + t_a)


def generate_gait_path(params: GaitParams | None = None, rate: float = 100.0) -> ReferencePath:
    """Synthesise a slow-walk CoP path.

    Forward progression happens step by step: each step of ``step_period``
    seconds dwells for half the double-support time at either end and eases
    forward with a raised-cosine profile in between. The lateral coordinate
    is a sinusoid of period ``2 * step_period`` whose extremes fall at mid
    single support. The last step is shortened when ``path_length`` is not a
    multiple of ``step_length``.
    """
    p = params or GaitParams()
    if not rate > 0:
        raise ValueError("rate must be positive")
    n_steps = max(1, math.ceil(p.path_length / p.step_length - 1e-9))
    duration = n_steps * p.step_period
    n = int(round(duration * rate)) + 1
    t = np.arange(n) / rate

    step = np.minimum(np.floor(t / p.step_period + 1e-9), n_steps - 1).astype(int)
    tau = t - step * p.step_period
    dwell = 0.5 * p.double_support_fraction * p.step_period
    swing = p.step_period - 2 * dwell
    s = np.clip((tau - dwell) / swing, 0.0, 1.0)
    lengths = np.minimum(p.step_length, p.path_length - np.arange(n_steps) * p.step_length)
    start = np.concatenate([[0.0], np.cumsum(lengths)[:-1]])
    x = start[step] + lengths[step] * 0.5 * (1.0 - np.cos(np.pi * s))
    x[-1] = p.path_length

    y = p.ml_amplitude * np.sin(np.pi * t / p.step_period)
    if p.ml_amplitude == 0:
        y = np.zeros(n)
    # pin exact zeros where the sinusoid crosses step boundaries
    y[np.isclose(tau, 0.0, atol=1e-12) | np.isclose(tau, p.step_period, atol=1e-12)] = 0.0
    return ReferencePath(rate, x, y)


def save_path(path: ReferencePath, filename) -> None:
    """Write ``# rate=`` / ``# duration=`` metadata then ``x,y`` rows."""
    lines = [f"# rate={path.rate!r}", f"# duration={path.duration!r}", "x,y"]
    lines += [f"{x!r},{y!r}" for x, y in zip(path._xs, path._ys)]
    Path(filename).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_path(filename) -> ReferencePath:
    """Read a path file written by :func:`save_path`.

    A ``# duration=`` header, when present, must agree with ``(N - 1) / rate``.
    """
    filename = Path(filename)
    if not filename.is_file():
        raise FileNotFoundError(f"no such file: {filename}")
    meta = {}
    xs, ys = [], []
    for lineno, raw in enumerate(filename.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, sep, value = line[1:].partition("=")
            if sep:
                try:
                    meta[key.strip()] = float(value)
                except ValueError:
                    raise SchemaError(f"bad metadata {line!r}", line=lineno, path=filename) from None
            continue
        if line.replace(" ", "") == "x,y":
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise SchemaError(f"expected 2 columns, got {len(parts)}", line=lineno, path=filename)
        try:
            x, y = float(parts[0]), float(parts[1])
        except ValueError:
            raise SchemaError("non-numeric field", line=lineno, path=filename) from None
        if not (math.isfinite(x) and math.isfinite(y)):
            raise SchemaError("non-finite point", line=lineno, path=filename)
        xs.append(x)
        ys.append(y)
    if "rate" not in meta:
        raise SchemaError("missing '# rate=<hz>' header", line=1, path=filename)
    rate = meta["rate"]
    if not rate > 0:
        raise SchemaError(f"rate must be positive, got {rate}", line=1, path=filename)
    if len(xs) < 2:
        raise SchemaError(f"a path needs at least 2 points, got {len(xs)}", path=filename)
    path = ReferencePath(rate, np.array(xs), np.array(ys))
    if "duration" in meta and not math.isclose(meta["duration"], path.duration, abs_tol=1e-9):
        raise SchemaError(
            f"header duration {meta['duration']} disagrees with {path.duration} from the samples",
            path=filename,
        )
    return path


def fixture_path(name: str = "slowwalk_3m.csv"):
    """Location of a reference path shipped with the package."""
    return resources.files("copguide") / "data" / name
