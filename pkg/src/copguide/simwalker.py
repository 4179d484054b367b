"""A parametric simulated walker standing in for human subjects.

The walker reproduces (a fraction of) the reference progression it has
learned, and on top of that accumulates Gaussian random-walk drift and a
constant veer. Depending on the condition it also corrects toward the
reference it can see (visual feedback) or reacts to belt cues after a
reaction latency, moving at a constant speed away from the vibrating side
for the length of the pulse.
"""
from __future__ import annotations

import enum
import hashlib
import math
from collections import deque
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Iterable, NamedTuple

import numpy as np

from .copstream import CoPSample
from .errors import SchemaError
from .feedback import ActuatorCommand, Axis, Direction
from .refpath import ReferencePath

_EPS = 1e-9
_NOISE_BLOCK = 4096


class Condition(enum.Enum):
    """The five test conditions: feedback modality crossed with eyes open/closed."""

    NF_O = "NF/O"
    NF_B = "NF/B"
    VF_O = "VF/O"
    EF_O = "EF/O"
    EF_B = "EF/B"

    @property
    def belt(self) -> bool:
        return self in (Condition.EF_O, Condition.EF_B)

    @property
    def visual(self) -> bool:
        return self is Condition.VF_O

    @property
    def eyes_closed(self) -> bool:
        return self in (Condition.NF_B, Condition.EF_B)

    @classmethod
    def parse(cls, text: str) -> "Condition":
        key = text.strip().upper().replace("/", "_").replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            raise ValueError(f"unknown condition {text!r}") from None


@dataclass(frozen=True)
class WalkerParams:
    reaction_latency: float = 0.25
    correction_speed: float = 0.2
    drift_sigma: float = 0.05
    bias_velocity: tuple[float, float] = (0.0, 0.0)
    visual_gain: float = 0.0
    rng_seed: int = 0
    # share of the learned reference progression reproduced without prompting
    progression_gain: float = 1.0

    def __post_init__(self):
        if self.reaction_latency < 0:
            raise ValueError("reaction_latency must be non-negative")
        if not self.correction_speed > 0:
            raise ValueError("correction_speed must be positive")
        if self.drift_sigma < 0:
            raise ValueError("drift_sigma must be non-negative")
        if not 0 <= self.visual_gain <= 1:
            raise ValueError("visual_gain must lie in [0, 1]")
        if not 0 <= self.progression_gain <= 1:
            raise ValueError("progression_gain must lie in [0, 1]")
        object.__setattr__(self, "bias_velocity", tuple(float(v) for v in self.bias_velocity))
        if len(self.bias_velocity) != 2:
            raise ValueError("bias_velocity needs two components")
        object.__setattr__(self, "rng_seed", int(self.rng_seed) & 0xFFFFFFFFFFFFFFFF)


# Eyes-closed walkers sway twice as much and veer forward and to the right.
_OPEN_DRIFT = 0.05
_CLOSED_DRIFT = 2 * _OPEN_DRIFT
_CLOSED_BIAS = (0.005, 0.005)
_VISUAL_GAIN = 0.5
# with the belt on, half of the learned progression is left to the cues
_BELT_PROGRESSION = 0.5


def condition_preset(condition: Condition, rng_seed: int = 0) -> WalkerParams:
    """Walker parameters for one test condition.

    Belt conditions share the drift of their no-feedback counterparts; the
    belt changes how the walker responds, not how much it wanders. Belt
    walkers wait for cues for part of their forward progression.
    """
    closed = condition.eyes_closed
    return WalkerParams(
        drift_sigma=_CLOSED_DRIFT if closed else _OPEN_DRIFT,
        bias_velocity=_CLOSED_BIAS if closed else (0.0, 0.0),
        visual_gain=_VISUAL_GAIN if condition.visual else 0.0,
        rng_seed=rng_seed,
        progression_gain=_BELT_PROGRESSION if condition.belt else 1.0,
    )


def derive_seed(base_seed: int, condition: Condition, trial_index: int) -> int:
    """Per-trial seed: ``base_seed`` XOR a 64-bit BLAKE2b digest of
    ``"<condition name>:<trial index>"``."""
    digest = hashlib.blake2b(f"{condition.name}:{trial_index}".encode(), digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(digest, "big")) & 0xFFFFFFFFFFFFFFFF


class Cue(NamedTuple):
    unit: Direction
    start: float
    end: float


class CueInbox:
    """Commands waiting out the walker's reaction latency, FIFO per axis."""

    def __init__(self, latency: float):
        self.latency = latency
        self._queues = {Axis.AP: deque(), Axis.ML: deque()}

    def __len__(self):
        return sum(len(q) for q in self._queues.values())

    def enqueue(self, command: ActuatorCommand, t: float) -> None:
        self._queues[command.unit.axis].append((t + self.latency, command))


def deliver_cues(inbox: CueInbox, t: float) -> list[Cue]:
    """Pop every queued cue whose delivery time has come, in enqueue order."""
    out = []
    for queue in inbox._queues.values():
        while queue and queue[0][0] <= t + _EPS:
            at, cmd = queue.popleft()
            out.append(Cue(cmd.unit, at, at + cmd.duration_ms / 1000.0))
    return out


@dataclass
class WalkerState:
    params: WalkerParams
    x: float = 0.0
    y: float = 0.0
    active: list = None
    rng: np.random.Generator = None
    _noise: list = None
    _k: int = 0

    def __post_init__(self):
        if self.active is None:
            self.active = []
        if self.rng is None:
            self.rng = np.random.default_rng(self.params.rng_seed)

    @classmethod
    def start(cls, params: WalkerParams, path: ReferencePath) -> "WalkerState":
        x, y = path.lookup(0.0)
        return cls(params, x, y)

    def normals(self) -> tuple[float, float]:
        # standard normals drawn in blocks; the sequence is independent of block size
        if self._noise is None or self._k >= len(self._noise):
            self._noise = self.rng.standard_normal(2 * _NOISE_BLOCK).tolist()
            self._k = 0
        k = self._k
        self._k = k + 2
        return self._noise[k], self._noise[k + 1]


_CUE_SIGN = {
    Direction.BACK: (1.0, 0.0),
    Direction.FRONT: (-1.0, 0.0),
    Direction.LEFT: (0.0, 1.0),
    Direction.RIGHT: (0.0, -1.0),
}


def walker_step(
    state: WalkerState, path: ReferencePath, t: float, dt: float, cues: Iterable[Cue] = ()
) -> CoPSample:
    """Move the walker from ``t`` to ``t + dt`` and return its CoP there.

    The displacement is the sum of ``progression_gain`` times the reference
    progression over the step,
    Gaussian drift with std ``drift_sigma * sqrt(dt)``, ``bias_velocity * dt``,
    a visual pull ``visual_gain * (ref(t) - pos)`` capped at
    ``correction_speed * dt``, and ``correction_speed * dt`` away from each
    vibrating side while a delivered cue is running.
    """
    p = state.params
    state.active.extend(cues)

    rx0, ry0 = path.lookup(t)
    rx1, ry1 = path.lookup(t + dt)
    g = p.progression_gain
    dx = g * (rx1 - rx0)
    dy = g * (ry1 - ry0)

    if p.drift_sigma > 0:
        nx, ny = state.normals()
        scale = p.drift_sigma * math.sqrt(dt)
        dx += scale * nx
        dy += scale * ny

    bx, by = p.bias_velocity
    dx += bx * dt
    dy += by * dt

    step_cap = p.correction_speed * dt
    if p.visual_gain > 0:
        dx += min(max(p.visual_gain * (rx0 - state.x), -step_cap), step_cap)
        dy += min(max(p.visual_gain * (ry0 - state.y), -step_cap), step_cap)

    if state.active:
        still = []
        for cue in state.active:
            if t >= cue.end - _EPS:
                continue
            still.append(cue)
            if cue.start - _EPS <= t:
                sx, sy = _CUE_SIGN[cue.unit]
                dx += sx * step_cap
                dy += sy * step_cap
        state.active = still

    state.x += dx
    state.y += dy
    return CoPSample(t + dt, state.x, state.y, True)


def save_walker_params(params: WalkerParams, filename) -> None:
    """Write params as ``key=value`` lines; ``bias_velocity`` is ``vx,vy``."""
    lines = []
    for key, value in asdict(params).items():
        if key == "bias_velocity":
            value = f"{value[0]!r},{value[1]!r}"
        lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    Path(filename).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_walker_overrides(items: Iterable[tuple[str, str]], where=None) -> dict:
    """Convert ``(key, text)`` pairs into typed WalkerParams keyword arguments."""
    known = {f.name for f in fields(WalkerParams)}
    out = {}
    for key, text in items:
        key = key.strip()
        if key not in known:
            raise SchemaError(f"unknown walker key {key!r}", path=where)
        try:
            if key == "bias_velocity":
                vx, vy = (float(v) for v in text.split(","))
                out[key] = (vx, vy)
            elif key == "rng_seed":
                out[key] = int(text)
            else:
                out[key] = float(text)
        except ValueError:
            raise SchemaError(f"bad value for {key}: {text!r}", path=where) from None
    return out


def load_walker_params(filename, base: WalkerParams | None = None) -> WalkerParams:
    """Read a ``key=value`` walker file; missing keys keep ``base`` values."""
    filename = Path(filename)
    items = []
    for lineno, raw in enumerate(filename.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise SchemaError(f"expected key=value, got {raw!r}", line=lineno, path=filename)
        items.append((key, value.strip()))
    try:
        return replace(base or WalkerParams(), **parse_walker_overrides(items, filename))
    except ValueError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError(str(exc), path=filename) from None
