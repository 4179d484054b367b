"""Anticipatory dead-band feedback engine and actuator command codec.

The engine compares the measured CoP at ``t`` with the reference at
``t + t_a`` and fires a repulsive cue on each axis whose error leaves the
dead zone ``[-th, th]``:

* x error > th, reference ahead of the walker: vibrate Back (move forward);
* x error < -th, reference behind: vibrate Front (move back);
* y error > th, reference to the walker's right: vibrate Left (move right);
* y error < -th, reference to the left: vibrate Right (move left).

Each cue is a fixed-length pulse; an axis with a pulse still running stays
silent until it expires.
"""
from __future__ import annotations

import enum
import math
import struct
from dataclasses import dataclass, replace

from .copstream import CoPSample
from .refpath import ReferencePath

SYNC = 0xA5
RESERVED = 0x01
FRAME_SIZE = 8
_FRAME = struct.Struct(">BBBBHB")
_EPS = 1e-9


class Axis(enum.Enum):
    AP = "ap"
    ML = "ml"


class Direction(enum.IntEnum):
    """Belt units. Values are the wire codes."""

    FRONT = 0
    BACK = 1
    LEFT = 2
    RIGHT = 3

    @property
    def axis(self) -> Axis:
        return Axis.AP if self in (Direction.FRONT, Direction.BACK) else Axis.ML

    @property
    def letter(self) -> str:
        return self.name[0]

    @classmethod
    def from_letter(cls, letter: str) -> "Direction":
        return {"F": cls.FRONT, "B": cls.BACK, "L": cls.LEFT, "R": cls.RIGHT}[letter.upper()]


@dataclass(frozen=True)
class FeedbackConfig:
    th_cop: float = 0.1
    t_a: float = 0.5
    pulse_duration: float = 0.4
    tick_rate: float = 100.0
    intensity: int = 128

    def __post_init__(self):
        if not self.th_cop > 0:
            raise ValueError("th_cop must be positive")
        if not self.t_a >= 0:
            raise ValueError("t_a must be non-negative")
        if not self.pulse_duration > 0:
            raise ValueError("pulse_duration must be positive")
        if not self.tick_rate > 0:
            raise ValueError("tick_rate must be positive")
        if not 0 <= self.intensity <= 255:
            raise ValueError("intensity must lie in 0..255")
        if not 0 < round(self.pulse_duration * 1000) <= 0xFFFF:
            raise ValueError("pulse_duration must be between 1 ms and 65.535 s")

    @property
    def pulse_ms(self) -> int:
        return int(round(self.pulse_duration * 1000))


@dataclass(frozen=True)
class ActuatorCommand:
    unit: Direction
    intensity: int
    duration_ms: int
    seq: int


@dataclass(frozen=True)
class EngineState:
    """Per-axis active pulse ``(unit, expiry time)`` plus loop bookkeeping."""

    ap_pulse: tuple[Direction, float] | None = None
    ml_pulse: tuple[Direction, float] | None = None
    last_tick: float = -math.inf
    next_seq: int = 1


def _measured_xy(measured: CoPSample):
    if not measured.valid:
        raise ValueError(f"CoP sample at t={measured.t} is invalid")
    return measured.x, measured.y


def anticipatory_error(
    path: ReferencePath, measured: CoPSample, config: FeedbackConfig
) -> tuple[float, float]:
    """Signed ``(ref(t + t_a) - measured(t))`` on both axes."""
    x, y = _measured_xy(measured)
    if config.t_a < 0:
        raise ValueError("anticipation interval must be non-negative")
    rx, ry = path.lookup(measured.t + config.t_a)
    return rx - x, ry - y


def real_error(path: ReferencePath, measured: CoPSample) -> tuple[float, float]:
    """Signed ``(ref(t) - measured(t))`` on both axes."""
    x, y = _measured_xy(measured)
    rx, ry = path.lookup(measured.t)
    return rx - x, ry - y


def decide(dx: float, dy: float, config: FeedbackConfig | float) -> tuple[Direction, ...]:
    """Units to fire for the given anticipatory errors, AP before ML.

    ``config`` may be a FeedbackConfig or a bare threshold in meters. The
    comparison is strict: an error of exactly ``th`` stays in the dead zone.
    """
    th = config.th_cop if isinstance(config, FeedbackConfig) else float(config)
    out = []
    if dx > th:
        out.append(Direction.BACK)
    elif dx < -th:
        out.append(Direction.FRONT)
    if dy > th:
        out.append(Direction.LEFT)
    elif dy < -th:
        out.append(Direction.RIGHT)
    return tuple(out)


def tick(
    state: EngineState, path: ReferencePath, measured: CoPSample, config: FeedbackConfig
) -> tuple[EngineState, list[ActuatorCommand]]:
    """Advance the engine by one sample.

    Returns the new state and the commands to send. Invalid samples emit
    nothing. Raises ValueError when ``measured.t`` does not advance.
    """
    t = measured.t
    if not t > state.last_tick:
        raise ValueError(f"non-monotonic timestamp {t} after {state.last_tick}")
    if not measured.valid:
        return replace(state, last_tick=t), []

    dx, dy = anticipatory_error(path, measured, config)
    ap, ml = state.ap_pulse, state.ml_pulse
    if ap is not None and t >= ap[1] - _EPS:
        ap = None
    if ml is not None and t >= ml[1] - _EPS:
        ml = None

    seq = state.next_seq
    commands = []
    for unit in decide(dx, dy, config):
        pulse = (unit, t + config.pulse_duration)
        if unit.axis is Axis.AP:
            if ap is not None:
                continue
            ap = pulse
        else:
            if ml is not None:
                continue
            ml = pulse
        commands.append(ActuatorCommand(unit, config.intensity, config.pulse_ms, seq))
        seq += 1
    return EngineState(ap, ml, t, seq), commands


class FeedbackEngine:
    """Stateful wrapper around :func:`tick` for one guidance session."""

    def __init__(self, path: ReferencePath, config: FeedbackConfig | None = None):
        self.path = path
        self.config = config or FeedbackConfig()
        self.state = EngineState()

    def step(self, measured: CoPSample) -> list[ActuatorCommand]:
        self.state, commands = tick(self.state, self.path, measured, self.config)
        return commands


def checksum(data: bytes) -> int:
    c = 0
    for b in data:
        c ^= b
    return c


def encode_command(cmd: ActuatorCommand) -> bytes:
    """Pack a command into its 8-byte frame.

    Layout (big-endian): sync 0xA5, unit code, reserved 0x01, intensity,
    duration in ms (u16), seq mod 256, XOR of the preceding seven bytes.
    """
    if not 0 < cmd.duration_ms <= 0xFFFF:
        raise ValueError(f"duration_ms {cmd.duration_ms} outside 1..65535")
    if not 0 <= cmd.intensity <= 255:
        raise ValueError(f"intensity {cmd.intensity} outside 0..255")
    if cmd.seq < 0:
        raise ValueError("seq must be non-negative")
    body = _FRAME.pack(SYNC, int(Direction(cmd.unit)), RESERVED, cmd.intensity, cmd.duration_ms, cmd.seq % 256)
    return body + bytes([checksum(body)])


def decode_command(frame: bytes) -> ActuatorCommand:
    """Inverse of :func:`encode_command`; ``seq`` comes back modulo 256."""
    if len(frame) != FRAME_SIZE:
        raise ValueError(f"frame must be {FRAME_SIZE} bytes, got {len(frame)}")
    sync, unit, reserved, intensity, duration, seq = _FRAME.unpack(frame[:7])
    if sync != SYNC:
        raise ValueError(f"bad sync byte 0x{sync:02X}")
    if reserved != RESERVED:
        raise ValueError(f"bad reserved byte 0x{reserved:02X}")
    if checksum(frame[:7]) != frame[7]:
        raise ValueError("checksum mismatch")
    if duration == 0:
        raise ValueError("zero duration")
    return ActuatorCommand(Direction(unit), intensity, duration, seq)
