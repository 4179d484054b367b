"""Experiment runner: seeded simulated sessions, replay of recorded CoP
and the on-disk formats for plans, trial records and run artifacts."""
from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .copstream import CoPSample, read_cop_csv, resample_uniform
from .errors import SchemaError
from .feedback import (
    ActuatorCommand,
    Axis,
    Direction,
    FeedbackConfig,
    FeedbackEngine,
    decide,
    encode_command,
)
from .metrics import TrialRecord, summarize, Summary
from .refpath import GaitParams, ReferencePath, generate_gait_path, load_path
from .simwalker import (
    Condition,
    CueInbox,
    WalkerState,
    condition_preset,
    deliver_cues,
    derive_seed,
    parse_walker_overrides,
    walker_step,
)

DEFAULT_ORDER = (Condition.NF_O, Condition.NF_B, Condition.VF_O, Condition.EF_O, Condition.EF_B)
RECORD_HEADER = ("t", "ref_x", "ref_y", "x", "y", "valid", "dxa", "dya", "dxr", "dyr", "commands")


@dataclass
class SessionPlan:
    """Which conditions to run, how often, and with what engine, walker and path.

    ``walker_overrides`` are applied on top of every condition preset.
    ``path_file`` wins over ``gait`` when set.
    """

    conditions: list[tuple[Condition, int]] = field(
        default_factory=lambda: [(c, 3) for c in DEFAULT_ORDER]
    )
    config: FeedbackConfig = field(default_factory=FeedbackConfig)
    walker_overrides: dict = field(default_factory=dict)
    gait: GaitParams = field(default_factory=GaitParams)
    path_file: Path | None = None
    base_seed: int = 0
    walker_label: str | None = None

    def __post_init__(self):
        for cond, n in self.conditions:
            if n < 1:
                raise ValueError(f"{cond.value}: n_trials must be at least 1")
        self._path = None

    @property
    def label(self) -> str:
        return self.walker_label or f"seed{self.base_seed}"

    def reference(self) -> ReferencePath:
        """Reference path on the engine's tick grid."""
        if self._path is None:
            rate = self.config.tick_rate
            if self.path_file is not None:
                path = load_path(self.path_file).resampled(rate)
            else:
                path = generate_gait_path(self.gait, rate)
            self._path = path
        return self._path

    def walker_params(self, condition: Condition, seed: int):
        return replace(condition_preset(condition, seed), **self.walker_overrides)

    def with_seed(self, base_seed: int) -> "SessionPlan":
        plan = replace(self, base_seed=base_seed)
        plan._path = self._path
        return plan


def run_trial(plan: SessionPlan, condition: Condition, trial_index: int) -> TrialRecord:
    """Simulate one trial: walker and engine stepped on the shared tick grid.

    The belt engine runs only in belt conditions; the visual condition
    corrects through the walker's visual gain. The trial covers exactly the
    reference duration.
    """
    path = plan.reference()
    config = plan.config
    rate = path.rate
    dt = 1.0 / rate
    seed = derive_seed(plan.base_seed, condition, trial_index)
    params = plan.walker_params(condition, seed)
    state = WalkerState.start(params, path)
    inbox = CueInbox(params.reaction_latency)
    engine = FeedbackEngine(path, config) if condition.belt else None

    n = len(path)
    measured = []
    log = []
    for i in range(n):
        t = i / rate
        sample = CoPSample(t, state.x, state.y, True)
        measured.append(sample)
        if engine is not None:
            for cmd in engine.step(sample):
                log.append((t, cmd))
                inbox.enqueue(cmd, t)
        if i < n - 1:
            walker_step(state, path, t, dt, deliver_cues(inbox, t))
    return TrialRecord(path, measured, log, condition, trial_index, seed, plan.label)


@dataclass
class RunArtifact:
    plan: SessionPlan
    records: list[TrialRecord]
    summary: Summary

    def files(self) -> dict[str, bytes]:
        """Every output file keyed by relative path."""
        out = {}
        for r in self.records:
            stem = f"{r.condition.name}_{r.trial_index}"
            out[f"records/{stem}.csv"] = format_record(r, self.plan.config).encode()
            out[f"commands/{stem}.bin"] = b"".join(encode_command(c) for _, c in r.commands)
        out["summary.csv"] = self.summary.to_csv().encode()
        out["summary.json"] = self.summary.to_json().encode()
        out["plan.ini"] = format_plan(self.plan).encode()
        return out

    def write(self, out_dir) -> None:
        out_dir = Path(out_dir)
        for rel, data in self.files().items():
            target = out_dir / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(data)


def run_session(plan: SessionPlan | None = None) -> RunArtifact:
    """Run every (condition, trial) pair of the plan and summarise."""
    plan = plan or SessionPlan()
    records = [
        run_trial(plan, cond, k) for cond, n_trials in plan.conditions for k in range(n_trials)
    ]
    return RunArtifact(plan, records, summarize(records, plan.config.th_cop))


def engine_trace(record: TrialRecord, config: FeedbackConfig) -> dict[str, np.ndarray]:
    """Per-tick anticipatory and real errors of a record (NaN where invalid)."""
    path = record.reference
    t = path.times
    ax, ay = path.lookup_many(t + config.t_a)
    x = np.array([s.x for s in record.measured])
    y = np.array([s.y for s in record.measured])
    valid = np.array([s.valid for s in record.measured])
    trace = {
        "dxa": ax - x,
        "dya": ay - y,
        "dxr": path.x - x,
        "dyr": path.y - y,
    }
    for v in trace.values():
        v[~valid] = np.nan
    trace["t"] = t
    return trace


def audit_commands(record: TrialRecord, config: FeedbackConfig) -> list[str]:
    """Check that every logged command is what the decision rule asks for.

    Returns a list of human-readable violations; empty when the log is
    consistent with the anticipatory errors recomputed from the record.
    """
    problems = []
    rate = record.reference.rate
    for t, cmd in record.commands:
        i = int(round(t * rate))
        sample = record.measured[i]
        if not sample.valid:
            problems.append(f"t={t}: command on an invalid sample")
            continue
        ax, ay = record.reference.lookup(sample.t + config.t_a)
        if cmd.unit not in decide(ax - sample.x, ay - sample.y, config):
            problems.append(f"t={t}: {cmd.unit.name} not requested by the error")
    return problems


def replay(
    samples: Sequence[CoPSample] | str | Path,
    path: ReferencePath,
    config: FeedbackConfig | None = None,
    condition: Condition = Condition.EF_O,
) -> TrialRecord:
    """Run the engine over a recorded CoP stream.

    The recording's first timestamp is taken as the start of the reference
    path. It is resampled to the path rate and must last at least as long
    as the path.
    """
    config = config or FeedbackConfig()
    if isinstance(samples, (str, Path)):
        samples = read_cop_csv(samples)
    if len(samples) < 2:
        raise SchemaError("recording needs at least 2 samples")
    t0 = samples[0].t
    shifted = [CoPSample(s.t - t0, s.x, s.y, s.valid) for s in samples]
    span = shifted[-1].t
    if span < path.duration - 1e-9:
        raise SchemaError(
            f"recording lasts {span:.3f} s, shorter than the {path.duration:.3f} s reference"
        )
    grid = resample_uniform(shifted, path.rate)
    n = len(path)
    measured = [CoPSample(k / path.rate, s.x, s.y, s.valid) for k, s in enumerate(grid[:n])]
    engine = FeedbackEngine(path, config)
    log = []
    for s in measured:
        log.extend((s.t, c) for c in engine.step(s))
    return TrialRecord(path, measured, log, condition, 0, 0, "replay")


# -- trial record files --------------------------------------------------------


def _format_commands(cmds: Sequence[ActuatorCommand]) -> str:
    return "|".join(f"{c.unit.letter}:{c.seq}:{c.intensity}:{c.duration_ms}" for c in cmds)


def _parse_commands(text: str, line, where) -> list[ActuatorCommand]:
    out = []
    for item in filter(None, text.split("|")):
        try:
            letter, seq, intensity, ms = item.split(":")
            out.append(ActuatorCommand(Direction.from_letter(letter), int(intensity), int(ms), int(seq)))
        except (ValueError, KeyError):
            raise SchemaError(f"bad command entry {item!r}", line=line, path=where) from None
    return out


def format_record(record: TrialRecord, config: FeedbackConfig) -> str:
    """Trial record as CSV with ``# key=value`` metadata lines."""
    trace = engine_trace(record, config)
    by_tick: dict[int, list[ActuatorCommand]] = {}
    rate = record.reference.rate
    for t, cmd in record.commands:
        by_tick.setdefault(int(round(t * rate)), []).append(cmd)
    lines = [
        f"# condition={record.condition.value}",
        f"# trial_index={record.trial_index}",
        f"# seed={record.seed}",
        f"# walker={record.walker}",
        f"# rate={rate!r}",
        f"# th_cop={config.th_cop!r}",
        f"# t_a={config.t_a!r}",
        ",".join(RECORD_HEADER),
    ]

    def num(v):
        return "" if math.isnan(v) else repr(v)

    cols = [trace[k].tolist() for k in ("dxa", "dya", "dxr", "dyr")]
    for i, s in enumerate(record.measured):
        rx, ry = record.reference._xs[i], record.reference._ys[i]
        lines.append(
            ",".join(
                [repr(s.t), repr(rx), repr(ry), repr(s.x), repr(s.y), str(int(s.valid))]
                + [num(c[i]) for c in cols]
                + [_format_commands(by_tick.get(i, []))]
            )
        )
    return "\n".join(lines) + "\n"


def read_record(filename) -> tuple[TrialRecord, dict]:
    """Load a trial record file; returns the record and its metadata."""
    filename = Path(filename)
    meta: dict[str, str] = {}
    rows = []
    header_seen = False
    for lineno, raw in enumerate(filename.read_text(encoding="utf-8").splitlines(), start=1):
        if not raw.strip():
            continue
        if raw.startswith("#"):
            key, _, value = raw[1:].partition("=")
            meta[key.strip()] = value.strip()
            continue
        parts = raw.split(",")
        if not header_seen:
            if tuple(parts) != RECORD_HEADER:
                raise SchemaError("bad record header", line=lineno, path=filename)
            header_seen = True
            continue
        if len(parts) != len(RECORD_HEADER):
            raise SchemaError(
                f"expected {len(RECORD_HEADER)} columns, got {len(parts)}", line=lineno, path=filename
            )
        try:
            t, rx, ry, x, y = (float(v) for v in parts[:5])
            valid = parts[5] == "1"
        except ValueError:
            raise SchemaError("non-numeric field", line=lineno, path=filename) from None
        rows.append((t, rx, ry, x, y, valid, _parse_commands(parts[10], lineno, filename)))
    for key in ("condition", "rate"):
        if key not in meta:
            raise SchemaError(f"missing '# {key}=' metadata", path=filename)
    if len(rows) < 2:
        raise SchemaError("record needs at least 2 samples", path=filename)
    try:
        rate = float(meta["rate"])
        condition = Condition.parse(meta["condition"])
    except ValueError as exc:
        raise SchemaError(str(exc), path=filename) from None
    ref = ReferencePath(rate, np.array([r[1] for r in rows]), np.array([r[2] for r in rows]))
    measured = [CoPSample(r[0], r[3], r[4], r[5]) for r in rows]
    commands = [(r[0], c) for r in rows for c in r[6]]
    record = TrialRecord(
        ref,
        measured,
        commands,
        condition,
        int(meta.get("trial_index", 0)),
        int(meta.get("seed", 0)),
        meta.get("walker", ""),
    )
    return record, meta


def load_records(directory) -> tuple[list[TrialRecord], float | None]:
    """All trial records under ``directory`` (searched recursively, sorted by path).

    Also returns the ``th_cop`` the records were produced with, if they agree.
    """
    files = sorted(Path(directory).rglob("*.csv"))
    records, ths = [], set()
    for f in files:
        with f.open(encoding="utf-8") as fh:
            if not fh.readline().startswith("# condition="):
                continue
        record, meta = read_record(f)
        records.append(record)
        if "th_cop" in meta:
            ths.add(float(meta["th_cop"]))
    return records, (ths.pop() if len(ths) == 1 else None)


# -- plan files ----------------------------------------------------------------

_FEEDBACK_KEYS = {f.name for f in fields(FeedbackConfig)}
_GAIT_KEYS = {f.name for f in fields(GaitParams)}


def parse_conditions(text: str) -> list[tuple[Condition, int]]:
    """``"NF/O:3, EF/O:2"`` -> ``[(NF_O, 3), (EF_O, 2)]``; a bare label means 3 trials."""
    out = []
    for item in filter(None, (s.strip() for s in text.split(","))):
        label, _, n = item.partition(":")
        out.append((Condition.parse(label), int(n) if n else 3))
    if not out:
        raise ValueError("no conditions listed")
    return out


def load_plan(source) -> SessionPlan:
    """Read an INI-style plan file, or return the default plan for ``"default"``.

    Sections (all optional)::

        [plan]      base_seed, conditions (e.g. "NF/O:3, EF/O:3"), walker_label
        [feedback]  th_cop, t_a, pulse_duration, tick_rate, intensity
        [path]      file, or step_length, step_period, ml_amplitude,
                    path_length, double_support_fraction
        [walker]    any WalkerParams field; applied to every condition preset
    """
    if str(source) == "default":
        return SessionPlan()
    source = Path(source)
    if not source.is_file():
        raise FileNotFoundError(f"no such plan file: {source}")
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read(source, encoding="utf-8")
    except configparser.Error as exc:
        raise SchemaError(str(exc), path=source) from None
    unknown = set(cp.sections()) - {"plan", "feedback", "path", "walker"}
    if unknown:
        raise SchemaError(f"unknown section(s) {sorted(unknown)}", path=source)
    try:
        kwargs = {}
        if cp.has_section("plan"):
            sec = cp["plan"]
            for key in sec:
                if key not in ("base_seed", "conditions", "walker_label"):
                    raise SchemaError(f"unknown key [plan] {key}", path=source)
            if "base_seed" in sec:
                kwargs["base_seed"] = int(sec["base_seed"])
            if "conditions" in sec:
                kwargs["conditions"] = parse_conditions(sec["conditions"])
            if "walker_label" in sec:
                kwargs["walker_label"] = sec["walker_label"]
        if cp.has_section("feedback"):
            sec = cp["feedback"]
            cfg = {}
            for key, value in sec.items():
                if key not in _FEEDBACK_KEYS:
                    raise SchemaError(f"unknown key [feedback] {key}", path=source)
                cfg[key] = int(value) if key == "intensity" else float(value)
            kwargs["config"] = FeedbackConfig(**cfg)
        if cp.has_section("path"):
            sec = dict(cp["path"])
            if "file" in sec:
                f = Path(sec.pop("file"))
                kwargs["path_file"] = f if f.is_absolute() else source.parent / f
            for key in sec:
                if key not in _GAIT_KEYS:
                    raise SchemaError(f"unknown key [path] {key}", path=source)
            if sec:
                kwargs["gait"] = GaitParams(**{k: float(v) for k, v in sec.items()})
        if cp.has_section("walker"):
            kwargs["walker_overrides"] = parse_walker_overrides(cp["walker"].items(), source)
        return SessionPlan(**kwargs)
    except SchemaError:
        raise
    except ValueError as exc:
        raise SchemaError(str(exc), path=source) from None


def format_plan(plan: SessionPlan) -> str:
    """The effective plan in the same format :func:`load_plan` reads."""
    cfg = plan.config
    lines = [
        "[plan]",
        f"base_seed = {plan.base_seed}",
        "conditions = " + ", ".join(f"{c.value}:{n}" for c, n in plan.conditions),
        f"walker_label = {plan.label}",
        "",
        "[feedback]",
    ]
    lines += [f"{f.name} = {getattr(cfg, f.name)!r}" for f in fields(cfg)]
    lines += ["", "[path]"]
    if plan.path_file is not None:
        lines.append(f"file = {plan.path_file}")
    else:
        lines += [f"{f.name} = {getattr(plan.gait, f.name)!r}" for f in fields(plan.gait)]
    if plan.walker_overrides:
        lines += ["", "[walker]"]
        for key, value in plan.walker_overrides.items():
            if key == "bias_velocity":
                value = f"{value[0]!r},{value[1]!r}"
            lines.append(f"{key} = {value}")
    return "\n".join(lines) + "\n"


def commands_per_axis(record: TrialRecord) -> dict[Axis, int]:
    counts = {Axis.AP: 0, Axis.ML: 0}
    for _, c in record.commands:
        counts[c.unit.axis] += 1
    return counts
