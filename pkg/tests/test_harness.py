import numpy as np
import pytest

from copguide.copstream import CoPSample, write_cop_csv
from copguide.errors import SchemaError
from copguide.feedback import Axis, Direction, FeedbackConfig, decode_command
from copguide.harness import (
    DEFAULT_ORDER,
    SessionPlan,
    audit_commands,
    commands_per_axis,
    engine_trace,
    format_plan,
    format_record,
    load_plan,
    load_records,
    parse_conditions,
    read_record,
    replay,
    run_session,
    run_trial,
)
from copguide.metrics import indicators, rmse, tat
from copguide.refpath import GaitParams, generate_gait_path, save_path
from copguide.simwalker import Condition

from conftest import linear_path

SHORT = GaitParams(path_length=0.9)


def short_plan(**kwargs):
    kwargs.setdefault("gait", SHORT)
    return SessionPlan(**kwargs)


def test_default_plan():
    plan = SessionPlan()
    assert plan.conditions == [(c, 3) for c in DEFAULT_ORDER]
    assert [c.value for c in DEFAULT_ORDER] == ["NF/O", "NF/B", "VF/O", "EF/O", "EF/B"]
    assert plan.label == "seed0"
    with pytest.raises(ValueError):
        SessionPlan(conditions=[(Condition.NF_O, 0)])


def test_visual_identity_trial():
    plan = short_plan(
        conditions=[(Condition.VF_O, 1)],
        walker_overrides={"visual_gain": 1.0, "drift_sigma": 0.0},
    )
    r = run_trial(plan, Condition.VF_O, 0)
    assert rmse(r, "x") < 1e-12 and rmse(r, "y") < 1e-12
    assert r.commands == []


def test_trial_covers_path_duration():
    plan = short_plan()
    r = run_trial(plan, Condition.EF_O, 0)
    assert len(r.measured) == len(plan.reference())
    assert r.measured[-1].t == pytest.approx(plan.reference().duration)


def test_engine_gating():
    plan = short_plan(base_seed=3)
    assert run_trial(plan, Condition.EF_O, 0).commands
    for cond in (Condition.NF_O, Condition.NF_B, Condition.VF_O):
        assert run_trial(plan, cond, 0).commands == []


def test_commands_pass_audit():
    plan = SessionPlan(base_seed=5)
    for cond in (Condition.EF_O, Condition.EF_B):
        r = run_trial(plan, cond, 1)
        assert r.commands
        assert audit_commands(r, plan.config) == []
        seqs = [c.seq for _, c in r.commands]
        assert seqs == list(range(1, len(seqs) + 1))
        counts = commands_per_axis(r)
        assert counts[Axis.AP] + counts[Axis.ML] == len(seqs)


def test_audit_flags_forged_command():
    plan = short_plan(base_seed=3)
    r = run_trial(plan, Condition.NF_O, 0)
    from copguide.feedback import ActuatorCommand

    r.commands.append((0.0, ActuatorCommand(Direction.FRONT, 128, 400, 1)))
    assert len(audit_commands(r, plan.config)) == 1


def test_session_sizes_and_determinism():
    plan = short_plan(base_seed=42)
    a, b = run_session(plan), run_session(plan)
    assert len(a.records) == 15
    assert a.files() == b.files()
    one = run_session(short_plan(conditions=[(Condition.EF_B, 1)]))
    assert len(one.records) == 1 and len(one.summary.rows) == 1


def test_different_seeds_differ_with_same_schema():
    a = run_session(short_plan(base_seed=1, conditions=[(Condition.NF_O, 1)]))
    b = run_session(short_plan(base_seed=2, conditions=[(Condition.NF_O, 1)]))
    xa = [s.x for s in a.records[0].measured]
    xb = [s.x for s in b.records[0].measured]
    assert xa != xb
    assert a.summary.to_csv().splitlines()[0] == b.summary.to_csv().splitlines()[0]


def test_artifact_files(tmp_path):
    art = run_session(short_plan(conditions=[(Condition.EF_O, 2)]))
    art.write(tmp_path)
    names = sorted(p.relative_to(tmp_path).as_posix() for p in tmp_path.rglob("*") if p.is_file())
    assert names == [
        "commands/EF_O_0.bin", "commands/EF_O_1.bin", "plan.ini",
        "records/EF_O_0.csv", "records/EF_O_1.csv", "summary.csv", "summary.json",
    ]
    blob = (tmp_path / "commands/EF_O_0.bin").read_bytes()
    assert len(blob) == 8 * len(art.records[0].commands)
    decoded = [decode_command(blob[i : i + 8]) for i in range(0, len(blob), 8)]
    assert [c.unit for c in decoded] == [c.unit for _, c in art.records[0].commands]


def test_record_round_trip(tmp_path):
    plan = short_plan(base_seed=9)
    r = run_trial(plan, Condition.EF_B, 2)
    f = tmp_path / "r.csv"
    f.write_text(format_record(r, plan.config))
    back, meta = read_record(f)
    assert meta["th_cop"] == "0.1"
    assert back.condition is Condition.EF_B and back.trial_index == 2 and back.seed == r.seed
    assert [(t, c) for t, c in back.commands] == [(t, c) for t, c in r.commands]
    assert indicators(back) == indicators(r)
    records, th = load_records(tmp_path)
    assert len(records) == 1 and th == 0.1


def test_engine_trace_real_error_column():
    plan = short_plan()
    r = run_trial(plan, Condition.NF_O, 0)
    trace = engine_trace(r, plan.config)
    ex, ey, _ = r.real_errors()
    assert np.array_equal(trace["dxr"], ex) and np.array_equal(trace["dyr"], ey)


def test_read_record_errors(tmp_path):
    f = tmp_path / "r.csv"
    f.write_text("# rate=100\nt,x\n")
    with pytest.raises(SchemaError):
        read_record(f)


def shifted_recording(path, dx, extra=0.0):
    n = len(path) + int(extra * path.rate)
    out = []
    for i in range(n):
        t = 3.0 + i / path.rate
        x, y = path.lookup(i / path.rate)
        out.append(CoPSample(t, x - dx, y))
    return out


def test_replay_on_reference():
    # lookahead displacement stays inside the dead zone on this slow path
    path = linear_path(slope=0.1, duration=10.0, y_slope=0.05)
    r = replay(shifted_recording(path, 0.0, extra=1.0), path)
    assert r.commands == []
    assert rmse(r, "x") == pytest.approx(0.0, abs=1e-12)
    assert rmse(r, "y") == pytest.approx(0.0, abs=1e-12)


def test_replay_on_gait_reference_cues_ahead():
    # on the default gait the swing phase outruns th within t_a, so an
    # on-reference walker is still told to move forward, never backward
    path = generate_gait_path()
    r = replay(shifted_recording(path, 0.0), path)
    assert {c.unit for _, c in r.commands} == {Direction.BACK}
    assert rmse(r, "x") == pytest.approx(0.0, abs=1e-12)


def test_replay_constant_lag(tmp_path):
    path = generate_gait_path()
    f = tmp_path / "cop.csv"
    write_cop_csv(f, shifted_recording(path, 0.15))
    r = replay(f, path, FeedbackConfig(th_cop=0.1))
    assert {c.unit for _, c in r.commands} == {Direction.BACK}
    assert len(r.commands) == int(path.duration / 0.4 + 1e-9) + 1
    assert tat(r, "x", 0.1) == 100.0
    assert tat(r, "y", 0.1) == 0.0


def test_replay_truncated():
    path = generate_gait_path()
    with pytest.raises(SchemaError, match="shorter"):
        replay(shifted_recording(path, 0.0)[:-50], path)


def test_plan_file_round_trip(tmp_path):
    f = tmp_path / "p.ini"
    f.write_text(
        "[plan]\nbase_seed = 7\nconditions = NF/O:2, EF/B\n\n"
        "[feedback]\nth_cop = 0.08\nt_a = 0.4\n\n"
        "[path]\npath_length = 1.5  # short\n\n"
        "[walker]\nreaction_latency = 0.3\nbias_velocity = 0.01,0.0\n"
    )
    plan = load_plan(f)
    assert plan.base_seed == 7
    assert plan.conditions == [(Condition.NF_O, 2), (Condition.EF_B, 3)]
    assert plan.config.th_cop == 0.08 and plan.config.t_a == 0.4
    assert plan.gait.path_length == 1.5
    assert plan.walker_params(Condition.EF_B, 1).reaction_latency == 0.3
    g = tmp_path / "again.ini"
    g.write_text(format_plan(plan))
    again = load_plan(g)
    assert format_plan(again) == format_plan(plan)
    assert again.walker_overrides == plan.walker_overrides


def test_plan_path_file(tmp_path):
    path = generate_gait_path(SHORT, 50.0)
    save_path(path, tmp_path / "ref.csv")
    (tmp_path / "p.ini").write_text("[path]\nfile = ref.csv\n")
    plan = load_plan(tmp_path / "p.ini")
    ref = plan.reference()
    assert ref.rate == plan.config.tick_rate
    assert ref.duration == pytest.approx(path.duration)


@pytest.mark.parametrize(
    "text",
    ["[bogus]\nx = 1\n", "[plan]\nseed = 1\n", "[feedback]\nth_cop = -1\n",
     "[walker]\nspeed = 2\n", "[plan]\nconditions = XX/O:1\n", "[path]\nstep_length = abc\n"],
)
def test_plan_errors(tmp_path, text):
    f = tmp_path / "p.ini"
    f.write_text(text)
    with pytest.raises(SchemaError):
        load_plan(f)


def test_plan_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_plan(tmp_path / "nope.ini")
    assert load_plan("default").conditions == SessionPlan().conditions


def test_parse_conditions():
    assert parse_conditions("VF/O:1") == [(Condition.VF_O, 1)]
    with pytest.raises(ValueError):
        parse_conditions(" , ")
