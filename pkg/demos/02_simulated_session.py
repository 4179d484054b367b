# %% [markdown]
# A full simulated session: five conditions, three trials each, and the
# per-condition summary the metrics module produces.

# %%
from copguide.harness import SessionPlan, audit_commands, commands_per_axis, run_session
from copguide.simwalker import Condition, condition_preset

for cond in Condition:
    p = condition_preset(cond)
    print(f"{cond.value}: drift={p.drift_sigma} bias={p.bias_velocity} visual={p.visual_gain} "
          f"progression={p.progression_gain}")

# %%
artifact = run_session(SessionPlan(base_seed=7))
print(artifact.summary.to_csv())

# %%
# Only the belt conditions ever command the actuators, and every command
# matches what the decision rule asks for at its tick.
for r in artifact.records:
    counts = commands_per_axis(r)
    problems = audit_commands(r, artifact.plan.config)
    print(f"{r.condition.value} trial {r.trial_index}: {sum(counts.values())} commands, "
          f"audit problems: {len(problems)}")

# %%
# Medians across a few walkers reproduce the qualitative ordering
# VF/O < EF/O <= EF/B < NF/O < NF/B.
from copguide.metrics import Summary

rows = []
for seed in range(5):
    rows += run_session(SessionPlan(base_seed=seed)).summary.rows
for cond, ind in Summary(0.1, rows).medians().items():
    print(f"{cond.value}: RMSE x {100 * ind.rmse_x:5.1f} cm  y {100 * ind.rmse_y:5.1f} cm  "
          f"TAT x {ind.tat_x:5.1f} %  y {ind.tat_y:5.1f} %")
