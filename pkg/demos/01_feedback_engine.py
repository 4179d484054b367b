# %% [markdown]
# The feedback engine on its own: anticipatory error, the dead zone and
# the pulse train a sustained error produces.

# %%
import numpy as np

from copguide.copstream import CoPSample
from copguide.feedback import FeedbackConfig, FeedbackEngine, anticipatory_error, decide, encode_command
from copguide.refpath import GaitParams, generate_gait_path

path = generate_gait_path(GaitParams(path_length=1.2))
config = FeedbackConfig()
print(f"path: {len(path.x)} samples over {path.duration:g} s, ends at x={path.x[-1]:.2f} m")

# %%
# The error compares where the walker is now with where the path will be
# t_a seconds later. Standing still at the start leaves the walker behind.
still = CoPSample(1.0, 0.0, 0.0)
dx, dy = anticipatory_error(path, still, config)
print(f"standing still at t=1: dx={dx:+.3f} m dy={dy:+.3f} m -> {[d.name for d in decide(dx, dy, config)]}")

# %%
# Hold the walker 0.15 m behind the anticipated reference for one second.
engine = FeedbackEngine(path, config)
for i in range(101):
    t = i / 100
    rx, ry = path.lookup(t + config.t_a)
    for cmd in engine.step(CoPSample(t, rx - 0.15, ry)):
        print(f"t={t:.2f}  {cmd.unit.name:5s} seq={cmd.seq}  frame={encode_command(cmd).hex(' ')}")

# %%
# Inside the dead zone nothing is sent, whatever the direction.
engine = FeedbackEngine(path, config)
rng = np.random.default_rng(0)
sent = 0
for i in range(500):
    t = i / 100
    rx, ry = path.lookup(t + config.t_a)
    ex, ey = rng.uniform(-0.09, 0.09, 2)
    sent += len(engine.step(CoPSample(t, rx - ex, ry - ey)))
print("commands inside the dead zone:", sent)
