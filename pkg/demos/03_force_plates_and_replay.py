# %% [markdown]
# From raw plate forces to belt commands: fuse a synthetic recording from
# a row of plates, resample it and replay the engine over it.

# %%
import numpy as np

from copguide.copstream import PlateFrame, fuse_recording, resample_uniform
from copguide.harness import replay
from copguide.metrics import indicators
from copguide.refpath import GaitParams, generate_gait_path

path = generate_gait_path(GaitParams(path_length=1.2))
# four 0.6 m plates in a row, the first one behind the start line
layout = {i + 1: (round(-0.6 + 0.6 * i, 9), 0.0) for i in range(4)}
print("plate origins:", layout)

# %%
# Synthesise plate frames for a walker lagging 0.15 m behind the path,
# recorded at 250 Hz. Each plate reports the share of the load it carries.
rate = 250.0
t = np.arange(0, path.duration + 0.5, 1 / rate)
xs, ys = path.lookup_many(t)
xs = xs - 0.15
frames = []
for ti, x, y in zip(t.tolist(), xs.tolist(), ys.tolist()):
    for pid, (ox, oy) in layout.items():
        inside = ox <= x < ox + 0.6
        frames.append(PlateFrame(pid, ti, 700.0 if inside else 0.0, x - ox if inside else 0.0,
                                 y - oy if inside else 0.0, ox, oy))
samples = fuse_recording(frames)
print(f"{len(samples)} fused samples, {sum(not s.valid for s in samples)} without contact")

# %%
# The engine runs on the path's 100 Hz grid; the recording is resampled to it.
grid = resample_uniform(samples, path.rate)
record = replay(grid, path)
units = sorted({c.unit.name for _, c in record.commands})
ind = indicators(record)
print(f"{len(record.commands)} commands ({', '.join(units)}), "
      f"TAT x {ind.tat_x:.1f} %, RMSE x {100 * ind.rmse_x:.1f} cm")
