"""Plane wave on the torus, then a spiral after a local block.

Writes a few PGM frames to ./demo-frames so the patterns can be inspected.
"""
from pathlib import Path

import numpy as np

from fhnspiral import experiments as ex
from fhnspiral.front import MetricsObserver, classify_state, detect_front, front_velocity
from fhnspiral.grid import PERIODIC, BoundarySpec, SimConfig, break_wave, run
from fhnspiral.io import emit_frame

out = Path("demo-frames")
out.mkdir(exist_ok=True)
b = BoundarySpec(PERIODIC)
p = ex.PRESETS["fig2"]

g = ex.single_wave_state(p)
emit_frame(g.V, out / "plane.pgm")

# speed of the circulating plane wave
f0 = detect_front(g, b=b)
later = run(g, p.model, (), b, SimConfig(0.2, 100.0, 500)).grid
v = front_velocity(detect_front(later, b=b), f0)
print(f"plane-wave speed {np.nanmean(v):.4f} (spread {np.nanstd(v):.1e})")

# zero the left half of the wave at t = 7 and let it curl up
obs = MetricsObserver(0.5, b)
traj = run(g, p.model, (), b, SimConfig(0.2, 700.0, 50), observers=[obs],
           hooks=[(7.0, break_wave)])
hist = [r[0] for r in traj.records]
for m in hist[::5]:
    print(f"t={m.t:6.1f} coverage={m.coverage:.2f} planarity={m.planarity:6.2f} "
          f"multi-crossing columns={m.multi_fraction:.2f}")
print("state at t=700:", classify_state(hist, 20))
emit_frame(traj.grid.V, out / "spiral.pgm")
