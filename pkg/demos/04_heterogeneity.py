"""A temporary patch of raised threshold, with and without control."""
import sys

from fhnspiral import experiments as ex

t_end = sys.argv[1] if len(sys.argv) > 1 else "1000"
p = ex.get_preset("fig7")
print("patch:", p.patch)
for name in ("fig7", "fig8"):
    rep = ex.run_preset(name, {"sim.t_end": t_end}, out_dir="demo-runs")
    print(f"{name}: {rep.final_classification}, frames at {rep.frame_times}")

# the later window from the text never meets the circulating pulse
rep = ex.run_preset("fig7", {"sim.t_end": t_end, "patch.t_start": "200", "patch.duration": "200"})
print("patch over [200, 400]:", rep.final_classification)
