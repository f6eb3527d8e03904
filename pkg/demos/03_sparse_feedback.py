"""Sparse point feedback on a broken wave (fig4 layout).

Pass a horizon as the first argument; the full figure uses 3200.
"""
import sys

from fhnspiral import experiments as ex

t_end = sys.argv[1] if len(sys.argv) > 1 else "800"
for name in ("fig4", "fig5"):
    rep = ex.run_preset(name, {"sim.t_end": t_end}, out_dir="demo-runs")
    print(f"{name}: {rep.final_classification}, {len(rep.events)} control events, "
          f"outputs in {rep.run_dir}")
    for e in rep.events[:5]:
        print(f"   t={e.t:7.1f} d={e.d:5.1f} d_set={e.d_set:6.1f} cbar={e.cbar:7.2f} "
              f"I per cell={e.current:+.4f}")

# a larger gain, outside the reference setting, for comparison
rep = ex.run_preset("fig4", {"sim.t_end": t_end, "controller.k": "0.05"}, out_dir="demo-runs")
print("fig4 with k=0.05:", rep.final_classification)
