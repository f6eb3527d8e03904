"""Front kinetics and the linear stability picture behind the controller.

Walks from the cubic kinetics to the transverse growth constant chi, then to
the open-loop modes and the gain needed for stabilisation.
"""
import numpy as np

from fhnspiral import stability as st
from fhnspiral.experiments import stability_report
from fhnspiral.model import ModelParams, nullclines, steady_state

p = ModelParams()
print("rest state:", steady_state(p))
V, wf, wg = nullclines(p, (-0.4, 1.2), 9)
for v, a, b in zip(V, wf, wg):
    print(f"  V={v:5.2f}  W on f-nullcline={a:7.4f}  W on g-nullcline={b:6.3f}")

# how fast the planar front slows down as the inhibitor builds up
print("dc/dW at alpha=0.1:", round(st.dc_inf_dW(0.1), 4))
for mode in (st.NUMERIC_SLOPE, st.ANALYTIC):
    lin = st.chi_estimate(mode, p)
    print(f"chi ({mode}): {lin.chi:.4f}   front slope {lin.slope_f:.4f}")

chi = st.chi_estimate().chi
rho = st.open_loop_eigs(chi, 200.0, 200)
print(f"rho_1 = {rho[0]:.4f}, unstable modes: {np.count_nonzero(rho > 0)}")

# dense actuation acts like distributed feedback; point actuation does not
print(stability_report("idealized", ks=[1, 5, 10, 20]).text())
print(stability_report("fig4", N=16, ks=[1e-3, 1, 100]).text())
