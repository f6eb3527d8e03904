"""Truncated modal model against a direct finite-difference solution."""
import numpy as np

from fhnspiral import stability as st

inst = dict(chi=0.002, Lx=50.0, actuator_xs=[5.0, 25.0, 45.0], sensor_x=10.0)
sys_ = st.build_modal_system(0.002, 50.0, 24, inst["actuator_xs"], inst["sensor_x"])
for k in (0.0, 0.05, 0.15, 0.5):
    ab = st.spectrum(st.closed_loop_matrix(sys_, k, st.front_slope_analytic())).spectral_abscissa
    print(f"k={k:4.2f} spectral abscissa {ab:+.5f}")
print("zeros:", np.round(st.solvability_check(sys_).zeros.real, 4)[:6], "...")

z0 = lambda x: 1.0 + np.cos(np.pi * x / 50.0)
for N in (4, 8, 16, 32):
    d0 = st.modal_vs_pde_oracle(k=0.0, horizon=1000.0, N=N, z0=z0, **inst)
    d1 = st.modal_vs_pde_oracle(k=0.15, horizon=1000.0, N=N, z0=z0, **inst)
    print(f"N={N:2d}: deviation open loop {d0:.4f}, closed loop {d1:.4f}")
