"""Uncertainty curves of the posterior state under continuous observation.

A squeezed coherent mode is watched by a heterodyne detector. Whatever the
measurement record, the posterior stays squeezed coherent, and its
uncertainties follow a deterministic curve. This script tabulates those
curves for the double-heterodyne preset (mu = 0.01 omega, theta0 = 0) and its
single-heterodyne counterpart with the local-oscillator phase pi/2 + 0.05 t.

Run: python3 demos/01_squeezing_curves.py [output-dir]
"""

# %%
import sys
from pathlib import Path

import numpy as np

from squeezefilter import runner

out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
out.mkdir(parents=True, exist_ok=True)

# %% [markdown]
# At tau = 0 the state is exactly the initial squeezed vacuum, so
# dX = exp(-rho0)/2 and dY = exp(rho0)/2. The squeezing axis rotates at
# twice the oscillator frequency, so X and Y take turns being squeezed
# every half period, while the measurement drains the squeezing at rate mu.

# %%
for rho0 in (0.5, 2.0, 8.0):
    fig1 = runner.figure_data(1, rho0)
    fig2 = runner.figure_data(2, rho0)
    runner.write_figure(fig1, out / f"figure1_rho0_{rho0:g}.csv")
    runner.write_figure(fig2, out / f"figure2_rho0_{rho0:g}.csv")

    sq_x = fig1.dX < 0.5
    print(f"rho0 = {rho0}")
    print(f"  tau=0          dX = {fig1.dX[0]:.6g}   dY = {fig1.dY[0]:.6g}")
    print(f"  X squeezed on {sq_x.mean():.1%} of tau in [0, 100]")
    for lo, hi in ((0, 10), (50, 100)):
        w = (fig1.tau >= lo) & (fig1.tau <= hi)
        gap = np.max(np.abs(fig1.dX[w] - fig2.dX[w]))
        print(f"  max |dX single - dX double| over tau in [{lo}, {hi}]: {gap:.3e}")

# %% [markdown]
# The two schemes disagree visibly only while the squeezing is strong. For
# weak initial squeezing the gap is small everywhere and fades at the same
# slow rate as the squeezing itself.

# %%
late = runner.figure_data(1, 8.0, n_samples=2, tau_max=2000.0)
print(f"tau = 2000 (mu t = 20): dX - 1/2 = {late.dX[-1] - 0.5:.2e}, dY - 1/2 = {late.dY[-1] - 0.5:.2e}")
