"""Averages over many records.

|l(t)|^2 is the likelihood of the record, so under the reference (Wiener)
measure its mean stays 1 for all time. Weighting each posterior projector by
|l|^2 and averaging gives the unconditional state, which must agree with the
Lindblad master equation. Both statements are checked here by Monte Carlo.

Run: python3 demos/03_ensembles.py
"""

# %%
import math

from squeezefilter import runner

for scheme in ("double", "single"):
    cfg = runner.RunConfig(scheme=scheme, mu=0.1, rho0=0.5, alpha0=0.5, t_max=10.0, dt=1e-3,
                           trajectories=4000, outputs=("norm2",), seed=1)
    s = runner.run_ensemble(cfg)
    z = (s.mean_norm2[-1] - 1) / s.stderr_norm2[-1]
    print(f"{scheme:6s} mean |l(T)|^2 = {s.mean_norm2[-1]:.4f} +- {s.stderr_norm2[-1]:.4f}  ({z:+.2f} sigma)")

# %% [markdown]
# Unconditional state against the master equation, measured in trace
# distance. The Monte Carlo floor is roughly 1/sqrt(M).

# %%
m = 2000
cfg = runner.RunConfig(scheme="double", mu=0.1, rho0=0.5, alpha0=0.3, t_max=10.0, dt=1e-2,
                       trajectories=m, cutoff=30, outputs=("density",), seed=2)
s = runner.run_ensemble(cfg)
for t, d in zip(s.density_times, s.trace_distance):
    print(f"t = {t:4.1f}: trace distance to Lindblad = {d:.4f}   (bound 5/sqrt(M) = {5 / math.sqrt(m):.3f})")
