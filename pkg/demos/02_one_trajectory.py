"""Follow one measurement record and check the closed form against brute force.

The closed-form posterior is a triple (l, xi, alpha): a complex weight, a
squeeze parameter and a displacement. Here it is computed for one seeded
double-heterodyne record and compared, at a few times, against a direct
Euler-Maruyama integration of the linear filter in a truncated Fock basis.

Run: python3 demos/02_one_trajectory.py
"""

# %%
import numpy as np

from squeezefilter import fock, runner
from squeezefilter.noise import generate_path

cfg = runner.RunConfig(scheme="double", mu=0.1, rho0=0.5, alpha0=0.5, t_max=2.0, dt=1e-4, seed=7)
traj = runner.run_trajectory(cfg, traj_index=0)
print(f"{len(traj)} frames; final |l|^2 = {traj.norm2[-1]:.6f}, alpha = {traj.alpha[-1]:.5f}")

# %% [markdown]
# The same record, replayed in Fock space. The truncation is chosen so that
# doubling it moves no expectation value by more than 1e-8.

# %%
cutoff = fock.choose_cutoff(cfg.xi0, cfg.alpha0)
path = generate_path(cfg.grid(), cfg.noise_kind, cfg.seed, 0)
checkpoints = np.arange(4000, cfg.grid().n_steps + 1, 4000)
states = fock.integrate_filter(fock.build_squeezed_coherent(cfg.xi0, cfg.alpha0, cutoff),
                               path, cfg.model_params(), checkpoints)
mx, my, dx, dy, n2 = fock.fock_moments(states)

print(f"cutoff {cutoff}")
print("    t     <X> closed   <X> Fock    |l|^2 closed  |psi|^2 Fock   family fidelity")
for j, k in enumerate(checkpoints):
    fit = fock.fit_squeezed_coherent(states[j])
    print(f"{traj.t[k]:5.2f}   {traj.meanX[k]: .6f}   {mx[j]: .6f}   {traj.norm2[k]:.6f}      "
          f"{n2[j]:.6f}       {fit.fidelity:.10f}")

# %% [markdown]
# Agreement is at the 1e-3 level, which is what a first-order stochastic
# integrator delivers at dt = 1e-4. The fitted fidelity stays at 1 to
# many digits: the filtered state never leaves the squeezed coherent family.
