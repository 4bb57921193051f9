"""Simulating labors: single trajectories, bulk datasets, determinism.

The simulator advances one hour at a time: vitals evolve, birth happens
when dilatation completes (or one hour after a cesarean is initiated),
and each in-labor hour carries a state-dependent adverse-outcome hazard.
"""
import numpy as np

from laborsim import default_config, default_policy, make_rng, sample_baseline, simulate_trajectory
from laborsim.datagen import generate_dataset
from laborsim.states import FHR_CATEGORIES, BP_CATEGORIES

cfg = default_config("coarse", seed=7)
policy = default_policy()

print("=" * 70)
print("One labor, hour by hour (coarse mode, usual-care decisions)")
print("=" * 70)
rng = make_rng(2024)
baseline = sample_baseline(rng, cfg)
traj = simulate_trajectory(baseline, policy.as_policy(rng, cfg.mode), rng, cfg)
print(f"baseline: age {baseline.maternal_age:.0f}, parity {baseline.parity}, "
      f"prior preterm birth: {baseline.history_preterm}")
print(f"{'hour':>4} {'FHR':>24} {'dilat':>5} {'sbp':>7} {'action':>7} {'status'}")
for i, s in enumerate(traj.states):
    action = traj.actions[i] if i < len(traj.actions) else None
    status = "adverse outcome" if s.y else ("born" if s.born else "in labor")
    print(f"{s.k:>4} {FHR_CATEGORIES[s.tv.fhr]:>24} {s.tv.dilatation:>5} "
          f"{BP_CATEGORIES[s.tv.sbp]:>7} {('-' if action is None else action):>7} {status}")

print()
print("=" * 70)
print("A population under usual care (n = 20,000, vectorized)")
print("=" * 70)
ds = generate_dataset(20_000, cfg, policy, seed=99)
last = [sl.stop - 1 for sl in ds.person_slices()]
last = np.asarray(last)
print(f"person-hours: {len(ds):,}")
print(f"cesarean fraction:        {ds.cols['a'][last].mean():.3f}")
print(f"adverse-outcome fraction: {ds.cols['y'][last].mean():.3f}")
print(f"vaginal-birth fraction:   {(ds.cols['born'][last] & (ds.cols['a'][last] == 0)).mean():.3f}")
print(f"still in labor at K={cfg.horizon}:  {ds.cols['z'][last].mean():.3f}")

print()
print("=" * 70)
print("Determinism: identical seed, identical data")
print("=" * 70)
again = generate_dataset(20_000, cfg, policy, seed=99)
print("same-seed dataset identical:", ds == again)
other = generate_dataset(20_000, cfg, policy, seed=100)
print("different-seed dataset identical:", ds == other)
