"""Why a standard prediction model misleads the cesarean decision.

Under usual care, distressed labors get rescued by cesareans, so their
*observed* outcomes look mild. A naive model fit on those records
understates what would happen under vaginal delivery throughout — at
exactly the profiles where the decision matters. The causal estimators
(g-computation, iterated conditional expectations) recover the truth from
the same confounded records.
"""
from laborsim import builtin_estimand, default_config, default_policy, never_cesarean_policy, substream
from laborsim.coarse import cell_to_state, distress_cell
from laborsim.datagen import generate_dataset
from laborsim.estimators import fit_gcomp, fit_naive, gcomp_predict, ice_estimate
from laborsim.oracle import oracle_exact

cfg = default_config("coarse", seed=7)
policy = default_policy()
condition = cell_to_state(distress_cell(), 0)
spec2 = builtin_estimand(2, 0, cfg.horizon)
truth = oracle_exact(spec2, condition, cfg).p

print("=" * 70)
print("Vaginal-delivery-only risk at the fetal-distress profile")
print("=" * 70)
print(f"oracle (exact):                        {truth:.4f}")

n = 100_000
ds = generate_dataset(n, cfg, policy, seed=11)
naive = fit_naive(ds, 0, cfg.horizon).predict(condition)
print(f"naive model on usual-care records:     {naive.p:.4f}   "
      f"(gap {truth - naive.p:+.4f} <- confounding by indication)")

models = fit_gcomp(ds)
g = gcomp_predict(models, condition, spec2, n_mc=100_000, rng=substream(12, "g"))
print(f"g-computation on the same records:     {g.p:.4f}   (gap {truth - g.p:+.4f})")

ice = ice_estimate(ds, spec2).predict(condition)
print(f"iterated conditional expectations:     {ice.p:.4f}   (gap {truth - ice.p:+.4f})")

print()
print("=" * 70)
print("Same comparison when treatment never occurs (no confounding)")
print("=" * 70)
clean = generate_dataset(n, cfg, never_cesarean_policy(), seed=13)
naive_clean = fit_naive(clean, 0, cfg.horizon).predict(condition)
print(f"naive model on never-cesarean records: {naive_clean.p:.4f}   "
      f"(gap {truth - naive_clean.p:+.4f} -> the naive model was fine, the data were not)")

print()
print("=" * 70)
print("The rescue policy really does lower observed risk (that is the trap)")
print("=" * 70)
spec3 = builtin_estimand(3, 0, cfg.horizon)
usual = oracle_exact(spec3, condition, cfg, policy).p
print(f"risk under vaginal-now-then-usual-care: {usual:.4f}")
print(f"risk under vaginal-only:                {truth:.4f}")
print("The naive model estimates something close to the former while the")
print("decision needs the latter (and its contrast with immediate cesarean:")
spec1 = builtin_estimand(1, 0, cfg.horizon)
print(f"risk under immediate cesarean:          {oracle_exact(spec1, condition, cfg).p:.4f})")
