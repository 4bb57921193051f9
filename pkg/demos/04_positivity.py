"""Sequential positivity: can the data support a regime at all?

Estimating the risk under an intervention option needs people in the data
who actually followed that option, at every hour, in every covariate
stratum the model conditions on. The report counts them; a flagged cell
has too few, and a structural zero means the option is unobservable there.
"""
from laborsim import default_config, default_policy, never_cesarean_policy
from laborsim.datagen import generate_dataset, positivity_report
from laborsim.regimes import DynamicFhr, ImmediateCesarean, VaginalOnly

cfg = default_config("coarse", seed=7)
n = 50_000


def summarize(name, report):
    flagged = int(report.flagged.sum())
    structural = len(report.structural_zero_rows())
    print(f"{name:<58} cells {len(report.hours):>4}  flagged {flagged:>4}  structural zeros {structural:>3}")


print("=" * 98)
print("Default usual-care data: every shipped option is observable")
print("=" * 98)
ds = generate_dataset(n, cfg, default_policy(), seed=21)
for regime in (VaginalOnly(), ImmediateCesarean(), DynamicFhr()):
    summarize(f"default policy vs {type(regime).__name__}", positivity_report(ds, regime, threshold=5))
print("(ImmediateCesarean has at-risk followers only at hour 0 — after the")
print(" cesarean nobody remains at risk, so later hours simply have no rows.)")

print()
print("=" * 98)
print("Never-cesarean data: cesarean-bearing options are structurally unsupported")
print("=" * 98)
clean = generate_dataset(n, cfg, never_cesarean_policy(), seed=22)
summarize("never-cesarean policy vs VaginalOnly", positivity_report(clean, VaginalOnly(), threshold=5))
rep = positivity_report(clean, ImmediateCesarean(), threshold=5)
summarize("never-cesarean policy vs ImmediateCesarean", rep)
print()
print("sample of the flagged report (hour 0):")
print(f"{'hour':>4} {'stratum':<38}{'n_at_risk':>10} {'n_consistent':>13} {'flagged':>8}")
shown = 0
for i in range(len(rep.hours)):
    if rep.hours[i] == 0 and shown < 6:
        print(f"{int(rep.hours[i]):>4} {rep.stratum_labels[int(rep.strata[i])]:<38}"
              f"{int(rep.n_at_risk[i]):>10} {int(rep.n_consistent[i]):>13} {bool(rep.flagged[i]):>8}")
        shown += 1
