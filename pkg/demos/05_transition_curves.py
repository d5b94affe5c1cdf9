"""The NPT -> PPT transition as mixtures grow.

Mixing more and more entangled pure states washes out the negative part of
the partial transpose: the fraction of certifiably entangled mixtures decays
with the number of components d, which is exactly the regime where a learned
classifier has to carry the weight.  Writes the curves to transition.csv.
"""

import numpy as np

from qent.harness import transition_analysis, write_transition_csv
from qent.rng import seeded_rng

D_VALUES = [2, 5, 8, 11, 14, 17, 20, 23, 26, 30]
SAMPLES = 150

curves = transition_analysis(None, 3, D_VALUES, SAMPLES, seeded_rng(5, 0))

print(f"{'d':>4s} {'circuit pool':>14s} {'haar pool':>11s} {'separable':>10s}")
for i, d in enumerate(D_VALUES):
    row = [curves.series[p]["npt_fraction"][i]
           for p in ("entangled_circuit", "entangled_haar", "separable")]
    print(f"{d:4d} {row[0]:14.3f} {row[1]:11.3f} {row[2]:10.3f}")

write_transition_csv("transition.csv", curves)
print("\nwrote transition.csv (plug a trained checkpoint into "
      "`qent convneg` for the agreement curves)")
