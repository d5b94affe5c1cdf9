"""Three families of entangled states the negativity oracle cannot see.

Bound-entangled (PPT entangled) states are the reason a learned classifier
is interesting at all: the exact criterion certifies nothing on them.
"""

import numpy as np

from qent import (
    acin_state,
    horodecki_state,
    negativity_vector,
    randomize_local,
    upb_state,
)
from qent.entanglement import horodecki_ppt_cut, upb_members
from qent.qcore import hermitian_eigenvalues

rng = np.random.default_rng(3)

print("== 2 x 2^(n-1) family: entangled yet PPT on the top-qubit cut ==")
for n in (3, 4):
    rho = horodecki_state(0.5, n)
    negs = negativity_vector(rho)
    cut = horodecki_ppt_cut(n)
    print(f"n={n}: hidden cut {cut} negativity {negs[cut.index - 1]:.1e}; "
          f"other cuts min {min(v for i, v in enumerate(negs) if i != cut.index - 1):.4f}")

print("\n== GHZ-diagonal family: PPT on every cut for any positive weights ==")
for params in ((1.0, 1.0, 1.0), (2.0, 0.5, 3.0), (0.3, 4.0, 0.9)):
    rho = acin_state(*params)
    print(f"a,b,c={params}: max negativity over cuts {negativity_vector(rho).max():.1e}")

print("\n== Unextendible-product-basis complement ==")
rho = upb_state()
rank = int(np.sum(hermitian_eigenvalues(rho) > 1e-9))
print(f"rank {rank}, trace {np.trace(rho).real:.6f}")
print("kernel residuals of the four product members:",
      [f"{np.linalg.norm(rho @ v):.1e}" for v in upb_members()])
print("negativities:", [f"{v:.1e}" for v in negativity_vector(rho)])

print("\n== Local rotations cannot reveal them ==")
worst = 0.0
for _ in range(50):
    worst = max(worst, negativity_vector(randomize_local(upb_state(), rng)).max())
print(f"max negativity over 50 randomized copies: {worst:.1e}")
