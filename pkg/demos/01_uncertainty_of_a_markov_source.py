"""How the value of the last observation shapes information decay.

A two-state source that lingers in state 1 (P[2|1] = 0.01) but flees state 2
(P[1|2] = 0.3).  After observing state 1 the monitor stays nearly certain for
many slots; after observing state 2 the uncertainty spikes within a couple of
slots and then relaxes to the equilibrium level.  Age alone cannot tell these
two situations apart.
"""

import numpy as np

from uoisched import belief_reset, entropy, n_step_column, uoi, validate_chain

chain = validate_chain([[0.99, 0.3], [0.01, 0.7]])
print("transition matrix (columns = next-state laws):")
print(np.array(chain.transition))
print(f"equilibrium belief: {chain.equilibrium.round(6)}")
print(f"equilibrium entropy: {entropy(chain.equilibrium):.4f} bits\n")

print("uncertainty of information (bits) by age of the last observation:")
print(f"{'age':>4} {'seen state 1':>14} {'seen state 2':>14}")
for age in range(1, 13):
    u1 = uoi(chain, n_step_column(chain, 1, age))
    u2 = uoi(chain, n_step_column(chain, 2, age))
    print(f"{age:>4} {u1:>14.4f} {u2:>14.4f}")

print("\nfresh observations reset the belief to a column of the matrix:")
for k in (1, 2):
    print(f"  after seeing state {k}: belief {belief_reset(chain, k).round(4)}")
print("\nnote the non-monotone column: uncertainty after seeing state 2 first")
print("rises above the equilibrium level and then falls back toward it.")
