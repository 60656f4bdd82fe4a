"""
Exit probabilities from growing windows
=======================================

For the same 17-cell chain, estimate ``P_x(tau_V <= 1)`` for the nested
windows ``V`` of widths 5, 9, 13, 17 around the midpoint, from every start
``x``.  The last window is the whole space, so its column is exactly 0.
Then split ``P_x(sup |A_n - A| > eps)`` into its exit part and its
restricted second-moment part for each window.
"""

import numpy as np

from revuzlab.config import load_scenario
from revuzlab.measures import restrict_measure
from revuzlab.pathsim import coupled_sup_diffs

N = 20_000
sc = load_scenario("path17_bm")
chain, nests = sc.chain, sc.nests
x0, eps = sc.params["x"], sc.params["epsilon"]

starts = [x for x in chain.states for _ in range(N // chain.n)]
ex = coupled_sup_diffs(chain, starts, 1.0, [], seed=1, nests=nests)
table = np.array([[ex.exit_probability(k, chain.index(x)).mean for k in range(len(nests))]
                  for x in chain.states])
print("P_x(tau_V <= 1), rows x = 0..16, columns |V| =", [len(V) for V in nests])
print(np.array2string(table, precision=3, suppress_small=True))

# decomposition for the width-3 member of the mollified family
mu_n = sc.sequence[3]
pairs = [(mu_n, sc.limit)] + [(restrict_measure(mu_n, V), restrict_measure(sc.limit, V))
                              for V in nests]
s = coupled_sup_diffs(chain, [x0] * N, 1.0, pairs, seed=2, nests=nests)
print(f"\nP_{x0}(sup |A_n - A| > {eps}) = {s.exceedance(0, eps).mean:.4f}")
for k, V in enumerate(nests):
    exit_p = s.exit_probability(k).mean
    trunc = s.moment(k + 1).mean
    print(f"|V|={len(V):>2}: exit {exit_p:.4f} + moment/eps^2 {trunc / eps**2:9.3f}"
          f" = {exit_p + trunc / eps**2:9.3f}")
