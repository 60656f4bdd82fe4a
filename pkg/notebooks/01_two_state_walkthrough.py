"""
Two-state chain walkthrough
===========================

Kernels, potentials and PCAFs on the chain ``a <-> b`` with unit rates and
``m = (1/2, 1/2)``.  Every number here has a closed form, so the printed
Monte Carlo rows can be read against exact values.
"""

import numpy as np

from revuzlab import families
from revuzlab.chain import heat_kernel, kill_transform, resolvent_kernel
from revuzlab.measures import dirac, potential, uniform
from revuzlab.pathsim import (
    exact_product_infinity,
    exact_revuz_functional,
    mc_product_infinity,
    mc_revuz_functional,
    pcaf_along,
    sample_path,
)

np.set_printoptions(precision=6, suppress=True)
c2 = families.two_state()
print(c2, "eigenvalues", c2.eigenvalues)

# densities w.r.t. m: p_t(a, a) = 1 + exp(-2t)
for t in (0.1, 1.0, 5.0):
    print(f"p_{t}:\n", heat_kernel(c2, t).values)

print("r_1:\n", resolvent_kernel(c2, 1.0).values)

delta_a = dirac(c2, "a")
print("U_1 delta_a =", potential(c2, 1.0, delta_a).values)

# one path and its occupation-time PCAF at a (density 2 on state a)
path = sample_path(c2, "a", 4.0, rng=1)
A = pcaf_along(path, delta_a)
print("jumps:", path.jump_times.round(3), "states:", path.labels)
print("A at t = 0..4:", A(np.arange(5.0)).round(4))

# discounted PCAF integrals against the potential
for alpha in (0.5, 1.0, 2.0):
    est = mc_revuz_functional(c2, "a", alpha, 1.0, delta_a, 50_000, seed=[0, int(4 * alpha)])
    exact = exact_revuz_functional(c2, "a", alpha, 1.0, delta_a)
    print(f"alpha={alpha}: MC {est.mean:.4f} +- {est.stderr:.4f}   exact {exact:.4f}")

# second moment of the terminal PCAF after killing at rate 1
killed = kill_transform(c2, 1.0)
mu = dirac(killed, "a")
est = mc_product_infinity(killed, "a", mu, mu, 50_000, seed=0)
print(f"E_a[A_inf^2]: MC {est.mean:.4f} +- {est.stderr:.4f}   exact "
      f"{exact_product_infinity(killed, 'a', mu, mu):.4f} (= 32/9)")

print("U_1 uniform =", potential(c2, 1.0, uniform(c2)).values, "(constant 1)")
