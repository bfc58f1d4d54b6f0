"""Inverting a polynomial filter on a circulant graph.

We build ``C(1000, {1, 2, 5})``, blur a random signal with
``h(t) = 27/4 - 3/4 t - t^2`` applied to the normalized Laplacian, and
recover it with three iterative schemes.  The optimal-polynomial (IOPA)
and Chebyshev (ICPA) approximants converge geometrically at a rate set by
how well ``g`` approximates ``1/h`` on the spectrum.
"""
import numpy as np

from polyshift import apply, chebyshev_coeffs, fit_rate, gd0_solve, icpa_solve, iopa_solve
from polyshift.experiments.circulant import H1, circulant_problem
from polyshift.inverse import cheb_sup_error, gd0_step, optimal_poly

F, spec = circulant_problem(1000, [1, 2, 5])
print("spectrum of L_sym:", spec.lam.min().round(4), "to", spec.lam.max().round(4))

rng = np.random.default_rng(0)
x = rng.uniform(-1, 1, 1000)
b = apply(H1, F, x)

# The a priori contraction factors for each approximant
for L in range(4):
    _, aL = optimal_poly(H1, spec, L)
    print(f"IOPA{L}: a_L = {aL:.4f}")
for K in range(4):
    c = chebyshev_coeffs(H1, 1, K)
    print(f"ICPA{K}: b_K = {cheb_sup_error(H1, c):.4f}")

# Run the solvers for 20 iterations and compare the observed rates
gamma = gd0_step(H1, spec)
runs = {
    "GD0": gd0_solve(lambda z: apply(H1, F, z), b, gamma, 20, x_true=x),
    "IOPA2": iopa_solve(H1, F, b, 2, 20, x_true=x),
    "ICPA2": icpa_solve(H1, F, b, 2, 20, x_true=x),
}
for name, tr in runs.items():
    print(f"{name:6s} error after 5 steps {tr.rel_errors[5]:.2e}, "
          f"fitted rate {fit_rate(tr).rate:.4f}, steps to 1e-3: {tr.iterations_to(1e-3)}")
