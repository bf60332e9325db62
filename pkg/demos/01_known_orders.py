"""
Blind identification with known filter orders
=============================================

Three graph filters are driven by the same unknown input.  Only their
outputs are observed.  The cross relations between pairs of outputs pin
the filter coefficients down to a common scale, and the smallest right
singular vector of the stacked system recovers them.
"""

import numpy as np

import gfid
from gfid.filters import FullNormal, IidNormal

rng = np.random.default_rng(0)

# An Erdos-Renyi graph and its eigendecomposition
graph = gfid.generate_graph("er", rng, n=30, p=4 / 30)
basis = gfid.eigendecompose(graph)
print(f"{graph.n} nodes, {graph.n_edges} edges, {basis.n_distinct} distinct frequencies")

# Three order-3 filters and one white input
bank = gfid.generate_filters(IidNormal((3, 3, 3)), rng)
x, x_hat = gfid.generate_input(FullNormal(), basis, rng)
outputs = np.array([gfid.apply_filter(f, basis, x) for f in bank])

# Is this instance identifiable at all?  The checks use the ground truth.
support = gfid.spectral_support(x_hat, basis)
print("identifiability:", gfid.check_multi(bank, support).to_dict())

# Recovery sees only the outputs and the graph
obs = gfid.ObservationSet.from_outputs(outputs, basis)
system = gfid.build_system(obs, basis, bank.orders, "multi_known")
truth = gfid.true_coefficients(bank, "multi_known")
res = gfid.solve_nullspace(system, truth)
print(f"noiseless: error {res.error:.2e}, sigma_min/sigma_2 {res.gap:.2e}")

# The same pipeline with 0.1% relative noise on every output
noisy = np.array([gfid.corrupt(y, 1e-3, rng) for y in outputs])
obs = gfid.ObservationSet.from_outputs(noisy, basis)
system = gfid.build_system(obs, basis, bank.orders, "multi_known")
res = gfid.solve_nullspace(system, truth)
print(f"sigma = 1e-3: error {res.error:.2e}")

# Estimates are defined up to scale; rescale to compare with the truth
est = res.estimate * (truth @ res.estimate) / (res.estimate @ res.estimate)
print(np.round(np.c_[truth, est], 3))
