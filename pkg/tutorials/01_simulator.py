"""Build the incremental-uploading circuits and poke at the simulator."""
import numpy as np

from idu import circuits, qsim

rng = np.random.default_rng(0)

# IDU_4: rows 0-2, V, rows 3-5, V, rows 6-7, V, rows 8-9, then 7 more V layers
c = circuits.build_idu(4)
print(c.meta.label, "gates", len(c.gates), "params", c.num_params, "features", c.num_features)
print("first lines of the text form:")
print("\n".join(circuits.to_text(c).splitlines()[:4]))

# single-qubit runs and CRZ chains are fused into a short execution plan
print("fused ops:", len(c.plan.ops))

x = rng.uniform(0, np.pi, 100)  # one 10x10 image, row major
theta = rng.uniform(0, np.pi, c.num_params)
z = qsim.evaluate(c, x, theta)
print("<Z_q> =", np.round(z, 4))

# batch of images in one call
xs = rng.uniform(0, np.pi, (8, 100))
print("batch shape", qsim.expectations(c, xs, theta).shape)

# gradient of a weighted sum of expectations
w = np.zeros(10)
w[0] = 1.0
g = qsim.gradient(c, x, theta, w)
h = 1e-5
e = np.zeros_like(theta)
e[7] = h
fd = (qsim.evaluate(c, x, theta + e)[0] - qsim.evaluate(c, x, theta - e)[0]) / (2 * h)
print(f"d<Z_0>/dtheta_7 adjoint {g[7]:.10f} finite difference {fd:.10f}")

# IDU_1 with RX encoding only ever sees column sums of the image
full = circuits.build_idu(1)
summed = circuits.build_row_summed("idu")
a = qsim.simulate(full, x, theta)
b = qsim.simulate(summed, circuits.sum_rows(x), theta)
print("IDU_1 vs row-summed state diff", np.abs(a - b).max())
