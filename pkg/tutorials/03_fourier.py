"""Frequency content of small circuit models."""
import numpy as np

from idu.analysis import fourier

rng = np.random.default_rng(1)

# <Z> after RX(x) is cos x: two coefficients of 1/2
spec = fourier.fourier_probe(fourier.cosine_circuit(), [], bound=2)
print(fourier.format_report(spec, bounds=[1]))

# 2 qubits, 2 rows: every feature is encoded once, so frequencies stay in {-1, 0, 1}
toy = fourier.toy_idu(2, 2)
theta = rng.uniform(0, np.pi, toy.num_params)
spec = fourier.fourier_probe(toy, theta, bound=2, rows=2, cols=2)
print("IDU toy: energy outside {-1,0,1}^4 =", spec.energy_outside(1))
print("largest coefficients:")
print("\n".join(fourier.format_report(spec, bounds=1).splitlines()[1:6]))

# re-uploading one summed feature N times widens the spectrum to {-N..N}
for n in (1, 2, 3, 4):
    dru = fourier.toy_dru(1, n)
    s = fourier.fourier_probe(dru, rng.uniform(0, np.pi, dru.num_params), bound=n + 1)
    mags = [abs(s.coefficient([w])) for w in range(0, n + 2)]
    print(f"N={n}: |c_w| for w=0..{n + 1}:", np.round(mags, 4))
