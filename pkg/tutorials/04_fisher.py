"""Fisher spectra and effective dimension for the five IDU splits.

Uses random images instead of MNIST so it runs anywhere; swap in
data.prepare(...).train.features for the real thing.
"""
import numpy as np

from idu import analysis, circuits

rng = np.random.default_rng(2)
features = rng.uniform(0, np.pi, (500, 100))

spectra, curves = {}, {}
for k in circuits.STANDARD_SPLITS:
    c = circuits.build_idu(k)
    fims = analysis.fims_over_thetas(c, features, num_thetas=4, k=50, seed=k)
    spectra[str(k)] = analysis.fim_spectrum(analysis.normalize_fims(fims))
    curves[str(k)] = analysis.effective_dimension(fims)

print(analysis.format_spectrum_table(spectra))
print(analysis.format_effdim_table(curves))

# with k < d each FIM has rank <= k, which caps ed/d near k/d for large n;
# more samples per FIM lift the cap
c = circuits.build_idu(10)
for k in (50, 400):
    fims = analysis.fims_over_thetas(c, features, num_thetas=4, k=k, seed=0)
    print(f"k={k}:", np.round(analysis.effective_dimension(fims).ed_normalized, 4))
