# # Tutorial

import matplotlib.pyplot as plt
import numpy as np
from rich.pretty import pprint

from driftspec.bootstrap import parametric_bootstrap
from driftspec.diagnostics import FlatRegions, compare_models
from driftspec.het import fit_het
from driftspec.hom import fit_hom
from driftspec.phase import extract_spectrum
from driftspec.simulate import ConstantGen, HomNoise, RandomWalkGen, SimSpec, simulate

# ## Simulating a data set
#
# A data matrix holds `B` batches of `N+1` complex readings. Here we simulate one
# with a constant echo, a slowly drifting gain and two spectral lines. The spectral
# direction `kappa0` must be mean-zero with unit norm.

grid = np.linspace(0, 1, 40)
lines = np.exp(-(((grid - 0.3) / 0.05) ** 2)) + 0.6 * np.exp(-(((grid - 0.7) / 0.04) ** 2))
kappa0 = (lines - lines.mean()) * np.exp(0.8j)
kappa0 /= np.linalg.norm(kappa0)

spec = SimSpec(
    B=200,
    N_plus_1=40,
    psi_gen=ConstantGen(value=3 + 1j),
    phi_gen=RandomWalkGen(start=0.5 + 0j, amplitude_step=0.01, phase_step=0.05),
    kappa0=kappa0,
    noise=HomNoise(sigma=[[0.02, 0.004], [0.004, 0.03]]),
    seed=1,
)
Y = simulate(spec)
pprint(Y.meta)

# ## Fitting the drift models
#
# `fit_hom` returns a report with the parameters, the log-likelihood trace and
# whether the fit converged:

hom = fit_hom(Y)
pprint(hom.n_iter)
pprint(hom.params.sigma)

# The heteroscedastic model adds phase noise on top. It starts from the
# homoscedastic fit:

het = fit_het(Y, hom_fit=hom)
pprint(het.params.sigma_tilde)

# ## Spectra and bands
#
# `extract_spectrum` rotates the fitted direction so that its real part is as large
# as possible and the dominant peak is positive.

spectrum = extract_spectrum(hom.params.kappa)
bands = parametric_bootstrap(Y, hom, replicates=50, level=0.9, seed=0)

plt.fill_between(grid, bands.band_I.lower, bands.band_I.upper, alpha=0.3)
plt.plot(grid, spectrum.I, label="hom")
plt.plot(grid, np.real(kappa0 * np.exp(1j * extract_spectrum(kappa0).lambda_opt)), "--")
plt.legend()

# ## Comparing with plain averaging
#
# Over regions where the true spectrum is flat, a smaller standard deviation means
# less noise in the estimated spectrum:

comparison = compare_models(Y, FlatRegions.parse("0:6,34:40"), models=["averaging", "hom", "het"])
for row in comparison.models:
    pprint((row.model, row.flat_std))
