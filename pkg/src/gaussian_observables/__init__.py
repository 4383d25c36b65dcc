from gaussian_observables.observable import (
    GaussianObservable,
    classify,
    density_norm,
    validate,
    heterodyne_thermal,
    heterodyne_vacuum,
    noisy_homodyne,
    sharp_homodyne,
)
from gaussian_observables.naimark import extend, verify
from gaussian_observables.statistics import GaussianState, outcome_distribution, sample
from gaussian_observables.symplectic import extended_williamson, standard_form
from gaussian_observables.configuration import initialize_config
