"""Two-state bacterial persistence with mass killings: closed forms, critical
thresholds, exact simulation and the graphical coupling."""

__version__ = "0.1.0"

from .critical import (
    CriticalResult,
    QuadratureSettings,
    abs_log_mean,
    delta_c_lower_bound,
    find_delta_c,
    find_tc,
    m_prime,
    tc_closed_form_balanced,
)
from .dynamics import (
    SpectralData,
    envelope_bounds,
    mean_normal,
    mean_persistent,
    mean_persistent_deriv,
    spectral,
)
from .model import (
    DeterministicPeriod,
    PoissonIntensity,
    PopulationState,
    Rates,
    Seed,
    apply_kill,
    killing_times,
    validate_rates,
)
from .simulate import (
    estimate_mean_offspring,
    estimate_survival,
    run_epochs,
    run_interval,
    sample_offspring,
)
