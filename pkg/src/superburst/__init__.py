"""Superradiant burst dynamics of a waveguide-coupled atomic ensemble.

Simulates collective decay of N two-level atoms cascaded along a
unidirectional guided mode, with cost linear in N, plus an exact
small-N master-equation oracle, disorder averaging, observable
extraction, heterodyne coherence analysis, and disorder-parameter
fitting.
"""

from .errors import ConfigError, ConvergenceError, NumericalError, SuperburstError
from .grid import StepGrid, TimeGrid
from .params import (
    AtomState,
    PhysicalParams,
    PulseSpec,
    DRIVEN_PULSE,
    IDEAL_INSTANT,
    RECTANGULAR,
    SMOOTHED,
)
from .bloch import AtomTrajectory, CoherentDrive, ideal_state, make_pulse, solve_bloch
from .cascade import (
    EnsembleResult,
    MixedFieldTrace,
    Preparation,
    energy_ledger,
    propagate_atom,
    propagate_ensemble,
)
from .disorder import (
    DisorderPlan,
    TruncatedGaussian,
    average_realizations,
    sample_betas,
)
from .observables import (
    BurstMetrics,
    PowerLawFit,
    cross_correlation,
    detect_threshold,
    fit_cosine_amplitude,
    fit_power_law,
    forward_fraction,
    peak_and_delay,
)
from .heterodyne import HeterodyneConfig, extract_g1, forward_g2, monte_carlo_clicks
from .fitting import FitProblem, FitSimConfig, TargetTrace, fit_disorder_params

__version__ = "0.1.0"
