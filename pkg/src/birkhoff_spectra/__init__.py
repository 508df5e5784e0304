"""Thermodynamic formalism and Birkhoff spectra for interval maps with parabolic points."""
from .bcf import (
    DigitSequence,
    QuadraticIrrational,
    bcf_expand,
    bcf_reconstruct,
    birkhoff_average,
    cf_expand,
    renyi_map,
    sample_gibbs_orbit,
)
from .coding import Word, cylinder_interval, refine_point
from .gibbs import GibbsChain, gibbs_chain, lift_observables, truncated_mean_return
from .induced import check_inducing_condition, enumerate_induced_symbols
from .map_model import (
    MapModel,
    Potential,
    XiClass,
    build_model,
    constant_potential,
    digit_expression,
    digit_power,
    digit_table,
    gauss_model,
    log_derivative,
    log_digit,
    renyi_model,
)
from .pressure import (
    PressureResult,
    bowen_dimension,
    equilibrium,
    finiteness_test,
    induced_pressure,
    lower_bound,
    pressure,
    ruelle_check,
    truncated_pressure,
)
from .spectrum import SpectrumConfig, SpectrumPoint, flat_part, solve_spectrum_point, spectrum_curve
from .transfer import InfinitePressureError, Truncation

__version__ = "0.1.0"
