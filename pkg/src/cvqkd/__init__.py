"""Analytical key-rate bounds for continuous-variable QKD with arbitrary modulations."""

from .bound import (
    ChannelStats,
    ModulationAnalysis,
    ZInterval,
    analyze,
    expected_stats,
    gaussian_analysis,
    psk_closed_form,
    z_interval,
    z_star_gaussian_channel,
)
from .constellation import Constellation, psk, qam_binomial, qam_discrete_gaussian
from .errors import NonPhysicalError, TruncationError
from .keyrate import KeyRateResult, key_rate, key_rate_from_stats
from .mixed import MixedConstellation, analyze_mixed, thermal_constellation

__version__ = "0.1.0"
