from .channel import equivalent_channel, fiber_transmittance, optimal_gain_sq, physicality_check
from .finite_size import delta_n, finite_size_key_rate
from .keyrate import key_rate_symmetric_gm, key_rate_ud, optimize_modulation, plob_bound
from .main import main
from .sweep import max_distance, run_sweep

__all__ = [
    "delta_n",
    "equivalent_channel",
    "fiber_transmittance",
    "finite_size_key_rate",
    "key_rate_symmetric_gm",
    "key_rate_ud",
    "main",
    "max_distance",
    "optimal_gain_sq",
    "optimize_modulation",
    "physicality_check",
    "plob_bound",
    "run_sweep",
]

__version__ = "0.1.0"
