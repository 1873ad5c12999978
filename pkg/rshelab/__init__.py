from .cache import grid_cache_clear, grid_cache_info, grid_resize_cache
from .circle.grid import CircleFunction, FourierCoeffs, GridSpec, make_grid
from .circle.heat import heat_apply
from .circle.rearrange import rearrange
from .config.run_config import RunConfig
from .contexts import disable_checks, enable_checks
from .dynamics.noise import NoiseSpec
from .dynamics.scheme import SchemeConfig, simulate
from .dynamics.streams import NoiseStream
from .errors import ConfigError, NumericalError
from .measure.bridge import w2

__all__ = [
    "CircleFunction",
    "ConfigError",
    "FourierCoeffs",
    "GridSpec",
    "NoiseSpec",
    "NoiseStream",
    "NumericalError",
    "RunConfig",
    "SchemeConfig",
    "disable_checks",
    "enable_checks",
    "grid_cache_clear",
    "grid_cache_info",
    "grid_resize_cache",
    "heat_apply",
    "make_grid",
    "rearrange",
    "simulate",
    "w2",
]
