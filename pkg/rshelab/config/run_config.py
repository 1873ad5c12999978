import os
from typing import Any, Callable, Dict, Mapping, Optional, Tuple, Union

import attrs

from rshelab.circle.grid import GridSpec
from rshelab.dynamics.noise import NoiseSpec
from rshelab.dynamics.scheme import SchemeConfig
from rshelab.dynamics.streams import NoiseStream
from rshelab.errors import ConfigError
from rshelab.types import ConfigMapping, ConfigValue

OUTPUT_ENV_VAR = "RSHE_OUT"
DEFAULT_OUTPUT_DIR = "rshe-out"
MAX_LEVELS = 5
INITIAL_CONDITIONS = ("zero", "e1", "two_level", "kernel")
_MAX_SEED = (1 << 64) - 1


def _default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV_VAR, DEFAULT_OUTPUT_DIR)


def _as_int(key: str, value: ConfigValue) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        if isinstance(value, float) and value.is_integer():
            return int(value)
        raise ConfigError(f"{key} must be an integer, got {value!r}")
    return value


def _as_float(key: str, value: ConfigValue) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    return float(value)


def _as_str(key: str, value: ConfigValue) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    return value


def _as_float_tuple(key: str, value: ConfigValue) -> Tuple[float, ...]:
    items = value if isinstance(value, list) else [value]
    return tuple(_as_float(key, v) for v in items)


def _as_optional_int(key: str, value: ConfigValue) -> Optional[int]:
    if isinstance(value, str) and value.lower() in ("auto", "none"):
        return None
    return _as_int(key, value)


def _at_least(key: str, low: int) -> Callable[[Any, Any, Any], None]:
    def check(instance: Any, attribute: Any, value: Optional[int]) -> None:
        if value is not None and value < low:
            raise ConfigError(f"{key} must be at least {low}, got {value}")

    return check


def _positive(key: str) -> Callable[[Any, Any, Any], None]:
    def check(instance: Any, attribute: Any, value: float) -> None:
        if not value > 0:
            raise ConfigError(f"{key} must be positive, got {value}")

    return check


def _check_lambda(instance: Any, attribute: Any, value: float) -> None:
    if not value > 0.5:
        raise ConfigError(f"noise.lambda must exceed 0.5, got {value}")


def _check_seed(instance: Any, attribute: Any, value: int) -> None:
    if not 0 <= value <= _MAX_SEED:
        raise ConfigError(f"noise.seed must be an unsigned 64-bit integer, got {value}")


def _check_h(instance: Any, attribute: Any, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise ConfigError(f"scheme.h must lie in (0, 1), got {value}")


def _check_levels(instance: Any, attribute: Any, value: int) -> None:
    if not 1 <= value <= MAX_LEVELS:
        raise ConfigError(
            f"experiment.levels must lie in [1, {MAX_LEVELS}], got {value}"
        )


def _check_t_grid(instance: Any, attribute: Any, value: Tuple[float, ...]) -> None:
    if not value or any(not t > 0 for t in value):
        raise ConfigError(
            f"experiment.t_grid must be non-empty and positive, got {value}"
        )
    if list(value) != sorted(value):
        raise ConfigError(f"experiment.t_grid must be increasing, got {value}")


def _check_initial(instance: Any, attribute: Any, value: str) -> None:
    if value not in INITIAL_CONDITIONS:
        raise ConfigError(
            f"experiment.initial must be one of {list(INITIAL_CONDITIONS)}, "
            f"got {value!r}"
        )


def _check_eps_grid(instance: Any, attribute: Any, value: Tuple[float, ...]) -> None:
    if not value or any(e < 0 for e in value):
        raise ConfigError(
            f"experiment.eps_grid must be non-empty and non-negative, got {value}"
        )


def _key(name: str) -> Dict[str, str]:
    return {"key": name}


@attrs.frozen(kw_only=True)
class RunConfig:
    """All configuration keys, validated before any computation starts.

    Attribute metadata carries the dotted key used in config files.
    """

    n: int = attrs.field(default=64, metadata=_key("grid.n"))
    cutoff: Optional[int] = attrs.field(default=None, metadata=_key("modes.cutoff"))
    lam: float = attrs.field(
        default=0.75, validator=_check_lambda, metadata=_key("noise.lambda")
    )
    seed: int = attrs.field(
        default=0, validator=_check_seed, metadata=_key("noise.seed")
    )
    amplitude: float = attrs.field(default=1.0, metadata=_key("noise.amplitude"))
    h: float = attrs.field(default=1e-3, validator=_check_h, metadata=_key("scheme.h"))
    T: float = attrs.field(
        default=0.5, validator=_positive("scheme.T"), metadata=_key("scheme.T")
    )
    record_every: int = attrs.field(
        default=1,
        validator=_at_least("scheme.record_every", 1),
        metadata=_key("scheme.record_every"),
    )
    paths: int = attrs.field(
        default=200,
        validator=_at_least("ensemble.paths", 1),
        metadata=_key("ensemble.paths"),
    )
    threads: Optional[int] = attrs.field(
        default=None,
        validator=_at_least("ensemble.threads", 1),
        metadata=_key("ensemble.threads"),
    )
    t_grid: Tuple[float, ...] = attrs.field(
        default=(0.03125, 0.0625, 0.125, 0.25, 0.5, 1.0),
        validator=_check_t_grid,
        metadata=_key("experiment.t_grid"),
    )
    eps_grid: Tuple[float, ...] = attrs.field(
        default=(0.0, 0.001, 0.01, 0.1),
        validator=_check_eps_grid,
        metadata=_key("experiment.eps_grid"),
    )
    levels: int = attrs.field(
        default=3, validator=_check_levels, metadata=_key("experiment.levels")
    )
    probes: int = attrs.field(
        default=4,
        validator=_at_least("experiment.probes", 1),
        metadata=_key("experiment.probes"),
    )
    alpha: float = attrs.field(
        default=2.0,
        validator=_positive("experiment.alpha"),
        metadata=_key("experiment.alpha"),
    )
    delta: float = attrs.field(default=0.05, metadata=_key("experiment.delta"))
    trials: int = attrs.field(
        default=1000,
        validator=_at_least("experiment.trials", 1),
        metadata=_key("experiment.trials"),
    )
    pairs: int = attrs.field(
        default=100,
        validator=_at_least("experiment.pairs", 1),
        metadata=_key("experiment.pairs"),
    )
    initial: str = attrs.field(
        default="e1", validator=_check_initial, metadata=_key("experiment.initial")
    )
    out_dir: str = attrs.field(factory=_default_output_dir, metadata=_key("output.dir"))

    def __attrs_post_init__(self) -> None:
        if not self.amplitude >= 0:
            raise ConfigError(
                f"noise.amplitude must be non-negative, got {self.amplitude}"
            )
        if not self.delta >= 0:
            raise ConfigError(
                f"experiment.delta must be non-negative, got {self.delta}"
            )
        # Builds and validates grid.n, modes.cutoff and T/h together.
        self.scheme_config()

    @property
    def grid(self) -> GridSpec:
        return GridSpec(self.n)

    @property
    def effective_cutoff(self) -> int:
        return self.grid.max_cutoff if self.cutoff is None else self.cutoff

    def noise_spec(self) -> NoiseSpec:
        return NoiseSpec(self.lam, self.effective_cutoff, self.amplitude)

    def noise_stream(self) -> NoiseStream:
        """The master stream of this run; trajectories use its children."""
        return NoiseStream(self.seed)

    def scheme_config(self, h: Optional[float] = None) -> SchemeConfig:
        return SchemeConfig(
            self.grid,
            self.noise_spec(),
            self.h if h is None else h,
            self.T,
            self.record_every,
        )

    @classmethod
    def from_mapping(
        cls, mapping: Mapping[str, ConfigValue], **overrides: Any
    ) -> "RunConfig":
        """Build from dotted keys; unknown keys are rejected."""
        kwargs: Dict[str, Any] = {}
        for key, value in mapping.items():
            if key not in _KEY_TO_FIELD:
                known = ", ".join(sorted(_KEY_TO_FIELD))
                raise ConfigError(f"unknown config key {key} (known keys: {known})")
            name = _KEY_TO_FIELD[key]
            kwargs[name] = _CONVERTERS[name](key, value)
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**kwargs)

    def snapshot(self) -> ConfigMapping:
        """The configuration as a dotted-key mapping (``None`` values omitted)."""
        out: ConfigMapping = {}
        for a in attrs.fields(RunConfig):
            value = getattr(self, a.name)
            if value is None:
                continue
            out[a.metadata["key"]] = list(value) if isinstance(value, tuple) else value
        return out

    def replace(self, **changes: Any) -> "RunConfig":
        return attrs.evolve(self, **changes)


_KEY_TO_FIELD: Dict[str, str] = {
    a.metadata["key"]: a.name for a in attrs.fields(RunConfig)
}

_Converted = Union[int, float, str, None, Tuple[float, ...]]
_Converter = Callable[[str, ConfigValue], _Converted]

_CONVERTERS: Dict[str, _Converter] = {
    "n": _as_int,
    "cutoff": _as_optional_int,
    "lam": _as_float,
    "seed": _as_int,
    "amplitude": _as_float,
    "h": _as_float,
    "T": _as_float,
    "record_every": _as_int,
    "paths": _as_int,
    "threads": _as_optional_int,
    "t_grid": _as_float_tuple,
    "eps_grid": _as_float_tuple,
    "levels": _as_int,
    "probes": _as_int,
    "alpha": _as_float,
    "delta": _as_float,
    "trials": _as_int,
    "pairs": _as_int,
    "initial": _as_str,
    "out_dir": _as_str,
}
