import json
import os
from typing import Any, List, Sequence, Tuple, Union

from lark.exceptions import LarkError, UnexpectedInput
from lark.lark import Lark
from lark.visitors import Transformer

from rshelab.cache import resizeable_lru_cache
from rshelab.errors import ConfigError
from rshelab.types import ConfigMapping, ConfigScalar, ConfigValue
from rshelab.utils import flatten_dot_names

grammar = r"""

config : _NL* (entry _NL+)* entry?

entry : KEY "=" value

?value : scalar
       | "[" (scalar ("," scalar)*)? "]" -> list

?scalar : STRING -> string
        | BARE   -> bare

KEY : /[A-Za-z_][A-Za-z0-9_]*(\.[A-Za-z_][A-Za-z0-9_]*)*/
BARE : /[^\s,\[\]"#=]+/
STRING : /"[^"\n]*"/
COMMENT : /#[^\n]*/
_NL : /(\r?\n[\t ]*)+/

%import common.WS_INLINE
%ignore WS_INLINE
%ignore COMMENT
"""

_parser = Lark(grammar, start="config", parser="lalr")

_FrozenValue = Union[ConfigScalar, Tuple[ConfigScalar, ...]]


def _coerce_bare(word: str) -> ConfigScalar:
    lowered = word.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return int(word)
    except ValueError:
        pass
    try:
        return float(word)
    except ValueError:
        return word


class TreeToConfig(Transformer):  # type: ignore[type-arg]
    def string(self, s: Any) -> str:
        (x,) = s
        return str(x)[1:-1]

    def bare(self, s: Any) -> ConfigScalar:
        (x,) = s
        return _coerce_bare(str(x))

    def list(self, items: Sequence[ConfigScalar]) -> Tuple[ConfigScalar, ...]:
        return tuple(items)

    def entry(self, s: Any) -> Tuple[str, _FrozenValue]:
        key, value = s
        return str(key), value

    def config(
        self, entries: Sequence[Tuple[str, _FrozenValue]]
    ) -> Tuple[Tuple[str, _FrozenValue], ...]:
        return tuple(entries)


_transformer = TreeToConfig()


@resizeable_lru_cache()
def parse_config_text(text: str) -> Tuple[Tuple[str, _FrozenValue], ...]:
    """Parse ``key = value`` lines into (key, value) pairs, in file order."""
    try:
        out = _transformer.transform(_parser.parse(text))
    except UnexpectedInput as e:
        raise ConfigError(
            f"config syntax error at line {e.line}, column {e.column}:\n"
            f"{e.get_context(text)}"
        ) from e
    except LarkError as e:
        raise ConfigError(f"config syntax error: {e}") from e
    assert isinstance(out, tuple)
    return out


config_cache_info = parse_config_text.cache_info
config_cache_clear = parse_config_text.cache_clear
config_resize_cache = parse_config_text.reset_maxsize


def _thaw(value: _FrozenValue) -> ConfigValue:
    if isinstance(value, tuple):
        return list(value)
    return value


def _to_mapping(pairs: Sequence[Tuple[str, Any]]) -> ConfigMapping:
    out: ConfigMapping = {}
    for key, value in pairs:
        if key in out:
            raise ConfigError(f"duplicate config key {key}")
        out[key] = _thaw(value)
    return out


def _check_json_value(key: str, value: Any) -> ConfigValue:
    scalars = (bool, int, float, str)
    if isinstance(value, scalars):
        return value
    if isinstance(value, list) and all(isinstance(v, scalars) for v in value):
        return list(value)
    raise ConfigError(f"{key}: unsupported JSON value {value!r}")


def parse_config_json(text: str) -> ConfigMapping:
    """Parse a JSON object; nested objects are flattened into dotted keys."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config JSON error: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"config JSON must be an object, got {type(data).__name__}")
    return {k: _check_json_value(k, v) for k, v in flatten_dot_names(data).items()}


def parse_config(text: str, is_json: bool = False) -> ConfigMapping:
    """Parse config text in either accepted encoding.

    .. doctest::

        >>> from rshelab.config.grammar import parse_config
        >>> parse_config("grid.n = 64\\nexperiment.t_grid = [0.25, 0.5]  # dyadic")
        {'grid.n': 64, 'experiment.t_grid': [0.25, 0.5]}
    """
    if is_json:
        return parse_config_json(text)
    return _to_mapping(parse_config_text(text))


def load_config(path: Union[str, "os.PathLike[str]"]) -> ConfigMapping:
    """Read a config file; ``.json`` files are parsed as JSON."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}") from e
    return parse_config(text, is_json=os.fspath(path).endswith(".json"))


def dump_config(mapping: ConfigMapping) -> List[str]:
    """Render a mapping back to ``key = value`` lines."""

    def fmt(v: ConfigScalar) -> str:
        if isinstance(v, bool):
            return "true" if v else "false"
        if isinstance(v, float):
            return repr(v)
        if isinstance(v, str):
            return json.dumps(v)
        return str(v)

    lines = []
    for key, value in mapping.items():
        if isinstance(value, list):
            lines.append(f"{key} = [{', '.join(fmt(v) for v in value)}]")
        else:
            lines.append(f"{key} = {fmt(value)}")
    return lines
