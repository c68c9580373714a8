"""INI-style experiment configuration.

Values are plain numbers, arithmetic over numbers and ``pi``, or bracketed
comma lists of those.  Filters live in ``[filter NAME]`` sections and are
referenced by name; the name ``1`` always means the unit filter.

    [filter lead]
    num = [9, 6*20*pi]
    den = [4, 6*20*pi]

    [filter nf]
    kind = notch
    omega = 20*pi
    beta1 = 0.02
    beta2 = 0.2
"""

from __future__ import annotations

import ast
import configparser
import math
import operator
from dataclasses import dataclass, field
from pathlib import Path

from .element import FhigsElement, FhigsParams
from .lti import StateSpace, TransferFunction, notch, tf_to_ss
from .simulator import InputSignal, SimConfig

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "parse_value",
]

_MISSING = object()

_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}
_NAMES = {"pi": math.pi, "e": math.e, "inf": math.inf}


class ConfigError(ValueError):
    """Bad or missing configuration entry; names the offending section and field."""

    def __init__(self, section: str, key: str | None, message: str):
        where = f"[{section}]" if key is None else f"[{section}] {key}"
        super().__init__(f"{where}: {message}")
        self.section = section
        self.key = key


def _eval(node: ast.AST) -> float:
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
        return float(node.value)
    if isinstance(node, ast.Name) and node.id in _NAMES:
        return _NAMES[node.id]
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left), _eval(node.right))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval(node.operand))
    raise ValueError(f"unsupported expression element {ast.dump(node)}")


def parse_value(text: str) -> float | list[float]:
    """Parse a scalar expression or a bracketed list of them."""
    tree = ast.parse(text.strip(), mode="eval").body
    if isinstance(tree, ast.List):
        return [_eval(item) for item in tree.elts]
    return _eval(tree)


@dataclass
class ExperimentConfig:
    """Parsed sections with typed accessors.

    Accessors raise :class:`ConfigError` naming the section and field, so a
    command can report the exact entry that failed.
    """

    sections: dict[str, dict[str, str]]
    source: str = "<string>"
    _tf_cache: dict[str, TransferFunction] = field(default_factory=dict, repr=False)

    def has(self, section: str, key: str | None = None) -> bool:
        if section not in self.sections:
            return False
        return key is None or key in self.sections[section]

    def _raw(self, section: str, key: str, default=_MISSING) -> str:
        if section not in self.sections:
            if default is not _MISSING:
                return default
            raise ConfigError(section, None, "missing section")
        if key not in self.sections[section]:
            if default is not _MISSING:
                return default
            raise ConfigError(section, key, "missing field")
        return self.sections[section][key]

    def string(self, section: str, key: str, default=_MISSING) -> str:
        return self._raw(section, key, default)

    def number(self, section: str, key: str, default=_MISSING) -> float:
        raw = self._raw(section, key, default)
        if not isinstance(raw, str):
            return raw
        try:
            value = parse_value(raw)
        except (SyntaxError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(section, key, f"cannot parse {raw!r}: {exc}") from None
        if isinstance(value, list):
            raise ConfigError(section, key, "expected a scalar, got a list")
        return value

    def integer(self, section: str, key: str, default=_MISSING) -> int:
        value = self.number(section, key, default)
        if value != int(value):
            raise ConfigError(section, key, f"expected an integer, got {value}")
        return int(value)

    def flag(self, section: str, key: str, default=_MISSING) -> bool:
        raw = self._raw(section, key, default)
        if isinstance(raw, bool):
            return raw
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ConfigError(section, key, f"expected a boolean, got {raw!r}")

    def numbers(self, section: str, key: str, default=_MISSING) -> list[float]:
        raw = self._raw(section, key, default)
        if not isinstance(raw, str):
            return list(raw)
        try:
            value = parse_value(raw)
        except (SyntaxError, ValueError, ZeroDivisionError) as exc:
            raise ConfigError(section, key, f"cannot parse {raw!r}: {exc}") from None
        return value if isinstance(value, list) else [value]

    def transfer_function(self, name: str) -> TransferFunction:
        """Resolve a filter reference by name."""
        name = name.strip()
        if name == "1":
            return TransferFunction([1.0], [1.0])
        if name in self._tf_cache:
            return self._tf_cache[name]
        section = f"filter {name}"
        if section not in self.sections:
            raise ConfigError(section, None, f"filter {name!r} is not defined")
        kind = self.string(section, "kind", "tf").strip().lower()
        try:
            if kind == "tf":
                tf = TransferFunction(self.numbers(section, "num"), self.numbers(section, "den"))
            elif kind == "notch":
                tf = notch(
                    self.number(section, "omega"),
                    self.number(section, "beta1"),
                    self.number(section, "beta2"),
                )
            else:
                raise ConfigError(section, "kind", f"unknown filter kind {kind!r}")
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(section, None, str(exc)) from None
        if self.flag(section, "inverse", False):
            tf = tf.inverse()
        self._tf_cache[name] = tf
        return tf

    def state_space(self, name: str) -> StateSpace:
        try:
            return tf_to_ss(self.transfer_function(name))
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(f"filter {name}", None, str(exc)) from None

    def params(self, section: str = "element") -> FhigsParams:
        try:
            return FhigsParams(
                k1=self.number(section, "k1"),
                k2=self.number(section, "k2"),
                omega_h=self.number(section, "omega_h"),
                alpha_h=self.number(section, "alpha_h", 0.0),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(section, None, str(exc)) from None

    def element(self, section: str = "element") -> FhigsElement:
        """Element with filters named by ``f1``/``f2`` (both default to ``1``)."""
        params = self.params(section)
        f1 = self.state_space(self.string(section, "f1", "1"))
        f2 = self.state_space(self.string(section, "f2", "1"))
        return FhigsElement(params, f1, f2)

    def sim(self, section: str = "sim") -> SimConfig:
        try:
            return SimConfig(
                h=self.number(section, "h", 1e-5),
                total_time=self.number(section, "total_time", 1.0),
                event_tol=self.number(section, "event_tol", 1e-10),
                decimation=self.integer(section, "decimation", 1),
                diverge_limit=self.number(section, "diverge_limit", 1e6),
            )
        except ConfigError:
            raise
        except ValueError as exc:
            raise ConfigError(section, None, str(exc)) from None

    def input_signal(self, section: str = "input") -> InputSignal:
        amplitudes = self.numbers(section, "amplitudes", [])
        omegas = self.numbers(section, "omegas", [])
        phases = self.numbers(section, "phases", [0.0] * len(amplitudes))
        if not (len(amplitudes) == len(omegas) == len(phases)):
            raise ConfigError(section, None, "amplitudes, omegas and phases differ in length")
        try:
            return InputSignal(
                amplitudes=tuple(amplitudes),
                omegas=tuple(omegas),
                phases=tuple(phases),
                step_height=self.number(section, "step_height", 0.0),
                step_time=self.number(section, "step_time", 0.0),
                step_rise=self.number(section, "step_rise", 1e-4),
            )
        except ValueError as exc:
            raise ConfigError(section, None, str(exc)) from None

    def grid(self, section: str = "sweep") -> list[float]:
        """Frequency grid: explicit ``omegas`` or a log grid ``omega_min..omega_max``."""
        if self.has(section, "omegas"):
            grid = self.numbers(section, "omegas")
        else:
            lo = self.number(section, "omega_min")
            hi = self.number(section, "omega_max")
            n = self.integer(section, "points")
            if not (0 < lo <= hi) or n < 1:
                raise ConfigError(section, None, "need 0 < omega_min <= omega_max and points >= 1")
            grid = [lo] if n == 1 else [lo * (hi / lo) ** (i / (n - 1)) for i in range(n)]
        if not grid or any(w <= 0 for w in grid):
            raise ConfigError(section, "omegas", "grid must be non-empty and positive")
        return grid


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("<file>", None, str(exc)) from None
    sections = {name: dict(parser[name]) for name in parser.sections()}
    return ExperimentConfig(sections, source)


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", None, f"cannot read {path}: {exc}") from None
    return parse_config(text, str(path))
