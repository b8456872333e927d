"""Flat ``key = value`` scenario files checked against the bundled schema."""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .errors import InvalidArgument

PLAPLACE_CHECKS = ("oracle_error", "energy", "comparison_principle", "osc_comparison",
                   "comparison_estimate", "gluing", "oscillation", "gradient_sup", "campanato",
                   "moser", "k_sweep")
DNL_CHECKS = ("oracle_error", "harnack", "dnl_regularity", "extinction", "compact")

REQUIRED, OPTIONAL = "-", "~"


class ConfigError(InvalidArgument):
    """Schema violation; ``line`` is 1-based or ``None`` for whole-file problems."""

    def __init__(self, source: str, line: int | None, message: str):
        self.source, self.line, self.message = source, line, message
        where = f"{source}:{line}" if line is not None else source
        super().__init__(f"{where}: {message}")


@dataclass(frozen=True)
class SchemaEntry:
    key: str
    type: str
    default: object
    doc: str


@functools.lru_cache(maxsize=1)
def load_schema() -> dict:
    text = resources.files("schauderlab").joinpath("scenarios/schema.cfg").read_text()
    entries = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, typ, default, *doc = line.split(None, 3)
        if default in (REQUIRED, OPTIONAL):
            value = default
        else:
            value = parse_value(typ, default)
        entries[key] = SchemaEntry(key, typ, value, doc[0] if doc else "")
    return entries


def parse_value(typ: str, text: str):
    text = text.strip()
    if typ == "str":
        return text
    if typ == "int":
        return int(text)
    if typ == "float":
        v = float(text)
        if not math.isfinite(v):
            raise ValueError("non-finite number")
        return v
    if typ == "bool":
        low = text.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"not a boolean: {text!r}")
    if typ in ("ints", "floats"):
        conv = int if typ == "ints" else float
        parts = [s for s in (t.strip() for t in text.split(",")) if s]
        if not parts:
            raise ValueError("empty list")
        return tuple(conv(s) for s in parts)
    if typ.startswith("choice:"):
        options = typ.split(":", 1)[1].split("|")
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text
    raise ValueError(f"unknown schema type {typ!r}")


def format_value(typ: str, value) -> str:
    if typ == "bool":
        return "true" if value else "false"
    if typ == "float":
        return repr(float(value))
    if typ in ("ints", "floats"):
        return ", ".join(repr(float(v)) if typ == "floats" else str(int(v)) for v in value)
    return str(value)


@dataclass(frozen=True)
class Scenario:
    """Validated scenario; ``values`` holds explicitly set keys, ``lines`` their source lines."""

    values: tuple
    source: str = "<string>"

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.values == other.values

    def __hash__(self):
        return hash(self.values)

    @property
    def explicit(self) -> dict:
        return dict(self.values)

    def get(self, key: str, default=None):
        vals = self.explicit
        if key in vals:
            return vals[key]
        entry = load_schema().get(key)
        if entry is None:
            raise KeyError(key)
        if entry.default in (REQUIRED, OPTIONAL):
            return default
        return entry.default

    def __getitem__(self, key):
        return self.get(key)

    @property
    def id(self) -> str:
        return self.get("scenario.id")

    @property
    def kind(self) -> str:
        return self.get("scenario.kind")

    @property
    def checks(self) -> list:
        raw = self.get("checks") or ""
        return [c.strip() for c in raw.split(",") if c.strip()]

    def check_params(self, name: str) -> dict:
        prefix = f"check.{name}."
        out = {}
        for key, entry in load_schema().items():
            if key.startswith(prefix):
                out[key[len(prefix):]] = self.get(key)
        return out

    def with_values(self, **updates) -> "Scenario":
        """Copy with dotted keys replaced (use ``__`` for ``.`` in keyword names)."""
        vals = self.explicit
        for k, v in updates.items():
            vals[k.replace("__", ".")] = v
        return parse_config(Scenario(tuple(sorted(vals.items())), self.source).to_text(), self.source)

    def to_text(self) -> str:
        schema = load_schema()
        vals = self.explicit
        lines = [f"# scenario {self.id}"]
        for key, entry in schema.items():
            if key in vals:
                lines.append(f"{key} = {format_value(entry.type, vals[key])}")
        return "\n".join(lines) + "\n"


def parse_config(text: str, source: str = "<string>") -> Scenario:
    schema = load_schema()
    vals, where = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(source, lineno, f"expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in schema:
            raise ConfigError(source, lineno, f"unknown key {key!r}")
        if key in vals:
            raise ConfigError(source, lineno, f"duplicate key {key!r} (first set on line {where[key]})")
        try:
            vals[key] = parse_value(schema[key].type, value)
        except ValueError as exc:
            raise ConfigError(source, lineno, f"bad value for {key!r}: {exc}") from None
        where[key] = lineno
    scenario = Scenario(tuple(sorted(vals.items())), source)
    _validate(scenario, where, source)
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(str(path), None, f"cannot read: {exc.strerror}") from None
    return parse_config(text, str(path))


def _validate(sc: Scenario, where: dict, source: str):
    schema = load_schema()
    vals = sc.explicit

    def fail(key, msg):
        raise ConfigError(source, where.get(key), msg)

    checks = sc.checks if "scenario.kind" in vals else []
    for key, entry in schema.items():
        if entry.default != REQUIRED or key in vals:
            continue
        if key.startswith("check."):
            if key.split(".")[1] in checks:
                fail("checks", f"checker {key.split('.')[1]!r} needs {key!r}")
            continue
        fail(key, f"missing required key {key!r}")
    kind = sc.kind
    p = sc.get("problem.p")
    if not p > 1:
        fail("problem.p", "problem.p must exceed 1")
    if kind == "dnl":
        q = sc.get("problem.q")
        if q is None:
            fail("scenario.kind", "dnl scenarios need problem.q")
        if not q >= p - 1:
            fail("problem.q", "problem.q must be at least p - 1")
        if sc.get("problem.k") != 1:
            fail("problem.k", "dnl scenarios are scalar")
    mu = sc.get("problem.mu")
    if not 0 <= mu <= 1:
        fail("problem.mu", "problem.mu must lie in [0, 1]")
    if sc.get("problem.k") < 1:
        fail("problem.k", "problem.k must be positive")
    n, lo, hi = sc.get("grid.n"), sc.get("grid.lower"), sc.get("grid.upper")
    if len(lo) != len(hi) or len(lo) not in (1, 2):
        fail("grid.upper", "grid.lower and grid.upper need one or two matching entries")
    if len(n) not in (1, len(lo)):
        fail("grid.n", "grid.n needs one entry or one per axis")
    dkind = sc.get("data.kind")
    need = {"oracle": "data.oracle", "expression": "data.expression", "file": "data.file"}[dkind]
    if sc.get(need) is None:
        fail("data.kind", f"data.kind = {dkind} needs {need!r}")
    allowed = PLAPLACE_CHECKS if kind == "plaplace" else DNL_CHECKS
    for c in sc.checks:
        if c not in allowed:
            fail("checks", f"unknown checker {c!r} for kind {kind!r}")
    for key in vals:
        if key.startswith("check.") and key.split(".")[1] not in sc.checks:
            fail(key, f"{key!r} set but checker {key.split('.')[1]!r} is not listed in checks")


__all__ = ["ConfigError", "Scenario", "SchemaEntry", "load_schema", "parse_config", "load_scenario",
           "parse_value", "format_value", "PLAPLACE_CHECKS", "DNL_CHECKS"]
