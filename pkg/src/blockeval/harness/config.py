"""Experiment configuration: schema, validation, JSON/TOML loading.

Config files describe one comparison experiment: the sampling ranges, one
block template per family, sample count, input geometry, hardware profiles
and metrics. JSON is parsed with the standard library; TOML support covers
the documented config subset (tables, arrays of tables, strings, numbers,
booleans, arrays, inline tables) because this interpreter predates
stdlib TOML support and no parser package is available here.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from ..blockir import BlockTemplate
from ..designspace import ParamRange, SamplingRanges
from ..errors import ConfigError

DEFAULT_SAMPLE_COUNT = 130
DEFAULT_METRICS = ("macs", "params", "activations")


@dataclass(frozen=True)
class FamilySpec:
    """A named model family: one block template over the shared design space."""

    name: str
    template: BlockTemplate

    def __post_init__(self) -> None:
        if not re.fullmatch(r"[A-Za-z0-9_\-]+", self.name):
            raise ConfigError(f"family name {self.name!r} must be alphanumeric/_/-")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one sampling-and-comparison run needs."""

    name: str
    families: tuple[FamilySpec, ...]
    ranges: SamplingRanges = SamplingRanges()
    sample_count: int = DEFAULT_SAMPLE_COUNT
    input_resolution: int = 160
    input_channels: int = 3
    num_classes: int = 2
    profiles: tuple[str, ...] = ()
    metrics: tuple[str, ...] = DEFAULT_METRICS
    output: str = "runs"
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.families:
            raise ConfigError("families: at least one family is required")
        names = [f.name for f in self.families]
        if len(set(names)) != len(names):
            raise ConfigError(f"families: duplicate names in {names}")
        if self.sample_count < 1:
            raise ConfigError(f"sample_count must be >= 1, got {self.sample_count}")
        if self.input_resolution < 16:
            raise ConfigError(
                f"input_resolution must be >= 16, got {self.input_resolution}"
            )
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")

    def with_overrides(self, seed: int | None = None, output: str | None = None):
        cfg = self
        if seed is not None:
            cfg = replace(cfg, seed=seed)
        if output is not None:
            cfg = replace(cfg, output=output)
        return cfg

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "seed": self.seed,
            "sample_count": self.sample_count,
            "input_resolution": self.input_resolution,
            "input_channels": self.input_channels,
            "num_classes": self.num_classes,
            "profiles": list(self.profiles),
            "metrics": list(self.metrics),
            "output": self.output,
            "ranges": {
                "depth": _range_dict(self.ranges.depth),
                "initial_width": _range_dict(self.ranges.initial_width),
                "slope": _range_dict(self.ranges.slope),
                "quantization": _range_dict(self.ranges.quantization),
            },
            "families": [
                dict(name=f.name, **f.template.to_dict()) for f in self.families
            ],
        }


def _range_dict(r: ParamRange) -> dict:
    return {"low": r.low, "high": r.high, "distribution": r.distribution}


def _parse_range(key: str, raw: Any, integral: bool = False) -> ParamRange:
    if isinstance(raw, dict):
        try:
            low, high = raw["low"], raw["high"]
        except KeyError as exc:
            raise ConfigError(f"ranges.{key}: missing {exc.args[0]!r}") from None
        dist = raw.get("distribution", "uniform")
    elif isinstance(raw, (list, tuple)) and len(raw) == 2:
        low, high = raw
        dist = "uniform"
    else:
        raise ConfigError(f"ranges.{key}: expected [low, high] or a table, got {raw!r}")
    try:
        return ParamRange(float(low), float(high), str(dist))
    except ConfigError as exc:
        raise ConfigError(f"ranges.{key}: {exc}") from None


_TEMPLATE_KEYS = {
    "conv_kind",
    "groups",
    "bottleneck",
    "bottleneck_ratio",
    "expansion",
    "use_se",
    "se_ratio",
}


def _parse_family(index: int, raw: Any) -> FamilySpec:
    if not isinstance(raw, dict):
        raise ConfigError(f"families[{index}]: expected a table, got {raw!r}")
    if "name" not in raw:
        raise ConfigError(f"families[{index}]: missing 'name'")
    unknown = set(raw) - _TEMPLATE_KEYS - {"name"}
    if unknown:
        raise ConfigError(f"families[{index}]: unknown keys {sorted(unknown)}")
    fields = {k: v for k, v in raw.items() if k != "name"}
    try:
        template = BlockTemplate.from_dict({"conv_kind": "standard", **fields})
    except (ConfigError, ValueError) as exc:
        raise ConfigError(f"families[{index}] ({raw['name']}): {exc}") from None
    return FamilySpec(name=str(raw["name"]), template=template)


def config_from_dict(data: dict) -> ExperimentConfig:
    """Build and validate a config from parsed JSON/TOML data."""
    if not isinstance(data, dict):
        raise ConfigError("config root must be a table/object")
    known = {
        "name",
        "seed",
        "sample_count",
        "input_resolution",
        "input_channels",
        "num_classes",
        "profiles",
        "metrics",
        "output",
        "ranges",
        "families",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(f"unknown config keys {sorted(unknown)}")

    ranges_raw = data.get("ranges", {})
    defaults = SamplingRanges()
    ranges = SamplingRanges(
        depth=_parse_range("depth", ranges_raw["depth"]) if "depth" in ranges_raw else defaults.depth,
        initial_width=_parse_range("initial_width", ranges_raw["initial_width"])
        if "initial_width" in ranges_raw
        else defaults.initial_width,
        slope=_parse_range("slope", ranges_raw["slope"]) if "slope" in ranges_raw else defaults.slope,
        quantization=_parse_range("quantization", ranges_raw["quantization"])
        if "quantization" in ranges_raw
        else defaults.quantization,
        seed=int(data.get("seed", 0)),
    )
    families = tuple(
        _parse_family(i, raw) for i, raw in enumerate(data.get("families", []))
    )
    return ExperimentConfig(
        name=str(data.get("name", "experiment")),
        families=families,
        ranges=ranges,
        sample_count=int(data.get("sample_count", DEFAULT_SAMPLE_COUNT)),
        input_resolution=int(data.get("input_resolution", 160)),
        input_channels=int(data.get("input_channels", 3)),
        num_classes=int(data.get("num_classes", 2)),
        profiles=tuple(str(p) for p in data.get("profiles", ())),
        metrics=tuple(str(m) for m in data.get("metrics", DEFAULT_METRICS)),
        output=str(data.get("output", "runs")),
        seed=int(data.get("seed", 0)),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    """Load a config file; .toml parses as TOML, everything else as JSON."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if path.suffix.lower() == ".toml":
        data = parse_mini_toml(text)
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    return config_from_dict(data)


# --- minimal TOML subset ---------------------------------------------------

_BARE_KEY = re.compile(r"[A-Za-z0-9_\-]+$")


def _toml_scalar(token: str, lineno: int) -> Any:
    token = token.strip()
    if token.startswith('"') and token.endswith('"') and len(token) >= 2:
        body = token[1:-1]
        return re.sub(
            r"\\(.)",
            lambda m: {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(m.group(1), m.group(1)),
            body,
        )
    if token == "true":
        return True
    if token == "false":
        return False
    try:
        return int(token)
    except ValueError:
        pass
    try:
        return float(token)
    except ValueError:
        raise ConfigError(f"TOML line {lineno}: cannot parse value {token!r}") from None


def _split_items(body: str, lineno: int) -> list[str]:
    """Split a bracketed body on top-level commas, respecting nesting."""
    items: list[str] = []
    depth = 0
    current = ""
    in_string = False
    for ch in body:
        if in_string:
            current += ch
            if ch == '"' and not current.endswith('\\"'):
                in_string = False
            continue
        if ch == '"':
            in_string = True
            current += ch
        elif ch in "[{":
            depth += 1
            current += ch
        elif ch in "]}":
            depth -= 1
            current += ch
        elif ch == "," and depth == 0:
            if current.strip():
                items.append(current.strip())
            current = ""
        else:
            current += ch
    if in_string or depth != 0:
        raise ConfigError(f"TOML line {lineno}: unterminated array, table or string")
    if current.strip():
        items.append(current.strip())
    return items


def _toml_value(token: str, lineno: int) -> Any:
    token = token.strip()
    if token.startswith("[") and token.endswith("]"):
        return [_toml_value(item, lineno) for item in _split_items(token[1:-1], lineno)]
    if token.startswith("{") and token.endswith("}"):
        table = {}
        for item in _split_items(token[1:-1], lineno):
            if "=" not in item:
                raise ConfigError(f"TOML line {lineno}: inline table needs key = value")
            key, _, value = item.partition("=")
            key = key.strip()
            if not _BARE_KEY.match(key):
                raise ConfigError(f"TOML line {lineno}: bad key {key!r}")
            table[key] = _toml_value(value, lineno)
        return table
    return _toml_scalar(token, lineno)


def _strip_comment(line: str) -> str:
    out = ""
    in_string = False
    for ch in line:
        if ch == '"' and not out.endswith("\\"):
            in_string = not in_string
        if ch == "#" and not in_string:
            break
        out += ch
    return out


def parse_mini_toml(text: str) -> dict:
    """Parse the TOML subset used by config files.

    Supports [tables], nested [a.b] tables, [[arrays of tables]], and
    ``key = value`` pairs with strings, numbers, booleans, inline tables
    and (possibly multiline) arrays. Dates and dotted keys are out of
    scope.
    """
    root: dict[str, Any] = {}
    current = root
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        lineno = i + 1
        line = _strip_comment(lines[i]).strip()
        i += 1
        if not line:
            continue
        if line.startswith("[[") and line.endswith("]]"):
            name = line[2:-2].strip()
            target = root
            parts = name.split(".")
            for part in parts[:-1]:
                target = target.setdefault(part, {})
            arr = target.setdefault(parts[-1], [])
            if not isinstance(arr, list):
                raise ConfigError(f"TOML line {lineno}: {name} is not an array of tables")
            current = {}
            arr.append(current)
            continue
        if line.startswith("[") and line.endswith("]"):
            name = line[1:-1].strip()
            target = root
            for part in name.split("."):
                if not _BARE_KEY.match(part):
                    raise ConfigError(f"TOML line {lineno}: bad table name {name!r}")
                target = target.setdefault(part, {})
                if not isinstance(target, dict):
                    raise ConfigError(f"TOML line {lineno}: {name} is not a table")
            current = target
            continue
        if "=" not in line:
            raise ConfigError(f"TOML line {lineno}: expected key = value")
        key, _, value = line.partition("=")
        key = key.strip()
        if not _BARE_KEY.match(key):
            raise ConfigError(f"TOML line {lineno}: bad key {key!r}")
        value = value.strip()
        # multiline array: keep consuming lines until brackets balance
        while value.count("[") > value.count("]"):
            if i >= len(lines):
                raise ConfigError(f"TOML line {lineno}: unterminated array")
            value += " " + _strip_comment(lines[i]).strip()
            i += 1
        current[key] = _toml_value(value, lineno)
    return root
