"""Scenario documents: flat INI files with a ``[scenario]`` and an ``[overrides]`` section.

Keys carry their unit as a suffix. Powers are given in dBm, the SINR
threshold and pathloss constant in dB (``pathloss_constant`` without suffix
is linear), times in seconds, distances in metres. Per-link-family settings
use dotted keys such as ``due_direct.shadow_std_db = 3``. Everything in
``[overrides]`` replaces the matching ``[scenario]`` key, which is how sweeps
derive their grid points.
"""
from __future__ import annotations

import configparser
import re
from pathlib import Path

from .channel import FAMILIES, ScenarioConfig, db_to_linear, dbm_to_watts


class ScenarioFileError(ValueError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = f"{path or '<scenario>'}:{line}: " if line else f"{path or '<scenario>'}: "
        super().__init__(where + message)


def _int(v):
    return int(v)


def _float(v):
    return float(v)


def _rates(v):
    parts = [p for p in re.split(r"[,\s]+", v.strip()) if p]
    vals = tuple(float(p) for p in parts)
    return vals[0] if len(vals) == 1 else vals


# key -> (config field, converter)
KEYS = {
    "num_cues": ("num_cues", _int),
    "num_dues": ("num_dues", _int),
    "slot_length_s": ("slot_length", _float),
    "slots_per_block": ("slots_per_block", _int),
    "pathloss_constant": ("pathloss_constant", _float),
    "pathloss_constant_db": ("pathloss_constant", lambda v: float(db_to_linear(float(v)))),
    "decay_exponent": ("decay_exponent", _float),
    "shadow_std_db": ("shadow_std_db", _float),
    "noise_power_dbm": ("noise_power", lambda v: float(dbm_to_watts(float(v)))),
    "sinr_threshold_db": ("sinr_threshold", lambda v: float(db_to_linear(float(v)))),
    "latency_bound_s": ("latency_bound", _float),
    "capacity_floor_bpshz": ("capacity_floor", _float),
    "capacity_floor_bps": ("capacity_floor_bps", _float),
    "bandwidth_hz": ("bandwidth", _float),
    "max_power_cue_dbm": ("max_power_cue", lambda v: float(dbm_to_watts(float(v)))),
    "max_power_due_dbm": ("max_power_due", lambda v: float(dbm_to_watts(float(v)))),
    "arrival_rate": ("arrival_rates", _rates),
    "cell_radius_m": ("cell_radius", _float),
    "num_lanes": ("num_lanes", _int),
    "lane_width_m": ("lane_width", _float),
    "road_offset_m": ("road_offset", _float),
    "bs_height_m": ("bs_height", _float),
    "vehicle_height_m": ("vehicle_height", _float),
    "vehicle_speed_kmh": ("vehicle_speed", lambda v: float(v) / 3.6),
    "headway_s": ("headway", _float),
    "rng_seed": ("rng_seed", _int),
}
FAMILY_KEYS = {
    "pathloss_constant": KEYS["pathloss_constant"],
    "pathloss_constant_db": KEYS["pathloss_constant_db"],
    "decay_exponent": KEYS["decay_exponent"],
    "shadow_std_db": KEYS["shadow_std_db"],
}
REQUIRED = ("num_cues", "num_dues", "slot_length", "pathloss_constant", "decay_exponent",
            "shadow_std_db", "noise_power", "sinr_threshold", "latency_bound",
            "max_power_cue", "max_power_due", "arrival_rates")


def _line_of(text, section, key):
    """1-based line of ``key`` inside ``[section]``, or None."""
    current = None
    pat = re.compile(rf"^\s*{re.escape(key)}\s*[=:]", re.IGNORECASE)
    for i, raw in enumerate(text.splitlines(), start=1):
        m = re.match(r"^\s*\[([^\]]+)\]", raw)
        if m:
            current = m.group(1).strip()
        elif current == section and pat.match(raw):
            return i
    return None


def _convert(entries, text, path):
    """entries: list of (section, key, raw value). Returns ScenarioConfig kwargs."""
    kwargs, overrides, lines = {}, {}, {}
    floor_bps = None
    for section, key, raw in entries:
        line = _line_of(text, section, key)
        if "." in key:
            fam, sub = key.split(".", 1)
            if fam not in FAMILIES or sub not in FAMILY_KEYS:
                raise ScenarioFileError(f"unknown key {key!r}", line, path)
            field, conv = FAMILY_KEYS[sub]
            target = overrides.setdefault(fam, {})
            line_key = f"{fam}.{field}"
        else:
            if key not in KEYS:
                raise ScenarioFileError(f"unknown key {key!r}", line, path)
            field, conv = KEYS[key]
            target = kwargs
            line_key = field
        try:
            value = conv(raw)
        except ValueError:
            raise ScenarioFileError(f"cannot parse {key} = {raw!r}", line, path) from None
        if field == "capacity_floor_bps":
            floor_bps = (value, line)
            continue
        target[field] = value
        lines[line_key] = line
    if floor_bps is not None:
        if "capacity_floor" in kwargs:
            raise ScenarioFileError(
                "give either capacity_floor_bps or capacity_floor_bpshz, not both", floor_bps[1], path
            )
        bw = kwargs.get("bandwidth", ScenarioConfig.__dataclass_fields__["bandwidth"].default)
        kwargs["capacity_floor"] = floor_bps[0] / bw
        lines["capacity_floor"] = floor_bps[1]
    kwargs.setdefault("capacity_floor", 0.0)
    missing = [f for f in REQUIRED if f not in kwargs]
    if missing:
        raise ScenarioFileError(f"missing required settings: {', '.join(missing)}", None, path)
    if overrides:
        kwargs["family_overrides"] = overrides
    return kwargs, lines


def parse_scenario(text, path=None, overrides=None) -> ScenarioConfig:
    """Parse a scenario document; ``overrides`` (key -> string) win over the file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text, source=str(path or "<scenario>"))
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioFileError("setting outside of any [section]", exc.lineno, path) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ScenarioFileError("malformed line", line, path) from None
    except configparser.DuplicateOptionError as exc:
        raise ScenarioFileError(f"duplicate key {exc.option!r}", exc.lineno, path) from None
    except configparser.DuplicateSectionError as exc:
        raise ScenarioFileError(f"duplicate section [{exc.section}]", exc.lineno, path) from None
    for section in cp.sections():
        if section not in ("scenario", "overrides"):
            raise ScenarioFileError(f"unknown section [{section}]", _line_of_section(text, section), path)
    if not cp.has_section("scenario"):
        raise ScenarioFileError("missing [scenario] section", None, path)

    merged = {k: ("scenario", v) for k, v in cp.items("scenario")}
    if cp.has_section("overrides"):
        merged.update({k: ("overrides", v) for k, v in cp.items("overrides")})
    for k, v in (overrides or {}).items():
        merged[k] = ("<command line>", str(v))
    entries = [(sec, key, raw) for key, (sec, raw) in merged.items()]
    kwargs, lines = _convert(entries, text, path)
    try:
        return ScenarioConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        msg = str(exc)
        first = msg.split(":", 1)[0]
        line = lines.get(first)
        raise ScenarioFileError(msg, line, path) from None


def _line_of_section(text, section):
    for i, raw in enumerate(text.splitlines(), start=1):
        if re.match(rf"^\s*\[{re.escape(section)}\]", raw):
            return i
    return None


def load_scenario(path, overrides=None) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioFileError(f"cannot read file: {exc.strerror}", None, path) from None
    return parse_scenario(text, path=path, overrides=overrides)


def default_scenario_path():
    return Path(__file__).with_name("data") / "highway.ini"
