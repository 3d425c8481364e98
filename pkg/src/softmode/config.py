"""Experiment configuration: ``[section]`` headers and ``key = value`` lines.

Every key name is unique across sections so that command-line flags map onto
keys one-to-one (``--steps 500`` sets ``schedule.steps``).
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError

# section -> key -> (type, default)
SCHEMA: dict[str, dict[str, tuple[type, object]]] = {
    "lattice": {"L": (int, 80), "d": (int, 2)},
    "patch": {
        "K": (int, 2),
        "dictionary": (str, "generated"),
        "dictionary_seed": (int, 0),
        "variant": (str, "ten"),
        "random_mass": (float, 0.1),
    },
    "schedule": {"beta": (float, 1.0), "t_max": (float, 50.0), "t_min": (float, 1e-3), "steps": (int, 2000)},
    "ensemble": {"n_traj": (int, 4), "base_seed": (int, 0), "record_every": (int, 10), "flow_convention": (str, "sde")},
    "spectral": {
        "n_max": (int, 6),
        "directions": (str, "axis-0,axis-1"),
        "shells_used": (str, "1,2,3"),
        "probe_convention": (str, "sde"),
        "mass_convention": (str, "tree-level"),
    },
    "observables": {"smoothing_width": (float, 5.0)},
    "oracle": {"oracle_L": (int, 8), "oracle_K": (int, 1), "oracle_times": (str, "0.5,1,3,5")},
    "probe": {"probe_t_min": (float, 0.05), "probe_t_max": (float, 20.0), "probe_points": (int, 60)},
    "pulse": {
        "w_pulse": (float, 1.5),
        "half_width": (float, 0.25),
        "trials": (int, 20),
        "pulse_seed": (int, 0),
        "target": (int, -1),
        "window": (str, "log-t"),
        "critical_source": (str, "theory"),
    },
    "output": {"output_dir": (str, "runs/default")},
}

KEY_SECTION = {key: section for section, keys in SCHEMA.items() for key in keys}
_ALIASES = {"seed": "base_seed"}


def _format(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _int_list(text: str, key: str) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated integers, got {text!r}", field=key) from None


def _float_list(text: str, key: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, got {text!r}", field=key) from None


@dataclass
class ExperimentConfig:
    values: dict[str, object] = field(default_factory=lambda: {k: SCHEMA[s][k][1] for k, s in KEY_SECTION.items()})

    def __getattr__(self, key):
        values = self.__dict__.get("values", {})
        if key in values:
            return values[key]
        raise AttributeError(key)

    def set(self, key: str, raw) -> None:
        key = _ALIASES.get(key, key)
        if key not in KEY_SECTION:
            raise ConfigError(f"unknown configuration key {key!r}", field=key)
        typ = SCHEMA[KEY_SECTION[key]][key][0]
        try:
            self.values[key] = typ(raw) if not isinstance(raw, str) or typ is str else typ(raw.strip())
        except ValueError:
            raise ConfigError(f"{key}: cannot parse {raw!r} as {typ.__name__}", field=key) from None

    # derived views -------------------------------------------------------
    @property
    def directions(self) -> tuple[str, ...]:
        return tuple(v.strip() for v in self.values["directions"].split(",") if v.strip())

    @property
    def shells_used(self) -> tuple[int, ...]:
        return _int_list(self.values["shells_used"], "shells_used")

    @property
    def oracle_times(self) -> tuple[float, ...]:
        return _float_list(self.values["oracle_times"], "oracle_times")

    def validate(self) -> "ExperimentConfig":
        v = self.values

        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"{key}: {msg}", field=key)

        need(v["L"] >= 1, "L", "must be a positive integer")
        need(v["d"] in (1, 2), "d", "must be 1 or 2")
        need(v["K"] >= 0, "K", "must be >= 0")
        need(2 * v["K"] + 1 <= v["L"], "K", "patch does not fit the lattice")
        need(v["variant"] in ("ten", "eighteen"), "variant", "must be 'ten' or 'eighteen'")
        need(0 < v["random_mass"] < 1, "random_mass", "must lie in (0, 1)")
        need(v["beta"] > 0, "beta", "must be positive")
        need(v["t_min"] > 0, "t_min", "must be positive")
        need(v["t_max"] > v["t_min"], "t_max", "must exceed t_min")
        need(v["steps"] >= 1, "steps", "must be >= 1")
        need(v["n_traj"] >= 1, "n_traj", "must be >= 1")
        need(v["record_every"] >= 1, "record_every", "must be >= 1")
        need(v["flow_convention"] in ("sde", "reverse-flow"), "flow_convention", "must be 'sde' or 'reverse-flow'")
        need(0 <= v["n_max"] and 2 * v["n_max"] <= v["L"], "n_max", "must lie in 0..L/2")
        allowed = ("axis-0", "axis-1", "diagonal") if v["d"] == 2 else ("axis-0",)
        need(self.directions and all(dr in allowed for dr in self.directions), "directions", f"must be drawn from {allowed}")
        shells = self.shells_used
        need(shells and all(1 <= n <= v["n_max"] for n in shells), "shells_used", "must lie in 1..n_max")
        need(v["probe_convention"] in ("sde", "main-text", "tree-level", "reverse-flow"), "probe_convention", "unknown drift convention")
        need(v["mass_convention"] in ("main-text", "tree-level", "reverse-flow"), "mass_convention", "unknown mass convention")
        need(v["smoothing_width"] >= 0, "smoothing_width", "must be >= 0")
        need(v["oracle_L"] ** v["d"] <= 4096, "oracle_L", "dense oracle limited to 4096 sites")
        need(2 * v["oracle_K"] + 1 <= v["oracle_L"], "oracle_K", "patch does not fit the oracle lattice")
        need(self.oracle_times and all(t > 0 for t in self.oracle_times), "oracle_times", "must be positive")
        need(0 < v["probe_t_min"] < v["probe_t_max"], "probe_t_min", "must satisfy 0 < probe_t_min < probe_t_max")
        need(v["probe_points"] >= 1, "probe_points", "must be >= 1")
        need(v["half_width"] > 0, "half_width", "must be positive")
        need(v["trials"] >= 1, "trials", "must be >= 1")
        need(v["window"] in ("log-t", "sigma"), "window", "must be 'log-t' or 'sigma'")
        need(v["critical_source"] in ("theory", "measured"), "critical_source", "must be 'theory' or 'measured'")
        return self

    def to_text(self) -> str:
        lines = []
        for section, keys in SCHEMA.items():
            lines.append(f"[{section}]")
            lines.extend(f"{key} = {_format(self.values[key])}" for key in keys)
            lines.append("")
        return "\n".join(lines)

    def echo_lines(self) -> list[str]:
        return [f"{key} = {_format(self.values[key])}" for section in SCHEMA for key in SCHEMA[section]]

    def as_dict(self) -> dict:
        return dict(self.values)


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, strict=True, delimiters=("=",), comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError(f"line {exc.lineno}: key outside a [section]", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        lineno = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"line {lineno}: cannot parse", line=lineno) from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise ConfigError(f"line {exc.lineno}: {exc.message if hasattr(exc, 'message') else exc}", line=exc.lineno) from None
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]", field=section)
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]", field=key)
            cfg.set(key, raw)
    return cfg.validate()


def load_config(path=None) -> ExperimentConfig:
    """Read a configuration file; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig().validate()
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"configuration file {p} does not exist")
    return parse_config(p.read_text())
