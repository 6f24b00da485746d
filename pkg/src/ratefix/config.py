"""Run configuration with documented defaults and INI round-trip.

Precedence is defaults < config file < command-line flags.  The config file
is plain INI with a single ``[ratefix]`` section; its path comes from
``--config`` or the ``RATEFIX_CONFIG`` environment variable.  Unset-able
fields use the empty string (or 0 for ``year``) as their "not given" value
so every field stays a plain scalar and serializes losslessly.
"""

from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, fields, replace

CONFIG_SECTION = "ratefix"
CONFIG_ENV_VAR = "RATEFIX_CONFIG"


@dataclass(frozen=True)
class RunConfig:
    command: str = ""
    input_path: str = ""
    output_path: str = ""
    truth_output: str = ""
    tenor: str = "1M"
    dataset: str = ""
    window: str = ""
    year: int = 0
    start: str = ""
    end: str = ""
    date: str = ""
    quotes: str = ""
    trim_fraction: str = "0.25"
    publish_precision: int = 3
    min_retained: int = 1
    linkage: str = "ward"
    normalize: bool = False
    threshold_factor: float = 2.0
    format: str = "text"
    out_format: str = "newick"
    policy: str = "drop-incomplete"
    max_gap: int = 5
    min_coverage: float = 0.9
    seed: int = 0
    banks: int = 12
    days: int = 250
    base: str = "constant:3.0"
    sigma: float = 0.01
    start_date: str = "2008-01-01"
    strategies: str = ""

    def to_ini_text(self) -> str:
        parser = configparser.ConfigParser()
        parser[CONFIG_SECTION] = {}
        for spec in fields(self):
            value = getattr(self, spec.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            parser[CONFIG_SECTION][spec.name] = str(value)
        buf = io.StringIO()
        parser.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini_text(cls, text: str, source: str = "<config>") -> "RunConfig":
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ValueError(f"bad config file {source}: {exc}") from None
        if not parser.has_section(CONFIG_SECTION):
            raise ValueError(f"bad config file {source}: missing [{CONFIG_SECTION}] section")
        known = {spec.name: spec for spec in fields(cls)}
        values = {}
        for key, raw in parser[CONFIG_SECTION].items():
            if key not in known:
                raise ValueError(f"bad config file {source}: unknown key {key!r}")
            kind = known[key].type
            try:
                if kind == "bool":
                    lowered = raw.strip().lower()
                    if lowered not in ("true", "false", "1", "0", "yes", "no"):
                        raise ValueError(f"not a boolean: {raw!r}")
                    values[key] = lowered in ("true", "1", "yes")
                elif kind == "int":
                    values[key] = int(raw)
                elif kind == "float":
                    values[key] = float(raw)
                else:
                    values[key] = raw
            except ValueError as exc:
                raise ValueError(f"bad config file {source}: key {key!r}: {exc}") from None
        return cls(**values)

    def with_overrides(self, **overrides) -> "RunConfig":
        """Apply non-None overrides (command-line flags beat file values)."""
        given = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **given) if given else self
