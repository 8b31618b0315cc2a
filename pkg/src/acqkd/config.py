"""Run configuration files.

Flat ``key = value`` INI text::

    [run]       n_pulses, seed, workers, transcript
    [channel]   preset (10km | 20km), mu (comma list), pulse_rate, eta_t,
                loss_db, contrast, backscatter_rate_d0, backscatter_rate_d1, mu_ref
    [detector]  eta_b, dark_rate_d0, dark_rate_d1
    [protocol]  row_lengths (comma list), subset_stop_rounds, n_checks, timeout
    [security]  estimator (bb84 | lutkenhaus | gh), safety

Unknown sections or keys are errors: a misspelled physics parameter must
never fall back to a default silently.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, replace

from .errors import QKDError
from .linkmodel import ChannelParams, DetectorParams, preset
from .pipeline import RunConfig

SCHEMA = {
    "run": {"n_pulses": int, "seed": int, "workers": int, "transcript": str},
    "channel": {
        "preset": str, "mu": "floats", "pulse_rate": float, "eta_t": float, "loss_db": float,
        "contrast": float, "backscatter_rate_d0": float, "backscatter_rate_d1": float, "mu_ref": float,
    },
    "detector": {"eta_b": float, "dark_rate_d0": float, "dark_rate_d1": float},
    "protocol": {"row_lengths": "ints", "subset_stop_rounds": int, "n_checks": int, "timeout": float},
    "security": {"estimator": str, "safety": int},
}


class ConfigError(QKDError):
    pass


@dataclass(frozen=True)
class LoadedConfig:
    run: RunConfig
    timeout: float = 30.0
    transcript: str | None = None


def _convert(kind, raw, where):
    try:
        if kind == "floats":
            return tuple(float(v) for v in raw.split(",") if v.strip())
        if kind == "ints":
            return tuple(int(v) for v in raw.split(",") if v.strip())
        if kind is int:
            return int(raw, 0)
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{where}: cannot parse {raw!r}") from None


def parse_config(text: str, source: str = "<config>") -> LoadedConfig:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None

    vals = {}
    for section in cp.sections():
        if section not in SCHEMA:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in SCHEMA[section]:
                raise ConfigError(f"{source}: unknown key {key!r} in [{section}]")
            vals[(section, key)] = _convert(SCHEMA[section][key], raw, f"{source} [{section}] {key}")

    def get(sec, key, default=None):
        return vals.get((sec, key), default)

    try:
        name = get("channel", "preset")
        ch, det = preset(name) if name else (ChannelParams(), DetectorParams())
        ch_kw = {k: get("channel", k) for k in
                 ("pulse_rate", "eta_t", "contrast", "backscatter_rate_d0", "backscatter_rate_d1", "mu_ref")
                 if get("channel", k) is not None}
        if get("channel", "loss_db") is not None:
            if "eta_t" in ch_kw:
                raise ConfigError(f"{source}: give eta_t or loss_db, not both")
            ch_kw["eta_t"] = 10 ** (-get("channel", "loss_db") / 10)
        ch = replace(ch, **ch_kw)
        det = replace(det, **{k: get("detector", k) for k in ("eta_b", "dark_rate_d0", "dark_rate_d1")
                              if get("detector", k) is not None})
        kw = dict(channel=ch, detector=det)
        for sec, key, field_name in (
            ("channel", "mu", "mu_list"), ("run", "n_pulses", "n_pulses"), ("run", "seed", "seed"),
            ("run", "workers", "workers"), ("protocol", "row_lengths", "row_lengths"),
            ("protocol", "subset_stop_rounds", "subset_stop_rounds"), ("protocol", "n_checks", "n_checks"),
            ("security", "estimator", "estimator"), ("security", "safety", "safety"),
        ):
            if get(sec, key) is not None:
                kw[field_name] = get(sec, key)
        if name == "20km" and "row_lengths" not in kw:
            kw["row_lengths"] = (12, 18, 27)
        run = RunConfig(**kw)
    except ConfigError:
        raise
    except (QKDError, ValueError, TypeError) as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return LoadedConfig(run, get("protocol", "timeout", 30.0), get("run", "transcript"))


def load_config(path) -> LoadedConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, str(path))
