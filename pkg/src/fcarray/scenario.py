"""Scenario configuration: defaults, JSON loading, dotted-path overrides,
validation, and the run manifest.

A scenario is one JSON document.  Every field has a default; the manifest
written next to each output CSV materializes the fully resolved configuration
so no hidden defaults influence a run.  SNR definitions (neither is given an
operational meaning by the rate/NMSE figures alone) are fixed here and echoed
into the manifest:

* downlink rate runs: snr_db = P_max * g0 / (K * sigma^2) with g0 = 1;
* estimation runs: per-antenna pre-correlation SNR = g0 * P_pilot / sigma_m^2
  with unit pilot power.
"""

from __future__ import annotations

import copy
import json

from .errors import ConfigError
from .geometry import ArrayLayout
from .impedance import DipoleModel

PACKAGE_VERSION = "0.1.0"

DEFAULTS = {
    "layout": {"M": 4, "N": 2, "d_y": 2.2, "A": 2.0, "d_min": 0.15, "f_c": 7.0e9},
    "channel": {"K": 2, "L": 15},
    "power": {"P_max_dbm": 30.0, "snr_db": 10.0},
    "load_impedance": [0.05, 50.0],
    "seeds": {"start": 0, "count": 20},
    "schemes": ["fc-optimized", "fixed-coupler", "active-only", "fully-active"],
    "sca": {
        "eps_stop": 1e-4,
        "T_max": 200,
        "alpha_schedule": "diminishing",
        "init": "uniform",
        "screen_points": 11,
    },
    "estimation": {
        "V": 4,
        "tau": 13,
        "G": 256,
        "eta": 4.0,
        "D": 400,
        "L": 3,
        "snr_db": 0.0,
        "schemes": ["centralized", "distributed"],
        "test_placements": 10,
    },
    "sweep": {
        "power_dbm": [20.0, 25.0, 30.0, 35.0],
        "users": [1, 2, 3],
        "region": [0.5, 1.0, 2.0],
        "region_n": [2, 3],
        "snr_db": [-10.0, 0.0, 10.0, 20.0],
        "pilot": [4, 13, 32],
    },
    "heatmap": {"resolution": 101, "antenna": 0},
}

RATE_SCHEMES = {"fc-optimized", "fixed-coupler", "active-only", "fully-active"}
ESTIMATION_SCHEMES = {"centralized", "distributed", "exhaustive"}


def _merge(base: dict, override: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        here = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError("unknown field", field=here)
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError("expected an object", field=here)
            out[key] = _merge(base[key], value, here)
        else:
            out[key] = value
    return out


def _set_dotted(doc: dict, dotted: str, raw: str) -> None:
    keys = dotted.split(".")
    node = doc
    for key in keys[:-1]:
        if key not in node or not isinstance(node[key], dict):
            raise ConfigError("unknown field", field=dotted)
        node = node[key]
    if keys[-1] not in node:
        raise ConfigError("unknown field", field=dotted)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    node[keys[-1]] = value


class Scenario:
    """Validated scenario with typed accessors."""

    def __init__(self, doc: dict | None = None, overrides: list[str] | None = None):
        merged = _merge(DEFAULTS, doc or {})
        for item in overrides or []:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not of the form path=value")
            dotted, raw = item.split("=", 1)
            _set_dotted(merged, dotted, raw)
        self.doc = merged
        self._validate()

    @classmethod
    def from_file(cls, path, overrides=None) -> "Scenario":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}")
        if not isinstance(doc, dict):
            raise ConfigError("config root must be a JSON object")
        return cls(doc, overrides)

    def _require(self, cond: bool, field: str, message: str) -> None:
        if not cond:
            raise ConfigError(message, field=field)

    def _validate(self) -> None:
        d = self.doc
        lay = d["layout"]
        self._require(isinstance(lay["M"], int) and lay["M"] >= 1, "layout.M", "must be an integer >= 1")
        self._require(isinstance(lay["N"], int) and lay["N"] >= 0, "layout.N", "must be an integer >= 0")
        self._require(lay["d_y"] > 0, "layout.d_y", "must be positive")
        self._require(lay["A"] > 0, "layout.A", "must be positive")
        self._require(0 < lay["d_min"] < lay["A"], "layout.d_min", "must satisfy 0 < d_min < A")
        self._require(lay["f_c"] > 0, "layout.f_c", "must be positive")
        ch = d["channel"]
        self._require(isinstance(ch["K"], int) and ch["K"] >= 1, "channel.K", "must be an integer >= 1")
        self._require(isinstance(ch["L"], int) and ch["L"] >= 1, "channel.L", "must be an integer >= 1")
        seeds = d["seeds"]
        self._require(isinstance(seeds["count"], int) and seeds["count"] >= 1,
                      "seeds.count", "must be an integer >= 1")
        for i, scheme in enumerate(d["schemes"]):
            self._require(scheme in RATE_SCHEMES, f"schemes[{i}]",
                          f"unknown scheme {scheme!r}; pick from {sorted(RATE_SCHEMES)}")
        est = d["estimation"]
        for i, scheme in enumerate(est["schemes"]):
            self._require(scheme in ESTIMATION_SCHEMES, f"estimation.schemes[{i}]",
                          f"unknown scheme {scheme!r}; pick from {sorted(ESTIMATION_SCHEMES)}")
        self._require(est["tau"] >= d["channel"]["K"], "estimation.tau", "must be >= K")
        self._require(est["V"] >= 1, "estimation.V", "must be >= 1")
        self._require(est["G"] >= 2, "estimation.G", "must be >= 2")
        self._require(est["L"] >= 1, "estimation.L", "must be >= 1")
        self._require(d["power"]["snr_db"] is not None, "power.snr_db", "required")
        load = d["load_impedance"]
        self._require(isinstance(load, list) and len(load) == 2,
                      "load_impedance", "must be [re, im] in ohms")
        hm = d["heatmap"]
        self._require(hm["resolution"] >= 5, "heatmap.resolution", "must be >= 5")
        self._require(0 <= hm["antenna"] < lay["M"], "heatmap.antenna", "must index an antenna")
        sca = d["sca"]
        self._require(sca["init"] in ("uniform", "screened"), "sca.init",
                      "must be 'uniform' or 'screened'")

    # typed accessors -----------------------------------------------------

    def layout(self, **overrides) -> ArrayLayout:
        lay = dict(self.doc["layout"])
        lay.update(overrides)
        return ArrayLayout(M=lay["M"], N=lay["N"], d_y=lay["d_y"],
                           region_side=lay["A"], d_min=lay["d_min"], f_c=lay["f_c"])

    def model(self, layout: ArrayLayout) -> DipoleModel:
        re_x, im_x = self.doc["load_impedance"]
        return DipoleModel.for_layout(layout, load_impedance=complex(re_x, im_x))

    def seeds(self) -> list[int]:
        s = self.doc["seeds"]
        return list(range(s["start"], s["start"] + s["count"]))

    @property
    def P_max(self) -> float:
        """Transmit budget in watts (config is dBm)."""
        return 10.0 ** ((self.doc["power"]["P_max_dbm"] - 30.0) / 10.0)

    def sigma2_rate(self, K: int, P_max: float | None = None) -> float:
        """User noise variance from the rate-run SNR definition."""
        P = self.P_max if P_max is None else P_max
        snr = 10.0 ** (self.doc["power"]["snr_db"] / 10.0)
        return P / (K * snr)

    @staticmethod
    def sigma2_estimation(snr_db: float) -> float:
        """Per-antenna noise variance from the pilot-run SNR definition."""
        return 10.0 ** (-snr_db / 10.0)

    def manifest(self, command: str, extra: dict | None = None) -> dict:
        doc = {
            "tool": "fcarray",
            "version": PACKAGE_VERSION,
            "command": command,
            "config": copy.deepcopy(self.doc),
            "snr_definitions": {
                "rate": "P_max * g0 / (K * sigma2), g0 = 1",
                "estimation": "g0 * P_pilot / sigma_m^2, unit pilot power",
            },
            "units": {"lengths": "meters internally; layout fields in wavelengths",
                      "power": "watts internally; config in dBm"},
        }
        if extra:
            doc.update(extra)
        return doc


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=1, sort_keys=True)
