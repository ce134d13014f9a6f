"""Run configuration: JSON file + environment + command-line overrides.

Precedence, highest first: command-line flags, ``PRIVFED_OUTPUT_DIR`` (output
directory only), config file, built-in defaults. Unknown keys are rejected at
every nesting level.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, fields, replace

from .dp import MECHANISMS, DpConfig
from .errors import ConfigError, PrivfedError
from .federation import FederationConfig
from .gbdt import GbdtHyper
from .smote import SmoteConfig

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "PRIVFED_OUTPUT_DIR"


@dataclass(frozen=True)
class RunConfig:
    dataset_path: str | None = None
    output_dir: str = "out"
    federation: FederationConfig = field(default_factory=FederationConfig)


_TOP = {
    "schema_version", "dataset_path", "output_dir", "test_fraction", "k_clients", "rounds",
    "master_seed", "smote", "gbdt", "dp", "encryption_enabled", "decision_threshold",
}
_SECTIONS = {
    "smote": {"k_neighbors": int, "target_ratio": float},
    "gbdt": {f.name: f.type for f in fields(GbdtHyper)},
    "dp": {"mechanism": str, "epsilon": float},
}
_SCALARS = {
    "dataset_path": str, "output_dir": str, "test_fraction": float, "k_clients": int,
    "rounds": int, "master_seed": int, "encryption_enabled": bool, "decision_threshold": float,
}


def _check_type(name, value, kind):
    kind = {"int": int, "float": float, "bool": bool, "str": str}.get(kind, kind)
    if kind is bool:
        ok = isinstance(value, bool)
    elif kind is int:
        ok = isinstance(value, int) and not isinstance(value, bool)
    elif kind is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
    else:
        ok = isinstance(value, kind)
    if not ok:
        raise ConfigError(f"field {name!r}: expected {kind.__name__}, got {value!r}")
    return float(value) if kind is float else value


def parse_config(doc: dict) -> RunConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - _TOP)
    if unknown:
        raise ConfigError(f"unknown config field {unknown[0]!r}")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version!r}")

    sections = {}
    for name, spec in _SECTIONS.items():
        sub = doc.get(name, {})
        if not isinstance(sub, dict):
            raise ConfigError(f"field {name!r} must be an object")
        bad = sorted(set(sub) - set(spec))
        if bad:
            raise ConfigError(f"unknown config field {name + '.' + bad[0]!r}")
        sections[name] = {k: _check_type(f"{name}.{k}", v, spec[k]) for k, v in sub.items()}
    scalars = {k: _check_type(k, doc[k], t) for k, t in _SCALARS.items() if k in doc}

    if sections["dp"].get("mechanism", MECHANISMS[0]) not in MECHANISMS:
        raise ConfigError(f"field 'dp.mechanism' must be one of {MECHANISMS}")
    try:
        fed = FederationConfig(
            k_clients=scalars.get("k_clients", 3),
            rounds=scalars.get("rounds", 5),
            master_seed=scalars.get("master_seed", 0),
            test_fraction=scalars.get("test_fraction", 0.2),
            gbdt=GbdtHyper(**sections["gbdt"]),
            smote=SmoteConfig(**sections["smote"]),
            dp=DpConfig(**sections["dp"]),
            encryption_enabled=scalars.get("encryption_enabled", True),
            decision_threshold=scalars.get("decision_threshold", 0.5),
        ).validate()
    except ConfigError:
        raise
    except (PrivfedError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    return RunConfig(
        dataset_path=scalars.get("dataset_path"),
        output_dir=scalars.get("output_dir", "out"),
        federation=fed,
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except ValueError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return parse_config(doc)


def apply_overrides(cfg: RunConfig, *, seed=None, epsilon=None, rounds=None, no_encryption=False,
                    mechanism=None, out=None, environ=None) -> RunConfig:
    environ = os.environ if environ is None else environ
    fed = cfg.federation
    dp = fed.dp
    try:
        if epsilon is not None:
            dp = replace(dp, epsilon=epsilon)
        if mechanism is not None:
            dp = replace(dp, mechanism=mechanism)
        fed = replace(
            fed,
            dp=dp,
            master_seed=fed.master_seed if seed is None else seed,
            rounds=fed.rounds if rounds is None else rounds,
            encryption_enabled=fed.encryption_enabled and not no_encryption,
        ).validate()
    except ConfigError:
        raise
    except (PrivfedError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
    output_dir = cfg.output_dir
    if environ.get(OUTPUT_DIR_ENV):
        output_dir = environ[OUTPUT_DIR_ENV]
    if out is not None:
        output_dir = out
    return replace(cfg, federation=fed, output_dir=output_dir)


def default_config_dict() -> dict:
    fed = FederationConfig()
    return {
        "schema_version": SCHEMA_VERSION,
        "dataset_path": "diabetes.csv",
        "output_dir": "out",
        "test_fraction": fed.test_fraction,
        "k_clients": fed.k_clients,
        "rounds": fed.rounds,
        "master_seed": fed.master_seed,
        "smote": {"k_neighbors": fed.smote.k_neighbors, "target_ratio": fed.smote.target_ratio},
        "gbdt": {f.name: getattr(fed.gbdt, f.name) for f in fields(GbdtHyper)},
        "dp": {"mechanism": fed.dp.mechanism, "epsilon": fed.dp.epsilon},
        "encryption_enabled": fed.encryption_enabled,
        "decision_threshold": fed.decision_threshold,
    }
