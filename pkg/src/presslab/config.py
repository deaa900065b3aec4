"""Experiment configuration: JSON in, validated objects out."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import ConfigError, EmptySystemError
from .measure import MarkovMeasure, ProductMeasure
from .potential import Potential
from .shiftspace import (
    BlockCode,
    ShiftSystem,
    collapse_code,
    full_shift,
    golden_mean,
    hard_square,
    identity_code,
)
from .variational import Budget
from .window import BoxWindow

SUBCOMMANDS = ("pressure", "entropy", "optimize", "sandwich", "properties", "equilibrium", "carpet", "verify")


def bundled_names() -> list:
    return sorted(p.name for p in resources.files("presslab.configs").iterdir() if p.name.endswith(".json"))


def resolve_path(path) -> tuple:
    """Return (text, source) for a file path or the name of a bundled config."""
    p = Path(path)
    if p.is_file():
        return p.read_text(encoding="utf-8"), str(p)
    name = p.name if p.name.endswith(".json") else p.name + ".json"
    res = resources.files("presslab.configs").joinpath(name)
    if res.is_file():
        return res.read_text(encoding="utf-8"), f"bundled:{name}"
    raise ConfigError(f"config: no file {path!s} and no bundled config named {name}")


def load_json(path):
    text, source = resolve_path(path)
    try:
        return json.loads(text), source
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: invalid JSON in {source}: {exc}") from None


def config_hash(raw) -> str:
    canon = json.dumps(raw, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass
class ExperimentConfig:
    name: str
    raw: dict
    systems: dict
    X: ShiftSystem
    code: BlockCode
    potential: Potential
    omegas: list
    windows: list
    collars: list
    family: str
    budget: Budget
    seed: int
    subcommands: list
    expect: dict = field(default_factory=dict)
    measure: object = None
    carpet: dict | None = None
    properties: dict = field(default_factory=dict)
    output: str = "presslab_out"

    @property
    def hash(self) -> str:
        return config_hash(self.raw)


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"{where}.{key}: missing")
    return d[key]


def build_system(section: dict, where: str) -> ShiftSystem:
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object")
    name = section.get("name", where.split(".")[-1])
    try:
        preset = section.get("preset")
        if preset == "golden_mean":
            return golden_mean()
        if preset == "hard_square":
            return hard_square()
        if preset == "full":
            return full_shift(int(_need(section, "alphabet", where)), int(section.get("d", 1)), name=name)
        if preset is not None:
            raise ConfigError(f"{where}.preset: unknown preset {preset!r}")
        d = int(section.get("d", 1))
        k = int(_need(section, "alphabet", where))
        forbidden = section.get("forbidden", [])
        return ShiftSystem(d, k, forbidden, name=name)
    except EmptySystemError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def build_code(section: dict, systems: dict, where: str = "code") -> BlockCode:
    if not isinstance(section, dict):
        raise ConfigError(f"{where}: expected an object")
    src_name = section.get("source", "X")
    if src_name not in systems:
        raise ConfigError(f"{where}.source: unknown system {src_name!r}")
    src = systems[src_name]
    preset = section.get("preset")
    try:
        if preset == "identity":
            return identity_code(src)
        if preset == "collapse":
            return collapse_code(src)
        if preset is not None:
            raise ConfigError(f"{where}.preset: unknown preset {preset!r}")
        tgt_name = section.get("target", "Y")
        if tgt_name not in systems:
            raise ConfigError(f"{where}.target: unknown system {tgt_name!r}")
        rule = _need(section, "rule", where)
        kw = {}
        if "shape" in section:
            lo, hi = section["shape"]
            kw["shape"] = BoxWindow(tuple(lo), tuple(hi))
        else:
            kw["radius"] = int(section.get("radius", 0))
        return BlockCode(src, systems[tgt_name], rule, name=section.get("name"), **kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def build_potential(section, X: ShiftSystem, where: str = "potential") -> Potential:
    if section is None:
        return Potential.constant(X, 0.0)
    if isinstance(section, (int, float)):
        return Potential.constant(X, float(section))
    try:
        if "constant" in section:
            return Potential.constant(X, float(section["constant"]))
        if "symbol_values" in section:
            return Potential.symbol_values(X, section["symbol_values"])
        r = int(section.get("radius", 0))
        if "table" in section:
            return Potential(X, r, section["table"])
        if "entries" in section:
            return Potential.from_entries(X, r, {tuple(np.ravel(p)): v for p, v in section["entries"]})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}: needs one of constant, symbol_values, table, entries")


def build_measure(section, X: ShiftSystem, where: str = "measure"):
    if section is None:
        return None
    try:
        fam = section.get("family", "bernoulli")
        if fam == "bernoulli":
            return ProductMeasure(X, _need(section, "p", where))
        if fam == "markov":
            if section.get("parry"):
                return MarkovMeasure.parry(X)
            return MarkovMeasure(X, _need(section, "transition", where), section.get("stationary"))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None
    raise ConfigError(f"{where}.family: unknown family {fam!r}")


def _float_list(v, where):
    v = v if isinstance(v, list) else [v]
    try:
        return [float(x) for x in v]
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected numbers") from None


def parse_config(raw: dict, overrides: dict | None = None) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config: top level must be an object")
    overrides = overrides or {}
    raw = dict(raw)
    for key, val in overrides.items():
        if val is not None:
            raw[key] = val
    name = str(raw.get("name", "experiment"))
    sys_specs = raw.get("systems", {"X": {"preset": "full", "alphabet": 2}})
    if not isinstance(sys_specs, dict) or not sys_specs:
        raise ConfigError("systems: expected a non-empty object")
    systems = {k: build_system(v, f"systems.{k}") for k, v in sys_specs.items()}
    if "X" not in systems:
        raise ConfigError("systems.X: missing")
    X = systems["X"]
    code = build_code(raw.get("code", {"preset": "collapse"}), systems)
    potential = build_potential(raw.get("potential"), X)
    omegas = _float_list(raw.get("omega", [1.0]), "omega")
    for om in omegas:
        if not 0.0 <= om <= 1.0:
            raise ConfigError(f"omega: {om} outside [0, 1]")
    windows = raw.get("windows", [2, 4, 6, 8])
    if not isinstance(windows, list) or not windows or not all(isinstance(w, int) and w >= 1 for w in windows):
        raise ConfigError("windows: expected a non-empty list of positive integers")
    if any(b <= a for a, b in zip(windows, windows[1:])):
        raise ConfigError("windows: must be strictly increasing")
    collars = raw.get("collars", [0])
    collars = collars if isinstance(collars, list) else [collars]
    if not all(isinstance(c, int) and c >= 0 for c in collars):
        raise ConfigError("collars: expected non-negative integers")
    family = raw.get("family", "bernoulli")
    if family not in ("bernoulli", "markov"):
        raise ConfigError(f"family: unknown family {family!r}")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        raise ConfigError("seed: expected an integer")
    bspec = raw.get("budget", {})
    try:
        budget = Budget(seed=seed, **bspec)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"budget: {exc}") from None
    subs = raw.get("subcommands", ["pressure", "sandwich"])
    for s in subs:
        if s not in SUBCOMMANDS or s == "verify":
            raise ConfigError(f"subcommands: unknown subcommand {s!r}")
    carpet = raw.get("carpet")
    if carpet is not None:
        for key in ("digits", "n", "m"):
            _need(carpet, key, "carpet")
    return ExperimentConfig(
        name=name,
        raw=raw,
        systems=systems,
        X=X,
        code=code,
        potential=potential,
        omegas=omegas,
        windows=windows,
        collars=collars,
        family=family,
        budget=budget,
        seed=seed,
        subcommands=list(subs),
        expect=dict(raw.get("expect", {})),
        measure=build_measure(raw.get("measure"), X),
        carpet=carpet,
        properties=dict(raw.get("properties", {})),
        output=str(raw.get("output", "presslab_out")),
    )


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    raw, _ = load_json(path)
    return parse_config(raw, overrides)
