"""Command-line experiment runner.

    presslab <subcommand> --config <path> [--seed N] [--out DIR]
             [--windows a,b,c] [--omega x] [--collar c]

Exit codes: 0 all assertions pass, 1 an assertion failed, 2 bad config,
3 an enumeration cap was exceeded.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import SUBCOMMANDS, ExperimentConfig, load_json, parse_config, config_hash
from .errors import CapExceededError, ConfigError
from .io import write_csv, write_json
from .measure import entropy_rate, pushforward_entropy, weighted_entropy_parts
from .potential import Potential
from .pressure import WeightedInstance, conditional_entropy_top, pressure_estimate
from .variational import (
    carpet_dimension,
    equilibrium_check,
    optimize,
    pressure_properties_suite,
    sandwich,
)
from .verify import run_verify

log = logging.getLogger("presslab")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_CAP = 0, 1, 2, 3


@dataclass
class RunReport:
    name: str
    provenance: dict
    results: dict = field(default_factory=dict)
    assertions: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(a["passed"] for a in self.assertions)

    def check(self, name: str, passed: bool, **witness):
        self.assertions.append({"name": name, "passed": bool(passed), "witness": witness})

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "provenance": self.provenance,
            "passed": self.passed,
            "assertions": self.assertions,
            "results": self.results,
        }


def _tag(omega: float, collar: int) -> str:
    return f"w{format(omega, 'g')}_c{collar}"


def _measure_dict(mu) -> dict:
    if mu is None:
        return {}
    if hasattr(mu, "P"):
        return {"family": "markov", "transition": mu.P.tolist(), "stationary": mu.pi.tolist()}
    return {"family": "bernoulli", "p": mu.p.tolist()}


def _instances(cfg: ExperimentConfig):
    for om in cfg.omegas:
        for c in cfg.collars:
            yield om, c, WeightedInstance(cfg.code, cfg.potential, om, c)


def do_pressure(cfg, rep, out):
    res = {}
    tol = float(cfg.expect.get("tolerance", 1e-9))
    for om, c, inst in _instances(cfg):
        pr = pressure_estimate(inst, cfg.windows)
        tag = _tag(om, c)
        write_csv(out / f"pressure_{tag}.csv", pr.csv_rows())
        res[tag] = {
            "omega": om,
            "collar": c,
            "estimates": pr.estimates,
            "fekete_bound": pr.fekete_bound,
            "spectral_bound": pr.spectral_bound,
            "upper": pr.upper,
            "stabilized": pr.stabilized,
        }
        target = _expected_pressure(cfg, om)
        if target is not None:
            if cfg.expect.get("exact_rows", False):
                worst = max(abs(e - target) for e in pr.estimates)
                rep.check(f"pressure_rows[{tag}]", worst <= tol, expected=target, worst=worst)
            else:
                rep.check(f"pressure_upper[{tag}]", abs(pr.upper - target) <= tol, expected=target, upper=pr.upper)
    rep.results["pressure"] = res


def _expected_pressure(cfg, om):
    exp = cfg.expect.get("pressure")
    if exp is None:
        return None
    if isinstance(exp, dict):
        # affine in omega: {"base": a, "slope": b}
        return float(exp["base"]) + om * float(exp.get("slope", 0.0))
    return float(exp)


def do_entropy(cfg, rep, out):
    res = {}
    top = conditional_entropy_top(cfg.code, cfg.windows, cfg.collars[0])
    write_csv(out / "conditional_entropy_top.csv", top.csv_rows())
    res["conditional_top"] = {"estimates": top.estimates, "fekete_bound": top.fekete_bound}
    if cfg.measure is not None:
        hx = entropy_rate(cfg.measure)
        hy = pushforward_entropy(cfg.measure, cfg.code, cfg.budget.entropy_window)
        res["measure"] = _measure_dict(cfg.measure)
        res["entropy_rate"] = {"value": hx.value, "kind": hx.kind}
        res["pushforward_entropy"] = {"value": hy.value, "kind": hy.kind, "lower": hy.lower}
        res["weighted"] = {}
        for om in cfg.omegas:
            w = weighted_entropy_parts(cfg.measure, cfg.code, om, cfg.budget.entropy_window)
            res["weighted"][format(om, "g")] = {"value": w.value, "lower": w.lower, "kinds": list(w.kinds)}
            rep.check(f"weighted_entropy_bounds[{format(om, 'g')}]", w.lower <= w.value + 1e-12,
                      value=w.value, lower=w.lower)
    rep.results["entropy"] = res


def _optimize_all(cfg, rep, out, cache):
    for om, c, inst in _instances(cfg):
        key = (om, c)
        if key not in cache:
            cache[key] = optimize(inst, cfg.family, cfg.budget)
            write_csv(out / f"trace_{_tag(om, c)}.csv", [["iteration", "objective"]] + cache[key].trace)
    return cache


def _opt_dict(r) -> dict:
    return {
        "measure": _measure_dict(r.best_measure),
        "params": r.params.tolist(),
        "lower_bound": r.lower_bound,
        "objective": r.value,
        "restarts": r.restarts,
        "seed": r.seed,
        "converged": r.converged,
        "entropy_kinds": list(r.entropy_kinds),
    }


def do_optimize(cfg, rep, out, cache):
    _optimize_all(cfg, rep, out, cache)
    rep.results["optimize"] = {_tag(om, c): _opt_dict(cache[(om, c)]) for om, c, _ in _instances(cfg)}
    for om, c, _ in _instances(cfg):
        target = _expected_pressure(cfg, om)
        if target is not None and "lower_tolerance" in cfg.expect:
            lb = cache[(om, c)].lower_bound
            rep.check(f"optimize_lower[{_tag(om, c)}]", abs(lb - target) <= float(cfg.expect["lower_tolerance"]),
                      expected=target, lower_bound=lb)


def do_sandwich(cfg, rep, out, cache):
    res = {}
    gap_max = float(cfg.expect.get("gap", 1e-3))
    for om, c, inst in _instances(cfg):
        tag = _tag(om, c)
        cert = sandwich(inst, cfg.windows, cfg.family, cfg.budget)
        cache[(om, c)] = cert.lower
        res[tag] = {
            "upper": cert.upper.upper,
            "fekete_bound": cert.upper.fekete_bound,
            "spectral_bound": cert.upper.spectral_bound,
            "lower": cert.lower.lower_bound,
            "gap": cert.gap,
            "measure": _measure_dict(cert.lower.best_measure),
        }
        rep.check(f"sandwich_dominance[{tag}]", cert.gap >= -1e-9, gap=cert.gap)
        rep.check(f"sandwich_gap[{tag}]", cert.gap <= gap_max, gap=cert.gap, limit=gap_max)
    rep.results["sandwich"] = res


def do_properties(cfg, rep, out):
    section = cfg.properties
    rng = np.random.default_rng(cfg.seed)
    radius = int(section.get("radius", 0))
    pairs = [
        (Potential.random(cfg.X, radius, rng), Potential.random(cfg.X, radius, rng))
        for _ in range(int(section.get("pairs", 10)))
    ]
    windows = section.get("windows", cfg.windows[-2:])
    suite = pressure_properties_suite(cfg.code, windows, pairs, section.get("omegas", cfg.omegas), cfg.collars[0])
    rep.results["properties"] = suite.summary()
    for name, c in suite.checks.items():
        rep.check(f"properties.{name}", c.passed, worst=c.worst, **c.witness)


def do_equilibrium(cfg, rep, out, cache):
    res = {}
    tol = float(cfg.expect.get("equilibrium_tolerance", 1e-6))
    for om, c, inst in _instances(cfg):
        tag = _tag(om, c)
        if cfg.measure is not None:
            mu = cfg.measure
        else:
            _optimize_all(cfg, rep, out, cache)
            mu = cache[(om, c)].best_measure
        eq = equilibrium_check(inst, mu, cfg.windows, tol=tol, seed=cfg.seed)
        res[tag] = {
            "measure": _measure_dict(mu),
            "pressure": eq.pressure,
            "objective": eq.objective,
            "defect": eq.defect,
            "is_equilibrium": eq.is_equilibrium,
            "tangent_ok": eq.tangent_ok,
        }
        rep.check(f"equilibrium_defect_nonnegative[{tag}]", eq.defect >= -1e-9, defect=eq.defect)
        if eq.tangent_ok is not None:
            rep.check(f"equilibrium_tangent[{tag}]", eq.tangent_ok, worst=eq.tangent_worst)
        if cfg.expect.get("equilibrium"):
            rep.check(f"equilibrium[{tag}]", eq.is_equilibrium, defect=eq.defect)
    rep.results["equilibrium"] = res


def do_carpet(cfg, rep, out):
    if cfg.carpet is None:
        raise ConfigError("carpet: missing section for the carpet subcommand")
    cp = cfg.carpet
    r = carpet_dimension(cp["digits"], int(cp["n"]), int(cp["m"]), cfg.budget)
    tol = float(cp.get("tolerance", 1e-3))
    rep.results["carpet"] = {
        "dimension": r.dimension,
        "oracle": r.oracle,
        "omega": r.omega,
        "measure": _measure_dict(r.result.best_measure),
    }
    rep.check("carpet_matches_oracle", abs(r.dimension - r.oracle) <= tol, dimension=r.dimension, oracle=r.oracle)
    if "expected" in cp:
        rep.check("carpet_expected", abs(r.dimension - float(cp["expected"])) <= tol,
                  dimension=r.dimension, expected=float(cp["expected"]))


def run_config(cfg: ExperimentConfig, subcommand: str | None, out: Path) -> RunReport:
    prov = {"config_hash": cfg.hash, "seed": cfg.seed, "version": __version__}
    rep = RunReport(cfg.name, prov)
    subs = cfg.subcommands if subcommand in (None, "run") else [subcommand]
    cache = {}
    for s in subs:
        if s == "pressure":
            do_pressure(cfg, rep, out)
        elif s == "entropy":
            do_entropy(cfg, rep, out)
        elif s == "optimize":
            do_optimize(cfg, rep, out, cache)
        elif s == "sandwich":
            do_sandwich(cfg, rep, out, cache)
        elif s == "properties":
            do_properties(cfg, rep, out)
        elif s == "equilibrium":
            do_equilibrium(cfg, rep, out, cache)
        elif s == "carpet":
            do_carpet(cfg, rep, out)
        else:
            raise ConfigError(f"subcommand: unknown {s!r}")
    write_json(out / "report.json", rep.as_dict())
    return rep


def verify_report(seed: int = 0, weighted_partition_impl=None, quick: bool = False) -> RunReport:
    rep = RunReport("verify", {"config_hash": None, "seed": seed, "version": __version__})
    for name, c in run_verify(seed, weighted_partition_impl, quick).items():
        rep.check(name, c.passed, worst=c.worst, count=c.count, **c.witness)
    return rep


def _overrides(args) -> dict:
    ov = {}
    if args.seed is not None:
        ov["seed"] = args.seed
    if args.windows:
        try:
            ov["windows"] = [int(x) for x in args.windows.split(",") if x.strip()]
        except ValueError:
            raise ConfigError("--windows: expected comma-separated integers") from None
    if args.omega is not None:
        ov["omega"] = [args.omega]
    if args.collar is not None:
        ov["collars"] = [args.collar]
    return ov


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="presslab", description="Weighted pressure laboratory for shifts of finite type.")
    p.add_argument("subcommand", choices=list(SUBCOMMANDS) + ["run"])
    p.add_argument("--config", help="config path or bundled config name")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--windows", help="comma-separated window sides")
    p.add_argument("--omega", type=float)
    p.add_argument("--collar", type=int)
    p.add_argument("--quick", action="store_true", help="smaller sample sizes for verify")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.subcommand == "verify":
            return _main_verify(args)
        if not args.config:
            raise ConfigError("--config: required for this subcommand")
        raw, _ = load_json(args.config)
        cfg = parse_config(raw, _overrides(args))
        out = Path(args.out or cfg.output)
        rep = run_config(cfg, args.subcommand, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceededError as exc:
        print(f"cap exceeded on {exc.window}: {exc}", file=sys.stderr)
        return EXIT_CAP
    except AssertionError as exc:
        print(f"assertion failed: {exc}", file=sys.stderr)
        return EXIT_FAIL
    _print_summary(rep)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _main_verify(args) -> int:
    seed = 0 if args.seed is None else args.seed
    if args.config:
        raw, _ = load_json(args.config)
        if not isinstance(raw, list):
            raise ConfigError("verify --config: expected a JSON list of config paths")
        rep = RunReport("verify", {"config_hash": config_hash(raw), "seed": seed, "version": __version__})
        base = Path(args.out or "presslab_out")
        for i, item in enumerate(raw):
            sub_raw, _ = load_json(item)
            cfg = parse_config(sub_raw, _overrides(args))
            r = run_config(cfg, None, base / f"{i:02d}_{cfg.name}")
            rep.results[cfg.name] = {"passed": r.passed}
            rep.assertions.extend({**a, "name": f"{cfg.name}.{a['name']}"} for a in r.assertions)
    else:
        rep = verify_report(seed, quick=args.quick)
    if args.out:
        write_json(Path(args.out) / "verify.json", rep.as_dict())
    _print_summary(rep)
    return EXIT_OK if rep.passed else EXIT_FAIL


def _print_summary(rep: RunReport):
    for a in rep.assertions:
        print(f"{'PASS' if a['passed'] else 'FAIL'}  {a['name']}")
    print(f"{rep.name}: {'all passed' if rep.passed else 'FAILED'} ({len(rep.assertions)} checks)")


if __name__ == "__main__":
    sys.exit(main())
