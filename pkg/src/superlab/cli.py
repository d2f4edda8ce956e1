"""Command-line entry point: ``superlab <subcommand> --config FILE``.

The config is a TOML file with the sections ``model``, ``sim``,
``experiment`` and ``output``; unknown sections or keys are rejected.
Built-in configs can be named instead of a path (``inward-ou-default``,
``outward-ou-default``, ``htransform-ou-default``).

Exit codes: 0 success, 2 configuration error, 3 capacity error,
4 acceptance failure.
"""

from __future__ import annotations

import argparse
import copy
from pathlib import Path
import sys

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import experiment as ex
from . import semigroup as sg
from .io import config_hash, write_csv, write_dict_rows
from .model import ConfigurationError, validate_model
from .particle import RNG_ID, CapacityError, SimConfig, check_epsilon
from .presets import preset
from .quadrature import QuadratureSpec
from .spatial import validate_assumption1
from .spectral import SpectralError, registry_lookup, registry_table
from .testfunctions import Smooth, ball, constant, coordinate, gaussian

EXIT_OK, EXIT_CONFIG, EXIT_CAPACITY, EXIT_FAIL = 0, 2, 3, 4

COMMANDS = ("validate", "moments", "martingale", "slln", "registry-dump", "oracle-export")

SCHEMA = {
    "model": {"preset": str, "beta": float, "a": float, "b": float, "c": float, "d": int,
              "c1": float, "c2": float, "atoms": list, "x0": list, "mass": float},
    "sim": {"epsilon": float, "max_particles": int, "seed": int, "observation_times": list,
            "engine": str},
    "experiment": {"n_paths": int, "observables": list, "workers": int, "q": float,
                   "thetas": list, "t_grid": list, "burn_in": float, "quad_order": int,
                   "oracle_points": list},
    "output": {"dir": str, "svg": bool, "trajectories": bool},
}

DEFAULTS = {
    "model": {"preset": "inward-ou"},
    "sim": {"epsilon": 0.01, "max_particles": 10_000_000, "seed": 0,
            "observation_times": [0.5, 1.0, 2.0], "engine": "auto"},
    "experiment": {"n_paths": 1000, "observables": ["one", "x1", "ball"], "workers": 0, "q": 3.0,
                   "thetas": [0.5, 1.0, 2.0], "t_grid": [1.0, 2.0, 4.0, 8.0], "burn_in": 2.0,
                   "quad_order": 64, "oracle_points": [0.0, 0.5, 1.0]},
    "output": {"dir": "out", "svg": False, "trajectories": True},
}

BUILTIN = {
    "inward-ou-default": {"model": {"preset": "inward-ou", "beta": 1.0, "a": 1.0, "b": 1.0, "c": 1.0, "d": 1}},
    "outward-ou-default": {"model": {"preset": "outward-ou", "beta": 3.0, "a": 1.0, "b": 1.0, "c": 1.0, "d": 1},
                           "sim": {"observation_times": [0.5, 1.0]},
                           "experiment": {"q": 4.0}},
    "htransform-ou-default": {"model": {"preset": "htransform-ou", "c": 3.0, "c1": 2.0, "c2": 1.0, "d": 1},
                              "sim": {"epsilon": 0.05, "observation_times": [0.5, 1.0]},
                              "experiment": {"observables": ["one", "gauss"]}},
}

MODEL_KEYS = {
    "inward-ou": {"beta", "a", "b", "c", "d", "atoms", "x0", "mass"},
    "outward-ou": {"beta", "a", "b", "c", "d", "atoms", "x0", "mass"},
    "htransform-ou": {"c", "c1", "c2", "d", "x0", "mass"},
}


def _check_type(section: str, key: str, value, typ) -> None:
    ok = isinstance(value, typ) and not (typ is int and isinstance(value, bool))
    if typ is float:
        ok = isinstance(value, (int, float)) and not isinstance(value, bool)
    if not ok:
        raise ConfigurationError(f"[{section}] {key} must be of type {typ.__name__}, got {value!r}")


def load_config(source: str | None) -> dict:
    """Merge a TOML file (or builtin name) over the defaults, validating the schema."""
    raw: dict = {}
    if source is not None:
        if source in BUILTIN and not Path(source).exists():
            raw = copy.deepcopy(BUILTIN[source])
        else:
            try:
                with open(source, "rb") as fh:
                    raw = tomllib.load(fh)
            except OSError as exc:
                raise ConfigurationError(f"cannot read config {source}: {exc}") from None
            except tomllib.TOMLDecodeError as exc:
                raise ConfigurationError(f"invalid TOML in {source}: {exc}") from None
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ConfigurationError(f"unknown config section [{section}]")
        if not isinstance(body, dict):
            raise ConfigurationError(f"[{section}] must be a table")
        for key, value in body.items():
            if key not in SCHEMA[section]:
                raise ConfigurationError(f"unknown key {key!r} in [{section}]")
            _check_type(section, key, value, SCHEMA[section][key])
    cfg = copy.deepcopy(DEFAULTS)
    for section, body in raw.items():
        cfg[section].update(body)
    name = cfg["model"]["preset"]
    if name not in MODEL_KEYS:
        raise ConfigurationError(f"unknown model preset {name!r}; choose from {sorted(MODEL_KEYS)}")
    extra = set(raw.get("model", {})) - {"preset"} - MODEL_KEYS[name]
    if extra:
        raise ConfigurationError(f"preset {name!r} does not take {sorted(extra)}")
    return cfg


def build_model(cfg: dict):
    m = dict(cfg["model"])
    name = m.pop("preset")
    if "atoms" in m:
        m["atoms"] = [tuple(a) for a in m["atoms"]]
    try:
        return preset(name, **m)
    except (TypeError, ValueError) as exc:
        raise ConfigurationError(f"invalid model parameters: {exc}") from None


def build_sim(cfg: dict) -> SimConfig:
    s = cfg["sim"]
    return SimConfig(epsilon=float(s["epsilon"]), max_particles=int(s["max_particles"]),
                     seed=int(s["seed"]), observation_times=tuple(s["observation_times"]),
                     engine=s["engine"])


def build_observables(cfg: dict, spec, quad: QuadratureSpec):
    d = spec.spatial.d
    out = []
    for name in cfg["experiment"]["observables"]:
        if name == "one":
            out.append(constant(1.0, "one"))
        elif name == "x1":
            out.append(coordinate(0, d, "x1"))
        elif name == "gauss":
            out.append(gaussian(1.0, 1.0, d=d, name="gauss"))
        elif name == "ball":
            out.append(ball([0.0] * d, 1.0, "ball"))
        elif name == "phi0":
            out.append(Smooth(registry_lookup(spec).phi0, "phi0"))
        elif name == "resolvent":
            g = gaussian(1.0, 1.0, d=d, name="gauss")
            out.append(ex.resolvent_observable(spec, cfg["experiment"]["q"], g, quad=quad, name="resolvent"))
        else:
            raise ConfigurationError(
                f"unknown observable {name!r}; choose from one, x1, gauss, ball, phi0, resolvent")
    return out


def result_config(cfg: dict) -> dict:
    """The part of the config that determines results (worker count and output location excluded)."""
    out = copy.deepcopy(cfg)
    out.pop("output", None)
    out["experiment"].pop("workers", None)
    return out


def metadata(cfg: dict, spec, command: str) -> dict:
    import hashlib

    return {
        "command": command,
        "config_hash": config_hash(result_config(cfg)),
        "model_hash": hashlib.sha256(spec.key().encode()).hexdigest()[:16],
        "model": spec.name,
        "seed": cfg["sim"]["seed"],
        "epsilon": cfg["sim"]["epsilon"],
        "max_particles": cfg["sim"]["max_particles"],
        "rng": RNG_ID,
        "version": __version__,
    }


def _records_csv(path: Path, records, meta: dict) -> None:
    rows = (row for r in records for row in r.rows())
    write_csv(path, ("path_id", "t", "observable_name", "value"), rows, meta)


def _pass_line(ok: bool, text: str) -> str:
    return f"{'PASS' if ok else 'FAIL'}  {text}"


def run(command: str, cfg: dict, svg: bool = False) -> int:
    spec = build_model(cfg)
    sim = build_sim(cfg)
    exp = cfg["experiment"]
    quad = QuadratureSpec(order=exp["quad_order"])
    out = Path(cfg["output"]["dir"])
    meta = metadata(cfg, spec, command)
    workers = exp["workers"] or None
    n_paths = exp["n_paths"]

    if command == "registry-dump":
        rows = registry_table()
        try:
            registry_lookup(spec)
            if spec.key() not in {m.key() for m in _default_keys()}:
                rows += registry_table([spec])
        except SpectralError:
            pass
        write_dict_rows(out / "registry.csv", rows, meta)
        for r in rows:
            print(f"{r['model']:>14}  lambda0={r['lambda0']:.6g}  ({r['formula']})  gap={r['gap']:g}")
        return EXIT_OK

    if command == "oracle-export":
        fs = build_observables(cfg, spec, quad)
        xs = np.asarray(exp["oracle_points"], dtype=float).reshape(-1, 1) if spec.spatial.d == 1 \
            else np.zeros((1, spec.spatial.d))
        rows = sg.oracle_rows(spec, fs, sim.observation_times, xs, quad)
        write_dict_rows(out / "oracles.csv", rows, meta, header=("model", "f", "t", "x", "quantity", "value"))
        print(f"wrote {len(rows)} oracle values to {out / 'oracles.csv'}")
        return EXIT_OK

    report = validate_model(spec)
    if command == "validate":
        a1 = validate_assumption1(spec.spatial, [0.5, 1.0, 2.0], quad)
        try:
            check_epsilon(spec, sim)
            eps_ok, eps_detail = True, "ok"
        except ConfigurationError as exc:
            eps_ok, eps_detail = False, str(exc)
        rows = [(c.name, c.passed, repr(c.value), c.detail) for c in report.checks + a1.checks]
        rows.append(("epsilon admissible", eps_ok, repr(sim.epsilon), eps_detail))
        write_csv(out / "validate.csv", ("check", "passed", "value", "detail"), rows, meta)
        for name, ok, _, detail in rows:
            print(_pass_line(ok, f"{name}: {detail}"))
        return EXIT_OK if report.passed and a1.passed and eps_ok else EXIT_FAIL

    if not report.passed:
        raise ConfigurationError("model failed validation: " +
                                 "; ".join(f"{c.name} ({c.detail})" for c in report.failures))
    check_epsilon(spec, sim)
    sd = registry_lookup(spec)

    if command == "moments":
        fs = build_observables(cfg, spec, quad)
        rep = ex.run_moment_validation(spec, sim, fs, n_paths, quad, workers)
        write_csv(out / "moments.csv", rep.header, rep.rows(), meta)
        print(rep.summary())
        ok = rep.passed
    elif command == "martingale":
        rep = ex.run_martingale_test(spec, sim, sd, n_paths, exp["t_grid"], quad, workers)
        write_csv(out / "martingale.csv", rep.header, rep.rows(), meta)
        print(rep.summary())
        ok = rep.passed
    elif command == "slln":
        fs = build_observables(cfg, spec, quad)
        recs = ex.run_paths(spec, sim, fs, sd, n_paths, workers)
        rep = ex.run_slln(spec, sim, fs, sd, n_paths, exp["burn_in"], quad, records=recs)
        write_csv(out / "slln.csv", rep.header, rep.rows(), meta)
        if cfg["output"]["trajectories"]:
            _records_csv(out / "trajectories.csv", recs, meta)
        if svg or cfg["output"]["svg"]:
            for f in fs:
                ex.plot_trajectories(recs, sd, f.name, out / f"slln_{f.name}.svg")
        print(rep.summary())
        T = sim.observation_times[-1]
        ok = not rep.degenerate and all(
            abs(rep.cell(f.name, T).ratio_z) <= 3 and abs(rep.cell(f.name, T).scaled_z) <= 3
            and (f.constant_value() is not None or rep.iqr_shrinks(f.name))
            for f in fs)
    else:
        raise ConfigurationError(f"unknown command {command!r}")
    print(_pass_line(ok, command))
    return EXIT_OK if ok else EXIT_FAIL


def _default_keys():
    from .presets import default_registry_models

    return default_registry_models()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="superlab", description=__doc__.split("\n")[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="TOML config path or builtin name (e.g. inward-ou-default)")
    p.add_argument("--seed", type=int, help="override [sim] seed")
    p.add_argument("--paths", type=int, help="override [experiment] n_paths")
    p.add_argument("--out", help="override [output] dir")
    p.add_argument("--svg", action="store_true", help="also write SVG trajectory plots")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["sim"]["seed"] = args.seed
        if args.paths is not None:
            cfg["experiment"]["n_paths"] = args.paths
        if args.out is not None:
            cfg["output"]["dir"] = args.out
        return run(args.command, cfg, args.svg)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapacityError as exc:
        when = exc.time_reached
        print(f"capacity error: {exc}" + (f" (reached t = {when:g})" if when is not None else ""),
              file=sys.stderr)
        return EXIT_CAPACITY
    except (SpectralError, sg.UnsupportedModelError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
