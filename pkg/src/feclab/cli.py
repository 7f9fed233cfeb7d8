"""Command-line entry point.

Single process, no services: parse and validate the experiment config (all
problems reported at once, not just the first), run the pipeline with BLAS
pinned to one thread, and write reports that are byte-identical across runs
and thread-count environments.

Exit codes: 0 success, 1 pipeline error, 2 invalid usage or config.  Errors
go to standard error as one machine-readable line `error: Kind: message`.
"""

# Pin BLAS pools before anything pulls numpy in; combined with the runtime
# threadpool limit below this makes reports independent of the inherited
# *_NUM_THREADS environment.
import os

for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
             "NUMEXPR_NUM_THREADS", "VECLIB_MAXIMUM_THREADS"):
    os.environ[_var] = "1"

import sys
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from threadpoolctl import threadpool_limits

from .approximation import (INTERPOLANT_NAMES, PROBLEM_NAMES,
                            commuting_residual, convergence_report,
                            quasi_interpolant)
from .crime import CrimeConfig, run_crime_experiment
from .errors import ConfigError, FeclabError
from .fields import (fe_ref_field, pullback_form, sphere_commuting_catalog,
                     torus_commuting_catalog)
from .geometry import (APPROX_NAMES, identity_theta, mass_weight,
                       metric_catalog, radial_theta)
from .mesh import GEOMETRY_NAMES, build_level, shape_regularity
from .reporting import (CONVERGE_COLUMNS, CRIME_COLUMNS,
                        INTERP_CHECK_COLUMNS, SOLVE_COLUMNS,
                        crime_report_rows, error_report_rows, fmt17,
                        format_cell, write_csv)
from .solver import (LOAD_NAMES, assemble_mixed, de_rham_spaces,
                     load_catalog, solve_mixed)
from .whitney import FESpace

__all__ = ["main", "parse_config", "run", "ExperimentConfig"]

COMMANDS = ("mesh-info", "solve", "converge", "crime", "interp-check")
TRANSFER_NAMES = ("interp", "l2-projection")
METRIC_NAMES = {
    "torus3": ("flat", "perturbed", "pw-constant", "pw-linear"),
    "sphere2": ("flat", "round-pullback", "pw-constant", "pw-linear"),
}

# flags each command accepts (besides --config); True marks required ones
_FLAGS = {
    "mesh-info": {"geometry": True, "level": True},
    "solve": {"geometry": True, "level": True, "metric": False,
              "load": True, "out": True, "eps": False, "degree": False},
    "converge": {"geometry": True, "levels": True, "metric": False,
                 "problem": True, "interpolant": False, "out": True,
                 "eps": False, "degree": False},
    "crime": {"geometry": True, "approx": True, "levels": True,
              "load": False, "transfer": False, "out": True,
              "eps": False, "degree": False},
    "interp-check": {"geometry": True, "level": True, "seed": False,
                     "out": False},
}


@dataclass(frozen=True)
class ExperimentConfig:
    """One validated CLI invocation."""

    command: str
    geometry: str
    level: int = 1
    levels: int = 1
    metric: str = "flat"
    problem: str = "sines"
    load: Optional[str] = None
    interpolant: str = "galerkin"
    approx: str = "flat"
    transfer: str = "l2-projection"
    eps: float = 0.3
    degree: int = 5
    seed: int = 0
    out: Optional[str] = None


def _read_config_file(path: str, problems: list) -> dict:
    """`key = value` per line; blank lines and # comments ignored."""
    pairs = {}
    try:
        with open(path, "r") as handle:
            text = handle.read()
    except OSError as exc:
        problems.append(f"cannot read config file {path}: {exc}")
        return pairs
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            problems.append(
                f"{path}:{lineno}: expected `key = value`, got '{line}'")
            continue
        key, _, value = line.partition("=")
        pairs[key.strip()] = value.strip()
    return pairs


def _parse_flags(argv, problems: list) -> dict:
    pairs = {}
    i = 0
    while i < len(argv):
        token = argv[i]
        if not token.startswith("--"):
            problems.append(f"unexpected positional argument '{token}'")
            i += 1
            continue
        key = token[2:]
        if i + 1 >= len(argv):
            problems.append(f"flag --{key} is missing its value")
            break
        pairs[key] = argv[i + 1]
        i += 2
    return pairs


def _as_int(pairs, key, problems, minimum):
    raw = pairs[key]
    try:
        value = int(raw)
    except ValueError:
        problems.append(f"--{key} wants an integer, got '{raw}'")
        return None
    if value < minimum:
        problems.append(f"--{key} must be >= {minimum}, got {value}")
        return None
    return value


def _as_float(pairs, key, problems):
    raw = pairs[key]
    try:
        return float(raw)
    except ValueError:
        problems.append(f"--{key} wants a number, got '{raw}'")
        return None


def _check_name(value, catalog, key, problems):
    if value not in catalog:
        problems.append(
            f"unknown {key} '{value}'; catalog: {', '.join(catalog)}")
        return False
    return True


def parse_config(argv) -> ExperimentConfig:
    """Validate an argument vector into a config.

    Raises ConfigError carrying every problem found, not only the first.
    """
    problems: list = []
    if not argv:
        raise ConfigError(
            [f"missing command; catalog: {', '.join(COMMANDS)}"])
    command, rest = argv[0], list(argv[1:])
    if command not in COMMANDS:
        raise ConfigError(
            [f"unknown command '{command}'; catalog: {', '.join(COMMANDS)}"])

    flags = _parse_flags(rest, problems)
    if "config" in flags:
        file_pairs = _read_config_file(flags.pop("config"), problems)
        for key, value in file_pairs.items():
            flags.setdefault(key, value)

    allowed = _FLAGS[command]
    for key in sorted(flags):
        if key not in allowed:
            problems.append(
                f"flag --{key} is not valid for {command}; valid flags: "
                + ", ".join("--" + name for name in sorted(allowed)))
    for key, required in sorted(allowed.items()):
        if required and key not in flags:
            problems.append(f"{command} requires --{key}")

    values = {"command": command}
    geometry = flags.get("geometry")
    if geometry is not None:
        if _check_name(geometry, GEOMETRY_NAMES, "geometry", problems):
            values["geometry"] = geometry
        geometry = values.get("geometry")

    if "level" in flags and "level" in allowed:
        minimum = 0 if command in ("mesh-info", "interp-check") else 1
        level = _as_int(flags, "level", problems, minimum)
        if level is not None:
            values["level"] = level
    if "levels" in flags and "levels" in allowed:
        levels = _as_int(flags, "levels", problems, 1)
        if levels is not None:
            values["levels"] = levels
    if "degree" in flags and "degree" in allowed:
        degree = _as_int(flags, "degree", problems, 5 if command in
                         ("converge", "crime", "solve") else 1)
        if degree is not None:
            values["degree"] = degree
    if "seed" in flags and "seed" in allowed:
        seed = _as_int(flags, "seed", problems, 0)
        if seed is not None:
            values["seed"] = seed
    if "eps" in flags and "eps" in allowed:
        eps = _as_float(flags, "eps", problems)
        if eps is not None:
            values["eps"] = eps

    if "metric" in flags and "metric" in allowed and geometry:
        if _check_name(flags["metric"], METRIC_NAMES[geometry],
                       f"metric for {geometry}", problems):
            values["metric"] = flags["metric"]
    if "problem" in flags and "problem" in allowed and geometry:
        if _check_name(flags["problem"], PROBLEM_NAMES[geometry],
                       f"problem for {geometry}", problems):
            values["problem"] = flags["problem"]
    if "load" in flags and "load" in allowed and geometry:
        if _check_name(flags["load"], LOAD_NAMES[geometry],
                       f"load for {geometry}", problems):
            values["load"] = flags["load"]
    if "interpolant" in flags and "interpolant" in allowed:
        if _check_name(flags["interpolant"], INTERPOLANT_NAMES,
                       "interpolant", problems):
            values["interpolant"] = flags["interpolant"]
    if "approx" in flags and "approx" in allowed:
        if _check_name(flags["approx"], APPROX_NAMES, "approximation scheme",
                       problems):
            values["approx"] = flags["approx"]
    if "transfer" in flags and "transfer" in allowed:
        if _check_name(flags["transfer"], TRANSFER_NAMES, "transfer choice",
                       problems):
            values["transfer"] = flags["transfer"]
    if "out" in flags and "out" in allowed:
        values["out"] = flags["out"]

    if command == "converge":
        interpolant = values.get("interpolant", "galerkin")
        if interpolant == "galerkin":
            if values.get("geometry") == "sphere2":
                problems.append(
                    "converge --interpolant galerkin needs torus3 (the "
                    "manufactured solutions live there); sphere2 supports "
                    "canonical and quasi")
            elif values.get("metric", "flat") != "flat":
                problems.append(
                    "converge --interpolant galerkin needs --metric flat "
                    "(the manufactured solutions solve the flat problem)")

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(**values)


def _theta(cx):
    return radial_theta(cx) if cx.geometry == "sphere2" else identity_theta(cx)


def _run_mesh_info(config: ExperimentConfig, stdout) -> None:
    cx = build_level(config.geometry, config.level)
    reg = shape_regularity(cx)
    lines = [
        f"geometry {cx.geometry}",
        f"level {config.level}",
        f"dim {cx.dim}",
    ]
    for k in range(cx.dim + 1):
        lines.append(f"num_simplices_{k} {cx.num_simplices(k)}")
    lines.append(f"euler {cx.euler_characteristic()}")
    lines.append("betti " + " ".join(str(b) for b in cx.betti))
    lines.append(f"h_max {fmt17(reg.h_max)}")
    lines.append(f"h_min {fmt17(reg.h_min)}")
    lines.append(f"volume_ratio {fmt17(reg.volume_ratio)}")
    lines.append(f"c_map {fmt17(reg.c_map)}")
    lines.append(f"c_inverse {fmt17(reg.c_inverse)}")
    stdout.write("\n".join(lines) + "\n")


def _run_solve(config: ExperimentConfig, stdout) -> None:
    cx = build_level(config.geometry, config.level)
    metric = metric_catalog(cx, config.metric, config.eps)
    load = pullback_form(_theta(cx),
                         load_catalog(config.geometry, config.load))
    spaces = de_rham_spaces(cx)[:3]
    system = assemble_mixed(spaces, metric, degree=config.degree)
    solution = solve_mixed(system, load, degree=config.degree)
    rows = []
    for name, vec in (("u", solution.u), ("z", solution.z),
                      ("p", solution.p)):
        rows.extend((name, i, float(v)) for i, v in enumerate(vec))
    comments = [
        f"solve geometry={config.geometry} level={config.level} "
        f"metric={config.metric} load={config.load}",
        "dof order: u = edge coefficients (edges oriented by their "
        "canonical covering-label order), z = vertex coefficients, "
        "p = harmonic multipliers",
        f"residual={fmt17(solution.residual)} "
        f"stability_ratio={fmt17(solution.stability_ratio)}",
    ]
    write_csv(config.out, SOLVE_COLUMNS, rows, comments)
    stdout.write(f"wrote {config.out} ({len(rows)} coefficients)\n")


def _run_converge(config: ExperimentConfig, stdout) -> None:
    report = convergence_report(config.geometry, config.problem,
                                config.levels, config.interpolant,
                                config.metric, config.eps, config.degree)
    comments = [
        f"converge geometry={config.geometry} problem={config.problem} "
        f"metric={config.metric} interpolant={config.interpolant} "
        f"levels={config.levels}",
    ]
    write_csv(config.out, CONVERGE_COLUMNS, error_report_rows(report),
              comments)
    stdout.write(f"wrote {config.out} ({config.levels} levels)\n")


def _run_crime(config: ExperimentConfig, stdout) -> None:
    crime_config = CrimeConfig(geometry=config.geometry, approx=config.approx,
                               levels=config.levels, load_name=config.load,
                               transfer=config.transfer, eps=config.eps,
                               degree=config.degree)
    report = run_crime_experiment(crime_config)
    comments = [
        f"crime geometry={config.geometry} approx={config.approx} "
        f"levels={config.levels} load={crime_config.resolved_load()} "
        f"transfer={config.transfer} eps={fmt17(config.eps)}",
        f"bound_constant={fmt17(report.bound_constant)}",
    ]
    write_csv(config.out, CRIME_COLUMNS, crime_report_rows(report), comments)
    stdout.write(f"wrote {config.out} ({config.levels} levels)\n")


def _run_interp_check(config: ExperimentConfig, stdout) -> None:
    cx = build_level(config.geometry, config.level)
    metric = metric_catalog(cx, "flat", config.eps)
    theta = _theta(cx)
    catalog = (torus_commuting_catalog() if config.geometry == "torus3"
               else sphere_commuting_catalog())
    rows = []
    for form in catalog:
        ref = pullback_form(theta, form)
        if ref.degree < cx.dim:
            rows.append(("commuting-canonical", form.name, ref.degree,
                         commuting_residual(cx, ref)))
        if ref.degree == 1:
            rows.append(("commuting-quasi", form.name, 1,
                         commuting_residual(cx, ref, "quasi", metric)))

    # patch-projection idempotence on a seeded FE field
    rng = np.random.default_rng(config.seed)
    space = FESpace(cx, 1)
    coeffs = rng.standard_normal(space.num_dofs)
    back = quasi_interpolant(space, fe_ref_field(space, coeffs), metric)
    scale = float(np.abs(coeffs).max())
    rows.append(("idempotence-quasi", "seeded-fe-field", 1,
                 float(np.abs(back - coeffs).max() / scale)))

    # mass-weight scaling on a seeded SPD matrix: G -> cG multiplies the
    # k-form weight by c^(n/2 - k)
    base = rng.standard_normal((cx.dim, cx.dim))
    spd = base @ base.T + cx.dim * np.eye(cx.dim)
    for c in (0.5, 2.0, 10.0):
        worst = 0.0
        for k in range(cx.dim + 1):
            ref = mass_weight(k, spd[None, None])
            scaled = mass_weight(k, (c * spd)[None, None])
            expected = c ** (cx.dim / 2.0 - k)
            defect = np.abs(scaled - expected * ref).max()
            worst = max(worst, float(defect / (expected * np.abs(ref).max())))
        rows.append(("weight-scaling", "c=" + fmt17(c), -1, worst))

    lines = [",".join(INTERP_CHECK_COLUMNS)]
    lines.extend(",".join(format_cell(v) for v in row) for row in rows)
    stdout.write("\n".join(lines) + "\n")
    if config.out is not None:
        write_csv(config.out, INTERP_CHECK_COLUMNS, rows,
                  [f"interp-check geometry={config.geometry} "
                   f"level={config.level} seed={config.seed}"])


_RUNNERS = {
    "mesh-info": _run_mesh_info,
    "solve": _run_solve,
    "converge": _run_converge,
    "crime": _run_crime,
    "interp-check": _run_interp_check,
}


def run(config: ExperimentConfig, stdout=None) -> int:
    """Execute a validated config; returns the process exit code."""
    stdout = sys.stdout if stdout is None else stdout
    with threadpool_limits(limits=1):
        _RUNNERS[config.command](config, stdout)
    return 0


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        config = parse_config(argv)
    except ConfigError as exc:
        sys.stderr.write(f"error: ConfigError: {exc}\n")
        return 2
    try:
        return run(config)
    except FeclabError as exc:
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
