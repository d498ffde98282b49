"""Command line entry point ``fq <command> --config <path>``.

Every command writes one CSV: ``#`` metadata lines (command, config echo,
seed), a header row, then data rows.  Floats use ``repr`` so identical
configs give byte-identical output.  Exit codes: 0 ok, 1 invariant or
numerical failure (the partial CSV ends with a ``# FAILED`` line), 2 config
error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time

import numpy as np

from .closed_forms import (SimilarSystem, critical_q, equation_residual, solve_beta_selfsim,
                           solve_kr)
from .config import COMMANDS, RunConfig, emit_config, parse_config
from .dyadic import DyadicCube
from .errors import ConfigError, FracQuantError
from .measures import (AtomicMeasure, InhomogeneousSelfSimilarMeasure, MeasureModel,
                       SelfSimilarMeasure, UniformDensity)
from .multifractal import coarse_dimensions, default_alpha_grid
from .partition import build_Pt, default_t_grid, partition_count_exponent
from .quantization import estimate_Dr
from .spectrum import (SpectrumFunction, convexity_defect, qdim_from_qr, solve_qr,
                       spectrum_table)

EXIT_OK, EXIT_FAILED, EXIT_CONFIG = 0, 1, 2
VERIFY_SPECTRUM_TOL = 1e-9
VERIFY_RESIDUAL_TOL = 1e-10
VERIFY_QDIM_EXACT_TOL = 1e-6
VERIFY_QDIM_MC_TOL = 0.05
VERIFY_T_COUNT = 4


class InvariantFailure(Exception):
    """A hard invariant did not hold; the run exits with status 1."""


def _cell(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


class CsvSink:
    """Row writer that flushes every line so partial output survives a failure."""

    def __init__(self, stream, config: RunConfig):
        self.stream = stream
        self.writer = csv.writer(stream, lineterminator="\n")
        stream.write(f"# command: {config.command}\n")
        stream.write(f"# config: {emit_config(config)}\n")
        stream.write(f"# seed: {config.seed}\n")

    def header(self, *names):
        self.writer.writerow(names)
        self.stream.flush()

    def row(self, *values):
        self.writer.writerow([_cell(v) for v in values])
        self.stream.flush()

    def comment(self, text):
        self.stream.write(f"# {text}\n")
        self.stream.flush()


# ---------------------------------------------------------------------------
# helpers shared by commands


def similar_system(model: MeasureModel) -> SimilarSystem | None:
    """The closed-form system of a self-similar model whose images of the unit cube
    have disjoint interiors, else None."""
    if isinstance(model, SelfSimilarMeasure) and model.system.separated_images:
        return SimilarSystem(model.system.ratios, model.probabilities,
                             dimension=model.dimension)
    return None


def closed_form_qdim(model: MeasureModel, r: float) -> float | None:
    if isinstance(model, UniformDensity):
        return float(model.dimension)
    if isinstance(model, AtomicMeasure):
        return 0.0
    system = similar_system(model)
    if system is not None and system.size >= 2:
        return solve_kr(system, r)
    return None


def _spectrum_fn(config: RunConfig, model: MeasureModel) -> SpectrumFunction:
    return SpectrumFunction(model, config.regression_n_min(), config.n_max, config.method)


def _t_grid(config: RunConfig, model: MeasureModel, r: float):
    if config.t_grid is not None:
        return np.array(config.t_grid)
    return default_t_grid(model, r, config.t_points)


def _alpha_grid(config: RunConfig, model: MeasureModel, r: float):
    if config.alpha_grid is not None:
        return np.array(config.alpha_grid)
    return default_alpha_grid(r, model.dimension, config.alpha_points)


def _quantize_kw(config: RunConfig) -> dict:
    return dict(n_grid=config.n_grid, lloyd_iterations=config.lloyd_iterations,
                samples=config.samples, seed=config.seed, workers=config.threads)


# ---------------------------------------------------------------------------
# commands


def cmd_spectrum(config, model, out):
    table = spectrum_table(model, config.q_values(), config.regression_n_min(), config.n_max,
                           config.method, config.threads)
    out.comment(f"method: {table.method}; convexity_adjusted: {_cell(table.convexity_adjusted)}")
    out.header("q", "level", "beta_n", "beta_hat")
    for i, q in enumerate(table.q_grid):
        for n in table.levels:
            out.row(q, n, table.values[n][i], table.extrapolated[i])


def cmd_qdim(config, model, out):
    fn = _spectrum_fn(config, model)
    out.comment(f"method: {fn.method}")
    out.header("r", "q_r", "D_r", "closed_form")
    for r in config.r_grid:
        cv = solve_qr(fn, r, config.tol)
        out.row(r, cv.q_r, qdim_from_qr(r, cv.q_r), closed_form_qdim(model, r))


def cmd_partition(config, model, out):
    out.header("r", "t", "card", "max_J", "slope", "upper", "lower")
    for r in config.r_grid:
        grid = _t_grid(config, model, r)
        fit = partition_count_exponent(model, r, grid)
        for t in sorted(grid, reverse=True):
            part = build_Pt(model, r, t)
            out.row(r, t, part.card, part.max_J, fit.slope, fit.upper, fit.lower)


def cmd_coarse(config, model, out):
    n_range = (config.regression_n_min(), config.n_max)
    out.header("r", "alpha", "level", "count", "F_upper", "F_lower", "F_bar_upper", "F_bar_lower")
    for r in config.r_grid:
        refine = 2 if config.alpha_grid is None else 0
        up, lo, cc = coarse_dimensions(model, r, _alpha_grid(config, model, r), n_range,
                                       refine=refine)
        for a in cc.alpha_grid:
            a = float(a)
            for n in cc.levels:
                out.row(r, a, n, cc.counts[a][n], cc.F_upper[a], cc.F_lower[a], up, lo)


def cmd_quantize(config, model, out):
    out.header("r", "n", "card", "lower", "evaluated", "half_width", "upper",
               "D_bound", "D_evaluated", "zero_branch")
    for r in config.r_grid:
        est = estimate_Dr(model, r, **_quantize_kw(config))
        for e in est.curve.entries:
            out.row(r, e.n, e.card, e.lower, e.evaluated, e.half_width, e.upper,
                    est.bound_based, est.evaluated, est.zero_branch)


def cmd_closedform(config, model, out):
    out.header("quantity", "parameter", "value", "residual")
    if isinstance(model, InhomogeneousSelfSimilarMeasure):
        system = SimilarSystem(model.system.ratios, model.probabilities,
                               dimension=model.dimension)
        beta_mu = SpectrumFunction(model.condensation, config.regression_n_min(), config.n_max)
        for q in config.q_values():
            if 0 < q < 1:
                rho = solve_beta_selfsim(system, q)
                out.row("rho", q, rho, equation_residual("beta", system, rho, q))
        for r in config.r_grid:
            def g(q, r=r):
                return max(beta_mu(q), solve_beta_selfsim(system, q))
            q = critical_q(g, r)
            out.row("q_r", r, q, g(q) - r * q)
            out.row("D_r", r, r * q / (1.0 - q), None)
        return
    system = similar_system(model)
    if system is None:
        raise ConfigError([f"closedform needs a self-similar model with separated images or an "
                           f"inhomogeneous self-similar model, got {model.kind!r}"])
    for q in config.q_values():
        rho = solve_beta_selfsim(system, q)
        out.row("beta", q, rho, equation_residual("beta", system, rho, q))
    for r in config.r_grid:
        k = solve_kr(system, r)
        out.row("k_r", r, k, equation_residual("kr", system, k, r))


def _check(out, failures, name, passed, detail):
    out.row(name, bool(passed), detail)
    if not passed:
        failures.append(name)


def cmd_verify(config, model, out):
    """Cross-module consistency checks; any failed check exits with status 1."""
    out.header("check", "passed", "detail")
    failures: list[str] = []
    start = time.perf_counter()
    tol_mass = max(model.mass_tolerance, 1e-12)
    levels = range(1, min(config.n_max, model.max_level) + 1)
    worst = max(abs(model.level_masses(n).total() - 1.0) for n in levels)
    _check(out, failures, "mass_totals", worst <= tol_mass, f"max |total - 1| = {worst!r}")

    fn = _spectrum_fn(config, model)
    b1 = max(abs(fn.beta_n(1.0, n)) for n in fn.levels)
    _check(out, failures, "beta_at_one", b1 <= VERIFY_SPECTRUM_TOL, f"max |beta_n(1)| = {b1!r}")

    table = spectrum_table(model, config.q_values(), config.regression_n_min(), config.n_max,
                           config.method, config.threads)
    defect = max(convexity_defect(table.q_grid, table.values[n]) for n in table.levels)
    defect = max(defect, convexity_defect(table.q_grid, table.extrapolated))
    _check(out, failures, "convexity", defect <= VERIFY_SPECTRUM_TOL, f"max defect = {defect!r}")

    for r in config.r_grid:
        cv = solve_qr(fn, r, config.tol)
        ok = 0 <= cv.q_r < 1 and cv.bracket_width <= config.tol
        if cv.q_r > 0:
            lo, hi = max(cv.q_r - cv.bracket_width, 0.0), min(cv.q_r + cv.bracket_width, 1.0)
            ok = ok and fn(lo) - r * lo >= -1e-9 and fn(hi) - r * hi <= 1e-9
        _check(out, failures, f"q_r_bracket[r={r!r}]", ok,
               f"q_r = {cv.q_r!r}, width = {cv.bracket_width!r}")

        grid = _t_grid(config, model, r)
        picks = sorted(grid, reverse=True)[:: max(1, len(grid) // VERIFY_T_COUNT)]
        ok, detail = True, "ok"
        for t in picks:
            problem = partition_problem(model, r, t)
            if problem:
                ok, detail = False, f"t = {t!r}: {problem}"
                break
        _check(out, failures, f"partition_invariants[r={r!r}]", ok, detail)

        est = estimate_Dr(model, r, **_quantize_kw(config))
        bad = [e.n for e in est.curve.entries
               if e.evaluated > e.upper or (e.lower is not None and e.lower > e.evaluated)]
        _check(out, failures, f"sandwich[r={r!r}]", not bad,
               f"violations at n = {bad}" if bad else f"{len(est.curve.entries)} sizes ok")

        system = similar_system(model)
        if system is not None and system.size >= 2:
            k = solve_kr(system, r)
            res = abs(equation_residual("kr", system, k, r))
            _check(out, failures, f"kr_residual[r={r!r}]", res <= VERIFY_RESIDUAL_TOL,
                   f"|residual| = {res!r}")
        ref = closed_form_qdim(model, r)
        if ref is not None:
            d_spec = qdim_from_qr(r, cv.q_r)
            tol = VERIFY_QDIM_EXACT_TOL if model.exact else VERIFY_QDIM_MC_TOL
            _check(out, failures, f"qdim_vs_closed_form[r={r!r}]", abs(d_spec - ref) <= tol,
                   f"spectrum {d_spec!r} vs closed form {ref!r}")
    elapsed = time.perf_counter() - start
    out.comment(f"elapsed_seconds: {elapsed:.1f}")
    if failures:
        raise InvariantFailure(f"{len(failures)} checks failed: {', '.join(failures)}")


def partition_problem(model: MeasureModel, r: float, t: float) -> str | None:
    """First violated ``P_t`` invariant, or None."""
    part = build_Pt(model, r, t)
    if part.card == 0:
        return "empty partition"
    if np.any(part.J >= t):
        return "cube with J >= t"
    for n, k in zip(part.levels, part.indices):
        if n > 0:
            parent = DyadicCube(int(n), tuple(int(x) for x in k)).parent()
            pmass = model.cube_mass(parent)
            if pmass * 2.0 ** (-r * (n - 1)) < t:
                return f"parent of {tuple(k)} at level {n} has J < t"
    seen = set()
    for n, k in sorted(zip(part.levels.tolist(), map(tuple, part.indices.tolist()))):
        cube = DyadicCube(n, k)
        for m in range(n):
            if (m, cube.ancestor(m).index) in seen:
                return f"cube {k} at level {n} lies inside another cube"
        seen.add((n, k))
    err = abs(part.total_mass() - 1.0)
    if err > max(model.mass_tolerance * part.card, 1e-9):
        return f"mass sum off by {err!r}"
    return None


COMMAND_TABLE = {
    "spectrum": cmd_spectrum,
    "qdim": cmd_qdim,
    "partition": cmd_partition,
    "coarse": cmd_coarse,
    "quantize": cmd_quantize,
    "closedform": cmd_closedform,
    "verify": cmd_verify,
}


def run(config: RunConfig, stream) -> int:
    """Execute ``config`` writing CSV to ``stream``; returns the exit status."""
    out = CsvSink(stream, config)
    try:
        model = config.model()
        COMMAND_TABLE[config.command](config, model, out)
    except ConfigError as exc:
        out.comment(f"FAILED: {exc}")
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvariantFailure, FracQuantError) as exc:
        out.comment(f"FAILED: {type(exc).__name__}: {exc}")
        print(f"failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fq", description="Quantization dimensions from dyadic grids.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--out", help="CSV output path (default: config 'output' or stdout)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--levels", type=int, help="override n_max")
    p.add_argument("--threads", type=int, help="worker threads")
    return p


def load_config(args) -> RunConfig:
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"cannot read config: {exc}"]) from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"malformed JSON: {exc}"]) from exc
    if isinstance(raw, dict):
        raw["command"] = args.command
        for key, value in (("seed", args.seed), ("n_max", args.levels),
                           ("threads", args.threads), ("output", args.out)):
            if value is not None:
                raw[key] = value
        text = json.dumps(raw)
    return parse_config(text)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if config.output:
        with open(config.output, "w", encoding="utf-8", newline="") as fh:
            return run(config, fh)
    return run(config, sys.stdout)


if __name__ == "__main__":
    sys.exit(main())
