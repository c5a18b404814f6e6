"""Command-line front end: gains | certify | maxdist | sweep | simulate.

Exit codes: 0 success or certified, 1 not certified, 2 input error, 3 numerical failure.
"""

import argparse
import logging
import math
import sys
from typing import Optional, Sequence

import numpy as np

from . import config, utils
from .certificates import check_cico
from .disturbance import STEP, Disturbance, step_family, tripping_scenario, wind_scenario
from .errors import ConfigError, GridRobustnessError, SynchronismLossError
from .gain import linear_gains
from .lure import build_lure, dump_matrices
from .network import GEN, parse_grid, solve_equilibrium
from .optimizer import COUPLED, FREE, OptProblem, max_disturbance, sweep_zbar
from .plotting import plot_sweep
from .simulator import LimitSpec, empirical_upper_bound, simulate
from .task_system import TaskLogger

EXIT_OK = 0
EXIT_NOT_CERTIFIED = 1


def _parse_floats(values: Optional[Sequence[str]], size: int, name: str, default: float) -> np.ndarray:
    """Repeatable option: one value broadcasts, otherwise exactly size values (comma lists allowed)."""
    if not values:
        return np.full(size, default)
    try:
        numbers = [float(v) for item in values for v in str(item).split(",") if v.strip()]
    except ValueError as e:
        raise ConfigError(f"--{name}: {e}") from None
    if len(numbers) == 1:
        return np.full(size, numbers[0])
    if len(numbers) != size:
        raise ConfigError(f"--{name} expects 1 or {size} values, got {len(numbers)}")
    return np.array(numbers)


def _parse_grid(spec: str) -> np.ndarray:
    try:
        start, stop, step = (float(part) for part in spec.split(":"))
    except ValueError:
        raise ConfigError(f"--zbar-grid expects START:STOP:STEP, got {spec!r}") from None
    if step <= 0 or stop < start:
        raise ConfigError(f"empty zbar grid {spec!r}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return np.round(start + step * np.arange(count), 12)


def _parse_direction(spec: Optional[str], input_ids: list[int]) -> np.ndarray:
    """'k=w,...' over bus ids; unspecified buses get weight 0. No spec means every bus with weight 1."""
    if not spec:
        return np.ones(len(input_ids))
    c = np.zeros(len(input_ids))
    position = {bus_id: i for i, bus_id in enumerate(input_ids)}
    for item in spec.split(","):
        if not item.strip():
            continue
        key, _, weight = item.partition("=")
        try:
            bus_id = int(key)
            value = float(weight) if weight else 1.0
        except ValueError:
            raise ConfigError(f"--direction entry {item!r} is not 'bus=weight'") from None
        if bus_id not in position:
            raise ConfigError(f"--direction refers to bus {bus_id}, which carries no disturbance input")
        c[position[bus_id]] = value
    return c


def _apply_tolerances(overrides: Optional[Sequence[str]]):
    for item in overrides or []:
        name, _, value = item.partition("=")
        try:
            config.override_tolerance(name.strip(), float(value))
        except (KeyError, ValueError) as e:
            raise ConfigError(f"--tol {item}: {e}") from None


def _pipeline(args):
    case = parse_grid(utils.case_path(args.case))
    eq = solve_equilibrium(case)
    sys_ = build_lure(case, eq)
    return case, eq, sys_


def _input_ids(sys_) -> list[int]:
    return list(sys_.gen_ids) + list(sys_.load_ids)


def cmd_gains(args) -> int:
    case, eq, sys_ = _pipeline(args)
    gains = linear_gains(sys_)
    utils.save_table(utils.join_path(args.out, "gains.csv"), gains.to_rows(), columns=["block", "output", "input", "gain"])
    utils.save_json(utils.join_path(args.out, "gains.json"), {"case": case.name, "equilibrium": eq.to_dict(), **gains.to_dict()})
    if args.dump_matrices:
        dump_matrices(sys_, utils.join_path(args.out, "matrices"))
    for name in ("yu", "yv", "zu", "zv"):
        block = getattr(gains, name)
        print(f"gamma_{name}: {block.shape[0]}x{block.shape[1]}, max {block.max(initial=0.0):.6g}")
    print(f"tail bound {gains.tail_bound:.3e}, computed in {gains.elapsed:.2f} s")
    return EXIT_OK


def cmd_certify(args) -> int:
    case, eq, sys_ = _pipeline(args)
    gains = linear_gains(sys_)
    ubar = _parse_floats(args.ubar, sys_.input_dim, "ubar", 0.0)
    zbar = _parse_floats(args.zbar, sys_.ell, "zbar", math.nan)
    if np.any(np.isnan(zbar)):
        raise ConfigError("--zbar is required")
    ybar = _parse_floats(args.ybar, sys_.m, "ybar", math.inf)
    result = check_cico(gains, eq.phi_star, ubar, zbar, ybar)
    utils.save_json(utils.join_path(args.out, "certificate.json"), result.to_dict())
    print(f"bibo_ok={result.bibo_ok} cibo_ok={result.cibo_ok} cico_ok={result.cico_ok} rho={result.spectral_radius:.6g}")
    return EXIT_OK if result.cico_ok else EXIT_NOT_CERTIFIED


def cmd_maxdist(args) -> int:
    case, eq, sys_ = _pipeline(args)
    gains = linear_gains(sys_)
    ybar = _parse_floats(args.ybar, sys_.m, "ybar", math.inf)
    input_ids = _input_ids(sys_)

    if args.per_bus:
        rows = []
        for k, bus_id in enumerate(input_ids):
            c = np.zeros(len(input_ids))
            c[k] = 1.0
            solution = max_disturbance(OptProblem.create(gains, eq.phi_star, c, ybar), mode=args.mode)
            kind = GEN if bus_id in sys_.gen_ids else "load"
            rows.append({"bus": bus_id, "kind": kind, "degree": case.degree(bus_id), "mu": solution.mu_star})
        utils.save_table(utils.join_path(args.out, "per_bus.csv"), rows, columns=["bus", "kind", "degree", "mu"])
        for row in rows:
            print(f"bus {row['bus']:>4} ({row['kind']}, degree {row['degree']}): mu = {row['mu']:.6g}")
        return EXIT_OK

    c = _parse_direction(args.direction, input_ids)
    solution = max_disturbance(OptProblem.create(gains, eq.phi_star, c, ybar), mode=args.mode)
    utils.save_json(utils.join_path(args.out, "solution.json"), {"case": case.name, "direction": c, **solution.to_dict()})
    margins = np.concatenate([solution.certificate.margins_z, solution.certificate.margins_y])
    utils.save_table(
        utils.join_path(args.out, "solution.csv"),
        [{
            "zbar": float(solution.zbar_star.max()),
            "mu": solution.mu_star,
            "binding_row": solution.binding_row,
            "margin": float(np.min(margins[np.isfinite(margins)])),
            "scale": solution.scale,
        }],
    )
    print(f"mu* = {solution.mu_star:.6g} (scale {solution.scale:.6g}), binding {solution.binding_row}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    if not (args.horizon > 0 and args.bisect_tol > 0):
        raise ConfigError("--horizon and --bisect-tol must be positive")
    case, eq, sys_ = _pipeline(args)
    gains = linear_gains(sys_)
    ybar = _parse_floats(args.ybar, sys_.m, "ybar", math.inf)
    c = _parse_direction(args.direction, _input_ids(sys_))
    problem = OptProblem.create(gains, eq.phi_star, c, ybar)
    grid = _parse_grid(args.zbar_grid)
    uniform = not args.box_fraction
    points = sweep_zbar(problem, grid, uniform=uniform)
    utils.save_table(utils.join_path(args.out, "sweep.csv"), [p.to_row() for p in points])

    certified = np.array([p.mu for p in points])
    peak = int(np.argmax(certified))
    gap = {
        "case": case.name,
        "peak_zbar": points[peak].zbar,
        "certified_peak": points[peak].mu,
        "zero_crossing": next((p.zbar for p in points[peak:] if p.mu <= 0), None),
        "threshold": config.TIGHTNESS_GAP,
    }

    empirical = None
    if not args.no_empirical:
        c_hat = problem.c_hat
        weight = float(c @ c_hat)
        family = step_family(c_hat)
        empirical = []
        for p in points:
            if p.binding_row == "domain":
                empirical.append(math.nan)
                continue
            zbar = np.full(sys_.ell, p.zbar) if uniform else p.zbar * problem.domain
            limits = [LimitSpec("z", zbar)]
            if np.any(np.isfinite(ybar)):
                limits.append(LimitSpec("y", ybar))
            scale = empirical_upper_bound(case, eq, c_hat, limits, family, bisect_tol=args.bisect_tol, horizon=args.horizon)
            empirical.append(scale * weight)
        utils.save_table(
            utils.join_path(args.out, "empirical.csv"),
            [{"zbar": p.zbar, "empirical_mu": e} for p, e in zip(points, empirical)],
            columns=["zbar", "empirical_mu"],
        )
        at_peak = empirical[peak]
        gap["empirical_at_peak"] = at_peak
        gap["gap"] = at_peak / gap["certified_peak"] - 1.0 if gap["certified_peak"] > 0 else None
        gap["within_threshold"] = gap["gap"] is not None and gap["gap"] <= config.TIGHTNESS_GAP
        ordered = [e >= p.mu - args.bisect_tol for p, e in zip(points, empirical) if not math.isnan(e)]
        gap["empirical_dominates"] = bool(all(ordered))

    utils.save_json(utils.join_path(args.out, "gap.json"), gap)
    plot_sweep(
        utils.join_path(args.out, "sweep.svg"),
        [p.zbar for p in points],
        certified,
        empirical,
        [p.ybar_bound for p in points],
        xlabel="zbar (rad)" if uniform else "zbar / (pi - |phi*|)",
    )
    print(f"certified peak mu = {gap['certified_peak']:.6g} at zbar = {gap['peak_zbar']:.4g}")
    if empirical is not None and gap.get("gap") is not None:
        print(f"empirical at peak = {gap['empirical_at_peak']:.6g} (gap {100 * gap['gap']:.1f}%)")
    return EXIT_OK


def _scenario(args, sys_) -> Disturbance:
    inputs = sys_.input_dim
    if args.scenario in (None, "zero"):
        return Disturbance(STEP, np.zeros(inputs))
    if args.scenario in ("tripping", "wind"):
        c = _parse_direction(args.direction, _input_ids(sys_))
        if c.max() <= 0:
            raise ConfigError("--direction needs at least one positive weight")
        pattern = args.magnitude * c / c.max()
        if args.scenario == "tripping":
            return tripping_scenario(pattern)
        return wind_scenario(pattern, seed=args.seed, horizon=args.horizon + 1.0)
    try:
        d = Disturbance.from_dict(utils.load_json(args.scenario))
    except (OSError, ValueError, TypeError, KeyError) as e:
        raise ConfigError(f"--scenario {args.scenario}: {e}") from None
    if d.size != inputs:
        raise ConfigError(f"--scenario has {d.size} channels, the case has {inputs} disturbance inputs")
    return d


def cmd_simulate(args) -> int:
    if not args.horizon > 0:
        raise ConfigError(f"--horizon must be positive, got {args.horizon}")
    if not args.magnitude >= 0:
        raise ConfigError(f"--magnitude must be nonnegative, got {args.magnitude}")
    case, eq, sys_ = _pipeline(args)
    d = _scenario(args, sys_)
    summary = {"case": case.name, "scenario": d.to_dict(), "synchronism_lost": False}
    try:
        traj = simulate(case, eq, d, args.horizon)
    except SynchronismLossError as e:
        summary.update({"synchronism_lost": True, "time": e.time, "message": str(e)})
        utils.save_json(utils.join_path(args.out, "summary.json"), summary)
        raise
    utils.save_table(utils.join_path(args.out, "trajectory.csv"), traj.to_rows())
    summary.update(traj.summary())
    utils.save_json(utils.join_path(args.out, "summary.json"), summary)
    print(f"max |y| = {summary['max_peak_y']:.6g} Hz, max |z| = {summary['max_peak_z']:.6g} rad")
    return EXIT_OK


COMMANDS = {
    "gains": cmd_gains,
    "certify": cmd_certify,
    "maxdist": cmd_maxdist,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", required=True, help="case file or shipped case name (smib, three_bus, case9, case39)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--seed", type=int, default=0, help="seed for randomized scenarios")
    common.add_argument("--tol", action="append", metavar="NAME=VAL", help=f"override a tolerance ({', '.join(sorted(config.TOLERANCE_KEYS))})")
    common.add_argument("--verbose", action="store_true", help="debug logging")
    common.add_argument("--log-dir", help="write task logs to this directory")

    limits = argparse.ArgumentParser(add_help=False)
    limits.add_argument("--ybar", action="append", metavar="HZ", help="frequency limit in Hz, scalar or one per generator")

    parser = argparse.ArgumentParser(prog="grid-robustness", description="Certified disturbance bounds for power grids.")
    sub = parser.add_subparsers(dest="command", required=True)

    gains = sub.add_parser("gains", parents=[common], help="compute the L1 gain matrices")
    gains.add_argument("--dump-matrices", action="store_true", help="also write the Lur'e matrices as CSV")

    certify = sub.add_parser("certify", parents=[common, limits], help="check the CICO certificate for given bounds")
    certify.add_argument("--ubar", action="append", metavar="PU", help="disturbance bound, scalar or one per input")
    certify.add_argument("--zbar", action="append", metavar="RAD", help="line-angle bound, scalar or one per line")

    maxdist = sub.add_parser("maxdist", parents=[common, limits], help="maximize the certified disturbance")
    group = maxdist.add_mutually_exclusive_group()
    group.add_argument("--direction", help="per-bus weights 'k=w,...'")
    group.add_argument("--per-bus", action="store_true", help="one problem per bus with c = e_k")
    maxdist.add_argument("--mode", choices=[COUPLED, FREE], default=COUPLED)

    sweep = sub.add_parser("sweep", parents=[common, limits], help="certified and empirical mu over a zbar grid")
    sweep.add_argument("--direction", help="per-bus weights 'k=w,...'")
    sweep.add_argument("--zbar-grid", default="0.1:2.8:0.1", metavar="START:STOP:STEP")
    sweep.add_argument("--box-fraction", action="store_true", help="grid values are fractions of pi - |phi*| per line")
    sweep.add_argument("--no-empirical", action="store_true", help="skip the simulation-based upper bound")
    sweep.add_argument("--bisect-tol", type=float, default=1e-3, metavar="PU")
    sweep.add_argument("--horizon", type=float, default=config.EMPIRICAL_HORIZON, metavar="S")

    simulate_ = sub.add_parser("simulate", parents=[common], help="nonlinear time-domain simulation")
    simulate_.add_argument("--scenario", help="scenario JSON file, or one of: zero, tripping, wind")
    simulate_.add_argument("--direction", help="buses for the tripping/wind scenarios 'k=w,...'")
    simulate_.add_argument("--magnitude", type=float, default=0.1, metavar="PU", help="magnitude for the tripping/wind scenarios")
    simulate_.add_argument("--horizon", type=float, default=20.0, metavar="S")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(message)s", stream=sys.stderr)
    if args.log_dir:
        TaskLogger.get_instance().configure(args.log_dir)
    try:
        _apply_tolerances(args.tol)
        return COMMANDS[args.command](args)
    except GridRobustnessError as e:
        utils.print_debug(f"{type(e).__name__} raised in {e.module}", exc_info=True)
        print(f"error: {e.module}: {e}", file=sys.stderr)
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
