"""Configuration loading, experiment orchestration and result files.

Every run writes flat CSV tables (17 significant digits) plus a
``results.json`` with metadata and the full n-D matrices, each file written
to a temporary name and renamed into place.
"""

import argparse
import hashlib
import json
import logging
import os
import sys
import tempfile
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import orjson
import pandas as pd
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

import finite_solver
import lq_nd
import lq_scalar
import simulator
from all_types.config_dtypes import (
    ExperimentConfig,
    LqrBlock,
    MatrixLike,
    ResultsBundle,
    ResultsMetadata,
    SuiteConfig,
)
from all_types.finite_dtypes import StateEnumeration
from all_types.game_dtypes import ClosedLoopDynamics, CostModel, GameSpec, TerminalCondition
from all_types.lq_dtypes import LqrWeights, NdLQParams, ScalarLQParams
from all_types.sim_dtypes import RolloutConfig
from config_factory import CONF
from constants import __version__, rng_identifier
from game_errors import (
    EXIT_CONFIG,
    EXIT_OK,
    ConfigParseError,
    ConfigValidationError,
    FlipDynError,
    NotPositiveDefinite,
    ResultsIOError,
)
from logger import setup_logging
from logging_wrapper import log_and_validate
from lqr_synthesis import double_integrator, lqr_gain, single_integrator

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"
DEFAULT_SUITE = Path(__file__).resolve().parent / "experiment_configs" / "suite.json"
MODE_COMMANDS = {"solve-scalar": "scalar", "solve-nd": "nd", "solve-finite": "finite"}


# configuration


def _format_errors(e: ValidationError) -> list[str]:
    return [f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()]


def _as_matrix(value: MatrixLike, n: int) -> np.ndarray:
    arr = np.asarray(value, dtype=np.float64)
    if arr.ndim == 0:
        return float(arr) * np.eye(n)
    return np.atleast_2d(arr)


def _nd_dimension(config: ExperimentConfig) -> Optional[int]:
    block = config.nd
    if block is None:
        return None
    if block.plant == "double_integrator":
        return 2
    return None if block.F is None else len(block.F)


def config_problems(config: ExperimentConfig) -> list[str]:
    """Cross-field checks that field validation cannot express."""
    problems = []
    present = [m for m in ("scalar", "nd", "finite") if getattr(config, m) is not None]
    if len(present) != 1:
        problems.append(f"exactly one of scalar/nd/finite must be present, found {present or 'none'}")
    if getattr(config, config.mode) is None:
        problems.append(f"mode is '{config.mode}' but the '{config.mode}' block is missing")

    if config.scalar is not None:
        block = config.scalar
        if block.B is None and block.delta is None:
            problems.append("scalar: give B or delta")

    if config.nd is not None:
        block = config.nd
        if block.plant == "double_integrator":
            if block.f_hat is None or block.delta is None:
                problems.append("nd: double_integrator needs f_hat and delta")
            n, m = 2, 1
        elif block.F is None or block.B is None:
            problems.append("nd: plant 'matrices' needs F and B")
            n = m = None
        else:
            F, B = np.asarray(block.F), np.asarray(block.B)
            n, m = F.shape[0], (B.shape[1] if B.ndim == 2 else 0)
            if F.shape != (n, n):
                problems.append(f"nd: F must be square, got {F.shape}")
            if B.ndim != 2 or B.shape[0] != n:
                problems.append(f"nd: B must have {n} rows, got {B.shape}")
        if n is not None:
            for name in ("Q", "D", "A"):
                M = _as_matrix(getattr(block, name), n)
                if M.shape != (n, n):
                    problems.append(f"nd: {name} must be {n}x{n}, got {M.shape}")
                elif not np.allclose(M, M.T, atol=1e-12):
                    problems.append(f"nd: {name} must be symmetric")
                elif np.linalg.eigvalsh(M).min() <= 0.0:
                    problems.append(f"nd: {name} must be positive definite")
            if block.K is not None and np.asarray(block.K).shape != (m, n):
                problems.append(f"nd: K must be {m}x{n}, got {np.asarray(block.K).shape}")

    if config.finite is not None:
        block = config.finite
        S = len(block.states)
        dims = {len(s) for s in block.states}
        if S == 0 or len(dims) != 1:
            problems.append("finite: states must be a non-empty list of equal-length vectors")
        for name in ("f0", "f1", "g", "d", "a", "terminal_V0", "terminal_V1"):
            values = getattr(block, name)
            if values is not None and len(values) != S:
                problems.append(f"finite: {name} has {len(values)} entries, expected {S}")
        for name in ("f0", "f1"):
            if any(not 0 <= s < S for s in getattr(block, name)):
                problems.append(f"finite: {name} points outside the state list")
        if any(v < 0 for v in block.d + block.a):
            problems.append("finite: takeover costs d and a must be nonnegative")
        if (block.terminal_V0 is None) != (block.terminal_V1 is None):
            problems.append("finite: give both terminal_V0 and terminal_V1 or neither")
        if block.initial_state >= max(S, 1):
            problems.append("finite: initial_state outside the state list")

    if config.simulation is not None:
        x0 = config.simulation.x0
        if x0 is not None and config.mode != "finite":
            size = np.asarray(x0).size
            expected = 1 if config.mode == "scalar" else _nd_dimension(config)
            if expected is not None and size != expected:
                problems.append(f"simulation: x0 has {size} entries, the {config.mode} plant has {expected}")
        for event in config.simulation.forced_events:
            if event.step >= config.horizon:
                problems.append(f"simulation: forced event step {event.step} must be < horizon {config.horizon}")
    return problems


def load_config(path) -> ExperimentConfig:
    path = str(path)
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise ConfigValidationError([f"cannot read config: {e}"], path) from e
    try:
        data = json.loads(raw.decode("utf-8"))
    except UnicodeDecodeError as e:
        raise ConfigParseError(f"config is not UTF-8: {e.reason}", 1, e.start + 1, path) from e
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"invalid JSON: {e.msg}", e.lineno, e.colno, path) from e

    try:
        config = ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigValidationError(_format_errors(e), path) from e
    problems = config_problems(config)
    if problems:
        raise ConfigValidationError(problems, path)

    config._source_hash = hashlib.sha256(raw).hexdigest()
    logger.info(f"loaded config '{config.name}' ({config.mode}) from {path}")
    return config


def dump_config(config: ExperimentConfig) -> str:
    return config.model_dump_json(indent=2, exclude_none=True)


def config_hash(config: ExperimentConfig) -> str:
    """sha256 of the config file bytes, or of the canonical JSON dump for
    configs built in memory."""
    if config._source_hash:
        return config._source_hash
    canonical = orjson.dumps(config.model_dump(mode="json"), option=orjson.OPT_SORT_KEYS)
    return hashlib.sha256(canonical).hexdigest()


# model builders


def _weights(block: Optional[LqrBlock], n: int, m: int) -> LqrWeights:
    block = block or LqrBlock()
    return LqrWeights(
        Qc=_as_matrix(block.Qc, n), Rc=_as_matrix(block.Rc, m),
        iterations=block.iterations, tol=block.tol,
    )


def build_scalar_params(config: ExperimentConfig) -> ScalarLQParams:
    block = config.scalar
    if block.B is not None:
        F, B = block.F, block.B
    else:
        F_arr, B_arr = single_integrator(block.F, block.delta)
        F, B = float(F_arr[0, 0]), float(B_arr[0, 0])
    K = block.K
    if K is None:
        K = float(lqr_gain([[F]], [[B]], _weights(block.lqr, 1, 1))[0, 0])
        logger.info(f"scalar defender gain from LQR: K={K:.6g}")
    return ScalarLQParams(
        F=F, B=B, E=block.E, K=K, W=block.W,
        g=block.g, d=block.d, a=block.a, mu=config.mu, L=config.horizon,
    )


def build_nd_params(config: ExperimentConfig) -> NdLQParams:
    block = config.nd
    if block.plant == "double_integrator":
        F, B = double_integrator(block.f_hat, block.delta)
    else:
        F, B = np.asarray(block.F, dtype=float), np.asarray(block.B, dtype=float)
    n, m = B.shape
    if block.K is not None:
        K = np.asarray(block.K, dtype=float)
    else:
        K = lqr_gain(F, B, _weights(block.lqr, n, m))
    try:
        return NdLQParams(
            F=F, B=B, E=block.E, K=K, W=block.W,
            Q=_as_matrix(block.Q, n), D=_as_matrix(block.D, n), A=_as_matrix(block.A, n),
            mu=config.mu, L=config.horizon,
        )
    except NotPositiveDefinite as e:
        raise ConfigValidationError([f"nd: {e}"]) from e


def build_finite_game(config: ExperimentConfig) -> tuple[GameSpec, StateEnumeration]:
    block = config.finite
    states = np.ascontiguousarray(np.asarray(block.states, dtype=np.float64))
    transitions = np.stack([np.asarray(block.f0), np.asarray(block.f1)], axis=1)[None, :, :]
    enumeration = StateEnumeration(states=states, transitions=transitions.astype(np.int64))

    def table(values: list[float]):
        arr = np.asarray(values, dtype=np.float64)
        return lambda x: float(arr[enumeration.id_of(x)])

    def successor(targets: list[int]):
        return lambda x: states[targets[enumeration.id_of(x)]]

    costs = CostModel(g=table(block.g), d=table(block.d), a=table(block.a))
    terminal = None
    if block.terminal_V0 is not None:
        terminal = TerminalCondition.from_values(table(block.terminal_V0), table(block.terminal_V1), "table")
    dynamics = ClosedLoopDynamics(n=states.shape[1], f0=successor(block.f0), f1=successor(block.f1))
    spec = GameSpec(
        dynamics=dynamics, costs=costs, L=config.horizon,
        x0=states[block.initial_state], terminal=terminal, mu=config.mu,
        alpha0=config.simulation.alpha0 if config.simulation else 0,
    )
    return spec, enumeration


# tables


def coefficient_table(coeffs) -> pd.DataFrame:
    L = coeffs.L
    return pd.DataFrame({
        "k": np.arange(L + 1),
        "p0": coeffs.p0,
        "p1": coeffs.p1,
        "ptilde": np.append(coeffs.ptilde, np.nan),
        "valid": pd.array(list(coeffs.valid.astype(int)) + [None], dtype="Int64"),
    })


def nd_eig_table(matrices) -> pd.DataFrame:
    eigs = matrices.min_eigs()
    L = matrices.L
    return pd.DataFrame({
        "k": np.arange(L + 1),
        "min_eig_P0": eigs["min_eig_P0"],
        "min_eig_P1": eigs["min_eig_P1"],
        "min_eig_Pcheck": np.append(eigs["min_eig_Pcheck"], np.nan),
        "valid": pd.array(list(matrices.valid.astype(int)) + [None], dtype="Int64"),
    })


def finite_value_table(tables) -> pd.DataFrame:
    rows = []
    L, S = tables.L, tables.enumeration.size
    for k in range(L + 1):
        for s in range(S):
            for alpha in (0, 1):
                last = k == L
                rows.append({
                    "k": k,
                    "state": s,
                    "alpha": alpha,
                    "value": tables.value(k, s, alpha),
                    "defender_act": np.nan if last else tables.defender_act[k, s, alpha],
                    "adversary_act": np.nan if last else tables.adversary_act[k, s, alpha],
                    "mixed": None if last else int(tables.mixed[k, s, alpha]),
                })
    df = pd.DataFrame(rows)
    df["mixed"] = df["mixed"].astype("Int64")
    return df


def simulation_table(stats) -> pd.DataFrame:
    return pd.DataFrame({
        "k": np.arange(len(stats.mean_alpha)),
        "mean_alpha": stats.mean_alpha,
        "mean_beta": stats.mean_beta,
        "mean_gamma": stats.mean_gamma,
    })


def trajectory_table(records) -> pd.DataFrame:
    frames = []
    for rec in records:
        frame = pd.DataFrame({
            "run": rec.run,
            "k": np.arange(rec.L + 1),
            "alpha": rec.alpha,
            "a0": rec.a0,
            "a1": rec.a1,
            "stage_cost": rec.stage_cost,
        })
        for i in range(rec.x.shape[1]):
            frame[f"x_{i}"] = rec.x[:, i]
        frames.append(frame)
    if not frames:
        return pd.DataFrame(columns=["run", "k", "alpha", "a0", "a1", "stage_cost"])
    return pd.concat(frames, ignore_index=True)


# orchestration


def _rollout_config(config: ExperimentConfig, seed: Optional[int]) -> RolloutConfig:
    sim = config.simulation
    return RolloutConfig(
        seed=sim.seed if seed is None else seed,
        runs=sim.runs,
        forced_events=sim.forced_events,
        keep_trajectories=sim.keep_trajectories,
        workers=sim.workers or CONF.workers,
    )


def _x0(config: ExperimentConfig, default):
    sim = config.simulation
    return default if sim is None or sim.x0 is None else sim.x0


@log_and_validate(logger)
def run_experiment(
    config: ExperimentConfig,
    out_dir=None,
    simulate: bool = True,
    strict: Optional[bool] = None,
    seed: Optional[int] = None,
) -> ResultsBundle:
    """Solve the configured game, optionally simulate it, and write the
    results under ``out_dir`` when given."""
    if strict is None:
        strict = (config.validity or CONF.validity) == "strict"
    do_simulate = simulate and config.simulation is not None
    alpha0 = config.simulation.alpha0 if config.simulation else 0

    tables: dict[str, pd.DataFrame] = {}
    matrices: dict = {}
    summary: dict = {}

    if config.mode == "scalar":
        params = build_scalar_params(config)
        coeffs = lq_scalar.scalar_backward_recursion(params, strict=strict)
        tables["coefficients"] = coefficient_table(coeffs)
        tables["scalar_policy"] = pd.DataFrame(lq_scalar.policy_table(coeffs, params))
        summary.update(p0_0=coeffs.p0[0], p1_0=coeffs.p1[0], all_valid=coeffs.all_valid,
                       btilde=params.btilde(0), wtilde=params.wtilde(0))
        x0 = float(np.asarray(_x0(config, 1.0)).reshape(-1)[0])
        spec = lq_scalar.to_game_spec(params, x0, alpha0)
        provider = simulator.scalar_provider(coeffs, params)
        summary["value_at_x0"] = lq_scalar.scalar_value_at(coeffs, x0, alpha0, 0)

    elif config.mode == "nd":
        params = build_nd_params(config)
        result = lq_nd.nd_backward_recursion(params, strict=strict)
        tables["nd_eigs"] = nd_eig_table(result)
        matrices.update(P0=result.P0, P1=result.P1, Pcheck=result.Pcheck,
                        Btilde=result.Btilde, Wtilde=result.Wtilde, K=params.K)
        summary["all_valid"] = bool(result.valid.all())
        x0 = np.asarray(_x0(config, np.eye(params.n)[-1]), dtype=float)
        spec = lq_nd.to_game_spec(params, x0, alpha0)
        provider = simulator.nd_provider(result, params)
        P_root = result.P1[0] if alpha0 else result.P0[0]
        summary["value_at_x0"] = float(x0 @ P_root @ x0)

    else:
        spec, enumeration = build_finite_game(config)
        value_tables = finite_solver.backward_induction(spec, enumeration)
        tables["finite_values"] = finite_value_table(value_tables)
        s0 = config.finite.initial_state
        summary["value_at_x0"] = value_tables.value(0, s0, alpha0)
        summary["mixed_fraction"] = float(value_tables.mixed.mean())
        provider = simulator.tables_provider(value_tables)

    stats = None
    if do_simulate:
        stats = simulator.monte_carlo(spec, provider, _rollout_config(config, seed))
        tables["simulation"] = simulation_table(stats)
        if stats.trajectories:
            tables["trajectories"] = trajectory_table(stats.trajectories)
        summary.update(mean_cost=stats.mean_cost, cost_std_error=stats.cost_std_error, runs=stats.runs)

    bundle = ResultsBundle(
        metadata=ResultsMetadata(
            name=config.name,
            mode=config.mode,
            config_hash=config_hash(config),
            library_version=__version__,
            rng=rng_identifier(),
            validity="strict" if strict else "permissive",
            created_at=datetime.now(timezone.utc),
        ),
        tables=tables,
        matrices=matrices,
        summary=summary,
        stats=stats,
    )
    if out_dir is not None:
        write_results(bundle, out_dir)
    return bundle


def _atomic_write(path: Path, write) -> None:
    tmp = None
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "wb") as handle:
            write(handle)
        os.replace(tmp, path)
    except OSError as e:
        if tmp and os.path.exists(tmp):
            os.remove(tmp)
        raise ResultsIOError(f"could not write {path}: {e}", {"path": str(path)}) from e


def write_results(bundle: ResultsBundle, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    written = []
    for name, frame in bundle.tables.items():
        path = out_dir / f"{name}.csv"
        body = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        _atomic_write(path, lambda h, body=body: h.write(body.encode("utf-8")))
        written.append(path)

    payload = {
        "metadata": bundle.metadata.model_dump(mode="json"),
        "summary": bundle.summary,
        "matrices": bundle.matrices,
        "files": sorted(p.name for p in written),
    }
    results = orjson.dumps(
        payload, option=orjson.OPT_SERIALIZE_NUMPY | orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS
    )
    path = out_dir / "results.json"
    _atomic_write(path, lambda h: h.write(results))
    written.append(path)
    logger.info(f"wrote {len(written)} result files to {out_dir}")
    return written


def load_suite(path) -> tuple[SuiteConfig, list[Path]]:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ConfigValidationError([f"cannot read suite: {e}"], str(path)) from e
    except json.JSONDecodeError as e:
        raise ConfigParseError(f"invalid JSON: {e.msg}", e.lineno, e.colno, str(path)) from e
    try:
        suite = SuiteConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigValidationError(_format_errors(e), str(path)) from e
    return suite, [path.parent / entry for entry in suite.configs]


def run_suite(path, out_dir, strict: Optional[bool] = None, seed: Optional[int] = None) -> dict[str, ResultsBundle]:
    suite, config_paths = load_suite(path)
    configs = [load_config(p) for p in config_paths]
    bundles = {}
    for config in configs:
        bundles[config.name] = run_experiment(
            config, out_dir=Path(out_dir) / config.name, simulate=True, strict=strict, seed=seed
        )
    logger.info(f"suite '{suite.name}' finished: {len(bundles)} experiments")
    return bundles


# command line


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flipdyn", description="Solve and simulate FlipDyn takeover games"
    )
    parser.add_argument("--log-level", default=CONF.log_level, help="root log level")
    parser.add_argument("--log-file", default=CONF.log_file or None, help="optional log file")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in (
        ("solve-scalar", "closed-form scalar LQ coefficients and policies"),
        ("solve-nd", "n-D quadratic value matrices"),
        ("solve-finite", "tabular backward induction on a finite game"),
        ("simulate", "solve the configured game, then Monte Carlo rollouts"),
        ("experiment", "run every config of a suite file"),
    ):
        cmd = sub.add_parser(name, help=help_text)
        cmd.add_argument(
            "--config",
            required=name != "experiment",
            default=str(DEFAULT_SUITE) if name == "experiment" else None,
            help="config file (suite file for 'experiment')",
        )
        cmd.add_argument("--out", default=None, help=f"output directory (default: config or {CONF.out_dir})")
        cmd.add_argument("--seed", type=int, default=None, help="override the simulation seed")
        validity = cmd.add_mutually_exclusive_group()
        validity.add_argument("--strict", dest="strict", action="store_true", default=None)
        validity.add_argument("--permissive", dest="strict", action="store_false")
    return parser


def _print_summary(console: Console, name: str, bundle: ResultsBundle) -> None:
    table = Table(title=f"{name} ({bundle.metadata.mode}, {bundle.metadata.validity})")
    table.add_column("quantity")
    table.add_column("value", justify="right")
    for key, value in bundle.summary.items():
        text = f"{value:.10g}" if isinstance(value, (float, np.floating)) else str(value)
        table.add_row(key, text)
    console.print(table)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level, args.log_file)
    console = Console()

    if args.seed is not None and args.seed < 0:
        logger.error("--seed must be nonnegative")
        return EXIT_CONFIG

    try:
        if args.command == "experiment":
            out_dir = args.out or CONF.out_dir
            bundles = run_suite(args.config, out_dir, strict=args.strict, seed=args.seed)
            for name, bundle in bundles.items():
                _print_summary(console, name, bundle)
            return EXIT_OK

        config = load_config(args.config)
        expected_mode = MODE_COMMANDS.get(args.command)
        if expected_mode and config.mode != expected_mode:
            raise ConfigValidationError(
                [f"'{args.command}' needs a {expected_mode} config, got mode '{config.mode}'"], args.config
            )
        if args.command == "simulate" and config.simulation is None:
            raise ConfigValidationError(["'simulate' needs a simulation block"], args.config)

        out_dir = args.out or config.output.dir or str(Path(CONF.out_dir) / config.name)
        bundle = run_experiment(
            config, out_dir=out_dir, simulate=args.command == "simulate",
            strict=args.strict, seed=args.seed,
        )
        _print_summary(console, config.name, bundle)
        console.print_json(orjson.dumps(bundle.metadata.model_dump(mode="json")).decode())
        return EXIT_OK

    except FlipDynError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except ValidationError as e:
        logger.error(f"invalid model parameters: {'; '.join(_format_errors(e))}")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
