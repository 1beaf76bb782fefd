"""Command-line front end: price tables, drift-schedule dumps, and self tests.

Configuration is a flat key=value file; every key can be overridden by a flag.
Exit codes: 0 ok, 1 config error, 2 optimizer failure, 3 self-test failure.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, OptimError
from .model import EQUITY_PARAMS, HestonParams, TimeGrid, psi_deterministic, validate
from .payoff import PayoffKind, geometric_weight, make_payoff
from .measure import DriftMode
from . import bench
from .bench import EstimatorKind, reports_to_csv

TABLE3_STRIKES = [30.0, 35.0, 40.0, 45.0, 50.0, 55.0, 60.0, 65.0, 70.0, 75.0, 80.0, 85.0]
TABLE3_KINDS = [
    "Classic", "LDPsn", "LDPsn_A", "BS", "BS_A",
    "MDPsnLog_A", "MDPsn_A", "MDPlt", "BS_A2", "Antithetic",
]
VARSWAP_STRIKES = [10.0, 20.0, 30.0, 40.0, 45.0, 50.0, 55.0, 60.0, 70.0, 80.0, 90.0, 100.0]
VARSWAP_KINDS = ["LDPsn", "LDPsn_A", "MDPsn", "MDPsn_A", "BS", "BS_A", "Antithetic"]
APPENDIX_STRIKES = [30.0, 35.0, 40.0, 45.0, 50.0, 60.0, 70.0, 80.0]
APPENDIX_KINDS = ["Antithetic", "ControlGeometric", "BS"]


@dataclass
class RunConfig:
    """Flat run configuration; parse/format round trips are lossless."""

    kappa: float = EQUITY_PARAMS.kappa
    theta: float = EQUITY_PARAMS.theta
    xi: float = EQUITY_PARAMS.xi
    rho: float = EQUITY_PARAMS.rho
    v0: float = EQUITY_PARAMS.v0
    s0: float = EQUITY_PARAMS.s0
    r: float = EQUITY_PARAMS.r
    t_end: float = EQUITY_PARAMS.t_end
    n_steps: int = 252
    n_paths: int = 100_000
    seed: int = 20240
    payoff: str = "geometric_asian_call"
    strikes: list = field(default_factory=lambda: [50.0])
    kinds: list = field(default_factory=lambda: ["Classic"])
    out: str = ""
    preset: str = ""
    workers: int = 1
    sigma_const: float = 0.25
    stable_output: bool = False
    dump_drift: bool = False

    def params(self) -> HestonParams:
        return HestonParams(
            kappa=self.kappa, theta=self.theta, xi=self.xi, rho=self.rho,
            v0=self.v0, s0=self.s0, r=self.r, t_end=self.t_end,
        )

    def grid(self) -> TimeGrid:
        return TimeGrid(self.n_steps, self.t_end)

    def payoff_kind(self) -> PayoffKind:
        try:
            return PayoffKind(self.payoff)
        except ValueError:
            raise DomainError(f"invalid value for key 'payoff': {self.payoff!r}")


_FLOAT_KEYS = {"kappa", "theta", "xi", "rho", "v0", "s0", "r", "t_end", "sigma_const"}
_INT_KEYS = {"n_steps", "n_paths", "seed", "workers"}
_BOOL_KEYS = {"stable_output", "dump_drift"}
_LIST_FLOAT_KEYS = {"strikes"}
_LIST_STR_KEYS = {"kinds"}
_STR_KEYS = {"payoff", "out", "preset"}


def parse_config_file(path: str) -> dict:
    """key=value lines; '#' comments; raises DomainError naming the bad key/line."""
    values: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key, val = (part.strip() for part in line.split("=", 1))
            values[key] = _coerce(key, val, where=f"{path}:{lineno}")
    return values


def _coerce(key: str, val: str, where: str = "config"):
    try:
        if key in _FLOAT_KEYS:
            return float(val)
        if key in _INT_KEYS:
            return int(val)
        if key in _BOOL_KEYS:
            return val.lower() in ("1", "true", "yes", "on")
        if key in _LIST_FLOAT_KEYS:
            return [float(x) for x in val.split(",") if x.strip()]
        if key in _LIST_STR_KEYS:
            return [x.strip() for x in val.split(",") if x.strip()]
        if key in _STR_KEYS:
            return val
    except ValueError as e:
        raise DomainError(f"{where}: invalid value for key '{key}': {val!r} ({e})")
    raise DomainError(f"{where}: unknown config key '{key}'")


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        for key, val in parse_config_file(args.config).items():
            setattr(cfg, key, val)
    if args.preset is not None:
        cfg.preset = args.preset
    _apply_preset(cfg)  # preset fills defaults; explicit flags win below
    overrides = {
        "strikes": args.strikes, "kinds": args.kinds, "n_paths": args.paths,
        "n_steps": args.steps, "seed": args.seed, "out": args.out,
        "workers": args.workers, "payoff": getattr(args, "payoff", None),
    }
    for key, val in overrides.items():
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "stable_output", False):
        cfg.stable_output = True
    validate(cfg.params())  # error messages name the offending key
    return cfg


def _apply_preset(cfg: RunConfig) -> None:
    if not cfg.preset:
        return
    if cfg.preset == "table3":
        cfg.payoff = "geometric_asian_call"
        cfg.strikes = list(TABLE3_STRIKES)
        cfg.kinds = list(TABLE3_KINDS)
    elif cfg.preset == "varswap":
        cfg.payoff = "vol_indicator_swap"
        cfg.strikes = list(VARSWAP_STRIKES)
        cfg.kinds = list(VARSWAP_KINDS)
    elif cfg.preset == "appendixC":
        cfg.payoff = "arithmetic_asian_call"
        cfg.strikes = list(APPENDIX_STRIKES)
        cfg.kinds = list(APPENDIX_KINDS)
    else:
        raise DomainError(f"invalid value for key 'preset': {cfg.preset!r}")


def _emit(text: str, out: str) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_price(cfg: RunConfig) -> int:
    kinds = [EstimatorKind.from_name(k) for k in cfg.kinds]
    if cfg.preset == "appendixC" or cfg.payoff == "arithmetic_asian_call":
        reports = bench.run_appendix_table(
            cfg.strikes, kinds, cfg.params(), cfg.sigma_const, cfg.grid(),
            cfg.n_paths, cfg.seed,
        )
    else:
        reports = bench.run_table(
            cfg.payoff_kind(), cfg.strikes, kinds, cfg.params(), cfg.grid(),
            cfg.n_paths, cfg.seed, workers=cfg.workers,
        )
    _emit(reports_to_csv(reports, stable_output=cfg.stable_output), cfg.out)
    return 2 if any(r.error for r in reports) else 0


def cmd_drift(cfg: RunConfig, kind_name: str, strike: float) -> int:
    from . import varopt
    from .drift_ldp import LdpMode, ldp_optimum, ldp_paths, ldp_problem, atom_coefficients
    from .drift_mdp import mdp_auxiliary, mdp_log_problem, mdp_price_problem

    kind = EstimatorKind.from_name(kind_name)
    params, grid = cfg.params(), cfg.grid()
    spec = make_payoff(cfg.payoff_kind(), strike, grid.t_end)
    factory = bench.DriftFactory(params, grid)
    drift, _ = factory.build(kind, spec)
    if drift.mode is DriftMode.PER_STEP_ADAPTIVE:
        raise OptimError(f"{kind_name}: per-step schedules have no static dump")
    psi = psi_deterministic(params, grid)
    cols = {
        "t": grid.knots,
        "h1_dot": drift.h1_dot,
        "h2_dot": drift.h2_dot,
        "psi": psi,
    }
    alpha = spec.weight if spec.weight is not None else geometric_weight(grid.t_end)
    gap = float("nan")
    if kind in (EstimatorKind.LDP_SN, EstimatorKind.LDP_SN_A,
                EstimatorKind.LDP_ST, EstimatorKind.LDP_ST_A):
        mode = LdpMode.SMALL_NOISE if "sn" in kind.value.lower() else LdpMode.SMALL_TIME
        a0_s, beta_s, _ = ldp_optimum(spec, alpha, params, grid, mode)
        paths = ldp_paths(beta_s, a0_s, alpha, params, grid, mode)
        cols.update({"A": paths.a, "U": paths.u, "Z": paths.z, "psi": paths.psi})
        problem = ldp_problem(spec, params, grid, mode, alpha=alpha,
                              extra_atoms=[(paths.xdot1, paths.xdot2)])
        cf = problem.value(atom_coefficients(problem, 2))
        _, vv = varopt.solve(problem, init=atom_coefficients(problem, 2), budget=2500)
        gap = vv - cf
    elif kind in (EstimatorKind.MDP_SN_LOG, EstimatorKind.MDP_SN_LOG_A):
        aux = mdp_auxiliary(alpha, params, grid)
        cols.update({"B": aux.b_path, "gamma": aux.gamma, "u": aux.u})
        det, _ = factory.build(EstimatorKind.MDP_SN_LOG, spec)
        problem = mdp_log_problem(spec, params, grid, alpha=alpha,
                                  extra_atoms=[(det.h1_dot, det.h2_dot)])
        m1 = problem.basis[0].shape[0]
        cfc = np.zeros(problem.n_coeffs)
        cfc[2] = cfc[m1 + 2] = 1.0
        cf = problem.value(cfc)
        _, vv = varopt.solve(problem, init=cfc, budget=2500)
        gap = vv - cf
    elif kind in (EstimatorKind.MDP_SN, EstimatorKind.MDP_SN_A):
        det, _ = factory.build(EstimatorKind.MDP_SN, spec)
        problem = mdp_price_problem(spec, params, grid, alpha,
                                    extra_atoms=[(det.h1_dot, det.h2_dot)])
        m1 = problem.basis[0].shape[0]
        cfc = np.zeros(problem.n_coeffs)
        cfc[1] = cfc[m1 + 1] = 1.0
        cf = problem.value(cfc)
        _, vv = varopt.solve(problem, init=cfc, budget=2500)
        gap = vv - cf
    header = ",".join(list(cols.keys()) + ["oracle_gap"])
    lines = [header]
    n = grid.knots.size
    for i in range(n):
        row = [repr(float(np.asarray(v)[i])) for v in cols.values()]
        row.append(repr(float(gap)))
        lines.append(",".join(row))
    _emit("\n".join(lines) + "\n", cfg.out)
    return 0


def cmd_selftest(cfg: RunConfig) -> int:
    """Reduced-scale health checks: weights, unbiasedness, oracles, ODE agreements."""
    from . import selftest

    results = selftest.run_all(cfg)
    width = max(len(name) for name, _, _ in results)
    ok_all = True
    for name, ok, detail in results:
        status = "pass" if ok else "FAIL"
        print(f"{name:<{width}}  {status}  {detail}")
        ok_all = ok_all and ok
    return 0 if ok_all else 3


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="hestonis",
        description="Importance-sampling Monte Carlo for the Heston model",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="flat key=value config file")
        sp.add_argument("--strikes", type=lambda s: [float(x) for x in s.split(",")],
                        default=None, help="comma-separated strikes")
        sp.add_argument("--kinds", type=lambda s: [x.strip() for x in s.split(",")],
                        default=None, help="comma-separated estimator kinds")
        sp.add_argument("--paths", type=int, default=None)
        sp.add_argument("--steps", type=int, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--out", default=None)
        sp.add_argument("--preset", choices=["table3", "appendixC", "varswap"], default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--payoff", default=None,
                        choices=[k.value for k in PayoffKind])
        sp.add_argument("--stable-output", action="store_true", dest="stable_output",
                        help="zero the timing columns for byte-stable CSV")

    p_price = sub.add_parser("price", help="run estimators and emit a CSV table")
    add_common(p_price)

    p_drift = sub.add_parser("drift", help="dump one drift schedule as CSV")
    add_common(p_drift)
    p_drift.add_argument("--kind", required=True)
    p_drift.add_argument("--strike", type=float, required=True)

    p_self = sub.add_parser("selftest", help="run reduced-scale verification checks")
    add_common(p_self)

    args = parser.parse_args(argv)
    try:
        cfg = build_config(args)
    except (DomainError, OSError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    try:
        if args.command == "price":
            return cmd_price(cfg)
        if args.command == "drift":
            return cmd_drift(cfg, args.kind, args.strike)
        if args.command == "selftest":
            return cmd_selftest(cfg)
    except DomainError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 1
    except OptimError as e:
        print(f"optimizer failure: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
