"""Command-line workflows: solve, classify, scan, boundary, check and oracle.

Exit codes: 0 ok, 1 I/O failure, 2 bad configuration, 3 Undetermined verdict,
4 BlowUp verdict, 5 bad bisection bracket, 6 failed conformance check.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

from . import records
from .classifier import Classification, ClassifyTolerances, Kind
from .diagnostics import DiagnosticsReport, diagnose
from .integrator import IntegrateOpts
from .model import Params
from .omega import (
    BadBracket,
    GridSpec,
    ShootOpts,
    bisect_boundary,
    scalar_boundary,
    scalar_oracle,
    scan,
    shoot_with_rerun,
)
from .seed import DEFAULT_R0, InitialData, QuadratureFailure

EXIT_OK = 0
EXIT_IO = 1
EXIT_CONFIG = 2
EXIT_UNDETERMINED = 3
EXIT_BLOWUP = 4
EXIT_BAD_BRACKET = 5
EXIT_CHECK_FAILED = 6

POHOZAEV_LIMIT = 1e-6
IDENTITY_LIMIT = 1e-7
CHECK_NAMES = ("negativity", "pohozaev", "identities", "intersections", "condition_star", "inequality")


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class RunConfig:
    params: Params
    alpha: InitialData | None = None
    grid: GridSpec | None = None
    segment: tuple[InitialData, InitialData] | None = None
    r0: float = DEFAULT_R0
    rtol: float = 1e-10
    t_max: float = IntegrateOpts().t_max
    tolerances: ClassifyTolerances = field(default_factory=ClassifyTolerances)
    tol: float = 1e-6
    out: Path = Path(".")
    workers: int = 1
    checkpoints: int = records.DEFAULT_CHECKPOINTS

    @property
    def mode(self) -> str:
        present = [m for m in ("alpha", "grid", "segment") if getattr(self, m) is not None]
        if len(present) != 1:
            raise ConfigError("mode", f"exactly one of alpha, grid, segment required, got {present or 'none'}")
        return present[0]

    def shoot_opts(self) -> ShootOpts:
        integ = IntegrateOpts(t_max=self.t_max, rtol=self.rtol, atol=self.rtol * 1e-2)
        return ShootOpts(r0=self.r0, integrate=integ, tolerances=self.tolerances)


def _number(raw: dict, key: str, default: float | None = None) -> float | None:
    if key not in raw or raw[key] is None:
        return default
    try:
        x = float(raw[key])
    except (TypeError, ValueError):
        raise ConfigError(key, f"not a number: {raw[key]!r}") from None
    if not math.isfinite(x):
        raise ConfigError(key, "must be finite")
    return x


def _positive(raw: dict, key: str, default: float) -> float:
    x = _number(raw, key, default)
    if not x > 0:
        raise ConfigError(key, "must be positive")
    return x


def _numbers(value: Any, key: str, count: int) -> list[float]:
    if isinstance(value, str):
        value = value.split(",")
    try:
        out = [float(x) for x in value]
    except (TypeError, ValueError):
        raise ConfigError(key, f"expected {count} comma-separated numbers") from None
    if len(out) != count or not all(math.isfinite(x) for x in out):
        raise ConfigError(key, f"expected {count} finite numbers, got {value!r}")
    return out


def _grid(value: Any) -> GridSpec:
    if isinstance(value, dict):
        try:
            a1 = _numbers(value["alpha1_range"], "grid.alpha1_range", 2)
            a2 = _numbers(value["alpha2_range"], "grid.alpha2_range", 2)
            res = _numbers(value["resolution"], "grid.resolution", 2)
        except KeyError as exc:
            raise ConfigError(f"grid.{exc.args[0]}", "missing") from None
    else:
        nums = _numbers(value, "grid", 6)
        a1, a2, res = nums[0:2], nums[2:4], nums[4:6]
    if any(int(x) != x for x in res):
        raise ConfigError("grid.resolution", "must be integers")
    try:
        return GridSpec(tuple(a1), tuple(a2), (int(res[0]), int(res[1])))
    except ValueError as exc:
        raise ConfigError("grid", str(exc)) from None


def build_config(raw: dict) -> RunConfig:
    """Validate a merged dictionary of settings (JSON file overlaid by flags)."""
    n1 = _number(raw, "n1", 0.0)
    n2 = _number(raw, "n2", 0.0)
    if n1 < 0 or n2 < 0:
        raise ConfigError("n1" if n1 < 0 else "n2", "vortex numbers must be nonnegative")
    params = Params(n1, n2)

    alpha = None
    a1, a2 = _number(raw, "alpha1"), _number(raw, "alpha2")
    if a1 is not None or a2 is not None:
        if a1 is None or a2 is None:
            raise ConfigError("alpha2" if a2 is None else "alpha1", "missing (alpha needs both components)")
        alpha = InitialData(a1, a2)

    grid = _grid(raw["grid"]) if raw.get("grid") is not None else None
    segment = None
    if raw.get("segment") is not None:
        s = _numbers(raw["segment"], "segment", 4)
        segment = (InitialData(s[0], s[1]), InitialData(s[2], s[3]))

    tol_raw = raw.get("tolerances") or {}
    base = ClassifyTolerances()
    tolerances = ClassifyTolerances(
        top=_positive(tol_raw, "top", base.top),
        mixed=_positive(tol_raw, "mixed", base.mixed),
        beta_margin=_positive(tol_raw, "beta_margin", base.beta_margin),
        window_fraction=_positive(tol_raw, "window_fraction", base.window_fraction),
        tail_floor=_number(tol_raw, "tail_floor", base.tail_floor),
        beta_agreement=_positive(tol_raw, "beta_agreement", base.beta_agreement),
    )
    if tolerances.window_fraction >= 1:
        raise ConfigError("tolerances.window_fraction", "must be below 1")

    r0 = _positive(raw, "r0", DEFAULT_R0)
    t_max = _number(raw, "t_max", IntegrateOpts().t_max)
    if not t_max > math.log(r0):
        raise ConfigError("t_max", "must exceed ln(r0)")
    workers = _positive(raw, "workers", 1)
    checkpoints = _positive(raw, "checkpoints", records.DEFAULT_CHECKPOINTS)
    return RunConfig(
        params=params,
        alpha=alpha,
        grid=grid,
        segment=segment,
        r0=r0,
        rtol=_positive(raw, "rtol", 1e-10),
        t_max=t_max,
        tolerances=tolerances,
        tol=_positive(raw, "tol", 1e-6),
        out=Path(raw.get("out") or "."),
        workers=int(workers),
        checkpoints=max(2, int(checkpoints)),
    )


def _require(cfg: RunConfig, mode: str) -> None:
    if cfg.mode != mode:
        raise ConfigError(mode, f"this command needs {mode} mode, got {cfg.mode}")


def _verdict_code(kind: Kind) -> int:
    if kind is Kind.UNDETERMINED:
        return EXIT_UNDETERMINED
    if kind is Kind.BLOW_UP:
        return EXIT_BLOWUP
    return EXIT_OK


def _write(cfg: RunConfig, name: str, text: str) -> Path:
    cfg.out.mkdir(parents=True, exist_ok=True)
    path = cfg.out / name
    records.write_text(path, text)
    return path


# -- conformance checks --------------------------------------------------------


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    measured: Any
    threshold: Any = None
    alpha: tuple[float, float] | None = None


def _intersections_ok(report: DiagnosticsReport) -> bool:
    if report.apriori_R0 is None or report.last_intersection_t is None:
        return True
    return report.last_intersection_t <= math.log(report.apriori_R0)


def run_checks(
    cls: Classification,
    report: DiagnosticsReport,
    alpha: tuple[float, float] | None = None,
    tolerances: ClassifyTolerances | None = None,
) -> list[CheckResult]:
    tol = tolerances or ClassifyTolerances()
    kind = cls.kind
    out = [
        CheckResult("negativity", kind is Kind.BLOW_UP or report.negativity_ok, report.negativity_ok, True, alpha),
        CheckResult("pohozaev", report.pohozaev_max_rel_residual < POHOZAEV_LIMIT,
                    report.pohozaev_max_rel_residual, POHOZAEV_LIMIT, alpha),
        CheckResult("identities", max(report.identity_residuals) < IDENTITY_LIMIT,
                    list(report.identity_residuals), IDENTITY_LIMIT, alpha),
    ]
    inter_ok = kind is not Kind.TOPOLOGICAL or _intersections_ok(report)
    out.append(CheckResult("intersections", inter_ok,
                           {"count": report.intersection_count, "last_t": report.last_intersection_t,
                            "apriori_R0": report.apriori_R0}, None, alpha))
    out.append(CheckResult("condition_star", not report.condition_star_flag, report.condition_star_flag, False, alpha))
    ineq_ok = True
    measured = None
    if kind is Kind.NON_TOPOLOGICAL:
        fit = cls.fit
        margin = report.nontop_inequality_margin
        lower = 2.0 - tol.beta_margin
        ineq_ok = fit is not None and margin is not None and margin > 0 and fit.beta1 > lower and fit.beta2 > lower
        measured = {"margin": margin, "beta1": fit.beta1 if fit else None, "beta2": fit.beta2 if fit else None}
    out.append(CheckResult("inequality", ineq_ok, measured, 0.0, alpha))
    return out


def _inject(report: DiagnosticsReport, name: str | None) -> DiagnosticsReport:
    """Test hook: overwrite one diagnostic with a value that must fail its check."""
    if name is None:
        return report
    if name == "negativity":
        return replace(report, negativity_ok=False)
    if name == "pohozaev":
        return replace(report, pohozaev_max_rel_residual=1.0)
    if name == "identities":
        return replace(report, identity_residuals=(1.0, 1.0, 1.0))
    if name == "condition_star":
        return replace(report, condition_star_flag=True)
    raise ConfigError("inject_violation", f"unknown check {name!r}")


# -- commands ------------------------------------------------------------------


def cmd_solve(cfg: RunConfig) -> int:
    _require(cfg, "alpha")
    traj, cls, _ = shoot_with_rerun(cfg.params, cfg.alpha, cfg.shoot_opts())
    report = diagnose(traj, cls)
    _write(cfg, "trajectory.csv", records.trajectory_csv(traj, cfg.checkpoints))
    _write(cfg, "diagnostics.json", records.dumps({**report.to_dict(), "classification": records.classification_dict(cls)}))
    print(f"{cls.kind.value}: {cls.reason}")
    return _verdict_code(cls.kind)


def cmd_classify(cfg: RunConfig) -> int:
    _require(cfg, "alpha")
    _, cls, rerun = shoot_with_rerun(cfg.params, cfg.alpha, cfg.shoot_opts())
    _write(cfg, "classification.json", records.dumps({**records.classification_dict(cls), "rerun": rerun}))
    print(f"{cls.kind.value}: {cls.reason}")
    return _verdict_code(cls.kind)


def _summary(counts: dict[Kind, int]) -> str:
    return " ".join(f"{k.value}={n}" for k, n in counts.items())


def cmd_scan(cfg: RunConfig) -> int:
    _require(cfg, "grid")
    omega = scan(cfg.params, cfg.grid, cfg.shoot_opts(), workers=cfg.workers)
    _write(cfg, "omega.csv", records.omega_csv(omega))
    _write(cfg, "omega.json", records.dumps(records.omega_dict(omega)))
    print(f"points={omega.verdicts.size} {_summary(omega.counts())}")
    return EXIT_OK


def cmd_boundary(cfg: RunConfig) -> int:
    _require(cfg, "segment")
    a_in, a_out = cfg.segment
    bp = bisect_boundary(cfg.params, a_in, a_out, cfg.tol, cfg.shoot_opts())
    _write(cfg, "boundary.json", records.dumps(records.boundary_dict(bp)))
    print(f"alpha*=({bp.alpha.alpha1:.12g}, {bp.alpha.alpha2:.12g}) width={bp.bracket_width:.3g} "
          f"kind={bp.boundary_kind.value}" + (" anomaly" if bp.anomaly else ""))
    return EXIT_OK


def cmd_check(cfg: RunConfig, inject: str | None = None) -> int:
    opts = cfg.shoot_opts()
    results: list[CheckResult] = []
    if cfg.mode == "alpha":
        traj, cls, _ = shoot_with_rerun(cfg.params, cfg.alpha, opts)
        results = run_checks(cls, _inject(diagnose(traj, cls), inject), cfg.alpha.as_tuple(), cfg.tolerances)
    elif cfg.mode == "grid":
        omega = scan(cfg.params, cfg.grid, opts, workers=cfg.workers)
        for pt in omega.points:
            results += run_checks(pt.classification, _inject(pt.report, inject), pt.alpha.as_tuple(), cfg.tolerances)
    else:
        raise ConfigError("segment", "check runs on an alpha point or a grid")
    summary = []
    for name in CHECK_NAMES:
        mine = [r for r in results if r.name == name]
        failed = [r for r in mine if not r.passed]
        summary.append({
            "name": name,
            "passed": not failed,
            "evaluated": len(mine),
            "failures": [{"alpha": r.alpha, "measured": r.measured} for r in failed],
            "worst": _worst(name, mine),
        })
    passed = all(s["passed"] for s in summary)
    _write(cfg, "check.json", records.dumps({"passed": passed, "checks": summary}))
    for s in summary:
        print(f"{'PASS' if s['passed'] else 'FAIL'} {s['name']} ({s['evaluated']} evaluated)")
    return EXIT_OK if passed else EXIT_CHECK_FAILED


def _worst(name: str, results: list[CheckResult]) -> float | None:
    if name == "pohozaev":
        return max((r.measured for r in results), default=None)
    if name == "identities":
        return max((max(r.measured) for r in results), default=None)
    if name == "inequality":
        margins = [r.measured["margin"] for r in results if r.measured and r.measured["margin"] is not None]
        return min(margins, default=None)
    return None


def cmd_oracle(cfg: RunConfig, bracket: tuple[float, float] | None = None) -> int:
    n = cfg.params.n1
    if cfg.params.n2 != n:
        raise ConfigError("n2", "the scalar oracle needs n1 = n2")
    if bracket is not None:
        bp = scalar_boundary(n, bracket[0], bracket[1], cfg.tol, cfg.shoot_opts())
        _write(cfg, "oracle_boundary.json", records.dumps(records.boundary_dict(bp)))
        print(f"alpha*={bp.alpha.alpha1:.15g} width={bp.bracket_width:.3g} kind={bp.boundary_kind.value}")
        return EXIT_OK
    _require(cfg, "alpha")
    if cfg.alpha.alpha1 != cfg.alpha.alpha2:
        raise ConfigError("alpha2", "the scalar oracle needs alpha1 = alpha2")
    traj, cls = scalar_oracle(n, cfg.alpha.alpha1, cfg.shoot_opts())
    _write(cfg, "oracle.csv", records.trajectory_csv(traj, cfg.checkpoints))
    _write(cfg, "oracle.json", records.dumps(records.classification_dict(cls)))
    print(f"{cls.kind.value}: {cls.reason}")
    return _verdict_code(cls.kind)


# -- argument parsing ------------------------------------------------------------

_FLAG_KEYS = ("n1", "n2", "alpha1", "alpha2", "r0", "rtol", "t_max", "grid", "segment", "tol", "out", "workers",
              "checkpoints")


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="JSON file of settings; flags override it")
    common.add_argument("--n1", type=float)
    common.add_argument("--n2", type=float)
    common.add_argument("--alpha1", type=float)
    common.add_argument("--alpha2", type=float)
    common.add_argument("--r0", type=float, help="seed radius")
    common.add_argument("--rtol", type=float)
    common.add_argument("--tmax", dest="t_max", type=float, help="horizon in t = ln r")
    common.add_argument("--grid", help="a1min,a1max,a2min,a2max,n1,n2 (write --grid=... for negative values)")
    common.add_argument("--segment", help="inside a1,a2 then outside a1,a2 (write --segment=...)")
    common.add_argument("--tol", type=float, help="bisection tolerance")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int)
    common.add_argument("--checkpoints", type=int, help="rows in trajectory CSVs")

    parser = argparse.ArgumentParser(prog="su3radial", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (
        ("solve", "integrate one point, write trajectory CSV and diagnostics JSON"),
        ("classify", "classify one point"),
        ("scan", "classify a grid of initial data"),
        ("boundary", "bisect a segment for a boundary point"),
        ("check", "run the conformance checks on a point or a grid"),
        ("oracle", "integrate the diagonal reduction"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        if name == "check":
            p.add_argument("--inject-violation", choices=("negativity", "pohozaev", "identities", "condition_star"),
                           help=argparse.SUPPRESS)
        if name == "oracle":
            p.add_argument("--bisect", help="lo,hi: bisect alpha for the topological value (write --bisect=...)")
    return parser


def _merged(args: argparse.Namespace) -> dict:
    raw: dict = {}
    if args.config is not None:
        try:
            raw = json.loads(args.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError("config", f"cannot read {args.config}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError("config", f"invalid JSON: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config", "top level must be an object")
        if "tmax" in raw and "t_max" not in raw:
            raw["t_max"] = raw.pop("tmax")
    for key in _FLAG_KEYS:
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    return raw


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    try:
        raw = _merged(args)
        if args.command == "oracle":
            # the diagonal reduction has one vortex number and one shooting value
            for second, first in (("n2", "n1"), ("alpha2", "alpha1")):
                if raw.get(second) is None and raw.get(first) is not None:
                    raw[second] = raw[first]
        cfg = build_config(raw)
        if args.command == "solve":
            return cmd_solve(cfg)
        if args.command == "classify":
            return cmd_classify(cfg)
        if args.command == "scan":
            return cmd_scan(cfg)
        if args.command == "boundary":
            return cmd_boundary(cfg)
        if args.command == "check":
            return cmd_check(cfg, args.inject_violation)
        bracket = None
        if args.bisect is not None:
            lo, hi = _numbers(args.bisect, "bisect", 2)
            bracket = (lo, hi)
        return cmd_oracle(cfg, bracket)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QuadratureFailure as exc:
        print(f"config error: r0: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BadBracket as exc:
        print(f"bad bracket: {exc}", file=sys.stderr)
        return EXIT_BAD_BRACKET
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
