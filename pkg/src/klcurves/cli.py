"""Command-line entry point: closed-form tables, simulations and verifications.

Every subcommand produces a :class:`~klcurves.report.RunReport` and writes it
as CSV or JSON.  Exit status is 0 when every row passes, 1 when a check fails
or the output cannot be written and 2 for usage errors.  Errors are reported
as one line on standard error.

Examples::

    klcurves curve --family gaussian-known-mean -d 1 --direction forward --n 1..12
    klcurves simulate --family gamma --alpha 1 --theta 2 --n 10 --seed 7
    klcurves verify cm --family gaussian-known-mean -d 1 --n 3..25 --max-k 4
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
import time
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import kernels as kn
from .curves import curve_table, risk
from .errors import DomainError, UnsupportedError
from .expfam import exact_reverse_risk
from .linalg import SpdMatrix
from .models import (
    Bernoulli,
    Binomial,
    Direction,
    GammaScale,
    GaussianFull,
    GaussianKnownMean,
    ModelSpec,
    Poisson,
    describe,
)
from .montecarlo import DEFAULT_REPLICATES, estimate_risk, paired_difference, wishart_moment_report
from .report import ReportRow, ReportWriteError, RunReport, emit

__all__ = ["CliConfig", "build_parser", "parse_config", "run", "main", "UsageError"]

log = logging.getLogger("klcurves")

PROG = "klcurves"
FAMILIES = ("gaussian-known-mean", "gaussian-full", "gamma", "bernoulli", "binomial", "poisson")
DISCRETE = ("bernoulli", "binomial", "poisson")
DEFAULT_MAX_K = 5
QUAD_TOL = 1e-6


class UsageError(Exception):
    """Invalid command line; maps to exit status 2."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def parse_range(text: str) -> tuple[int, int]:
    """``"A..B"`` (inclusive) or a single ``"A"``."""
    parts = text.split("..")
    try:
        if len(parts) == 1:
            a = b = int(parts[0])
        elif len(parts) == 2:
            a, b = int(parts[0]), int(parts[1])
        else:
            raise ValueError
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected A..B or A, got {text!r}") from None
    if a < 1 or b < a:
        raise argparse.ArgumentTypeError(f"range must satisfy 1 <= A <= B, got {text!r}")
    return a, b


@dataclass(frozen=True)
class CliConfig:
    command: str
    family: str = "gaussian-known-mean"
    d: int = 1
    alpha: float = 1.0
    theta: float = 1.0
    p: float = 0.5
    m: int = 1
    lam: float = 1.0
    mu: float = 0.0
    sigma: float = 1.0
    n_range: tuple = (1, 1)
    reps: int = DEFAULT_REPLICATES
    seed: int = 42
    direction: str = "forward"
    fmt: str = "csv"
    output: Optional[str] = None
    workers: int = 1
    max_k: int = DEFAULT_MAX_K

    def model(self) -> ModelSpec:
        fam = self.family
        if fam in ("gaussian-known-mean", "gaussian-full"):
            if self.sigma <= 0 or not math.isfinite(self.sigma):
                raise DomainError(f"--sigma must be finite and > 0, got {self.sigma}")
            cov = SpdMatrix(self.sigma**2 * np.eye(self.d))
            if fam == "gaussian-known-mean":
                return GaussianKnownMean(self.d, cov)
            return GaussianFull(self.d, np.full(self.d, self.mu), cov)
        if fam == "gamma":
            return GammaScale(self.alpha, self.theta)
        if fam == "bernoulli":
            return Bernoulli(self.p)
        if fam == "binomial":
            return Binomial(self.m, self.p)
        if fam == "poisson":
            return Poisson(self.lam)
        raise DomainError(f"unknown family {fam!r}")

    @property
    def ns(self) -> range:
        return range(self.n_range[0], self.n_range[1] + 1)


def _add_common(p: argparse.ArgumentParser, *, families=FAMILIES, mc=False, model=True):
    if model:
        p.add_argument("--family", choices=families, default=families[0])
        p.add_argument("--alpha", type=float, default=1.0, help="Gamma shape")
        p.add_argument("--theta", type=float, default=1.0, help="true Gamma scale")
        p.add_argument("--p", type=float, default=0.5, help="Bernoulli/Binomial success probability")
        p.add_argument("--m", type=int, default=1, help="Binomial trials")
        p.add_argument("--lam", type=float, default=1.0, help="Poisson rate")
        p.add_argument("--mu", type=float, default=0.0, help="true Gaussian mean (every coordinate)")
        p.add_argument("--sigma", type=float, default=1.0, help="true Gaussian covariance is sigma^2 I")
        p.add_argument("--direction", choices=[d.value for d in Direction], default="forward")
    p.add_argument("-d", "--d", type=int, default=1, help="dimension")
    p.add_argument("--n", type=parse_range, default=(1, 1), metavar="A..B", help="inclusive sample-size range")
    if mc:
        p.add_argument("--reps", type=int, default=DEFAULT_REPLICATES)
        p.add_argument("--seed", type=int, default=42)
        p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.add_argument("--output", default=None, help="output path (default: standard output)")
    p.add_argument("--verbose", action="store_true", help="log timing to standard error")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description="Learning curves of maximum likelihood estimators under KL loss.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    _add_common(sub.add_parser("curve", help="closed-form risk table"))
    _add_common(sub.add_parser("simulate", help="Monte Carlo risks against closed forms"), mc=True)
    _add_common(sub.add_parser("diff", help="paired E_n - E_{n+1} estimates"), mc=True)

    verify = sub.add_parser("verify", help="numerical verifications").add_subparsers(
        dest="check", required=True, parser_class=_Parser
    )
    _add_common(verify.add_parser("kernels", help="Laplace kernel positivity and reconstruction"), model=False)
    cm = verify.add_parser("cm", help="alternating differences of a forward curve")
    _add_common(cm, families=("gaussian-known-mean", "gaussian-full", "gamma"))
    cm.add_argument("--max-k", type=int, default=DEFAULT_MAX_K)
    _add_common(verify.add_parser("wishart", help="Wishart moment identities"), mc=True, model=False)

    expfam = sub.add_parser("expfam", help="exponential-family reverse risks").add_subparsers(
        dest="check", required=True, parser_class=_Parser
    )
    _add_common(expfam.add_parser("exact", help="exact enumeration vs Monte Carlo"), families=DISCRETE, mc=True)
    return parser


def parse_config(argv: Sequence[str]) -> CliConfig:
    """Parse and validate ``argv``; raises :class:`UsageError`."""
    ns = build_parser().parse_args(list(argv))
    command = ns.command if ns.command in ("curve", "simulate", "diff") else f"{ns.command} {ns.check}"
    cfg = CliConfig(
        command=command,
        family=getattr(ns, "family", "gaussian-known-mean"),
        d=ns.d,
        alpha=getattr(ns, "alpha", 1.0),
        theta=getattr(ns, "theta", 1.0),
        p=getattr(ns, "p", 0.5),
        m=getattr(ns, "m", 1),
        lam=getattr(ns, "lam", 1.0),
        mu=getattr(ns, "mu", 0.0),
        sigma=getattr(ns, "sigma", 1.0),
        n_range=ns.n,
        reps=getattr(ns, "reps", DEFAULT_REPLICATES),
        seed=getattr(ns, "seed", 42),
        direction=getattr(ns, "direction", "forward"),
        fmt=ns.format,
        output=ns.output,
        workers=getattr(ns, "workers", 1),
        max_k=getattr(ns, "max_k", DEFAULT_MAX_K),
    )
    if cfg.d < 1:
        raise UsageError(f"-d must be >= 1, got {cfg.d}")
    if cfg.reps < 100:
        raise UsageError(f"--reps must be >= 100, got {cfg.reps}")
    if not 0 <= cfg.seed < 2**64:
        raise UsageError(f"--seed must be in [0, 2^64), got {cfg.seed}")
    if cfg.workers < 1:
        raise UsageError(f"--workers must be >= 1, got {cfg.workers}")
    if cfg.max_k < 1:
        raise UsageError(f"--max-k must be >= 1, got {cfg.max_k}")
    if command == "expfam exact" and cfg.direction != "reverse":
        cfg = CliConfig(**{**cfg.__dict__, "direction": "reverse"})
    try:
        if command not in ("verify kernels", "verify wishart"):
            cfg.model()
    except (DomainError, ValueError) as exc:
        raise UsageError(str(exc)) from None
    return cfg


# --- subcommands --------------------------------------------------------------


def _curve(cfg: CliConfig) -> RunReport:
    model = cfg.model()
    # no simulation here: the Monte Carlo columns are nan and every row passes
    rows = [
        ReportRow(pt.n, pt.value, math.nan, math.nan, 0, pt.finite, True)
        for pt in curve_table(model, cfg.direction, *cfg.n_range)
    ]
    return RunReport(describe(model), cfg.direction, rows, kind="curve")


def _simulate(cfg: CliConfig) -> RunReport:
    model = cfg.model()
    rows = []
    for n in cfg.ns:
        est = estimate_risk(model, cfg.direction, n, cfg.reps, cfg.seed, cfg.workers)
        rows.append(ReportRow.from_estimate(n, risk(model, cfg.direction, n), est))
    return RunReport(describe(model), cfg.direction, rows, seed=cfg.seed, kind="simulate")


def _diff(cfg: CliConfig) -> RunReport:
    model = cfg.model()
    rows = []
    for n in cfg.ns:
        now, nxt = risk(model, cfg.direction, n), risk(model, cfg.direction, n + 1)
        if math.isinf(now):
            rows.append(ReportRow(n, math.inf, math.inf, math.inf, 0, False, True))
            continue
        est = paired_difference(model, cfg.direction, n, cfg.reps, cfg.seed, cfg.workers)
        rows.append(ReportRow.from_estimate(n, now - nxt, est))
    return RunReport(describe(model), cfg.direction, rows, seed=cfg.seed, kind="diff")


def _verify_kernels(cfg: CliConfig) -> RunReport:
    kinds = (kn.Bd(cfg.d), kn.BdTilde(cfg.d), kn.Breve())
    grid = kn.positivity_grid()
    rows = []
    for kind in kinds:
        positive = all(kn.kernel_value(kind, t) > 0 for t in grid)
        for dx in (0.5, 2.0, 10.0):
            x = kind.threshold + dx
            target, quad = kn.laplace_target(kind, x), kn.laplace_reconstruct(kind, x)
            rows.append(ReportRow.exact(x, target, quad, positive and abs(quad - target) <= QUAD_TOL))
    desc = f"laplace-kernels(d={cfg.d}; rows: B_d, B~_d, B-breve at threshold+0.5, +2, +10)"
    return RunReport(desc, "forward", rows, kind="verify-kernels")


def _verify_cm(cfg: CliConfig) -> RunReport:
    model = cfg.model()
    if cfg.direction != "forward":
        raise UsageError("verify cm checks the forward curves; use --direction forward")
    a, b = cfg.n_range
    if b - a < cfg.max_k:
        raise UsageError(f"--n range needs more than --max-k={cfg.max_k} points")
    values = [risk(model, "forward", n) for n in cfg.ns]
    if not all(math.isfinite(v) for v in values):
        raise UsageError(f"risk is infinite somewhere in {a}..{b}; start the range above the threshold")
    diffs = [kn.alternating_differences(values, k) for k in range(1, cfg.max_k + 1)]
    rows = []
    for i in range(len(values) - cfg.max_k):
        smallest = min(dk[i] for dk in diffs)
        rows.append(ReportRow.exact(a + i, values[i], smallest, smallest > 0))
    return RunReport(f"{describe(model)}; mc_mean = min alternating difference, k<={cfg.max_k}", "forward", rows,
                     kind="verify-cm")


def _verify_wishart(cfg: CliConfig) -> RunReport:
    rows = []
    for n in cfg.ns:
        if n < cfg.d:
            raise UsageError(f"Wishart sampling needs n >= d={cfg.d}, got {n}")
        rep = wishart_moment_report(cfg.d, n, cfg.reps, cfg.seed, cfg.workers)
        rows.extend(ReportRow.from_estimate(n, m.target, m.estimate) for m in rep.moments)
    desc = f"wishart(d={cfg.d}, scale=I; rows per n: E[log det W], E[tr W^-1], E[(W^-1)_11])"
    return RunReport(desc, "forward", rows, seed=cfg.seed, kind="verify-wishart")


def _expfam_exact(cfg: CliConfig) -> RunReport:
    model = cfg.model()
    rows = []
    for n in cfg.ns:
        est = estimate_risk(model, "reverse", n, cfg.reps, cfg.seed, cfg.workers)
        rows.append(ReportRow.from_estimate(n, exact_reverse_risk(model, n), est))
    return RunReport(describe(model), "reverse", rows, seed=cfg.seed, kind="expfam-exact")


_COMMANDS = {
    "curve": _curve,
    "simulate": _simulate,
    "diff": _diff,
    "verify kernels": _verify_kernels,
    "verify cm": _verify_cm,
    "verify wishart": _verify_wishart,
    "expfam exact": _expfam_exact,
}


def _fail(code: int, message: str) -> int:
    print(f"{PROG}: error: {' '.join(str(message).split())}", file=sys.stderr)
    return code


def run(cfg: CliConfig) -> int:
    """Execute a parsed configuration and return the exit status."""
    start = time.perf_counter()
    try:
        report = _COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        return _fail(2, exc)
    except (DomainError, UnsupportedError) as exc:
        return _fail(2, exc)
    elapsed = time.perf_counter() - start
    log.info("%s finished in %.3f s", cfg.command, elapsed)
    try:
        emit(report, cfg.fmt, cfg.output if cfg.output is not None else sys.stdout)
    except ReportWriteError as exc:
        return _fail(1, exc)
    return 0 if report.passed else 1


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        return _fail(2, exc)
    if "--verbose" in argv:
        logging.basicConfig(level=logging.INFO, stream=sys.stderr, format=f"{PROG}: %(message)s")
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
