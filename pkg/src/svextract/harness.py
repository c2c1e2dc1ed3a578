"""Experiment orchestration and CLI.

``run_experiment`` drives the full pipeline per trial: generate a synthetic
matrix, build subspaces, extract singular values with each requested method,
evaluate each requested bound, and self-check soundness (every bound must
dominate the actual error on applicable indices, up to the 1e-10 * sigma_1
cushion and excluding indices whose error sits below the machine floor).
Results are written as CSV with a fixed schema; identical configs produce
bitwise-identical files.
"""

from __future__ import annotations

import argparse
import sys
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import blockview, bounds, extract, sketching, synthgen
from .extract import GN, HMT, METHODS, RR, SVD
from .kernels import RankDeficientCore

CSV_COLUMNS = (
    "trial", "method", "i", "sigma_exact", "sigma_hat", "abs_error",
    "weyl", "forward", "backward", "backward_approx", "improved",
    "tau", "applicable",
)
CSV_HEADER = ",".join(CSV_COLUMNS)

BOUND_NAMES = ("weyl", "forward", "backward", "backward_approx", "improved")
PROVENANCES = ("sketched", "exact", "random")

#: Indices whose true error is below this multiple of eps * sigma_1 are not
#: held against any bound; comparisons under the float floor are meaningless.
MACHINE_FLOOR = 100 * np.finfo(float).eps
SOUNDNESS_CUSHION = 1e-10


class ConfigError(Exception):
    """Invalid experiment configuration (CLI exit code 2)."""


@dataclass(frozen=True)
class ExperimentConfig:
    m: int = 400
    n: int = 400
    r: int = 50
    ell: int = 0
    decay: str = synthgen.EXPONENTIAL
    q: int = 1
    seed: int = 0
    trials: int = 1
    methods: tuple = METHODS
    bounds: tuple = ()
    provenance: str = "sketched"

    def validate(self) -> None:
        if not (self.n >= self.r >= 1):
            raise ConfigError(f"need n >= r >= 1, got n={self.n}, r={self.r}")
        if self.ell < 0 or self.m < self.r + self.ell:
            raise ConfigError(f"need m >= r + ell and ell >= 0, got m={self.m}, r={self.r}, ell={self.ell}")
        if self.m < self.n:
            raise ConfigError(f"need m >= n, got m={self.m}, n={self.n}")
        if self.q < 1:
            raise ConfigError(f"need q >= 1, got q={self.q}")
        if self.trials < 1:
            raise ConfigError(f"need trials >= 1, got trials={self.trials}")
        if self.decay not in (synthgen.EXPONENTIAL, synthgen.ALGEBRAIC):
            raise ConfigError(f"unknown decay {self.decay!r}")
        if self.provenance not in PROVENANCES:
            raise ConfigError(f"unknown provenance {self.provenance!r}")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}")
        bad = [b for b in self.bounds if b not in BOUND_NAMES]
        if bad:
            raise ConfigError(f"unknown bounds {bad}")
        if "improved" in self.bounds and self.ell == 0:
            raise ConfigError("the improved bound requires ell > 0")


@dataclass
class MethodRecord:
    method: str
    sigma_hat: np.ndarray
    pass_count: int
    matmul_count: int
    wall_time: float
    weyl: float | None = None
    forward: bounds.BoundReport | None = None
    backward: bounds.BoundReport | None = None
    backward_approx: bounds.BoundReport | None = None
    improved: bounds.BoundReport | None = None


@dataclass
class TrialRecord:
    index: int
    sigma_exact: np.ndarray
    methods: dict = field(default_factory=dict)
    failed: bool = False
    failure: str = ""


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    trials: list
    violations: list = field(default_factory=list)
    notes: list = field(default_factory=list)


def _trial_seeds(seed: int, trials: int):
    """Two integer sub-seeds per trial (matrix, subspaces), from one SeedSequence."""
    children = np.random.SeedSequence(seed).spawn(trials)
    return [tuple(int(x) for x in c.generate_state(2, np.uint64)) for c in children]


def _build_pair(cfg: ExperimentConfig, truth, sketch_seed: int) -> sketching.SubspacePair:
    if cfg.provenance == "exact":
        return sketching.exact_subspaces(truth, cfg.r, cfg.ell)
    if cfg.provenance == "random":
        return sketching.random_subspaces(cfg.m, cfg.n, cfg.r, cfg.ell, sketch_seed)
    return sketching.sketch_subspaces(truth.a, cfg.r, cfg.ell, cfg.q, sketch_seed)


def _hmt_partition(a, result, pair):
    hmt_pair = sketching.SubspacePair(
        u_tilde=result.factors["q"], v_tilde=pair.v_tilde,
        r=pair.r, ell=0, provenance="hmt-range",
    )
    return blockview.block_transform(a, hmt_pair)


def _method_bounds(cfg, a, method, result, pair, part, sigma_exact, rec):
    """Fill the requested bound fields of a method record."""
    if not cfg.bounds:
        return
    if method == HMT:
        part = _hmt_partition(a, result, pair)
    if "weyl" in cfg.bounds:
        perturb_as = GN if method == HMT else method
        rec.weyl = bounds.weyl(blockview.perturbation_matrix(part, perturb_as))
    if "forward" in cfg.bounds:
        rec.forward = bounds.forward_bound(part, method, sigma_exact)
    if method == GN and cfg.ell == 0:
        if "backward" in cfg.bounds:
            rec.backward = bounds.backward_bound(part, result.sigma_hat, approximate_gap=False)
        if "backward_approx" in cfg.bounds:
            rec.backward_approx = bounds.backward_bound(part, result.sigma_hat, approximate_gap=True)
    if method == GN and cfg.ell > 0 and "improved" in cfg.bounds:
        rec.improved = bounds.improved_oversampling_bound(part, sigma_exact)


def _check_soundness(report, trial, rec, sigma_exact):
    """Record violations where a bound fails to dominate the actual error."""
    err = np.abs(sigma_exact - rec.sigma_hat)
    sigma1 = sigma_exact[0]
    floor = MACHINE_FLOOR * sigma1
    cushion = SOUNDNESS_CUSHION * sigma1

    def check(name, value_fn, applicable_fn, heuristic=False):
        for i in range(err.size):
            if err[i] < floor or not applicable_fn(i):
                continue
            if err[i] > value_fn(i) + cushion:
                msg = (f"trial {trial.index} {rec.method} {name} i={i + 1}: "
                       f"error {err[i]:.6e} exceeds bound {value_fn(i):.6e}")
                (report.notes if heuristic else report.violations).append(msg)

    if rec.weyl is not None:
        check("weyl", lambda i: rec.weyl, lambda i: True)
    for name, rep in (("forward", rec.forward), ("backward", rec.backward),
                      ("backward_approx", rec.backward_approx)):
        if rep is not None:
            check(name, lambda i, rep=rep: rep.bound[i], lambda i, rep=rep: bool(rep.applicable[i]))
    if rec.improved is not None:
        check("improved", lambda i: rec.improved.bound[i],
              lambda i: bool(rec.improved.applicable[i]), heuristic=True)


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    """Run all trials of a configuration; deterministic for a fixed config.

    A rank-deficient core fails the trial (recorded, sweep continues).
    Soundness violations are collected in the report, never dropped.
    """
    cfg.validate()
    report = ExperimentReport(config=cfg, trials=[])
    profile = synthgen.sv_profile(cfg.decay, cfg.n)
    sigma_exact = profile.values[: cfg.r]
    need_partition = bool(cfg.bounds)

    for t, (matrix_seed, sketch_seed) in enumerate(_trial_seeds(cfg.seed, cfg.trials)):
        trial = TrialRecord(index=t, sigma_exact=sigma_exact)
        try:
            truth = synthgen.assemble_synthetic(profile, cfg.m, matrix_seed)
            pair = _build_pair(cfg, truth, sketch_seed)
            part = blockview.block_transform(truth.a, pair) if need_partition else None
            for method in (m for m in METHODS if m in cfg.methods):
                counting = extract.CountingMatrix(truth.a)
                start = time.perf_counter()
                result = extract.EXTRACTORS[method](counting, pair)
                rec = MethodRecord(
                    method=method,
                    sigma_hat=result.sigma_hat,
                    pass_count=result.pass_count,
                    matmul_count=result.matmul_count,
                    wall_time=time.perf_counter() - start,
                )
                _method_bounds(cfg, truth.a, method, result, pair, part, profile.values, rec)
                _check_soundness(report, trial, rec, sigma_exact)
                trial.methods[method] = rec
        except RankDeficientCore as exc:
            trial = TrialRecord(index=t, sigma_exact=sigma_exact, failed=True, failure=str(exc))
        report.trials.append(trial)
    return report


def _fmt(x) -> str:
    """Shortest round-trip decimal form of a float; empty for None."""
    if x is None:
        return ""
    return repr(float(x))


def _csv_rows(report: ExperimentReport):
    for trial in report.trials:
        if trial.failed:
            yield (str(trial.index), "failed", "0") + ("",) * 10
            continue
        for method in sorted(trial.methods):
            rec = trial.methods[method]
            primary = rec.forward or rec.backward or rec.backward_approx or rec.improved
            for i in range(trial.sigma_exact.size):
                exact = trial.sigma_exact[i]
                hat = rec.sigma_hat[i]
                yield (
                    str(trial.index),
                    method,
                    str(i + 1),
                    _fmt(exact),
                    _fmt(hat),
                    _fmt(abs(exact - hat)),
                    _fmt(rec.weyl),
                    _fmt(rec.forward.bound[i]) if rec.forward else "",
                    _fmt(rec.backward.bound[i]) if rec.backward else "",
                    _fmt(rec.backward_approx.bound[i]) if rec.backward_approx else "",
                    _fmt(rec.improved.bound[i]) if rec.improved else "",
                    _fmt(primary.tau[i]) if primary else "",
                    ("true" if primary.applicable[i] else "false") if primary else "",
                )


def emit_csv(report: ExperimentReport, path) -> None:
    """Write the report as CSV; abs_error is recomputed here from the sigmas."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(CSV_HEADER + "\n")
            for row in _csv_rows(report):
                fh.write(",".join(row) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc


def verify_pass_counts(report: ExperimentReport) -> bool:
    """True iff every method's (pass, matmul) counters match the expected pattern."""
    for trial in report.trials:
        if trial.failed:
            continue
        for method, rec in trial.methods.items():
            if (rec.pass_count, rec.matmul_count) != extract.ACCESS_PATTERN[method]:
                return False
    return True


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------

FIG_PRESETS = {
    "fig1": dict(methods=(GN, RR, SVD), bounds=(), ell=0),
    "fig2": dict(methods=(GN,), bounds=("weyl", "forward"), ell=0),
    "fig3": dict(methods=(GN,), bounds=("weyl", "forward", "improved"), ell=25),
    "fig4": dict(methods=(GN, RR, SVD, HMT), bounds=("weyl", "forward"), ell=0),
    "fig5": dict(methods=(GN,), bounds=("weyl", "forward", "backward", "backward_approx"), ell=0),
}


def load_config_file(path) -> dict:
    """Parse a flat key=value config file; '#' starts a comment."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = (part.strip() for part in line.split("=", 1))
            out[key] = value
    return out


_INT_KEYS = ("m", "n", "r", "ell", "q", "seed", "trials")


def _coerce(key: str, value: str):
    if key in _INT_KEYS:
        try:
            return int(value)
        except ValueError:
            raise ConfigError(f"{key} must be an integer, got {value!r}") from None
    if key in ("methods", "bounds"):
        return tuple(v for v in value.split(",") if v) if value else ()
    return value


def _merge_config(args) -> ExperimentConfig:
    values = {}
    if getattr(args, "config", None):
        for key, value in load_config_file(args.config).items():
            if key not in ExperimentConfig.__dataclass_fields__:
                raise ConfigError(f"unknown config key {key!r}")
            values[key] = _coerce(key, value)
    for key in ExperimentConfig.__dataclass_fields__:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = _coerce(key, flag) if isinstance(flag, str) else flag
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--m", type=int, help="rows (default 400)")
    p.add_argument("--n", type=int, help="columns (default 400)")
    p.add_argument("--r", type=int, help="target rank (default 50)")
    p.add_argument("--ell", type=int, help="oversampling for u_tilde (default 0)")
    p.add_argument("--decay", choices=(synthgen.EXPONENTIAL, synthgen.ALGEBRAIC),
                   help="singular value profile (default exponential)")
    p.add_argument("--q", type=int, help="power products per side in the sketch (default 1)")
    p.add_argument("--seed", type=int, help="root seed (default 0)")
    p.add_argument("--trials", type=int, help="number of trials (default 1)")
    p.add_argument("--methods", help="comma list from RR,SVD,GN,HMT (default all)")
    p.add_argument("--bounds", help=f"comma list from {','.join(BOUND_NAMES)} (default none)")
    p.add_argument("--provenance", choices=PROVENANCES,
                   help="subspace source (default sketched)")
    p.add_argument("--config", help="flat key=value file, overridden by flags")
    p.add_argument("--out", default="svextract.csv", help="output CSV path")


def _cmd_run(args) -> int:
    cfg = _merge_config(args)
    report = run_experiment(cfg)
    emit_csv(report, args.out)
    if not verify_pass_counts(report):
        report.violations.append("pass/matmul counters do not match the expected access pattern")
    for note in report.notes:
        print(f"note: {note}")
    if report.violations:
        for v in report.violations:
            print(f"soundness violation: {v}", file=sys.stderr)
        return 1
    print(f"wrote {args.out} ({sum(1 for _ in _csv_rows(report))} data rows)")
    return 0


def _cmd_figdata(args) -> int:
    preset = FIG_PRESETS[args.fig]
    cfg = ExperimentConfig(
        m=400, n=400, r=50, q=1, trials=1,
        seed=args.seed, decay=args.decay, **preset,
    )
    report = run_experiment(cfg)
    out = args.out or f"{args.fig}.csv"
    emit_csv(report, out)
    if report.violations:
        for v in report.violations:
            print(f"soundness violation: {v}", file=sys.stderr)
        return 1
    print(f"wrote {out}")
    return 0


def _selftest_checks():
    rng = np.random.default_rng(0)
    from .kernels import singular_values, thin_qr

    def check_qr():
        m = rng.standard_normal((60, 20))
        qr = thin_qr(m)
        return (np.abs(qr.q.T @ qr.q - np.eye(20)).max() < 1e-12
                and np.linalg.norm(qr.q @ qr.r - m, 2) < 1e-12 * np.linalg.norm(m, 2))

    def check_jordan_wielandt():
        m = rng.standard_normal((30, 20))
        sv = singular_values(m)
        embedded = np.block([[np.zeros((30, 30)), m], [m.T, np.zeros((20, 20))]])
        eig = np.sort(np.linalg.eigvalsh(embedded))[::-1]
        expected = np.sort(np.concatenate([sv, np.zeros(10), -sv]))[::-1]
        return np.abs(eig - expected).max() < 1e-10 * sv[0]

    def check_exactness():
        profile = synthgen.sv_profile(synthgen.EXPONENTIAL, 120)
        truth = synthgen.assemble_synthetic(profile, 120, 0)
        pair = sketching.exact_subspaces(truth, 12, 0)
        for fn in extract.EXTRACTORS.values():
            res = fn(extract.CountingMatrix(truth.a), pair)
            if np.abs(res.sigma_hat - profile.values[:12]).max() > 1e-11 * profile.values[0]:
                return False
        return True

    def check_counters():
        cfg = ExperimentConfig(m=80, n=80, r=8, trials=1, seed=3)
        return verify_pass_counts(run_experiment(cfg))

    def check_forward_soundness():
        cfg = ExperimentConfig(m=150, n=150, r=15, trials=2, seed=5,
                               methods=(GN,), bounds=("weyl", "forward"))
        return not run_experiment(cfg).violations

    def check_determinism():
        cfg = ExperimentConfig(m=60, n=60, r=6, trials=2, seed=9)
        rows_a = list(_csv_rows(run_experiment(cfg)))
        rows_b = list(_csv_rows(run_experiment(cfg)))
        return rows_a == rows_b

    return (
        ("thin-qr invariants", check_qr),
        ("jordan-wielandt identity", check_jordan_wielandt),
        ("exact-subspace exactness", check_exactness),
        ("access counters", check_counters),
        ("forward-bound soundness", check_forward_soundness),
        ("determinism", check_determinism),
    )


def _cmd_selftest(_args) -> int:
    failures = 0
    for name, fn in _selftest_checks():
        ok = fn()
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += 0 if ok else 1
    return 1 if failures else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="svextract",
        description="Extract leading singular values from approximate subspaces "
                    "and evaluate structured perturbation bounds.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a configured experiment sweep and write CSV")
    _add_run_flags(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_fig = sub.add_parser("figdata", help="write the CSV behind one of the five figure presets")
    p_fig.add_argument("--fig", choices=sorted(FIG_PRESETS), required=True)
    p_fig.add_argument("--decay", choices=(synthgen.EXPONENTIAL, synthgen.ALGEBRAIC),
                       default=synthgen.EXPONENTIAL)
    p_fig.add_argument("--seed", type=int, default=0)
    p_fig.add_argument("--out", help="output CSV path (default <fig>.csv)")
    p_fig.set_defaults(func=_cmd_figdata)

    p_self = sub.add_parser("selftest", help="run the built-in invariant checks")
    p_self.set_defaults(func=_cmd_selftest)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
