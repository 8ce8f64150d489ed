"""Benchmark harness: seeded experiment sweeps, timing runs and a generic solver.

Usage::

    tuckervb fredholm|deblur|heat|bench|solve --config <file or preset> [options]

A configuration is one JSON document.  Named presets (``fredholm-desk``,
``fredholm-validation``, ``deblur-desk``, ``heat-desk``, ``bench-desk``)
can stand in for a file.  Command-line flags override file values.

Exit codes: 0 success, 2 usage error, 3 runtime failure.
"""

import argparse
import copy
import csv
import json
import logging
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import baselines, metrics, problems, vb
from .errors import CapacityError
from .operators import (
    DenseOperator,
    SeparableOperator,
    SpectralOperator,
    build_subspace_from_separable,
    identity_subspace,
    reduce,
)
from .vb import DEFAULT_MAX_DIRECT_UNKNOWNS

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 2, 3

EXPERIMENTS = ("fredholm", "deblur", "heat", "bench", "solve")
BASELINES = ("lcurve", "gcv", "upre", "dp")
VB_METHODS = {
    "tucker_vb_single": vb.Variant.SINGLE,
    "tucker_vb_mode": vb.Variant.PER_MODE,
    "tucker_vb_slice": vb.Variant.PER_SLICE,
}
METHODS = BASELINES + tuple(VB_METHODS) + ("direct_vb",)
# only these rules see the true noise variance
NEEDS_SIGMA = ("upre", "dp")

DETAIL_HEADER = ["method", "noise_level", "trial", "seed", "rel_error", "psnr_db", "ssim",
                 "sigma_hat", "lambda_report", "runtime_ms", "iterations", "status"]
SUMMARY_HEADER = ["method", "noise_level", "count", "failures",
                  "rel_error_mean", "rel_error_std", "psnr_db_mean", "psnr_db_std",
                  "ssim_mean", "ssim_std", "sigma_hat_mean", "sigma_hat_std",
                  "runtime_ms_mean", "runtime_ms_std", "iterations_mean"]
BENCH_HEADER = ["dim", "problem_size", "tucker_ms_mean", "tucker_ms_std",
                "direct_ms_mean", "speedup"]
DIAG_HEADER = ["mode", "slice_index", "e_alpha", "lambda"]

_ALL_BASELINES = list(BASELINES)
_ALL_VB = list(VB_METHODS)

PRESETS = {
    "fredholm-desk": {
        "experiment": "fredholm", "n": 32, "alpha": 0.15, "truth": "peaks", "ranks": [12, 12],
        "noise_levels": [0.02, 0.05, 0.1], "trials": 50, "base_seed": 1000,
        "methods": _ALL_BASELINES + _ALL_VB,
    },
    "fredholm-validation": {
        "experiment": "fredholm", "n": 32, "alpha": 0.02, "truth": "sinusoid", "ranks": [12, 12],
        "noise_levels": [0.01, 0.02, 0.05, 0.1, 0.2], "trials": 50, "base_seed": 2000,
        "methods": ["tucker_vb_single", "direct_vb"],
    },
    "deblur-desk": {
        "experiment": "deblur", "size": 64, "sigma_row": 1.3, "sigma_col": 0.7,
        "ranks": [48, 48], "noise_levels": [0.03], "trials": 20, "base_seed": 3000,
        "methods": _ALL_BASELINES + _ALL_VB,
    },
    "heat-desk": {
        "experiment": "heat", "grid": [16, 16, 16], "kappa": [0.01, 0.005, 0.02], "T": 0.1,
        "ranks": [8, 8, 8], "noise_levels": [0.05], "trials": 10, "base_seed": 4000,
        "methods": _ALL_BASELINES + _ALL_VB,
    },
    "bench-desk": {
        "experiment": "bench", "dims": [16, 24, 32, 48], "alpha": 0.02, "truth": "sinusoid",
        "rank": 12, "noise_levels": [0.05], "trials": 10, "base_seed": 5000,
        "direct_max_unknowns": 1024, "record_runtime": True,
        "methods": ["tucker_vb_single", "direct_vb"],
    },
}


class UsageError(Exception):
    """Invalid command line or configuration (exit code 2)."""


@dataclass
class ExperimentConfig:
    """Parsed configuration; every field mirrors a JSON key of the same name."""

    experiment: str
    noise_levels: list = field(default_factory=lambda: [0.05])
    trials: int = 1
    methods: list = field(default_factory=lambda: ["tucker_vb_single"])
    ranks: list = None
    base_seed: int = 0
    vb: dict = field(default_factory=dict)
    baseline_space: str = "reduced"
    record_runtime: bool = False
    out: str = None
    dump_alphas: str = None
    write_images: str = None
    # fredholm
    n: int = 32
    alpha: float = 0.15
    truth: str = "peaks"
    peaks: list = None
    # deblur
    image: str = None
    size: int = 64
    sigma_row: float = 1.3
    sigma_col: float = 0.7
    # heat
    grid: list = None
    kappa: list = None
    T: float = 0.1
    sources: list = None
    # bench
    dims: list = None
    rank: int = 12
    direct_max_unknowns: int = DEFAULT_MAX_DIRECT_UNKNOWNS
    # solve
    operator: str = None
    factors: list = None
    data: str = None
    shape: list = None
    solution: str = None

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = sorted(set(d) - known)
        if unknown:
            raise UsageError(f"unknown configuration keys: {', '.join(unknown)}")
        if "experiment" not in d:
            raise UsageError("configuration needs an 'experiment' field")
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {self.experiment!r}")
        if not isinstance(self.trials, int) or self.trials < 1:
            raise UsageError("trials must be an integer >= 1")
        if not self.methods:
            raise UsageError("at least one method is required")
        bad = [m for m in self.methods if m not in METHODS]
        if bad:
            raise UsageError(f"unknown methods: {', '.join(bad)}")
        if len(set(self.methods)) != len(self.methods):
            raise UsageError("methods must not repeat")
        if not self.noise_levels or any(not (s >= 0) for s in self.noise_levels):
            raise UsageError("noise_levels must be a non-empty list of non-negative numbers")
        if self.baseline_space not in ("full", "reduced"):
            raise UsageError("baseline_space must be 'full' or 'reduced'")
        if self.experiment == "bench" and not self.dims:
            raise UsageError("bench needs a non-empty 'dims' list")
        if self.experiment == "solve" and not (self.data and (self.operator or self.factors)):
            raise UsageError("solve needs 'data' and either 'operator' or 'factors'")
        try:
            self.vb_config()
        except (TypeError, ValueError) as exc:
            raise UsageError(f"invalid vb settings: {exc}") from exc

    def vb_config(self, variant="single"):
        opts = dict(self.vb)
        prior = vb.HyperPrior(opts.pop("a0", 1e-6), opts.pop("b0", 1e-6))
        return vb.VBConfig(prior=prior, variant=variant, **opts)


# -- configuration ----------------------------------------------------------

def load_config(source):
    """JSON file path or preset name -> dict (a fresh copy)."""
    if source is None:
        return {}
    if os.path.isfile(source):
        try:
            with open(source) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {source}: {exc}") from exc
        if not isinstance(data, dict):
            raise UsageError("config must be a JSON object")
        return data
    if source in PRESETS:
        return copy.deepcopy(PRESETS[source])
    raise UsageError(f"config {source!r} is neither a file nor a preset "
                     f"({', '.join(sorted(PRESETS))})")


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text):
    return [int(t) for t in text.split(",") if t.strip()]


def _strs(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="tuckervb", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=EXPERIMENTS)
    p.add_argument("--config", help="JSON config file or preset name")
    p.add_argument("--out", help="detail CSV path (summary goes to <stem>.summary.csv)")
    p.add_argument("--dump-alphas", dest="dump_alphas", help="precision diagnostics CSV")
    p.add_argument("--write-images", dest="write_images", help="directory for PGM images")
    p.add_argument("--seed", dest="base_seed", type=int, help="base seed; trial t uses seed+t")
    p.add_argument("--trials", type=int)
    p.add_argument("--noise-levels", dest="noise_levels", type=_floats)
    p.add_argument("--methods", type=_strs)
    p.add_argument("--ranks", type=_ints)
    p.add_argument("--baseline-space", dest="baseline_space", choices=("full", "reduced"))
    p.add_argument("--record-runtime", dest="record_runtime", action="store_true", default=None)
    p.add_argument("--no-record-runtime", dest="record_runtime", action="store_false")
    p.add_argument("--n", type=int)
    p.add_argument("--alpha", type=float)
    p.add_argument("--truth", choices=problems.FREDHOLM_TRUTHS)
    p.add_argument("--image", help="PGM image for deblurring (default: synthetic)")
    p.add_argument("--size", type=int)
    p.add_argument("--sigma-row", dest="sigma_row", type=float)
    p.add_argument("--sigma-col", dest="sigma_col", type=float)
    p.add_argument("--grid", type=_ints)
    p.add_argument("--kappa", type=_floats)
    p.add_argument("--T", dest="T", type=float)
    p.add_argument("--dims", type=_ints)
    p.add_argument("--rank", type=int)
    p.add_argument("--direct-max-unknowns", dest="direct_max_unknowns", type=int)
    p.add_argument("--operator", help="solve: dense operator matrix (.npy or .csv)")
    p.add_argument("--factors", type=_strs, help="solve: comma-separated per-mode factor files")
    p.add_argument("--data", help="solve: observation vector (.npy or .csv)")
    p.add_argument("--shape", type=_ints, help="solve: unknown tensor shape")
    p.add_argument("--solution", help="solve: write the reconstruction here (.npy or .csv)")
    p.add_argument("--max-iters", dest="vb.max_iters", type=int)
    p.add_argument("--tol", dest="vb.tol", type=float)
    p.add_argument("--a0", dest="vb.a0", type=float)
    p.add_argument("--b0", dest="vb.b0", type=float)
    p.add_argument("--strategy", dest="vb.strategy")
    p.add_argument("--slice-normalizer", dest="vb.slice_normalizer", choices=vb.SLICE_NORMALIZERS)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args):
    d = load_config(args.config)
    if d.get("experiment", args.command) != args.command:
        raise UsageError(f"config is for {d['experiment']!r}, not {args.command!r}")
    d["experiment"] = args.command
    for key, val in vars(args).items():
        if key in ("command", "config", "verbose") or val is None:
            continue
        if key.startswith("vb."):
            d.setdefault("vb", {})[key[3:]] = val
        else:
            d[key] = val
    return ExperimentConfig.from_dict(d)


# -- problem construction ---------------------------------------------------

def make_problem(cfg, noise, seed):
    """Instance and subspace for the configured experiment."""
    if cfg.experiment == "fredholm":
        kw = dict(n=cfg.n, alpha=cfg.alpha, truth=cfg.truth,
                  ranks=tuple(cfg.ranks or (12, 12)))
        if cfg.peaks is not None:
            kw["peaks"] = tuple((a, tuple(c), w) for a, c, w in cfg.peaks)
        return problems.gen_fredholm(problems.FredholmSpec(**kw), noise, seed)
    if cfg.experiment == "deblur":
        img = problems.read_pgm(cfg.image) if cfg.image else problems.synthetic_cameraman(cfg.size)
        ranks = tuple(cfg.ranks or (48, 48))
        spec = problems.DeblurSpec(img, cfg.sigma_row, cfg.sigma_col, ranks)
        return problems.gen_deblur(spec, noise, seed)
    if cfg.experiment == "heat":
        kw = dict(ranks=tuple(cfg.ranks or (8, 8, 8)), T=cfg.T)
        if cfg.grid is not None:
            kw["grid"] = tuple(cfg.grid)
        if cfg.kappa is not None:
            kw["kappa"] = tuple(cfg.kappa)
        if cfg.sources is not None:
            kw["sources"] = tuple((a, tuple(c), w) for a, c, w in cfg.sources)
        return problems.gen_heat(problems.HeatSpec(**kw), noise, seed)
    raise UsageError(f"{cfg.experiment} has no problem generator")


def full_space_svd(op, y):
    """SVD system of the full operator, exploiting Kronecker structure when present."""
    if isinstance(op, SpectralOperator):
        sep = op.as_separable()
        op = sep if sep is not None else DenseOperator(op.to_dense(), op.input_shape)
    if isinstance(op, SeparableOperator):
        return baselines.svd_kronecker(op.factors, y, op.output_shape)
    return baselines.svd_dense(op.to_dense(), y)


# -- method runners ---------------------------------------------------------

@dataclass
class MethodOutcome:
    x_hat: np.ndarray = None
    sigma_hat: float = None
    lambdas: list = None
    iterations: int = None
    status: str = "ok"
    result: object = None
    runtime_ms: float = None


def run_method(method, cfg, inst, sub, sys_red):
    """Run one method; the true noise variance reaches only UPRE and DP."""
    if method in BASELINES:
        sigma2 = inst.sigma_true**2 if method in NEEDS_SIGMA else None
        return _run_baseline(method, cfg.baseline_space, inst, sub, sys_red, sigma2)
    if method in VB_METHODS:
        t0 = time.perf_counter()
        res = vb.solve(sys_red, cfg.vb_config(VB_METHODS[method]), sub)
        ms = 1e3 * (time.perf_counter() - t0)
        return _vb_outcome(res, ms)
    t0 = time.perf_counter()
    res = vb.solve_direct(inst.operator, inst.y, cfg.vb_config(),
                          max_unknowns=cfg.direct_max_unknowns)
    ms = 1e3 * (time.perf_counter() - t0)
    return _vb_outcome(res, ms)


def _vb_outcome(res, ms):
    status = "ok" if res.converged else "max_iters"
    return MethodOutcome(res.x_hat, res.sigma_hat, list(res.lambda_), res.iterations,
                         status, res, ms)


def _run_baseline(method, space, inst, sub, sys_red, sigma2):
    t0 = time.perf_counter()
    if space == "full":
        svd = full_space_svd(inst.operator, inst.y)
        sel = baselines.select(svd, method, sigma2)
        x = svd.from_coefficients(svd.s / (svd.s**2 + sel.lam) * svd.uty)
    else:
        svd = baselines.svd_reduced(sys_red)
        sel = baselines.select(svd, method, sigma2)
        x = sub.expand(baselines.tikhonov_solve(svd, sel.lam))
    ms = 1e3 * (time.perf_counter() - t0)
    return MethodOutcome(x, None, [sel.lam], None, sel.status, sel, ms)


# -- formatting -------------------------------------------------------------

def fmt(x):
    """Deterministic text for a CSV cell; ``None`` becomes ``NA``."""
    if x is None:
        return "NA"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if math.isnan(x):
        return "nan"
    return f"{x:.10g}"


def detail_row(method, noise, trial, seed, inst, outcome, record_runtime):
    row = {"method": method, "noise_level": fmt(noise), "trial": str(trial), "seed": str(seed)}
    if outcome.x_hat is None:
        row.update(rel_error="NA", psnr_db="NA", ssim="NA", sigma_hat="NA",
                   lambda_report="NA", runtime_ms="NA", iterations="NA")
    else:
        x = np.asarray(outcome.x_hat).reshape(-1)
        row["rel_error"] = fmt(metrics.rel_error(x, inst.x_true))
        row["psnr_db"] = fmt(metrics.psnr(x, inst.x_true))
        row["ssim"] = fmt(metrics.ssim_global(x, inst.x_true))
        row["sigma_hat"] = fmt(outcome.sigma_hat)
        row["lambda_report"] = ";".join(fmt(v) for v in outcome.lambdas)
        row["runtime_ms"] = (f"{outcome.runtime_ms:.3f}" if record_runtime
                             and outcome.runtime_ms is not None else "NA")
        row["iterations"] = fmt(outcome.iterations)
    row["status"] = outcome.status
    return row


def _num(cell):
    if cell in ("NA", ""):
        return None
    return float(cell)


def summarize(rows):
    """Mean and sample standard deviation per (method, noise level)."""
    groups = {}
    for r in rows:
        groups.setdefault((r["method"], r["noise_level"]), []).append(r)
    out = []
    for (method, noise), rs in groups.items():
        s = {"method": method, "noise_level": noise, "count": str(len(rs)),
             "failures": str(sum(r["status"].startswith("error") for r in rs))}
        for key in ("rel_error", "psnr_db", "ssim", "sigma_hat", "runtime_ms"):
            vals = [v for v in (_num(r[key]) for r in rs) if v is not None]
            if not vals:
                s[key + "_mean"] = s[key + "_std"] = "NA"
                continue
            arr = np.array(vals)
            s[key + "_mean"] = fmt(arr.mean())
            if np.all(np.isfinite(arr)) and arr.size > 1:
                s[key + "_std"] = fmt(arr.std(ddof=1))
            else:
                s[key + "_std"] = fmt(0.0) if arr.size == 1 else "nan"
        its = [v for v in (_num(r["iterations"]) for r in rs) if v is not None]
        s["iterations_mean"] = fmt(np.mean(its)) if its else "NA"
        out.append(s)
    return out


def write_csv(path, header, rows):
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow(r)


def summary_path(path):
    stem = path[:-4] if path.endswith(".csv") else path
    return stem + ".summary.csv"


def dump_diagnostics(result, path):
    """Learned precisions per (mode, slice) and the matching lambda values.

    A single-variant result yields one row with ``mode = 0``; the per-mode
    variant yields one row per mode with ``slice_index = 0``.
    """
    e_alpha = result.e_alpha
    lam = np.asarray(result.lambda_)
    rows = []
    if result.variant == vb.Variant.PER_SLICE:
        start = 0
        for k, r in enumerate(result.ranks):
            for i in range(r):
                rows.append((k, i, e_alpha[start + i], lam[start + i]))
            start += r
    else:
        for k, (a, l) in enumerate(zip(e_alpha, lam)):
            rows.append((k, 0, a, l))
    write_csv(path, DIAG_HEADER, [dict(zip(DIAG_HEADER, (str(k), str(i), fmt(a), fmt(l))))
                                  for k, i, a, l in rows])


def _display(x, shape):
    """2D view of a field: the array itself, or its central slice along the last axis."""
    arr = np.asarray(x).reshape(shape)
    while arr.ndim > 2:
        arr = arr[..., arr.shape[-1] // 2]
    return arr


def write_images(dirname, inst, outcomes, noise):
    os.makedirs(dirname, exist_ok=True)
    tag = f"sigma{fmt(noise)}"
    shape = inst.shape
    problems.write_pgm(os.path.join(dirname, "truth.pgm"), _display(inst.x_true, shape))
    if inst.y.size == inst.x_true.size:
        problems.write_pgm(os.path.join(dirname, f"observation_{tag}.pgm"),
                           _display(inst.y, shape))
    truth = _display(inst.x_true, shape)
    for method, out in outcomes.items():
        if out.x_hat is None:
            continue
        rec = _display(out.x_hat, shape)
        problems.write_pgm(os.path.join(dirname, f"{method}_{tag}.pgm"), rec)
        err = np.abs(rec - truth)
        top = err.max()
        problems.write_pgm(os.path.join(dirname, f"{method}_error_{tag}.pgm"),
                           err / top if top > 0 else err)


# -- commands ---------------------------------------------------------------

def run_experiment(cfg):
    """Sweep noise levels x trials x methods and write the CSV outputs.

    Returns the detail rows.  A failing method is recorded with an
    ``error:<type>`` status and the sweep continues.
    """
    rows = []
    diag = None
    for noise in cfg.noise_levels:
        for trial in range(cfg.trials):
            seed = cfg.base_seed + trial
            inst, sub = make_problem(cfg, noise, seed)
            sys_red = reduce(inst.operator, sub, inst.y)
            outcomes = {}
            for method in cfg.methods:
                try:
                    out = run_method(method, cfg, inst, sub, sys_red)
                except Exception as exc:  # recorded, sweep continues
                    log.warning("%s failed (noise=%g, trial=%d): %s", method, noise, trial, exc)
                    out = MethodOutcome(status=f"error:{type(exc).__name__}")
                outcomes[method] = out
                rows.append(detail_row(method, noise, trial, seed, inst, out,
                                       cfg.record_runtime))
            if trial == 0:
                if diag is None:
                    diag = _pick_diagnostic(cfg.methods, outcomes)
                if cfg.write_images:
                    write_images(cfg.write_images, inst, outcomes, noise)
    if cfg.out:
        write_csv(cfg.out, DETAIL_HEADER, rows)
        write_csv(summary_path(cfg.out), SUMMARY_HEADER, summarize(rows))
    if cfg.dump_alphas and diag is not None:
        dump_diagnostics(diag, cfg.dump_alphas)
    return rows


def _pick_diagnostic(methods, outcomes):
    # richest precision profile of the first trial at the first noise level
    for m in ("tucker_vb_slice", "tucker_vb_mode", "tucker_vb_single", "direct_vb"):
        if m in methods and isinstance(outcomes[m].result, vb.VBResult):
            return outcomes[m].result
    return None


def run_bench(cfg):
    """Time Tucker-VB against direct VB on Fredholm problems of growing size.

    Tucker-VB time covers subspace construction, reduction and the solve;
    direct VB covers its own reduction and solve.  Direct VB above the
    capacity guard is reported as ``NA``.
    """
    noise = cfg.noise_levels[0]
    vcfg = cfg.vb_config()
    rows = []
    for n in cfg.dims:
        r = min(cfg.rank, n)
        spec = problems.FredholmSpec(n=n, alpha=cfg.alpha, truth=cfg.truth, ranks=(r, r))
        t_tucker, t_direct = [], []
        for trial in range(cfg.trials):
            inst, _ = problems.gen_fredholm(spec, noise, cfg.base_seed + trial)
            op = inst.operator
            t0 = time.perf_counter()
            sub = build_subspace_from_separable(op, (r, r))
            vb.solve(reduce(op, sub, inst.y), vcfg, sub)
            t_tucker.append(1e3 * (time.perf_counter() - t0))
            if "direct_vb" in cfg.methods and n * n <= cfg.direct_max_unknowns:
                dense = DenseOperator(op.to_dense(), op.input_shape)
                t0 = time.perf_counter()
                vb.solve_direct(dense, inst.y, vcfg, max_unknowns=cfg.direct_max_unknowns)
                t_direct.append(1e3 * (time.perf_counter() - t0))
        tm = float(np.mean(t_tucker))
        ts = float(np.std(t_tucker, ddof=1)) if len(t_tucker) > 1 else 0.0
        dm = float(np.mean(t_direct)) if t_direct else None
        rows.append({
            "dim": str(n), "problem_size": str(n * n),
            "tucker_ms_mean": f"{tm:.3f}", "tucker_ms_std": f"{ts:.3f}",
            "direct_ms_mean": "NA" if dm is None else f"{dm:.3f}",
            "speedup": "NA" if dm is None else f"{dm / tm:.3f}",
        })
    if cfg.out:
        write_csv(cfg.out, BENCH_HEADER, rows)
    return rows


def load_array(path, what="array"):
    """Load ``.npy`` or comma-separated text (one matrix row per line)."""
    try:
        if path.endswith(".npy"):
            return np.load(path)
        return np.loadtxt(path, delimiter=",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot load {what} from {path}: {exc}") from exc


def save_array(path, x):
    if path.endswith(".npy"):
        np.save(path, x)
    else:
        np.savetxt(path, np.asarray(x).reshape(-1), delimiter=",", fmt="%.17g")


def run_solve(cfg):
    """Solve a user-supplied problem with every configured method.

    Without a ground truth only the solver outputs are reported: one row
    per method with ``sigma_hat``, ``lambda_report`` and the status.
    """
    y = load_array(cfg.data, "data").reshape(-1)
    if cfg.factors:
        op = SeparableOperator([load_array(f, "factor") for f in cfg.factors])
    else:
        a = load_array(cfg.operator, "operator")
        shape = tuple(cfg.shape) if cfg.shape else (a.shape[1],)
        op = DenseOperator(a, shape)
    if op.shape[0] != y.size:
        raise UsageError(f"data length {y.size} does not match operator rows {op.shape[0]}")
    if cfg.ranks:
        if not isinstance(op, SeparableOperator):
            raise UsageError("ranks need a separable operator ('factors')")
        sub = build_subspace_from_separable(op, cfg.ranks)
    else:
        sub = identity_subspace(op.input_shape)
    sys_red = reduce(op, sub, y)
    sigma = cfg.noise_levels[0]
    inst = problems.ProblemInstance(op, None, None, y, sigma, cfg.base_seed, op.input_shape)
    rows, first = [], None
    for method in cfg.methods:
        if method in NEEDS_SIGMA and not sigma > 0:
            raise UsageError(f"{method} needs a positive noise level (noise_levels)")
        try:
            out = run_method(method, cfg, inst, sub, sys_red)
        except CapacityError:
            raise
        except Exception as exc:
            log.warning("%s failed: %s", method, exc)
            out = MethodOutcome(status=f"error:{type(exc).__name__}")
        if first is None and out.x_hat is not None:
            first = out.x_hat
        rows.append({
            "method": method, "noise_level": fmt(sigma), "trial": "0",
            "seed": str(cfg.base_seed), "rel_error": "NA", "psnr_db": "NA", "ssim": "NA",
            "sigma_hat": fmt(out.sigma_hat),
            "lambda_report": ";".join(fmt(v) for v in out.lambdas) if out.lambdas else "NA",
            "runtime_ms": (f"{out.runtime_ms:.3f}" if cfg.record_runtime
                           and out.runtime_ms is not None else "NA"),
            "iterations": fmt(out.iterations), "status": out.status,
        })
        if method in VB_METHODS and cfg.dump_alphas:
            dump_diagnostics(out.result, cfg.dump_alphas)
    if cfg.out:
        write_csv(cfg.out, DETAIL_HEADER, rows)
    else:
        w = csv.DictWriter(sys.stdout, fieldnames=DETAIL_HEADER, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
    if cfg.solution and first is not None:
        save_array(cfg.solution, first)
    return rows


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        if cfg.experiment == "bench":
            run_bench(cfg)
        elif cfg.experiment == "solve":
            run_solve(cfg)
        else:
            run_experiment(cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
