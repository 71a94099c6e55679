"""Command-line front end.

Every subcommand prints one JSON document on stdout::

    {"schema": 1, "manifest": {...}, "result": {...}}

Exit status is 0 on success, 2 on usage errors and 1 on data or model
errors; diagnostics go to stderr.
"""

import argparse
import json
import math
import os
import secrets
import sys
import time
from pathlib import Path

import numpy as np

from uclust3 import __version__
from uclust3.bench import Scenario, StudySettings, ari_study, power_study, simulate_dataset, write_study
from uclust3.combinat import total_count
from uclust3.data import kernel_matrix, load_kernel_matrix, load_matrix
from uclust3.exceptions import DataError, DegenerateVarianceError
from uclust3.inference import utest3
from uclust3.search import SearchConfig, uclust3
from uclust3.ustat import Partition3
from uclust3.variance import DEFAULT_REPS, MIN_REPS, SCHEMES, estimate_reference

SCHEMA = 1
PROG = "uclust3"


def _alpha(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {text}")
    return value


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _seed(text: str):
    if text == "auto":
        return text
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"seed must be a non-negative integer or 'auto', got {text!r}")
    if value < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative, got {value}")
    return value


def _triple(kind):
    def parse(text: str):
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 3:
            raise argparse.ArgumentTypeError(f"expected three comma-separated values, got {text!r}")
        try:
            return tuple(kind(p) for p in parts)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad value in {text!r}")
    return parse


def _add_seed(p):
    p.add_argument("--seed", type=_seed, required=True,
                   help="non-negative integer, or 'auto' to draw one (recorded in the manifest)")
    p.add_argument("--timing", action="store_true", help="add wall-clock seconds to the manifest")


def _add_input(p):
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV, one observation per row")
    src.add_argument("--distances", help="CSV square symmetric distance matrix")
    p.add_argument("--kernel", choices=("msd", "euclidean", "precomputed"), default=None,
                   help="msd (default for --data), euclidean, or precomputed (implied by --distances)")
    p.add_argument("--header", action="store_true", help="input CSV has a header row")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--reps", type=_positive, default=DEFAULT_REPS, help="resamples for the variance reference")
    p.add_argument("--resample", choices=SCHEMES, default="labels",
                   help="variance resampling scheme; 'coordinates' needs --data")
    _add_seed(p)


def _add_scenario(p):
    p.add_argument("--n", type=_positive, required=True)
    p.add_argument("--L", type=_positive, required=True)
    p.add_argument("--sizes", type=_triple(int), required=True, help="a,b,c")
    p.add_argument("--means", type=_triple(float), required=True, help="a,b,c")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog=PROG, description="Three-group U-statistic homogeneity tests and clustering.")
    parser.add_argument("--version", action="version", version=f"{PROG} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("utest3", help="test homogeneity of three given groups")
    _add_input(p)
    p.add_argument("--groups", required=True, help="one label (1, 2 or 3) per line, aligned with the rows")

    p = sub.add_parser("cluster3", help="test for structure and report the best significant 3-group partition")
    _add_input(p)
    p.add_argument("--restarts", type=_positive, default=20)

    p = sub.add_parser("count", help="count legal three-group configurations")
    p.add_argument("--n", type=int, required=True)

    p = sub.add_parser("simulate", help="draw one Gaussian three-group dataset")
    _add_scenario(p)
    p.add_argument("--out", required=True, help="data CSV; labels go to <out>.groups")
    _add_seed(p)

    p = sub.add_parser("benchmark", help="run a power or ARI study for one scenario")
    _add_scenario(p)
    p.add_argument("--table", choices=("power", "ari"), required=True)
    p.add_argument("--reps", type=_positive, default=100, help="simulated replicates")
    p.add_argument("--var-reps", type=_positive, default=DEFAULT_REPS, help="resamples per variance reference")
    p.add_argument("--resample", choices=SCHEMES, default="coordinates")
    p.add_argument("--alpha", type=_alpha, default=0.05)
    p.add_argument("--restarts", type=_positive, default=20)
    p.add_argument("--threads", type=_positive, default=os.cpu_count() or 1)
    p.add_argument("--out", help="study CSV (a .json sidecar is written next to it)")
    _add_seed(p)
    return parser


def _read_groups(path: str) -> np.ndarray:
    try:
        lines = Path(path).read_text().splitlines()
    except FileNotFoundError:
        raise DataError(f"{path}: file not found")
    labels = []
    for lineno, line in enumerate(lines, start=1):
        cell = line.strip().strip('"')
        if not cell:
            continue
        if cell not in ("1", "2", "3"):
            raise DataError(f"{path}: line {lineno}: group label must be 1, 2 or 3, got {cell!r}")
        labels.append(int(cell))
    return np.array(labels, dtype=np.int64)


def _load_kernel(args):
    """Kernel matrix plus the raw data (None for precomputed distances)."""
    if args.distances is not None:
        if args.kernel not in (None, "precomputed"):
            raise DataError(f"--distances gives a precomputed kernel; --kernel {args.kernel} does not apply")
        if args.resample == "coordinates":
            raise DataError("--resample coordinates needs --data, not --distances")
        return load_kernel_matrix(args.distances, has_header=args.header), None
    if args.kernel == "precomputed":
        raise DataError("--kernel precomputed needs --distances")
    data = load_matrix(args.data, has_header=args.header)
    return kernel_matrix(data, args.kernel or "msd"), data


def _model(args, k, data, seed):
    if args.reps < MIN_REPS:
        raise DataError(f"--reps must be >= {MIN_REPS}, got {args.reps}")
    return estimate_reference(k, reps=args.reps, seed=seed, scheme=args.resample, data=data)


def _model_doc(model) -> dict:
    return {
        "scheme": model.scheme,
        "reps": model.reps,
        "reference_sizes": list(model.ref_sizes),
        "variance_reference": model.v_ref,
        "variance_singleton_reference": model.v_singleton_ref,
        "singleton_reference_n2": model.singleton_ref_n2,
        "tau2": model.tau2_hat,
    }


def _cmd_utest3(args, seed):
    k, data = _load_kernel(args)
    labels = _read_groups(args.groups)
    n = k.values.shape[0]
    source = "data" if data is not None else "distance matrix"
    if labels.size != n:
        raise DataError(f"groups file has {labels.size} labels but the {source} has {n} rows")
    part = Partition3(labels)
    model = _model(args, k, data, seed)
    out = utest3(k, part, model, alpha=args.alpha)
    return {
        "bn": out.bn,
        "variance": out.variance,
        "std_bn": out.std_bn,
        "p_value": out.p_value,
        "alpha": out.alpha,
        "reject": out.reject,
        "sizes": list(out.sizes),
        "variance_model": _model_doc(model),
    }


def _cmd_cluster3(args, seed):
    k, data = _load_kernel(args)
    model = _model(args, k, data, seed)
    cfg = SearchConfig(restarts=args.restarts, seed=seed)
    res = uclust3(k, alpha=args.alpha, model=model, cfg=cfg)
    doc = {
        "homogeneous": res.homogeneous,
        "labels": res.labels().tolist(),
        "bn": res.bn,
        "std_bn": res.std_bn,
        "p_value": res.p_value,
        "alpha": res.alpha,
        "n_star": res.n_star,
        "seed": seed,
        "stage1": {
            "labels": res.stage1_partition.canonical().labels.tolist(),
            "std_bn": res.stage1_std_bn,
            "p_value": res.stage1_p_value,
        },
        "variance_model": _model_doc(model),
    }
    doc["sizes"] = None if res.partition is None else list(res.partition.canonical().sizes)
    return doc


def _cmd_count(args, seed):
    c = total_count(args.n)
    return {"s3": c.s3, "delta3": c.delta3, "gamma3": c.gamma3}


def _scenario(args, seed, reps=1) -> Scenario:
    return Scenario(n=args.n, L=args.L, sizes=args.sizes, means=args.means, reps=reps,
                    alpha=getattr(args, "alpha", 0.05), seed=seed)


def _cmd_simulate(args, seed):
    s = _scenario(args, seed)
    data, truth = simulate_dataset(s, 0)
    out = Path(args.out)
    groups = out.with_name(out.name + ".groups")
    np.savetxt(out, data.values, delimiter=",", fmt="%.17g")
    np.savetxt(groups, truth, fmt="%d")
    return {"data": str(out), "groups": str(groups), "n": s.n, "L": s.L,
            "sizes": list(s.sizes), "means": list(s.means)}


def _cmd_benchmark(args, seed):
    s = _scenario(args, seed, reps=args.reps)
    settings = StudySettings(var_reps=args.var_reps, scheme=args.resample, restarts=args.restarts)
    if args.var_reps < MIN_REPS:
        raise DataError(f"--var-reps must be >= {MIN_REPS}, got {args.var_reps}")
    if args.table == "power":
        rows = [power_study(s, settings, threads=args.threads)]
    else:
        rows = [ari_study(s, m, settings, threads=args.threads) for m in ("uclust3", "kmeans")]
    doc = {"rows": [r.flat() for r in rows]}
    if args.out:
        config = {"settings": vars(settings), "threads": args.threads, "version": __version__}
        csv_path, sidecar = write_study(rows, args.out, config)
        doc["files"] = [str(csv_path), str(sidecar)]
    return doc


COMMANDS = {
    "utest3": _cmd_utest3,
    "cluster3": _cmd_cluster3,
    "count": _cmd_count,
    "simulate": _cmd_simulate,
    "benchmark": _cmd_benchmark,
}


def _flags(args) -> dict:
    skip = {"command", "seed", "timing"}
    return {k: (list(v) if isinstance(v, tuple) else v) for k, v in sorted(vars(args).items()) if k not in skip}


def _finite(obj):
    """Replace non-finite floats by strings so the output is strict JSON."""
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_finite(v) for v in obj]
    return obj


def run(argv=None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    seed = getattr(args, "seed", None)
    if seed == "auto":
        seed = secrets.randbelow(2**31 - 1)
    start = time.perf_counter()
    try:
        result = COMMANDS[args.command](args, seed)
    except (DataError, DegenerateVarianceError, OSError) as exc:
        print(f"{PROG} {args.command}: error: {exc}", file=stderr)
        return 1
    manifest = {"command": args.command, "flags": _flags(args), "seed": seed, "version": __version__}
    if getattr(args, "timing", False):
        manifest["timing"] = round(time.perf_counter() - start, 6)
    doc = {"schema": SCHEMA, "manifest": manifest, "result": result}
    stdout.write(json.dumps(_finite(doc), indent=2, sort_keys=True) + "\n")
    return 0


def main() -> None:
    sys.exit(run())
