"""Command-line surface: samplers, transforms, reductions, and the
evaluation harness; configuration files in, CSV/JSON reports out.

Exit codes: 0 success, 1 acceptance-threshold violation (sweep --strict),
2 I/O errors, 3 parameter/config errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import evaluate, reductions, samplers
from .core import (
    BinaryDataset,
    KAryDataset,
    ParameterError,
    RandomStream,
)

__all__ = ["main", "CSV_COLUMNS", "rows_to_csv", "rows_from_csv"]

CSV_COLUMNS = [
    "class",
    "dim",
    "eps",
    "delta",
    "rho",
    "alpha",
    "n",
    "trials",
    "tv_estimate",
    "tv_slack",
    "audit_max_ratio",
    "seed",
    "wall_time_s",
]

EXIT_OK = 0
EXIT_THRESHOLD = 1
EXIT_IO = 2
EXIT_PARAMS = 3


class ConfigError(ValueError):
    """Configuration file violates the schema; message carries the path."""


class DataError(ValueError):
    """Data file is unreadable or ill-formed."""


# ---------------------------------------------------------------------------
# data files
# ---------------------------------------------------------------------------


def read_kary_file(path) -> KAryDataset:
    """Whitespace-separated integers; optional '# k=...' header line."""
    k = None
    tokens = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if body.startswith("k="):
                        k = int(body[2:].strip())
                    continue
                tokens.extend(line.split())
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    try:
        records = np.array([int(t) for t in tokens], dtype=np.int64)
    except ValueError as exc:
        raise DataError(f"{path}: non-integer record: {exc}") from exc
    if k is None:
        if records.size == 0:
            raise DataError(f"{path}: empty dataset with no '# k=' header")
        k = int(records.max())
    try:
        return KAryDataset(records, k)
    except ParameterError as exc:
        raise DataError(f"{path}: {exc}") from exc


def read_binary_file(path) -> BinaryDataset:
    """One row of 0/1 characters per line; optional '# d=...' header."""
    d = None
    rows = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                if line.startswith("#"):
                    body = line[1:].strip()
                    if body.startswith("d="):
                        d = int(body[2:].strip())
                    continue
                if not set(line) <= {"0", "1"}:
                    raise DataError(f"{path}: row has non-bit characters: {line!r}")
                rows.append([1 if ch == "1" else 0 for ch in line])
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    if not rows:
        if d is None:
            raise DataError(f"{path}: empty dataset with no '# d=' header")
        return BinaryDataset(np.zeros((0, d), dtype=np.uint8))
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError(f"{path}: ragged rows (widths {sorted(widths)})")
    if d is not None and d != widths.pop():
        raise DataError(f"{path}: header d= disagrees with row width")
    return BinaryDataset(np.array(rows, dtype=np.uint8))


# ---------------------------------------------------------------------------
# CSV report serialization
# ---------------------------------------------------------------------------


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # plain float repr even for numpy scalars
    return str(value)


def rows_to_csv(rows, timing=False) -> str:
    """Serialize EvalRow records to the fixed-schema CSV text.

    wall_time_s is written empty unless timing is requested, keeping
    repeated runs byte-identical."""
    out = [",".join(CSV_COLUMNS)]
    for r in rows:
        out.append(
            ",".join(
                [
                    r.class_tag,
                    _cell(r.dim),
                    _cell(r.eps),
                    _cell(r.delta),
                    _cell(r.rho),
                    _cell(r.alpha),
                    _cell(r.n),
                    _cell(r.trials),
                    _cell(r.tv_estimate),
                    _cell(r.tv_slack),
                    _cell(r.audit_max_ratio),
                    _cell(r.seed),
                    _cell(r.wall_time_s) if timing else "",
                ]
            )
        )
    return "\n".join(out) + "\n"


def rows_from_csv(text):
    """Parse the fixed-schema CSV back into EvalRow records."""
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0].split(",") != CSV_COLUMNS:
        raise DataError("CSV header does not match the report schema")
    rows = []
    for ln in lines[1:]:
        parts = ln.split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise DataError(f"bad CSV row: {ln!r}")

        def opt_float(s):
            return None if s == "" else float(s)

        rows.append(
            evaluate.EvalRow(
                class_tag=parts[0],
                dim=int(parts[1]),
                eps=opt_float(parts[2]),
                delta=opt_float(parts[3]),
                rho=opt_float(parts[4]),
                alpha=float(parts[5]),
                n=int(parts[6]),
                trials=int(parts[7]),
                tv_estimate=float(parts[8]),
                tv_slack=float(parts[9]),
                audit_max_ratio=opt_float(parts[10]),
                seed=int(parts[11]),
                wall_time_s=0.0 if parts[12] == "" else float(parts[12]),
            )
        )
    return rows


def _write_text(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    except OSError as exc:
        raise DataError(f"cannot write {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# config parsing (fail-closed: unknown keys are errors)
# ---------------------------------------------------------------------------


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"$: invalid JSON: {exc}") from exc


def _require_keys(obj, allowed, required, where):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}: unknown key")
    for key in required:
        if key not in obj:
            raise ConfigError(f"{where}.{key}: missing")


def parse_sweep_config(obj) -> evaluate.SweepConfig:
    allowed = {
        "class",
        "dimensions",
        "privacy",
        "alphas",
        "n_rule",
        "trials",
        "seed",
        "constant_scale",
        "audits",
        "reduction_constant",
    }
    required = {"class", "dimensions", "privacy", "alphas", "n_rule", "trials", "seed"}
    _require_keys(obj, allowed, required, "$")
    n_rule = obj["n_rule"]
    _require_keys(n_rule, {"explicit", "formula_scale"}, set(), "$.n_rule")
    privacy = []
    for i, entry in enumerate(obj["privacy"]):
        if (
            not isinstance(entry, list)
            or len(entry) not in (2, 3)
            or entry[0] not in ("approx", "zcdp")
        ):
            raise ConfigError(
                f"$.privacy[{i}]: expected ['approx', eps(, delta)] or ['zcdp', rho]"
            )
        privacy.append(tuple(entry))
    try:
        return evaluate.SweepConfig(
            class_tag=obj["class"],
            dimensions=[int(v) for v in obj["dimensions"]],
            privacy=privacy,
            alphas=[float(v) for v in obj["alphas"]],
            n_rule=n_rule,
            trials=int(obj["trials"]),
            seed=int(obj["seed"]),
            constant_scale=float(obj.get("constant_scale", 1.0)),
            audits=bool(obj.get("audits", False)),
            reduction_constant=float(obj.get("reduction_constant", 10.0)),
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"$: {exc}") from exc


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _default_seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("DPS_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError as exc:
            raise ParameterError(f"DPS_SEED must be an integer: {env!r}") from exc
    return 0


def cmd_sample(args):
    seed = _default_seed(args)
    rng = RandomStream(seed, 0)
    meta = {"class": args.klass, "seed": seed, "data": args.data}
    if args.klass == "kary":
        if args.epsilon is None:
            raise ParameterError("--epsilon is required for --class kary")
        x = read_kary_file(args.data)
        out = samplers.kary_sample(x, args.epsilon, rng)
        meta.update(sampler="kary-laplace", epsilon=args.epsilon, k=x.k, n=x.n)
        print(out)
    elif args.klass == "bounded-product":
        x = read_binary_file(args.data)
        bits = samplers.clip_product_sample(x, rng)
        meta.update(
            sampler="clip-product",
            d=x.d,
            n=x.n,
            rho=samplers.clip_product_rho(x.d, x.n),
        )
        print("".join(str(int(b)) for b in bits))
    elif args.klass == "product":
        if args.rho is None or args.alpha is None:
            raise ParameterError("--rho and --alpha are required for --class product")
        x = read_binary_file(args.data)
        cfg = samplers.ProdSamplerConfig(
            rho=args.rho,
            beta=args.alpha / (12.0 * max(x.d, 1)),
            constant_scale=args.constant_scale,
        )
        bits = samplers.prod_sample(x, cfg, rng)
        meta.update(
            sampler="prod-recursive",
            d=x.d,
            n=x.n,
            rho=args.rho,
            alpha=args.alpha,
            constant_scale=args.constant_scale,
        )
        print("".join(str(int(b)) for b in bits))
    else:
        raise ParameterError(f"--class {args.klass} is not samplable directly")
    print(json.dumps(meta, sort_keys=True), file=sys.stderr)
    return EXIT_OK


def _run_sweep(args, single_point):
    from dataclasses import replace

    config = parse_sweep_config(_load_json(args.config))
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["trials"] = args.trials
    if args.constant_scale is not None:
        overrides["constant_scale"] = args.constant_scale
    if overrides:
        config = replace(config, **overrides)
    threads = args.threads if args.threads else (os.cpu_count() or 1)
    report = evaluate.sweep(config, threads=threads)
    if single_point and len(report) != 1:
        raise ConfigError(
            f"$: eval expects a single-cell grid, got {len(report)} cells"
        )
    _write_text(args.out, rows_to_csv(report.rows, timing=args.timing))
    if args.strict and report.violations():
        return EXIT_THRESHOLD
    return EXIT_OK


def cmd_eval(args):
    return _run_sweep(args, single_point=True)


def cmd_sweep(args):
    return _run_sweep(args, single_point=False)


def cmd_audit(args):
    if args.clip:
        n_max = args.n_max
        if n_max < 1:
            raise ParameterError("--n-max must be >= 1")
        lines = ["n,max_ratio,bound"]
        for n in range(1, n_max + 1):
            ratio = evaluate.privacy_audit_clip(n)
            lines.append(f"{n},{ratio!r},{math.exp(4.0 / n)!r}")
        _write_text(args.out, "\n".join(lines) + "\n")
        return EXIT_OK
    if args.config is None:
        raise ParameterError("audit needs --clip or --config")
    obj = _load_json(args.config)
    allowed = {"kind", "k", "n", "epsilon", "delta", "trials", "seed", "dataset", "neighbors"}
    _require_keys(obj, allowed, {"kind", "k", "epsilon", "trials", "seed"}, "$")
    if obj["kind"] != "mc":
        raise ConfigError("$.kind: only 'clip' (via --clip) and 'mc' are supported")
    k = int(obj["k"])
    epsilon = float(obj["epsilon"])
    delta = float(obj.get("delta", 0.0))
    trials = args.trials if args.trials is not None else int(obj["trials"])
    seed = args.seed if args.seed is not None else int(obj["seed"])
    if "dataset" in obj:
        base = np.asarray(obj["dataset"], dtype=np.int64)
    else:
        n = int(obj["n"])
        base = np.ones(n, dtype=np.int64)
        base[: n // 2] = 2
    x = KAryDataset(base, k)
    neighbors = obj.get("neighbors", "all-flips")
    pairs = []
    if neighbors == "all-flips":
        if k != 2:
            raise ConfigError("$.neighbors: 'all-flips' needs k=2")
        for i in range(x.n):
            alt = base.copy()
            alt[i] = 2 if base[i] == 1 else 1
            pairs.append(KAryDataset(alt, k))
    else:
        for row in neighbors:
            pairs.append(KAryDataset(np.asarray(row, dtype=np.int64), k))
    handle = evaluate.kary_handle(k, epsilon)
    lines = ["pair,symbol,p_x,p_xprime,adjusted_ratio,bound,flagged"]
    worst = 0.0
    flagged = False
    for i, xp in enumerate(pairs):
        res = evaluate.privacy_audit_mc(
            handle, x, xp, trials, RandomStream(seed, i), epsilon, delta
        )
        worst = max(worst, res.max_adjusted_ratio)
        flagged = flagged or res.flagged
        for row in res.rows:
            lines.append(
                f"{i},{row.symbol},{row.p_first!r},{row.p_second!r},"
                f"{row.adjusted_ratio!r},{res.bound!r},{int(row.flagged)}"
            )
    _write_text(args.out, "\n".join(lines) + "\n")
    if args.strict and flagged:
        return EXIT_THRESHOLD
    return EXIT_OK


def cmd_reduce(args):
    obj = _load_json(args.config)
    allowed = {
        "k",
        "alpha",
        "epsilon",
        "delta",
        "C",
        "n",
        "trials",
        "seed",
        "special",
        "support",
        "alpha_star",
        "inner",
    }
    required = {"k", "epsilon", "trials", "seed"}
    _require_keys(obj, allowed, required, "$")
    if ("alpha" in obj) == ("alpha_star" in obj):
        raise ConfigError("$: give exactly one of 'alpha' or 'alpha_star'")
    k = int(obj["k"])
    if "alpha" in obj:
        alpha = float(obj["alpha"])
        alpha_star = 60.0 * alpha
    else:
        alpha_star = float(obj["alpha_star"])
        alpha = alpha_star / 60.0
    epsilon = float(obj["epsilon"])
    delta = float(obj.get("delta", 0.0))
    C = float(obj.get("C", 10.0))
    trials = args.trials if args.trials is not None else int(obj["trials"])
    seed = args.seed if args.seed is not None else int(obj["seed"])
    special = int(obj.get("special", 2 * k + 1))
    support = tuple(
        int(s) for s in obj.get("support", range(1, k + 1))
    )
    star = reductions.StarDistribution(k, special, support, alpha_star)
    logk = math.log(max(k, 2))
    n = int(obj.get("n", math.ceil(4.0 * C * logk / (alpha * epsilon))))
    inner_kind = obj.get("inner", "perfect")
    if inner_kind == "perfect":
        inner = evaluate.perfect_product_handle(reductions.star_to_product(star))
    elif inner_kind == "clip-product":
        inner = evaluate.clip_product_handle(2 * k)
    else:
        raise ConfigError("$.inner: expected 'perfect' or 'clip-product'")
    handle = evaluate.star_reduction_handle(
        star, epsilon, delta, alpha, n, inner, C=C
    )
    import time as _time

    started = _time.perf_counter()
    rng = RandomStream(seed, 0)
    tv, slack = evaluate.estimate_tv(handle, star.pmf(), n, trials, rng)
    row = evaluate.EvalRow(
        class_tag="star",
        dim=k,
        eps=epsilon,
        delta=delta,
        rho=None,
        alpha=alpha,
        n=n,
        trials=trials,
        tv_estimate=min(tv, 1.0),
        tv_slack=slack,
        audit_max_ratio=None,
        seed=seed,
        wall_time_s=_time.perf_counter() - started,
    )
    _write_text(args.out, rows_to_csv([row], timing=args.timing))
    if args.strict and not row.passes():
        return EXIT_THRESHOLD
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dpsample",
        description=(
            "Differentially private single-observation sampling and its "
            "evaluation harness"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sample = sub.add_parser("sample", help="draw one private observation")
    p_sample.add_argument(
        "--class",
        dest="klass",
        required=True,
        choices=["kary", "bounded-product", "product"],
    )
    p_sample.add_argument("--data", required=True)
    p_sample.add_argument("--epsilon", type=float)
    p_sample.add_argument("--delta", type=float, default=0.0)
    p_sample.add_argument("--rho", type=float)
    p_sample.add_argument("--alpha", type=float)
    p_sample.add_argument("--constant-scale", type=float, default=1.0)
    p_sample.add_argument("--seed", type=int)
    p_sample.set_defaults(func=cmd_sample)

    for name, fn, help_text in [
        ("eval", cmd_eval, "run one TV estimate from a single-cell config"),
        ("sweep", cmd_sweep, "run a config grid and write a CSV report"),
    ]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default="-")
        p.add_argument("--strict", action="store_true")
        p.add_argument("--threads", type=int, default=0)
        p.add_argument("--timing", action="store_true")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--constant-scale", dest="constant_scale", type=float)
        p.set_defaults(func=fn)

    p_audit = sub.add_parser("audit", help="privacy audits (exact clip or MC)")
    p_audit.add_argument("--clip", action="store_true")
    p_audit.add_argument("--n-max", type=int, default=1000)
    p_audit.add_argument("--config")
    p_audit.add_argument("--out", default="-")
    p_audit.add_argument("--strict", action="store_true")
    p_audit.add_argument("--seed", type=int)
    p_audit.add_argument("--trials", type=int)
    p_audit.set_defaults(func=cmd_audit)

    p_reduce = sub.add_parser(
        "reduce", help="run the star-distribution reduction pipeline"
    )
    p_reduce.add_argument("--config", required=True)
    p_reduce.add_argument("--out", default="-")
    p_reduce.add_argument("--strict", action="store_true")
    p_reduce.add_argument("--timing", action="store_true")
    p_reduce.add_argument("--seed", type=int)
    p_reduce.add_argument("--trials", type=int)
    p_reduce.set_defaults(func=cmd_reduce)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; those are parameter errors here
        return EXIT_PARAMS if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMS


if __name__ == "__main__":
    sys.exit(main())
