"""``hamattn`` command line: bench, coverage, verify and train.

Every command writes its outputs plus one ``manifest.json`` into ``--out``.
Exit codes: 0 success, 1 verification failure, 2 usage or config error,
3 resource budget exceeded.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict, fields
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .attention import OpCounter, TransformerParams, knn_pattern, multi_head_attn, save_params
from .pointset import PointSetError, SyntheticSpec, generate_synthetic, read_manifest, split_dataset
from .sampling import (PlanError, edge_coverage, hamiltonian_pattern, sample_subset_plan,
                       sampled_attention)
from .training import TrainConfig, train, write_history_csv
from .verifier import BudgetError, VerifierConfig, verify_contextual_mapping

log = logging.getLogger("hamattn")

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_BUDGET = 0, 1, 2, 3
MANIFEST_VERSION = 1
BENCH_KINDS = ("dense", "sampled", "sparse-hamiltonian", "knn")


class ConfigError(ValueError):
    pass


def write_manifest(out_dir: Path, command: str, argv: Sequence[str], config: dict, seed,
                   wall_time: float, outputs: Sequence[Path], status: str = "ok") -> Path:
    """Write the run manifest next to the outputs and return its path."""
    path = out_dir / "manifest.json"
    body = {
        "schema_version": MANIFEST_VERSION,
        "command": command,
        "argv": list(argv),
        "config": config,
        "seed": seed,
        "version": __version__,
        "wall_time": wall_time,
        "status": status,
        "outputs": [str(p) for p in outputs],
    }
    path.write_text(json.dumps(body, indent=2, default=str) + "\n", encoding="utf-8")
    return path


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _fraction(text: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"expected a rational like 1/2, got {text!r}") from None


# --------------------------------------------------------------------------
# bench


def _bench_once(kind: str, X: np.ndarray, coords: np.ndarray, params: TransformerParams,
                n_s: int, k: int, rng, counter: Optional[OpCounter] = None) -> None:
    n = X.shape[1]
    if kind == "dense":
        multi_head_attn(X, params, None, counter)
    elif kind == "sparse-hamiltonian":
        multi_head_attn(X, params, hamiltonian_pattern(n), counter)
    elif kind == "knn":
        multi_head_attn(X, params, knn_pattern(coords, min(k, n)), counter)
    else:
        sampled_attention(X, sample_subset_plan(n, n_s, rng), params, "sequential", counter)


def cmd_bench(args) -> int:
    kinds = [k.strip() for k in args.kinds.split(",") if k.strip()]
    bad = [k for k in kinds if k not in BENCH_KINDS]
    if bad:
        raise ConfigError(f"invalid kind(s) {bad}; expected some of {BENCH_KINDS}")
    if args.repeats < 1:
        raise ConfigError("--repeats must be >= 1")
    rng = np.random.default_rng(args.seed)
    params = TransformerParams.random(args.h, args.m, args.d, args.r, rng)
    rows = []
    for n in args.n:
        if "sampled" in kinds and n % (args.ns - 1):
            raise ConfigError(f"--ns - 1 = {args.ns - 1} must divide n = {n}")
        X = rng.standard_normal((args.d, n))
        coords = rng.standard_normal((3, n))
        for kind in kinds:
            counter = OpCounter()
            _bench_once(kind, X, coords, params, args.ns, args.k, rng, counter)
            times = []
            for _ in range(args.repeats):
                t0 = time.perf_counter()
                _bench_once(kind, X, coords, params, args.ns, args.k, rng)
                times.append(time.perf_counter() - t0)
            rows.append({
                "n": n, "kind": kind, "n_s": args.ns if kind == "sampled" else "",
                "scores": counter.scores // params.h, "scores_all_heads": counter.scores,
                "flops": counter.flops, "repeats": args.repeats,
                "wall_mean": float(np.mean(times)),
                "wall_sd": float(np.std(times, ddof=1)) if len(times) > 1 else 0.0,
            })
            log.info("bench n=%d %s: %d scores/head, %.4fs", n, kind, rows[-1]["scores"],
                     rows[-1]["wall_mean"])
    path = args.out / "bench.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    args.outputs.append(path)
    return EXIT_OK


# --------------------------------------------------------------------------
# coverage


def cmd_coverage(args) -> int:
    if args.n % (args.ns - 1):
        raise ConfigError(f"--ns - 1 = {args.ns - 1} must divide --n = {args.n}")
    try:
        emap = edge_coverage(args.n, args.ns, args.samples, args.seed)
    except PlanError as exc:
        raise ConfigError(str(exc)) from None
    csv_path = args.out / "coverage.csv"
    emap.to_csv(csv_path)
    summary = {
        "n": args.n, "n_s": args.ns, "samples": args.samples, "seed": args.seed,
        "expected_frequency": emap.expected_frequency(),
        "max_deviation": emap.max_deviation(),
        "total_edges": emap.total_edges(),
    }
    json_path = args.out / "coverage_summary.json"
    json_path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(summary))
    args.outputs.extend([csv_path, json_path])
    return EXIT_OK


# --------------------------------------------------------------------------
# verify


def cmd_verify(args) -> int:
    try:
        config = VerifierConfig(args.n, args.d, args.delta, args.max_inputs, args.max_bits)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    report = verify_contextual_mapping(config, skip_allmax=args.skip_allmax)
    path = args.out / "certificate.json"
    path.write_text(report.to_json(indent=2) + "\n", encoding="utf-8")
    args.outputs.append(path)
    print(f"{report.to_dict()['status']}: n={args.n} d={args.d} delta={args.delta} "
          f"inputs={report.inputs} ids={report.ids} min_gap={report.min_id_gap}")
    for w in report.witnesses:
        print(f"  witness: {json.dumps(w)}")
    return EXIT_OK if report.passed else EXIT_FAIL


# --------------------------------------------------------------------------
# train

_DATA_KEYS = {"manifest", "test_manifest", "synthetic", "count_per_class", "test_fraction",
              "split_seed"}
_SPEC_FIELDS = {f.name for f in fields(SyntheticSpec)}


def load_train_config(path) -> dict:
    """Parse a JSON run config ``{"train": {...}, "data": {...}}``.

    ``train`` holds :class:`TrainConfig` fields. ``data`` either names a
    ``manifest`` (and optionally ``test_manifest``) or a ``synthetic``
    :class:`SyntheticSpec` plus ``count_per_class``; ``test_fraction`` and
    ``split_seed`` control the split when no test manifest is given.
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: invalid JSON: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be an object")
    unknown = set(raw) - {"train", "data"}
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {sorted(unknown)}")
    train_cfg = raw.get("train", {})
    data = raw.get("data", {"synthetic": {}})
    known = {f.name: f for f in fields(TrainConfig)}
    for key, value in train_cfg.items():
        if key not in known:
            raise ConfigError(f"{path}: train.{key}: unknown field")
    for key in data:
        if key not in _DATA_KEYS:
            raise ConfigError(f"{path}: data.{key}: unknown field")
    for key in data.get("synthetic", {}) or {}:
        if key not in _SPEC_FIELDS:
            raise ConfigError(f"{path}: data.synthetic.{key}: unknown field")
    return {"train": dict(train_cfg), "data": dict(data)}


def _make_config(train_cfg: dict, where: str) -> TrainConfig:
    for f in fields(TrainConfig):
        if f.name in train_cfg and not isinstance(train_cfg[f.name], type(f.default)):
            value = train_cfg[f.name]
            if isinstance(f.default, float) and isinstance(value, int) and not isinstance(value, bool):
                train_cfg[f.name] = float(value)
            else:
                raise ConfigError(f"{where}: train.{f.name}: expected {type(f.default).__name__}, "
                                  f"got {type(value).__name__}")
    try:
        return TrainConfig.from_dict(train_cfg)
    except ValueError as exc:
        raise ConfigError(f"{where}: train: {exc}") from None


def _load_data(data: dict, base: Path, where: str):
    try:
        if "manifest" in data:
            clouds = read_manifest(base / data["manifest"])
            if "test_manifest" in data:
                return clouds, read_manifest(base / data["test_manifest"])
        else:
            spec = SyntheticSpec(**(data.get("synthetic") or {}))
            clouds = generate_synthetic(spec, int(data.get("count_per_class", 200)))
    except (OSError, PointSetError, TypeError) as exc:
        raise ConfigError(f"{where}: data: {exc}") from None
    return split_dataset(clouds, float(data.get("test_fraction", 0.2)),
                         int(data.get("split_seed", 0)))


def cmd_train(args) -> int:
    if args.config is not None:
        cfg = load_train_config(args.config)
        base, where = Path(args.config).parent, str(args.config)
    else:
        cfg, base, where = {"train": {}, "data": {"synthetic": {}}}, Path("."), "<defaults>"
    for f in fields(TrainConfig):
        value = getattr(args, f"tc_{f.name}")
        if value is not None:
            cfg["train"][f.name] = value
    config = _make_config(cfg["train"], where)
    train_set, test_set = _load_data(cfg["data"], base, where)
    args.config_echo = {"train": asdict(config), "data": cfg["data"]}
    args.seed = config.seed
    trained, history = train(train_set, test_set, config)
    metrics = args.out / "metrics.csv"
    write_history_csv(history, metrics)
    ckpt = args.out / "checkpoint.npz"
    save_params(trained.model.block, ckpt, extra=trained.model.head.arrays())
    args.outputs.extend([metrics, ckpt])
    last = [r for r in history if r["epoch"] == config.epochs]
    for row in last:
        print(f"epoch {row['epoch']} {row['split']}: loss={row['loss']:.4f} "
              f"accuracy={row['accuracy']:.4f}")
    return EXIT_OK


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hamattn", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, default_out):
        p.add_argument("--out", type=Path, default=Path("runs") / default_out,
                       help="output directory (default: %(default)s)")

    p = sub.add_parser("bench", help="score counts and wall time per attention kind")
    p.add_argument("--n", type=_int_list, default=[256, 1024])
    p.add_argument("--kinds", default="dense,sampled", help=f"comma list from {BENCH_KINDS}")
    p.add_argument("--repeats", type=int, default=5)
    p.add_argument("--ns", type=int, default=5, help="window size for the sampled kind")
    p.add_argument("--k", type=int, default=16, help="neighbours for the knn kind")
    p.add_argument("--h", type=int, default=4)
    p.add_argument("--m", type=int, default=8)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--r", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    common(p, "bench")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("coverage", help="Monte Carlo edge frequencies of sampled cycles")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--ns", type=int, required=True)
    p.add_argument("--samples", type=int, default=20000)
    p.add_argument("--seed", type=int, default=0)
    common(p, "coverage")
    p.set_defaults(func=cmd_coverage)

    p = sub.add_parser("verify", help="exact contextual-mapping certificate")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--delta", type=_fraction, required=True)
    p.add_argument("--skip-allmax", action="store_true")
    p.add_argument("--max-inputs", type=int, default=4096)
    p.add_argument("--max-bits", type=int, default=4096)
    common(p, "verify")
    p.set_defaults(func=cmd_verify, seed=None)

    p = sub.add_parser("train", help="train the toy point-set classifier")
    p.add_argument("--config", type=Path, default=None, help="JSON run config")
    for f in fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        if isinstance(f.default, bool):
            p.add_argument(flag, dest=f"tc_{f.name}", default=None,
                           type=lambda s: s.lower() in ("1", "true", "yes"))
        else:
            p.add_argument(flag, dest=f"tc_{f.name}", default=None, type=type(f.default))
    common(p, "train")
    p.set_defaults(func=cmd_train, seed=None)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.outputs = []
    args.config_echo = {k: v for k, v in vars(args).items()
                        if k not in ("func", "outputs", "verbose")}
    args.out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    status, code = "ok", EXIT_OK
    try:
        code = args.func(args)
        status = "ok" if code == EXIT_OK else "fail"
    except ConfigError as exc:
        print(f"hamattn {args.command}: error: {exc}", file=sys.stderr)
        status, code = "config-error", EXIT_USAGE
    except BudgetError as exc:
        print(f"hamattn {args.command}: budget exceeded: {exc}", file=sys.stderr)
        status, code = "budget-exceeded", EXIT_BUDGET
    write_manifest(args.out, args.command, argv, args.config_echo, args.seed,
                   time.perf_counter() - start, args.outputs, status)
    return code


if __name__ == "__main__":
    sys.exit(main())
