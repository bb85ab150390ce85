
"""Command-line entry point: ``python -m lgae_app.cli <command> ...``.

Commands:
    preprocess  compute and cache X̄ = S^k X (or S^k I) for a dataset
    train       train one variant over a list of seeds and aggregate test metrics
    params      print trainable parameter counts per variant and k
    replicate   run every variant in both feature streams on one frozen split
    index       write manifest.txt for a hand-converted dataset directory

Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.
"""

import argparse
import logging
import sys
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import storage
from .config import (
    CACHE_DIR,
    DEFAULT_EPOCHS,
    DEFAULT_K,
    DEFAULT_SEEDS,
    EVAL_EVERY,
    LEARNING_RATE,
    LOG_FORMAT,
    LOG_LEVEL,
    RUNS_DIR,
    TEST_FRAC,
    VAL_FRAC,
    read_key_values,
)
from .data import index_dataset, load_dataset
from .exceptions import ConfigError, LGAEError
from .graph_core import GraphDataset, adjacency_from_edges, normalized_operator
from .linkpred import EdgeSplit, split_edges
from .models import PARAM_KS, ModelConfig, Variant, param_table
from .propagation import PropagationConfig, cache_path, smoothed_features
from .seeding import derive_seed
from .training import TrainConfig, prepare_graph, train

logger = logging.getLogger(__name__)

PARAM_VARIANTS = (Variant.LGAE, Variant.LVGAE, Variant.VGAE)

# VGAE k=2 counts as listed in the published appendix tables, keyed by feature dim.
# They exceed the layer-shape rule by 64·32.
REFERENCE_VGAE_K2 = {1433: 48928, 3703: 121568, 500: 19072}

REPLICATE_ORDER = (Variant.GAE, Variant.VGAE, Variant.LGAE, Variant.LVGAE)


def _parse_bool(raw: str) -> bool:
    value = raw.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _parse_seeds(raw: str) -> Tuple[int, ...]:
    """``0,1,2`` or an inclusive range ``0-9``, or a mix of both."""
    seeds: List[int] = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        start, sep, stop = item.partition("-")
        if sep and start:
            seeds.extend(range(int(start), int(stop) + 1))
        else:
            seeds.append(int(item))
    if not seeds:
        raise ValueError(f"no seeds in {raw!r}")
    return tuple(seeds)


def _parse_ks(raw: str) -> Tuple[int, ...]:
    return tuple(int(item) for item in raw.split(",") if item.strip())


def _parse_cache_dir(raw: str) -> Optional[Path]:
    return None if raw.strip().lower() in ("", "none") else Path(raw).expanduser()


_FIELD_PARSERS: Dict[str, Callable[[str], object]] = {
    "dataset": Path,
    "variant": Variant.parse,
    "k": int,
    "featureless": _parse_bool,
    "epochs": int,
    "lr": float,
    "seeds": _parse_seeds,
    "split_seed": int,
    "val_frac": float,
    "test_frac": float,
    "out": Path,
    "eval_every": int,
    "cache_dir": _parse_cache_dir,
    "progress": _parse_bool,
}

_DEFAULTS: Dict[str, object] = {
    "dataset": None,
    "variant": None,
    "k": DEFAULT_K,
    "featureless": False,
    "epochs": DEFAULT_EPOCHS,
    "lr": LEARNING_RATE,
    "seeds": DEFAULT_SEEDS,
    "split_seed": 0,
    "val_frac": VAL_FRAC,
    "test_frac": TEST_FRAC,
    "out": RUNS_DIR,
    "eval_every": EVAL_EVERY,
    "cache_dir": CACHE_DIR,
    "progress": False,
}


@dataclass(frozen=True)
class RunConfig:
    dataset: Path
    variant: Optional[Variant]
    k: int = DEFAULT_K
    featureless: bool = False
    epochs: int = DEFAULT_EPOCHS
    lr: float = LEARNING_RATE
    seeds: Tuple[int, ...] = DEFAULT_SEEDS
    split_seed: int = 0
    val_frac: float = VAL_FRAC
    test_frac: float = TEST_FRAC
    out: Path = RUNS_DIR
    eval_every: int = EVAL_EVERY
    cache_dir: Optional[Path] = CACHE_DIR
    progress: bool = False

    def __post_init__(self) -> None:
        if self.dataset is None:
            raise ConfigError("No dataset given; pass --dataset or set dataset= in the config file")
        if self.k < 0:
            raise ConfigError(f"k must be non-negative, got {self.k}")
        if not self.seeds:
            raise ConfigError("At least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"Seeds must be distinct, got {list(self.seeds)}")
        if not self.test_frac > 0:
            raise ConfigError(f"test_frac must be positive to report test metrics, got {self.test_frac}")

    def train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(
            epochs=self.epochs,
            learning_rate=self.lr,
            seed=derive_seed(seed, "noise"),
            eval_every=self.eval_every,
            progress=self.progress,
        )

    def to_dict(self) -> Dict[str, object]:
        return {
            "dataset": str(self.dataset),
            "variant": self.variant.value if self.variant else None,
            "k": self.k,
            "featureless": self.featureless,
            "epochs": self.epochs,
            "lr": self.lr,
            "seeds": list(self.seeds),
            "split_seed": self.split_seed,
            "val_frac": self.val_frac,
            "test_frac": self.test_frac,
            "out": str(self.out),
            "eval_every": self.eval_every,
            "cache_dir": str(self.cache_dir) if self.cache_dir else None,
        }


def resolve_run_config(args: argparse.Namespace) -> RunConfig:
    """Flags win over the ``--config`` file, which wins over built-in defaults."""
    file_values = read_key_values(args.config) if getattr(args, "config", None) else {}
    unknown = sorted(set(file_values) - set(_FIELD_PARSERS))
    if unknown:
        raise ConfigError(f"Unknown config keys in {args.config}: {', '.join(unknown)}")

    resolved: Dict[str, object] = {}
    for key, parse in _FIELD_PARSERS.items():
        value = getattr(args, key, None)
        if value is None and key in file_values:
            try:
                value = parse(file_values[key])
            except (ValueError, ConfigError) as exc:
                raise ConfigError(f"{args.config}: invalid {key}={file_values[key]!r}: {exc}") from exc
        resolved[key] = _DEFAULTS[key] if value is None else value
    if resolved["variant"] is not None:
        resolved["variant"] = Variant.parse(resolved["variant"])
    return RunConfig(**resolved)


def _split_for(dataset: GraphDataset, config: RunConfig) -> EdgeSplit:
    return split_edges(dataset, config.val_frac, config.test_frac, seed=derive_seed(config.split_seed, "split"))


def _aggregate(runs: List[Dict[str, object]]) -> Dict[str, object]:
    aucs = np.array([run["auc"] for run in runs], dtype=np.float64)
    aps = np.array([run["ap"] for run in runs], dtype=np.float64)
    return {
        "runs": runs,
        "auc_mean": float(aucs.mean()),
        "auc_std": float(aucs.std()),
        "ap_mean": float(aps.mean()),
        "ap_std": float(aps.std()),
        "std": "population",
    }


def run_series(
    dataset: GraphDataset,
    split: EdgeSplit,
    variant: Variant,
    featureless: bool,
    config: RunConfig,
    out_dir: Path,
) -> Dict[str, object]:
    """Train one variant/stream once per seed and write checkpoints, reports and the aggregate."""
    prepared = prepare_graph(dataset, split, variant, config.k, featureless, config.cache_dir)
    runs: List[Dict[str, object]] = []
    timings: Dict[str, float] = {}
    for seed in config.seeds:
        model_config = ModelConfig.for_variant(
            variant, prepared.inputs.shape[1], config.k, seed=derive_seed(seed, "init")
        )
        report = train(dataset, split, model_config, config.train_config(seed), featureless, prepared=prepared)
        checkpoint = storage.save_checkpoint(out_dir / f"params_seed{seed}.bin", report.params)
        report.checkpoint = checkpoint.name
        storage.save_json(out_dir / f"report_seed{seed}.json", report.to_dict())
        timings[f"seed{seed}"] = report.wall_time_seconds
        runs.append({"seed": seed, "auc": report.test.auc, "ap": report.test.ap})

    aggregate = {
        "dataset": dataset.name,
        "variant": variant.value,
        "method": variant.label + ("*" if featureless else ""),
        "k": config.k,
        "featureless": featureless,
        "split_seed": config.split_seed,
        **_aggregate(runs),
    }
    storage.save_json(out_dir / "aggregate.json", aggregate)
    storage.save_json(out_dir / "timings.json", timings)
    return aggregate


def cmd_preprocess(dataset_path: Path, k: int, featureless: bool, cache_dir: Optional[Path] = None) -> Path:
    """Propagate over the full graph and write the X̄ cache file."""
    cache_dir = Path(cache_dir or CACHE_DIR)
    dataset = load_dataset(dataset_path)
    operator = normalized_operator(adjacency_from_edges(dataset))
    config = PropagationConfig(k, featureless)
    started = time.perf_counter()
    smoothed = smoothed_features(dataset, operator, config, cache_dir)
    path = cache_path(cache_dir, dataset, config)
    print(f"{path}  {smoothed.shape[0]}x{smoothed.shape[1]}  {time.perf_counter() - started:.2f}s")
    return path


def cmd_train(config: RunConfig) -> Dict[str, object]:
    if config.variant is None:
        raise ConfigError("No variant given; pass --variant or set variant= in the config file")
    dataset = load_dataset(config.dataset)
    out_dir = Path(config.out)
    storage.save_json(out_dir / "config.json", config.to_dict())
    split = _split_for(dataset, config)
    storage.save_split(out_dir / "split.txt", split)
    aggregate = run_series(dataset, split, config.variant, config.featureless, config, out_dir)
    print(
        f"{aggregate['method']}  AUC {aggregate['auc_mean'] * 100:.1f} ± {aggregate['auc_std'] * 100:.2f}"
        f"  AP {aggregate['ap_mean'] * 100:.1f} ± {aggregate['ap_std'] * 100:.2f}  ({len(config.seeds)} seeds)"
    )
    return aggregate


def format_param_table(feature_dim: int, table: Dict[Variant, Dict[int, int]]) -> str:
    ks = sorted({k for row in table.values() for k in row})
    cells = [["Method"] + [f"k={k}" for k in ks]]
    notes = []
    for variant, row in table.items():
        line = [variant.label]
        for k in ks:
            text = str(row[k])
            reference = REFERENCE_VGAE_K2.get(feature_dim)
            if variant is Variant.VGAE and k == 2 and reference is not None:
                text += "†"
                notes.append(
                    f"† reference table lists {reference} for VGAE k=2 "
                    f"({reference - row[k]:+d} over the layer-shape count)"
                )
            line.append(text)
        cells.append(line)
    widths = [max(len(row[i]) for row in cells) for i in range(len(cells[0]))]
    lines = ["  ".join(cell.rjust(width) for cell, width in zip(row, widths)) for row in cells]
    return "\n".join([f"feature_dim={feature_dim}"] + lines + notes)


def cmd_params(
    feature_dim: int,
    variants: Sequence[Variant] = PARAM_VARIANTS,
    ks: Sequence[int] = PARAM_KS,
) -> Dict[Variant, Dict[int, int]]:
    table = param_table(feature_dim, [Variant.parse(v) for v in variants], ks)
    print(format_param_table(feature_dim, table))
    return table


def cmd_replicate(config: RunConfig) -> Dict[str, object]:
    """Every variant in the featureless stream (rows marked *) and then with features, on one split."""
    dataset = load_dataset(config.dataset)
    out_dir = Path(config.out)
    storage.save_json(out_dir / "config.json", config.to_dict())
    split = _split_for(dataset, config)
    storage.save_split(out_dir / "split.txt", split)

    streams = [True, False]
    if dataset.features is None:
        logger.warning("[Train] %s has no features; running the featureless stream only", dataset.name)
        streams = [True]

    rows = []
    for featureless in streams:
        for variant in REPLICATE_ORDER:
            row_dir = out_dir / f"{variant.value}-{'identity' if featureless else 'features'}"
            logger.info("[Train] Replicating %s%s on %s", variant.label, "*" if featureless else "", dataset.name)
            aggregate = run_series(dataset, split, variant, featureless, config, row_dir)
            rows.append({key: value for key, value in aggregate.items() if key != "runs"})

    document = {
        "dataset": dataset.name,
        "k": config.k,
        "seeds": list(config.seeds),
        "split_seed": config.split_seed,
        "rows": rows,
    }
    storage.save_json(out_dir / "replicate.json", document)

    width = max(len(row["method"]) for row in rows)
    print(f"{'Method'.ljust(width)}  {'AUC':>12}  {'AP':>12}")
    for row in rows:
        auc_text = f"{row['auc_mean'] * 100:.1f} ± {row['auc_std'] * 100:.2f}"
        ap_text = f"{row['ap_mean'] * 100:.1f} ± {row['ap_std'] * 100:.2f}"
        print(f"{row['method'].ljust(width)}  {auc_text:>12}  {ap_text:>12}")
    return document


def _add_run_options(parser: argparse.ArgumentParser, with_variant: bool) -> None:
    parser.add_argument("--config", type=Path, help="key=value file; flags override it")
    parser.add_argument("--dataset", type=Path, help="dataset directory holding manifest.txt")
    if with_variant:
        parser.add_argument("--variant", choices=[v.value for v in Variant])
    parser.add_argument("--k", type=int, help="hops for L-* variants, GCN layers for GAE/VGAE")
    if with_variant:
        parser.add_argument("--featureless", action=argparse.BooleanOptionalAction, default=None)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--lr", type=float)
    parser.add_argument("--seeds", type=_parse_seeds, help="e.g. 0,1,2 or 0-9")
    parser.add_argument("--split-seed", dest="split_seed", type=int)
    parser.add_argument("--val-frac", dest="val_frac", type=float)
    parser.add_argument("--test-frac", dest="test_frac", type=float)
    parser.add_argument("--out", type=Path, help="run directory")
    parser.add_argument("--eval-every", dest="eval_every", type=int)
    parser.add_argument("--cache-dir", dest="cache_dir", type=_parse_cache_dir)
    parser.add_argument("--progress", action=argparse.BooleanOptionalAction, default=None)


def _run_preprocess(args: argparse.Namespace) -> None:
    cmd_preprocess(args.dataset, args.k, args.featureless, args.cache_dir)


def _run_train(args: argparse.Namespace) -> None:
    cmd_train(resolve_run_config(args))


def _run_params(args: argparse.Namespace) -> None:
    if args.feature_dim is not None:
        feature_dim = args.feature_dim
    else:
        dataset = load_dataset(args.dataset)
        feature_dim = dataset.feature_dim or dataset.num_nodes
    if feature_dim < 1:
        raise ConfigError(f"feature_dim must be positive, got {feature_dim}")
    cmd_params(feature_dim, args.variant or PARAM_VARIANTS, args.ks)


def _run_replicate(args: argparse.Namespace) -> None:
    cmd_replicate(resolve_run_config(args))


def _run_index(args: argparse.Namespace) -> None:
    manifest = index_dataset(args.dataset, args.name or Path(args.dataset).name, args.num_nodes)
    print(manifest.to_text(), end="")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lgae", description="Linear and GCN graph auto-encoders for link prediction")
    parser.add_argument(
        "--log-level",
        dest="log_level",
        default=LOG_LEVEL,
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        type=str.upper,
    )
    commands = parser.add_subparsers(dest="command", required=True)

    preprocess = commands.add_parser("preprocess", help="cache X̄ = S^k X for the full graph")
    preprocess.add_argument("--dataset", type=Path, required=True)
    preprocess.add_argument("--k", type=int, default=DEFAULT_K)
    preprocess.add_argument("--featureless", action="store_true", help="propagate the identity instead of X")
    preprocess.add_argument("--cache-dir", dest="cache_dir", type=Path, default=CACHE_DIR)
    preprocess.set_defaults(handler=_run_preprocess)

    train_cmd = commands.add_parser("train", help="train one variant over several seeds")
    _add_run_options(train_cmd, with_variant=True)
    train_cmd.set_defaults(handler=_run_train)

    params = commands.add_parser("params", help="trainable parameter counts")
    source = params.add_mutually_exclusive_group(required=True)
    source.add_argument("--feature-dim", dest="feature_dim", type=int)
    source.add_argument("--dataset", type=Path)
    params.add_argument("--variant", action="append", choices=[v.value for v in Variant])
    params.add_argument("--k", dest="ks", type=_parse_ks, default=PARAM_KS, help="comma-separated, default 1,2,3,7")
    params.set_defaults(handler=_run_params)

    replicate = commands.add_parser("replicate", help="all variants, both feature streams, one split")
    _add_run_options(replicate, with_variant=False)
    replicate.set_defaults(handler=_run_replicate)

    index = commands.add_parser("index", help="write manifest.txt for edges.txt / features.txt")
    index.add_argument("--dataset", type=Path, required=True)
    index.add_argument("--num-nodes", dest="num_nodes", type=int, required=True)
    index.add_argument("--name")
    index.set_defaults(handler=_run_index)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format=LOG_FORMAT)
    try:
        args.handler(args)
    except ConfigError as exc:
        logger.error("%s", exc)
        return 2
    except LGAEError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
