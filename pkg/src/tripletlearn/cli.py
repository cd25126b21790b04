"""Command-line entry point wiring data, training, evaluation and reports.

Commands: ``train`` (checkpoint + loss curve), ``eval`` (match-rate CSVs),
``grid`` (weight grid-search table), ``synth`` (synthetic manifest),
``count-triplets`` (batch combinatorics). One JSON config file supplies
every knob; command-line flags win over the file. Every artifact embeds
the resolved config and seed in ``#`` header comments, and all randomness
derives from the single top-level seed through named streams, so reruns
are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from ._rng import stream_rng, stream_seed
from .embedding import (
    CheckpointError,
    init_network,
    load_checkpoint,
    save_checkpoint,
)
from .evaluation import (
    EvalProtocol,
    GridCell,
    evaluate_repeated,
    grid_search_weights,
    write_cmc_long,
    write_result_table,
)
from .gallery import (
    GalleryError,
    generate_synthetic,
    load_manifest,
    merge_galleries,
    save_manifest,
)
from .loss import LossConfig
from .sampling import SamplingError, default_triplet_count, triplet_capacity
from .training import TrainConfig, train, write_loss_curve

__all__ = ["ConfigError", "RunConfig", "parse_config", "config_to_dict", "main"]


class ConfigError(ValueError):
    """Config file or override rejected; message names the offending key."""


@dataclass
class RunConfig:
    """Resolved run settings: loss, sampling, schedule, data and reporting."""

    alpha: float = 1.0
    gamma: float = 1.0
    beta: float = 0.3
    P: int = 10
    K: int = 5
    T: int | None = None
    lr_init: float = 0.01
    lr_decay_factor: float = 0.95
    lr_step_epochs: int = 50
    lr_floor: float = 0.0005
    epochs: int = 10_000
    layer_dims: list[int] | None = None
    seed: int = 0
    data: list[str] = field(default_factory=list)
    output_dir: str = "runs"
    ks: list[int] = field(default_factory=lambda: [1, 5, 10, 20])
    trials: int = 10

    def loss_config(self) -> LossConfig:
        return LossConfig(alpha=self.alpha, gamma=self.gamma, beta=self.beta)

    def train_config(self) -> TrainConfig:
        return TrainConfig(
            lr_init=self.lr_init,
            lr_decay_factor=self.lr_decay_factor,
            lr_step_epochs=self.lr_step_epochs,
            lr_floor=self.lr_floor,
            epochs=self.epochs,
            P=self.P,
            K=self.K,
            num_triplets=self.T,
            loss=self.loss_config(),
            seed=self.seed,
        )

    def protocol(self, per_dataset: bool = False) -> EvalProtocol:
        return EvalProtocol(ks=tuple(self.ks), trials=self.trials, per_dataset=per_dataset)


_INT_KEYS = {"P", "K", "T", "lr_step_epochs", "epochs", "seed", "trials"}
_FLOAT_KEYS = {"alpha", "gamma", "beta", "lr_init", "lr_decay_factor", "lr_floor"}
_KNOWN_KEYS = {f.name for f in fields(RunConfig)}


def _coerce(key: str, value):
    if value is None:
        if key in ("T", "layer_dims"):
            return None
        raise ConfigError(f"{key}: null is not allowed")
    if key in _INT_KEYS:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key}: expected integer, got {value!r}")
        return value
    if key in _FLOAT_KEYS:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key}: expected number, got {value!r}")
        return float(value)
    if key in ("layer_dims", "ks"):
        if not isinstance(value, list) or not value or any(
            isinstance(v, bool) or not isinstance(v, int) for v in value
        ):
            raise ConfigError(f"{key}: expected nonempty list of integers, got {value!r}")
        return list(value)
    if key == "data":
        if isinstance(value, str):
            return [value]
        if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
            raise ConfigError(f"{key}: expected path string or list of paths, got {value!r}")
        return list(value)
    if key == "output_dir":
        if not isinstance(value, str):
            raise ConfigError(f"{key}: expected string, got {value!r}")
        return value
    raise ConfigError(f"unknown key: {key}")


def config_from_dict(raw: dict) -> RunConfig:
    """Build and validate a :class:`RunConfig` from parsed JSON."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    unknown = set(raw) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown key: {sorted(unknown)[0]}")
    cfg = RunConfig()
    for key, value in raw.items():
        setattr(cfg, key, _coerce(key, value))
    _validate(cfg)
    if cfg.T is None:
        cfg.T = default_triplet_count(cfg.P, cfg.K)
    return cfg


def _validate(cfg: RunConfig) -> None:
    try:
        cfg.loss_config()
        cfg.train_config()
        cfg.protocol()
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if cfg.layer_dims is not None and (
        len(cfg.layer_dims) < 2 or any(d < 1 for d in cfg.layer_dims)
    ):
        raise ConfigError("layer_dims: need >= 2 positive entries")


def parse_config(path: str | Path) -> RunConfig:
    """Read the JSON config file, applying defaults for absent keys."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(raw)


def config_to_dict(cfg: RunConfig) -> dict:
    """Serializable mapping with exactly the recognized keys; round-trips."""
    return {f.name: getattr(cfg, f.name) for f in fields(RunConfig)}


def _apply_overrides(cfg: RunConfig, assignments: list[str]) -> RunConfig:
    raw = config_to_dict(cfg)
    for item in assignments:
        key, sep, text = item.partition("=")
        if not sep:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"unknown key: {key}")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        raw[key] = value
    return config_from_dict(raw)


def _provenance(cfg: RunConfig) -> list[str]:
    blob = json.dumps(config_to_dict(cfg), sort_keys=True, separators=(",", ":"))
    return [f"config: {blob}", f"seed: {cfg.seed}"]


def _load_gallery(cfg: RunConfig):
    if not cfg.data:
        raise ConfigError("data: no manifest paths given (config key 'data' or --data)")
    return merge_galleries(load_manifest(p) for p in cfg.data)


def _resolve_layer_dims(cfg: RunConfig, input_dim: int) -> list[int]:
    if cfg.layer_dims is None:
        return [input_dim, 32, 16]
    if cfg.layer_dims[0] != input_dim:
        raise ConfigError(
            f"layer_dims: first entry {cfg.layer_dims[0]} != data dimension {input_dim}"
        )
    return list(cfg.layer_dims)


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_train(cfg: RunConfig, args) -> list[Path]:
    gallery = _load_gallery(cfg)
    dims = _resolve_layer_dims(cfg, gallery.input_dim)
    net = init_network(dims, stream_seed(cfg.seed, "init"))
    trained, stats = train(net, gallery, cfg.train_config())
    out = _out_dir(cfg)
    ckpt = out / "checkpoint.tfnet"
    curve = out / "loss_curve.csv"
    save_checkpoint(trained, ckpt, comments=_provenance(cfg))
    write_loss_curve(stats, curve, comments=_provenance(cfg))
    return [ckpt, curve]


def _cmd_eval(cfg: RunConfig, args) -> list[Path]:
    gallery = _load_gallery(cfg)
    out = _out_dir(cfg)
    ckpt = Path(args.checkpoint) if args.checkpoint else out / "checkpoint.tfnet"
    if not ckpt.exists():
        raise ConfigError(f"checkpoint not found: {ckpt} (run 'train' first or pass --checkpoint)")
    net = load_checkpoint(ckpt)
    protocol = cfg.protocol(per_dataset=args.per_dataset)
    result = evaluate_repeated(net, gallery, protocol, stream_rng(cfg.seed, "splits"))
    table = out / "cmc.csv"
    long = out / "cmc_long.csv"
    cells = [GridCell(gamma=cfg.gamma, beta=cfg.beta, result=result)]
    write_result_table(cells, protocol.ks, table, comments=_provenance(cfg))
    write_cmc_long(result, protocol.ks, long, comments=_provenance(cfg))
    return [table, long]


def _parse_grid_values(text: str, flag: str) -> list[float]:
    try:
        values = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise ConfigError(f"{flag}: expected comma-separated numbers, got {text!r}") from exc
    if not values:
        raise ConfigError(f"{flag}: empty grid")
    return values


def _cmd_grid(cfg: RunConfig, args) -> list[Path]:
    gallery = _load_gallery(cfg)
    dims = _resolve_layer_dims(cfg, gallery.input_dim)
    net = init_network(dims, stream_seed(cfg.seed, "init"))
    gammas = _parse_grid_values(args.gammas, "--gammas")
    betas = _parse_grid_values(args.betas, "--betas")
    protocol = cfg.protocol(per_dataset=args.per_dataset)
    cells = grid_search_weights(net, gallery, gammas, betas, cfg.train_config(), protocol)
    out = _out_dir(cfg)
    table = out / "grid.csv"
    write_result_table(cells, protocol.ks, table, comments=_provenance(cfg))
    return [table]


def _cmd_synth(cfg: RunConfig, args) -> list[Path]:
    gallery = generate_synthetic(
        n_ids=args.ids,
        per_id=args.per_id,
        dim=args.dim,
        cluster_spread=args.spread,
        noise=args.noise,
        seed=stream_seed(cfg.seed, "data"),
        dataset_tag=args.tag,
    )
    out = _out_dir(cfg)
    manifest = out / args.file_name
    save_manifest(gallery, manifest, comments=_provenance(cfg))
    return [manifest]


def _cmd_count_triplets(cfg: RunConfig, args) -> list[Path]:
    print(triplet_capacity(args.persons, args.per_person))
    return []


_COMMANDS = {
    "train": _cmd_train,
    "eval": _cmd_eval,
    "grid": _cmd_grid,
    "synth": _cmd_synth,
    "count-triplets": _cmd_count_triplets,
}


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file")
    sub.add_argument("--seed", type=int, help="override the top-level seed")
    sub.add_argument("--out", help="override the output directory")
    sub.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key (JSON value or bare string); repeatable",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tripletlearn",
        description="Triplet similarity learning: train, evaluate and sweep loss weights.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p_train = subs.add_parser("train", help="train a model; writes checkpoint + loss curve")
    _add_common(p_train)
    p_train.add_argument("--data", action="append", help="manifest CSV (repeatable)")

    p_eval = subs.add_parser("eval", help="evaluate a checkpoint; writes match-rate CSVs")
    _add_common(p_eval)
    p_eval.add_argument("--data", action="append", help="manifest CSV (repeatable)")
    p_eval.add_argument("--checkpoint", help="checkpoint path (default: <out>/checkpoint.tfnet)")
    p_eval.add_argument("--per-dataset", action="store_true", help="also report per dataset tag")

    p_grid = subs.add_parser("grid", help="grid-search loss weights; writes the result table")
    _add_common(p_grid)
    p_grid.add_argument("--data", action="append", help="manifest CSV (repeatable)")
    p_grid.add_argument("--gammas", default="1", help="comma-separated positive-pair weights")
    p_grid.add_argument("--betas", default="0.3,0.5", help="comma-separated negative-pair weights")
    p_grid.add_argument("--per-dataset", action="store_true", help="also report per dataset tag")

    p_synth = subs.add_parser("synth", help="generate a synthetic manifest")
    _add_common(p_synth)
    p_synth.add_argument("--ids", type=int, default=30, help="number of identities")
    p_synth.add_argument("--per-id", type=int, default=6, help="samples per identity")
    p_synth.add_argument("--dim", type=int, default=16, help="input dimension")
    p_synth.add_argument("--spread", type=float, default=5.0, help="identity center scale")
    p_synth.add_argument("--noise", type=float, default=0.2, help="within-identity noise scale")
    p_synth.add_argument("--tag", default="synthetic", help="dataset tag")
    p_synth.add_argument("--file-name", default="manifest.csv", help="output file name")

    p_count = subs.add_parser("count-triplets", help="print the triplet capacity of a batch shape")
    _add_common(p_count)
    p_count.add_argument("--persons", type=int, required=True, help="identities per batch")
    p_count.add_argument("--per-person", type=int, required=True, help="samples per identity")

    return parser


def _resolve_config(args) -> RunConfig:
    cfg = parse_config(args.config) if args.config else config_from_dict({})
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"output_dir={args.out}")
    if getattr(args, "data", None):
        overrides.append("data=" + json.dumps(list(args.data)))
    return _apply_overrides(cfg, overrides)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
        written = _COMMANDS[args.command](cfg, args)
    except (ConfigError, GalleryError, SamplingError, CheckpointError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
