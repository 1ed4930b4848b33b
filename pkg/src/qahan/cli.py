"""Command-line driver: ``qahan {train,solve,noise-eval,mask-viz}``.

Exit codes: 0 success, 2 input or configuration error, 3 capability refusal.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .attention import render_mask, render_score_matrix
from .checkpoint import load_checkpoint, read_checkpoint, save_checkpoint
from .config import RunConfig, load_config, parse_config
from .errors import CapabilityError, ConfigError, DataFormatError, DimensionError, QahanError
from .ingest import ImageBatch, add_noise, load_cifar10, load_mnist, normalize
from .qubo import BinaryMask, ExplicitQubo
from .solvers import make_solver
from .training import evaluate, train

log = logging.getLogger("qahan")

EXIT_OK, EXIT_INPUT, EXIT_REFUSED = 0, 2, 3
CHECKPOINT_NAME = "model.ckpt"
NOISE_SEED_TAG = 101


# ------------------------------------------------------------------ helpers


def load_datasets(cfg: RunConfig) -> tuple[ImageBatch, ImageBatch]:
    ds = cfg.dataset
    for p in ds.paths():
        if not Path(p).is_file():
            raise ConfigError(f"dataset file not found: {p}")
    if ds.name == "mnist":
        train_raw = load_mnist(ds.train_images, ds.train_labels)
        test_raw = load_mnist(ds.test_images, ds.test_labels)
    else:
        train_raw = load_cifar10(ds.train_batches)
        test_raw = load_cifar10(ds.test_batches)
    if ds.train_size > len(train_raw):
        raise ConfigError(f"dataset.train_size={ds.train_size} exceeds the {len(train_raw)} available")
    if ds.test_size > len(test_raw):
        raise ConfigError(f"dataset.test_size={ds.test_size} exceeds the {len(test_raw)} available")
    train_set = normalize(train_raw.subset(ds.train_size))
    test_set = normalize(test_raw.subset(ds.test_size))
    if cfg.noise.enabled:
        train_set = add_noise(train_set, cfg.noise.intensity, noise_seed(cfg.seed, 0))
        test_set = add_noise(test_set, cfg.noise.intensity, noise_seed(cfg.seed, 1))
    return train_set, test_set


def noise_seed(seed: int, which: int, intensity: float = 0.0) -> int:
    words = [seed, NOISE_SEED_TAG, which, int(round(intensity * 1e6))]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def write_manifest(out_dir: Path, command: str, cfg: RunConfig, started: float, artifacts) -> Path:
    manifest = {
        "command": command,
        "qahan_version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "seed": cfg.seed,
        "config": cfg.model_dump(mode="json"),
        "wall_clock_seconds": round(time.time() - started, 3),
        "finished_at": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "artifacts": sorted(str(a) for a in artifacts),
    }
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(v: float) -> str:
    return repr(float(v) + 0.0)


def _resolve(args) -> RunConfig:
    return load_config(args.config, seed=args.seed, backend=args.backend, output_dir=args.output)


# ------------------------------------------------------------------ commands


def cmd_train(args) -> int:
    started = time.time()
    cfg = _resolve(args)
    train_set, test_set = load_datasets(cfg)
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    state, history = train(cfg.network, train_set, test_set, cfg.solver.build(), cfg.seed)

    l, m = cfg.network.grid
    first = state.qaham.first_solved or state.mask
    artifacts = [
        out / "history.csv",
        save_checkpoint(out / CHECKPOINT_NAME, state, cfg),
        render_mask(first, l, m, out / "mask_first.pgm"),
        render_mask(state.mask, l, m, out / "mask_last.pgm"),
        out / "solves.csv",
    ]
    (out / "history.csv").write_text(history.to_csv())
    _write_csv(
        out / "solves.csv",
        ("epoch", "batch", "energy", "attended_energy", "cardinality", "solver", "seed"),
        [
            (r.epoch, r.batch, _fmt(r.energy), _fmt(r.attended_energy), r.cardinality, r.solver, r.seed)
            for r in state.qaham.records
        ],
    )
    write_manifest(out, "train", cfg, started, artifacts)
    if history.records:
        last = history.records[-1]
        print(f"epoch {last.epoch}: test_acc {last.test_acc:.4f} test_loss {last.test_loss:.4f}")
    print(f"artifacts written to {out}")
    return EXIT_OK


def cmd_solve(args) -> int:
    try:
        qubo = ExplicitQubo.load(args.qubo_file)
    except FileNotFoundError:
        raise ConfigError(f"QUBO file not found: {args.qubo_file}") from None
    backend = args.backend or "sa"
    params = {}
    if backend == "sa":
        params = {"sweeps": args.sweeps, "restarts": args.restarts}
    elif backend == "qa_sim":
        params = {"total_time": args.total_time, "shots": args.shots}
    result = make_solver(backend, **params).solve(qubo, args.seed or 0)
    bits = " ".join(str(int(b)) for b in result.x_opt.bits)
    print(f"{result.energy + 0.0:.17g} {bits}")
    return EXIT_OK


def _checkpoint_path(args, cfg: RunConfig) -> Path:
    return Path(args.checkpoint) if args.checkpoint else Path(cfg.output_dir) / CHECKPOINT_NAME


def cmd_noise_eval(args) -> int:
    started = time.time()
    cfg = _resolve(args)
    out = Path(cfg.output_dir)
    ckpt = _checkpoint_path(args, cfg)
    if not ckpt.is_file() and not args.train:
        raise ConfigError(f"checkpoint not found: {ckpt} (pass --train to train inline)")
    clean = cfg.model_copy(update={"noise": cfg.noise.model_copy(update={"enabled": False})})
    train_set, test_set = load_datasets(clean)
    out.mkdir(parents=True, exist_ok=True)
    if ckpt.is_file():
        state = load_checkpoint(ckpt, cfg, cfg.solver.build())
    else:
        state, _ = train(cfg.network, train_set, test_set, cfg.solver.build(), cfg.seed)
        save_checkpoint(ckpt, state, cfg)
    rows = []
    for intensity in args.intensities:
        if intensity < 0:
            raise ConfigError(f"--intensities: negative value {intensity}")
        noisy = add_noise(test_set, intensity, noise_seed(cfg.seed, 1, intensity))
        loss, acc = evaluate(state.model, noisy, state.mask)
        rows.append((_fmt(intensity), _fmt(loss), _fmt(acc)))
        print(f"intensity {intensity}: test_acc {acc:.4f} test_loss {loss:.4f}")
    report = out / "noise_report.csv"
    _write_csv(report, ("intensity", "test_loss", "test_acc"), rows)
    write_manifest(out, "noise-eval", cfg, started, [report, ckpt])
    return EXIT_OK


def cmd_mask_viz(args) -> int:
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise ConfigError(f"checkpoint not found: {ckpt}")
    stored, _, _, tensors = read_checkpoint(ckpt)
    if "mask.current" not in tensors:
        raise DataFormatError(f"{ckpt}: checkpoint has no stored mask")
    cfg = load_config(args.config) if args.config else parse_config(stored)
    out = Path(args.output or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    mask = BinaryMask(tensors["mask.current"].astype(np.uint8), source="checkpoint")
    l, m = cfg.network.grid
    written = [render_mask(mask, l, m, out / "mask.pgm")]
    if args.score_matrix:
        written.append(render_score_matrix(mask, out / "score_matrix.pgm"))
    for path in written:
        print(path)
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qahan", description="Quantum-annealing hard attention experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required, help="JSON run configuration")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--backend", choices=("exact", "sa", "qa_sim"), help="override solver.backend")
        p.add_argument("--output", help="override output_dir")

    p = sub.add_parser("train", help="train a QAHAN and write history, checkpoint, masks")
    common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("solve", help="minimize a QUBO text file and print 'energy x_0 ... x_n-1'")
    p.add_argument("qubo_file")
    p.add_argument("--backend", choices=("exact", "sa", "qa_sim"), default="sa")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--sweeps", type=int, default=1000)
    p.add_argument("--restarts", type=int, default=4)
    p.add_argument("--total-time", type=float, default=20.0)
    p.add_argument("--shots", type=int, default=1000)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("noise-eval", help="test accuracy of a trained model under input noise")
    common(p)
    p.add_argument("--checkpoint", help="defaults to <output_dir>/model.ckpt")
    p.add_argument("--intensities", type=float, nargs="*", default=[0.0, 0.2, 0.4])
    p.add_argument("--train", action="store_true", help="train first if the checkpoint is missing")
    p.set_defaults(func=cmd_noise_eval)

    p = sub.add_parser("mask-viz", help="render the stored mask (and score matrix) as PGM")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--config", help="defaults to the config stored in the checkpoint")
    p.add_argument("--output", help="output directory")
    p.add_argument("--score-matrix", action="store_true", help="also render x x^T")
    p.set_defaults(func=cmd_mask_viz)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except CapabilityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REFUSED
    except (ConfigError, DataFormatError, DimensionError, QahanError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
