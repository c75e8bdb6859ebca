"""Command-line entry point.

    mman train --profile desk --variant mman --iterations 200 --out runs/mman
    mman eval --checkpoint runs/mman/checkpoint.mman
    mman gen-data --seed 7 --count 16 --size 64 --out data/synth
    mman variants --iterations 50 --seeds 3 --out runs/variants
    mman export-curves --trace runs/mman/trace.csv
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Sequence

from mman import __version__
from mman.config import ExperimentConfig, resolve_config_path
from mman.data.folder import DatasetFolder, load_dataset, synthetic_samples, write_dataset
from mman.data.labels import TaxonomyMap
from mman.experiments import STUDY_VARIANTS, run_variant_study
from mman.metrics.convergence import MIN_TRACE, ConvergenceTrace, convergence_summary
from mman.metrics.curves import export_curves
from mman.training.checkpoint import checkpoint_load, checkpoint_save
from mman.training.inference import evaluate_models
from mman.training.trainer import Trainer, build_models, build_stream

logger = logging.getLogger("mman")

COMMANDS = ("train", "eval", "gen-data", "variants", "export-curves")
CHECKPOINT = "checkpoint.mman"
TRACE = "trace.csv"
REPORT = "report"


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mman", description="Macro-micro adversarial human parsing at desk scale.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True, metavar="{" + ",".join(COMMANDS) + "}")

    def experiment_flags(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--config", help="key = value config file, or the name of a shipped config")
        sub.add_argument("--profile", choices=("desk", "full"))
        sub.add_argument("--variant")
        sub.add_argument("--seed", type=int, help="model and data-order seed")
        sub.add_argument("--scales", help="comma-separated inference scales, e.g. 0.8,1.0,1.2")
        sub.add_argument("--iterations", type=int, help="stop after this many iterations")
        sub.add_argument("--count", type=int, help="synthetic training samples")
        sub.add_argument("--size", type=int, help="square training extent")
        sub.add_argument("--manifest", help="dataset manifest; synthetic figures are used without one")
        sub.add_argument("--out")
        sub.add_argument("--verbose", "-v", action="store_true")

    train = commands.add_parser("train", help="train one variant")
    experiment_flags(train)
    train.add_argument("--resume", help="continue from a checkpoint; its config replaces every other flag")

    evaluate = commands.add_parser("eval", help="evaluate a checkpoint")
    evaluate.add_argument("--checkpoint", required=True)
    evaluate.add_argument("--manifest", help="evaluate this dataset instead of the checkpoint's training set")
    evaluate.add_argument("--scales")
    evaluate.add_argument("--out")
    evaluate.add_argument("--verbose", "-v", action="store_true")

    gen = commands.add_parser("gen-data", help="write a seeded synthetic dataset")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--count", type=int, default=8)
    gen.add_argument("--size", type=int, default=64)
    gen.add_argument("--out", required=True)
    gen.add_argument("--verbose", "-v", action="store_true")

    variants = commands.add_parser("variants", help="train and compare the discriminator variants")
    experiment_flags(variants)
    variants.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds per variant")
    variants.add_argument("--kinds", help=f"comma-separated variants (default: {','.join(STUDY_VARIANTS)})")

    curves = commands.add_parser("export-curves", help="render a trace to CSV and SVG")
    curves.add_argument("--trace", required=True)
    curves.add_argument("--out")
    curves.add_argument("--verbose", "-v", action="store_true")
    return parser


# ==== config resolution ====
def size_overrides(size: int) -> dict[str, str]:
    """training extent with the matching crop and a 9/8 shorter-side resize"""
    return {"image_size": str(size), "crop": str(size), "resize_short": str(size + size // 8)}


def flag_overrides(args: argparse.Namespace) -> dict[str, Any]:
    flags = {
        "profile": args.profile,
        "variant": args.variant,
        "seed": args.seed,
        "scales": args.scales,
        "max_iterations": args.iterations,
        "count": args.count,
        "manifest": args.manifest,
        "out": args.out,
    }
    overrides = {key: str(value) for key, value in flags.items() if value is not None}
    if args.size is not None:
        overrides.update(size_overrides(args.size))
    return overrides


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    """config file values, then flags on top"""
    overrides = flag_overrides(args)
    if args.config:
        return ExperimentConfig.from_file(resolve_config_path(args.config), overrides)
    return ExperimentConfig.from_mapping(overrides)


def write_run_manifest(out_dir: Path, command: str, digest: str, seed: int) -> Path:
    """digest, code version and seed of a run; enough with the config file to rerun it"""
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "run.cfg"
    path.write_text(f"command = {command}\ndigest = {digest}\nseed = {seed}\nversion = {__version__}\n")
    return path


def parse_scales(text: str | None) -> tuple[float, ...] | None:
    if text is None:
        return None
    scales = tuple(float(part) for part in text.split(",") if part.strip())
    if not scales:
        raise ValueError(f"`--scales` needs at least one number. Got `{text}`.")
    return scales


# ==== commands ====
def command_train(args: argparse.Namespace) -> int:
    if args.resume:
        trainer = Trainer.from_checkpoint(args.resume)
        config = trainer.config
        out = Path(args.out or config.out)
        logger.info(f"resuming {config.train.variant} at iteration {trainer.iteration}")
    else:
        config = resolve_config(args)
        out = Path(config.out)
        trainer = Trainer(build_models(config), build_stream(config), config)

    out.mkdir(parents=True, exist_ok=True)
    (out / "config.cfg").write_text(config.to_text())
    write_run_manifest(out, "train", config.digest(), config.train.seed)

    trace = trainer.run(checkpoint_path=out / CHECKPOINT)
    checkpoint_save(trainer.checkpoint(), out / CHECKPOINT)
    trace.to_csv(out / TRACE)

    report = evaluate_models(
        trainer.models.generator, trainer.stream.samples, config.train.scales, config.data.low_res_rule,
    )
    report.to_csv(out / f"{REPORT}.csv")
    text = report.to_table()
    if trainer.models.discriminators and len(trace) >= MIN_TRACE:
        summary = convergence_summary(trace)
        summary.to_csv(out / "convergence.csv")
        text += "\n\n" + summary.to_string()
    (out / f"{REPORT}.txt").write_text(text + "\n")
    print(text)
    return 0


def command_eval(args: argparse.Namespace) -> int:
    ckpt = checkpoint_load(args.checkpoint)
    config = ExperimentConfig.from_text(ckpt.config_text)
    models = build_models(config)
    if ckpt.manifest != models.manifest():
        raise ValueError("Checkpoint architecture manifest does not match its own config.")
    for name, module in models.modules().items():
        module.load_state_dict(ckpt.params[name])

    if args.manifest:
        manifest = Path(args.manifest)
        taxonomy = TaxonomyMap.from_file(resolve_config_path(config.data.taxonomy)) if config.data.taxonomy else None
        samples = DatasetFolder(manifest.parent).read_samples(config.data.num_classes, manifest.name, taxonomy)
    else:
        samples, _ = load_dataset(config.data)
    scales = parse_scales(args.scales) or config.train.scales

    report = evaluate_models(models.generator, samples, scales, config.data.low_res_rule)
    out = Path(args.out or Path(config.out) / "eval")
    write_run_manifest(out, "eval", config.digest(), config.train.seed)
    report.to_csv(out / f"{REPORT}.csv")
    text = report.to_table()
    (out / f"{REPORT}.txt").write_text(text + "\n")
    print(text)
    return 0


def command_gen_data(args: argparse.Namespace) -> int:
    config = ExperimentConfig.from_mapping({
        "data_seed": str(args.seed), "count": str(args.count), **size_overrides(args.size),
    })
    out = Path(args.out)
    samples = synthetic_samples(config.data.data_seed, 0, config.data.count, config.data.image_size)
    manifest = write_dataset(samples, out)
    write_run_manifest(out, "gen-data", config.digest(), config.data.data_seed)
    print(manifest)
    return 0


def command_variants(args: argparse.Namespace) -> int:
    config = resolve_config(args)
    if args.seeds < 1:
        raise ValueError(f"`--seeds` must be positive. Got {args.seeds}.")
    kinds = tuple(k.strip() for k in args.kinds.split(",") if k.strip()) if args.kinds else STUDY_VARIANTS
    seeds = tuple(range(config.train.seed, config.train.seed + args.seeds))
    out = Path(config.out)
    write_run_manifest(out, "variants", config.digest(), config.train.seed)
    (out / "config.cfg").write_text(config.to_text())

    study = run_variant_study(config, kinds, seeds, trace_dir=out / "traces")
    study.to_csv(out / "variants.csv")
    text = study.to_string(float_format=lambda v: f"{v:.4f}")
    (out / "variants.txt").write_text(text + "\n")
    print(text)
    return 0


def command_export_curves(args: argparse.Namespace) -> int:
    trace_path = Path(args.trace)
    trace = ConvergenceTrace.from_csv(trace_path)
    out = Path(args.out) if args.out else trace_path.parent
    csv_path, svg_path = export_curves(trace, out, stem=f"{trace_path.stem}_curves")
    print(csv_path)
    print(svg_path)
    return 0


def dispatch(argv: Sequence[str]) -> int:
    """runs one subcommand; returns the process exit status

    Usage errors and invalid inputs both exit with status 2, the latter with a
    one-line diagnostic on stderr.
    """
    parser = build_parser()
    try:
        args = parser.parse_args(list(argv))
    except SystemExit as e:
        return int(e.code or 0)

    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    match args.command:
        case "train":
            handler = command_train
        case "eval":
            handler = command_eval
        case "gen-data":
            handler = command_gen_data
        case "variants":
            handler = command_variants
        case _:
            handler = command_export_curves
    try:
        return handler(args)
    except (ValueError, KeyError, IndexError, FileNotFoundError, FloatingPointError, RuntimeError) as e:
        message = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"mman {args.command}: error: {message}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
