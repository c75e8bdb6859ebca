"""Variant comparison: train every variant on one config and tabulate the outcome."""
import dataclasses
import logging
from pathlib import Path
from typing import Sequence

import pandas as pd

from mman.config import ExperimentConfig
from mman.data.folder import load_dataset
from mman.metrics.convergence import MIN_TRACE, ConvergenceTrace, classify_convergence
from mman.models.variants import variant_table
from mman.training.inference import evaluate_models
from mman.training.trainer import build_models, build_stream, train_alternating

logger = logging.getLogger(__name__)

STUDY_VARIANTS = ("baseline", "single_an", "double_an", "multiple_an", "mman")
"""the five variants compared by default"""


def variant_config(config: ExperimentConfig, kind: str, seed: int) -> ExperimentConfig:
    """copy of `config` training `kind` with model/data seed `seed`"""
    train = dataclasses.replace(config.train, variant=kind, seed=seed)
    return dataclasses.replace(config, train=train)


def run_variant(config: ExperimentConfig, samples, evaluation) -> tuple[dict[str, float | str], ConvergenceTrace]:
    """trains one variant and evaluates it; returns (result row, trace)"""
    models = build_models(config)
    trace, _ = train_alternating(models, build_stream(config, samples), config)
    report = evaluate_models(
        models.generator, evaluation, config.train.scales, config.data.low_res_rule,
    )
    if not models.discriminators:
        verdict = "n/a"
    elif len(trace) < MIN_TRACE:
        logger.warning(f"{config.train.variant} trace has {len(trace)} rows, too short to classify")
        verdict = "indeterminate"
    else:
        verdict = classify_convergence(trace)
    row = {
        "miou": report.miou,
        "low_res_miou": report.low_res_miou,
        "ipr": report.ipr,
        "pixel_accuracy": report.pixel_accuracy,
        "verdict": verdict,
    }
    return row, trace


def run_variant_study(
        config: ExperimentConfig,
        kinds: Sequence[str] = STUDY_VARIANTS,
        seeds: Sequence[int] = (0,),
        trace_dir: str | Path | None = None,
) -> pd.DataFrame:
    """architecture table joined with median metrics over seeds

    Evaluation uses the held-out samples when the data config has any, the training
    samples otherwise. The verdict column is the most frequent verdict over seeds.

    Results:
                     discriminators  d_params  g_fov  l_fov   miou  low_res_miou   ipr  verdict
        variant
        baseline                  0         0      -      -   0.61          0.55  3.10      n/a
        mman                      2   4456962    4x4  22x22   0.64          0.58  2.20     good
    """
    if not kinds:
        raise ValueError("The variant study needs at least one variant.")
    if not seeds:
        raise ValueError("The variant study needs at least one seed.")
    samples, holdout = load_dataset(config.data)
    evaluation = holdout or samples

    results = []
    for kind in kinds:
        for seed in seeds:
            run_config = variant_config(config, kind, seed)
            logger.info(f"variant study: {kind} seed {seed}")
            row, trace = run_variant(run_config, samples, evaluation)
            results.append({"variant": kind, "seed": seed, **row})
            if trace_dir is not None:
                Path(trace_dir).mkdir(parents=True, exist_ok=True)
                trace.to_csv(Path(trace_dir) / f"{kind}_seed{seed}.csv")

    frame = pd.DataFrame(results)
    grouped = frame.groupby("variant", sort=False)
    medians = grouped[["miou", "low_res_miou", "ipr", "pixel_accuracy"]].median()
    medians["verdict"] = grouped["verdict"].agg(lambda v: v.value_counts().sort_index().idxmax())

    table = variant_table(tuple(kinds), num_classes=config.data.num_classes, image_size=config.data.image_size)
    study = table.join(medians)
    study.index.names = ["variant"]
    return study
