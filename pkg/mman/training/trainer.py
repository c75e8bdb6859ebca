"""Alternating discriminator / generator optimization.

Each iteration runs the generator once. Its detached outputs feed `d_steps`
discriminator updates, then the discriminators score the attached outputs again for
the generator update. Every iteration appends one row to the convergence trace.
"""
import logging
import math
from pathlib import Path

import numpy as np

from mman.config import ExperimentConfig
from mman.data.folder import load_dataset
from mman.data.labels import low_res_target, swap_for
from mman.data.stream import SampleStream, TrainingItem
from mman.metrics.convergence import ConvergenceTrace
from mman.models.discriminator import discriminator_score
from mman.models.generator import MID_FACTOR, GeneratorOutput
from mman.models.variants import ModelSet, build_variant
from mman.src.tensor import Tensor
from mman.training.checkpoint import Checkpoint, checkpoint_load, checkpoint_save
from mman.training.losses import ScorePair, variant_loss
from mman.training.optimizer import Adam, lr_at

logger = logging.getLogger(__name__)


def build_models(config: ExperimentConfig) -> ModelSet:
    """the variant named by the config, cast to its precision"""
    models = build_variant(
        config.train.variant,
        num_classes=config.data.num_classes,
        image_size=config.data.image_size,
        dropout=config.train.dropout,
        init_std=config.train.init_std,
        seed=config.train.seed,
    )
    return models.astype(np.dtype(config.train.precision))


def build_stream(config: ExperimentConfig, samples=None) -> SampleStream:
    if samples is None:
        samples, _ = load_dataset(config.data)
    return SampleStream(
        samples,
        config.data,
        seed=config.train.seed,
        swap=swap_for(config.data.num_classes, config.data.swap_table),
        workers=config.train.workers,
        dtype=np.dtype(config.train.precision),
    )


class Trainer:
    def __init__(self, models: ModelSet, stream: SampleStream, config: ExperimentConfig):
        """
        :param models: generator and discriminators of `config.train.variant`
        :param stream: ordered training items
        :param config: the full experiment config; its digest goes into checkpoints
        """
        if models.variant.kind != config.train.variant:
            raise ValueError(f"Models are `{models.variant.kind}` but the config trains `{config.train.variant}`.")
        self.models = models
        self.stream = stream
        self.config = config
        train = config.train

        self.g_optimizer = Adam.from_config(dict(models.generator.named_parameters()), train)
        self.d_optimizers = {
            name: Adam.from_config(dict(d.named_parameters()), train) for name, d in models.discriminators.items()
        }
        self.trace = ConvergenceTrace()
        self.iteration = 0
        """iterations completed"""

    def __repr__(self):
        return f"Trainer<{self.models.variant.kind}, iteration: {self.iteration}/{self.total_iterations}>"

    @property
    def total_iterations(self) -> int:
        total = self.config.train.epochs * len(self.stream)
        if self.config.train.max_iterations is not None:
            total = min(total, self.config.train.max_iterations)
        return total

    # ==== one iteration ====
    def _targets(self, item: TrainingItem) -> dict[str, np.ndarray]:
        targets = {"low": item.y_low[None], "high": item.y[None]}
        if self.models.variant.needs_mid:
            targets["mid"] = low_res_target(item.y, MID_FACTOR, self.config.data.low_res_rule)[None]
        return targets

    @staticmethod
    def _source(out: GeneratorOutput, source: str) -> Tensor:
        return {"low": out.low, "high": out.high, "mid": out.mid}[source]

    def _check_finite(self, breakdown: dict[str, float], phase: str) -> None:
        for key, value in breakdown.items():
            if not math.isfinite(value):
                raise FloatingPointError(
                    f"Non-finite {phase} loss component `{key}` ({value}) at iteration {self.iteration}."
                )

    def _discriminator_phase(self, item, image, out, targets, lr) -> tuple[dict[str, float], float]:
        models, weights = self.models, self.config.train.weights
        detached = {source: self._source(out, source).detach() for source in targets}
        outputs: dict[str, float] = {}
        total_value = 0.0
        for _ in range(self.config.train.d_steps):
            for d in models.discriminators.values():
                d.zero_grad()
            pairs = {}
            for attachment in models.variant.attachments:
                d = models.discriminators[attachment.name]
                real = discriminator_score(d, Tensor(targets[attachment.source]), image)
                fake = discriminator_score(d, detached[attachment.source], image)
                pairs[attachment.name] = ScorePair(real, fake)
                outputs[f"d_real_{attachment.name}"] = real.item()
                outputs[f"d_fake_{attachment.name}"] = fake.item()
            total, breakdown = variant_loss(
                models.variant, detached["low"], detached["high"], targets["low"], targets["high"],
                pairs, weights, side="discriminator",
            )
            self._check_finite(breakdown, "discriminator")
            if total.requires_grad:
                total.backward()
                for optimizer in self.d_optimizers.values():
                    optimizer.step(lr)
            total_value = breakdown["total"]
        return outputs, total_value

    def train_step(self, item: TrainingItem) -> dict[str, float]:
        """one D phase and one G phase on a training item; returns its trace row"""
        models, train = self.models, self.config.train
        lr = lr_at(item.epoch, train)
        models.train(True)
        image = Tensor(item.image[None])
        targets = self._targets(item)

        out = models.generator(image)
        d_outputs, d_loss = {}, 0.0
        if models.discriminators:
            d_outputs, d_loss = self._discriminator_phase(item, image, out, targets, lr)

        # generator phase on the attached outputs
        models.generator.zero_grad()
        pairs = {
            a.name: ScorePair(None, discriminator_score(models.discriminators[a.name], self._source(out, a.source), image))
            for a in models.variant.attachments
        }
        total, breakdown = variant_loss(
            models.variant, out.low, out.high, targets["low"], targets["high"], pairs, train.weights, side="generator",
        )
        self._check_finite(breakdown, "generator")
        total.backward()
        self.g_optimizer.step(lr)
        # the generator loss reached the discriminators too; those gradients are dropped
        for d in models.discriminators.values():
            d.zero_grad()

        row: dict[str, float] = {
            "iter": item.iteration,
            "L_mce_low": breakdown["L_mce_low"],
            "L_mce_high": breakdown["L_mce_high"],
        }
        for attachment in models.variant.attachments:
            row[f"L_adv_{attachment.name}"] = breakdown[f"L_adv_{attachment.name}"]
            row[f"d_real_{attachment.name}"] = d_outputs[f"d_real_{attachment.name}"]
            row[f"d_fake_{attachment.name}"] = d_outputs[f"d_fake_{attachment.name}"]
        row.update({"L_G": breakdown["total"], "L_D": d_loss, "lr": lr})
        return row

    # ==== loop ====
    def run(self, until: int | None = None, checkpoint_path: str | Path | None = None) -> ConvergenceTrace:
        """trains from the current iteration up to `until` (default: the configured total)"""
        stop = self.total_iterations if until is None else min(until, self.total_iterations)
        every = self.config.train.log_every
        logger.info(f"training {self.models.variant.kind} from iteration {self.iteration} to {stop}")
        for item in self.stream.iterate(self.iteration, stop):
            row = self.train_step(item)
            self.trace.append(row)
            self.iteration = item.iteration + 1
            if every and self.iteration % every == 0:
                adv = ", ".join(f"{k}={v:.4f}" for k, v in row.items() if k.startswith("d_"))
                logger.info(
                    f"iter {self.iteration}/{stop} L_G={row['L_G']:.4f} L_D={row['L_D']:.4f} "
                    f"mce_high={row['L_mce_high']:.4f} {adv}"
                )
            if checkpoint_path and self.config.train.checkpoint_every and \
                    self.iteration % self.config.train.checkpoint_every == 0:
                checkpoint_save(self.checkpoint(), checkpoint_path)
        return self.trace

    # ==== persistence ====
    def checkpoint(self) -> Checkpoint:
        modules = self.models.modules()
        optimizers = {"generator": self.g_optimizer, **self.d_optimizers}
        return Checkpoint(
            manifest=self.models.manifest(),
            config_text=self.config.to_text(),
            config_digest=self.config.digest(),
            iteration=self.iteration,
            params={name: {k: v.copy() for k, v in module.state_dict().items()} for name, module in modules.items()},
            optimizer={name: optimizer.state.copy() for name, optimizer in optimizers.items()},
            rng_state={"dropout": self.models.generator.dropout_rng.bit_generator.state},
            trace=self.trace.rows,
        )

    def restore(self, ckpt: Checkpoint) -> "Trainer":
        if ckpt.config_digest != self.config.digest():
            raise ValueError("Checkpoint config digest does not match the trainer's config.")
        if ckpt.manifest != self.models.manifest():
            raise ValueError("Checkpoint architecture manifest does not match the models.")
        modules = self.models.modules()
        optimizers = {"generator": self.g_optimizer, **self.d_optimizers}
        if set(ckpt.params) != set(modules):
            raise KeyError(f"Checkpoint holds modules {sorted(ckpt.params)}, the models have {sorted(modules)}.")
        for name, module in modules.items():
            module.load_state_dict(ckpt.params[name])
        for name, optimizer in optimizers.items():
            optimizer.state = ckpt.optimizer[name].copy()
        self.models.generator.dropout_rng.bit_generator.state = ckpt.rng_state["dropout"]
        self.trace = ConvergenceTrace(ckpt.trace)
        self.iteration = ckpt.iteration
        return self

    @classmethod
    def from_checkpoint(cls, path: str | Path, samples=None) -> "Trainer":
        """rebuilds config, models and data from a checkpoint and continues where it stopped"""
        ckpt = checkpoint_load(path)
        config = ExperimentConfig.from_text(ckpt.config_text)
        trainer = cls(build_models(config), build_stream(config, samples), config)
        return trainer.restore(ckpt)


def train_alternating(
        models: ModelSet,
        stream: SampleStream,
        config: ExperimentConfig,
        checkpoint_path: str | Path | None = None,
) -> tuple[ConvergenceTrace, Checkpoint]:
    """full run; the final checkpoint is written to `checkpoint_path` when given"""
    trainer = Trainer(models, stream, config)
    trace = trainer.run(checkpoint_path=checkpoint_path)
    ckpt = trainer.checkpoint()
    if checkpoint_path:
        checkpoint_save(ckpt, checkpoint_path)
    return trace, ckpt
