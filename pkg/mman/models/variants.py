"""Variant assembly: which discriminators attach where on the generator."""
import logging
from dataclasses import dataclass, field

import pandas as pd

from mman.models.discriminator import Discriminator, global_stack, micro_stack
from mman.models.generator import MID_FACTOR, STRIDE_PRODUCT, DualOutputGenerator
from mman.src.layers import receptive_field

logger = logging.getLogger(__name__)

SOURCES = ("low", "high", "mid")


@dataclass(frozen=True)
class Attachment:
    """one discriminator: its name, its architecture mode, and the generator output it reads"""
    name: str
    mode: str
    source: str
    adversarial_weight: str
    """name of the LossWeights field scaling this discriminator's generator-side term"""


VARIANT_ATTACHMENTS: dict[str, tuple[Attachment, ...]] = {
    "baseline": (),
    "single_an": (Attachment("global", "macro", "high", "lam"),),
    "double_an": (
        Attachment("global", "macro", "high", "one"),
        Attachment("micro", "micro", "high", "lambda2"),
    ),
    "multiple_an": (
        Attachment("macro", "macro", "low", "one"),
        Attachment("micro", "micro", "high", "lambda2"),
        Attachment("mid", "micro", "mid", "lambda2"),
    ),
    "mman": (
        Attachment("macro", "macro", "low", "one"),
        Attachment("micro", "micro", "high", "lambda2"),
    ),
    "macro_an": (Attachment("macro", "macro", "low", "one"),),
    "micro_an": (Attachment("micro", "micro", "high", "lambda2"),),
}
"""discriminator layout per variant kind"""

VARIANT_KINDS = tuple(VARIANT_ATTACHMENTS)


@dataclass(frozen=True)
class VariantSpec:
    kind: str
    attachments: tuple[Attachment, ...] = field(default=())

    def __post_init__(self):
        if self.kind not in VARIANT_ATTACHMENTS:
            raise KeyError(f"Unknown variant `{self.kind}`. Expected one of {VARIANT_KINDS}.")
        if not self.attachments:
            object.__setattr__(self, "attachments", VARIANT_ATTACHMENTS[self.kind])
        for attachment in self.attachments:
            if attachment.source not in SOURCES:
                raise ValueError(f"Attachment `{attachment.name}` reads unknown output `{attachment.source}`.")

    @property
    def num_discriminators(self) -> int:
        return len(self.attachments)

    @property
    def needs_mid(self) -> bool:
        return any(a.source == "mid" for a in self.attachments)


@dataclass
class ModelSet:
    """the generator plus the discriminators of one variant"""
    variant: VariantSpec
    generator: DualOutputGenerator
    discriminators: dict[str, Discriminator]
    image_size: int

    def source_extent(self, source: str) -> int:
        factors = {"low": STRIDE_PRODUCT, "high": 1, "mid": MID_FACTOR}
        return self.image_size // factors[source]

    def attachment(self, name: str) -> Attachment:
        for attachment in self.variant.attachments:
            if attachment.name == name:
                return attachment
        raise KeyError(f"Variant `{self.variant.kind}` has no discriminator `{name}`.")

    def modules(self) -> dict[str, "DualOutputGenerator | Discriminator"]:
        return {"generator": self.generator, **self.discriminators}

    def manifest(self) -> str:
        parts = [f"# variant: {self.variant.kind}", f"# image_size: {self.image_size}", self.generator.manifest()]
        parts += [d.stack.manifest() for d in self.discriminators.values()]
        return "\n".join(parts)

    def train(self, mode: bool = True) -> None:
        for module in self.modules().values():
            module.train(mode)

    def astype(self, dtype) -> "ModelSet":
        for module in self.modules().values():
            module.astype(dtype)
        return self


def build_discriminator(
        attachment: Attachment,
        num_classes: int,
        extent: int,
        *,
        init_std: float = 0.001,
        seed: int = 0,
) -> Discriminator:
    """a discriminator for an extent x extent map

    A micro attachment whose map is smaller than one micro patch gets a whole-map
    (macro mode) stack instead.
    """
    in_channels = num_classes + 3
    mode = attachment.mode
    if mode == "micro":
        stack = micro_stack(in_channels, name=attachment.name)
        if extent < receptive_field(stack):
            logger.info(
                f"`{attachment.name}` reads a {extent}x{extent} map, smaller than a "
                f"{receptive_field(stack)}x{receptive_field(stack)} patch; scoring the whole map"
            )
            mode = "macro"
    if mode == "macro":
        stack = global_stack(in_channels, extent, name=attachment.name)
    return Discriminator(stack, mode, init_std=init_std, seed=seed)


def build_variant(
        spec: VariantSpec | str,
        *,
        num_classes: int,
        image_size: int,
        dropout: float = 0.5,
        init_std: float = 0.001,
        seed: int = 0,
) -> ModelSet:
    """assembles the generator and the variant's discriminators

    :param spec: VariantSpec or a kind name
    :param num_classes: C
    :param image_size: square training extent; fixes the resolution each discriminator sees
    :param seed: model seed; every discriminator gets its own derived stream
    """
    if isinstance(spec, str):
        spec = VariantSpec(spec)
    generator = DualOutputGenerator(
        num_classes, dropout=dropout, mid_head=spec.needs_mid, init_std=init_std, seed=seed,
    )
    generator.check_input(image_size, image_size)
    models = ModelSet(spec, generator, {}, image_size)
    for i, attachment in enumerate(spec.attachments, start=1):
        models.discriminators[attachment.name] = build_discriminator(
            attachment, num_classes, models.source_extent(attachment.source), init_std=init_std, seed=seed * 100 + i,
        )
    return models


def variant_table(kinds: tuple[str, ...], *, num_classes: int, image_size: int) -> pd.DataFrame:
    """#D, discriminator parameters, global and local FOV per variant

    Results:
                     discriminators  d_params  g_fov  l_fov
        variant
        mman                      2    ...     4x4    22x22
    """
    rows = {}
    for kind in kinds:
        models = build_variant(kind, num_classes=num_classes, image_size=image_size)
        global_fov, local_fov = "-", "-"
        for attachment in models.variant.attachments:
            d = models.discriminators[attachment.name]
            scope, side = d.fov(models.source_extent(attachment.source))
            if scope == "global":
                global_fov = f"{side}x{side}"
            elif local_fov == "-":
                local_fov = f"{side}x{side}"
        rows[kind] = {
            "discriminators": models.variant.num_discriminators,
            "d_params": sum(d.declared_parameters for d in models.discriminators.values()),
            "g_fov": global_fov,
            "l_fov": local_fov,
        }
    table = pd.DataFrame.from_dict(rows, orient="index")
    table.index.names = ["variant"]
    return table
