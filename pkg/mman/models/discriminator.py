"""Macro (global) and micro (patch) discriminators.

Both read a label map concatenated with the RGB image at the label map's resolution
and answer with sigmoid scores. The macro stack downsamples its input to a single
1x1 score; the micro stack stops after three stride-2 stages and averages a grid of
patch scores.
"""
import math
from typing import TypeVar

import numpy as np

from mman.src import ops
from mman.src.layers import LayerSpec, LayerStack, build_block, param_count, receptive_field, shape_trace
from mman.src.module import Module, Sequential
from mman.src.tensor import Tensor

MODES = ("macro", "micro")

MACRO_WIDTHS = (64, 128, 256)
MICRO_WIDTHS = (64, 128, 128)
GLOBAL_MAX_WIDTH = 256


def macro_stack(in_channels: int, widths: tuple[int, ...] = MACRO_WIDTHS, name: str = "macro") -> LayerStack:
    """len(widths) down-blocks then a 4x4 stride-2 scoring conv; 16x16 in, 1x1 out"""
    stack = None
    channels = in_channels
    for width in widths:
        block = build_block(channels, width, "down")
        stack = block if stack is None else stack + block
        channels = width
    head = LayerStack("head", [
        LayerSpec("conv", channels, 1, kernel=4, stride=2, padding=1),
        LayerSpec("sigmoid", 1, 1),
    ])
    return LayerStack(name, (stack + head).layers)


def micro_stack(in_channels: int, widths: tuple[int, ...] = MICRO_WIDTHS, name: str = "micro") -> LayerStack:
    """three down-blocks (22x22 field, stride 8) then a 1x1 scoring conv per patch"""
    stack = None
    channels = in_channels
    for width in widths:
        block = build_block(channels, width, "down")
        stack = block if stack is None else stack + block
        channels = width
    head = LayerStack("head", [
        LayerSpec("conv", channels, 1, kernel=1, stride=1, padding=0),
        LayerSpec("sigmoid", 1, 1),
    ])
    return LayerStack(name, (stack + head).layers)


def global_stack(in_channels: int, extent: int, name: str = "global") -> LayerStack:
    """a macro-style stack deep enough to reduce an extent x extent map to 1x1"""
    depth = int(round(math.log2(extent)))
    if 2 ** depth != extent or depth < 2:
        raise ValueError(f"A global discriminator needs a power-of-two extent of at least 4. Got {extent}.")
    widths = tuple(min(64 * 2 ** i, GLOBAL_MAX_WIDTH) for i in range(depth - 1))
    return macro_stack(in_channels, widths, name=name)


class Discriminator(Module):
    def __init__(
            self,
            stack: LayerStack,
            mode: str,
            *,
            init_std: float = 0.001,
            seed: int = 0,
    ):
        super().__init__()
        if mode not in MODES:
            raise KeyError(f"Unknown discriminator mode `{mode}`. Expected one of {MODES}.")
        self.stack = stack
        self.mode = mode
        self.network = Sequential.from_stack(stack, np.random.default_rng(seed), init_std=init_std)

    def __repr__(self):
        return f"Discriminator<{self.stack.name}: {self.mode}, fov: {self.receptive_field}>"

    @property
    def receptive_field(self) -> int:
        return receptive_field(self.stack)

    @property
    def declared_parameters(self) -> int:
        return param_count(self.stack)

    def fov(self, extent: int) -> tuple[str, int]:
        """("global", extent) when one score sees the whole map, else ("local", field side)"""
        if self.mode == "macro" or self.receptive_field >= extent:
            return "global", extent
        return "local", self.receptive_field

    def condition(self, label: Tensor, image: Tensor) -> Tensor:
        """label (+) RGB at the label's resolution; the image never carries a gradient"""
        if label.ndim == 3:
            label = label.reshape(1, *label.shape)
        if image.ndim == 3:
            image = image.reshape(1, *image.shape)
        image = image.detach()
        if image.shape[2:] != label.shape[2:]:
            image = ops.resize_bilinear(image, size=label.shape[2:])
        if image.dtype != label.dtype:
            image = image.astype(label.dtype)
        return ops.concat_channels(label, image)

    def forward(self, label: Tensor, image: Tensor) -> Tensor:
        """raw score map N x 1 x h x w"""
        x = self.condition(label, image)
        if x.shape[1] != self.stack.in_channels:
            raise ValueError(
                f"`{self.stack.name}` expects {self.stack.in_channels} input channels (label + RGB). Got {x.shape[1]}."
            )
        return self.network(x)


DiscriminatorType = TypeVar('DiscriminatorType', bound=Discriminator)
"""Object type Discriminator"""


def macro_d_forward(d: Discriminator, label: Tensor, image: Tensor) -> Tensor:
    """single consistency score in (0, 1) for a low-resolution label map"""
    if d.mode != "macro":
        raise ValueError(f"macro_d_forward needs a macro discriminator. Got mode `{d.mode}`.")
    extent = label.shape[-2:]
    final = shape_trace(d.stack, (d.stack.in_channels, *extent))[-1]
    if final[1:] != (1, 1):
        raise ValueError(f"`{d.stack.name}` reduces a {extent[0]}x{extent[1]} map to {final[1]}x{final[2]}, not 1x1.")
    return d(label, image).mean()


def micro_d_forward(d: Discriminator, label: Tensor, image: Tensor) -> tuple[Tensor, Tensor]:
    """(mean patch score, N x 1 x h x w score grid)"""
    if d.mode != "micro":
        raise ValueError(f"micro_d_forward needs a micro discriminator. Got mode `{d.mode}`.")
    field_size = d.receptive_field
    if min(label.shape[-2:]) < field_size:
        raise ValueError(
            f"`{d.stack.name}` scores {field_size}x{field_size} patches; a "
            f"{label.shape[-2]}x{label.shape[-1]} map is smaller than one patch."
        )
    grid = d(label, image)
    return grid.mean(), grid


def discriminator_score(d: Discriminator, label: Tensor, image: Tensor) -> Tensor:
    """scalar score for either mode"""
    if d.mode == "macro":
        return macro_d_forward(d, label, image)
    return micro_d_forward(d, label, image)[0]
