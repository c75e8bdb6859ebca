"""Dual-output segmentation generator.

Four strided down-blocks take the image to 1/16 resolution, a dilated-conv bridge
widens the context there, and the low-resolution head reads the bridge output. A
mirrored decoder of up-blocks with encoder skips brings features back to full
resolution for the high-resolution head. Both heads end in a channel softmax.
"""
import logging
from dataclasses import dataclass

import numpy as np

from mman.src import ops
from mman.src.layers import LayerSpec, LayerStack, build_block, param_count
from mman.src.module import Conv2d, InstanceNorm2d, Module, Sequential
from mman.src.tensor import Tensor

logger = logging.getLogger(__name__)

ENCODER_WIDTHS = (32, 64, 128, 256)
BRIDGE_DILATIONS = (1, 2, 4)
STRIDE_PRODUCT = 2 ** len(ENCODER_WIDTHS)
"""the low-resolution map is the input divided by this"""
MID_BLOCK = 1
"""decoder block whose output feeds the optional mid head"""
MID_FACTOR = STRIDE_PRODUCT // 2 ** (MID_BLOCK + 1)
"""the mid map is the input divided by this (H/4)"""


@dataclass
class GeneratorOutput:
    low: Tensor
    """C x H/16 x W/16 class distribution"""
    high: Tensor
    """C x H x W class distribution"""
    mid: Tensor | None = None
    """C x H/4 x W/4 distribution after the second up-block, built only when requested"""


class DualOutputGenerator(Module):
    def __init__(
            self,
            num_classes: int,
            *,
            in_channels: int = 3,
            widths: tuple[int, ...] = ENCODER_WIDTHS,
            dropout: float = 0.5,
            dropout_blocks: int = 2,
            mid_head: bool = False,
            init_std: float = 0.001,
            seed: int = 0,
    ):
        """builds the generator and allocates every parameter

        :param num_classes: C, background included
        :param widths: channel widths of the four down-blocks
        :param dropout: rate used in the first `dropout_blocks` up-blocks (0 disables)
        :param mid_head: also emit the H/4 map a third discriminator can attach to
        :param init_std: Gaussian init standard deviation
        :param seed: seeds both the init stream and the dropout stream
        """
        super().__init__()
        if len(widths) != 4:
            raise ValueError(f"The generator needs four encoder widths to reach 1/16. Got {widths}.")
        self.num_classes = num_classes
        self.widths = tuple(widths)
        self.has_mid_head = mid_head

        init_rng = np.random.default_rng([seed, 0])
        self.dropout_rng = np.random.default_rng([seed, 1])
        """stream every dropout layer draws from; saved in checkpoints"""

        # ==== declarative description ====
        self.stacks: dict[str, LayerStack] = self._describe(in_channels, dropout, dropout_blocks)
        """name -> LayerStack for every part of the network, used for manifests and param counts"""

        # ==== realized modules ====
        chain = (in_channels,) + self.widths
        self.encoder = Sequential(*(
            Sequential.from_stack(self.stacks[f"encoder.{i}"], init_rng, init_std=init_std)
            for i in range(len(chain) - 1)
        ))
        bottleneck = self.widths[-1]
        self.bridge = Sequential(*(
            Conv2d(layer, init_rng, init_std) for layer in self.stacks["bridge"].layers if layer.kind == "conv"
        ))
        self.bridge_norm = InstanceNorm2d(bottleneck)
        self.low_head = Sequential.from_stack(self.stacks["low_head"], init_rng, init_std=init_std)

        self.decoder = Sequential(*(
            Sequential.from_stack(
                _without_skip(self.stacks[f"decoder.{i}"]), init_rng,
                init_std=init_std, dropout_rng=self.dropout_rng,
            )
            for i in range(len(self.widths))
        ))
        self.high_head = Sequential.from_stack(self.stacks["high_head"], init_rng, init_std=init_std)
        if mid_head:
            self.mid_head = Sequential.from_stack(self.stacks["mid_head"], init_rng, init_std=init_std)

    def __repr__(self):
        return f"DualOutputGenerator<classes: {self.num_classes}, widths: {self.widths}>"

    def _describe(self, in_channels: int, dropout: float, dropout_blocks: int) -> dict[str, LayerStack]:
        stacks: dict[str, LayerStack] = {}
        chain = (in_channels,) + self.widths
        for i in range(len(self.widths)):
            stacks[f"encoder.{i}"] = build_block(chain[i], chain[i + 1], "down", name=f"encoder.{i}")

        bottleneck = self.widths[-1]
        # the three dilated convs run in parallel and are summed; listed in order here
        stacks["bridge"] = LayerStack("bridge", [
            *(LayerSpec("conv", bottleneck, bottleneck, kernel=3, stride=1, padding=d, dilation=d)
              for d in BRIDGE_DILATIONS),
            LayerSpec("instance_norm", bottleneck, bottleneck),
            LayerSpec("leaky_relu", bottleneck, bottleneck),
        ])
        stacks["low_head"] = LayerStack("low_head", [
            LayerSpec("conv", bottleneck, self.num_classes, kernel=1, stride=1, padding=0),
            LayerSpec("softmax", self.num_classes, self.num_classes),
        ])

        # up-block i consumes the previous decoder features, possibly concatenated with a skip
        skips = tuple(reversed(self.widths[:-1])) + (0,)
        outs = tuple(reversed(self.widths[:-1])) + (self.widths[0],)
        channels = bottleneck
        for i, (out, skip) in enumerate(zip(outs, skips)):
            rate = dropout if i < dropout_blocks and dropout > 0 else None
            block = build_block(channels, out, "up", dropout=rate, name=f"decoder.{i}")
            if skip:
                block = block + LayerStack("skip", [LayerSpec("concat_marker", out, out + skip)])
            stacks[f"decoder.{i}"] = block
            channels = block.out_channels
            if i == MID_BLOCK:
                stacks["mid_head"] = LayerStack("mid_head", [
                    LayerSpec("conv", channels, self.num_classes, kernel=1, stride=1, padding=0),
                    LayerSpec("softmax", self.num_classes, self.num_classes),
                ])
        stacks["high_head"] = LayerStack("high_head", [
            LayerSpec("conv", channels, self.num_classes, kernel=1, stride=1, padding=0),
            LayerSpec("softmax", self.num_classes, self.num_classes),
        ])
        if not self.has_mid_head:
            del stacks["mid_head"]
        return stacks

    def manifest(self) -> str:
        return "\n".join(stack.manifest() for stack in self.stacks.values())

    def declared_parameters(self) -> int:
        return sum(param_count(stack) for stack in self.stacks.values())

    def check_input(self, height: int, width: int) -> None:
        if height % STRIDE_PRODUCT or width % STRIDE_PRODUCT or height < STRIDE_PRODUCT or width < STRIDE_PRODUCT:
            raise ValueError(
                f"Generator input extents must be positive multiples of {STRIDE_PRODUCT}. Got {height}x{width}."
            )

    def forward(self, image: Tensor) -> GeneratorOutput:
        """N x 3 x H x W image -> GeneratorOutput(low, high[, mid])"""
        if image.ndim == 3:
            image = image.reshape(1, *image.shape)
        self.check_input(image.shape[2], image.shape[3])

        # ==== encoder ====
        features = []
        x = image
        for i in range(len(self.encoder)):
            x = self.encoder[i](x)
            features.append(x)

        # ==== bridge + low head ====
        bridged = None
        for i in range(len(self.bridge)):
            branch = self.bridge[i](x)
            bridged = branch if bridged is None else bridged + branch
        x = ops.leaky_relu(self.bridge_norm(bridged))
        low = self.low_head(x)

        # ==== decoder with skips + high head ====
        mid = None
        skips = list(reversed(features[:-1]))
        for i in range(len(self.decoder)):
            x = self.decoder[i](x)
            if i < len(skips):
                x = ops.concat_channels(x, skips[i])
            if i == MID_BLOCK and self.has_mid_head:
                mid = self.mid_head(x)
        high = self.high_head(x)
        return GeneratorOutput(low=low, high=high, mid=mid)


def _without_skip(stack: LayerStack) -> LayerStack:
    """the block's layers minus its concat marker; the concatenation happens in forward()"""
    return LayerStack(stack.name, [layer for layer in stack.layers if layer.kind != "concat_marker"])


def generator_forward(g: DualOutputGenerator, image: Tensor) -> tuple[Tensor, Tensor]:
    """(low, high) class distributions for an image"""
    out = g(image)
    return out.low, out.high
