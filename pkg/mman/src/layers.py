"""Declarative layer stacks and the shape / receptive-field / parameter calculus over them."""
from dataclasses import dataclass, field
from typing import Sequence, TypeVar

from mman.src.ops import conv_output_extent, deconv_output_extent

SPATIAL_KINDS = ("conv", "deconv")
LAYER_KINDS = (
    "conv", "deconv", "instance_norm", "leaky_relu", "sigmoid", "softmax", "dropout", "concat_marker",
)

LEAKY_SLOPE = 0.2
DROPOUT_RATE = 0.5


@dataclass(frozen=True)
class LayerSpec:
    """one layer of a stack

    `kernel`, `stride` and `padding` are set for conv/deconv only. A concat_marker
    stands for a skip connection joining the stack: its out_channels include the
    concatenated features.
    """
    kind: str
    in_channels: int
    out_channels: int
    kernel: int | None = None
    stride: int | None = None
    padding: int | None = None
    dilation: int = 1
    bias: bool = True
    rate: float | None = None
    """dropout rate, dropout layers only"""

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"Unknown layer kind `{self.kind}`. Expected one of {LAYER_KINDS}.")
        spatial_fields = (self.kernel, self.stride, self.padding)
        if self.kind in SPATIAL_KINDS:
            if any(f is None for f in spatial_fields):
                raise ValueError(f"{self.kind} layer needs kernel, stride and padding. Got {spatial_fields}.")
            if self.kernel < 1 or self.stride < 1 or self.padding < 0:
                raise ValueError(f"{self.kind} layer has an invalid geometry {spatial_fields}.")
        elif any(f is not None for f in spatial_fields):
            raise ValueError(f"{self.kind} layer cannot carry kernel/stride/padding. Got {spatial_fields}.")
        if self.in_channels < 1 or self.out_channels < 1:
            raise ValueError(f"{self.kind} layer needs positive channel counts. Got {self.in_channels}->{self.out_channels}.")
        if self.kind not in SPATIAL_KINDS and self.kind != "concat_marker" and self.in_channels != self.out_channels:
            raise ValueError(f"{self.kind} layer cannot change channels ({self.in_channels}->{self.out_channels}).")

    @property
    def effective_kernel(self) -> int:
        return self.dilation * (self.kernel - 1) + 1

    def describe(self) -> str:
        """one manifest line"""
        text = f"{self.kind} {self.in_channels}->{self.out_channels}"
        if self.kind in SPATIAL_KINDS:
            text += f" k={self.kernel} s={self.stride} p={self.padding}"
            if self.dilation != 1:
                text += f" d={self.dilation}"
            if not self.bias:
                text += " nobias"
        if self.rate is not None:
            text += f" rate={self.rate}"
        return text


@dataclass
class LayerStack:
    name: str
    layers: list[LayerSpec] = field(default_factory=list)

    def __post_init__(self):
        self.layers = list(self.layers)
        if not self.layers:
            raise ValueError(f"LayerStack `{self.name}` is empty.")
        for i, (previous, current) in enumerate(zip(self.layers, self.layers[1:]), start=1):
            if previous.out_channels != current.in_channels:
                raise ValueError(
                    f"LayerStack `{self.name}` breaks the channel chain at layer {i} ({current.kind}): "
                    f"{previous.out_channels} != {current.in_channels}."
                )

    def __len__(self):
        return len(self.layers)

    def __iter__(self):
        return iter(self.layers)

    def __add__(self, other: "LayerStack") -> "LayerStack":
        return LayerStack(self.name, self.layers + other.layers)

    @property
    def in_channels(self) -> int:
        return self.layers[0].in_channels

    @property
    def out_channels(self) -> int:
        return self.layers[-1].out_channels

    def manifest(self) -> str:
        """human readable architecture listing embedded in checkpoints and reports"""
        lines = [f"[{self.name}]"]
        lines += [f"  {i:02d} {layer.describe()}" for i, layer in enumerate(self.layers)]
        return "\n".join(lines)


LayerStackType = TypeVar('LayerStackType', bound=LayerStack)
"""Object type LayerStack"""


def shape_trace(stack: LayerStack, input_shape: tuple[int, int, int]) -> list[tuple[int, int, int]]:
    """per-layer output shapes (C, H, W); the last entry is the stack's output

    Concat markers keep the spatial extent and switch to their declared channel count.
    """
    channels, height, width = input_shape
    if channels != stack.in_channels:
        raise ValueError(f"`{stack.name}` expects {stack.in_channels} input channels. Got {channels}.")

    shapes = []
    for i, layer in enumerate(stack.layers):
        if layer.kind == "conv":
            height = conv_output_extent(height, layer.kernel, layer.stride, layer.padding, layer.dilation)
            width = conv_output_extent(width, layer.kernel, layer.stride, layer.padding, layer.dilation)
        elif layer.kind == "deconv":
            height = deconv_output_extent(height, layer.kernel, layer.stride, layer.padding)
            width = deconv_output_extent(width, layer.kernel, layer.stride, layer.padding)
        if height < 1 or width < 1:
            raise ValueError(
                f"`{stack.name}` layer {i} ({layer.describe()}) produces an empty extent {height}x{width}."
            )
        channels = layer.out_channels
        shapes.append((channels, height, width))
    return shapes


def receptive_field(stack: LayerStack | Sequence[LayerSpec]) -> int:
    """side of the square input region one output unit sees

    RF starts at 1 and grows by (k - 1) times the product of the strides before each layer.
    """
    field_size, jump = 1, 1
    for layer in stack:
        if layer.kind == "deconv":
            raise ValueError("receptive_field is defined for downsampling stacks; found a deconv layer.")
        if layer.kind != "conv":
            continue
        field_size += (layer.effective_kernel - 1) * jump
        jump *= layer.stride
    return field_size


def param_count(stack: LayerStack | Sequence[LayerSpec]) -> int:
    """learnable scalars: Cin*Cout*k^2 (+Cout bias) per conv/deconv, 2C per instance norm"""
    total = 0
    for layer in stack:
        if layer.kind in SPATIAL_KINDS:
            total += layer.in_channels * layer.out_channels * layer.kernel ** 2
            total += layer.out_channels if layer.bias else 0
        elif layer.kind == "instance_norm":
            total += 2 * layer.out_channels
    return total


def build_block(
        in_channels: int,
        out_channels: int,
        kind: str,
        *,
        dropout: float | None = None,
        name: str | None = None,
) -> LayerStack:
    """4x4 stride-2 conv (down) or deconv (up) followed by instance norm and LeakyReLU(0.2)

    :param dropout: rate of an optional trailing dropout layer, up blocks only
    """
    if kind not in ("down", "up"):
        raise ValueError(f"Block kind must be `down` or `up`. Got `{kind}`.")
    if dropout is not None and kind == "down":
        raise ValueError("Dropout belongs to up blocks only.")
    spatial = "conv" if kind == "down" else "deconv"
    layers = [
        LayerSpec(spatial, in_channels, out_channels, kernel=4, stride=2, padding=1),
        LayerSpec("instance_norm", out_channels, out_channels),
        LayerSpec("leaky_relu", out_channels, out_channels),
    ]
    if dropout:
        layers.append(LayerSpec("dropout", out_channels, out_channels, rate=dropout))
    return LayerStack(name or f"{kind}_{in_channels}_{out_channels}", layers)
