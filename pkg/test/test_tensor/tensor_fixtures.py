import numpy as np

from mman.src import ops
from mman.src.tensor import Tensor
from mman.training.losses import adver_loss, mce_loss

"""random instances for the finite-difference suite

Every builder takes an instance number and returns (fn, inputs): `fn` maps one Tensor per
input array to a scalar Tensor. A fixed random projection turns map-valued ops into scalars
so every output element contributes a different weight to the gradient.
"""

INSTANCES = 20


def _rng(op: str, instance: int) -> np.random.Generator:
    return np.random.default_rng([sum(map(ord, op)), instance])


def _away_from_zero(x: np.ndarray) -> np.ndarray:
    """keeps finite differences off the leaky relu kink"""
    return np.where(np.abs(x) < 0.05, x + np.sign(x + 1e-12) * 0.1, x)


def _projected(out: Tensor, rng: np.random.Generator) -> Tensor:
    return (out * Tensor(rng.normal(size=out.shape))).sum()


def conv_case(instance: int):
    rng = _rng("conv", instance)
    stride, padding, kernel = int(rng.integers(1, 3)), int(rng.integers(0, 2)), int(rng.integers(1, 4))
    dilation = int(rng.integers(1, 3))
    c_in, c_out = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    extent = dilation * (kernel - 1) + 3
    x = rng.normal(size=(1, c_in, extent, extent + 1))
    w = rng.normal(size=(c_out, c_in, kernel, kernel))
    b = rng.normal(size=(c_out,))
    projection = np.random.default_rng([instance, 99])

    def fn(x, w, b):
        return _projected(ops.conv2d(x, w, b, stride, padding, dilation), projection)

    return fn, [x, w, b]


def deconv_case(instance: int):
    rng = _rng("deconv", instance)
    stride, kernel = int(rng.integers(1, 3)), int(rng.integers(2, 5))
    padding = int(rng.integers(0, kernel // 2 + 1))
    c_in, c_out = int(rng.integers(1, 3)), int(rng.integers(1, 3))
    x = rng.normal(size=(1, c_in, 3, 4))
    w = rng.normal(size=(c_in, c_out, kernel, kernel))
    b = rng.normal(size=(c_out,))
    projection = np.random.default_rng([instance, 98])

    def fn(x, w, b):
        return _projected(ops.deconv2d(x, w, b, stride, padding), projection)

    return fn, [x, w, b]


def instance_norm_case(instance: int):
    rng = _rng("instance_norm", instance)
    channels = int(rng.integers(1, 4))
    x = rng.normal(size=(1, channels, 3, 4)) * rng.uniform(0.5, 3.0)
    gamma = rng.normal(size=(channels,))
    beta = rng.normal(size=(channels,))
    projection = np.random.default_rng([instance, 97])

    def fn(x, gamma, beta):
        return _projected(ops.instance_norm(x, gamma, beta), projection)

    return fn, [x, gamma, beta]


def leaky_relu_case(instance: int):
    rng = _rng("leaky_relu", instance)
    x = _away_from_zero(rng.normal(size=(1, 2, 3, 3)))
    projection = np.random.default_rng([instance, 96])
    return (lambda x: _projected(ops.leaky_relu(x), projection)), [x]


def sigmoid_case(instance: int):
    rng = _rng("sigmoid", instance)
    x = rng.normal(size=(1, 2, 3, 3)) * 2
    projection = np.random.default_rng([instance, 95])
    return (lambda x: _projected(ops.sigmoid(x), projection)), [x]


def softmax_case(instance: int):
    rng = _rng("softmax", instance)
    x = rng.normal(size=(1, int(rng.integers(2, 5)), 3, 3))
    projection = np.random.default_rng([instance, 94])
    return (lambda x: _projected(ops.softmax_over_channels(x), projection)), [x]


def concat_case(instance: int):
    rng = _rng("concat", instance)
    a = rng.normal(size=(1, 2, 3, 3))
    b = rng.normal(size=(1, int(rng.integers(1, 4)), 3, 3))
    projection = np.random.default_rng([instance, 93])
    return (lambda a, b: _projected(ops.concat_channels(a, b), projection)), [a, b]


def resize_case(instance: int):
    rng = _rng("resize", instance)
    x = rng.normal(size=(1, 2, int(rng.integers(2, 7)), int(rng.integers(2, 7))))
    size = (int(rng.integers(1, 9)), int(rng.integers(1, 9)))
    projection = np.random.default_rng([instance, 92])
    return (lambda x: _projected(ops.resize_bilinear(x, size=size), projection)), [x]


def mce_case(instance: int):
    rng = _rng("mce", instance)
    classes = int(rng.integers(2, 6))
    logits = rng.normal(size=(1, classes, 3, 4))
    index = rng.integers(0, classes, size=(3, 4))
    target = (np.arange(classes)[:, None, None] == index[None]).astype(np.float64)[None]
    return (lambda logits: mce_loss(ops.softmax_over_channels(logits), target)), [logits]


def adver_case(instance: int):
    rng = _rng("adver", instance)
    side = ("discriminator", "generator")[instance % 2]
    real = rng.normal(size=(1, 1, 2, 2))
    fake = rng.normal(size=(1, 1, 2, 2))

    def fn(real, fake):
        return adver_loss(ops.sigmoid(real).mean(), ops.sigmoid(fake).mean(), side)

    return fn, [real, fake]


GRADIENT_CASES = {
    "conv2d": conv_case,
    "deconv2d": deconv_case,
    "instance_norm": instance_norm_case,
    "leaky_relu": leaky_relu_case,
    "sigmoid": sigmoid_case,
    "softmax": softmax_case,
    "concat": concat_case,
    "resize_bilinear": resize_case,
    "mce_loss": mce_case,
    "adver_loss": adver_case,
}
