"""Seeded synthetic articulated figures.

A figure is a torso capsule, a disc head and four two-segment limbs drawn over a
textured background. The label map is rendered first and cleaned so every part is one
4-connected region; the image is then colored from the cleaned labels.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from mman.data.labels import DESK_CLASSES, to_one_hot
from mman.data.sample import Sample

logger = logging.getLogger(__name__)

LIMBS = ("left_arm", "right_arm", "left_leg", "right_leg")
LIMB_CLASS = {"left_arm": 3, "right_arm": 4, "left_leg": 5, "right_leg": 6}
HEAD, TORSO = 1, 2

PALETTE = np.array([
    [0.45, 0.50, 0.45],
    [0.90, 0.75, 0.60],
    [0.80, 0.20, 0.20],
    [0.20, 0.40, 0.85],
    [0.20, 0.70, 0.85],
    [0.30, 0.75, 0.30],
    [0.85, 0.80, 0.25],
])
"""mean RGB per desk class; background is replaced by texture"""

MIN_CANVAS = 32


@dataclass(frozen=True)
class FigureSpec:
    """pose in pixel units; angles in radians measured from straight down, positive toward +x"""
    canvas: tuple[int, int]
    torso_center: tuple[float, float]
    """(row, col)"""
    torso_angle: float
    torso_length: float
    torso_width: float
    head_radius: float
    limb_angles: tuple[tuple[float, float], ...]
    """(upper, lower) per limb in LIMBS order; the lower angle is relative to the upper segment"""
    limb_lengths: tuple[float, ...]
    """length of each of the two segments, per limb"""
    limb_widths: tuple[float, ...]
    num_classes: int = len(DESK_CLASSES)

    def __post_init__(self):
        if min(self.canvas) < MIN_CANVAS:
            raise ValueError(f"The canvas must be at least {MIN_CANVAS} pixels per side. Got {self.canvas}.")
        if self.num_classes != len(DESK_CLASSES):
            raise ValueError(f"Synthetic figures use the {len(DESK_CLASSES)} desk classes. Got {self.num_classes}.")
        if len(self.limb_angles) != 4 or len(self.limb_lengths) != 4 or len(self.limb_widths) != 4:
            raise ValueError("A figure has exactly four limbs.")
        sizes = {
            "torso_length": self.torso_length, "torso_width": self.torso_width, "head_radius": self.head_radius,
            **{f"{limb}_length": length for limb, length in zip(LIMBS, self.limb_lengths)},
            **{f"{limb}_width": width for limb, width in zip(LIMBS, self.limb_widths)},
        }
        degenerate = [name for name, value in sizes.items() if not value > 0]
        if degenerate:
            raise ValueError(f"Figure has degenerate parts: {degenerate}.")
        height, width = self.canvas
        for name, (point, radius) in self.extremes().items():
            if not (radius <= point[0] <= height - 1 - radius and radius <= point[1] <= width - 1 - radius):
                raise ValueError(f"`{name}` leaves the {height}x{width} canvas.")

    def _axis(self) -> tuple[np.ndarray, np.ndarray]:
        """unit vectors along the torso (downward) and across it (toward +x)"""
        down = np.array([np.cos(self.torso_angle), np.sin(self.torso_angle)])
        across = np.array([-down[1], down[0]])
        return down, across

    def joints(self) -> dict[str, tuple[np.ndarray, ...]]:
        """segment end points per part: torso (neck, hip), limbs (root, joint, tip), head (center,)"""
        center = np.asarray(self.torso_center, dtype=np.float64)
        down, across = self._axis()
        neck = center - down * self.torso_length / 2
        hip = center + down * self.torso_length / 2
        roots = {
            "left_arm": neck + across * self.torso_width / 2,
            "right_arm": neck - across * self.torso_width / 2,
            "left_leg": hip + across * self.torso_width / 4,
            "right_leg": hip - across * self.torso_width / 4,
        }
        parts: dict[str, tuple[np.ndarray, ...]] = {
            "torso": (neck, hip),
            "head": (neck - down * self.head_radius * 1.1,),
        }
        for limb, (upper, lower), length in zip(LIMBS, self.limb_angles, self.limb_lengths):
            first = self.torso_angle + upper
            second = first + lower
            joint = roots[limb] + length * np.array([np.cos(first), np.sin(first)])
            tip = joint + length * np.array([np.cos(second), np.sin(second)])
            parts[limb] = (roots[limb], joint, tip)
        return parts

    def extremes(self) -> dict[str, tuple[np.ndarray, float]]:
        """every drawn point with the radius painted around it"""
        joints = self.joints()
        points = {"head": (joints["head"][0], self.head_radius)}
        for i, point in enumerate(joints["torso"]):
            points[f"torso.{i}"] = (point, self.torso_width / 2)
        for limb, width in zip(LIMBS, self.limb_widths):
            for i, point in enumerate(joints[limb]):
                points[f"{limb}.{i}"] = (point, width / 2)
        return points


def random_figure_spec(rng: np.random.Generator, canvas: tuple[int, int] = (64, 64)) -> FigureSpec:
    """a random upright pose scaled to the canvas"""
    side = float(min(canvas))
    height, width = canvas
    for _ in range(64):
        arms = [rng.uniform(0.2, 1.2), -rng.uniform(0.2, 1.2)]
        legs = [rng.uniform(0.05, 0.4), -rng.uniform(0.05, 0.4)]
        angles = (
            (arms[0], rng.uniform(-0.6, 0.6)),
            (arms[1], rng.uniform(-0.6, 0.6)),
            (legs[0], rng.uniform(-0.3, 0.3)),
            (legs[1], rng.uniform(-0.3, 0.3)),
        )
        try:
            return FigureSpec(
                canvas=(height, width),
                torso_center=(height * 0.45 + rng.uniform(-0.04, 0.04) * side,
                              width * 0.5 + rng.uniform(-0.04, 0.04) * side),
                torso_angle=rng.uniform(-0.15, 0.15),
                torso_length=side * rng.uniform(0.26, 0.30),
                torso_width=side * rng.uniform(0.13, 0.16),
                head_radius=side * rng.uniform(0.07, 0.09),
                limb_angles=angles,
                limb_lengths=(side * 0.12, side * 0.12, side * 0.14, side * 0.14),
                limb_widths=(side * 0.06, side * 0.06, side * 0.08, side * 0.08),
            )
        except ValueError as e:
            logger.debug(f"rejected pose: {e}")
    raise RuntimeError(f"Could not place a figure on a {height}x{width} canvas.")


def _capsule(rows: np.ndarray, cols: np.ndarray, start: np.ndarray, end: np.ndarray, radius: float) -> np.ndarray:
    """pixels within `radius` of the segment start-end"""
    segment = end - start
    length2 = float(segment @ segment)
    offset_r, offset_c = rows - start[0], cols - start[1]
    t = np.zeros_like(rows) if length2 == 0 else np.clip((offset_r * segment[0] + offset_c * segment[1]) / length2, 0, 1)
    dr, dc = offset_r - t * segment[0], offset_c - t * segment[1]
    return dr * dr + dc * dc <= radius * radius


def render_label(spec: FigureSpec) -> np.ndarray:
    """index map with one 4-connected region per visible part"""
    height, width = spec.canvas
    rows, cols = np.mgrid[0:height, 0:width].astype(np.float64)
    label = np.zeros((height, width), dtype=np.int64)
    joints = spec.joints()

    # later parts are drawn over earlier ones
    label[_capsule(rows, cols, *joints["torso"], spec.torso_width / 2)] = TORSO
    for limb, width_ in zip(LIMBS, spec.limb_widths):
        if limb.endswith("leg"):
            root, joint, tip = joints[limb]
            label[_capsule(rows, cols, root, joint, width_ / 2) | _capsule(rows, cols, joint, tip, width_ / 2)] = LIMB_CLASS[limb]
    for limb, width_ in zip(LIMBS, spec.limb_widths):
        if limb.endswith("arm"):
            root, joint, tip = joints[limb]
            label[_capsule(rows, cols, root, joint, width_ / 2) | _capsule(rows, cols, joint, tip, width_ / 2)] = LIMB_CLASS[limb]
    center = joints["head"][0]
    label[(rows - center[0]) ** 2 + (cols - center[1]) ** 2 <= spec.head_radius ** 2] = HEAD

    # overlaps can split a part; only its largest 4-connected region survives
    for class_id in range(1, spec.num_classes):
        components, count = ndimage.label(label == class_id)
        if count <= 1:
            continue
        sizes = np.bincount(components.ravel())[1:]
        keep = int(sizes.argmax()) + 1
        label[(components > 0) & (components != keep)] = 0
    return label


def render_image(label: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """3 x H x W colors: textured background, per-part palette color plus noise"""
    height, width = label.shape
    coarse = rng.normal(0.0, 0.08, size=(3, height // 8 + 1, width // 8 + 1))
    texture = np.repeat(np.repeat(coarse, 8, axis=1), 8, axis=2)[:, :height, :width]
    image = PALETTE[label].transpose(2, 0, 1).copy()
    image[:, label == 0] += texture[:, label == 0]
    image += rng.normal(0.0, 0.03, size=image.shape)
    return np.clip(image, 0.0, 1.0)


def synth_figure(spec_or_seed: FigureSpec | int, canvas: tuple[int, int] = (64, 64)) -> Sample:
    """deterministic synthetic sample

    :param spec_or_seed: a pose, or a seed a random pose is drawn from
    :param canvas: (H, W); ignored when a FigureSpec is given
    """
    if isinstance(spec_or_seed, FigureSpec):
        spec, seed = spec_or_seed, 0
    else:
        seed = int(spec_or_seed)
        spec = random_figure_spec(np.random.default_rng([seed, 0]), canvas)
    label = render_label(spec)
    raw = render_image(label, np.random.default_rng([seed, 1]))
    image = raw - raw.mean(axis=(1, 2), keepdims=True)
    meta = {"seed": seed, "pose": spec, "mean_subtracted": True, "mean": raw.mean(axis=(1, 2))}
    return Sample(image=image, label=to_one_hot(label, spec.num_classes), meta=meta)
