"""Cross-entropy, adversarial, mixed and combined losses.

Every loss returns a scalar Tensor so it can be differentiated. Scores are the sigmoid
outputs of a discriminator, either as Tensors or plain floats.
"""
from dataclasses import dataclass

import numpy as np

from mman.config import LossWeights
from mman.models.variants import VariantSpec
from mman.src.tensor import Tensor, as_tensor

PROB_FLOOR = 1e-12
SIDES = ("discriminator", "generator")

Score = Tensor | float


@dataclass
class ScorePair:
    """discriminator outputs for the real pair and the generated pair"""
    real: Score | None
    fake: Score


def _as_score(score: Score, name: str) -> Tensor:
    score = as_tensor(score)
    values = np.asarray(score.data)
    if not np.all(np.isfinite(values)):
        raise ValueError(f"`{name}` score is not finite: {values}.")
    # closed [0, 1]: a saturated sigmoid returns the endpoints and PROB_FLOOR absorbs them
    if np.any(values < 0) or np.any(values > 1):
        raise ValueError(f"`{name}` score must lie in [0, 1]. Got {values}.")
    return score


def _check_side(side: str) -> None:
    if side not in SIDES:
        raise ValueError(f"`side` must be one of {SIDES}. Got `{side}`.")


def mce_loss(pred: Tensor, target: Tensor | np.ndarray) -> Tensor:
    """pixel-wise cross-entropy averaged over pixels

    :param pred: class distribution, channel axis third from the end
    :param target: one-hot map of the same shape (a leading batch axis of 1 may differ)
    """
    target = as_tensor(target, pred.dtype)
    if target.shape != pred.shape:
        if target.size == pred.size and target.shape[-3:] == pred.shape[-3:]:
            target = target.reshape(pred.shape)
        else:
            raise ValueError(f"Prediction shape {pred.shape} does not match target shape {target.shape}.")
    if pred.ndim < 3:
        raise ValueError(f"mce_loss needs a C x H x W map. Got shape {pred.shape}.")
    pixels = pred.size // pred.shape[-3]
    return -(target * pred.clip(PROB_FLOOR, None).log()).sum() / float(pixels)


def adver_loss(d_real: Score | None, d_fake: Score, side: str) -> Tensor:
    """adversarial objective of one discriminator, as a quantity to minimize

    discriminator side: -[log D(real) + log(1 - D(fake))]
    generator side: -log D(fake)
    """
    _check_side(side)
    fake = _as_score(d_fake, "d_fake")
    if side == "generator":
        return -fake.clip(PROB_FLOOR, None).log().sum()
    if d_real is None:
        raise ValueError("The discriminator side needs a score for the real pair.")
    real = _as_score(d_real, "d_real")
    return -(real.clip(PROB_FLOOR, None).log().sum() + (1.0 - fake).clip(PROB_FLOOR, None).log().sum())


def adversarial_value(d_real: float, d_fake: float) -> float:
    """log D(real) + log(1 - D(fake)), the quantity the discriminator maximizes"""
    return -adver_loss(d_real, d_fake, "discriminator").item()


def mix_loss(pred: Tensor, target: Tensor | np.ndarray, d_scores: ScorePair, lam: float, side: str = "generator") -> Tensor:
    """cross-entropy plus `lam` times one adversarial term"""
    loss = mce_loss(pred, target)
    if lam == 0:
        return loss
    return loss + lam * adver_loss(d_scores.real, d_scores.fake, side)


def mman_loss(
        low_pred: Tensor,
        high_pred: Tensor,
        y_low: Tensor | np.ndarray,
        y: Tensor | np.ndarray,
        macro_scores: ScorePair | None,
        micro_scores: ScorePair | None,
        weights: LossWeights,
        side: str = "generator",
) -> tuple[Tensor, dict[str, float]]:
    """adv(macro) + lambda1 * mce(low) + lambda2 * adv(micro) + lambda3 * mce(high)

    A missing discriminator contributes nothing. Returns the total and a breakdown with
    the unweighted value of every term.
    """
    _check_side(side)
    mce_low = mce_loss(low_pred, y_low)
    mce_high = mce_loss(high_pred, y)
    total = weights.lambda1 * mce_low + weights.lambda3 * mce_high
    breakdown = {"L_mce_low": mce_low.item(), "L_mce_high": mce_high.item()}
    for name, scores, weight in (("macro", macro_scores, 1.0), ("micro", micro_scores, weights.lambda2)):
        if scores is None:
            continue
        term = adver_loss(scores.real, scores.fake, side)
        breakdown[f"L_adv_{name}"] = term.item()
        total = total + weight * term
    breakdown["total"] = total.item()
    return total, breakdown


def variant_loss(
        variant: VariantSpec,
        low_pred: Tensor,
        high_pred: Tensor,
        y_low: Tensor | np.ndarray,
        y: Tensor | np.ndarray,
        scores: dict[str, ScorePair],
        weights: LossWeights,
        side: str = "generator",
) -> tuple[Tensor, dict[str, float]]:
    """objective of any variant; adversarial breakdown keys follow the discriminator names

    single_an adds its one adversary through the mixed loss on the high-resolution map.
    The others weight each discriminator's term by its attachment weight, which for the
    macro/micro pair is exactly `mman_loss`.
    """
    _check_side(side)
    missing = [a.name for a in variant.attachments if a.name not in scores]
    if missing:
        raise KeyError(f"Variant `{variant.kind}` is missing scores for {missing}.")

    mce_low = mce_loss(low_pred, y_low)
    breakdown = {"L_mce_low": mce_low.item()}
    if variant.kind == "single_an":
        pair = scores["global"]
        mixed = mix_loss(high_pred, y, pair, weights.lam, side)
        mce_high = mce_loss(high_pred, y)
        breakdown["L_mce_high"] = mce_high.item()
        breakdown["L_adv_global"] = adver_loss(pair.real, pair.fake, side).item()
        total = weights.lambda1 * mce_low + weights.lambda3 * mixed
    else:
        mce_high = mce_loss(high_pred, y)
        breakdown["L_mce_high"] = mce_high.item()
        total = weights.lambda1 * mce_low + weights.lambda3 * mce_high
        for attachment in variant.attachments:
            pair = scores[attachment.name]
            term = adver_loss(pair.real, pair.fake, side)
            breakdown[f"L_adv_{attachment.name}"] = term.item()
            total = total + weights.weight(attachment.adversarial_weight) * term
    breakdown["total"] = total.item()
    return total, breakdown
