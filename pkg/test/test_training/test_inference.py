import logging

import numpy as np
import pytest

from mman.data.labels import DESK_CLASSES
from mman.data.synth import synth_figure
from mman.models.generator import DualOutputGenerator
from mman.training.inference import evaluate_models, legal_extent, multi_scale_infer, predict

_legal_extents = [
    (32, 1.0, 32),
    (32, 0.8, 32),
    (32, 1.2, 32),
    (64, 1.2, 80),
    (256, 0.8, 208),
    (32, 0.2, None),
]


@pytest.mark.parametrize("extent, scale, expected", _legal_extents)
def test_legal_extent(extent, scale, expected):
    assert legal_extent(extent, scale) == expected


class TestInference:
    g = DualOutputGenerator(7, seed=0, init_std=0.05)
    sample = synth_figure(3, (32, 32))

    def test_predict_restores_training_mode(self):
        self.g.train()
        out = predict(self.g, self.sample.image)
        assert self.g.training
        assert out.high.shape == (1, 7, 32, 32)
        assert out.high.creator is None

    def test_multi_scale_is_a_distribution(self):
        averaged = multi_scale_infer(self.g, self.sample.image, (0.8, 1.0, 1.5))
        assert averaged.shape == (7, 32, 32)
        np.testing.assert_allclose(averaged.sum(axis=0), 1.0, atol=1e-5)
        assert np.all(averaged >= 0)

    def test_single_scale_matches_predict(self):
        averaged = multi_scale_infer(self.g, self.sample.image, (1.0,))
        np.testing.assert_allclose(averaged, predict(self.g, self.sample.image).high.data[0], atol=1e-5)

    def test_skips_scales_without_a_legal_extent(self, caplog):
        with caplog.at_level(logging.WARNING, logger="mman.training.inference"):
            averaged = multi_scale_infer(self.g, self.sample.image, (0.2, 1.0))
        assert "skipping" in caplog.text
        np.testing.assert_allclose(averaged, multi_scale_infer(self.g, self.sample.image, (1.0,)))

    def test_every_scale_skipped(self):
        with pytest.raises(ValueError):
            multi_scale_infer(self.g, self.sample.image, (0.1, 0.2))

    @pytest.mark.parametrize("scales", [(), (1.0, -0.5)])
    def test_invalid_scales(self, scales):
        with pytest.raises(ValueError):
            multi_scale_infer(self.g, self.sample.image, scales)

    def test_evaluate_models(self):
        samples = [self.sample, synth_figure(4, (32, 32))]
        report = evaluate_models(self.g, samples, (1.0,))
        assert report.class_names == DESK_CLASSES
        assert 0.0 <= report.miou <= 1.0
        assert 0.0 <= report.low_res_miou <= 1.0
        assert 0.0 <= report.ipr <= 100.0
        assert 0.0 <= report.pixel_accuracy <= 1.0

    def test_evaluate_needs_samples(self):
        with pytest.raises(ValueError):
            evaluate_models(self.g, [])
