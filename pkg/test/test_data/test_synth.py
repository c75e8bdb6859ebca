import numpy as np
import pytest
from scipy import ndimage

from mman.data.labels import DESK_CLASSES, to_index
from mman.data.synth import FigureSpec, random_figure_spec, render_label, synth_figure

_seeds = [0, 1, 7, 123]


class TestSynthFigure:
    @pytest.mark.parametrize("seed", _seeds)
    def test_same_seed_same_sample(self, seed):
        first, second = synth_figure(seed, (64, 64)), synth_figure(seed, (64, 64))
        np.testing.assert_array_equal(first.image, second.image)
        np.testing.assert_array_equal(first.label, second.label)

    def test_different_seeds_differ(self):
        assert not np.array_equal(synth_figure(0).label, synth_figure(1).label)

    @pytest.mark.parametrize("seed", _seeds)
    def test_every_part_is_one_region(self, seed):
        index = to_index(synth_figure(seed, (64, 64)).label)
        for class_id in range(1, len(DESK_CLASSES)):
            _, count = ndimage.label(index == class_id)
            assert count <= 1, DESK_CLASSES[class_id]

    def test_desk_canvas_shows_torso_and_head(self):
        index = to_index(synth_figure(5, (32, 32)).label)
        assert (index == 1).any() and (index == 2).any()

    def test_image_is_mean_subtracted(self):
        sample = synth_figure(2)
        np.testing.assert_allclose(sample.image.mean(axis=(1, 2)), 0.0, atol=1e-12)
        assert sample.meta["mean"].shape == (3,)
        assert sample.extent == (64, 64)

    def test_spec_input(self):
        spec = random_figure_spec(np.random.default_rng(0), (48, 48))
        np.testing.assert_array_equal(to_index(synth_figure(spec).label), render_label(spec))


class TestFigureSpec:
    spec = random_figure_spec(np.random.default_rng(3), (64, 64))

    def test_canvas_too_small(self):
        with pytest.raises(ValueError):
            FigureSpec(**{**self.spec.__dict__, "canvas": (16, 16)})
        with pytest.raises(RuntimeError):
            synth_figure(0, (16, 16))

    def test_degenerate_part(self):
        values = {**self.spec.__dict__, "head_radius": 0.0}
        with pytest.raises(ValueError) as ve:
            FigureSpec(**values)
        assert "head_radius" in str(ve.value)

    def test_figure_off_canvas(self):
        values = {**self.spec.__dict__, "torso_center": (2.0, 2.0)}
        with pytest.raises(ValueError) as ve:
            FigureSpec(**values)
        assert "leaves" in str(ve.value)

    def test_four_limbs(self):
        values = {**self.spec.__dict__, "limb_widths": self.spec.limb_widths[:3]}
        with pytest.raises(ValueError):
            FigureSpec(**values)
