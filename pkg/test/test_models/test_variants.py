import pytest

from mman.models.variants import VARIANT_KINDS, VariantSpec, build_variant, variant_table
from mman.src.layers import param_count, shape_trace

_expected_counts = [
    ("baseline", 0),
    ("single_an", 1),
    ("double_an", 2),
    ("multiple_an", 3),
    ("mman", 2),
    ("macro_an", 1),
    ("micro_an", 1),
]


@pytest.mark.parametrize("kind, count", _expected_counts)
def test_discriminator_count(kind, count):
    models = build_variant(kind, num_classes=7, image_size=64)
    assert models.variant.num_discriminators == count
    assert len(models.discriminators) == count


@pytest.mark.parametrize("kind", VARIANT_KINDS)
def test_declared_and_allocated_parameters_agree(kind):
    models = build_variant(kind, num_classes=7, image_size=64)
    for name, d in models.discriminators.items():
        assert d.num_parameters() == param_count(d.stack), name


class TestVariantLayout:
    def test_mman_attachments(self):
        models = build_variant("mman", num_classes=7, image_size=64)
        macro, micro = models.attachment("macro"), models.attachment("micro")
        assert (macro.mode, macro.source) == ("macro", "low")
        assert (micro.mode, micro.source) == ("micro", "high")
        assert models.source_extent("low") == 4

    def test_multiple_an_builds_the_mid_head(self):
        models = build_variant("multiple_an", num_classes=7, image_size=64)
        assert models.variant.needs_mid
        assert models.generator.has_mid_head
        assert models.source_extent("mid") == 16

    def test_mid_map_smaller_than_a_patch_is_scored_whole(self):
        models = build_variant("multiple_an", num_classes=7, image_size=64)
        mid = models.discriminators["mid"]
        assert models.attachment("mid").mode == "micro"
        assert mid.mode == "macro"
        assert mid.fov(16) == ("global", 16)
        assert models.discriminators["micro"].mode == "micro"

    def test_unknown_kind(self):
        with pytest.raises(KeyError):
            VariantSpec("triple_an")

    def test_unknown_attachment(self):
        models = build_variant("baseline", num_classes=7, image_size=64)
        with pytest.raises(KeyError):
            models.attachment("macro")

    def test_macro_needs_a_large_enough_low_map(self):
        with pytest.raises(ValueError):
            build_variant("mman", num_classes=7, image_size=32)

    def test_discriminators_get_distinct_seeds(self):
        models = build_variant("double_an", num_classes=7, image_size=64, seed=4)
        first = models.discriminators["global"].parameters()[0].data
        second = models.discriminators["micro"].parameters()[0].data
        assert first.shape != second.shape or (first != second).any()

    def test_manifest_names_the_variant(self):
        manifest = build_variant("mman", num_classes=7, image_size=64).manifest()
        assert manifest.startswith("# variant: mman")
        assert "[macro]" in manifest and "[micro]" in manifest


class TestVariantTable:
    def test_full_resolution_fovs(self):
        """macro sees the whole 16 x 16 low map, micro 22 x 22 patches"""
        table = variant_table(("mman",), num_classes=20, image_size=256)
        assert table.loc["mman", "g_fov"] == "16x16"
        assert table.loc["mman", "l_fov"] == "22x22"

    def test_columns_and_counts(self):
        kinds = ("baseline", "single_an", "double_an", "multiple_an", "mman")
        table = variant_table(kinds, num_classes=7, image_size=64)
        assert list(table.index) == list(kinds)
        assert table.index.names == ["variant"]
        assert list(table.columns) == ["discriminators", "d_params", "g_fov", "l_fov"]
        assert list(table["discriminators"]) == [0, 1, 2, 3, 2]
        assert table.loc["baseline", "d_params"] == 0
        assert table.loc["baseline", "g_fov"] == "-"

    def test_d_params_match_the_closed_form(self):
        table = variant_table(("mman", "multiple_an"), num_classes=7, image_size=64)
        for kind in table.index:
            models = build_variant(kind, num_classes=7, image_size=64)
            expected = sum(param_count(d.stack) for d in models.discriminators.values())
            assert table.loc[kind, "d_params"] == expected

    def test_mid_discriminator_reads_a_quarter_resolution_map(self):
        """at 256 the third discriminator scores 22 x 22 patches of the 64 x 64 mid map"""
        models = build_variant("multiple_an", num_classes=20, image_size=256)
        mid = models.discriminators["mid"]
        assert models.source_extent("mid") == 64
        assert mid.mode == "micro"
        assert mid.fov(64) == ("local", 22)
        assert shape_trace(mid.stack, (mid.stack.in_channels, 64, 64))[-1] == (1, 8, 8)
        assert variant_table(("multiple_an",), num_classes=20, image_size=256).loc["multiple_an", "l_fov"] == "22x22"
