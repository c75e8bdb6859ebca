import numpy as np
import pytest

from mman.metrics.convergence import MIN_TRACE, ConvergenceTrace, classify_convergence, convergence_summary
from mman.metrics.curves import export_curves


def make_trace(length: int = 40, **targets: tuple[float, float]) -> ConvergenceTrace:
    """trace whose D(real)/D(fake) per discriminator drift from 0.7/0.3 to the given tail values"""
    rng = np.random.default_rng(0)
    rows = []
    for i in range(length):
        t = i / max(length - 1, 1)
        row = {"iter": i, "L_mce_low": 1.0 - 0.5 * t, "L_mce_high": 2.0 - t}
        for name, (real, fake) in targets.items():
            row[f"L_adv_{name}"] = 0.7
            row[f"d_real_{name}"] = float(np.clip(0.7 + (real - 0.7) * t + rng.normal(0, 0.01), 0.001, 0.999))
            row[f"d_fake_{name}"] = float(np.clip(0.3 + (fake - 0.3) * t + rng.normal(0, 0.01), 0.001, 0.999))
        row.update({"L_G": 3.0 - t, "L_D": 1.3, "lr": 0.0002})
        rows.append(row)
    return ConvergenceTrace(rows)


class TestConvergenceTrace:
    def test_rows_must_advance(self):
        trace = ConvergenceTrace([{"iter": 0, "L_G": 1.0}])
        with pytest.raises(ValueError):
            trace.append({"iter": 0, "L_G": 1.0})

    def test_rows_must_be_finite(self):
        with pytest.raises(ValueError):
            ConvergenceTrace([{"iter": 0, "L_G": float("inf")}])

    def test_rows_need_an_iteration(self):
        with pytest.raises(KeyError):
            ConvergenceTrace([{"L_G": 1.0}])

    def test_discriminators_and_head(self):
        trace = make_trace(20, macro=(0.5, 0.5), micro=(0.5, 0.5))
        assert trace.discriminators == ["macro", "micro"]
        assert len(trace.head(5)) == 5
        assert trace.frame.index.name == "iter"

    def test_csv_round_trip_is_exact(self, tmp_path):
        trace = make_trace(15, micro=(0.55, 0.45))
        assert ConvergenceTrace.from_csv(trace.to_csv(tmp_path / "trace.csv")) == trace

    def test_missing_csv(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ConvergenceTrace.from_csv(tmp_path / "absent.csv")


_verdict_cases = [
    ((0.52, 0.48), "good"),
    ((0.97, 0.03), "poor"),
    ((0.8, 0.4), "indeterminate"),
]


@pytest.mark.parametrize("tail, verdict", _verdict_cases)
def test_single_discriminator_verdict(tail, verdict):
    assert classify_convergence(make_trace(micro=tail)) == verdict


class TestVerdicts:
    def test_any_poor_discriminator_makes_the_run_poor(self):
        trace = make_trace(macro=(0.5, 0.5), micro=(0.98, 0.02))
        assert classify_convergence(trace) == "poor"
        assert classify_convergence(trace, discriminator="macro") == "good"

    def test_all_good(self):
        assert classify_convergence(make_trace(macro=(0.5, 0.5), micro=(0.51, 0.49))) == "good"

    def test_summary_table(self):
        summary = convergence_summary(make_trace(macro=(0.5, 0.5), micro=(0.98, 0.02)))
        assert summary.index.names == ["discriminator"]
        assert list(summary["verdict"]) == ["good", "poor"]
        assert summary.loc["micro", "d_real"] == pytest.approx(0.98, abs=0.05)

    def test_short_trace(self):
        with pytest.raises(ValueError):
            classify_convergence(make_trace(MIN_TRACE - 1, micro=(0.5, 0.5)))

    def test_trace_without_discriminators(self):
        with pytest.raises(ValueError):
            classify_convergence(make_trace())

    def test_unknown_discriminator(self):
        with pytest.raises(KeyError):
            classify_convergence(make_trace(micro=(0.5, 0.5)), discriminator="macro")

    def test_tail_fraction_range(self):
        with pytest.raises(ValueError):
            convergence_summary(make_trace(micro=(0.5, 0.5)), tail_fraction=0.0)


class TestCurves:
    def test_export_writes_csv_and_svg(self, tmp_path):
        trace = make_trace(12, macro=(0.5, 0.5), micro=(0.9, 0.1))
        csv_path, svg_path = export_curves(trace, tmp_path / "curves", stem="mman")
        assert csv_path.name == "mman.csv" and svg_path.name == "mman.svg"
        assert ConvergenceTrace.from_csv(csv_path) == trace
        svg = svg_path.read_text()
        assert "<svg" in svg
        assert "D_macro(real)" in svg

    def test_export_is_reproducible(self, tmp_path):
        trace = make_trace(12, micro=(0.5, 0.5))
        _, first = export_curves(trace, tmp_path / "a")
        _, second = export_curves(trace, tmp_path / "b")
        assert first.read_bytes() == second.read_bytes()

    def test_baseline_trace_still_plots(self, tmp_path):
        _, svg_path = export_curves(make_trace(12), tmp_path)
        assert "no discriminator" in svg_path.read_text()

    def test_empty_trace(self, tmp_path):
        with pytest.raises(ValueError):
            export_curves(ConvergenceTrace(), tmp_path)
