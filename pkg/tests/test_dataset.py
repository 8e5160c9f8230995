import datetime as dt

import numpy as np
import pytest

import gspsample as gs
from gspsample.dataset import DatasetError, record_to_line

from conftest import random_connected_graph

GOOD_LINE = "2004-02-28 00:59:16.02785 3 1 19.3024 38.4629 45.08 2.68742"


def write_lines(tmp_path, lines, name="data.txt"):
    path = tmp_path / name
    path.write_text("\n".join(lines) + "\n")
    return path


class TestParseIntel:

    def test_well_formed_row_binds_all_fields(self, tmp_path):
        records, report = gs.parse_intel(write_lines(tmp_path, [GOOD_LINE]))
        assert report.accepted == 1 and report.rejected == 0
        r = records[0]
        assert r.date == dt.date(2004, 2, 28)
        assert r.time.hour == 0 and r.time.minute == 59 and r.time.second == 16
        assert r.time.microsecond == 27850
        assert r.epoch == 3
        assert r.mote_id == 1
        assert r.temperature == pytest.approx(19.3024)
        assert r.humidity == pytest.approx(38.4629)
        assert r.light == pytest.approx(45.08)
        assert r.voltage == pytest.approx(2.68742)

    def test_truncated_row_rejected(self, tmp_path):
        short = " ".join(GOOD_LINE.split()[:7])
        _, report = gs.parse_intel(write_lines(tmp_path, [GOOD_LINE, short]))
        assert report.accepted == 1
        assert report.missing_fields == 1

    def test_outlier_temperature_rejected(self, tmp_path):
        hot = GOOD_LINE.replace("19.3024", "122.153")
        _, report = gs.parse_intel(write_lines(tmp_path, [GOOD_LINE, hot]))
        assert report.implausible_temperature == 1

    def test_mote_out_of_range_rejected(self, tmp_path):
        stray = GOOD_LINE.replace(" 3 1 ", " 3 99 ")
        _, report = gs.parse_intel(write_lines(tmp_path, [GOOD_LINE, stray]))
        assert report.mote_out_of_range == 1

    def test_non_numeric_rejected(self, tmp_path):
        bad = GOOD_LINE.replace("19.3024", "n/a")
        _, report = gs.parse_intel(write_lines(tmp_path, [GOOD_LINE, bad]))
        assert report.non_numeric == 1

    def test_blank_lines_ignored(self, tmp_path):
        _, report = gs.parse_intel(write_lines(tmp_path, [GOOD_LINE, "", "  "]))
        assert report.accepted == 1 and report.rejected == 0

    def test_zero_accepted_rows_raises(self, tmp_path):
        with pytest.raises(DatasetError):
            gs.parse_intel(write_lines(tmp_path, ["not a data row"]))

    def test_unreadable_file_raises(self, tmp_path):
        with pytest.raises(OSError):
            gs.parse_intel(tmp_path / "missing.txt")

    def test_rejects_report_json_shape(self, tmp_path):
        _, report = gs.parse_intel(write_lines(tmp_path, [GOOD_LINE]))
        obj = report.to_json_dict()
        assert obj["accepted"] == 1
        assert set(obj["by_reason"]) == {"missing_fields", "non_numeric",
                                         "mote_out_of_range",
                                         "implausible_temperature"}

    def test_serialize_parse_round_trip(self, tmp_path, rng):
        path = tmp_path / "surr.txt"
        gs.write_surrogate_intel_file(path, seed=5, n_epochs=40)
        records, _ = gs.parse_intel(path)
        again_path = write_lines(tmp_path, [record_to_line(r) for r in records],
                                 name="again.txt")
        again, report = gs.parse_intel(again_path)
        assert report.rejected == 0
        assert again == records


class TestAssembleSnapshots:

    @staticmethod
    def _record(epoch, mote, temp):
        return gs.MeasurementRecord(dt.date(2004, 2, 28), dt.time(0, 0, 0),
                                    epoch, mote, temp, 40.0, 100.0, 2.6)

    def test_full_epoch_fully_observed(self):
        records = [self._record(5, m, 20.0 + m) for m in (1, 2, 3)]
        window = gs.assemble_snapshots(records, (5, 5), universe=(1, 2, 3))
        assert window.signal.observed.all()
        np.testing.assert_allclose(window.signal.values, [[21.0, 22.0, 23.0]])

    def test_forward_fill_within_gap(self):
        records = [self._record(1, 1, 20.0), self._record(1, 2, 25.0)]
        records += [self._record(e, 2, 25.0) for e in range(2, 6)]
        window = gs.assemble_snapshots(records, (1, 5), universe=(1, 2),
                                       fill_policy="forward_fill", max_gap=10)
        col = window.signal.values[:, 0]
        np.testing.assert_allclose(col, 20.0)
        assert not window.signal.observed[1:, 0].any()

    def test_forward_fill_respects_max_gap(self):
        records = [self._record(1, 1, 20.0), self._record(1, 2, 25.0),
                   self._record(8, 2, 25.0)]
        window = gs.assemble_snapshots(records, (1, 8), universe=(1, 2),
                                       fill_policy="forward_fill", max_gap=3)
        col = window.signal.values[:, 0]
        assert np.isfinite(col[:4]).all()      # epochs 1..4 filled
        assert np.isnan(col[4:]).all()         # beyond the gap limit

    def test_duplicates_last_writer_wins_vs_rescan_oracle(self, rng):
        records = []
        for _ in range(60):
            records.append(self._record(int(rng.integers(1, 6)),
                                        int(rng.integers(1, 4)),
                                        float(rng.uniform(10, 30))))
        window = gs.assemble_snapshots(records, (1, 5), universe=(1, 2, 3))
        expected = np.full((5, 3), np.nan)
        for r in records:                      # independent forward rescan
            expected[r.epoch - 1, r.mote_id - 1] = r.temperature
        np.testing.assert_array_equal(np.isnan(window.signal.values),
                                      np.isnan(expected))
        finite = ~np.isnan(expected)
        np.testing.assert_allclose(window.signal.values[finite], expected[finite])

    def test_mask_density_matches_receipts(self, rng):
        seen = set()
        records = []
        while len(records) < 30:
            key = (int(rng.integers(1, 11)), int(rng.integers(1, 5)))
            if key in seen:
                continue
            seen.add(key)
            records.append(self._record(key[0], key[1], 20.0))
        window = gs.assemble_snapshots(records, (1, 10), universe=(1, 2, 3, 4))
        assert window.signal.observed.sum() == 30
        assert window.signal.observed.mean() == pytest.approx(30 / 40)

    def test_empty_epoch_range_rejected(self):
        with pytest.raises(DatasetError):
            gs.assemble_snapshots([], (5, 4), universe=(1,))

    def test_unknown_fill_policy_rejected(self):
        with pytest.raises(DatasetError):
            gs.assemble_snapshots([], (1, 2), universe=(1,), fill_policy="magic")

    def test_drop_silent_nodes(self):
        records = [self._record(1, 1, 20.0), self._record(1, 3, 22.0)]
        window = gs.assemble_snapshots(records, (1, 2), universe=(1, 2, 3))
        active, dropped = window.drop_silent_nodes()
        assert dropped == [2]
        assert active.universe == (1, 3)

    def test_complete_rows_requires_filled(self):
        records = [self._record(1, 1, 20.0)]
        window = gs.assemble_snapshots(records, (1, 1), universe=(1, 2))
        with pytest.raises(DatasetError):
            window.complete_rows()

    def test_window_csv_layout(self, tmp_path):
        records = [self._record(1, 1, 20.5), self._record(2, 2, 21.5)]
        window = gs.assemble_snapshots(records, (1, 2), universe=(1, 2))
        path = tmp_path / "window.csv"
        gs.window_to_csv(window, path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "1,2"
        assert lines[1].split(",") == ["20.5", ""]
        assert lines[2].split(",") == ["", "21.5"]


class TestSynthSmooth:

    def test_noiseless_first_component_only(self, rng):
        g = random_connected_graph(rng, 10)
        basis = gs.spectral_decompose(g)
        X = gs.synth_smooth(g, k=1, noise_sigma=0.0, T=6, seed=2)
        spectra = X.values @ basis.U
        assert np.abs(spectra[:, 1:]).max() < 1e-10

    def test_same_seed_identical(self, rng):
        g = random_connected_graph(rng, 8)
        a = gs.synth_smooth(g, k=3, noise_sigma=0.1, T=5, seed=42)
        b = gs.synth_smooth(g, k=3, noise_sigma=0.1, T=5, seed=42)
        np.testing.assert_array_equal(a.values, b.values)

    def test_k_out_of_range(self, rng):
        g = random_connected_graph(rng, 4)
        with pytest.raises(ValueError):
            gs.synth_smooth(g, k=0, noise_sigma=0.0, T=3, seed=1)
        with pytest.raises(ValueError):
            gs.synth_smooth(g, k=5, noise_sigma=0.0, T=3, seed=1)

    def test_feeds_bandwidth_estimate(self, rng):
        g = random_connected_graph(rng, 20)
        basis = gs.spectral_decompose(g)
        X = gs.synth_smooth(g, k=3, noise_sigma=0.01, T=50, seed=13)
        assert gs.estimate_bandwidth(basis, X, 0.95).k == 3

    def test_smoother_than_random_same_norm_signals(self, rng):
        g = random_connected_graph(rng, 12)
        X = gs.synth_smooth(g, k=2, noise_sigma=0.0, T=20, seed=9)
        count_below = 0
        total = 0
        for row in X.values:
            tv = gs.total_variation(g, gs.GraphSignal.full(row), "quadratic",
                                    "normalized")
            norm = np.linalg.norm(row)
            beaten = 0
            for _ in range(40):
                other = rng.standard_normal(12)
                other *= norm / np.linalg.norm(other)
                rand_tv = gs.total_variation(g, gs.GraphSignal.full(other),
                                             "quadratic", "normalized")
                if tv < rand_tv:
                    beaten += 1
            count_below += beaten
            total += 40
        assert count_below / total >= 0.95


class TestSurrogateFile:

    def test_deterministic_bytes(self, tmp_path):
        a = tmp_path / "a.txt"
        b = tmp_path / "b.txt"
        gs.write_surrogate_intel_file(a, seed=3, n_epochs=30)
        gs.write_surrogate_intel_file(b, seed=3, n_epochs=30)
        assert a.read_bytes() == b.read_bytes()

    def test_exercises_reject_paths(self, tmp_path):
        path = tmp_path / "surr.txt"
        gs.write_surrogate_intel_file(path, seed=0, n_epochs=650)
        records, report = gs.parse_intel(path)
        assert report.missing_fields > 0
        assert report.implausible_temperature > 0
        assert report.accepted > 20000
        epochs = {r.epoch for r in records}
        motes = {r.mote_id for r in records}
        assert len(epochs) >= 500
        assert len(motes) == 54
