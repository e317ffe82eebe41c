"""Generator properties: determinism, spectra, splits, partitions, impairment."""

import numpy as np
import pytest

from gestar.dataio import dump_csv, load_dataset, save_dataset
from gestar.errors import ParameterError, ValidationError
from gestar.rng import derive_seed
from gestar.synthdata import (
    Dataset,
    DatasetSpec,
    NearestCentroidBaseline,
    ParticipantProfile,
    TEMPLATE_NAMES,
    generate_dataset,
    generate_participant,
    generate_sample,
    partition_clients,
    partition_iid,
)


@pytest.fixture(scope="module")
def desk_dataset() -> Dataset:
    return generate_dataset(DatasetSpec.desk(seed=7))


class TestParticipants:
    def test_unimpaired_identity_profile(self):
        p = generate_participant(123, impaired=False)
        assert p.tremor_amplitude_g == 0.0
        assert p.speed_factor == 1.0
        assert p.amplitude_scale == 1.0

    def test_same_seed_same_profile(self):
        a = generate_participant(99, impaired=True)
        b = generate_participant(99, impaired=True)
        assert a == b

    def test_impaired_speed_factor_mean(self):
        # Monte Carlo over the stated uniform ranges: E[U(0.4, 0.9)] = 0.65
        draws = [
            generate_participant(derive_seed(0, "mc", i), True).speed_factor for i in range(10_000)
        ]
        assert 0.63 <= float(np.mean(draws)) <= 0.67

    def test_profile_invariants_enforced(self):
        with pytest.raises(ValidationError):
            ParticipantProfile(0, False, 0.1, 8.0, 1.0, 1.0)
        with pytest.raises(ValidationError):
            ParticipantProfile(0, True, 0.1, 20.0, 0.7, 0.7)


class TestSampleGeneration:
    def test_bit_identical_for_same_arguments(self):
        prof = generate_participant(5, True, participant_id=3)
        a = generate_sample(prof, 4, 1234)
        b = generate_sample(prof, 4, 1234)
        assert np.array_equal(a.frame, b.frame)
        assert np.array_equal(a.accel, b.accel)
        assert np.array_equal(a.emg, b.emg)
        assert np.array_equal(a.context, b.context)

    def test_unimpaired_zero_noise_has_no_tremor_band_energy(self):
        spec = DatasetSpec(seed=1, accel_noise_g=0.0, emg_noise=0.0, visual_noise=0.0)
        prof = generate_participant(11, False, participant_id=0)
        sample = generate_sample(prof, 2, 77, spec)
        spectrum = np.abs(np.fft.rfft(sample.accel, axis=0)) ** 2
        freqs = np.fft.rfftfreq(spec.series_len, d=1.0 / spec.sample_rate_hz)
        band = (freqs >= 4.0) & (freqs <= 12.0)
        total = spectrum.sum()
        assert spectrum[band].sum() < 1e-9 * total

    def test_tremor_peak_dominates_noise_floor(self):
        # discrete Fourier oracle: 0.2 g tremor at 8 Hz must show up at 7-9 Hz
        prof = ParticipantProfile(1, True, 0.2, 8.0, 0.7, 0.7)
        sample = generate_sample(prof, 0, 42, DatasetSpec(seed=3))
        spectrum = np.abs(np.fft.rfft(sample.accel[:, 0])) ** 2
        freqs = np.fft.rfftfreq(64, d=1.0 / 64.0)
        peak = spectrum[(freqs >= 7.0) & (freqs <= 9.0)].max()
        floor = np.median(spectrum[freqs >= 13.0])
        assert peak >= 10.0 * floor

    def test_label_out_of_range_rejected(self):
        prof = generate_participant(5, False)
        with pytest.raises(ParameterError):
            generate_sample(prof, 15, 0)

    def test_frame_values_in_unit_interval(self, desk_dataset):
        for s in desk_dataset.samples[:25]:
            assert s.frame.min() >= 0.0 and s.frame.max() <= 1.0

    def test_template_count(self):
        assert len(TEMPLATE_NAMES) == 15


class TestDatasetAssembly:
    def test_class_balance_within_ten_percent(self, desk_dataset):
        counts = np.bincount([s.label for s in desk_dataset.samples], minlength=15)
        target = len(desk_dataset.samples) / 15
        assert counts.min() >= 0.9 * target
        assert counts.max() <= 1.1 * target

    def test_desk_split_counts(self, desk_dataset):
        split = desk_dataset.split
        assert len(split.train_participants) == 32
        assert len(split.val_participants) == 4
        assert len(split.test_participants) == 4

    def test_no_participant_crosses_splits(self, desk_dataset):
        split = desk_dataset.split
        groups = [set(split.train_participants), set(split.val_participants), set(split.test_participants)]
        assert not (groups[0] & groups[1]) and not (groups[0] & groups[2]) and not (groups[1] & groups[2])
        for indices, pids in (
            (split.train_indices, groups[0]),
            (split.val_indices, groups[1]),
            (split.test_indices, groups[2]),
        ):
            for i in indices:
                assert desk_dataset.samples[i].participant_id in pids

    def test_all_train_fraction(self):
        spec = DatasetSpec(n_samples=60, n_participants=6, n_clients=2, seed=1, split_fractions=(1.0, 0.0, 0.0))
        with pytest.raises(ParameterError):
            generate_dataset(spec)  # degenerate split (empty val/test) is refused

    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ParameterError):
            DatasetSpec(split_fractions=(0.5, 0.2, 0.2))

    def test_reproducibility_from_spec(self):
        spec = DatasetSpec(n_samples=90, n_participants=9, n_clients=3, seed=21)
        a = generate_dataset(spec)
        b = generate_dataset(spec)
        assert [p for p in a.profiles] == [p for p in b.profiles]
        for sa, sb in zip(a.samples, b.samples):
            assert np.array_equal(sa.frame, sb.frame)
            assert np.array_equal(sa.accel, sb.accel)


class TestPartitions:
    def test_single_client_owns_everything(self, desk_dataset):
        parts = partition_clients(desk_dataset, 1, seed=0)
        assert len(parts) == 1
        assert parts[0].sample_indices == sorted(desk_dataset.split.train_indices)

    def test_partitions_disjoint_and_cover(self, desk_dataset):
        parts = partition_clients(desk_dataset, 10, seed=0)
        seen = []
        for p in parts:
            assert len(p.sample_indices) >= 1
            seen.extend(p.sample_indices)
        assert sorted(seen) == sorted(desk_dataset.split.train_indices)
        assert len(set(seen)) == len(seen)

    def test_round_robin_counts(self):
        # 40 participants -> 32 train; 8 clients own exactly 4 participants each
        ds = generate_dataset(DatasetSpec.desk(seed=3))
        parts = partition_clients(ds, 8, seed=5)
        assert all(len(p.participant_ids) == 4 for p in parts)

    def test_no_participant_spans_clients(self, desk_dataset):
        parts = partition_clients(desk_dataset, 10, seed=0)
        owner = {}
        for p in parts:
            for pid in p.participant_ids:
                assert pid not in owner
                owner[pid] = p.client_id

    def test_too_many_clients_rejected(self, desk_dataset):
        with pytest.raises(ParameterError):
            partition_clients(desk_dataset, 33, seed=0)

    def test_iid_partition_covers(self, desk_dataset):
        parts = partition_iid(desk_dataset, 10, seed=0)
        seen = sorted(i for p in parts for i in p.sample_indices)
        assert seen == sorted(desk_dataset.split.train_indices)


class TestImpairmentEffect:
    def test_classical_baseline_scores_lower_on_impaired(self, desk_dataset):
        split = desk_dataset.split
        baseline = NearestCentroidBaseline().fit(desk_dataset.samples_at(split.train_indices))
        impaired_pids = {p.participant_id for p in desk_dataset.profiles if p.impaired}
        test = desk_dataset.samples_at(split.test_indices)
        impaired = [s for s in test if s.participant_id in impaired_pids]
        unimpaired = [s for s in test if s.participant_id not in impaired_pids]
        assert impaired and unimpaired
        assert baseline.accuracy(impaired) < baseline.accuracy(unimpaired)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        ds = generate_dataset(DatasetSpec(n_samples=40, n_participants=8, n_clients=2, seed=13))
        save_dataset(ds, tmp_path)
        loaded = load_dataset(tmp_path)
        assert loaded.spec == ds.spec
        assert loaded.profiles == ds.profiles
        assert loaded.split.to_dict() == ds.split.to_dict()
        assert len(loaded.partitions) == len(ds.partitions)
        for a, b in zip(ds.samples, loaded.samples):
            assert a.label == b.label and a.participant_id == b.participant_id
            assert np.array_equal(a.frame, b.frame)
            assert np.array_equal(a.accel, b.accel)
            assert np.array_equal(a.emg, b.emg)
            assert np.array_equal(a.context, b.context)

    def test_idempotent_bytes(self, tmp_path):
        spec = DatasetSpec(n_samples=30, n_participants=10, n_clients=2, seed=2)
        d1, d2 = tmp_path / "a", tmp_path / "b"
        save_dataset(generate_dataset(spec), d1)
        save_dataset(generate_dataset(spec), d2)
        assert (d1 / "samples.bin").read_bytes() == (d2 / "samples.bin").read_bytes()
        assert (d1 / "manifest.json").read_bytes() == (d2 / "manifest.json").read_bytes()

    def test_csv_dump(self, tmp_path):
        ds = generate_dataset(DatasetSpec(n_samples=20, n_participants=10, n_clients=2, seed=4))
        dump_csv(ds, tmp_path)
        accel_lines = (tmp_path / "accel.csv").read_text().strip().splitlines()
        assert accel_lines[0].startswith("sample,label,participant,t,")
        assert len(accel_lines) == 1 + 20 * 64
