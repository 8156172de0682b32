import math
import wave

import numpy as np
import numpy.testing as npt
import pytest

from temporal_augmenter.data import (
    DataError,
    Dataset,
    SplitSpec,
    apply_scaler,
    fit_scaler,
    load_csv_signals,
    load_wav_dir,
    one_hot,
    split,
)
from temporal_augmenter.synth import make_radar_dataset, write_radar_csv, write_tone_corpus, write_wav
from temporal_augmenter.tensor_core import Rng


def write_mitbih_rows(path, rows):
    with open(path, "w") as fh:
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")


class TestMitbihLoader:
    def test_shape_contract(self, tmp_path):
        path = tmp_path / "beats.csv"
        rows = [[0.1] * 187 + [0.0], [0.2] * 187 + [3.0], [0.3] * 187 + [4.0]]
        write_mitbih_rows(path, rows)
        ds = load_csv_signals(path, "mitbih")
        assert ds.features.shape == (3, 187, 1)
        npt.assert_array_equal(ds.labels, [0, 3, 4])
        assert ds.class_names == ["N", "S", "V", "F", "Q"]

    def test_non_numeric_field_names_row_and_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        row = [0.1] * 187 + [0.0]
        row[5] = "oops"
        write_mitbih_rows(path, [row])
        with pytest.raises(DataError, match=r"row 0, column 5"):
            load_csv_signals(path, "mitbih")

    def test_wrong_column_count(self, tmp_path):
        path = tmp_path / "short.csv"
        write_mitbih_rows(path, [[0.1] * 10])
        with pytest.raises(DataError, match="expected 188"):
            load_csv_signals(path, "mitbih")

    def test_label_out_of_range(self, tmp_path):
        path = tmp_path / "lbl.csv"
        write_mitbih_rows(path, [[0.1] * 187 + [9.0]])
        with pytest.raises(DataError, match="0..4"):
            load_csv_signals(path, "mitbih")

    def test_missing_file(self):
        with pytest.raises(DataError, match="not found"):
            load_csv_signals("/nonexistent/never.csv", "mitbih")


class TestIonosphereLoader:
    def test_shape_and_labels(self, tmp_path):
        path = tmp_path / "ion.csv"
        with open(path, "w") as fh:
            fh.write(",".join(str(0.01 * i) for i in range(34)) + ",g\n")
            fh.write(",".join(str(-0.01 * i) for i in range(34)) + ",b\n")
        ds = load_csv_signals(path, "ionosphere")
        assert ds.features.shape == (2, 17, 2)
        npt.assert_array_equal(ds.labels, [1, 0])
        assert ds.class_names == ["bad", "good"]
        # pairs are consecutive: pulse p holds attributes 2p and 2p+1
        assert ds.features[0, 3, 0] == 0.06
        assert ds.features[0, 3, 1] == 0.07

    def test_unknown_token(self, tmp_path):
        path = tmp_path / "tok.csv"
        with open(path, "w") as fh:
            fh.write(",".join(["0.0"] * 34) + ",x\n")
        with pytest.raises(DataError, match="unknown label token"):
            load_csv_signals(path, "ionosphere")

    def test_round_trip_through_writer(self, tmp_path):
        ds = make_radar_dataset(40, Rng(300))
        path = tmp_path / "radar.csv"
        write_radar_csv(path, ds)
        loaded = load_csv_signals(path, "ionosphere")
        npt.assert_array_equal(loaded.features, ds.features)
        npt.assert_array_equal(loaded.labels, ds.labels)


class TestGenericLoader:
    def test_header_and_label_column(self, tmp_path):
        path = tmp_path / "gen.csv"
        with open(path, "w") as fh:
            fh.write("f1,f2,kind,f3\n")
            fh.write("1.0,2.0,dog,3.0\n")
            fh.write("4.0,5.0,cat,6.0\n")
        ds = load_csv_signals(path, "generic", label_col="kind")
        assert ds.features.shape == (2, 3, 1)
        assert ds.class_names == ["cat", "dog"]
        npt.assert_array_equal(ds.labels, [1, 0])
        npt.assert_array_equal(ds.features[0, :, 0], [1.0, 2.0, 3.0])

    def test_missing_label_column(self, tmp_path):
        path = tmp_path / "gen.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DataError, match="label column"):
            load_csv_signals(path, "generic", label_col="kind")

    def test_requires_label_col(self, tmp_path):
        path = tmp_path / "gen.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(DataError, match="label column"):
            load_csv_signals(path, "generic")


class TestWavLoader:
    def test_16bit_scaling_contract(self, tmp_path):
        (tmp_path / "one").mkdir()
        ints = np.array([0, 16384, -16384, 32767, -32768], dtype="<i2")
        with wave.open(str(tmp_path / "one" / "a.wav"), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(2)
            wf.setframerate(8000)
            wf.writeframes(ints.tobytes())
        ds = load_wav_dir(tmp_path, target_len=5)
        npt.assert_array_equal(ds.features[0, :, 0], ints.astype(np.float64) / 32768.0)
        assert ds.meta["sample_rates"] == [8000]

    def test_stereo_mixes_to_mono_and_pads(self, tmp_path):
        (tmp_path / "s").mkdir()
        left = np.array([8192, 8192], dtype="<i2")
        right = np.array([-8192, 8192], dtype="<i2")
        inter = np.empty(4, dtype="<i2")
        inter[0::2] = left
        inter[1::2] = right
        with wave.open(str(tmp_path / "s" / "st.wav"), "wb") as wf:
            wf.setnchannels(2)
            wf.setsampwidth(2)
            wf.setframerate(8000)
            wf.writeframes(inter.tobytes())
        ds = load_wav_dir(tmp_path, target_len=4)
        npt.assert_allclose(ds.features[0, :, 0], [0.0, 0.25, 0.0, 0.0], atol=1e-12)

    def test_8bit_decoding(self, tmp_path):
        (tmp_path / "c").mkdir()
        vals = np.array([128, 255, 0], dtype=np.uint8)
        with wave.open(str(tmp_path / "c" / "b.wav"), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(1)
            wf.setframerate(4000)
            wf.writeframes(vals.tobytes())
        ds = load_wav_dir(tmp_path, target_len=3)
        npt.assert_allclose(ds.features[0, :, 0], [0.0, 127 / 128, -1.0], atol=1e-12)

    def test_crop_to_target_len(self, tmp_path):
        (tmp_path / "c").mkdir()
        write_wav(tmp_path / "c" / "long.wav", np.linspace(-0.5, 0.5, 100), 8000)
        ds = load_wav_dir(tmp_path, target_len=10)
        assert ds.features.shape == (1, 10, 1)

    def test_empty_class_dir_rejected(self, tmp_path):
        (tmp_path / "empty").mkdir()
        with pytest.raises(DataError, match="no .wav files"):
            load_wav_dir(tmp_path, target_len=4)

    def test_no_class_dirs_rejected(self, tmp_path):
        with pytest.raises(DataError, match="no class subdirectories"):
            load_wav_dir(tmp_path, target_len=4)

    def test_unsupported_width_rejected(self, tmp_path):
        (tmp_path / "w").mkdir()
        with wave.open(str(tmp_path / "w" / "deep.wav"), "wb") as wf:
            wf.setnchannels(1)
            wf.setsampwidth(4)
            wf.setframerate(8000)
            wf.writeframes(b"\x00" * 16)
        with pytest.raises(DataError, match="sample width"):
            load_wav_dir(tmp_path, target_len=4)

    def test_tone_corpus_balanced_classes(self, tmp_path):
        names = write_tone_corpus(tmp_path, Rng(301), frequencies=(440.0, 880.0),
                                  clips_per_class=5, clip_len=256)
        ds = load_wav_dir(tmp_path, target_len=256)
        assert ds.class_names == names == ["tone440", "tone880"]
        assert ds.n == 10
        npt.assert_array_equal(np.bincount(ds.labels), [5, 5])
        # classes alphabetical for index stability
        assert ds.class_names == sorted(ds.class_names)


class TestScaler:
    def test_hand_calculation(self):
        ds = Dataset(features=np.array([[1.0], [2.0], [3.0]]),
                     labels=np.zeros(3, dtype=np.int64), class_names=["a"])
        sp = fit_scaler(ds)
        assert abs(sp.mean[0, 0] - 2.0) < 1e-15
        assert abs(sp.std[0, 0] - math.sqrt(2.0 / 3.0)) < 1e-15
        scaled = apply_scaler(sp, ds)
        npt.assert_allclose(scaled.features[:, 0, 0], [-1.22474, 0.0, 1.22474], atol=1e-5)

    def test_constant_feature_unchanged(self):
        feats = np.column_stack([np.full(5, 3.0), np.arange(5.0)])
        ds = Dataset(features=feats, labels=np.zeros(5, dtype=np.int64), class_names=["a"])
        scaled = apply_scaler(fit_scaler(ds), ds)
        npt.assert_array_equal(scaled.features[:, 0, 0], np.full(5, 3.0))
        assert abs(scaled.features[:, 1, 0].mean()) < 1e-10

    def test_fit_then_apply_zero_means(self):
        rng = Rng(302)
        ds = Dataset(features=rng.uniform((40, 6, 2)) * 5 + 1,
                     labels=np.zeros(40, dtype=np.int64), class_names=["a"])
        scaled = apply_scaler(fit_scaler(ds), ds)
        assert np.max(np.abs(scaled.features.mean(axis=0))) < 1e-10

    def test_shape_mismatch(self):
        ds = Dataset(features=np.zeros((4, 3, 1)), labels=np.zeros(4, dtype=np.int64),
                     class_names=["a"])
        sp = fit_scaler(ds)
        other = Dataset(features=np.zeros((4, 5, 1)), labels=np.zeros(4, dtype=np.int64),
                        class_names=["a"])
        with pytest.raises(DataError):
            apply_scaler(sp, other)


def toy_dataset(n, k=2, seed=303):
    rng = Rng(seed)
    labels = np.arange(n) % k
    return Dataset(features=rng.uniform((n, 4, 1)), labels=labels,
                   class_names=[str(i) for i in range(k)])


class TestSplit:
    def test_floor_counts_remainder_to_train(self):
        tr, va, te = split(toy_dataset(10), SplitSpec(ratios=(0.6, 0.2, 0.2), seed=1))
        assert (tr.n, va.n, te.n) == (6, 2, 2)
        tr, va, te = split(toy_dataset(351), SplitSpec(ratios=(0.6, 0.2, 0.2), seed=1))
        assert (tr.n, va.n, te.n) == (211, 70, 70)

    def test_disjoint_and_exhaustive(self):
        ds = toy_dataset(53)
        ds.features[:, 0, 0] = np.arange(53)  # unique ids
        tr, va, te = split(ds, SplitSpec(ratios=(0.7, 0.1, 0.2), seed=2))
        ids = np.concatenate([p.features[:, 0, 0] for p in (tr, va, te)])
        npt.assert_array_equal(np.sort(ids), np.arange(53))

    def test_stratified_preserves_balance(self):
        tr, va, te = split(toy_dataset(20), SplitSpec(ratios=(0.6, 0.2, 0.2),
                                                      seed=3, stratified=True))
        for part in (tr, va, te):
            counts = np.bincount(part.labels, minlength=2)
            assert counts[0] == counts[1]

    def test_same_seed_same_partition(self):
        ds = toy_dataset(40)
        a = split(ds, SplitSpec(seed=9))
        b = split(ds, SplitSpec(seed=9))
        for pa, pb in zip(a, b):
            npt.assert_array_equal(pa.features, pb.features)
            npt.assert_array_equal(pa.labels, pb.labels)

    def test_zero_sample_split_rejected(self):
        with pytest.raises(DataError, match="0 samples"):
            split(toy_dataset(4), SplitSpec(ratios=(0.8, 0.1, 0.1), seed=0))

    def test_bad_ratios_rejected(self):
        with pytest.raises(ValueError):
            split(toy_dataset(10), SplitSpec(ratios=(0.5, 0.2, 0.2), seed=0))
        with pytest.raises(ValueError):
            split(toy_dataset(10), SplitSpec(ratios=(1.0, 0.0, 0.0), seed=0))


class TestOneHot:
    def test_basis_row(self):
        npt.assert_array_equal(one_hot([2], 5)[0], [0, 0, 1, 0, 0])

    def test_rows_sum_to_one(self):
        y = (Rng(304).uniform((30,)) * 4).astype(np.int64)
        oh = one_hot(y, 4)
        npt.assert_array_equal(oh.sum(axis=1), np.ones(30))

    def test_argmax_round_trip(self):
        y = (Rng(305).uniform((30,)) * 6).astype(np.int64)
        npt.assert_array_equal(one_hot(y, 6).argmax(axis=1), y)

    def test_out_of_range(self):
        with pytest.raises(ValueError):
            one_hot([3], 3)
