import numpy as np
import pytest

from segalign.core import alignment_to_segmentation
from segalign.data import (FeatureFormatError, SyntheticSpec, generate_corpus, learnability_violations,
                           load_features, read_feature_dir, sample_sparse_labels, save_features,
                           write_feature_dir)


def test_round_trip_bit_identical(tmp_path):
    x = np.random.default_rng(0).normal(size=(17, 5)).astype(np.float32)
    save_features(tmp_path / "a.feat", x)
    assert np.array_equal(load_features(tmp_path / "a.feat").data, x)


def test_minimal_file(tmp_path):
    save_features(tmp_path / "m.feat", np.array([[3.5]]))
    assert load_features(tmp_path / "m.feat").shape == (1, 1)


def test_truncated_file_reports_offset(tmp_path):
    save_features(tmp_path / "t.feat", np.ones((4, 3)))
    raw = (tmp_path / "t.feat").read_bytes()
    (tmp_path / "t.feat").write_bytes(raw[:-5])
    with pytest.raises(FeatureFormatError, match="offset 16"):
        load_features(tmp_path / "t.feat")
    (tmp_path / "t.feat").write_bytes(raw[:6])
    with pytest.raises(FeatureFormatError, match="offset 0"):
        load_features(tmp_path / "t.feat")


def test_bad_magic_and_nan(tmp_path):
    save_features(tmp_path / "b.feat", np.ones((2, 2)))
    raw = bytearray((tmp_path / "b.feat").read_bytes())
    (tmp_path / "c.feat").write_bytes(b"XXXXXXXX" + raw[8:])
    with pytest.raises(FeatureFormatError, match="magic"):
        load_features(tmp_path / "c.feat")
    x = np.ones((2, 2))
    x[1, 0] = np.nan
    save_features(tmp_path / "n.feat", x)
    with pytest.raises(FeatureFormatError, match="offset 24"):
        load_features(tmp_path / "n.feat")


def test_manifest_dimension_mismatch(tmp_path):
    write_feature_dir(tmp_path, {"a": np.ones((3, 2)), "b": np.ones((3, 4))})
    with pytest.raises(FeatureFormatError, match="dimension"):
        read_feature_dir(tmp_path)
    write_feature_dir(tmp_path, {"a": np.ones((3, 2)), "b": np.zeros((5, 2))})
    assert sorted(read_feature_dir(tmp_path)) == ["a", "b"]


def test_corpus_is_deterministic():
    a, b = generate_corpus(SyntheticSpec(seed=3)), generate_corpus(SyntheticSpec(seed=3))
    for v in a.video_ids:
        assert np.array_equal(a.features[v], b.features[v])
        assert a.alignments[v] == b.alignments[v]


def test_ground_truth_is_consistent():
    c = generate_corpus(SyntheticSpec(num_videos=6))
    for v in c.video_ids:
        al = c.alignments[v]
        al.validate()
        assert alignment_to_segmentation(al) == c.segmentations[v]
        assert c.segmentations[v].actions == c.transcripts[v].actions
        assert len(c.features[v]) == len(al)


def test_noise_free_frames_sit_on_means():
    c = generate_corpus(SyntheticSpec(num_videos=3, noise_scale=0.0))
    offsets = np.concatenate([[0], np.cumsum(SyntheticSpec().states_per_action)[:-1]])
    for v in c.video_ids:
        al = c.alignments[v]
        ids = offsets[al.actions] + al.substates
        assert np.array_equal(c.features[v], c.state_means[ids].astype(np.float32))


def test_mean_duration_matches_configuration():
    c = generate_corpus(SyntheticSpec(num_videos=200, mean_duration=12.0, seed=5))
    assert np.mean(c.durations) == pytest.approx(12.0, rel=0.10)


def test_default_templates_are_learnable():
    spec = SyntheticSpec()
    assert learnability_violations(spec.templates, spec.num_actions) == []
    assert learnability_violations([[0, 1], [0, 1]], 2)
    with pytest.raises(ValueError, match="precondition"):
        SyntheticSpec(num_actions=2, states_per_action=[1, 1], templates=[[0, 1]]).validate()


def test_sparse_sampling_fraction():
    c = generate_corpus(SyntheticSpec(num_videos=4))
    labels = sample_sparse_labels(c.segmentations, 0.1, seed=0)
    for v, ls in labels.items():
        T = c.segmentations[v].num_frames
        assert len(ls) == round(0.1 * T)
        gt = c.segmentations[v].frame_labels()
        assert all(gt[l.frame] == l.label for l in ls)
    assert all(not ls for ls in sample_sparse_labels(c.segmentations, 0.0).values())
