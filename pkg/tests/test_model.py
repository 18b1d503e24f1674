import json

import numpy as np
import pytest

from segalign.data import SyntheticSpec, generate_corpus
from segalign.model import SegmentationModel
from segalign.training import TrainConfig, VideoData, train


@pytest.fixture(scope="module")
def trained():
    c = generate_corpus(SyntheticSpec(num_videos=9, mean_duration=6.0))
    videos = [VideoData(v, c.features[v], c.transcripts[v], truth=c.segmentations[v]) for v in c.video_ids]
    return c, train(TrainConfig(max_iterations=2), videos, c.labels).model


def test_checkpoint_round_trip(tmp_path, trained):
    c, model = trained
    model.save(tmp_path / "m.json")
    again = SegmentationModel.load(tmp_path / "m.json")
    assert again.to_dict() == model.to_dict()
    x = c.features[c.video_ids[0]]
    assert np.array_equal(again.scores(x), model.scores(x))
    assert again.decode(x).alignment == model.decode(x).alignment


def test_align_follows_given_transcript(trained):
    c, model = trained
    v = c.video_ids[1]
    res = model.decode(c.features[v], c.transcripts[v])
    assert res.transcript.actions == c.transcripts[v].actions


def test_rejects_foreign_files(tmp_path):
    (tmp_path / "x.json").write_text(json.dumps({"format": "other"}))
    with pytest.raises(ValueError):
        SegmentationModel.load(tmp_path / "x.json")
