"""A trained segmentation model and its JSON checkpoint format."""
from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import LabelVocabulary, Transcript, TranscriptGrammar, single_path_grammar
from .decoder import DecodeMode, DecodeRequest, DecodeResult, viterbi
from .hmm import HmmModel
from .lengthprior import PriorKind
from .observation import scorer_from_dict, scorer_to_dict

CHECKPOINT_FORMAT = "segalign-checkpoint"
CHECKPOINT_VERSION = 1


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the same directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


@dataclass
class SegmentationModel:
    labels: LabelVocabulary
    hmm: HmmModel
    scorer: object
    prior: PriorKind
    grammar: TranscriptGrammar

    def scores(self, x: np.ndarray) -> np.ndarray:
        return self.scorer.log_likelihoods(x)

    def decode(self, x: np.ndarray, transcript: Transcript | None = None,
               video_id: str = "", **kwargs) -> DecodeResult:
        """Segment ``x`` under the training grammar, or align it to ``transcript``."""
        if transcript is None:
            req = DecodeRequest(self.scores(x), self.grammar, self.hmm, self.prior,
                                DecodeMode.SEGMENTATION, video_id)
        else:
            req = DecodeRequest(self.scores(x), single_path_grammar(transcript), self.hmm, self.prior,
                                DecodeMode.ALIGNMENT, video_id or transcript.video_id)
        return viterbi(req, **kwargs)

    def to_dict(self) -> dict:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "actions": list(self.labels.names),
            "length_prior": self.prior.value,
            "hmm": self.hmm.to_dict(),
            "scorer": scorer_to_dict(self.scorer),
            "grammar": [self.labels.decode(p) for p in self.grammar.paths],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentationModel":
        if d.get("format") != CHECKPOINT_FORMAT:
            raise ValueError("not a segalign checkpoint")
        if d.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {d.get('version')}")
        labels = LabelVocabulary(d["actions"])
        return cls(labels, HmmModel.from_dict(d["hmm"]), scorer_from_dict(d["scorer"]),
                   PriorKind.parse(d["length_prior"]),
                   TranscriptGrammar([labels.encode(p) for p in d["grammar"]]))

    def save(self, path: str | Path) -> None:
        atomic_write_text(path, dump_json(self.to_dict()))

    @classmethod
    def load(cls, path: str | Path) -> "SegmentationModel":
        return cls.from_dict(json.loads(Path(path).read_text()))
