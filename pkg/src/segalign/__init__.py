"""Weakly supervised temporal action segmentation with subaction HMMs."""
from .core import (ActionLabel, LabelVocabulary, Segment, Segmentation, SparseLabel, StateAlignment,
                   StateVocabulary, SubactionState, Transcript, TranscriptGrammar,
                   alignment_to_segmentation, build_grammar, extract_actions, single_path_grammar)
from .decoder import (DecodeMode, DecodeRequest, DecodeResult, InfeasibleError, align_to_transcript,
                      brute_force_decode, viterbi)
from .hmm import HmmModel, estimate_transitions, mean_state_lengths, skip_state_fraction
from .lengthprior import PriorKind, prior_value, ratio_prior, run_length_update
from .metrics import evaluate, jaccard_iod, jaccard_iou, mof
from .model import SegmentationModel
from .observation import ScorerConfig, ScorerKind, fit_scorer, score
from .training import TrainConfig, VideoData, train

__version__ = "0.1.0"
