import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from segalign.core import (AlignmentError, LabelVocabulary, Segment, Segmentation, SparseLabel,
                           StateAlignment, StateVocabulary, Transcript, TranscriptGrammar,
                           alignment_to_segmentation, build_grammar, extract_actions,
                           read_segmentations, read_sparse_labels, read_transcripts,
                           single_path_grammar, uniform_alignment, write_segmentations,
                           write_sparse_labels, write_transcripts)

A, B, C = 0, 1, 2


def test_label_vocabulary_sorted_and_round_trips():
    vocab = LabelVocabulary.from_names(["pour", "crack", "stir", "crack"])
    assert vocab.names == ("crack", "pour", "stir")
    assert vocab.decode(vocab.encode(["stir", "pour"])) == ["stir", "pour"]
    with pytest.raises(KeyError):
        vocab.id("fry")


def test_state_vocabulary_offsets():
    vocab = StateVocabulary([3, 1, 2])
    assert vocab.num_states == 6
    assert vocab.global_id(2, 1) == 5
    st_ = vocab.state(3)
    assert (st_.action, st_.index) == (1, 0)
    assert vocab.transcript_states([0, 2, 0]) == 8


def test_grammar_collapses_duplicates():
    g = build_grammar([[A, B], [A, B]])
    assert g.language() == {(A, B)}
    assert g.is_single_path


def test_grammar_shares_prefixes():
    g = build_grammar([[A, B], [A, C]])
    assert g.language() == {(A, B), (A, C)}
    # root -> A is a single shared edge
    assert sum(1 for parent, *_ in g.edges() if parent == 0) == 1


def test_single_path_keeps_repeats():
    g = single_path_grammar(Transcript("v", (A, A, B)))
    assert g.language() == {(A, A, B)}
    assert g.accepts([A, A, B]) and not g.accepts([A, B])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.lists(st.integers(0, 4), min_size=1, max_size=6), min_size=1, max_size=8))
def test_grammar_language_is_input_set(paths):
    g = build_grammar(paths)
    assert g.language() == {tuple(p) for p in paths}
    for p in paths:
        assert g.accepts(p)


def test_extract_actions_examples():
    al = StateAlignment.from_states("v", [(A, 0), (A, 0), (A, 1), (B, 0)])
    assert extract_actions(al).actions == (A, B)
    al = StateAlignment.from_states("v", [(A, 0)] * 4)
    assert extract_actions(al).actions == (A,)
    al = StateAlignment.from_states("v", [(A, 0), (A, 1), (A, 0), (A, 1)])
    assert extract_actions(al).actions == (A, A)


def test_single_state_repeats_need_explicit_instances():
    al = StateAlignment("v", [A, A, A], [0, 0, 0], [0, 0, 1])
    assert extract_actions(al).actions == (A, A)
    assert alignment_to_segmentation(al).segments == (Segment(A, 0, 1), Segment(A, 2, 2))


def test_segmentation_examples():
    al = StateAlignment.from_states("v", [(A, 0), (A, 0), (B, 0)])
    assert alignment_to_segmentation(al).segments == (Segment(A, 0, 1), Segment(B, 2, 2))
    al = StateAlignment.from_states("v", [(A, 0)] * 5)
    assert alignment_to_segmentation(al).segments == (Segment(A, 0, 4),)


def test_validate_rejects_backward_moves():
    with pytest.raises(AlignmentError):
        StateAlignment("v", [A, A, A], [0, 1, 0], [0, 0, 0]).validate()
    with pytest.raises(AlignmentError):
        StateAlignment("v", [A, A], [1, 1], [0, 0]).validate()
    with pytest.raises(AlignmentError):
        StateAlignment("v", [A, B], [0, 0], [0, 0]).validate()


def test_segmentation_must_tile():
    with pytest.raises(ValueError):
        Segmentation("v", (Segment(A, 0, 2), Segment(B, 4, 5)))
    with pytest.raises(ValueError):
        Segmentation("v", (Segment(A, 1, 2),))


@st.composite
def monotone_alignments(draw):
    K = draw(st.lists(st.integers(1, 3), min_size=1, max_size=4))
    n = draw(st.integers(1, 5))
    acts, subs, inst = [], [], []
    for i in range(n):
        a = draw(st.integers(0, len(K) - 1))
        for k in range(draw(st.integers(1, K[a]))):
            d = draw(st.integers(1, 4))
            acts += [a] * d
            subs += [k] * d
            inst += [i] * d
    return StateAlignment("v", acts, subs, inst), K


@settings(max_examples=150, deadline=None)
@given(monotone_alignments())
def test_segmentation_tiles_every_alignment(case):
    al, K = case
    al.validate()
    seg = alignment_to_segmentation(al)
    assert seg.segments[0].start == 0 and seg.num_frames == len(al)
    assert np.array_equal(seg.frame_labels(), al.actions)
    assert seg.actions == extract_actions(al).actions


def test_uniform_alignment_spreads_remainder_early():
    al = uniform_alignment("v", [Segment(A, 0, 6), Segment(B, 7, 7)], [3, 2])
    assert list(al.substates) == [0, 0, 0, 1, 1, 2, 2, 0]
    al.validate()


def test_text_formats_round_trip(tmp_path):
    vocab = LabelVocabulary(["a", "b", "c"])
    tr = [Transcript("v1", (0, 2)), Transcript("v2", (1,))]
    write_transcripts(tmp_path / "t.tsv", tr, vocab)
    assert read_transcripts(tmp_path / "t.tsv", vocab) == {t.video_id: t for t in tr}
    labels = {"v1": [SparseLabel(3, 0), SparseLabel(9, 2)]}
    write_sparse_labels(tmp_path / "s.tsv", labels, vocab)
    assert read_sparse_labels(tmp_path / "s.tsv", vocab) == labels
    segs = [Segmentation("v1", (Segment(0, 0, 4), Segment(2, 5, 9)))]
    write_segmentations(tmp_path / "g.tsv", segs, vocab)
    assert read_segmentations(tmp_path / "g.tsv", vocab) == {"v1": segs[0]}


def test_transcript_reader_reports_line(tmp_path):
    (tmp_path / "t.tsv").write_text("v1\ta b\nbroken\n")
    with pytest.raises(ValueError, match=":2:"):
        read_transcripts(tmp_path / "t.tsv", LabelVocabulary(["a", "b"]))


def test_transcript_must_be_non_empty():
    with pytest.raises(ValueError):
        Transcript("v", ())
    with pytest.raises(ValueError):
        TranscriptGrammar([])
