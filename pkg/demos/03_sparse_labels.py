"""How much a handful of labelled frames helps.

The same corpus is trained with a growing fraction of frames annotated.
After every realignment the annotated frames are matched to segments of
their class and the boundaries are moved just far enough to contain them.
"""
from segalign import TrainConfig, VideoData, train
from segalign.data import SyntheticSpec, generate_corpus, sample_sparse_labels

corpus = generate_corpus(SyntheticSpec(noise_scale=3.0, seed=0))

print(f"{'labelled':>9}  {'frames':>6}  {'MoF':>6}  iterations")
for fraction in (0.0, 0.01, 0.1, 1.0):
    labels = sample_sparse_labels(corpus.segmentations, fraction, seed=0)
    videos = [VideoData(v, corpus.features[v], corpus.transcripts[v], labels[v], corpus.segmentations[v])
              for v in corpus.video_ids]
    mode = "sparse" if fraction > 0 else "weak"
    result = train(TrainConfig(supervision=mode), videos, corpus.labels)
    count = sum(len(ls) for ls in labels.values())
    print(f"{fraction:>9.0%}  {count:>6}  {result.final_mof:6.3f}  {len(result.reports)}")
