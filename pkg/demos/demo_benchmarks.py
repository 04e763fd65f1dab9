"""Bundled similarity benchmarks under several score functions.

The 40-pair set carries graded similarity targets for toy-corpus
marker contexts; the 20-record choice set asks which of two candidate
contexts matches a reference. Curve-area scores are compared against
the trajectory-distance and conditional-likelihood baselines.
"""

from pathlib import Path

from ccdae import backends, bench, pipeline

DATA = Path(backends.__file__).parent / "data"

model = backends.NGramModel.load(DATA / "toy_ngram.json")
backend = backends.NGramBackend(model)
config = pipeline.CompareConfig(seed=0)

pairs = bench.load_pairs(DATA / "pairs.tsv").records
choices = bench.load_choices(DATA / "choices.tsv").records
print(f"{len(pairs)} graded pairs, {len(choices)} binary choices\n")

print("score       spearman_x100   accuracy")
for score in ("auc", "traj", "cond_lik"):
    rep = bench.run_similarity_bench(pairs, backend, config, score=score,
                                     backend_id="ngram")
    rep2 = bench.run_choice_bench(choices, backend, score=score,
                                  backend_id="ngram")
    print(f"{score:10s} {rep.metric:14.2f} {rep2.metric:10.2f}")
