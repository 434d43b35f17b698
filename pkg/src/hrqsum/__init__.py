"""Hierarchical residual quantization of review sentences with frequency-
based subpath aggregation and attributable extractive summarization."""

from .aggregate import (ControlModel, PathTree, ScoredSubpath, build_tree,
                        fit_control, prune_generic, select_generic,
                        select_specific)
from .corpus import (AspectLexicon, Corpus, DenoisingPair, Entity, Review,
                     Sentence, label_aspects, load_corpus,
                     retrieve_denoising_pairs, segment, tokenize)
from .embedder import (EmbeddingMatrix, embed_builtin, load_embeddings,
                       save_embeddings)
from .evaluate import (PlantedBenchmark, PlantedConfig, RougeScore,
                       baseline_centroid, baseline_flat_kmeans,
                       baseline_random, generate_planted, rouge,
                       score_recovery)
from .hrq import (Codebook, FitReport, QuantizerConfig, decode, decode_batch,
                  decode_dropout, encode, encode_batch, fit,
                  gumbel_temperature, init_codebook, kl_to_uniform, norm_loss,
                  score_level, soft_assign)
from .summarize import (EvidenceSet, Summary, SummarySentence, assemble,
                        centroid_sentence, evidence_set,
                        nearest_sentence_decode)

__version__ = "0.1.0"
