"""marginlab: fine-tuning-free OOD detection testbed.

Pre-trains a small pair-relation network under interchangeable losses,
measures the class separation the loss induces, and scores novel-class
detection with prototype/k-NN/Mahalanobis methods.
"""

import os as _os

# The workload is many small mat-muls; BLAS thread fan-out costs more than it
# saves and sweep-level workers (MARGINLAB_THREADS) parallelize better.
# Effective only when numpy has not been imported yet; explicit settings win.
for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, "1")

from .datagen import (BenchmarkConfig, BenchmarkSplit, DomainShift,
                      apply_domain_shift, gen_benchmark, gen_benchmark_pair,
                      make_domain_shift, random_orthogonal)
from .errors import (ConfigError, DataError, DegenerateGeometryError,
                     DegenerateVectorError, DivergedError, FitError,
                     FormatError, MarginlabError, NumericalError,
                     UndefinedCorrelationError)
from .losses import (LossOutput, LossSpec, batch_loss, check_gradient,
                     loss_bce, loss_focal, loss_hinge, loss_mse_cs, loss_sce,
                     loss_value_grad, parse_loss_spec)
from .metrics import auroc, auroc_bruteforce, fpr_at_tpr, spearman
from .model import (Architecture, Checkpoint, ModelParams, PairBatch,
                    TrainConfig, encode, held_out_pairs, init_params,
                    load_checkpoint, pair_auc_sanity, sample_pairs,
                    save_checkpoint, score_pair, score_pairs, train)
from .numeric import (cosine_similarity, log_sum_exp, make_rng, softmax,
                      stable_sigmoid)
from .oodf import EmbeddingSet, read_embedding_set, write_oodf
from .scoring import (ComparisonCounter, EvalReport, GaussianFit,
                      PrototypeSet, build_prototypes, count_comparisons,
                      evaluate_scorer, knn_scores, mahalanobis_fit,
                      mahalanobis_scores, proto_msp_scores)
from .separation import (LabeledFeatureSet, SeparationReport, project_2d,
                         r2_index, r2_of_pairs)

__version__ = "0.1.0"
