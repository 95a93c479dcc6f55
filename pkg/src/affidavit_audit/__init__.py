"""Outlier and noise screening for alphanumeric tabular databases.

The package couples density detectors (LOF, DBSCAN), a classifier
committee (C4.5, PRISM, naive Bayes) and K-Means attribute ranking into
two audit pipelines, plus a preparation pipeline for real-estate affidavit
exports and a seeded synthetic benchmark.
"""

from .detectors import (AttributeRanking, Clustering, DbscanResult, LofResult,
                        centroid_attribute_distances, dbscan, kmeans, lof_flag,
                        lof_scores)
from .learners import (AttributeScore, BayesModel, DecisionTree, Rule,
                       attribute_scores, c45_build, entropy, nb_predict,
                       nb_train, prism_build, tree_to_rules)
from .prep import (CpiTable, FxTable, PrepConfig, classify_declared_value,
                   convert_valuation, homogenize_area, prepare,
                   select_attributes)
from .procedures import (AuditConfig, Bin, BinReport, OutlierReport,
                         VoteConfig, build_bins, classifier_refine,
                         phase1_detect, procedure_one, procedure_two)
from .synth import (EvalResult, InjectionSpec, SynthSpec, affidavit_like_spec,
                    evaluate, generate, inject)
from .tabular import (AttributeKind, BinMethod, ColumnStats, Dataset, Schema,
                      column_stats, discretize, load_csv, mixed_distance,
                      pairwise_distances, write_csv, znormalize)

__version__ = "0.1.0"
