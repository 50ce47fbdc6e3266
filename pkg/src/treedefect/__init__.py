"""Tree-LSTM representations of source file ASTs for defect prediction.

The pipeline: parse or load ASTs into a corpus, build a vocabulary, pretrain
a Child-Sum Tree-LSTM by predicting parent labels from children, use root
hidden vectors as file features, then train and evaluate defect classifiers
under within-project and cross-project protocols.
"""

from .classifiers import (FeatureMatrix, ForestConfig, ForestModel, LogisticModel,
                          bow_featurize, classifier_from_document,
                          classifier_to_document, featurize_corpus,
                          load_classifier, oob_predictions, predict,
                          predict_proba, predict_proba_forest,
                          predict_proba_logistic, read_features_csv,
                          save_classifier, train_forest, train_logistic,
                          write_features_csv)
from .corpus import (AstTree, EncodedTree, FileRecord, UNK_TOKEN, Vocabulary,
                     build_vocabulary, cell, decode, encode, iter_nodes,
                     node_count, normalize_label, normalize_labels, read_corpus,
                     tree_depth, write_corpus)
from .embedding import EmbeddingMatrix, ast2vec, init_embeddings
from .errors import (CorpusError, DepthLimitError, DocumentError, MiniSyntaxError,
                     TrainingDataError, TreeDefectError, UndefinedMetricError)
from .evaluation import (ConfusionMatrix, MetricsReport, auc, confusion,
                         evaluate_predictions, f_measure, precision, recall,
                         report_from_json, report_to_json, report_to_row,
                         stratified_k_fold, write_report_csv, write_report_json)
from .experiments import (ClassifierOptions, CvDescriptor, CvResult,
                          FoldFeatures, PairsDescriptor, ProjectStats,
                          average_report, cv_feature_folds, cv_from_folds,
                          dataset_stats, format_stats_table, parse_descriptor,
                          train_classifier, version_pair_run, within_project_cv)
from .minilang import parse_mini
from .pretrain import (EpochStats, PretrainHead, PretrainResult, RmspropState,
                       TrainConfig, corpus_loss, gradients, init_head,
                       loss_and_gradients, parent_distribution, perplexity,
                       pretrain, pretrain_with_config, rmsprop_step,
                       split_records, write_training_log)
from .rng import derive_seed, stream
from .synthetic import generate_multi_cell, generate_records, generate_source
from .treelstm import (DropoutMasks, FlatTree, GateParams, NodeState, TreeLstmModel,
                       backward, flatten, forward, forward_root, init_model,
                       load_model, model_from_document, model_to_document,
                       param_arrays, sample_masks, save_model, sigmoid, t_lstm)

__version__ = "0.1.0"
