"""Aligned cross-lingual topic modeling from bilingual corpora and
dictionaries: contrastive word-level topic alignment inside a variational
topic model, with vocabulary linking through embedding nearest neighbors."""

from .corpus import (BowDocument, TranslationDictionary, Vocabulary,
                     build_vocabulary, load_dictionary, vectorize,
                     vectorize_corpus)
from .embeddings import EmbeddingTable, load_embeddings, nearest_neighbors, train_skipgram
from .errors import (CheckpointError, ConfigurationError, ParseError,
                     TrainingDiverged, XltopicError)
from .linking import (LinkTable, build_link_table, enumerate_pairs,
                      negative_set, subsample_dictionary)
from .model import (ModelConfig, ModelState, contrastive_alignment_loss, critic,
                    direct_alignment_loss, doc_topic, encode, init_model_state,
                    kl_term, reconstruction_dist, reparameterize, tm_loss,
                    topic_word_matrix, total_loss)
from .trainer import (TrainConfig, TrainingTrace, cosine_distance_diagnostic,
                      load_checkpoint, save_checkpoint, train)
from .evaluation import (ReferencePairs, TopicSet, cnpmi, infer_doc_topics,
                         linear_classifier_eval, top_words, topic_uniqueness)

__version__ = "0.1.0"
