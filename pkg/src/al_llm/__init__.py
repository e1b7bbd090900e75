"""Pool-based active learning for text classification with an LLM oracle.

The package is organized around the classic pool-based loop: a query
strategy ranks the unlabeled pool, an oracle (ground truth or a chat-model
endpoint driven by a structured prompt) labels the queried batch, the
labeled set grows, and the classifier is retrained from scratch.  The
evaluation harness runs the loop under k-fold cross-validation and emits
learning curves, labeling-scenario comparisons, direct-classification
baselines, and random-sampling baselines.
"""

__version__ = "0.1.0"
