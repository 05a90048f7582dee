"""Multi-label evidence-level classification for CIViC abstracts.

Pipeline pieces: dataset ingestion from the CIViC GraphQL API, a subword
tokenizer, a bigram tf-idf logistic-regression baseline, a from-scratch
encoder-only transformer (MLM pretraining, context extension, multi-label
fine-tuning), per-class threshold calibration with weighted-F1 reporting,
integrated-gradients token attribution, and a few-shot LLM harness.
"""

__version__ = "0.1.0"

LEVELS = ("A", "B", "C", "D", "E")
NUM_LEVELS = len(LEVELS)
