"""Shared builders: synthetic keyword-coded datasets and small trained vocabs."""

from __future__ import annotations

import numpy as np
import pytest

from civicml import LEVELS, NUM_LEVELS
from civicml.data import DatasetSplit, EvidenceItem, stratified_split
from civicml.tokenizer import Vocab, train_vocab

# one unambiguous marker word per evidence level
CLASS_KEYWORDS = {
    "A": "quorvat",
    "B": "blenfir",
    "C": "crestol",
    "D": "dorvene",
    "E": "ephrial",
}

FILLER_WORDS = (
    "tumor cells with the of and in for treatment patients study results "
    "observed response gene variant therapy analysis data clinical showed "
    "expression growth effect combined median overall survival group"
).split()


def make_keyword_items(n: int, seed: int = 0, p_second: float = 0.3) -> list[EvidenceItem]:
    """Items whose label set is exactly encoded by marker keywords in the text."""
    rng = np.random.default_rng(seed)
    items = []
    for i in range(n):
        classes = {int(rng.integers(0, NUM_LEVELS))}
        if rng.random() < p_second:
            classes.add(int(rng.integers(0, NUM_LEVELS)))
        words = [FILLER_WORDS[int(j)] for j in rng.integers(0, len(FILLER_WORDS), size=12)]
        for c in sorted(classes):
            words.insert(int(rng.integers(0, len(words) + 1)), CLASS_KEYWORDS[LEVELS[c]])
        labels = np.zeros(NUM_LEVELS, dtype=bool)
        labels[list(classes)] = True
        items.append(
            EvidenceItem(
                abstract=" ".join(words) + f" item{i}",
                pubmed_id=1000 + i,
                labels=labels,
                source_evidence_ids=[i],
            )
        )
    return items


def make_keyword_split(n: int = 300, seed: int = 0) -> DatasetSplit:
    return stratified_split(make_keyword_items(n, seed), (0.8, 0.1, 0.1), seed)


@pytest.fixture(scope="session")
def keyword_split() -> DatasetSplit:
    return make_keyword_split(300, seed=0)


@pytest.fixture(scope="session")
def keyword_vocab(keyword_split) -> Vocab:
    texts = [it.abstract for it in keyword_split.train]
    return train_vocab(texts, 320)
