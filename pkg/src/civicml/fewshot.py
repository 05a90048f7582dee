"""Few-shot evaluation harness with a pluggable chat-completion client.

Prompts are built deterministically from a task preamble, the five evidence
level definitions (per the public CIViC documentation), N sampled training
examples per level with their gold labels, and the target abstract. The
client interface has a live HTTP implementation and deterministic mocks, so
the whole pipeline can run offline.
"""

from __future__ import annotations

import os
import re
import warnings
from abc import ABC, abstractmethod
from dataclasses import dataclass, field

import numpy as np

from . import LEVELS, NUM_LEVELS
from . import metrics as M
from .data import DataError, EvidenceItem

# Level guide adapted from the CIViC documentation ("Understanding Evidence
# Levels"): name, definition, description per level.
LEVEL_DEFINITIONS: dict[str, tuple[str, str, str]] = {
    "A": (
        "Validated association",
        "Proven/consensus association in human medicine.",
        "Validated associations are often in routine clinical practice already or "
        "are the subject of major clinical trial efforts.",
    ),
    "B": (
        "Clinical evidence",
        "Clinical trial or other primary patient data supports association.",
        "The evidence should be supported by observations in multiple patients; "
        "additional support from functional data is desirable but not required.",
    ),
    "C": (
        "Case study",
        "Individual case reports from clinical journals.",
        "The study may have involved a large number of patients, but the statement "
        "was supported by only a single patient; observations from a handful of "
        "patients or a single family may also count as a case study.",
    ),
    "D": (
        "Preclinical evidence",
        "In vivo or in vitro models support association.",
        "The study may have involved some patient data, but support for the "
        "statement was limited to in vivo or in vitro models such as mouse studies, "
        "cell lines, or molecular assays.",
    ),
    "E": (
        "Inferential association",
        "Indirect evidence.",
        "The assertion is at least one step removed from a direct association "
        "between a molecular profile and clinical relevance.",
    ),
}

DEFAULT_PREAMBLE = (
    "You will be shown the abstract of a biomedical publication that examined "
    "combinations of genomic variants, cancer types, and treatments. Assign every "
    "clinical evidence level (A, B, C, D, E) that applies to the abstract, using "
    "the level guide below. Answer with the matching level letters separated by "
    "commas, and nothing else."
)


class ClientError(RuntimeError):
    """A chat-completion call failed."""


class PromptBudgetError(ValueError):
    """The assembled prompt exceeds the configured token budget."""


@dataclass
class PromptSpec:
    target_abstract: str
    examples: list[tuple[str, tuple[str, ...]]] = field(default_factory=list)
    preamble: str = DEFAULT_PREAMBLE
    n_shots: int = 0


def sample_examples(train_items: list[EvidenceItem], n: int,
                    rng: np.random.Generator) -> list[tuple[str, tuple[str, ...]]]:
    """N distinct examples per level, sampled without replacement within a call."""
    if n == 0:
        return []
    out: list[tuple[str, tuple[str, ...]]] = []
    for c, level in enumerate(LEVELS):
        members = [it for it in train_items if it.labels[c]]
        if len(members) < n:
            raise DataError(f"train split has only {len(members)} items for level {level}, need {n}")
        picks = rng.choice(len(members), size=n, replace=False)
        for i in picks:
            item = members[int(i)]
            out.append((item.abstract, tuple(item.level_letters())))
    return out


def build_prompt(spec: PromptSpec, token_budget: int | None = None) -> str:
    """Deterministic serialization of a prompt spec.

    token_budget is an approximate whitespace-token cap; exceeding it raises
    PromptBudgetError.
    """
    lines = [spec.preamble, "", "Evidence level guide:"]
    for level in LEVELS:
        name, definition, description = LEVEL_DEFINITIONS[level]
        lines.append(f"Level {level} ({name}): {definition} {description}")
    if spec.examples:
        lines.append("")
        lines.append("Examples:")
        for abstract, levels in spec.examples:
            lines.append(f"Abstract: {abstract}")
            lines.append(f"Levels: {', '.join(levels)}")
            lines.append("")
    lines.append("")
    lines.append(f"Abstract: {spec.target_abstract}")
    lines.append("Levels:")
    prompt = "\n".join(lines)
    if token_budget is not None:
        n_tokens = len(prompt.split())
        if n_tokens > token_budget:
            raise PromptBudgetError(f"prompt of ~{n_tokens} tokens exceeds budget {token_budget}")
    return prompt


def _extract_target(prompt: str) -> str:
    chunks = prompt.rsplit("Abstract: ", 1)
    if len(chunks) != 2 or not chunks[1].endswith("\nLevels:"):
        raise ClientError("mock client could not locate the target abstract in the prompt")
    return chunks[1][: -len("\nLevels:")]


def parse_response(text: str) -> tuple[set[str], bool]:
    """Extract standalone level letters (case-insensitive); dedup.

    Returns (labels, parseable); an empty set is flagged unparseable.
    """
    tokens = re.split(r"[^A-Za-z0-9]+", text)
    labels = {t.upper() for t in tokens if len(t) == 1 and t.upper() in LEVELS}
    return labels, bool(labels)


def labels_to_vector(labels: set[str]) -> np.ndarray:
    return np.array([lvl in labels for lvl in LEVELS], dtype=bool)


class LlmClient(ABC):
    """Chat-completion interface: one prompt in, one text completion out."""

    @abstractmethod
    def complete(self, prompt: str) -> str: ...


class MockOracleClient(LlmClient):
    """Answers with the gold labels of the target abstract (perfect predictor)."""

    def __init__(self, items: list[EvidenceItem]):
        self.lookup = {it.abstract: ", ".join(it.level_letters()) for it in items}

    def complete(self, prompt: str) -> str:
        target = _extract_target(prompt)
        try:
            return self.lookup[target]
        except KeyError:
            raise ClientError("oracle mock has no gold labels for the target abstract") from None


class MockConstantClient(LlmClient):
    """Always answers the same level letter(s)."""

    def __init__(self, answer: str = "B"):
        self.answer = answer

    def complete(self, prompt: str) -> str:
        return self.answer


class HttpChatClient(LlmClient):
    """JSON chat-completion client; temperature 0 for determinism."""

    def __init__(self, endpoint: str, model: str, api_key: str = "", timeout: float = 120.0):
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.timeout = timeout

    @classmethod
    def from_env(cls) -> "HttpChatClient":
        endpoint = os.environ.get("LLM_ENDPOINT", "")
        model = os.environ.get("LLM_MODEL", "")
        if not endpoint or not model:
            raise ClientError("LLM_ENDPOINT and LLM_MODEL must be set for the live client")
        return cls(endpoint, model, os.environ.get("LLM_API_KEY", ""))

    def complete(self, prompt: str) -> str:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": 0,
        }
        try:
            resp = requests.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
            resp.raise_for_status()
            return resp.json()["choices"][0]["message"]["content"]
        except Exception as exc:
            raise ClientError(f"chat completion failed: {exc}") from exc


def carve_reduced_testset(test_items: list[EvidenceItem], per_level: int = 4,
                          seed: int = 0) -> list[EvidenceItem]:
    """Distinct test items, per_level for each evidence level."""
    rng = np.random.default_rng(seed)
    chosen: list[EvidenceItem] = []
    chosen_ids: set[int] = set()
    for c, level in enumerate(LEVELS):
        candidates = [i for i, it in enumerate(test_items)
                      if it.labels[c] and i not in chosen_ids]
        if len(candidates) < per_level:
            raise DataError(f"test split has only {len(candidates)} unused items for level {level}, "
                            f"need {per_level}")
        for i in rng.choice(len(candidates), size=per_level, replace=False):
            idx = candidates[int(i)]
            chosen_ids.add(idx)
            chosen.append(test_items[idx])
    return chosen


@dataclass
class FewShotRun:
    n_shots: int
    repetition: int
    predictions: np.ndarray  # (N, 5) bool
    raw_responses: list[str]
    unparseable: int
    failed: bool = False


@dataclass
class FewShotEval:
    n_shots: int
    runs: list[FewShotRun]
    reports: list[M.MetricsReport]
    mean_report: M.MetricsReport | None


def evaluate_fewshot(client: LlmClient, train_items: list[EvidenceItem],
                     reduced_test: list[EvidenceItem],
                     shot_counts: tuple[int, ...] = (0, 1, 2, 3, 4, 5, 10),
                     repetitions: int = 3, seed: int = 0,
                     token_budget: int | None = None) -> dict[int, FewShotEval]:
    """Run the N-shot protocol over the reduced test set.

    For every prediction call a fresh example sample is drawn. A failed
    repetition (client error) is excluded from the mean with a warning.
    """
    rng = np.random.default_rng(seed)
    gold = np.stack([it.labels for it in reduced_test])
    evals: dict[int, FewShotEval] = {}
    for n in shot_counts:
        runs: list[FewShotRun] = []
        reports: list[M.MetricsReport] = []
        for rep in range(1, repetitions + 1):
            preds = np.zeros((len(reduced_test), NUM_LEVELS), dtype=bool)
            raw: list[str] = []
            unparseable = 0
            failed = False
            try:
                for i, item in enumerate(reduced_test):
                    examples = sample_examples(train_items, n, rng)
                    prompt = build_prompt(
                        PromptSpec(target_abstract=item.abstract, examples=examples, n_shots=n),
                        token_budget=token_budget,
                    )
                    text = client.complete(prompt)
                    raw.append(text)
                    labels, ok = parse_response(text)
                    if not ok:
                        unparseable += 1
                    preds[i] = labels_to_vector(labels)
            except ClientError as exc:
                warnings.warn(f"{n}-shot repetition {rep} failed and is excluded: {exc}")
                failed = True
            runs.append(FewShotRun(n, rep, preds, raw, unparseable, failed))
            if not failed:
                reports.append(M.compute_metrics(preds, gold))
        mean_report = M.aggregate_seeds(reports).mean if reports else None
        evals[n] = FewShotEval(n, runs, reports, mean_report)
    return evals
