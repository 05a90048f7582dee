"""Evidence dataset ingestion: API fetch, filtering, multi-label compilation,
stratified splitting, and JSONL persistence.

Records come from the CIViC GraphQL endpoint via cursor pagination. Filtering
drops records with missing abstract/level/metadata, records outside the
Accepted/UnderReview curation statuses, and every member of any group sharing
the (abstract, disease, significance, molecular profile, therapies) tuple.
Surviving records collapse to one item per distinct abstract with a 5-slot
boolean label vector over evidence levels A-E.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import LEVELS, NUM_LEVELS


class DataError(ValueError):
    """Bad or insufficient input data."""


class FetchError(RuntimeError):
    """Retryable network failure; carries the page cursor to resume from."""

    def __init__(self, message: str, cursor: str | None):
        super().__init__(message)
        self.cursor = cursor


class ParseError(DataError):
    """Malformed API response; message names the offending field."""


@dataclass
class RawEvidenceRecord:
    evidence_id: int
    abstract: str
    pubmed_id: int | None
    molecular_profile: str
    disease: str
    therapies: list[str]
    significance: str
    evidence_level: str  # "A".."E" or "" when missing
    status: str  # "Accepted" | "UnderReview" | anything else


@dataclass
class EvidenceItem:
    abstract: str
    pubmed_id: int
    labels: np.ndarray  # (5,) bool over levels A..E
    source_evidence_ids: list[int]

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=bool)
        if self.labels.shape != (NUM_LEVELS,):
            raise DataError(f"labels must have shape ({NUM_LEVELS},)")
        if not self.abstract:
            raise DataError("abstract must be non-empty")
        if not self.labels.any():
            raise DataError("at least one label must be set")

    def level_letters(self) -> list[str]:
        return [LEVELS[i] for i in range(NUM_LEVELS) if self.labels[i]]


@dataclass
class DatasetSplit:
    train: list[EvidenceItem]
    validation: list[EvidenceItem]
    test: list[EvidenceItem]
    split_seed: int
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)

    def parts(self) -> dict[str, list[EvidenceItem]]:
        return {"train": self.train, "validation": self.validation, "test": self.test}


EVIDENCE_QUERY = """
query evidencePage($first: Int!, $after: String) {
  evidenceItems(first: $first, after: $after) {
    pageInfo { hasNextPage endCursor }
    nodes {
      id
      status
      evidenceLevel
      significance
      description
      molecularProfile { name }
      disease { name }
      therapies { name }
      source { citationId abstract }
    }
  }
}
"""

_STATUS_MAP = {
    "accepted": "Accepted",
    "submitted": "UnderReview",
    "under_review": "UnderReview",
    "underreview": "UnderReview",
}


def _normalize_status(raw) -> str:
    s = str(raw or "")
    return _STATUS_MAP.get(s.strip().lower(), s)


def _parse_node(node: dict) -> RawEvidenceRecord:
    if "id" not in node:
        raise ParseError("evidence node is missing field 'id'")
    try:
        eid = int(node["id"])
    except (TypeError, ValueError):
        raise ParseError(f"field 'id' is not an integer: {node['id']!r}") from None
    source = node.get("source") or {}
    pubmed = source.get("citationId")
    try:
        pubmed_id = int(pubmed) if pubmed not in (None, "") else None
    except (TypeError, ValueError):
        raise ParseError(f"field 'source.citationId' is not an integer: {pubmed!r}") from None
    therapies_raw = node.get("therapies") or []
    if not isinstance(therapies_raw, list):
        raise ParseError("field 'therapies' is not a list")
    therapies = [str((t or {}).get("name") or "") for t in therapies_raw]
    return RawEvidenceRecord(
        evidence_id=eid,
        abstract=str(source.get("abstract") or ""),
        pubmed_id=pubmed_id,
        molecular_profile=str((node.get("molecularProfile") or {}).get("name") or ""),
        disease=str((node.get("disease") or {}).get("name") or ""),
        therapies=therapies,
        significance=str(node.get("significance") or ""),
        evidence_level=str(node.get("evidenceLevel") or "").strip().upper(),
        status=_normalize_status(node.get("status")),
    )


def _requests_transport(endpoint_url: str):
    import requests

    def post(query: str, variables: dict) -> dict:
        resp = requests.post(endpoint_url, json={"query": query, "variables": variables}, timeout=60)
        resp.raise_for_status()
        return resp.json()

    return post


def fetch_evidence(endpoint_url: str, page_size: int, transport=None) -> list[RawEvidenceRecord]:
    """Pull all evidence records through cursor pagination, id-ascending.

    transport(query, variables) -> parsed JSON body; defaults to an HTTP POST
    against endpoint_url. Network failures raise FetchError carrying the
    cursor of the failed page so a caller can resume.
    """
    if page_size < 1:
        raise ValueError("page_size must be >= 1")
    if transport is None:
        transport = _requests_transport(endpoint_url)

    records: list[RawEvidenceRecord] = []
    cursor: str | None = None
    while True:
        try:
            body = transport(EVIDENCE_QUERY, {"first": page_size, "after": cursor})
        except ParseError:
            raise
        except Exception as exc:
            raise FetchError(f"page fetch after cursor {cursor!r} failed: {exc}", cursor) from exc
        try:
            conn = body["data"]["evidenceItems"]
            nodes = conn["nodes"]
            page_info = conn["pageInfo"]
        except (KeyError, TypeError):
            raise ParseError("response is missing 'data.evidenceItems.nodes' or '.pageInfo'") from None
        for node in nodes:
            records.append(_parse_node(node))
        if not page_info.get("hasNextPage"):
            break
        cursor = page_info.get("endCursor")
        if cursor is None:
            raise ParseError("field 'pageInfo.endCursor' missing while hasNextPage is true")
    records.sort(key=lambda r: r.evidence_id)
    return records


def _dedupe_key(r: RawEvidenceRecord):
    return (
        r.abstract.strip(),
        r.disease.strip(),
        r.significance.strip(),
        r.molecular_profile.strip(),
        tuple(sorted(t.strip() for t in r.therapies)),
    )


def filter_records(records: list[RawEvidenceRecord]) -> list[RawEvidenceRecord]:
    """Apply the dataset filtering rules; pure, idempotent."""
    key_counts: dict[tuple, int] = {}
    for r in records:
        k = _dedupe_key(r)
        key_counts[k] = key_counts.get(k, 0) + 1

    kept = []
    for r in records:
        if not r.abstract.strip() or r.evidence_level not in LEVELS:
            continue
        if not r.disease.strip() or not r.significance.strip() or not r.molecular_profile.strip():
            continue
        if not r.therapies or all(not t.strip() for t in r.therapies):
            continue
        if r.status not in ("Accepted", "UnderReview"):
            continue
        if key_counts[_dedupe_key(r)] > 1:
            continue
        kept.append(r)
    return kept


def compile_multilabel(records: list[RawEvidenceRecord]) -> list[EvidenceItem]:
    """One item per distinct abstract; label slots union over source records."""
    by_abstract: dict[str, list[RawEvidenceRecord]] = {}
    order: list[str] = []
    for r in records:
        key = r.abstract.strip()
        if key not in by_abstract:
            by_abstract[key] = []
            order.append(key)
        by_abstract[key].append(r)

    items = []
    for key in order:
        group = by_abstract[key]
        labels = np.zeros(NUM_LEVELS, dtype=bool)
        for r in group:
            labels[LEVELS.index(r.evidence_level)] = True
        pubmed_ids = [r.pubmed_id for r in group if r.pubmed_id is not None]
        items.append(
            EvidenceItem(
                abstract=key,
                pubmed_id=min(pubmed_ids) if pubmed_ids else 0,
                labels=labels,
                source_evidence_ids=sorted(r.evidence_id for r in group),
            )
        )
    return items


def stratified_split(
    items: list[EvidenceItem],
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> DatasetSplit:
    """Greedy proportional assignment keeping per-class fractions near overall.

    Items are shuffled with the seed, then each goes to the split with the
    largest remaining per-class deficit summed over the item's labels (size
    deficit breaks ties). Deterministic given the seed.
    """
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise DataError(f"ratios must sum to 1, got {ratios}")
    if any(r < 0 for r in ratios):
        raise DataError("ratios must be non-negative")
    abstracts = {it.abstract for it in items}
    if len(abstracts) != len(items):
        raise DataError("duplicate abstracts in input; run compile_multilabel first")

    n = len(items)
    class_totals = np.zeros(NUM_LEVELS)
    for it in items:
        class_totals += it.labels

    class_targets = [np.array(ratios[s]) * class_totals for s in range(3)]
    size_targets = [ratios[s] * n for s in range(3)]
    class_cur = [np.zeros(NUM_LEVELS) for _ in range(3)]
    size_cur = [0, 0, 0]

    order = list(range(n))
    random.Random(seed).shuffle(order)

    buckets: list[list[EvidenceItem]] = [[], [], []]
    for idx in order:
        it = items[idx]
        mask = it.labels
        best = max(
            range(3),
            key=lambda s: (
                float((class_targets[s] - class_cur[s])[mask].sum()),
                size_targets[s] - size_cur[s],
                -s,
            ),
        )
        buckets[best].append(it)
        class_cur[best] += mask
        size_cur[best] += 1

    for s, name in enumerate(("train", "validation", "test")):
        if ratios[s] > 0 and not buckets[s]:
            raise DataError(f"too few items to populate the {name} split ({n} items, ratios {ratios})")

    return DatasetSplit(buckets[0], buckets[1], buckets[2], split_seed=seed, ratios=tuple(ratios))


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def _item_to_obj(item: EvidenceItem, split_name: str) -> dict:
    return {
        "abstract": item.abstract,
        "pubmed_id": item.pubmed_id,
        "labels": {lvl: bool(item.labels[i]) for i, lvl in enumerate(LEVELS)},
        "evidence_ids": list(item.source_evidence_ids),
        "split": split_name,
    }


def _item_from_obj(obj: dict) -> tuple[EvidenceItem, str]:
    labels = np.array([bool(obj["labels"][lvl]) for lvl in LEVELS])
    item = EvidenceItem(
        abstract=obj["abstract"],
        pubmed_id=int(obj.get("pubmed_id") or 0),
        labels=labels,
        source_evidence_ids=[int(e) for e in obj.get("evidence_ids", [])],
    )
    return item, obj["split"]


def write_jsonl(split: DatasetSplit, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for name, part in split.parts().items():
            for item in part:
                fh.write(json.dumps(_item_to_obj(item, name), ensure_ascii=False) + "\n")


def read_jsonl(path: str | Path) -> DatasetSplit:
    parts: dict[str, list[EvidenceItem]] = {"train": [], "validation": [], "test": []}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            item, split_name = _item_from_obj(json.loads(line))
            if split_name not in parts:
                raise DataError(f"unknown split name {split_name!r}")
            parts[split_name].append(item)
    n = sum(len(p) for p in parts.values()) or 1
    ratios = tuple(len(parts[k]) / n for k in ("train", "validation", "test"))
    return DatasetSplit(parts["train"], parts["validation"], parts["test"], split_seed=-1, ratios=ratios)


def load_raw_records(path: str | Path) -> list[RawEvidenceRecord]:
    """Read a fixture file: a JSON array of flat RawEvidenceRecord objects."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    records = []
    for obj in raw:
        records.append(
            RawEvidenceRecord(
                evidence_id=int(obj["evidence_id"]),
                abstract=str(obj.get("abstract") or ""),
                pubmed_id=obj.get("pubmed_id"),
                molecular_profile=str(obj.get("molecular_profile") or ""),
                disease=str(obj.get("disease") or ""),
                therapies=[str(t) for t in obj.get("therapies", [])],
                significance=str(obj.get("significance") or ""),
                evidence_level=str(obj.get("evidence_level") or "").strip().upper(),
                status=_normalize_status(obj.get("status")),
            )
        )
    return records
