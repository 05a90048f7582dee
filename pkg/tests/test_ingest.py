import json

import numpy as np
import pytest

from civicml import LEVELS
from civicml.data import (
    DataError,
    EvidenceItem,
    FetchError,
    ParseError,
    RawEvidenceRecord,
    compile_multilabel,
    fetch_evidence,
    filter_records,
    load_raw_records,
    read_jsonl,
    stratified_split,
    write_jsonl,
)


def record(i, level="B", abstract="some abstract", status="Accepted", disease="melanoma",
           significance="Sensitivity/Response", profile="BRAF V600E", therapies=("vemurafenib",),
           pubmed=111):
    return RawEvidenceRecord(
        evidence_id=i, abstract=abstract, pubmed_id=pubmed, molecular_profile=profile,
        disease=disease, therapies=list(therapies), significance=significance,
        evidence_level=level, status=status,
    )


def node(i, level="B", abstract="some abstract"):
    return {
        "id": i, "status": "ACCEPTED", "evidenceLevel": level,
        "significance": "SENSITIVITYRESPONSE", "description": "d",
        "molecularProfile": {"name": f"GENE V{i}"}, "disease": {"name": "melanoma"},
        "therapies": [{"name": "drug"}],
        "source": {"citationId": str(10000 + i), "abstract": abstract},
    }


def paged_transport(pages):
    calls = []

    def transport(query, variables):
        calls.append(dict(variables))
        idx = 0 if variables["after"] is None else int(variables["after"])
        nodes = pages[idx] if idx < len(pages) else []
        return {
            "data": {
                "evidenceItems": {
                    "pageInfo": {"hasNextPage": idx + 1 < len(pages), "endCursor": str(idx + 1)},
                    "nodes": nodes,
                }
            }
        }

    transport.calls = calls
    return transport


def test_fetch_empty_endpoint():
    assert fetch_evidence("mock://x", 100, transport=paged_transport([[]])) == []


def test_fetch_three_pages_ids_ascending():
    pages = [[node(5), node(2)], [node(9), node(1)], [node(7), node(3)]]
    records = fetch_evidence("mock://x", 2, transport=paged_transport(pages))
    assert [r.evidence_id for r in records] == [1, 2, 3, 5, 7, 9]
    assert records[0].status == "Accepted"
    assert records[0].pubmed_id == 10001


def test_fetch_malformed_node_names_field():
    bad = node(1)
    bad["source"]["citationId"] = "not-a-number"
    with pytest.raises(ParseError, match="citationId"):
        fetch_evidence("mock://x", 10, transport=paged_transport([[bad]]))
    with pytest.raises(ParseError, match="'id'"):
        fetch_evidence("mock://x", 10, transport=paged_transport([[{"status": "ACCEPTED"}]]))


def test_fetch_network_failure_carries_cursor():
    def transport(query, variables):
        if variables["after"] is None:
            return {
                "data": {"evidenceItems": {
                    "pageInfo": {"hasNextPage": True, "endCursor": "c1"},
                    "nodes": [node(1)],
                }}
            }
        raise OSError("connection reset")

    with pytest.raises(FetchError) as exc_info:
        fetch_evidence("mock://x", 10, transport=transport)
    assert exc_info.value.cursor == "c1"


def test_fetch_rejects_bad_page_size():
    with pytest.raises(ValueError):
        fetch_evidence("mock://x", 0, transport=paged_transport([[]]))


def test_filter_removes_missing_abstract_and_level():
    records = [record(1, abstract=""), record(2, level="", profile="P2"), record(3, profile="P3")]
    kept = filter_records(records)
    assert [r.evidence_id for r in kept] == [3]


def test_filter_removes_both_duplicates():
    records = [record(1), record(2), record(3, profile="KRAS G12C")]
    kept = filter_records(records)
    assert [r.evidence_id for r in kept] == [3]


def test_filter_duplicate_key_ignores_therapy_order():
    a = record(1, therapies=("x", "y"))
    b = record(2, therapies=("y", "x"))
    assert filter_records([a, b]) == []


def test_filter_fixture_of_ten_keeps_seven():
    records = [
        record(1),
        record(2, profile="ALK F1174L"),
        record(3, disease="lung", profile="EGFR T790M"),
        record(4, abstract="", profile="P4"),        # rule (a): no abstract
        record(5, level="", profile="P5"),           # rule (a): no level
        record(6, status="Rejected", profile="P6"),  # status rule
        record(7, profile="NRAS Q61K"),
        record(8, disease="colon", profile="KIT D816V"),
        record(9, significance="Resistance", profile="MET y1003"),
        record(10, therapies=("a", "b"), profile="RET M918T"),
    ]
    kept = filter_records(records)
    assert [r.evidence_id for r in kept] == [1, 2, 3, 7, 8, 9, 10]


def test_filter_missing_metadata_removed():
    records = [
        record(1, disease=" "),
        record(2, significance=""),
        record(3, profile=""),
        record(4, therapies=()),
        record(5, therapies=("", " ")),
        record(6, profile="OK GENE"),
    ]
    assert [r.evidence_id for r in filter_records(records)] == [6]


def test_filter_idempotent():
    records = [record(i, profile=f"P{i % 4}", level=LEVELS[i % 5]) for i in range(12)]
    records += [record(99, abstract="")]
    once = filter_records(records)
    assert filter_records(once) == once


def test_compile_merges_same_abstract():
    records = [
        record(1, level="C", abstract="shared abstract"),
        record(2, level="D", abstract="shared abstract", profile="other"),
    ]
    items = compile_multilabel(records)
    assert len(items) == 1
    assert items[0].level_letters() == ["C", "D"]
    assert items[0].source_evidence_ids == [1, 2]


def test_compile_singleton_and_count_bound():
    records = [record(1, level="B")] + [record(i, abstract=f"ab {i}", level="A") for i in range(2, 6)]
    items = compile_multilabel(records)
    assert len(items) <= len(records)
    single = [it for it in items if it.abstract == "some abstract"]
    assert single[0].level_letters() == ["B"]
    all_ids = sorted(i for it in items for i in it.source_evidence_ids)
    assert all_ids == [r.evidence_id for r in records]


def test_stratified_split_uniform_items():
    items = [
        EvidenceItem(abstract=f"same text {i}", pubmed_id=i,
                     labels=np.array([0, 1, 0, 0, 0], dtype=bool), source_evidence_ids=[i])
        for i in range(10)
    ]
    split = stratified_split(items, (0.8, 0.1, 0.1), seed=3)
    assert (len(split.train), len(split.validation), len(split.test)) == (8, 1, 1)


def test_stratified_split_deterministic():
    items = make_items(200, seed=5)
    s1 = stratified_split(items, (0.8, 0.1, 0.1), seed=11)
    s2 = stratified_split(items, (0.8, 0.1, 0.1), seed=11)
    for part in ("train", "validation", "test"):
        assert [it.abstract for it in s1.parts()[part]] == [it.abstract for it in s2.parts()[part]]


def make_items(n, seed):
    rng = np.random.default_rng(seed)
    probs = np.array([0.05, 0.4, 0.3, 0.22, 0.03])
    items = []
    for i in range(n):
        labels = np.zeros(5, dtype=bool)
        labels[rng.choice(5, p=probs)] = True
        if rng.random() < 0.2:
            labels[rng.choice(5, p=probs)] = True
        items.append(EvidenceItem(abstract=f"abstract number {i}", pubmed_id=i,
                                  labels=labels, source_evidence_ids=[i]))
    return items


def test_stratified_split_proportions_within_tolerance():
    items = make_items(1000, seed=9)
    split = stratified_split(items, (0.8, 0.1, 0.1), seed=1)
    overall = np.stack([it.labels for it in items]).mean(axis=0)
    for part in split.parts().values():
        frac = np.stack([it.labels for it in part]).mean(axis=0)
        assert np.all(np.abs(frac - overall) <= 0.015 + 1e-12)


def test_stratified_split_every_abstract_exactly_once():
    items = make_items(97, seed=2)
    split = stratified_split(items, (0.8, 0.1, 0.1), seed=2)
    seen = [it.abstract for part in split.parts().values() for it in part]
    assert sorted(seen) == sorted(it.abstract for it in items)


def test_stratified_split_errors():
    items = make_items(2, seed=0)
    with pytest.raises(DataError, match="too few"):
        stratified_split(items, (0.8, 0.1, 0.1), seed=0)
    with pytest.raises(DataError, match="sum to 1"):
        stratified_split(make_items(50, 1), (0.5, 0.2, 0.2), seed=0)
    dup = make_items(5, seed=3) * 2
    with pytest.raises(DataError, match="duplicate"):
        stratified_split(dup, (0.8, 0.1, 0.1), seed=0)


def test_jsonl_roundtrip_and_format(tmp_path):
    items = make_items(40, seed=4)
    split = stratified_split(items, (0.8, 0.1, 0.1), seed=7)
    path = tmp_path / "data.jsonl"
    write_jsonl(split, path)

    raw = path.read_bytes()
    assert b"\r\n" not in raw and raw.endswith(b"\n")
    first = json.loads(raw.splitlines()[0])
    assert set(first) == {"abstract", "pubmed_id", "labels", "evidence_ids", "split"}
    assert set(first["labels"]) == set(LEVELS)

    loaded = read_jsonl(path)
    for part in ("train", "validation", "test"):
        got = loaded.parts()[part]
        want = split.parts()[part]
        assert [it.abstract for it in got] == [it.abstract for it in want]
        assert all(np.array_equal(g.labels, w.labels) for g, w in zip(got, want))


def test_load_raw_records_fixture(tmp_path):
    fixture = [
        {"evidence_id": 4, "abstract": "text", "pubmed_id": 7, "molecular_profile": "X",
         "disease": "d", "therapies": ["t"], "significance": "s", "evidence_level": "c",
         "status": "submitted"},
    ]
    path = tmp_path / "fixture.json"
    path.write_text(json.dumps(fixture), encoding="utf-8")
    records = load_raw_records(path)
    assert records[0].evidence_level == "C"
    assert records[0].status == "UnderReview"
