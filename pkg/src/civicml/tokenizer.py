"""Subword tokenizer: merge-trained vocabulary, greedy longest-match encoding.

Text is lowercased and pretokenized into words/punctuation before subword
segmentation. Non-initial pieces carry a ``##`` continuation prefix. Training
grows the vocabulary by iteratively merging the most frequent adjacent symbol
pair, so frequent in-domain words end up as single tokens; encoding then uses
greedy longest-match against the trained vocabulary.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

BOS, EOS, MASK, PAD, UNK = "<bos>", "<eos>", "<mask>", "<pad>", "<unk>"
SPECIAL_TOKENS = (BOS, EOS, MASK, PAD, UNK)

_WORD_RE = re.compile(r"\w+|[^\w\s]")


def pretokenize(text: str) -> list[str]:
    """Lowercase and split into word / single-punctuation tokens."""
    return _WORD_RE.findall(text.lower())


@dataclass
class Vocab:
    id_to_token: list[str]
    token_to_id: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate tokens in vocabulary")
        for i, tok in enumerate(SPECIAL_TOKENS):
            if self.id_to_token[i] != tok:
                raise ValueError(f"special token {tok!r} must sit at id {i}")

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def bos_id(self) -> int:
        return 0

    @property
    def eos_id(self) -> int:
        return 1

    @property
    def mask_id(self) -> int:
        return 2

    @property
    def pad_id(self) -> int:
        return 3

    @property
    def unk_id(self) -> int:
        return 4

    @property
    def special_ids(self) -> tuple[int, ...]:
        return (0, 1, 2, 3, 4)


@dataclass
class TokenSequence:
    """Token ids wrapped with bos/eos; pads, if any, only after eos."""

    ids: np.ndarray
    attention_length: int

    def __post_init__(self):
        self.ids = np.asarray(self.ids, dtype=np.int64)
        if self.attention_length < 2 or self.attention_length > len(self.ids):
            raise ValueError("attention_length out of range")


def _word_symbols(word: str) -> list[str]:
    return [word[0]] + ["##" + ch for ch in word[1:]]


def train_vocab(corpus: list[str], target_size: int) -> Vocab:
    """Build a subword vocabulary of exactly target_size entries (or fewer if
    the corpus runs out of mergeable pairs).

    Deterministic given corpus order: pair-count ties break lexicographically.
    """
    if not corpus:
        raise ValueError("empty corpus")

    word_freq: dict[str, int] = {}
    for text in corpus:
        for w in pretokenize(text):
            word_freq[w] = word_freq.get(w, 0) + 1

    words = sorted(word_freq)
    freqs = [word_freq[w] for w in words]
    segs = [_word_symbols(w) for w in words]

    base = sorted({s for seg in segs for s in seg})
    floor = len(SPECIAL_TOKENS) + len(base)
    if target_size <= floor:
        raise ValueError(
            f"target_size {target_size} too small: need > {floor} "
            f"({len(SPECIAL_TOKENS)} specials + {len(base)} base symbols)"
        )

    tokens = list(SPECIAL_TOKENS) + base
    known = set(tokens)

    # pair -> total count, and pair -> word indices containing it
    pair_count: dict[tuple[str, str], int] = {}
    pair_words: dict[tuple[str, str], set[int]] = {}

    def add_word(wi: int, sign: int):
        seg = segs[wi]
        f = freqs[wi] * sign
        for a, b in zip(seg, seg[1:]):
            pair_count[(a, b)] = pair_count.get((a, b), 0) + f
            if sign > 0:
                pair_words.setdefault((a, b), set()).add(wi)

    for wi in range(len(words)):
        add_word(wi, +1)

    def merge_symbols(seg: list[str], pair: tuple[str, str], merged: str) -> list[str]:
        out = []
        i = 0
        while i < len(seg):
            if i + 1 < len(seg) and seg[i] == pair[0] and seg[i + 1] == pair[1]:
                out.append(merged)
                i += 2
            else:
                out.append(seg[i])
                i += 1
        return out

    while len(tokens) < target_size:
        live = [(p, c) for p, c in pair_count.items() if c > 0]
        if not live:
            break
        # highest count wins; ties break to the lexicographically smallest pair
        best_pair, _ = min(live, key=lambda pc: (-pc[1], pc[0]))
        merged = best_pair[0] + best_pair[1].removeprefix("##")
        if merged in known:
            # already a token (possible via different merge orders); just
            # re-segment the words so the pair disappears from the counts
            pass
        else:
            tokens.append(merged)
            known.add(merged)
        for wi in sorted(pair_words.get(best_pair, ())):
            add_word(wi, -1)
            segs[wi] = merge_symbols(segs[wi], best_pair, merged)
            add_word(wi, +1)
        pair_count.pop(best_pair, None)
        pair_words.pop(best_pair, None)

    return Vocab(tokens)


def segment_word(vocab: Vocab, word: str) -> list[int] | None:
    """Greedy longest-match split of one pretokenized word; None if stuck."""
    t2i = vocab.token_to_id
    ids = []
    start = 0
    while start < len(word):
        end = len(word)
        found = None
        while start < end:
            piece = word[start:end]
            if start > 0:
                piece = "##" + piece
            pid = t2i.get(piece)
            if pid is not None:
                found = pid
                break
            end -= 1
        if found is None:
            return None
        ids.append(found)
        start = end
    return ids


def encode(vocab: Vocab, text: str, max_len: int, pad: bool = False) -> TokenSequence:
    """Wrap with bos/eos, truncating content so the total stays <= max_len.

    Words that cannot be segmented map to <unk> wholesale. With pad=True the
    sequence is right-padded to exactly max_len.
    """
    if max_len < 2:
        raise ValueError("max_len must be >= 2 to fit bos and eos")
    content: list[int] = []
    for word in pretokenize(text):
        piece_ids = segment_word(vocab, word)
        if piece_ids is None:
            content.append(vocab.unk_id)
        else:
            content.extend(piece_ids)
    content = content[: max_len - 2]
    ids = [vocab.bos_id] + content + [vocab.eos_id]
    attn = len(ids)
    if pad and attn < max_len:
        ids = ids + [vocab.pad_id] * (max_len - attn)
    return TokenSequence(np.array(ids, dtype=np.int64), attn)


def decode(vocab: Vocab, seq: TokenSequence) -> str:
    """Inverse of encode up to pretokenization normalization; specials dropped."""
    specials = set(vocab.special_ids)
    words: list[str] = []
    for i in seq.ids:
        i = int(i)
        if i < 0 or i >= len(vocab):
            raise ValueError(f"token id {i} out of range for vocab of size {len(vocab)}")
        if i in specials:
            continue
        tok = vocab.id_to_token[i]
        if tok.startswith("##") and words:
            words[-1] += tok[2:]
        else:
            words.append(tok.removeprefix("##"))
    return " ".join(words)


def token_length(vocab: Vocab, text: str) -> int:
    """Untruncated sequence length (content pieces + bos + eos)."""
    n = 2
    for word in pretokenize(text):
        piece_ids = segment_word(vocab, word)
        n += 1 if piece_ids is None else len(piece_ids)
    return n


def count_long_texts(vocab: Vocab, texts: list[str], threshold: int = 512) -> int:
    """How many texts exceed the context threshold under this vocabulary."""
    return sum(1 for t in texts if token_length(vocab, t) > threshold)


def filter_long_texts(vocab: Vocab, texts: list[str], min_tokens: int) -> list[str]:
    """Keep only texts of at least min_tokens (pretraining corpus predicate)."""
    return [t for t in texts if token_length(vocab, t) >= min_tokens]


def batch_ids(seqs: list[TokenSequence], vocab: Vocab, width: int | None = None):
    """Stack sequences into (ids, valid) arrays, right-padding to a common width."""
    if width is None:
        width = max(len(s.ids) for s in seqs)
    ids = np.full((len(seqs), width), vocab.pad_id, dtype=np.int64)
    valid = np.zeros((len(seqs), width), dtype=bool)
    for r, s in enumerate(seqs):
        n = len(s.ids)
        if n > width:
            raise ValueError(f"sequence of length {n} exceeds batch width {width}")
        ids[r, :n] = s.ids
        valid[r, : s.attention_length] = True
    return ids, valid


def save_vocab(vocab: Vocab, path: str | Path) -> None:
    Path(path).write_text("\n".join(vocab.id_to_token) + "\n", encoding="utf-8")


def load_vocab(path: str | Path) -> Vocab:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return Vocab([ln for ln in lines])
