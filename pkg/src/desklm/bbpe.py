"""Byte-level BPE tokenizer with a bounded vocabulary.

The base alphabet is the 256 byte values, so any UTF-8 text round-trips
exactly through encode/decode.  Pre-tokenization is a simplified
whitespace rule: a pre-token is an optional single leading space plus a
run of non-whitespace; remaining whitespace runs stand alone.  Merges
never cross pre-token boundaries.  No unicode normalization is applied.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass, field
from typing import IO, Iterable, NamedTuple

from .corpus import Corpus


class BbpeError(Exception):
    """Tokenizer training or format failure."""


class SpecialTokens(NamedTuple):
    bos: int
    eos: int
    pad: int
    mask: int
    unk: int


SPECIAL_TOKEN_BYTES = (b"<s>", b"</s>", b"<pad>", b"<mask>", b"<unk>")
NUM_SPECIALS = len(SPECIAL_TOKEN_BYTES)
FIRST_BYTE_ID = NUM_SPECIALS
FIRST_MERGE_ID = NUM_SPECIALS + 256

_PRETOKEN_RE = re.compile(r" ?\S+|\s+(?!\S)|\s+")

# Cache key for the merge-rank table; an object() can never collide with a
# str pre-token key.
_RANKS_KEY = object()


@dataclass(frozen=True)
class ByteVocab:
    """Learned merge table plus token inventory.

    Ids 0..4 are the special tokens, ids 5..260 the single bytes, higher
    ids the merge results in training order.
    """

    tokens: tuple[bytes, ...]
    merges: tuple[tuple[int, int, int], ...]
    special_tokens: SpecialTokens = SpecialTokens(0, 1, 2, 3, 4)
    _pretoken_cache: dict = field(
        default_factory=dict, compare=False, repr=False, hash=False
    )

    def __post_init__(self):
        for i, raw in enumerate(SPECIAL_TOKEN_BYTES):
            if self.tokens[i] != raw:
                raise BbpeError(f"special token {i} must be {raw!r}")
        for b in range(256):
            if self.tokens[FIRST_BYTE_ID + b] != bytes([b]):
                raise BbpeError(f"token {FIRST_BYTE_ID + b} must be byte {b:#04x}")
        for n, (left, right, result) in enumerate(self.merges):
            if result != FIRST_MERGE_ID + n:
                raise BbpeError(f"merge {n} result id must be {FIRST_MERGE_ID + n}")
            if self.tokens[result] != self.tokens[left] + self.tokens[right]:
                raise BbpeError(f"merge {n} output does not concatenate its operands")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def merge_ranks(self) -> dict[tuple[int, int], tuple[int, int]]:
        """(left, right) -> (rank, result id), cached after first use."""
        ranks = self._pretoken_cache.get(_RANKS_KEY)
        if ranks is None:
            ranks = {
                (left, right): (rank, result)
                for rank, (left, right, result) in enumerate(self.merges)
            }
            self._pretoken_cache[_RANKS_KEY] = ranks
        return ranks


@dataclass(frozen=True)
class Encoding:
    """Token ids plus per-id (byte start, byte end) offsets into the source."""

    ids: tuple[int, ...]
    offsets: tuple[tuple[int, int], ...]


def _pretokenize(text: str) -> list[str]:
    return _PRETOKEN_RE.findall(text)


def _corpus_pretoken_counts(corpus: Corpus) -> Counter:
    counts: Counter = Counter()
    for sentence in corpus.sentences():
        counts.update(_pretokenize(sentence.text))
    return counts


def train_bbpe(corpus: Corpus, vocab_cap: int = 52000) -> ByteVocab:
    """Train the merge table on ``corpus`` up to ``vocab_cap`` tokens.

    The most frequent adjacent pair is merged each round; ties are broken
    by the pair whose operand tokens were created earliest, then by
    lexicographic byte order.  Pairs occurring only once are never merged.
    """
    if vocab_cap < 256 + NUM_SPECIALS:
        raise ValueError(f"vocab_cap must be >= {256 + NUM_SPECIALS}")
    if corpus.token_count == 0:
        raise BbpeError("cannot train on an empty corpus")

    tokens: list[bytes] = list(SPECIAL_TOKEN_BYTES) + [bytes([b]) for b in range(256)]
    creation_epoch: dict[int, int] = {i: 0 for i in range(len(tokens))}
    merges: list[tuple[int, int, int]] = []

    words: list[list[int]] = []
    word_counts: list[int] = []
    for pretoken, count in _corpus_pretoken_counts(corpus).items():
        words.append([FIRST_BYTE_ID + b for b in pretoken.encode("utf-8")])
        word_counts.append(count)

    while len(tokens) < vocab_cap:
        pair_counts: Counter = Counter()
        for word, count in zip(words, word_counts):
            for pair in zip(word, word[1:]):
                pair_counts[pair] += count
        if not pair_counts:
            break
        best_count = max(pair_counts.values())
        if best_count < 2:
            break
        best = min(
            (pair for pair, c in pair_counts.items() if c == best_count),
            key=lambda p: (
                max(creation_epoch[p[0]], creation_epoch[p[1]]),
                tokens[p[0]],
                tokens[p[1]],
            ),
        )
        new_id = len(tokens)
        tokens.append(tokens[best[0]] + tokens[best[1]])
        merges.append((best[0], best[1], new_id))
        creation_epoch[new_id] = len(merges)
        for word in words:
            _apply_merge_inplace(word, best, new_id)

    return ByteVocab(tokens=tuple(tokens), merges=tuple(merges))


def _apply_merge_inplace(word: list[int], pair: tuple[int, int], new_id: int) -> None:
    i = 0
    while i < len(word) - 1:
        if word[i] == pair[0] and word[i + 1] == pair[1]:
            word[i : i + 2] = [new_id]
        else:
            i += 1


def _encode_pretoken(vocab: ByteVocab, pretoken: str) -> tuple[list[int], list[int]]:
    """Ids plus per-id byte lengths for one pre-token (cached per vocab)."""
    cached = vocab._pretoken_cache.get(pretoken)
    if cached is not None:
        return cached
    raw = pretoken.encode("utf-8")
    ids = [FIRST_BYTE_ID + b for b in raw]
    lengths = [1] * len(ids)
    ranks = vocab.merge_ranks
    while len(ids) > 1:
        best_rank, best_pos = None, None
        for pos in range(len(ids) - 1):
            hit = ranks.get((ids[pos], ids[pos + 1]))
            if hit is not None and (best_rank is None or hit[0] < best_rank):
                best_rank, best_pos = hit[0], pos
        if best_pos is None:
            break
        pair = (ids[best_pos], ids[best_pos + 1])
        new_id = ranks[pair][1]
        pos = 0
        while pos < len(ids) - 1:
            if ids[pos] == pair[0] and ids[pos + 1] == pair[1]:
                ids[pos : pos + 2] = [new_id]
                lengths[pos : pos + 2] = [lengths[pos] + lengths[pos + 1]]
            else:
                pos += 1
    result = (ids, lengths)
    vocab._pretoken_cache[pretoken] = result
    return result


def encode(vocab: ByteVocab, text: str) -> Encoding:
    """Tokenize ``text``; offsets cover its UTF-8 bytes exactly."""
    ids: list[int] = []
    offsets: list[tuple[int, int]] = []
    byte_pos = 0
    for pretoken in _pretokenize(text):
        token_ids, lengths = _encode_pretoken(vocab, pretoken)
        for token_id, length in zip(token_ids, lengths):
            ids.append(token_id)
            offsets.append((byte_pos, byte_pos + length))
            byte_pos += length
    return Encoding(ids=tuple(ids), offsets=tuple(offsets))


def decode(vocab: ByteVocab, ids: Iterable[int]) -> str:
    """Concatenate token bytes and UTF-8-decode with replacement."""
    parts = []
    for token_id in ids:
        if not 0 <= token_id < len(vocab.tokens):
            raise BbpeError(f"token id {token_id} out of range")
        parts.append(vocab.tokens[token_id])
    return b"".join(parts).decode("utf-8", errors="replace")


def save_vocab(vocab: ByteVocab) -> tuple[str, str]:
    """Serialize to (vocabulary file, merge file) text streams.

    Vocabulary lines are ``id<TAB>hex bytes``; merge lines are
    ``left-id<TAB>right-id<TAB>result-id`` in training order.
    """
    vocab_lines = [f"{i}\t{raw.hex()}" for i, raw in enumerate(vocab.tokens)]
    merge_lines = [f"{l}\t{r}\t{res}" for l, r, res in vocab.merges]
    return "\n".join(vocab_lines) + "\n", "".join(f"{line}\n" for line in merge_lines)


def load_vocab(vocab_stream: str | IO[str], merge_stream: str | IO[str]) -> ByteVocab:
    """Inverse of :func:`save_vocab`; validates merge consistency."""
    vocab_text = vocab_stream if isinstance(vocab_stream, str) else vocab_stream.read()
    merge_text = merge_stream if isinstance(merge_stream, str) else merge_stream.read()

    tokens: list[bytes] = []
    for number, line in enumerate(vocab_text.splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise BbpeError(f"vocab line {number}: expected 2 columns")
        try:
            token_id, raw = int(parts[0]), bytes.fromhex(parts[1])
        except ValueError as exc:
            raise BbpeError(f"vocab line {number}: {exc}") from None
        if token_id != len(tokens):
            raise BbpeError(f"vocab line {number}: ids must be sequential")
        tokens.append(raw)

    merges: list[tuple[int, int, int]] = []
    for number, line in enumerate(merge_text.splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise BbpeError(f"merge line {number}: expected 3 columns")
        try:
            left, right, result = (int(p) for p in parts)
        except ValueError:
            raise BbpeError(f"merge line {number}: non-integer id") from None
        for ref in (left, right, result):
            if not 0 <= ref < len(tokens):
                raise BbpeError(f"merge line {number}: unknown token reference {ref}")
        merges.append((left, right, result))

    try:
        return ByteVocab(tokens=tuple(tokens), merges=tuple(merges))
    except BbpeError as exc:
        raise BbpeError(f"inconsistent vocabulary/merge files: {exc}") from None
