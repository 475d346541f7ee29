"""Corpus model and ingestion.

Documents are ordered lists of sentences; sentences are ordered lists of
tokens carrying optional morphology, dependency and entity annotation.
Supported inputs: whitespace-tokenized plain text (blank-line separated
documents) and CoNLL-U (``# newdoc`` starts documents).  All values are
immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import io
import math
import random
from dataclasses import dataclass, field
from typing import IO, Iterable, Sequence


class CorpusError(Exception):
    """Malformed corpus input."""


class ConlluParseError(CorpusError):
    """CoNLL-U syntax violation; carries the 1-based line number."""

    def __init__(self, line_number: int, message: str):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class Token:
    """Single syntactic word.

    ``head`` is a 0-based-root index: 0 means the artificial root, i > 0
    the i-th token of the sentence.  ``ufeats`` is a tuple of (feature,
    value) pairs, unique by feature and sorted lexicographically.
    ``deps`` and ``misc`` are unparsed passthrough columns kept so that
    CoNLL-U round-trips are byte-exact.
    """

    form: str
    lemma: str | None = None
    upos: str | None = None
    xpos: str | None = None
    ufeats: tuple[tuple[str, str], ...] | None = None
    head: int | None = None
    deprel: str | None = None
    deps: str | None = None
    misc: str | None = None

    def __post_init__(self):
        if not self.form:
            raise CorpusError("token form must be non-empty")
        if self.head is not None and self.head < 0:
            raise CorpusError(f"head must be >= 0, got {self.head}")
        if self.ufeats is not None:
            names = [name for name, _ in self.ufeats]
            if len(set(names)) != len(names):
                raise CorpusError(f"duplicate feature names in {self.ufeats}")
            if list(self.ufeats) != sorted(self.ufeats):
                raise CorpusError("ufeats must be sorted lexicographically")


#: (start, end, label) with 1-based inclusive token indices.
EntitySpan = tuple[int, int, str]


@dataclass(frozen=True)
class Sentence:
    """Ordered tokens plus (possibly nested) entity spans.

    ``comments`` keeps CoNLL-U comment lines verbatim; ``extra_rows``
    keeps multiword-token ranges and empty-node lines as raw column
    tuples, positioned by the number of word lines preceding them.
    """

    tokens: tuple[Token, ...]
    entity_spans: tuple[EntitySpan, ...] = ()
    comments: tuple[str, ...] = ()
    extra_rows: tuple[tuple[int, tuple[str, ...]], ...] = ()

    def __post_init__(self):
        n = len(self.tokens)
        for tok in self.tokens:
            if tok.head is not None and tok.head > n:
                raise CorpusError(f"head {tok.head} out of range for length {n}")
        for start, end, label in self.entity_spans:
            if not (1 <= start <= end <= n):
                raise CorpusError(f"entity span ({start},{end},{label}) out of range")
        for a in self.entity_spans:
            for b in self.entity_spans:
                if a is not b and _spans_cross(a, b):
                    raise CorpusError(f"entity spans {a} and {b} cross")

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def forms(self) -> list[str]:
        return [tok.form for tok in self.tokens]

    @property
    def text(self) -> str:
        return " ".join(self.forms)


def _spans_cross(a: EntitySpan, b: EntitySpan) -> bool:
    (s1, e1, _), (s2, e2, _) = a, b
    overlap = s1 <= e2 and s2 <= e1
    nested = (s1 <= s2 and e2 <= e1) or (s2 <= s1 and e1 <= e2)
    return overlap and not nested


@dataclass(frozen=True)
class Document:
    """Ordered sentences under one document id."""

    id: str
    sentences: tuple[Sentence, ...]

    @property
    def token_count(self) -> int:
        return sum(len(s) for s in self.sentences)


@dataclass(frozen=True)
class Corpus:
    """Ordered documents; ``token_count`` is recomputed at construction."""

    documents: tuple[Document, ...]
    token_count: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(
            self, "token_count", sum(d.token_count for d in self.documents)
        )

    def sentences(self) -> Iterable[Sentence]:
        for doc in self.documents:
            yield from doc.sentences


@dataclass(frozen=True)
class FoldSplit:
    """One fold of a k-fold split; the three id lists are disjoint."""

    fold_index: int
    train_ids: tuple[str, ...]
    dev_ids: tuple[str, ...]
    test_ids: tuple[str, ...]


def _read_bytes(stream: bytes | IO[bytes]) -> bytes:
    if isinstance(stream, (bytes, bytearray)):
        return bytes(stream)
    return stream.read()


def _decode_utf8(raw: bytes) -> str:
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise CorpusError(f"invalid UTF-8 at byte offset {exc.start}") from exc


def ingest_plaintext(stream: bytes | IO[bytes], doc_separator: str = "blank-line") -> Corpus:
    """Read plain text into a Corpus: one document per blank-line block,
    one sentence per line, tokens split on whitespace."""
    if doc_separator != "blank-line":
        raise ValueError(f"unsupported doc_separator: {doc_separator!r}")
    text = _decode_utf8(_read_bytes(stream))

    documents = []
    block: list[Sentence] = []
    for line in text.split("\n"):
        forms = line.split()
        if not forms:
            if block:
                documents.append(Document(f"doc{len(documents) + 1}", tuple(block)))
                block = []
            continue
        block.append(Sentence(tuple(Token(form=f) for f in forms)))
    if block:
        documents.append(Document(f"doc{len(documents) + 1}", tuple(block)))
    return Corpus(tuple(documents))


_CONLLU_COLUMNS = 10


def _parse_feats(raw: str, line_number: int) -> tuple[tuple[str, str], ...] | None:
    if raw == "_":
        return None
    pairs = []
    for item in raw.split("|"):
        name, sep, value = item.partition("=")
        if not sep or not name:
            raise ConlluParseError(line_number, f"malformed feature {item!r}")
        pairs.append((name, value))
    names = [name for name, _ in pairs]
    if len(set(names)) != len(names):
        raise ConlluParseError(line_number, f"duplicate feature names in {raw!r}")
    return tuple(sorted(pairs))


def ingest_conllu(stream: bytes | IO[bytes]) -> Corpus:
    """Parse CoNLL-U into a Corpus.

    Multiword-token ranges and empty nodes are recorded verbatim in
    ``Sentence.extra_rows`` (excluded from head indexing); comments are
    preserved verbatim.  ``# newdoc`` starts a new document.
    """
    text = _decode_utf8(_read_bytes(stream))
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()

    documents: list[Document] = []
    doc_sentences: list[Sentence] = []
    doc_id: str | None = None
    pending_doc_id: str | None = None
    saw_any = False

    comments: list[str] = []
    words: list[Token] = []
    extra_rows: list[tuple[int, tuple[str, ...]]] = []
    new_doc_requested = False

    def flush_document():
        nonlocal doc_sentences, doc_id
        if doc_sentences:
            documents.append(
                Document(doc_id or f"doc{len(documents) + 1}", tuple(doc_sentences))
            )
        doc_sentences = []
        doc_id = None

    def flush_sentence(line_number: int):
        nonlocal comments, words, extra_rows, new_doc_requested, doc_id, pending_doc_id
        if not words and not comments and not extra_rows:
            return
        if not words:
            raise ConlluParseError(line_number, "sentence contains no word lines")
        if new_doc_requested:
            flush_document()
            doc_id = pending_doc_id
            pending_doc_id = None
            new_doc_requested = False
        try:
            sentence = Sentence(
                tokens=tuple(words),
                comments=tuple(comments),
                extra_rows=tuple(extra_rows),
            )
        except CorpusError as exc:
            raise ConlluParseError(line_number, str(exc)) from exc
        doc_sentences.append(sentence)
        comments, words, extra_rows = [], [], []

    for idx, line in enumerate(lines, start=1):
        if line == "":
            flush_sentence(idx)
            continue
        saw_any = True
        if line.startswith("#"):
            if words:
                raise ConlluParseError(idx, "comment after word lines")
            comments.append(line)
            if line.startswith("# newdoc"):
                new_doc_requested = True
                _, sep, value = line.partition("=")
                pending_doc_id = value.strip() if sep else None
            continue

        columns = line.split("\t")
        if len(columns) != _CONLLU_COLUMNS:
            raise ConlluParseError(
                idx, f"expected {_CONLLU_COLUMNS} tab-separated columns, got {len(columns)}"
            )
        token_id = columns[0]
        if "-" in token_id or "." in token_id:
            # Multiword-token range or empty node: passthrough only.
            extra_rows.append((len(words), tuple(columns)))
            continue
        if not token_id.isdigit() or int(token_id) != len(words) + 1:
            raise ConlluParseError(
                idx, f"unexpected token id {token_id!r}, expected {len(words) + 1}"
            )
        head_raw = columns[6]
        if head_raw == "_":
            head = None
        else:
            try:
                head = int(head_raw)
            except ValueError:
                raise ConlluParseError(idx, f"non-integer HEAD {head_raw!r}") from None
            if head < 0:
                raise ConlluParseError(idx, f"negative HEAD {head}")
        try:
            words.append(
                Token(
                    form=columns[1],
                    lemma=None if columns[2] == "_" else columns[2],
                    upos=None if columns[3] == "_" else columns[3],
                    xpos=None if columns[4] == "_" else columns[4],
                    ufeats=_parse_feats(columns[5], idx),
                    head=head,
                    deprel=None if columns[7] == "_" else columns[7],
                    deps=None if columns[8] == "_" else columns[8],
                    misc=None if columns[9] == "_" else columns[9],
                )
            )
        except CorpusError as exc:
            raise ConlluParseError(idx, str(exc)) from exc

    flush_sentence(len(lines) + 1)
    flush_document()
    if not saw_any:
        return Corpus(())
    return Corpus(tuple(documents))


def _feats_to_str(ufeats: tuple[tuple[str, str], ...] | None) -> str:
    if ufeats is None:
        return "_"
    return "|".join(f"{name}={value}" for name, value in ufeats)


def serialize_conllu(corpus: Corpus) -> str:
    """Inverse of :func:`ingest_conllu`: byte-exact for the ten annotated
    columns, comments and extra rows of well-formed inputs."""
    out = io.StringIO()
    for doc in corpus.documents:
        for sentence in doc.sentences:
            for comment in sentence.comments:
                out.write(comment + "\n")
            extra = {pos: [] for pos, _ in sentence.extra_rows}
            for pos, columns in sentence.extra_rows:
                extra[pos].append(columns)
            for i, tok in enumerate(sentence.tokens):
                for columns in extra.get(i, ()):
                    out.write("\t".join(columns) + "\n")
                out.write(
                    "\t".join(
                        [
                            str(i + 1),
                            tok.form,
                            tok.lemma or "_",
                            tok.upos or "_",
                            tok.xpos or "_",
                            _feats_to_str(tok.ufeats),
                            "_" if tok.head is None else str(tok.head),
                            tok.deprel or "_",
                            tok.deps or "_",
                            tok.misc or "_",
                        ]
                    )
                    + "\n"
                )
            for columns in extra.get(len(sentence.tokens), ()):
                out.write("\t".join(columns) + "\n")
            out.write("\n")
    return out.getvalue()


def block_shuffle(doc: Document, max_block_words: int = 100, seed: int = 0) -> Document:
    """Permute greedy sentence blocks of at most ``max_block_words`` words.

    Grouping is greedy left-to-right; a single sentence longer than the
    cap forms its own block.  The sentence multiset is preserved.
    """
    if max_block_words < 1:
        raise ValueError("max_block_words must be >= 1")
    blocks: list[list[Sentence]] = []
    current: list[Sentence] = []
    current_words = 0
    for sentence in doc.sentences:
        n = len(sentence)
        if current and current_words + n > max_block_words:
            blocks.append(current)
            current, current_words = [], 0
        current.append(sentence)
        current_words += n
    if current:
        blocks.append(current)

    rng = random.Random(seed)
    rng.shuffle(blocks)
    return Document(doc.id, tuple(s for block in blocks for s in block))


def filter_min_tokens(corpus: Corpus, min_tokens: int = 400) -> Corpus:
    """Keep exactly the documents with at least ``min_tokens`` tokens."""
    if min_tokens < 0:
        raise ValueError("min_tokens must be >= 0")
    return Corpus(tuple(d for d in corpus.documents if d.token_count >= min_tokens))


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def kfold_split(
    item_ids: Sequence[str],
    k: int = 10,
    dev_fraction: float = 0.10,
    seed: int = 0,
) -> list[FoldSplit]:
    """Deterministic k-fold split with a per-fold dev carve-out.

    Test folds partition ``item_ids`` with sizes differing by at most one;
    per fold, ``round(dev_fraction * |non-test|)`` items (half-up) are
    drawn from the non-test remainder as the dev set.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if len(item_ids) < k:
        raise ValueError(f"need at least k={k} items, got {len(item_ids)}")
    ids = [str(i) for i in item_ids]
    rng = random.Random(seed)
    shuffled = ids[:]
    rng.shuffle(shuffled)

    folds = []
    for fold in range(k):
        test = shuffled[fold::k]
        test_set = set(test)
        rest = [i for i in shuffled if i not in test_set]
        n_dev = _round_half_up(dev_fraction * len(rest))
        dev = rng.sample(rest, n_dev)
        dev_set = set(dev)
        train = [i for i in rest if i not in dev_set]
        folds.append(FoldSplit(fold, tuple(train), tuple(dev), tuple(test)))
    return folds


def write_fold_splits(splits: Sequence[FoldSplit]) -> str:
    """Serialize folds to the line format ``fold<TAB>role<TAB>id``."""
    lines = []
    for split in splits:
        for role, ids in (
            ("train", split.train_ids),
            ("dev", split.dev_ids),
            ("test", split.test_ids),
        ):
            for item in ids:
                lines.append(f"{split.fold_index}\t{role}\t{item}")
    return "\n".join(lines) + "\n"


def read_fold_splits(text: str) -> list[FoldSplit]:
    """Inverse of :func:`write_fold_splits`."""
    by_fold: dict[int, dict[str, list[str]]] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != 3 or parts[1] not in ("train", "dev", "test"):
            raise CorpusError(f"line {number}: malformed fold line {line!r}")
        fold = int(parts[0])
        by_fold.setdefault(fold, {"train": [], "dev": [], "test": []})
        by_fold[fold][parts[1]].append(parts[2])
    return [
        FoldSplit(fold, tuple(r["train"]), tuple(r["dev"]), tuple(r["test"]))
        for fold, r in sorted(by_fold.items())
    ]
