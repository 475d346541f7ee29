"""Morphosyntactic evaluation in the CoNLL 2018 shared-task style.

Gold and system corpora must carry the same raw text (concatenated forms
after whitespace removal).  Words are aligned by character spans, with
longest-common-subsequence alignment inside multiword-token regions.
The metric definitions follow the shared task exactly:

- UPOS/XPOS/UFeats/Lemmas count aligned words with equal annotation,
  UFeats restricted to the universal feature subset and deprels stripped
  of language-specific subtypes;
- UAS counts aligned words with aligned heads, LAS additionally requires
  the (base) relation label;
- MLAS restricts LAS to content words and additionally requires UPOS,
  the universal features and matching functional children (their
  alignment, deprel, UPOS and features);
- BLEX replaces MLAS's morphology condition with lemma equality.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from typing import Callable, Sequence

from ..corpus import Corpus, Sentence
from .counts import PrfCounts

CONTENT_DEPRELS = {
    "nsubj", "obj", "iobj", "csubj", "ccomp", "xcomp", "obl", "vocative",
    "expl", "dislocated", "advcl", "advmod", "discourse", "nmod", "appos",
    "nummod", "acl", "amod", "conj", "fixed", "flat", "compound", "list",
    "parataxis", "orphan", "goeswith", "reparandum", "root", "dep",
}

FUNCTIONAL_DEPRELS = {"aux", "cop", "mark", "det", "clf", "case", "cc"}

UNIVERSAL_FEATURES = {
    "PronType", "NumType", "Poss", "Reflex", "Foreign", "Abbr", "Gender",
    "Animacy", "Number", "Case", "Definite", "Degree", "VerbForm", "Mood",
    "Tense", "Aspect", "Voice", "Evident", "Polarity", "Person", "Polite",
}

_NOT_ALIGNED = "<not aligned>"


class ConlluEvalError(Exception):
    """Evaluation precondition violated (text mismatch, bad trees)."""


@dataclass(eq=False)
class _Word:
    form: str
    lemma: str
    upos: str
    xpos: str
    feats: str
    deprel: str
    span: tuple[int, int]
    is_multiword: bool
    parent: "_Word | None" = None
    functional_children: list["_Word"] = field(default_factory=list)

    @property
    def is_content(self) -> bool:
        return self.deprel in CONTENT_DEPRELS

    @property
    def is_functional(self) -> bool:
        return self.deprel in FUNCTIONAL_DEPRELS


def _strip_spaces(text: str) -> str:
    return "".join(c for c in text if unicodedata.category(c) != "Zs")


def _filter_feats(ufeats) -> str:
    if not ufeats:
        return "_"
    kept = sorted(
        f"{name}={value}" for name, value in ufeats if name in UNIVERSAL_FEATURES
    )
    return "|".join(kept) if kept else "_"


def _multiword_ranges(sentence: Sentence) -> list[tuple[int, int]]:
    """(first word index, last word index), 0-based, per multiword row."""
    ranges = []
    for position, columns in sentence.extra_rows:
        token_id = columns[0]
        if "-" not in token_id:
            continue
        start_str, _, end_str = token_id.partition("-")
        try:
            start, end = int(start_str), int(end_str)
        except ValueError:
            continue
        ranges.append((start - 1, end - 1, columns[1]))
    return ranges


def _flatten(corpus: Corpus) -> tuple[list[str], list[_Word]]:
    """Characters of the raw text plus one _Word per syntactic word."""
    characters: list[str] = []
    words: list[_Word] = []
    for sentence in corpus.sentences():
        n = len(sentence.tokens)
        sentence_words: list[_Word] = []
        mwt_cover: dict[int, tuple[int, int]] = {}
        offset = len(characters)
        spans_by_word: dict[int, tuple[int, int]] = {}
        cursor = offset
        ranges = _multiword_ranges(sentence)
        covered: set[int] = set()
        range_info: dict[int, tuple[str, int]] = {}
        for start, end, form in ranges:
            for w in range(start, min(end + 1, n)):
                covered.add(w)
            range_info[start] = (form, min(end, n - 1))
        w = 0
        while w < n:
            if w in range_info:
                form, last = range_info[w]
                text = _strip_spaces(form)
                span = (cursor, cursor + len(text))
                characters.extend(text)
                cursor += len(text)
                for i in range(w, last + 1):
                    spans_by_word[i] = span
                    mwt_cover[i] = span
                w = last + 1
            else:
                text = _strip_spaces(sentence.tokens[w].form)
                spans_by_word[w] = (cursor, cursor + len(text))
                characters.extend(text)
                cursor += len(text)
                w += 1

        for i, token in enumerate(sentence.tokens):
            deprel = (token.deprel or "_").split(":")[0]
            sentence_words.append(
                _Word(
                    form=_strip_spaces(token.form),
                    lemma=token.lemma or "_",
                    upos=token.upos or "_",
                    xpos=token.xpos or "_",
                    feats=_filter_feats(token.ufeats),
                    deprel=deprel,
                    span=spans_by_word[i],
                    is_multiword=i in mwt_cover,
                )
            )

        heads = [token.head for token in sentence.tokens]
        if any(h is None for h in heads):
            raise ConlluEvalError("every word must carry a HEAD for evaluation")
        roots = [i for i, h in enumerate(heads) if h == 0]
        if len(roots) == 0:
            raise ConlluEvalError("unrooted sentence")
        if len(roots) > 1:
            raise ConlluEvalError("multiple roots in sentence")
        for i, head in enumerate(heads):
            if head != 0:
                sentence_words[i].parent = sentence_words[head - 1]
        for i in range(n):
            node, steps = i, 0
            while heads[node] != 0:
                node = heads[node] - 1
                steps += 1
                if steps > n:
                    raise ConlluEvalError("cycle in dependency tree")
        for word in sentence_words:
            if word.parent is not None and word.is_functional:
                word.parent.functional_children.append(word)
        words.extend(sentence_words)
    return characters, words


def _merge_spans(spans: list[tuple[int, int]]) -> list[tuple[int, int]]:
    merged: list[tuple[int, int]] = []
    for span in sorted(spans):
        if merged and span[0] < merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], span[1]))
        else:
            merged.append(span)
    return merged


def _lcs_pairs(gold: list[_Word], system: list[_Word]) -> list[tuple[_Word, _Word]]:
    a = [w.form.lower() for w in gold]
    b = [w.form.lower() for w in system]
    table = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                table[i][j] = table[i - 1][j - 1] + 1
            else:
                table[i][j] = max(table[i - 1][j], table[i][j - 1])
    pairs = []
    i, j = len(a), len(b)
    while i > 0 and j > 0:
        if a[i - 1] == b[j - 1] and table[i][j] == table[i - 1][j - 1] + 1:
            pairs.append((gold[i - 1], system[j - 1]))
            i -= 1
            j -= 1
        elif table[i - 1][j] >= table[i][j - 1]:
            i -= 1
        else:
            j -= 1
    return pairs[::-1]


def _align_words(
    gold: list[_Word], system: list[_Word]
) -> tuple[list[tuple[_Word, _Word]], dict[int, _Word]]:
    multiword_spans = _merge_spans(
        [w.span for w in gold + system if w.is_multiword]
    )
    pairs: list[tuple[_Word, _Word]] = []
    gi = si = 0
    for span in multiword_spans:
        while (
            gi < len(gold)
            and si < len(system)
            and (gold[gi].span[0] < span[0] or system[si].span[0] < span[0])
        ):
            if gold[gi].span == system[si].span:
                pairs.append((gold[gi], system[si]))
                gi += 1
                si += 1
            elif gold[gi].span[0] <= system[si].span[0]:
                gi += 1
            else:
                si += 1
        gold_chunk = []
        while gi < len(gold) and gold[gi].span[1] <= span[1]:
            gold_chunk.append(gold[gi])
            gi += 1
        system_chunk = []
        while si < len(system) and system[si].span[1] <= span[1]:
            system_chunk.append(system[si])
            si += 1
        pairs.extend(_lcs_pairs(gold_chunk, system_chunk))
    while gi < len(gold) and si < len(system):
        if gold[gi].span == system[si].span:
            pairs.append((gold[gi], system[si]))
            gi += 1
            si += 1
        elif gold[gi].span[0] <= system[si].span[0]:
            gi += 1
        else:
            si += 1
    system_to_gold = {id(s): g for g, s in pairs}
    return pairs, system_to_gold


def _alignment_score(
    pairs: list[tuple[_Word, _Word]],
    gold: list[_Word],
    system: list[_Word],
    system_to_gold: dict[int, _Word],
    key: Callable[[_Word, Callable[[_Word | None], object]], object] | None = None,
    keep: Callable[[_Word], bool] | None = None,
) -> PrfCounts:
    if keep is None:
        gold_total, system_total = len(gold), len(system)
        considered = pairs
    else:
        gold_total = sum(1 for w in gold if keep(w))
        system_total = sum(1 for w in system if keep(w))
        considered = [p for p in pairs if keep(p[0])]
    if key is None:
        return PrfCounts(len(considered), system_total, gold_total)

    def via_gold(word: _Word | None):
        return word

    def via_alignment(word: _Word | None):
        if word is None:
            return None
        return system_to_gold.get(id(word), _NOT_ALIGNED)

    correct = 0
    for gold_word, system_word in considered:
        if key(gold_word, via_gold) == key(system_word, via_alignment):
            correct += 1
    return PrfCounts(correct, system_total, gold_total)


@dataclass(frozen=True)
class ConlluEvalReport:
    """The eight shared-task metrics, each as raw counts; F1 values are
    percentages in [0, 100]."""

    upos: PrfCounts
    xpos: PrfCounts
    ufeats: PrfCounts
    lemmas: PrfCounts
    uas: PrfCounts
    las: PrfCounts
    mlas: PrfCounts
    blex: PrfCounts

    METRIC_NAMES = ("UPOS", "XPOS", "UFeats", "Lemmas", "UAS", "LAS", "MLAS", "BLEX")

    def scores(self) -> dict[str, float]:
        return {
            name: getattr(self, name.lower()).f1_percent for name in self.METRIC_NAMES
        }

    def to_table(self) -> str:
        lines = ["Metric     |     F1"]
        lines.append("-----------+-------")
        for name, value in self.scores().items():
            lines.append(f"{name:<10} | {value:6.2f}")
        return "\n".join(lines)


def eval_conllu(gold: Corpus, system: Corpus) -> ConlluEvalReport:
    """Score ``system`` against ``gold``; both must share the raw text."""
    gold_chars, gold_words = _flatten(gold)
    system_chars, system_words = _flatten(system)
    if gold_chars != system_chars:
        prefix = 0
        for g, s in zip(gold_chars, system_chars):
            if g != s:
                break
            prefix += 1
        raise ConlluEvalError(
            "gold and system raw texts differ "
            f"(lengths {len(gold_chars)} vs {len(system_chars)}, "
            f"first difference at character {prefix})"
        )

    pairs, system_to_gold = _align_words(gold_words, system_words)

    def score(key=None, keep=None) -> PrfCounts:
        return _alignment_score(pairs, gold_words, system_words, system_to_gold, key, keep)

    def lemma_key(word: _Word, resolve):
        gold_side = resolve(word)
        reference = gold_side if gold_side not in (None, _NOT_ALIGNED) else word
        return word.lemma if reference.lemma != "_" else "_"

    return ConlluEvalReport(
        upos=score(lambda w, _: w.upos),
        xpos=score(lambda w, _: w.xpos),
        ufeats=score(lambda w, _: w.feats),
        lemmas=score(lemma_key),
        uas=score(lambda w, resolve: resolve(w.parent)),
        las=score(lambda w, resolve: (resolve(w.parent), w.deprel)),
        mlas=score(
            lambda w, resolve: (
                resolve(w.parent),
                w.deprel,
                w.upos,
                w.feats,
                [
                    (resolve(c), c.deprel, c.upos, c.feats)
                    for c in w.functional_children
                ],
            ),
            keep=lambda w: w.is_content,
        ),
        blex=score(
            lambda w, resolve: (resolve(w.parent), w.deprel, lemma_key(w, resolve)),
            keep=lambda w: w.is_content,
        ),
    )
