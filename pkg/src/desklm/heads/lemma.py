"""Edit-script lemmatization.

A script is a small program mapping an inflected form to its lemma:
casing restorations plus prefix/suffix edit programs applied to the
lowercased form.  Scripts derived from different (form, lemma) pairs
often coincide, so deduplicating them yields a compact classification
inventory for the lemmatizer head.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

#: ("keep", n) copies n source characters, ("delete", n) drops them,
#: ("insert", text) emits text without consuming anything.
EditOp = tuple[str, object]


class EditScriptError(Exception):
    """Script application over-consumed its source form."""


@dataclass(frozen=True)
class EditScript:
    """Form-to-lemma transformation program.

    ``case_ops`` lists output positions to uppercase after the edits;
    ``prefix_ops`` consume from the front of the lowercased form and
    ``suffix_ops`` from its tail.
    """

    case_ops: tuple[int, ...]
    prefix_ops: tuple[EditOp, ...]
    suffix_ops: tuple[EditOp, ...]

    def __str__(self) -> str:
        def ops(program):
            return ",".join(
                f"{kind[0]}{value}" if kind != "insert" else f"+{value}"
                for kind, value in program
            )

        cases = ",".join(map(str, self.case_ops))
        return f"case[{cases}]|pre[{ops(self.prefix_ops)}]|suf[{ops(self.suffix_ops)}]"


IDENTITY_SCRIPT = EditScript((), (), ())


def _run_program(source: str, ops: Sequence[EditOp]) -> tuple[str, int]:
    """Run a program against ``source``; returns (output, consumed)."""
    out: list[str] = []
    cursor = 0
    for kind, value in ops:
        if kind == "keep":
            if cursor + value > len(source):
                raise EditScriptError(f"keep {value} over-consumes {source!r}")
            out.append(source[cursor : cursor + value])
            cursor += value
        elif kind == "delete":
            if cursor + value > len(source):
                raise EditScriptError(f"delete {value} over-consumes {source!r}")
            cursor += value
        elif kind == "insert":
            out.append(value)
        else:
            raise EditScriptError(f"unknown edit op {kind!r}")
    return "".join(out), cursor


def _consumed(ops: Sequence[EditOp]) -> int:
    return sum(value for kind, value in ops if kind in ("keep", "delete"))


def apply_edit_script(form: str, script: EditScript) -> str:
    """Deterministically apply ``script`` to ``form``."""
    lowered = form.lower()
    suffix_len = _consumed(script.suffix_ops)
    prefix_out, prefix_used = _run_program(lowered, script.prefix_ops)
    if prefix_used + suffix_len > len(lowered):
        raise EditScriptError(
            f"script consumes {prefix_used}+{suffix_len} characters "
            f"of {len(lowered)}-character form {form!r}"
        )
    middle = lowered[prefix_used : len(lowered) - suffix_len]
    suffix_out, _ = _run_program(lowered[len(lowered) - suffix_len :], script.suffix_ops)
    result = list(prefix_out + middle + suffix_out)
    for position in script.case_ops:
        if 0 <= position < len(result):
            result[position] = result[position].upper()
    return "".join(result)


def _longest_common_infix(a: str, b: str) -> tuple[int, int, int]:
    """(i, j, length) of the longest common substring; ties prefer the
    smallest i, then the smallest j."""
    best = (0, 0, 0)
    if not a or not b:
        return best
    previous = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        current = [0] * (len(b) + 1)
        for j in range(1, len(b) + 1):
            if a[i - 1] == b[j - 1]:
                current[j] = previous[j - 1] + 1
                length = current[j]
                if length > best[2]:
                    best = (i - length, j - length, length)
        previous = current
    return best


def _edit_program(source: str, target: str) -> tuple[EditOp, ...]:
    ops: list[EditOp] = []
    if source:
        ops.append(("delete", len(source)))
    if target:
        ops.append(("insert", target))
    return tuple(ops)


def derive_edit_script(form: str, lemma: str) -> EditScript:
    """Derive the canonical script turning ``form`` into ``lemma``.

    The longest common infix of the lowercased pair is kept; the changed
    prefix and suffix become minimal delete+insert programs.  Falls back
    to a whole-word replacement when the construction cannot reproduce
    the lemma exactly.
    """
    if not form or not lemma:
        raise ValueError("form and lemma must be non-empty")
    lowered_form = form.lower()
    lowered_lemma = lemma.lower()
    i, j, length = _longest_common_infix(lowered_form, lowered_lemma)
    if length == 0:
        return _replace_script(lowered_form, lemma)
    script = EditScript(
        case_ops=tuple(
            p for p, ch in enumerate(lemma) if p < len(lowered_lemma) and ch != lowered_lemma[p]
        ),
        prefix_ops=_edit_program(lowered_form[:i], lowered_lemma[:j]),
        suffix_ops=_edit_program(lowered_form[i + length :], lowered_lemma[j + length :]),
    )
    try:
        if apply_edit_script(form, script) == lemma:
            return script
    except EditScriptError:
        pass
    return _replace_script(lowered_form, lemma)


def _replace_script(lowered_form: str, lemma: str) -> EditScript:
    # The inserted text carries the lemma verbatim, so no case ops needed.
    return EditScript(
        case_ops=(),
        prefix_ops=(("delete", len(lowered_form)), ("insert", lemma)),
        suffix_ops=(),
    )


@dataclass(frozen=True)
class LemmaCategoryInventory:
    """Deduplicated scripts ordered by descending frequency, then first
    occurrence; the index is the category id."""

    categories: tuple[EditScript, ...]
    frequencies: tuple[int, ...]
    _ids: dict = field(default_factory=dict, compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.categories)

    def id_of(self, script: EditScript) -> int:
        if not self._ids:
            self._ids.update({s: i for i, s in enumerate(self.categories)})
        try:
            return self._ids[script]
        except KeyError:
            raise KeyError(f"script {script} not in inventory") from None


def build_lemma_inventory(pairs: Iterable[tuple[str, str]]) -> LemmaCategoryInventory:
    """Derive and deduplicate scripts for all (form, lemma) pairs."""
    counts: Counter[EditScript] = Counter()
    first_seen: dict[EditScript, int] = {}
    total = 0
    for order, (form, lemma) in enumerate(pairs):
        script = derive_edit_script(form, lemma)
        counts[script] += 1
        first_seen.setdefault(script, order)
        total += 1
    if total == 0:
        raise ValueError("at least one (form, lemma) pair is required")
    ordered = sorted(counts, key=lambda s: (-counts[s], first_seen[s]))
    return LemmaCategoryInventory(
        categories=tuple(ordered),
        frequencies=tuple(counts[s] for s in ordered),
    )
