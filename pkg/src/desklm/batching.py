"""FULL-SENTENCES sample packing and dynamic masking.

Sentences are encoded and appended contiguously in corpus order, crossing
document boundaries, until the next sentence would exceed the length cap.
Masking is re-drawn per invocation (dynamic), with targets carrying the
original ids only at selected positions.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from typing import IO, Sequence

import numpy as np

from .bbpe import ByteVocab, encode
from .corpus import Corpus

#: Marker in target matrices for positions that do not contribute to the loss.
IGNORE_INDEX = -100

SAMPLE_STREAM_MAGIC = b"DLMS"
SAMPLE_STREAM_VERSION = 1


@dataclass(frozen=True)
class Sample:
    """One packed training sample: ``<s> ids... </s>`` of length <= max_len."""

    ids: tuple[int, ...]
    doc_boundary_positions: tuple[int, ...] = ()
    truncated: bool = False


@dataclass(eq=False)
class MlmBatch:
    """Padded id matrix with corruption targets.

    ``target_ids`` is ``IGNORE_INDEX`` everywhere except the selected
    positions, where it holds the original (pre-corruption) id.
    """

    input_ids: np.ndarray
    target_ids: np.ndarray
    mask_positions: list[tuple[int, ...]]


def pack_full_sentences(
    corpus: Corpus, vocab: ByteVocab, max_len: int = 512
) -> list[Sample]:
    """Pack encoded sentences into samples of at most ``max_len`` ids.

    Document boundaries never close a sample; their positions (index of
    the first id of the new document) are recorded instead.  A single
    sentence longer than ``max_len - 2`` is truncated and flagged.
    """
    if max_len < 8:
        raise ValueError("max_len must be >= 8")
    bos, eos = vocab.special_tokens.bos, vocab.special_tokens.eos
    budget = max_len - 2

    samples: list[Sample] = []
    content: list[int] = []
    boundaries: list[int] = []

    def close():
        nonlocal content, boundaries
        if content:
            samples.append(
                Sample(ids=(bos, *content, eos), doc_boundary_positions=tuple(boundaries))
            )
        content, boundaries = [], []

    for doc_index, doc in enumerate(corpus.documents):
        at_doc_start = doc_index > 0
        for sentence in doc.sentences:
            ids = encode(vocab, sentence.text).ids
            if len(ids) > budget:
                close()
                samples.append(Sample(ids=(bos, *ids[:budget], eos), truncated=True))
                at_doc_start = False
                continue
            if len(content) + len(ids) > budget:
                close()
            if at_doc_start and content:
                boundaries.append(1 + len(content))
            content.extend(ids)
            at_doc_start = False
    close()
    return samples


def apply_dynamic_masking(
    sample: Sample,
    vocab: ByteVocab,
    mask_prob: float = 0.15,
    policy: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Corrupt one sample; returns (input_ids, target_ids, mask_positions).

    Each non-special position is selected independently with probability
    ``mask_prob``; a selected position becomes the mask id, a uniform
    random non-special id, or stays unchanged per ``policy``.
    """
    if not sample.ids:
        raise ValueError("sample is empty")
    if abs(sum(policy) - 1.0) > 1e-9:
        raise ValueError(f"policy must sum to 1, got {policy}")
    specials = set(vocab.special_tokens)
    rng = np.random.Generator(np.random.PCG64(seed))

    input_ids = np.array(sample.ids, dtype=np.int64)
    target_ids = np.full(len(sample.ids), IGNORE_INDEX, dtype=np.int64)
    positions = []
    n_specials = len(vocab.special_tokens)
    for pos, original in enumerate(sample.ids):
        if original in specials:
            continue
        if rng.random() >= mask_prob:
            continue
        positions.append(pos)
        target_ids[pos] = original
        roll = rng.random()
        if roll < policy[0]:
            input_ids[pos] = vocab.special_tokens.mask
        elif roll < policy[0] + policy[1]:
            input_ids[pos] = rng.integers(n_specials, len(vocab.tokens))
        # else: keep the original id.
    return input_ids, target_ids, tuple(positions)


def build_mlm_batch(
    samples: Sequence[Sample],
    vocab: ByteVocab,
    max_len: int,
    mask_prob: float = 0.15,
    policy: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 0,
) -> MlmBatch:
    """Mask each sample (seeds ``seed``, ``seed+1``, ...) and pad into a batch."""
    pad = vocab.special_tokens.pad
    input_ids = np.full((len(samples), max_len), pad, dtype=np.int64)
    target_ids = np.full((len(samples), max_len), IGNORE_INDEX, dtype=np.int64)
    mask_positions = []
    for row, sample in enumerate(samples):
        ids, targets, positions = apply_dynamic_masking(
            sample, vocab, mask_prob, policy, seed=seed + row
        )
        input_ids[row, : len(ids)] = ids
        target_ids[row, : len(ids)] = targets
        mask_positions.append(positions)
    return MlmBatch(input_ids, target_ids, mask_positions)


def serialize_samples(samples: Sequence[Sample], stream: IO[bytes]) -> None:
    """Write samples as magic + version, then per sample a little-endian
    u32 length followed by that many u32 ids."""
    stream.write(SAMPLE_STREAM_MAGIC)
    stream.write(bytes([SAMPLE_STREAM_VERSION]))
    for sample in samples:
        stream.write(struct.pack("<I", len(sample.ids)))
        stream.write(struct.pack(f"<{len(sample.ids)}I", *sample.ids))


def deserialize_samples(stream: IO[bytes]) -> list[Sample]:
    """Inverse of :func:`serialize_samples` (ids only; packing metadata is
    not part of the wire format)."""
    magic = stream.read(4)
    if magic != SAMPLE_STREAM_MAGIC:
        raise ValueError(f"bad sample stream magic {magic!r}")
    version = stream.read(1)
    if version != bytes([SAMPLE_STREAM_VERSION]):
        raise ValueError(f"unsupported sample stream version {version!r}")
    samples = []
    while True:
        header = stream.read(4)
        if not header:
            break
        if len(header) != 4:
            raise ValueError("truncated sample stream")
        (length,) = struct.unpack("<I", header)
        payload = stream.read(4 * length)
        if len(payload) != 4 * length:
            raise ValueError("truncated sample payload")
        samples.append(Sample(ids=struct.unpack(f"<{length}I", payload)))
    return samples
