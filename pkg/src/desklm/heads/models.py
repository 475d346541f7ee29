"""Trainable task models over sentence inputs.

Every model reads per-token input vectors built from three streams: an
end-to-end word embedding, a character-level BiGRU embedding, and
optional frozen contextual vectors appended as-is.  A shared trunk of
three stacked bidirectional GRU layers feeds task heads: softmax taggers
(POS + lemma category), a biaffine parser trained jointly with the
taggers, and CRF or stack-string classifiers for NER.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..corpus import Sentence
from ..neural.layers import init_birnn_params, birnn_layer, uniform_param, zeros_param
from ..neural.optim import AdamConfig, AdamState, adam_step, collect_grads, zero_grads
from ..neural.tensor import Tensor, concat, log_softmax
from .lemma import LemmaCategoryInventory, apply_edit_script, derive_edit_script
from .parser import biaffine_scores, decode_tree, init_biaffine_params

UNK = "<unk>"

TRUNK_LAYERS = 3


def build_vocab(items: Sequence[str]) -> dict[str, int]:
    """Frequency-agnostic id map with <unk> at 0, insertion-ordered."""
    vocab = {UNK: 0}
    for item in items:
        vocab.setdefault(item, len(vocab))
    return vocab


@dataclass
class FeaturizerConfig:
    word_dim: int = 24
    char_dim: int = 12
    char_hidden: int = 12
    contextual_dim: int = 0

    @property
    def output_dim(self) -> int:
        return self.word_dim + 2 * self.char_hidden + self.contextual_dim


class TokenFeaturizer:
    """Per-token input vectors from word ids, characters and optional
    frozen contextual embeddings."""

    def __init__(
        self,
        word_vocab: dict[str, int],
        char_vocab: dict[str, int],
        config: FeaturizerConfig,
        seed: int = 0,
        dtype=np.float32,
    ):
        self.word_vocab = word_vocab
        self.char_vocab = char_vocab
        self.config = config
        rng = np.random.Generator(np.random.PCG64(seed))
        self.params: dict[str, Tensor] = {
            "word_emb": uniform_param(
                rng, (len(word_vocab), config.word_dim), config.word_dim, dtype
            ),
            "char_emb": uniform_param(
                rng, (len(char_vocab), config.char_dim), config.char_dim, dtype
            ),
        }
        for key, value in init_birnn_params(
            config.char_dim, config.char_hidden, seed=seed + 1, dtype=dtype
        ).items():
            self.params[f"char_rnn.{key}"] = value

    def featurize(
        self, forms: Sequence[str], contextual: np.ndarray | None = None
    ) -> Tensor:
        word_ids = np.array(
            [self.word_vocab.get(form, 0) for form in forms], dtype=np.int64
        )
        word_vectors = self.params["word_emb"][word_ids]
        char_params = {
            key[len("char_rnn."):]: value
            for key, value in self.params.items()
            if key.startswith("char_rnn.")
        }
        char_vectors = []
        hidden = self.config.char_hidden
        for form in forms:
            char_ids = np.array(
                [self.char_vocab.get(c, 0) for c in form], dtype=np.int64
            )
            states = birnn_layer(self.params["char_emb"][char_ids], char_params)
            # Word vector: last forward state + first backward state.
            last_forward = states[len(form) - 1 : len(form), :hidden]
            first_backward = states[0:1, hidden:]
            char_vectors.append(concat([last_forward, first_backward], axis=1))
        features = concat([word_vectors, concat(char_vectors, axis=0)], axis=1)
        if self.config.contextual_dim:
            if contextual is None:
                contextual = np.zeros(
                    (len(forms), self.config.contextual_dim),
                    dtype=self.params["word_emb"].data.dtype,
                )
            features = concat([features, Tensor(np.asarray(contextual))], axis=1)
        return features


def init_trunk_params(input_dim: int, hidden: int, seed: int, dtype=np.float32) -> dict[str, Tensor]:
    params: dict[str, Tensor] = {}
    dim = input_dim
    for layer in range(TRUNK_LAYERS):
        for key, value in init_birnn_params(dim, hidden, seed=seed + layer, dtype=dtype).items():
            params[f"rnn{layer}.{key}"] = value
        dim = 2 * hidden
    return params


def run_trunk(features: Tensor, params: dict[str, Tensor]) -> Tensor:
    states = features
    for layer in range(TRUNK_LAYERS):
        layer_params = {
            key[len(f"rnn{layer}."):]: value
            for key, value in params.items()
            if key.startswith(f"rnn{layer}.")
        }
        states = birnn_layer(states, layer_params)
    return states


def tagger_forward(
    token_embeddings: Tensor, params: dict[str, Tensor]
) -> tuple[Tensor, Tensor]:
    """Trunk of three BiGRU layers, then two independent softmax heads;
    returns (tag logits, lemma-category logits)."""
    states = run_trunk(token_embeddings, params)
    tag_logits = states @ params["tag.w"] + params["tag.b"]
    lemma_logits = states @ params["lemma.w"] + params["lemma.b"]
    return tag_logits, lemma_logits


def _cross_entropy(logits: Tensor, targets: Sequence[int]) -> Tensor:
    log_probs = log_softmax(logits, axis=-1)
    picked = log_probs[np.arange(len(targets)), np.asarray(targets, dtype=np.int64)]
    return -picked.mean()


@dataclass
class TaggerData:
    """Training view of an annotated corpus for the tagger/lemmatizer."""

    sentences: list[Sentence]
    tagset: dict[str, int]
    inventory: LemmaCategoryInventory

    @classmethod
    def from_sentences(cls, sentences: Sequence[Sentence]) -> "TaggerData":
        from .lemma import build_lemma_inventory

        tags = sorted(
            {token.upos or "_" for sentence in sentences for token in sentence.tokens}
        )
        pairs = [
            (token.form, token.lemma or token.form)
            for sentence in sentences
            for token in sentence.tokens
        ]
        return cls(
            sentences=list(sentences),
            tagset={tag: i for i, tag in enumerate(tags)},
            inventory=build_lemma_inventory(pairs),
        )

    def tag_ids(self, sentence: Sentence) -> list[int]:
        return [self.tagset[token.upos or "_"] for token in sentence.tokens]

    def lemma_ids(self, sentence: Sentence) -> list[int]:
        return [
            self.inventory.id_of(
                derive_edit_script(token.form, token.lemma or token.form)
            )
            for token in sentence.tokens
        ]


class TaggerModel:
    """Joint POS + lemma-category classifier over the BiGRU trunk."""

    def __init__(
        self,
        data: TaggerData,
        hidden: int = 24,
        featurizer_config: FeaturizerConfig | None = None,
        seed: int = 0,
        dtype=np.float32,
    ):
        self.data = data
        forms = [t.form for s in data.sentences for t in s.tokens]
        chars = [c for f in forms for c in f]
        self.featurizer = TokenFeaturizer(
            build_vocab(forms),
            build_vocab(chars),
            featurizer_config or FeaturizerConfig(),
            seed=seed,
            dtype=dtype,
        )
        rng = np.random.Generator(np.random.PCG64(seed + 100))
        trunk_in = self.featurizer.config.output_dim
        self.params: dict[str, Tensor] = dict(self.featurizer.params)
        self.params.update(init_trunk_params(trunk_in, hidden, seed + 200, dtype))
        repr_dim = 2 * hidden
        self.params["tag.w"] = uniform_param(rng, (repr_dim, len(data.tagset)), repr_dim, dtype)
        self.params["tag.b"] = zeros_param((len(data.tagset),), dtype)
        self.params["lemma.w"] = uniform_param(
            rng, (repr_dim, len(data.inventory)), repr_dim, dtype
        )
        self.params["lemma.b"] = zeros_param((len(data.inventory),), dtype)

    def forward(self, sentence: Sentence, contextual=None) -> tuple[Tensor, Tensor]:
        features = self.featurizer.featurize(sentence.forms, contextual)
        return tagger_forward(features, self.params)

    def loss(self, sentence: Sentence, contextual=None) -> Tensor:
        tag_logits, lemma_logits = self.forward(sentence, contextual)
        return _cross_entropy(tag_logits, self.data.tag_ids(sentence)) + _cross_entropy(
            lemma_logits, self.data.lemma_ids(sentence)
        )

    def predict(self, sentence: Sentence, contextual=None) -> tuple[list[str], list[str]]:
        tag_logits, lemma_logits = self.forward(sentence, contextual)
        id_to_tag = {i: t for t, i in self.data.tagset.items()}
        tags = [id_to_tag[int(i)] for i in np.argmax(tag_logits.data, axis=-1)]
        lemmas = []
        for token, category in zip(sentence.tokens, np.argmax(lemma_logits.data, axis=-1)):
            script = self.data.inventory.categories[int(category)]
            try:
                lemmas.append(apply_edit_script(token.form, script))
            except Exception:
                lemmas.append(token.form)
        return tags, lemmas


def train_tagger(
    model: TaggerModel,
    steps: int = 300,
    lr: float = 5e-3,
    seed: int = 0,
    adam_config: AdamConfig = AdamConfig(),
) -> list[float]:
    """Single-sentence Adam steps cycling the training data; returns losses."""
    state = AdamState()
    rng = np.random.Generator(np.random.PCG64(seed))
    sentences = model.data.sentences
    losses = []
    for _ in range(steps):
        sentence = sentences[int(rng.integers(0, len(sentences)))]
        zero_grads(model.params)
        loss = model.loss(sentence)
        loss.backward()
        adam_step(model.params, collect_grads(model.params), state, adam_config, lr)
        losses.append(float(loss.data))
    return losses


def tagger_accuracy(model: TaggerModel, sentences: Sequence[Sentence]) -> tuple[float, float]:
    """(tag accuracy, lemma accuracy) over gold-annotated sentences."""
    tag_correct = lemma_correct = total = 0
    for sentence in sentences:
        tags, lemmas = model.predict(sentence)
        for token, tag, lemma in zip(sentence.tokens, tags, lemmas):
            total += 1
            tag_correct += tag == (token.upos or "_")
            lemma_correct += lemma == (token.lemma or token.form)
    return tag_correct / total, lemma_correct / total


class JointParserModel:
    """Biaffine parser sharing the trunk with the tagger heads; losses are
    summed with equal weights."""

    def __init__(
        self,
        data: TaggerData,
        relations: dict[str, int],
        hidden: int = 24,
        arc_dim: int = 24,
        featurizer_config: FeaturizerConfig | None = None,
        seed: int = 0,
        dtype=np.float32,
    ):
        self.tagger = TaggerModel(
            data, hidden=hidden, featurizer_config=featurizer_config, seed=seed, dtype=dtype
        )
        self.relations = relations
        self.params = self.tagger.params
        rng = np.random.Generator(np.random.PCG64(seed + 300))
        repr_dim = 2 * hidden
        self.params["head_proj"] = uniform_param(rng, (repr_dim, arc_dim), repr_dim, dtype)
        self.params["dep_proj"] = uniform_param(rng, (repr_dim, arc_dim), repr_dim, dtype)
        self.params["root_vec"] = uniform_param(rng, (1, arc_dim), arc_dim, dtype)
        for key, value in init_biaffine_params(
            arc_dim, len(relations), seed=seed + 400, dtype=dtype
        ).items():
            self.params[key] = value

    def score(self, sentence: Sentence, contextual=None):
        features = self.tagger.featurizer.featurize(sentence.forms, contextual)
        states = run_trunk(features, self.params)
        heads = concat(
            [self.params["root_vec"], states @ self.params["head_proj"]], axis=0
        )
        dependents = states @ self.params["dep_proj"]
        scores = biaffine_scores(heads, dependents, self.params)
        tag_logits = states @ self.params["tag.w"] + self.params["tag.b"]
        lemma_logits = states @ self.params["lemma.w"] + self.params["lemma.b"]
        return scores, tag_logits, lemma_logits

    def loss(self, sentence: Sentence, contextual=None) -> Tensor:
        scores, tag_logits, lemma_logits = self.score(sentence, contextual)
        gold_heads = [token.head for token in sentence.tokens]
        if any(h is None for h in gold_heads):
            raise ValueError("parser training requires annotated heads")
        gold_relations = [
            self.relations[token.deprel or "_"] for token in sentence.tokens
        ]
        n = len(sentence.tokens)
        arc_loss = _cross_entropy(scores.arc.transpose(1, 0), gold_heads)
        label_rows = scores.label[np.asarray(gold_heads), np.arange(n)]
        label_loss = _cross_entropy(label_rows, gold_relations)
        data = self.tagger.data
        return (
            arc_loss
            + label_loss
            + _cross_entropy(tag_logits, data.tag_ids(sentence))
            + _cross_entropy(lemma_logits, data.lemma_ids(sentence))
        )

    def predict(self, sentence: Sentence, contextual=None) -> tuple[list[int], list[str]]:
        scores, _, _ = self.score(sentence, contextual)
        heads, label_ids = decode_tree(scores)
        id_to_relation = {i: r for r, i in self.relations.items()}
        return heads, [id_to_relation[i] for i in label_ids]


def train_parser(
    model: JointParserModel,
    steps: int = 400,
    lr: float = 5e-3,
    seed: int = 0,
    adam_config: AdamConfig = AdamConfig(),
) -> list[float]:
    state = AdamState()
    rng = np.random.Generator(np.random.PCG64(seed))
    sentences = model.tagger.data.sentences
    losses = []
    for _ in range(steps):
        sentence = sentences[int(rng.integers(0, len(sentences)))]
        zero_grads(model.params)
        loss = model.loss(sentence)
        loss.backward()
        adam_step(model.params, collect_grads(model.params), state, adam_config, lr)
        losses.append(float(loss.data))
    return losses


def parser_attachment_scores(
    model: JointParserModel, sentences: Sequence[Sentence]
) -> tuple[float, float]:
    """(UAS, LAS) over gold-annotated sentences, same tokenization."""
    uas = las = total = 0
    for sentence in sentences:
        heads, relations = model.predict(sentence)
        for token, head, relation in zip(sentence.tokens, heads, relations):
            total += 1
            if head == token.head:
                uas += 1
                if relation == (token.deprel or "_"):
                    las += 1
    return uas / total, las / total


class FlatNerModel:
    """BiGRU trunk with a linear-chain CRF over BIO tags."""

    def __init__(
        self,
        sentences: Sequence[Sentence],
        hidden: int = 24,
        featurizer_config: FeaturizerConfig | None = None,
        seed: int = 0,
        dtype=np.float32,
    ):
        from .ner import bio_constraint_penalties, bio_label_set

        self.sentences = list(sentences)
        entity_types = [
            span[2] for sentence in sentences for span in sentence.entity_spans
        ]
        self.labels = bio_label_set(entity_types)
        self.label_ids = {label: i for i, label in enumerate(self.labels)}
        transition_penalty, start_penalty = bio_constraint_penalties(self.labels)
        self.transition_penalty = Tensor(transition_penalty.astype(dtype))
        self.start_penalty = Tensor(start_penalty.astype(dtype))

        forms = [t.form for s in sentences for t in s.tokens]
        chars = [c for f in forms for c in f]
        self.featurizer = TokenFeaturizer(
            build_vocab(forms), build_vocab(chars),
            featurizer_config or FeaturizerConfig(), seed=seed, dtype=dtype,
        )
        self.params: dict[str, Tensor] = dict(self.featurizer.params)
        self.params.update(
            init_trunk_params(self.featurizer.config.output_dim, hidden, seed + 200, dtype)
        )
        rng = np.random.Generator(np.random.PCG64(seed + 500))
        repr_dim = 2 * hidden
        count = len(self.labels)
        self.params["emit.w"] = uniform_param(rng, (repr_dim, count), repr_dim, dtype)
        self.params["emit.b"] = zeros_param((count,), dtype)
        self.params["crf.transitions"] = zeros_param((count, count), dtype)
        self.params["crf.start"] = zeros_param((count,), dtype)

    def _emissions(self, sentence: Sentence, contextual=None) -> Tensor:
        features = self.featurizer.featurize(sentence.forms, contextual)
        states = run_trunk(features, self.params)
        return states @ self.params["emit.w"] + self.params["emit.b"]

    def loss(self, sentence: Sentence, contextual=None) -> Tensor:
        from .ner import crf_loss, spans_to_bio, validate_bio

        tags = spans_to_bio(sentence.entity_spans, len(sentence.tokens))
        validate_bio(tags)
        tag_ids = [self.label_ids[t] for t in tags]
        return crf_loss(
            self._emissions(sentence, contextual),
            self.params["crf.transitions"] + self.transition_penalty,
            tag_ids,
            self.params["crf.start"] + self.start_penalty,
        )

    def predict(self, sentence: Sentence, contextual=None):
        from .ner import bio_to_spans, crf_decode

        emissions = self._emissions(sentence, contextual)
        path = crf_decode(
            emissions.data,
            self.params["crf.transitions"].data + self.transition_penalty.data,
            self.params["crf.start"].data + self.start_penalty.data,
        )
        return bio_to_spans([self.labels[i] for i in path])


class NestedNerModel:
    """Per-token classifier over linearized entity stack strings."""

    def __init__(
        self,
        sentences: Sequence[Sentence],
        hidden: int = 24,
        featurizer_config: FeaturizerConfig | None = None,
        seed: int = 0,
        dtype=np.float32,
    ):
        from .ner import encode_nested, render_stack

        self.sentences = list(sentences)
        stack_strings = ["O"]
        for sentence in sentences:
            for stack in encode_nested(sentence.entity_spans, len(sentence.tokens)):
                rendered = render_stack(stack)
                if rendered not in stack_strings:
                    stack_strings.append(rendered)
        self.stack_vocab = {s: i for i, s in enumerate(stack_strings)}
        self.stack_strings = stack_strings

        forms = [t.form for s in sentences for t in s.tokens]
        chars = [c for f in forms for c in f]
        self.featurizer = TokenFeaturizer(
            build_vocab(forms), build_vocab(chars),
            featurizer_config or FeaturizerConfig(), seed=seed, dtype=dtype,
        )
        self.params: dict[str, Tensor] = dict(self.featurizer.params)
        self.params.update(
            init_trunk_params(self.featurizer.config.output_dim, hidden, seed + 200, dtype)
        )
        rng = np.random.Generator(np.random.PCG64(seed + 600))
        repr_dim = 2 * hidden
        self.params["stack.w"] = uniform_param(
            rng, (repr_dim, len(stack_strings)), repr_dim, dtype
        )
        self.params["stack.b"] = zeros_param((len(stack_strings),), dtype)

    def _logits(self, sentence: Sentence, contextual=None) -> Tensor:
        features = self.featurizer.featurize(sentence.forms, contextual)
        states = run_trunk(features, self.params)
        return states @ self.params["stack.w"] + self.params["stack.b"]

    def loss(self, sentence: Sentence, contextual=None) -> Tensor:
        from .ner import encode_nested, render_stack

        stacks = encode_nested(sentence.entity_spans, len(sentence.tokens))
        targets = [self.stack_vocab[render_stack(s)] for s in stacks]
        return _cross_entropy(self._logits(sentence, contextual), targets)

    def predict(self, sentence: Sentence, contextual=None):
        from .ner import decode_nested, parse_stack

        logits = self._logits(sentence, contextual)
        stacks = [
            parse_stack(self.stack_strings[int(i)])
            for i in np.argmax(logits.data, axis=-1)
        ]
        return decode_nested(stacks)


def train_ner(
    model: FlatNerModel | NestedNerModel,
    steps: int = 400,
    lr: float = 5e-3,
    seed: int = 0,
    adam_config: AdamConfig = AdamConfig(),
) -> list[float]:
    state = AdamState()
    rng = np.random.Generator(np.random.PCG64(seed))
    losses = []
    for _ in range(steps):
        sentence = model.sentences[int(rng.integers(0, len(model.sentences)))]
        zero_grads(model.params)
        loss = model.loss(sentence)
        loss.backward()
        adam_step(model.params, collect_grads(model.params), state, adam_config, lr)
        losses.append(float(loss.data))
    return losses
