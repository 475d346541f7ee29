"""Desk-scale language-model pipeline: BBPE tokenization, MLM pretraining,
downstream task heads (tagging, lemmatization, parsing, NER, sentiment)
and the matching evaluation metrics."""

__version__ = "0.1.0"
