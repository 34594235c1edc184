"""Input coercion shared by the estimators."""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence


def check_documents(X) -> list:
    """Coerce ``X`` to a list of :class:`~tablex.corpus.TexDocument`.

    Plain strings are wrapped with positional ids ``doc0``, ``doc1``, ...
    """
    from .corpus import TexDocument

    if isinstance(X, (str, bytes)):
        raise TypeError("expected an iterable of documents, got a single string")
    if not isinstance(X, Iterable):
        raise TypeError(f"expected an iterable of documents, got {type(X).__name__}")
    docs = []
    for i, item in enumerate(X):
        if isinstance(item, TexDocument):
            docs.append(item)
        elif isinstance(item, str):
            docs.append(TexDocument(f"doc{i}", item, len(item.encode("utf-8"))))
        else:
            raise TypeError(f"document {i}: expected TexDocument or str, got {type(item).__name__}")
    return docs


def check_snippets(X) -> list:
    """Coerce ``X`` to a list of :class:`~tablex.extract.TableSnippet`."""
    from .extract import TableSnippet

    if isinstance(X, str):
        raise TypeError("expected an iterable of snippets, got a single string")
    if not isinstance(X, Iterable):
        raise TypeError(f"expected an iterable of snippets, got {type(X).__name__}")
    snippets = []
    for i, item in enumerate(X):
        if isinstance(item, TableSnippet):
            snippets.append(item)
        elif isinstance(item, str):
            snippets.append(TableSnippet(f"doc{i}", 0, item))
        elif isinstance(item, Mapping) and "code" in item:
            snippets.append(TableSnippet.from_json(item))
        else:
            raise TypeError(f"snippet {i}: expected TableSnippet or str, got {type(item).__name__}")
    return snippets


def check_token_sequence(tokens, name: str = "tokens") -> list[str]:
    if isinstance(tokens, str) or not isinstance(tokens, Sequence):
        raise TypeError(f"{name} must be a sequence of token strings")
    for tok in tokens:
        if not isinstance(tok, str):
            raise TypeError(f"{name} contains a non-string token: {tok!r}")
    return list(tokens)
