"""Auxiliary prompt vocabularies and their category grouping.

A vocabulary is a fixed per-dataset list of visually-groundable prompts
(objects, places, people-counts, atomic actions), each assigned to one of
k semantic categories. Manifests are line-oriented text so the shipped
lists can be read and diffed directly:

    #category:objects      <- declares a category (order defines ids)
    bag                    <- entry, attached to the latest category
    # plain comment        <- ignored

Prompt texts are stored, never tokenized: embeddings arrive precomputed
and are associated to entries by index.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from vctext.errors import (
    DuplicateEntryError,
    ParseError,
    ShapeError,
    UnknownCategoryError,
)

_CATEGORY_PREFIX = "#category:"


@dataclass(frozen=True)
class AuxVocabulary:
    """Immutable prompt list with per-entry category ids."""

    entries: tuple[tuple[str, int], ...]
    categories: tuple[str, ...]

    def __post_init__(self):
        if len(self.categories) < 1:
            raise ParseError("vocabulary needs at least one category")
        seen: set[str] = set()
        for text, cat in self.entries:
            if cat < 0 or cat >= len(self.categories):
                raise UnknownCategoryError(f"entry '{text}' has category id {cat}")
            if text in seen:
                raise DuplicateEntryError(f"duplicate prompt text '{text}'")
            seen.add(text)

    @property
    def n_entries(self) -> int:
        return len(self.entries)

    @property
    def n_categories(self) -> int:
        return len(self.categories)

    def category_sizes(self) -> tuple[int, ...]:
        counts = [0] * len(self.categories)
        for _, cat in self.entries:
            counts[cat] += 1
        return tuple(counts)

    def category_ids(self) -> np.ndarray:
        return np.asarray([cat for _, cat in self.entries], dtype=np.intp)

    def prompts(self) -> tuple[str, ...]:
        return tuple(text for text, _ in self.entries)


def load_vocabulary(source: str) -> AuxVocabulary:
    """Parse a manifest document (the text itself, not a path)."""
    categories: list[str] = []
    entries: list[tuple[str, int]] = []
    current = -1
    for lineno, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(_CATEGORY_PREFIX):
            name = line[len(_CATEGORY_PREFIX):].strip()
            if not name:
                raise ParseError(f"line {lineno}: empty category name")
            if name in categories:
                raise ParseError(f"line {lineno}: duplicate category '{name}'")
            categories.append(name)
            current = len(categories) - 1
            continue
        if line.startswith("#"):
            continue
        if current < 0:
            raise UnknownCategoryError(
                f"line {lineno}: entry '{line}' appears before any category")
        entries.append((line, current))
    if not categories:
        raise ParseError("manifest declares no categories")
    return AuxVocabulary(entries=tuple(entries), categories=tuple(categories))


def load_vocabulary_file(path: str | Path) -> AuxVocabulary:
    return load_vocabulary(Path(path).read_text(encoding="utf-8"))


def serialize_vocabulary(vocab: AuxVocabulary) -> str:
    """Inverse of load_vocabulary, modulo whitespace and comments."""
    lines: list[str] = []
    for cat_id, name in enumerate(vocab.categories):
        lines.append(f"{_CATEGORY_PREFIX}{name}")
        lines.extend(text for text, cat in vocab.entries if cat == cat_id)
    return "\n".join(lines) + "\n"


def builtin_vocabulary(name: str) -> AuxVocabulary:
    """Load one of the shipped manifests: 'charades' or 'kinetics'."""
    ref = resources.files("vctext").joinpath(f"data/{name}.vocab")
    try:
        text = ref.read_text(encoding="utf-8")
    except FileNotFoundError as e:
        raise ParseError(f"no shipped vocabulary named '{name}'") from e
    return load_vocabulary(text)


def category_pool(aux_embs: np.ndarray, vocab: AuxVocabulary) -> np.ndarray:
    """Mean embedding per category, ordered by category declaration.

    aux_embs rows are aligned with vocab.entries. Categories without
    members pool to a zero row (they never reach a classifier, because a
    vocabulary with entries has no use for empty categories).
    """
    aux_embs = np.asarray(aux_embs, dtype=np.float64)
    if aux_embs.ndim != 2 or aux_embs.shape[0] != vocab.n_entries:
        raise ShapeError(f"expected {vocab.n_entries} embedding rows, "
                         f"got shape {aux_embs.shape}")
    out = np.zeros((vocab.n_categories, aux_embs.shape[1]) if aux_embs.ndim == 2
                   else (vocab.n_categories,), dtype=np.float64)
    ids = vocab.category_ids()
    for cat in range(vocab.n_categories):
        members = aux_embs[ids == cat]
        if len(members):
            out[cat] = members.mean(axis=0)
    return out
