"""Vocabulary manifest parsing, shipped lists, category pooling."""

import numpy as np
import pytest

from vctext.errors import DuplicateEntryError, ParseError, ShapeError, UnknownCategoryError
from vctext.numerics import Rng
from vctext.semantics import (
    AuxVocabulary,
    builtin_vocabulary,
    category_pool,
    load_vocabulary,
    serialize_vocabulary,
)

SMALL = """\
#category:objects
cup
door
#category:places
kitchen
"""


class TestLoadVocabulary:
    def test_basic_parse(self):
        vocab = load_vocabulary(SMALL)
        assert vocab.categories == ("objects", "places")
        assert vocab.entries == (("cup", 0), ("door", 0), ("kitchen", 1))
        assert vocab.category_sizes() == (2, 1)

    def test_comments_and_blanks_ignored(self):
        vocab = load_vocabulary("# header\n\n#category:a\n\n# note\nx\n")
        assert vocab.entries == (("x", 0),)

    def test_empty_category_is_valid(self):
        vocab = load_vocabulary("#category:only\n")
        assert vocab.n_entries == 0
        assert vocab.n_categories == 1

    def test_entry_before_category_rejected(self):
        with pytest.raises(UnknownCategoryError):
            load_vocabulary("stray entry\n#category:late\n")

    def test_duplicate_entry_rejected(self):
        with pytest.raises(DuplicateEntryError):
            load_vocabulary("#category:a\nx\n#category:b\nx\n")

    def test_no_categories_rejected(self):
        with pytest.raises(ParseError):
            load_vocabulary("# nothing but comments\n")

    def test_duplicate_category_rejected(self):
        with pytest.raises(ParseError):
            load_vocabulary("#category:a\n#category:a\n")

    def test_round_trip_modulo_whitespace(self):
        vocab = load_vocabulary(SMALL)
        again = load_vocabulary(serialize_vocabulary(vocab))
        assert again == vocab
        assert serialize_vocabulary(again) == serialize_vocabulary(vocab)


class TestShippedManifests:
    def test_charades_counts(self):
        vocab = builtin_vocabulary("charades")
        assert vocab.n_entries == 97
        assert vocab.category_sizes() == (43, 15, 5, 34)
        assert vocab.categories == ("objects", "places", "people", "atomic-actions")

    def test_kinetics_counts(self):
        vocab = builtin_vocabulary("kinetics")
        assert vocab.n_entries == 88
        assert vocab.category_sizes() == (40, 43, 5)
        assert vocab.categories == ("objects", "places", "people")

    def test_round_trip(self):
        for name in ("charades", "kinetics"):
            vocab = builtin_vocabulary(name)
            assert load_vocabulary(serialize_vocabulary(vocab)) == vocab

    def test_unknown_name(self):
        with pytest.raises(ParseError):
            builtin_vocabulary("ucf")


class TestCategoryPool:
    def test_identical_members_pool_to_member(self):
        vocab = load_vocabulary("#category:a\nx\ny\nz\n")
        v = Rng(0).normal((4,))
        pooled = category_pool(np.tile(v, (3, 1)), vocab)
        assert np.allclose(pooled, v[None])

    def test_singleton_category_unchanged(self):
        vocab = load_vocabulary(SMALL)
        embs = Rng(1).normal((3, 5))
        pooled = category_pool(embs, vocab)
        assert np.allclose(pooled[1], embs[2])

    def test_two_point_mean(self):
        vocab = load_vocabulary("#category:a\nu\nv\n")
        pooled = category_pool(np.array([[1.0, 0.0], [0.0, 1.0]]), vocab)
        assert np.allclose(pooled, [[0.5, 0.5]])

    def test_member_order_invariance(self):
        vocab = load_vocabulary("#category:a\nu\nv\nw\n#category:b\np\nq\n")
        embs = Rng(2).normal((5, 6))
        shuffled = embs.copy()
        shuffled[[0, 1, 2]] = embs[[2, 0, 1]]   # permute within category a
        assert np.allclose(category_pool(embs, vocab),
                           category_pool(shuffled, vocab))

    def test_sizes_sum_to_entry_count(self):
        for name in ("charades", "kinetics"):
            vocab = builtin_vocabulary(name)
            assert sum(vocab.category_sizes()) == vocab.n_entries

    def test_wrong_row_count_rejected(self):
        with pytest.raises(ShapeError):
            category_pool(np.zeros((2, 4)), load_vocabulary(SMALL))

    def test_bad_category_id_rejected(self):
        with pytest.raises(UnknownCategoryError):
            AuxVocabulary(entries=(("x", 3),), categories=("only",))
