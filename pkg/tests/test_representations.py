"""Vocabulary building, subtoken composition, pretrained embedding loading."""

import logging

import numpy as np
import pytest

from seqtag.autodiff import Rng
from seqtag.corpus import Corpus, DataError, Sentence
from seqtag.representations import (
    CHAR_END,
    CHAR_START,
    BYTE_END,
    BYTE_START,
    ReprConfig,
    TokenEncoder,
    build_vocab,
    compose_subtoken,
    load_pretrained,
    subtoken_ids,
    token_repr,
)


def _corpus(sents, tags=None):
    return Corpus(
        [Sentence(s, tags[i] if tags else ["X"] * len(s)) for i, s in enumerate(sents)]
    )


@pytest.fixture
def vocab():
    return build_vocab(_corpus([["the", "dog"], ["the", "cat"]]))


class TestVocab:
    def test_frequencies(self, vocab):
        assert vocab.freq("the") == 2
        assert vocab.freq("dog") == 1

    def test_unseen_word_maps_to_unk(self, vocab):
        assert vocab.word_id("zebra") == 0
        assert vocab.word_id("dog") != 0

    def test_char_inventory(self, vocab):
        for ch in "dog":
            assert vocab.char_id(ch) >= 3
        assert vocab.char_id("ü") == 0  # unseen char -> UNK marker

    def test_oov_definition(self, vocab):
        assert vocab.is_oov("zebra")
        assert not vocab.is_oov("cat")

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError):
            build_vocab(Corpus([]))

    def test_round_trips_through_dict(self, vocab):
        clone = type(vocab).from_dict(vocab.to_dict())
        assert clone.word_ids == vocab.word_ids
        assert clone.char_ids == vocab.char_ids
        assert clone.freq_train == vocab.freq_train


class TestSubtokenIds:
    def test_single_char_word_has_three_symbols(self, vocab):
        ids = subtoken_ids("d", "char", vocab)
        assert len(ids) == 3
        assert ids[0] == CHAR_START and ids[-1] == CHAR_END

    def test_byte_symbols_follow_utf8(self):
        # precomposed U+00EF is two UTF-8 bytes: 4 ASCII + 2 = 6 payload ids
        ids = subtoken_ids("naïve", "byte")
        assert ids[0] == BYTE_START and ids[-1] == BYTE_END
        assert len(ids) - 2 == len("naïve".encode("utf-8")) == 6
        # the decomposed spelling (i + combining diaeresis) costs one more byte
        assert len(subtoken_ids("naïve", "byte")) - 2 == 7

    def test_empty_word_rejected(self, vocab):
        with pytest.raises(ValueError):
            subtoken_ids("", "char", vocab)


class TestComposition:
    def test_identical_words_identical_vectors(self, vocab):
        enc = TokenEncoder(ReprConfig("c"), vocab, 8, 4, 3, Rng(1))
        a = compose_subtoken("dog", "char", enc.char_f, enc.char_r, enc.char_table, vocab)
        b = compose_subtoken("dog", "char", enc.char_f, enc.char_r, enc.char_table, vocab)
        np.testing.assert_array_equal(a.v, b.v)

    def test_output_dimension_is_twice_hidden(self, vocab):
        enc = TokenEncoder(ReprConfig("c+b"), vocab, 8, 4, 3, Rng(1))
        c = compose_subtoken("dog", "char", enc.char_f, enc.char_r, enc.char_table, vocab)
        assert c.v.shape == (6,)


class TestTokenRepr:
    @pytest.mark.parametrize(
        "mode,dim", [("w", 8), ("c", 6), ("b", 6), ("c+b", 12), ("w+c", 14)]
    )
    def test_mode_dimensions(self, vocab, mode, dim):
        enc = TokenEncoder(ReprConfig(mode), vocab, 8, 4, 3, Rng(1))
        assert enc.out_dim == dim
        assert token_repr("dog", enc).v.shape == (dim,)

    def test_paper_default_dimensions(self):
        cfg = ReprConfig("w+c")
        assert cfg.out_dim(128, 100) == 328
        assert ReprConfig("c+b").out_dim(128, 100) == 400

    def test_mode_w_unseen_word_is_unk_row(self, vocab):
        enc = TokenEncoder(ReprConfig("w"), vocab, 8, 4, 3, Rng(1))
        np.testing.assert_array_equal(token_repr("zebra", enc).v, enc.word_table.v[0])

    def test_mode_c_unseen_words_vary_with_spelling(self, vocab):
        enc = TokenEncoder(ReprConfig("c"), vocab, 8, 4, 3, Rng(1))
        a = token_repr("goat", enc).v
        b = token_repr("gnat", enc).v
        assert not np.array_equal(a, b)

    def test_unk_routing_only_touches_word_part(self, vocab):
        enc = TokenEncoder(ReprConfig("w+c"), vocab, 8, 4, 3, Rng(1))
        plain = token_repr("dog", enc).v
        routed = token_repr("dog", enc, replace_unk=True).v
        np.testing.assert_array_equal(routed[:8], enc.word_table.v[0])
        np.testing.assert_array_equal(routed[8:], plain[8:])


class TestLoadPretrained:
    def _table(self, vocab, dim=4):
        enc = TokenEncoder(ReprConfig("w"), vocab, dim, 4, 3, Rng(1))
        return enc.word_table

    def test_known_and_unknown_rows(self, vocab, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("dog 1 2 3 4\ncat 5 6 7 8\nzebra 9 9 9 9\n")
        table = self._table(vocab)
        report = load_pretrained(str(path), vocab, table)
        assert report == {"loaded": 2, "missed": 1}
        np.testing.assert_array_equal(table.v[vocab.word_id("dog")], [1, 2, 3, 4])

    def test_empty_file(self, vocab, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("")
        assert load_pretrained(str(path), vocab, self._table(vocab))["loaded"] == 0

    def test_duplicate_token_last_wins(self, vocab, tmp_path, caplog):
        path = tmp_path / "emb.txt"
        path.write_text("dog 1 1 1 1\ndog 2 2 2 2\n")
        table = self._table(vocab)
        with caplog.at_level(logging.WARNING):
            load_pretrained(str(path), vocab, table)
        assert any("duplicate" in r.message for r in caplog.records)
        np.testing.assert_array_equal(table.v[vocab.word_id("dog")], [2, 2, 2, 2])

    def test_malformed_row(self, vocab, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("dog one two\n")
        with pytest.raises(DataError):
            load_pretrained(str(path), vocab, self._table(vocab))

    def test_dimension_conflict(self, vocab, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("dog 1 2\n")
        with pytest.raises(DataError):
            load_pretrained(str(path), vocab, self._table(vocab))

    def test_resize_when_allowed(self, vocab, tmp_path):
        path = tmp_path / "emb.txt"
        path.write_text("dog 1 2\n")
        table = self._table(vocab)
        load_pretrained(str(path), vocab, table, allow_resize=True, rng=Rng(2))
        assert table.dim == 2
        np.testing.assert_array_equal(table.v[vocab.word_id("dog")], [1, 2])
