"""The suffix language: its own guarantees are the oracle for later tests."""

from seqtag.synthetic import PARTICLES, SUFFIXES, make_suffix_corpus


def _tag_of(word):
    if word in PARTICLES:
        return "PART"
    for tag, suffix in SUFFIXES.items():
        if word.endswith(suffix):
            return tag
    raise AssertionError(f"word {word!r} has no defined suffix")


class TestSuffixLanguage:
    def test_final_two_characters_determine_tag(self):
        train, test = make_suffix_corpus(80, 40, seed=3)
        for corpus in (train, test):
            for sent in corpus:
                for form, tag in zip(sent.forms, sent.tags):
                    assert _tag_of(form) == tag

    def test_oov_fraction_is_configured(self):
        train, test = make_suffix_corpus(200, 100, seed=5, oov_rate=0.3)
        train_vocab = {f for s in train for f in s.forms}
        n_tokens = sum(len(s) for s in test)
        n_oov = sum(1 for s in test for f in s.forms if f not in train_vocab)
        assert n_oov == round(0.3 * n_tokens)

    def test_deterministic(self):
        a = make_suffix_corpus(50, 20, seed=9)
        b = make_suffix_corpus(50, 20, seed=9)
        assert a[0] == b[0] and a[1] == b[1]

    def test_sizes(self):
        train, test = make_suffix_corpus(50, 20, seed=1)
        assert len(train) == 50 and len(test) == 20
