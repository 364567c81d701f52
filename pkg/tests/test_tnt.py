"""Trigram HMM baseline: smoothing, suffix OOV handling, Viterbi oracle."""

import itertools
import math

import pytest

from seqtag.autodiff import Rng
from seqtag.corpus import Corpus, Sentence
from seqtag.synthetic import make_suffix_corpus
from seqtag.tnt import BOUNDARY, TrigramModel, load_hmm, save_hmm, train_hmm, viterbi


def brute_force_viterbi(model, tokens):
    """Exhaustive search with the same scoring and accumulation order."""
    tags = model.tagset
    best = None
    best_seq = None
    for seq in itertools.product(range(len(tags)), repeat=len(tokens)):
        s = 0.0
        t1, t2 = BOUNDARY, BOUNDARY
        for i, ti in enumerate(seq):
            s = (s + model.transition_logp(t1, t2, tags[ti])) + model.emission_logp(
                tokens[i], tags[ti]
            )
            t1, t2 = t2, tags[ti]
        if best_seq is None or s > best:
            best, best_seq = s, seq
    return [tags[i] for i in best_seq]


def _random_corpus(rng, n_sents=30, tags=("A", "B", "C", "D"), n_words=12):
    words = [f"w{i}" for i in range(n_words)]
    sents = []
    for _ in range(n_sents):
        length = 1 + rng.below(6)
        forms = [words[rng.below(n_words)] for _ in range(length)]
        labels = [tags[rng.below(len(tags))] for _ in range(length)]
        sents.append(Sentence(forms, labels))
    return Corpus(sents)


class TestViterbiOracle:
    def test_exact_equals_brute_force_on_random_models(self):
        # 20 seeded random 4-tag models, all sentence lengths 1..6
        for seed in range(20):
            rng = Rng(1000 + seed)
            model = train_hmm(_random_corpus(rng))
            for length in range(1, 7):
                # mix of known and unknown forms exercises both emission paths
                tokens = [
                    f"w{rng.below(12)}" if rng.uniform() < 0.7 else f"novel{rng.below(9)}x"
                    for _ in range(length)
                ]
                assert viterbi(model, tokens, beam=0) == brute_force_viterbi(model, tokens), (
                    f"seed {seed}, length {length}, tokens {tokens}"
                )

    def test_uniform_model_ties_break_identically(self):
        # a one-sentence corpus makes many scores collide; both sides must
        # resolve ties toward the lowest tag indices
        corpus = Corpus([Sentence(["x", "x"], ["A", "B"]), Sentence(["x", "x"], ["B", "A"])])
        model = train_hmm(corpus)
        for tokens in (["x"], ["x", "x"], ["x", "x", "x"]):
            assert viterbi(model, tokens, beam=0) == brute_force_viterbi(model, tokens)

    def test_single_token_reduces_to_start_argmax(self):
        model = train_hmm(_random_corpus(Rng(5)))
        word = "w3"
        scores = [
            model.transition_logp(BOUNDARY, BOUNDARY, t) + model.emission_logp(word, t)
            for t in model.tagset
        ]
        want = model.tagset[max(range(len(scores)), key=lambda i: scores[i])]
        assert viterbi(model, [word], beam=0) == [want]

    def test_beam_1000_matches_exact_on_suffix_language(self):
        train_c, test_c = make_suffix_corpus(150, 40, seed=2)
        model = train_hmm(train_c)
        for sent in test_c.sentences[:25]:
            assert viterbi(model, sent.forms, beam=1000.0) == viterbi(model, sent.forms, beam=0)

    def test_bad_beam_rejected(self):
        model = train_hmm(_random_corpus(Rng(6)))
        with pytest.raises(ValueError):
            viterbi(model, ["w1"], beam=0.5)
        with pytest.raises(ValueError):
            viterbi(model, [], beam=0)


class TestDeletedInterpolation:
    def test_lambdas_sum_to_one(self):
        for seed in (1, 2, 3):
            model = train_hmm(_random_corpus(Rng(seed)))
            assert sum(model.lambdas) == pytest.approx(1.0, abs=1e-12)

    def test_bigram_determined_corpus_prefers_lambda2(self):
        # next tag fully determined by the previous one, across many contexts
        rng = Rng(11)
        sents = []
        for _ in range(60):
            length = 2 + rng.below(5)
            start = "A" if rng.uniform() < 0.5 else "B"
            tags = [start]
            for _ in range(length - 1):
                tags.append("B" if tags[-1] == "A" else "A")
            sents.append(Sentence([f"x{t}{j}" for j, t in enumerate(tags)], tags))
        model = train_hmm(Corpus(sents))
        l1, l2, l3 = model.lambdas
        assert l2 > l1 and l2 > l3

    def test_single_tag_corpus_degenerates_to_certainty(self):
        model = train_hmm(Corpus([Sentence(["a", "b", "a"], ["T", "T", "T"])]))
        assert model.transition(BOUNDARY, BOUNDARY, "T") == pytest.approx(1.0)
        assert model.transition("T", "T", "T") == pytest.approx(1.0)


class TestTransitionDistribution:
    def test_sums_to_one_for_every_history(self):
        model = train_hmm(_random_corpus(Rng(21), n_sents=15))
        histories = [BOUNDARY] + model.tagset
        for t1 in histories:
            for t2 in histories:
                total = sum(model.transition(t1, t2, t3) for t3 in model.tagset)
                assert abs(total - 1.0) < 1e-9, (t1, t2, total)

    def test_unseen_history_still_proper(self):
        # single sentence: history (B, A) exists but e.g. (C, A) does not
        model = train_hmm(Corpus([Sentence(["u", "v", "w"], ["A", "B", "C"])]))
        total = sum(model.transition("C", "A", t) for t in model.tagset)
        assert abs(total - 1.0) < 1e-9


class TestEmission:
    def test_word_seen_only_as_noun(self):
        corpus = Corpus([Sentence(["boat", "go"], ["NOUN", "VERB"])])
        model = train_hmm(corpus)
        assert model.emission("boat", "NOUN") == 1.0
        assert model.emission("boat", "VERB") == 0.0

    def test_oov_with_no_suffix_match_is_uniform_over_lowfreq_tags(self):
        # low-frequency words carry tags A and B; tag C lives only on a
        # high-frequency word, so the suffix population never sees it
        sents = [Sentence(["common"] * 11, ["C"] * 11)]
        sents.append(Sentence(["alpha", "beta"], ["A", "B"]))
        model = train_hmm(Corpus(sents))
        oov = "零零零"  # shares no suffix with any training word
        pa = model.emission(oov, "A")
        pb = model.emission(oov, "B")
        assert pa == pytest.approx(pb) and pa > 0
        assert model.emission(oov, "C") == 0.0

    def test_capitalization_split_tries_can_differ(self):
        sents = [
            Sentence(["Paris", "runs"], ["PROPN", "VERB"]),
            Sentence(["Lyon", "sings"], ["PROPN", "VERB"]),
            Sentence(["cat", "dogs"], ["NOUN", "NOUN"]),
        ]
        model = train_hmm(Corpus(sents))
        lower = {t: model.emission("runnings", t) for t in model.tagset}
        upper = {t: model.emission("Runnings", t) for t in model.tagset}
        assert lower != upper

    def test_suffix_node_distributions_sum_to_one(self):
        train_c, _ = make_suffix_corpus(120, 10, seed=4)
        model = train_hmm(train_c)
        for trie in (model.trie_upper, model.trie_lower):
            for suffix, dist in trie.dist.items():
                assert abs(sum(dist.values()) - 1.0) < 1e-9, suffix


class TestDataBenefit:
    def test_more_training_data_helps(self):
        train_c, test_c = make_suffix_corpus(2000, 150, seed=8)
        from seqtag.corpus import subsample

        small = train_hmm(subsample(train_c, 100, Rng(3)))
        big = train_hmm(subsample(train_c, 2000, Rng(3)))

        def acc(model):
            good = total = 0
            for sent in test_c:
                for got, want in zip(model.predict(sent.forms), sent.tags):
                    good += got == want
                    total += 1
            return good / total

        assert acc(big) > acc(small)


class TestPersistence:
    def test_round_trip_predictions(self, tmp_path):
        train_c, test_c = make_suffix_corpus(120, 20, seed=6)
        model = train_hmm(train_c)
        path = tmp_path / "tnt.bin"
        save_hmm(model, str(path))
        clone = load_hmm(str(path))
        assert clone.lambdas == model.lambdas
        for sent in test_c:
            assert clone.predict(sent.forms) == model.predict(sent.forms)

    def test_kind_mismatch_rejected(self, tmp_path):
        from seqtag.container import ModelError
        from seqtag.tagger import Hyperparams, save as save_bilstm, train as train_bilstm

        corpus = Corpus([Sentence(["a", "b"], ["X", "Y"])] * 3)
        hp = Hyperparams(word_dim=4, subtoken_dim=3, hidden_dim=3, epochs=1, repr_mode="w")
        path = tmp_path / "m.bin"
        save_bilstm(train_bilstm(corpus, hp), str(path))
        with pytest.raises(ModelError, match="tnt"):
            load_hmm(str(path))
