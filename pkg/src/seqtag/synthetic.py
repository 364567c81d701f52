"""Synthetic suffix language for controlled tagging experiments.

Every word's final two characters determine its tag, so a character-level
model can in principle tag unseen words perfectly while a pure word-level
model cannot.  Tags follow a first-order Markov grammar (so sequence models
and HMM transitions both have signal), open-class words are stem+suffix
drawn with Zipfian type frequencies (rare types exist at every corpus
size), and a small closed class of particles carries its own distinct
endings.
"""

import bisect

from .autodiff import Rng
from .corpus import Corpus, Sentence

SUFFIXES = {"NOUN": "na", "VERB": "ve", "ADJ": "ad", "ADV": "ro"}
PARTICLES = ["qo", "zu", "ke", "pi", "lo"]
_TAGS = ["NOUN", "VERB", "ADJ", "ADV", "PART"]

_START = {"NOUN": 0.35, "VERB": 0.2, "ADJ": 0.2, "ADV": 0.1, "PART": 0.15}
_TRANS = {
    "NOUN": {"VERB": 0.5, "NOUN": 0.1, "ADJ": 0.1, "ADV": 0.1, "PART": 0.2},
    "VERB": {"NOUN": 0.3, "ADJ": 0.25, "ADV": 0.2, "VERB": 0.1, "PART": 0.15},
    "ADJ": {"NOUN": 0.6, "ADJ": 0.15, "VERB": 0.1, "ADV": 0.05, "PART": 0.1},
    "ADV": {"VERB": 0.5, "ADJ": 0.2, "ADV": 0.1, "NOUN": 0.1, "PART": 0.1},
    "PART": {"NOUN": 0.4, "VERB": 0.4, "ADJ": 0.1, "ADV": 0.1},
}
_LETTERS = "abcdefghijklmnopqrstuvwxyz"


def _pick(dist, rng):
    u = rng.uniform()
    acc = 0.0
    for k, p in dist.items():
        acc += p
        if u < acc:
            return k
    return k  # guard against rounding at the upper edge


def _stem(rng):
    n = 2 + rng.below(4)  # 2..5 letters
    return "".join(_LETTERS[rng.below(26)] for _ in range(n))


def _make_lexicon(rng, types_per_tag):
    lex = {}
    for tag, suffix in SUFFIXES.items():
        pool = []
        seen = set()
        while len(pool) < types_per_tag:
            w = _stem(rng) + suffix
            if w not in seen:
                seen.add(w)
                pool.append(w)
        lex[tag] = pool
    lex["PART"] = list(PARTICLES)
    return lex


def _sentences(rng, lexicon, n, min_len, max_len, source):
    out = []
    for k in range(n):
        length = min_len + rng.below(max_len - min_len + 1)
        tags, forms = [], []
        tag = _pick(_START, rng)
        for _ in range(length):
            pool = lexicon[tag]
            forms.append(pool[rng.below(len(pool))])
            tags.append(tag)
            tag = _pick(_TRANS[tag], rng)
        out.append(Sentence(forms, tags, f"{source}:{k}"))
    return out


def make_suffix_corpus(
    n_train,
    n_test,
    seed=1,
    types_per_tag=150,
    min_len=3,
    max_len=7,
    oov_rate=0.3,
):
    """Build (train, test) corpora of the suffix language.

    Exactly round(oov_rate * test tokens) test positions (drawn among
    open-class tokens) are replaced by fresh types absent from the training
    split, each keeping its tag's suffix; the remaining test words are drawn
    from types actually realized in the training sentences.
    """
    rng = Rng(seed)
    lexicon = _make_lexicon(rng.child(0), types_per_tag)
    train_sents = _sentences(rng.child(1), lexicon, n_train, min_len, max_len, "synth-train")

    realized = {tag: sorted({f for s in train_sents for f, t in zip(s.forms, s.tags) if t == tag})
                for tag in _TAGS}
    train_vocab = {f for s in train_sents for f in s.forms}

    test_rng = rng.child(2)
    test_sents = _sentences(
        test_rng, {t: realized[t] or lexicon[t] for t in _TAGS}, n_test, min_len, max_len, "synth-test"
    )

    open_positions = [
        (i, j)
        for i, s in enumerate(test_sents)
        for j, t in enumerate(s.tags)
        if t != "PART"
    ]
    n_tokens = sum(len(s) for s in test_sents)
    n_oov = min(len(open_positions), round(oov_rate * n_tokens))
    test_rng.shuffle(open_positions)
    for i, j in open_positions[:n_oov]:
        tag = test_sents[i].tags[j]
        while True:
            w = _stem(test_rng) + SUFFIXES[tag]
            if w not in train_vocab:
                break
        test_sents[i].forms[j] = w

    return (
        Corpus(train_sents, "train", "synth"),
        Corpus(test_sents, "test", "synth"),
    )
