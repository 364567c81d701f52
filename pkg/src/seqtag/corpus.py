"""CoNLL-U ingestion, corpus statistics, label corruption, subsampling.

Only FORM (column 2) and UPOS (column 4) are consumed; multiword-token
range lines (ID like "3-4") and empty nodes (ID like "5.1") are skipped so
sentences contain syntactic words only.  A two-column "form<TAB>tag" reader
is provided for WSJ-style data.  All files are UTF-8.
"""

import logging
import math
from collections import Counter
from dataclasses import dataclass, field

log = logging.getLogger(__name__)

# UD v1.2 coarse tagset (17 tags; v1.2 uses CONJ, not CCONJ)
UPOS_TAGS = frozenset(
    "ADJ ADP ADV AUX CONJ DET INTJ NOUN NUM PART PRON PROPN PUNCT SCONJ SYM VERB X".split()
)


class DataError(Exception):
    """Malformed or unreadable input data; message carries file:line."""


@dataclass
class Sentence:
    forms: list
    tags: list
    source: str = field(default="", compare=False)

    def __post_init__(self):
        if len(self.forms) != len(self.tags) or not self.forms:
            raise DataError(
                f"{self.source or 'sentence'}: {len(self.forms)} forms vs {len(self.tags)} tags"
            )
        if any(f == "" for f in self.forms):
            raise DataError(f"{self.source or 'sentence'}: empty form")

    def __len__(self):
        return len(self.forms)


@dataclass
class Corpus:
    sentences: list
    split: str = field(default="train", compare=False)
    language: str = field(default="", compare=False)

    def __len__(self):
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)

    def n_tokens(self):
        return sum(len(s) for s in self.sentences)

    def tagset(self):
        return sorted({t for s in self.sentences for t in s.tags})


def read_conllu(path, split="train", language=""):
    """Parse a CoNLL-U file into a Corpus; errors carry line numbers."""
    sentences = []
    forms, tags = [], []
    start_line = None
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"{path}: {e}") from e
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if line.startswith("#"):
                continue
            if not line:
                if forms:
                    sentences.append(
                        Sentence(forms, tags, f"{path}:{start_line}-{lineno - 1}")
                    )
                    forms, tags = [], []
                    start_line = None
                continue
            cols = line.split("\t")
            if len(cols) != 10:
                raise DataError(f"{path}:{lineno}: expected 10 columns, got {len(cols)}")
            if "-" in cols[0] or "." in cols[0]:
                continue  # multiword range / empty node
            if cols[1] == "":
                raise DataError(f"{path}:{lineno}: empty FORM")
            if start_line is None:
                start_line = lineno
            forms.append(cols[1])
            tags.append(cols[3])
        if forms:
            sentences.append(Sentence(forms, tags, f"{path}:{start_line}-"))
    return Corpus(sentences, split, language)


def write_conllu(corpus, path):
    """Emit forms and UPOS tags; every other column is '_'."""
    with open(path, "w", encoding="utf-8") as fh:
        for sent in corpus:
            for i, (form, tag) in enumerate(zip(sent.forms, sent.tags), 1):
                fh.write(f"{i}\t{form}\t_\t{tag}\t_\t_\t_\t_\t_\t_\n")
            fh.write("\n")


def read_twocol(path, split="train", language=""):
    """Plain "form<TAB>tag" per line, blank line between sentences."""
    sentences = []
    forms, tags = [], []
    start_line = None
    try:
        fh = open(path, encoding="utf-8")
    except OSError as e:
        raise DataError(f"{path}: {e}") from e
    with fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line:
                if forms:
                    sentences.append(
                        Sentence(forms, tags, f"{path}:{start_line}-{lineno - 1}")
                    )
                    forms, tags = [], []
                    start_line = None
                continue
            cols = line.split("\t")
            if len(cols) != 2:
                raise DataError(f"{path}:{lineno}: expected 2 columns, got {len(cols)}")
            if cols[0] == "":
                raise DataError(f"{path}:{lineno}: empty form")
            if start_line is None:
                start_line = lineno
            forms.append(cols[0])
            tags.append(cols[1])
        if forms:
            sentences.append(Sentence(forms, tags, f"{path}:{start_line}-"))
    return Corpus(sentences, split, language)


def write_twocol(corpus, path):
    with open(path, "w", encoding="utf-8") as fh:
        for sent in corpus:
            for form, tag in zip(sent.forms, sent.tags):
                fh.write(f"{form}\t{tag}\n")
            fh.write("\n")


def corrupt_labels(corpus, rate, rng):
    """Replace each gold tag, independently with probability `rate`, by a
    uniformly drawn *different* tag from the corpus tagset.

    Forms, sentence count and lengths are untouched.  Returns the corrupted
    corpus and the realized corruption count.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError(f"corruption rate {rate} outside [0, 1]")
    tagset = corpus.tagset()
    if rate > 0.0 and len(tagset) < 2:
        raise ValueError("cannot corrupt labels: corpus has fewer than 2 tags")
    corrupted = 0
    sentences = []
    for sent in corpus:
        tags = list(sent.tags)
        for i, tag in enumerate(tags):
            if rate > 0.0 and rng.uniform() < rate:
                others = [t for t in tagset if t != tag]
                tags[i] = others[rng.below(len(others))]
                corrupted += 1
        sentences.append(Sentence(list(sent.forms), tags, sent.source))
    return Corpus(sentences, corpus.split, corpus.language), corrupted


def subsample(corpus, n_sentences, rng):
    """Uniform sample of n sentences without replacement, original order kept."""
    n = len(corpus.sentences)
    if not 1 <= n_sentences <= n:
        raise ValueError(f"subsample size {n_sentences} outside [1, {n}]")
    idx = list(range(n))
    rng.shuffle(idx)
    keep = sorted(idx[:n_sentences])
    return Corpus([corpus.sentences[i] for i in keep], corpus.split, corpus.language)


def stats(corpus):
    """Token/type counts, observed tagset, mean natural-log type frequency."""
    if not corpus.sentences:
        raise ValueError("stats of empty corpus")
    freq = Counter()
    for sent in corpus:
        freq.update(sent.forms)
    tagset = corpus.tagset()
    unknown = set(tagset) - UPOS_TAGS
    if unknown:
        log.warning("tags outside the 17 UPOS tags: %s", sorted(unknown))
    return {
        "tokens": sum(freq.values()),
        "types": len(freq),
        "tagset": tagset,
        "mean_log_freq": sum(math.log(c) for c in freq.values()) / len(freq),
    }
