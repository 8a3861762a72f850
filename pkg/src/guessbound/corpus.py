"""Password corpora: ingestion, frequency structures and the random split.

Tokens are interned: every corpus carries a :class:`Vocabulary` and stores
samples as integer ids into it.  Two corpora derived from one another (for
example the halves of a :class:`Partition`) share the same vocabulary, so id
comparisons are meaningful between them.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Mapping, Sequence, Union

import numpy as np

__all__ = [
    "CorpusFormatError",
    "Vocabulary",
    "IndexedLabels",
    "SampleCorpus",
    "FrequencyTable",
    "FrequencyEncoding",
    "Partition",
    "load_corpus",
    "frequency_encoding",
    "top_g_mass",
    "top_g_set",
    "partition",
    "merge",
]

FORMATS = ("plain", "counted", "counts_only")


class CorpusFormatError(ValueError):
    """Raised for malformed corpus files; carries the 1-based line number."""

    def __init__(self, message, lineno=None, path=None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if lineno is not None:
            where += f"{lineno}: "
        elif where:
            where += " "
        super().__init__(where + message)


def _readonly(a):
    a = np.asarray(a)
    a.setflags(write=False)
    return a


class Vocabulary:
    """Interned token store mapping tokens to dense integer ids.

    Ids are stable within a run only.  ``lexsorted`` is True when id order
    coincides with lexicographic token order, which lets tie-breaking skip a
    string sort.
    """

    lexsorted = False

    def __init__(self, tokens: Iterable[Hashable] = ()):
        self._tokens: list = []
        self._index: dict = {}
        for tok in tokens:
            self.intern(tok)

    def intern(self, token) -> int:
        i = self._index.get(token)
        if i is None:
            i = len(self._tokens)
            self._index[token] = i
            self._tokens.append(token)
        return i

    def id_of(self, token, default: int = -1) -> int:
        return self._index.get(token, default)

    def __getitem__(self, i):
        return self._tokens[i]

    def __len__(self):
        return len(self._tokens)

    def __contains__(self, token):
        return token in self._index

    def lex_ranks(self, ids: np.ndarray) -> np.ndarray:
        """Rank of each id's token in lexicographic order (among ``ids``)."""
        ids = np.asarray(ids)
        if self.lexsorted or ids.size == 0:
            return ids
        order = sorted(range(ids.size), key=lambda k: _sort_key(self[ids[k]]))
        ranks = np.empty(ids.size, dtype=np.int64)
        ranks[np.asarray(order, dtype=np.int64)] = np.arange(ids.size)
        return ranks


def _sort_key(token):
    if isinstance(token, str):
        return token.encode("utf-8", "surrogateescape")
    return token


class IndexedLabels(Vocabulary):
    """Synthetic vocabulary whose token for id ``i`` is a zero-padded label.

    Padding makes lexicographic order equal to numeric order, so the
    vocabulary is ``lexsorted`` and needs no per-token storage.
    """

    lexsorted = True

    def __init__(self, size: int, prefix: str = "pw"):
        self.size = int(size)
        self.prefix = prefix
        self.width = max(1, len(str(max(self.size - 1, 0))))

    def intern(self, token):
        i = self.id_of(token)
        if i < 0:
            raise KeyError(f"{token!r} is not a label of this vocabulary")
        return i

    def id_of(self, token, default=-1):
        if isinstance(token, bytes):
            token = token.decode("ascii", "replace")
        if not isinstance(token, str) or not token.startswith(self.prefix):
            return default
        digits = token[len(self.prefix):]
        if len(digits) != self.width or not digits.isdigit():
            return default
        i = int(digits)
        return i if i < self.size else default

    def __getitem__(self, i):
        i = int(i)
        if not 0 <= i < self.size:
            raise IndexError(i)
        return f"{self.prefix}{i:0{self.width}d}"

    def __len__(self):
        return self.size

    def __contains__(self, token):
        return self.id_of(token) >= 0


@dataclass(frozen=True, eq=False)
class SampleCorpus:
    """An ordered multiset of password samples (the sample ``S``)."""

    ids: np.ndarray
    vocab: Vocabulary

    def __post_init__(self):
        object.__setattr__(self, "ids", _readonly(np.asarray(self.ids, dtype=np.int64)))

    @classmethod
    def from_tokens(cls, tokens: Iterable[Hashable], vocab: Vocabulary | None = None):
        vocab = Vocabulary() if vocab is None else vocab
        ids = np.fromiter((vocab.intern(t) for t in tokens), dtype=np.int64)
        return cls(ids, vocab)

    @property
    def n(self) -> int:
        return int(self.ids.size)

    @property
    def samples(self) -> list:
        return [self.vocab[i] for i in self.ids]

    def __len__(self):
        return self.n

    def frequency_table(self) -> "FrequencyTable":
        if self.n == 0:
            return FrequencyTable._from_id_counts(np.zeros(0, np.int64), np.zeros(0, np.int64), self.vocab)
        uniq, counts = np.unique(self.ids, return_counts=True)
        return FrequencyTable._from_id_counts(uniq, counts, self.vocab)


@dataclass(frozen=True, eq=False)
class FrequencyTable:
    """Password counts in descending order, ties broken lexicographically.

    ``ids[r]`` is the id of the password with rank ``r`` (0-based) and
    ``ordered_counts[r]`` its count, so ``ids[:g]`` is ``T(S, g)``.
    """

    ids: np.ndarray
    ordered_counts: np.ndarray
    vocab: Vocabulary
    n: int = field(init=False)

    def __post_init__(self):
        ids = np.asarray(self.ids, dtype=np.int64)
        counts = np.asarray(self.ordered_counts, dtype=np.int64)
        if ids.shape != counts.shape:
            raise ValueError("ids and counts must align")
        if counts.size and counts.min() <= 0:
            raise ValueError("counts must be positive")
        if counts.size > 1 and np.any(np.diff(counts) > 0):
            raise ValueError("counts must be non-increasing")
        object.__setattr__(self, "ids", _readonly(ids))
        object.__setattr__(self, "ordered_counts", _readonly(counts))
        object.__setattr__(self, "n", int(counts.sum()))

    @classmethod
    def _from_id_counts(cls, ids, counts, vocab):
        ids = np.asarray(ids, dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64)
        keep = counts > 0
        ids, counts = ids[keep], counts[keep]
        order = np.lexsort((vocab.lex_ranks(ids), -counts))
        return cls(ids[order], counts[order], vocab)

    @classmethod
    def from_counts(cls, counts: Mapping[Hashable, int], vocab: Vocabulary | None = None):
        vocab = Vocabulary() if vocab is None else vocab
        ids, values = [], []
        for tok, c in counts.items():
            c = int(c)
            if c <= 0:
                raise ValueError(f"count for {tok!r} must be positive, got {c}")
            ids.append(vocab.intern(tok))
            values.append(c)
        return cls._from_id_counts(np.asarray(ids, np.int64), np.asarray(values, np.int64), vocab)

    @property
    def distinct(self) -> int:
        return int(self.ids.size)

    @property
    def tokens(self) -> list:
        return [self.vocab[i] for i in self.ids]

    @cached_property
    def counts(self) -> dict:
        return {self.vocab[i]: int(c) for i, c in zip(self.ids, self.ordered_counts)}

    @cached_property
    def cumulative(self) -> np.ndarray:
        """``cumulative[g]`` is the summed count of the top ``g`` passwords."""
        return _readonly(np.concatenate(([0], np.cumsum(self.ordered_counts))))

    @cached_property
    def rank_by_id(self) -> np.ndarray:
        """Dense lookup id -> 0-based rank, ``-1`` for absent ids."""
        size = len(self.vocab) if len(self.vocab) else 0
        if self.ids.size:
            size = max(size, int(self.ids.max()) + 1)
        ranks = np.full(size, -1, dtype=np.int64)
        ranks[self.ids] = np.arange(self.ids.size)
        return _readonly(ranks)

    def ranks_of(self, ids: np.ndarray) -> np.ndarray:
        """0-based rank of each id, ``-1`` when the password is absent."""
        ids = np.asarray(ids, dtype=np.int64)
        table = self.rank_by_id
        out = np.full(ids.shape, -1, dtype=np.int64)
        inside = ids < table.size
        out[inside] = table[ids[inside]]
        return out

    def __len__(self):
        return self.distinct


@dataclass(frozen=True)
class FrequencyEncoding:
    """Frequency-of-frequencies ``F``: ``f_of_f[i]`` passwords seen exactly ``i`` times."""

    f_of_f: Mapping[int, int]
    n: int
    distinct: int
    unique: int

    def __post_init__(self):
        total = sum(i * c for i, c in self.f_of_f.items())
        if total != self.n:
            raise ValueError(f"sum i*F_i = {total} but n = {self.n}")
        if sum(self.f_of_f.values()) != self.distinct:
            raise ValueError("distinct must equal sum of F_i")
        if self.f_of_f.get(1, 0) != self.unique:
            raise ValueError("unique must equal F_1")

    @classmethod
    def from_mapping(cls, f_of_f: Mapping[int, int]):
        clean = {int(i): int(c) for i, c in f_of_f.items() if c}
        if any(i < 1 or c < 0 for i, c in clean.items()):
            raise ValueError("frequency encoding needs i >= 1 and F_i >= 0")
        return cls(
            f_of_f=dict(sorted(clean.items())),
            n=sum(i * c for i, c in clean.items()),
            distinct=sum(clean.values()),
            unique=clean.get(1, 0),
        )

    def __getitem__(self, i: int) -> int:
        return self.f_of_f.get(i, 0)

    def mass_at_least(self, j: int) -> int:
        """Number of samples whose password occurs at least ``j`` times."""
        return sum(i * c for i, c in self.f_of_f.items() if i >= j)

    def duplicated(self, factor: int) -> "FrequencyEncoding":
        """Encoding of the corpus in which every sample is repeated ``factor`` times."""
        return FrequencyEncoding.from_mapping({i * factor: c for i, c in self.f_of_f.items()})


@dataclass(frozen=True, eq=False)
class Partition:
    """Random split of ``S`` into ``D1`` (size ``n - d``) and ``D2`` (size ``d``)."""

    d1: FrequencyTable
    d2: SampleCorpus
    d: int
    seed: object

    def __post_init__(self):
        if self.d2.n != self.d:
            raise ValueError("d2 must hold exactly d samples")

    @property
    def n(self) -> int:
        return self.d1.n + self.d2.n

    @cached_property
    def d2_ranks(self) -> np.ndarray:
        """Rank in ``D1`` of every ``D2`` sample (``-1`` if unseen in ``D1``)."""
        return _readonly(self.d1.ranks_of(self.d2.ids))

    @cached_property
    def sorted_d2_ranks(self) -> np.ndarray:
        r = self.d2_ranks
        return _readonly(np.sort(r[r >= 0]))


def _parse_count(raw: bytes, lineno, path):
    try:
        value = int(raw)
    except ValueError:
        raise CorpusFormatError(f"expected an integer count, got {raw[:40]!r}", lineno, path) from None
    if value <= 0:
        raise CorpusFormatError(f"count must be positive, got {value}", lineno, path)
    return value


def _lines(stream):
    for lineno, raw in enumerate(stream, start=1):
        if raw.endswith(b"\n"):
            raw = raw[:-1]
        if raw.endswith(b"\r"):
            raw = raw[:-1]
        yield lineno, raw


def load_corpus(path: Union[str, os.PathLike, io.BufferedIOBase], format: str = "plain"):
    """Read a corpus file in one pass.

    ``plain`` has one token per line and yields a :class:`SampleCorpus`;
    ``counted`` has ``count<TAB>token`` lines and ``counts_only`` one positive
    integer per line, both yielding a :class:`FrequencyTable`.  Tokens are
    kept as raw bytes.  Synthetic tokens for ``counts_only`` are ``b"#0"``,
    ``b"#1"``, ... assigned in descending-count order.
    """
    if format not in FORMATS:
        raise ValueError(f"unknown corpus format {format!r}; expected one of {FORMATS}")
    if hasattr(path, "read"):
        return _load_stream(path, format, getattr(path, "name", None))
    with open(path, "rb") as fh:
        return _load_stream(fh, format, os.fspath(path))


def _load_stream(fh, format, path):
    vocab = Vocabulary()
    if format == "plain":
        ids = [vocab.intern(raw) for _, raw in _lines(fh)]
        return SampleCorpus(np.asarray(ids, dtype=np.int64), vocab)

    if format == "counted":
        counts: dict[int, int] = {}
        for lineno, raw in _lines(fh):
            head, sep, token = raw.partition(b"\t")
            if not sep:
                raise CorpusFormatError("expected 'count<TAB>token'", lineno, path)
            c = _parse_count(head.strip(), lineno, path)
            i = vocab.intern(token)
            counts[i] = counts.get(i, 0) + c
        ids = np.fromiter(counts.keys(), dtype=np.int64, count=len(counts))
        values = np.fromiter(counts.values(), dtype=np.int64, count=len(counts))
        return FrequencyTable._from_id_counts(ids, values, vocab)

    values = []
    for lineno, raw in _lines(fh):
        if not raw.strip():
            raise CorpusFormatError("empty line in counts_only file", lineno, path)
        values.append(_parse_count(raw.strip(), lineno, path))
    values = np.sort(np.asarray(values, dtype=np.int64))[::-1]
    for k in range(values.size):
        vocab.intern(b"#%d" % k)
    return FrequencyTable(np.arange(values.size, dtype=np.int64), values, vocab)


def _as_table(obj) -> FrequencyTable:
    if isinstance(obj, FrequencyTable):
        return obj
    if isinstance(obj, SampleCorpus):
        return obj.frequency_table()
    raise TypeError(f"expected SampleCorpus or FrequencyTable, got {type(obj).__name__}")


def frequency_encoding(table: Union[FrequencyTable, SampleCorpus]) -> FrequencyEncoding:
    table = _as_table(table)
    if table.n == 0:
        raise ValueError("frequency encoding of an empty corpus")
    values, mult = np.unique(table.ordered_counts, return_counts=True)
    return FrequencyEncoding(
        f_of_f={int(i): int(c) for i, c in zip(values, mult)},
        n=table.n,
        distinct=table.distinct,
        unique=int(mult[0]) if values[0] == 1 else 0,
    )


def top_g_mass(table: Union[FrequencyTable, SampleCorpus], g: int) -> float:
    """Empirical guessing curve: share of samples covered by the ``g`` most frequent passwords."""
    table = _as_table(table)
    if g < 0:
        raise ValueError("g must be non-negative")
    if table.n == 0:
        return 0.0
    if g >= table.distinct:
        return 1.0
    return float(table.cumulative[int(g)]) / table.n


def top_g_set(table: Union[FrequencyTable, SampleCorpus], g: int) -> set:
    table = _as_table(table)
    if g < 0:
        raise ValueError("g must be non-negative")
    return {table.vocab[i] for i in table.ids[: int(g)]}


def partition(corpus: Union[SampleCorpus, FrequencyTable], d: int, seed=None) -> Partition:
    """Split a sample uniformly at random into ``D1`` (``n - d`` samples) and ``D2`` (``d``).

    Uses ``numpy.random.default_rng(seed)`` (PCG64).  Raw corpora are
    shuffled and split; frequency tables draw ``D2`` with a multivariate
    hypergeometric, which has the same law.
    """
    n = corpus.n
    d = int(d)
    if not 0 < d < n:
        raise ValueError(f"split size d={d} must satisfy 0 < d < n={n}")
    rng = np.random.default_rng(seed)

    if isinstance(corpus, SampleCorpus):
        perm = rng.permutation(n)
        shuffled = corpus.ids[perm]
        d1 = SampleCorpus(shuffled[: n - d], corpus.vocab).frequency_table()
        d2 = SampleCorpus(shuffled[n - d:], corpus.vocab)
        return Partition(d1, d2, d, seed)

    table = _as_table(corpus)
    drawn = rng.multivariate_hypergeometric(table.ordered_counts, d, method="marginals")
    d2_ids = np.repeat(table.ids, drawn)
    rng.shuffle(d2_ids)
    d1 = FrequencyTable._from_id_counts(table.ids, table.ordered_counts - drawn, table.vocab)
    return Partition(d1, SampleCorpus(d2_ids, table.vocab), d, seed)


def merge(part: Partition) -> FrequencyTable:
    """Recombine the halves of a partition into one frequency table."""
    d2 = part.d2.frequency_table()
    ids = np.concatenate([part.d1.ids, d2.ids])
    counts = np.concatenate([part.d1.ordered_counts, d2.ordered_counts])
    uniq, inverse = np.unique(ids, return_inverse=True)
    total = np.bincount(inverse, weights=counts).astype(np.int64)
    return FrequencyTable._from_id_counts(uniq, total, part.d1.vocab)
