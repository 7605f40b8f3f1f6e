"""Tokens, alphabets and words over generator matrices.

A word is an immutable token-id sequence bound to an :class:`Alphabet`.
Alphabets may carry a matrix realization, in which case a word evaluates
to the ordered product of its token matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

MATRIX_TOL = 1e-9


class AlphabetError(ValueError):
    pass


class DecodeError(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    id: int
    label: str
    inverse_id: int | None = None


@dataclass(frozen=True, eq=False)
class Alphabet:
    """Ordered token set, optionally realized as square real matrices.

    ``matrices`` is indexed by token id.  Inverse pairs are checked at
    construction: the realization of an inverse must be the matrix inverse.
    """

    name: str
    tokens: tuple[Token, ...]
    matrices: tuple[np.ndarray, ...] | None = None
    _by_label: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.tokens) > 2**16:
            raise AlphabetError("alphabet larger than 2^16 tokens")
        for i, t in enumerate(self.tokens):
            if t.id != i:
                raise AlphabetError(f"token {t.label!r} has id {t.id}, expected {i}")
        labels = [t.label for t in self.tokens]
        if len(set(labels)) != len(labels):
            raise AlphabetError("duplicate token labels")
        for t in self.tokens:
            if any(c.isspace() for c in t.label) or not t.label:
                raise AlphabetError(f"bad token label {t.label!r}")
            if t.inverse_id is not None:
                if not 0 <= t.inverse_id < len(self.tokens):
                    raise AlphabetError(f"inverse of {t.label!r} out of range")
                if self.tokens[t.inverse_id].inverse_id != t.id:
                    raise AlphabetError(f"inverse of {t.label!r} is not an involution")
        object.__setattr__(self, "_by_label", {t.label: t.id for t in self.tokens})
        if self.matrices is not None:
            mats = tuple(np.array(m, dtype=float) for m in self.matrices)
            if len(mats) != len(self.tokens):
                raise AlphabetError("need one matrix per token")
            n = mats[0].shape[0] if mats else 0
            for m in mats:
                if m.shape != (n, n):
                    raise AlphabetError("matrices must be square and of equal size")
                m.setflags(write=False)
            for t in self.tokens:
                if t.inverse_id is not None:
                    prod = mats[t.id] @ mats[t.inverse_id]
                    if np.abs(prod - np.eye(n)).max() > 1e-10:
                        raise AlphabetError(f"realization of {t.label!r} inverse is not a matrix inverse")
            object.__setattr__(self, "matrices", mats)

    def _key(self):
        mats = None if self.matrices is None else tuple(m.tobytes() for m in self.matrices)
        return (self.name, self.tokens, mats)

    def __eq__(self, other):
        if not isinstance(other, Alphabet):
            return NotImplemented
        return self is other or self._key() == other._key()

    def __hash__(self):
        return hash((self.name, self.tokens))

    def __len__(self):
        return len(self.tokens)

    @property
    def dim(self) -> int | None:
        if self.matrices is None:
            return None
        return self.matrices[0].shape[0] if self.matrices else 0

    @property
    def realized(self) -> bool:
        return self.matrices is not None

    @property
    def inverse_closed(self) -> bool:
        return all(t.inverse_id is not None for t in self.tokens)

    @property
    def code_width(self) -> int:
        """Bits per token in the fixed-width code."""
        return math.ceil(math.log2(len(self.tokens))) if len(self.tokens) > 1 else 0

    def index(self, label: str) -> int:
        try:
            return self._by_label[label]
        except KeyError:
            raise AlphabetError(f"unknown token {label!r} in alphabet {self.name!r}") from None

    def label(self, token_id: int) -> str:
        return self.tokens[token_id].label

    def inverse(self, token_id: int) -> int:
        inv = self.tokens[token_id].inverse_id
        if inv is None:
            raise AlphabetError(f"token {self.tokens[token_id].label!r} has no inverse")
        return inv

    def word(self, labels: str | Iterable[str]) -> "Word":
        """Build a word from labels (a whitespace-separated string also works)."""
        if isinstance(labels, str):
            labels = labels.split()
        return Word(tuple(self.index(s) for s in labels), self)

    def empty(self) -> "Word":
        return Word((), self)

    @classmethod
    def plain(cls, name: str, labels: Iterable[str]) -> "Alphabet":
        """Alphabet of bare symbols with no inverses and no matrices."""
        return cls(name, tuple(Token(i, lab, None) for i, lab in enumerate(labels)))

    @classmethod
    def from_generators(cls, name: str, generators: Mapping[str, np.ndarray | None],
                        inverse_suffix: str = "^-1") -> "Alphabet":
        """Alphabet made of generators followed by their formal inverses.

        Generators come first (ids 0..k-1), inverses after (ids k..2k-1).
        A ``None`` matrix leaves the alphabet unrealized.
        """
        labels = list(generators)
        k = len(labels)
        tokens = [Token(i, s, i + k) for i, s in enumerate(labels)]
        tokens += [Token(i + k, s + inverse_suffix, i) for i, s in enumerate(labels)]
        mats = list(generators.values())
        if any(m is None for m in mats):
            return cls(name, tuple(tokens))
        mats = [np.asarray(m, dtype=float) for m in mats]
        return cls(name, tuple(tokens), tuple(mats + [np.linalg.inv(m) for m in mats]))


@dataclass(frozen=True)
class Word:
    tokens: tuple[int, ...]
    alphabet: Alphabet = field(compare=False)

    def __post_init__(self):
        n = len(self.alphabet)
        tokens = tuple(int(t) for t in self.tokens)
        for t in tokens:
            if not 0 <= t < n:
                raise AlphabetError(f"token id {t} not in alphabet {self.alphabet.name!r}")
        object.__setattr__(self, "tokens", tokens)

    def __eq__(self, other):
        if not isinstance(other, Word):
            return NotImplemented
        return self.tokens == other.tokens and self.alphabet == other.alphabet

    def __hash__(self):
        return hash((self.alphabet.name, self.tokens))

    def __len__(self):
        return len(self.tokens)

    def __iter__(self):
        return iter(self.tokens)

    def __add__(self, other: "Word") -> "Word":
        return concat(self, other)

    def __mul__(self, k: int) -> "Word":
        return Word(self.tokens * k, self.alphabet)

    def labels(self) -> list[str]:
        return [self.alphabet.label(t) for t in self.tokens]

    def __str__(self):
        return " ".join(self.labels())


def concat(a: Word, b: Word) -> Word:
    if a.alphabet != b.alphabet:
        raise AlphabetError(f"cannot concatenate words over {a.alphabet.name!r} and {b.alphabet.name!r}")
    return Word(a.tokens + b.tokens, a.alphabet)


def concat_all(words: Sequence[Word], alphabet: Alphabet | None = None) -> Word:
    if not words:
        if alphabet is None:
            raise ValueError("need an alphabet to concatenate zero words")
        return alphabet.empty()
    out = words[0]
    for w in words[1:]:
        out = concat(out, w)
    return out


def reverse_inverse(w: Word) -> Word:
    """The group inverse: reversed order, each token replaced by its inverse."""
    a = w.alphabet
    return Word(tuple(a.inverse(t) for t in reversed(w.tokens)), a)


def reduce_free(w: Word) -> Word:
    """Cancel adjacent token/inverse pairs until none remain (stack scan)."""
    a = w.alphabet
    out: list[int] = []
    for t in w.tokens:
        if out and a.tokens[t].inverse_id == out[-1]:
            out.pop()
        else:
            out.append(t)
    return Word(tuple(out), a)


def evaluate(w: Word) -> np.ndarray:
    a = w.alphabet
    if a.matrices is None:
        raise AlphabetError(f"alphabet {a.name!r} has no matrix realization")
    m = np.eye(a.dim)
    for t in w.tokens:
        m = m @ a.matrices[t]
    return m


# -- self-delimiting binary code ------------------------------------------

@dataclass(frozen=True)
class SelfDelimitedCode:
    bits: str
    declared_length: int

    def __len__(self):
        return len(self.bits)


def elias_gamma(n: int) -> str:
    """Elias gamma code of a positive integer."""
    if n < 1:
        raise ValueError("gamma code needs n >= 1")
    b = bin(n)[2:]
    return "0" * (len(b) - 1) + b


def read_elias_gamma(bits: str, pos: int = 0) -> tuple[int, int]:
    """Decode one gamma code starting at ``pos``; returns (value, new_pos)."""
    zeros = 0
    while pos + zeros < len(bits) and bits[pos + zeros] == "0":
        zeros += 1
    end = pos + 2 * zeros + 1
    if end > len(bits):
        raise DecodeError("truncated gamma code")
    return int(bits[pos + zeros:end], 2), end


def encode_self_delimiting(w: Word) -> SelfDelimitedCode:
    """Gamma-coded (length + 1) followed by fixed-width token ids."""
    width = w.alphabet.code_width
    body = "".join(format(t, f"0{width}b") for t in w.tokens) if width else ""
    bits = elias_gamma(len(w) + 1) + body
    return SelfDelimitedCode(bits, len(bits))


def decode_self_delimiting(code: SelfDelimitedCode | str, alphabet: Alphabet,
                           allow_trailing: bool = False) -> Word:
    bits = code.bits if isinstance(code, SelfDelimitedCode) else code
    if any(c not in "01" for c in bits):
        raise DecodeError("code must be a string of 0/1")
    n, pos = read_elias_gamma(bits)
    n -= 1
    width = alphabet.code_width
    end = pos + n * width
    if end > len(bits):
        raise DecodeError(f"code truncated: need {end} bits, have {len(bits)}")
    if end != len(bits) and not allow_trailing:
        raise DecodeError(f"{len(bits) - end} trailing bits after word")
    tokens = [int(bits[pos + i * width: pos + (i + 1) * width], 2) if width else 0 for i in range(n)]
    if any(t >= len(alphabet) for t in tokens):
        raise DecodeError("token id outside alphabet")
    return Word(tuple(tokens), alphabet)


def bits_to_bytes(bits: str) -> bytes:
    """Pack a bit string into bytes, zero-padding the last byte."""
    if not bits:
        return b""
    pad = (-len(bits)) % 8
    bits = bits + "0" * pad
    return int(bits, 2).to_bytes(len(bits) // 8, "big")


def bytes_to_bits(data: bytes) -> str:
    return "".join(format(b, "08b") for b in data)
