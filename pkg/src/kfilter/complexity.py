"""Compression upper bounds on Kolmogorov complexity.

Every estimator is a real, decodable code over byte strings.  The coded
stream is a container::

    mode bit | gamma(n_bytes + 1) | payload

where mode 0 stores the bytes verbatim and mode 1 holds the estimator's
compressed payload; the encoder keeps whichever is shorter.  The literal
branch gives ``bits <= l + 2 log2 l + HEADER_SLACK_BITS`` for every input of
``l >= 16`` bits.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable

from .words import DecodeError, Word, elias_gamma, encode_self_delimiting, read_elias_gamma, bits_to_bytes

ESTIMATORS = ("lz78", "lzw", "dict_coder")
ESTIMATOR_VERSIONS = {"lz78": "lz78/1", "lzw": "lzw/1", "dict_coder": "dict_coder/1"}
DEFAULT_ESTIMATOR = "dict_coder"

# mode bit + the terminating bit of the gamma length code + rounding of log2
HEADER_SLACK_BITS = 3

ESCAPE = 0xFF
SEPARATOR = b"\xff\x00"


class UnknownEstimator(ValueError):
    pass


@dataclass(frozen=True)
class ComplexityEstimate:
    estimator: str
    bits: int
    input_len_bits: int

    @property
    def version(self) -> str:
        return ESTIMATOR_VERSIONS[self.estimator]

    @property
    def ratio(self) -> float:
        return self.bits / self.input_len_bits if self.input_len_bits else 0.0

    def report(self) -> dict:
        d = asdict(self)
        d["ratio"] = self.ratio
        d["version"] = self.version
        return d


class _Bits:
    """Append-only bit string builder."""

    def __init__(self):
        self.parts: list[str] = []
        self.n = 0

    def put(self, value: int, width: int):
        if width:
            self.parts.append(format(value, f"0{width}b"))
            self.n += width

    def gamma(self, value: int):
        s = elias_gamma(value)
        self.parts.append(s)
        self.n += len(s)

    def delta(self, value: int):
        s = elias_delta(value)
        self.parts.append(s)
        self.n += len(s)

    def raw(self, s: str):
        self.parts.append(s)
        self.n += len(s)

    def getvalue(self) -> str:
        return "".join(self.parts)


class _Reader:
    def __init__(self, bits: str, pos: int = 0):
        self.bits = bits
        self.pos = pos

    def get(self, width: int) -> int:
        if width == 0:
            return 0
        end = self.pos + width
        if end > len(self.bits):
            raise DecodeError("truncated stream")
        v = int(self.bits[self.pos:end], 2)
        self.pos = end
        return v

    def gamma(self) -> int:
        v, self.pos = read_elias_gamma(self.bits, self.pos)
        return v

    def delta(self) -> int:
        nbits = self.gamma()
        return (1 << (nbits - 1)) | self.get(nbits - 1)


def elias_delta(n: int) -> str:
    """Elias delta code: gamma(bit length) followed by the low bits."""
    if n < 1:
        raise ValueError("delta code needs n >= 1")
    b = bin(n)[2:]
    return elias_gamma(len(b)) + b[1:]


# -- LZ78 -----------------------------------------------------------------------

def lz78_phrases(seq) -> list:
    """LZ78 incremental parse of any sequence of hashable symbols.

    The final phrase may repeat an earlier one when the input runs out.
    """
    trie: dict = {}
    phrases = []
    node, start = 0, 0
    for i, sym in enumerate(seq):
        nxt = trie.get((node, sym))
        if nxt is None:
            trie[(node, sym)] = len(trie) + 1
            phrases.append(seq[start:i + 1])
            node, start = 0, i + 1
        else:
            node = nxt
    if start < len(seq):
        phrases.append(seq[start:])
    return phrases


def _lz78_encode(data: bytes, out: _Bits):
    trie: dict[tuple[int, int], int] = {}
    size = 1  # root
    node = 0
    for b in data:
        nxt = trie.get((node, b))
        if nxt is None:
            out.put(node, (size - 1).bit_length())
            out.put(b, 8)
            trie[(node, b)] = size
            size += 1
            node = 0
        else:
            node = nxt
    if node:
        out.put(node, (size - 1).bit_length())


def _lz78_decode(r: _Reader, n: int) -> bytes:
    phrases = [b""]
    out = bytearray()
    while len(out) < n:
        idx = r.get((len(phrases) - 1).bit_length())
        if idx >= len(phrases):
            raise DecodeError("lz78 index out of range")
        out += phrases[idx]
        if len(out) >= n:
            break
        b = r.get(8)
        phrases.append(phrases[idx] + bytes([b]))
        out.append(b)
    if len(out) != n:
        raise DecodeError("lz78 stream overruns declared length")
    return bytes(out)


# -- LZW --------------------------------------------------------------------------

LZW_MAX_BITS = 12
LZW_MIN_BITS = 9
_LZW_FULL = 1 << LZW_MAX_BITS


def _lzw_width(dict_size: int) -> int:
    return max(LZW_MIN_BITS, (min(dict_size, _LZW_FULL) - 1).bit_length())


def _lzw_encode(data: bytes, out: _Bits):
    if not data:
        return
    table = {bytes([i]): i for i in range(256)}
    cur = data[:1]
    for b in data[1:]:
        ext = cur + bytes([b])
        if ext in table:
            cur = ext
            continue
        out.put(table[cur], _lzw_width(len(table)))
        if len(table) < _LZW_FULL:
            table[ext] = len(table)
        cur = bytes([b])
    out.put(table[cur], _lzw_width(len(table)))


def _lzw_decode(r: _Reader, n: int) -> bytes:
    if n == 0:
        return b""
    table = [bytes([i]) for i in range(256)]
    out = bytearray()
    prev = None
    while len(out) < n:
        # the encoder's table is one entry ahead once the first code is out
        enc_size = len(table) + (0 if prev is None or len(table) >= _LZW_FULL else 1)
        code = r.get(_lzw_width(enc_size))
        if code < len(table):
            entry = table[code]
        elif code == len(table) and prev is not None:
            entry = prev + prev[:1]
        else:
            raise DecodeError("lzw code out of range")
        if prev is not None and len(table) < _LZW_FULL:
            table.append(prev + entry[:1])
        out += entry
        prev = entry
    if len(out) != n:
        raise DecodeError("lzw stream overruns declared length")
    return bytes(out)


# -- greedy dictionary (LZ77-style) coder -----------------------------------------

DICT_MIN_MATCH = 4
DICT_MAX_CHAIN = 64


def _match_length(data: bytes, src: int, pos: int, limit: int) -> int:
    """Length of the common run of data[src:] and data[pos:], at most ``limit``.

    Overlapping runs (src + length > pos) are fine: the decoder copies byte by
    byte, which reproduces exactly this comparison on the original data.
    """
    lo, step = 0, 16
    while lo < limit:
        hi = min(limit, lo + step)
        if data[src + lo:src + hi] == data[pos + lo:pos + hi]:
            lo = hi
            step *= 2
            continue
        # first mismatch lies in [lo, hi)
        a, b = lo, hi
        while b - a > 1:
            mid = (a + b) // 2
            if data[src + lo:src + mid] == data[pos + lo:pos + mid]:
                a = mid
            else:
                b = mid
        return a if data[src + a] != data[pos + a] else a + 1
    return lo


def dict_parse(data: bytes) -> list[tuple[bytes, int, int]]:
    """Greedy longest-match parse into (literals, offset, length) sequences.

    The last sequence may carry ``length == 0`` (trailing literals only).
    """
    n = len(data)
    chains: dict[bytes, list[int]] = {}
    seqs = []
    lit_start = 0
    pos = 0

    def index(i):
        if i + DICT_MIN_MATCH <= n:
            chains.setdefault(data[i:i + DICT_MIN_MATCH], []).append(i)

    while pos < n:
        best_len, best_src = 0, -1
        if pos + DICT_MIN_MATCH <= n:
            cands = chains.get(data[pos:pos + DICT_MIN_MATCH])
            if cands:
                limit = n - pos
                for src in reversed(cands[-DICT_MAX_CHAIN:]):
                    ln = _match_length(data, src, pos, limit)
                    if ln > best_len:
                        best_len, best_src = ln, src
                        if ln == limit:
                            break
        if best_len >= DICT_MIN_MATCH:
            seqs.append((data[lit_start:pos], pos - best_src, best_len))
            for i in range(pos, pos + best_len):
                index(i)
            pos += best_len
            lit_start = pos
        else:
            index(pos)
            pos += 1
    if lit_start < n:
        seqs.append((data[lit_start:], 0, 0))
    return seqs


def _dict_encode(data: bytes, out: _Bits):
    pos = 0
    n = len(data)
    for lits, offset, length in dict_parse(data):
        out.delta(len(lits) + 1)
        for b in lits:
            out.put(b, 8)
        pos += len(lits)
        if pos >= n:
            break
        out.delta(length - DICT_MIN_MATCH + 1)
        out.put(offset - 1, (pos - 1).bit_length())
        pos += length


def _dict_decode(r: _Reader, n: int) -> bytes:
    out = bytearray()
    while len(out) < n:
        nlit = r.delta() - 1
        for _ in range(nlit):
            out.append(r.get(8))
        if len(out) >= n:
            break
        length = r.delta() - 1 + DICT_MIN_MATCH
        pos = len(out)
        offset = r.get((pos - 1).bit_length()) + 1
        if offset > pos:
            raise DecodeError("dict_coder offset before start")
        src = pos - offset
        for i in range(length):
            out.append(out[src + i])
    if len(out) != n:
        raise DecodeError("dict_coder stream overruns declared length")
    return bytes(out)


_CODERS: dict[str, tuple[Callable, Callable]] = {
    "lz78": (_lz78_encode, _lz78_decode),
    "lzw": (_lzw_encode, _lzw_decode),
    "dict_coder": (_dict_encode, _dict_decode),
}


def _coder(estimator: str):
    try:
        return _CODERS[estimator]
    except KeyError:
        raise UnknownEstimator(f"unknown estimator {estimator!r}; choose from {ESTIMATORS}") from None


def _as_bytes(data) -> bytes:
    if isinstance(data, (bytes, bytearray, memoryview)):
        return bytes(data)
    raise TypeError(f"expected bytes, got {type(data).__name__}")


def encode(data: bytes, estimator: str = DEFAULT_ESTIMATOR) -> str:
    """Full coded bit stream of ``data`` under ``estimator``."""
    enc, _ = _coder(estimator)
    data = _as_bytes(data)
    head = elias_gamma(len(data) + 1)
    body = _Bits()
    enc(data, body)
    if body.n < 8 * len(data):
        return "1" + head + body.getvalue()
    return "0" + head + "".join(format(b, "08b") for b in data)


def decode(bits: str, estimator: str = DEFAULT_ESTIMATOR) -> bytes:
    _, dec = _coder(estimator)
    if not bits:
        raise DecodeError("empty stream")
    r = _Reader(bits, 1)
    n = r.gamma() - 1
    if bits[0] == "0":
        out = bytes(r.get(8) for _ in range(n))
    else:
        out = dec(r, n)
    if r.pos != len(bits):
        raise DecodeError(f"{len(bits) - r.pos} trailing bits")
    return out


def estimate(data: bytes, estimator: str = DEFAULT_ESTIMATOR) -> ComplexityEstimate:
    enc, _ = _coder(estimator)
    data = _as_bytes(data)
    body = _Bits()
    enc(data, body)
    bits = 1 + len(elias_gamma(len(data) + 1)) + min(body.n, 8 * len(data))
    return ComplexityEstimate(estimator, bits, 8 * len(data))


def estimate_word(w: Word, estimator: str = DEFAULT_ESTIMATOR) -> ComplexityEstimate:
    """Estimate of the word's self-delimiting code, packed into bytes."""
    code = encode_self_delimiting(w)
    est = estimate(bits_to_bytes(code.bits), estimator)
    return ComplexityEstimate(estimator, est.bits, len(code.bits))


# -- pairs -------------------------------------------------------------------------

def escape(x: bytes) -> bytes:
    return _as_bytes(x).replace(b"\xff", b"\xff\xff")


def join_pair(x: bytes, y: bytes) -> bytes:
    """``escape(x) + SEPARATOR + escape(y)``; split again by :func:`split_pair`."""
    return escape(x) + SEPARATOR + escape(y)


def split_pair(data: bytes) -> tuple[bytes, bytes]:
    parts = [bytearray(), bytearray()]
    side = 0
    i = 0
    while i < len(data):
        b = data[i]
        if b == ESCAPE:
            if i + 1 >= len(data):
                raise DecodeError("dangling escape byte")
            nxt = data[i + 1]
            if nxt == ESCAPE:
                parts[side].append(ESCAPE)
            elif nxt == 0 and side == 0:
                side = 1
            else:
                raise DecodeError("bad escape sequence")
            i += 2
        else:
            parts[side].append(b)
            i += 1
    if side != 1:
        raise DecodeError("no separator")
    return bytes(parts[0]), bytes(parts[1])


def separator_cost(x: bytes, y: bytes) -> int:
    """Raw bits added by escaping and separating the pair."""
    return 8 * (len(SEPARATOR) + x.count(ESCAPE) + y.count(ESCAPE))


def conditional(x: bytes, y: bytes, estimator: str = DEFAULT_ESTIMATOR) -> int:
    """Bits needed for ``x`` once ``y`` (and the separator) is known."""
    prefix = escape(y) + SEPARATOR
    return max(0, estimate(prefix + escape(x), estimator).bits - estimate(prefix, estimator).bits)


def joint(x: bytes, y: bytes, estimator: str = DEFAULT_ESTIMATOR) -> int:
    return estimate(join_pair(x, y), estimator).bits


def independence_defect(x: bytes, y: bytes, estimator: str = DEFAULT_ESTIMATOR) -> int:
    return estimate(x, estimator).bits + estimate(y, estimator).bits - joint(x, y, estimator)


def estimator_agreement(x: bytes, e1: str, e2: str) -> float:
    """``|est_e1(x) - est_e2(x)| / l(x)``."""
    x = _as_bytes(x)
    if not x:
        return 0.0
    return abs(estimate(x, e1).bits - estimate(x, e2).bits) / (8 * len(x))


def upper_bound(length_bits: int) -> float:
    """``l + 2 log2 l + HEADER_SLACK_BITS``."""
    if length_bits <= 0:
        return HEADER_SLACK_BITS
    return length_bits + 2 * math.log2(length_bits) + HEADER_SLACK_BITS
