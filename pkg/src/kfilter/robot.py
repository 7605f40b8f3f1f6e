"""A tiny token-emitting machine with an exact shortest-program oracle.

Binary program format (self-delimiting, terminated by a top-level HALT)::

    EMIT t          00 <t: alphabet code width bits>
    REPEAT k body   01 <k: 8 bits, 2..255> <body> 10
    HALT            11

REPEAT bodies are non-empty and nest at most two levels deep.  The machine
is deliberately not universal: without unbounded loops its shortest
programs can be found by exhaustive enumeration.
"""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .complexity import DEFAULT_ESTIMATOR, estimate_word
from .words import Alphabet, Word

OP_EMIT, OP_REPEAT, OP_END, OP_HALT = "00", "01", "10", "11"
COUNT_BITS = 8
MIN_REPEAT, MAX_REPEAT = 2, 255
MAX_DEPTH = 2
MAX_SEARCH_BITS = 32


class ProgramError(ValueError):
    pass


@dataclass(frozen=True)
class Emit:
    token: int


@dataclass(frozen=True)
class Repeat:
    count: int
    body: tuple


def _check(instrs, n_tokens: int, depth: int = 0):
    for ins in instrs:
        if isinstance(ins, Emit):
            if not 0 <= ins.token < n_tokens:
                raise ProgramError(f"EMIT token {ins.token} outside alphabet")
        elif isinstance(ins, Repeat):
            if not MIN_REPEAT <= ins.count <= MAX_REPEAT:
                raise ProgramError(f"REPEAT count {ins.count} outside {MIN_REPEAT}..{MAX_REPEAT}")
            if not ins.body:
                raise ProgramError("empty REPEAT body")
            if depth + 1 > MAX_DEPTH:
                raise ProgramError("REPEAT nested too deeply")
            _check(ins.body, n_tokens, depth + 1)
        else:
            raise ProgramError(f"unknown instruction {ins!r}")


def _bits(instrs, width: int) -> str:
    out = []
    for ins in instrs:
        if isinstance(ins, Emit):
            out.append(OP_EMIT + (format(ins.token, f"0{width}b") if width else ""))
        else:
            out.append(OP_REPEAT + format(ins.count, f"0{COUNT_BITS}b") + _bits(ins.body, width) + OP_END)
    return "".join(out)


@dataclass(frozen=True)
class TinyProgram:
    """Instruction list (HALT implicit at the end) over an alphabet."""

    instructions: tuple
    alphabet: Alphabet = field(compare=False)

    def __post_init__(self):
        object.__setattr__(self, "instructions", tuple(self.instructions))
        _check(self.instructions, len(self.alphabet))

    @property
    def encoded_bits(self) -> str:
        return _bits(self.instructions, self.alphabet.code_width) + OP_HALT

    def __len__(self):
        return len(self.encoded_bits)

    def __eq__(self, other):
        if not isinstance(other, TinyProgram):
            return NotImplemented
        return self.instructions == other.instructions and self.alphabet == other.alphabet

    def __hash__(self):
        return hash(self.instructions)

    def to_text(self) -> str:
        lines: list[str] = []

        def emit(instrs, indent):
            pad = "  " * indent
            for ins in instrs:
                if isinstance(ins, Emit):
                    lines.append(f"{pad}EMIT {self.alphabet.label(ins.token)}")
                else:
                    lines.append(f"{pad}REPEAT {ins.count} {{")
                    emit(ins.body, indent + 1)
                    lines.append(f"{pad}}}")

        emit(self.instructions, 0)
        lines.append("HALT")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, alphabet: Alphabet) -> "TinyProgram":
        stack: list[list] = [[]]
        counts: list[int] = []
        halted = False
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if halted:
                raise ProgramError("instructions after HALT")
            parts = line.split()
            op = parts[0].upper()
            if op == "EMIT" and len(parts) == 2:
                stack[-1].append(Emit(alphabet.index(parts[1])))
            elif op == "REPEAT" and len(parts) == 3 and parts[2] == "{":
                counts.append(int(parts[1]))
                stack.append([])
            elif line == "}":
                if len(stack) == 1:
                    raise ProgramError("unbalanced '}'")
                body = stack.pop()
                stack[-1].append(Repeat(counts.pop(), tuple(body)))
            elif op == "HALT" and len(parts) == 1:
                if len(stack) != 1:
                    raise ProgramError("HALT inside a REPEAT body")
                halted = True
            else:
                raise ProgramError(f"cannot parse {raw!r}")
        if not halted:
            raise ProgramError("program lacks HALT")
        return cls(tuple(stack[0]), alphabet)

    @classmethod
    def from_bits(cls, bits: str, alphabet: Alphabet) -> "TinyProgram":
        instrs, end = _parse(bits, 0, alphabet, 0)
        if end != len(bits):
            raise ProgramError(f"{len(bits) - end} bits after HALT")
        return cls(instrs, alphabet)


def _parse(bits: str, pos: int, alphabet: Alphabet, depth: int, on_prefix=None):
    """Parse an instruction sequence; returns (instructions, end position).

    At depth 0 the sequence must end in HALT, inside bodies in END.
    ``on_prefix`` is called with (instructions, pos) after every complete
    top-level instruction (used by mutation repair).
    """
    width = alphabet.code_width
    out: list = []
    while True:
        op = bits[pos:pos + 2]
        if len(op) < 2:
            raise ProgramError("truncated program")
        pos += 2
        if op == OP_HALT:
            if depth:
                raise ProgramError("HALT inside a REPEAT body")
            return tuple(out), pos
        if op == OP_END:
            if not depth:
                raise ProgramError("END outside a REPEAT body")
            if not out:
                raise ProgramError("empty REPEAT body")
            return tuple(out), pos
        if op == OP_EMIT:
            if pos + width > len(bits):
                raise ProgramError("truncated EMIT")
            t = int(bits[pos:pos + width], 2) if width else 0
            if t >= len(alphabet):
                raise ProgramError(f"EMIT token {t} outside alphabet")
            pos += width
            out.append(Emit(t))
        else:
            if depth + 1 > MAX_DEPTH:
                raise ProgramError("REPEAT nested too deeply")
            if pos + COUNT_BITS > len(bits):
                raise ProgramError("truncated REPEAT")
            k = int(bits[pos:pos + COUNT_BITS], 2)
            if not MIN_REPEAT <= k <= MAX_REPEAT:
                raise ProgramError(f"REPEAT count {k} out of range")
            body, pos = _parse(bits, pos + COUNT_BITS, alphabet, depth + 1)
            out.append(Repeat(k, body))
        if on_prefix is not None and depth == 0:
            on_prefix(tuple(out), pos)


def _expand(instrs, fuel: int, out: list):
    for ins in instrs:
        if len(out) >= fuel:
            return
        if isinstance(ins, Emit):
            out.append(ins.token)
        else:
            for _ in range(ins.count):
                if len(out) >= fuel:
                    return
                _expand(ins.body, fuel, out)


def output_length(instrs) -> int:
    return sum(1 if isinstance(i, Emit) else i.count * output_length(i.body) for i in instrs)


@dataclass(frozen=True)
class RobotState:
    program: TinyProgram
    memory_bits: int
    c0: tuple = ()
    generation: int = 0
    last_flips: int = 0

    def __post_init__(self):
        object.__setattr__(self, "c0", tuple(float(v) for v in np.ravel(self.c0)))
        if len(self.program) > self.memory_bits:
            raise ProgramError(f"program needs {len(self.program)} bits, memory holds {self.memory_bits}")
        if self.generation < 0:
            raise ValueError("generation must be >= 0")


def run(r: RobotState | TinyProgram, fuel: int | None = None) -> Word:
    """Execute; output stops at HALT or after ``fuel`` tokens."""
    prog = r.program if isinstance(r, RobotState) else r
    if fuel is None:
        fuel = output_length(prog.instructions)
    if fuel < 0:
        raise ValueError("fuel must be >= 0")
    out: list[int] = []
    _expand(prog.instructions, fuel, out)
    return Word(tuple(out), prog.alphabet)


# -- exhaustive oracle -------------------------------------------------------------

@dataclass(frozen=True)
class OracleResult:
    word: Word
    shortest_bits: int | None
    program: TinyProgram | None
    programs_searched: int
    max_bits: int

    @property
    def found(self) -> bool:
        return self.program is not None

    def report(self) -> dict:
        return {
            "word": str(self.word),
            "found": self.found,
            "shortest_bits": self.shortest_bits,
            "program": self.program.to_text() if self.program else None,
            "program_bits": self.program.encoded_bits if self.program else None,
            "programs_searched": self.programs_searched,
            "max_bits": self.max_bits,
        }


@lru_cache(maxsize=None)
def _sequences(n_tokens: int, width: int, budget: int, depth: int, max_out: int):
    """All non-empty instruction sequences of at most ``budget`` bits whose
    output has at most ``max_out`` tokens, as (bits, output, instrs) triples."""
    res = []
    for bits, out, ins in _instructions(n_tokens, width, budget, depth, max_out):
        res.append((bits, out, (ins,)))
        rest = budget - len(bits)
        for b2, o2, i2 in _sequences(n_tokens, width, rest, depth, max_out - len(out)):
            res.append((bits + b2, out + o2, (ins,) + i2))
    return tuple(res)


@lru_cache(maxsize=None)
def _instructions(n_tokens: int, width: int, budget: int, depth: int, max_out: int):
    res = []
    if max_out < 1:
        return ()
    if budget >= 2 + width:
        for t in range(n_tokens):
            res.append((OP_EMIT + (format(t, f"0{width}b") if width else ""), (t,), Emit(t)))
    head = 2 + COUNT_BITS
    if depth < MAX_DEPTH and budget >= head + 2 + 2 + width:
        for k in range(MIN_REPEAT, min(MAX_REPEAT, max_out) + 1):
            kb = OP_REPEAT + format(k, f"0{COUNT_BITS}b")
            for b, o, i in _sequences(n_tokens, width, budget - head - 2, depth + 1, max_out // k):
                res.append((kb + b + OP_END, o * k, Repeat(k, i)))
    return tuple(res)


def enumerate_programs(n_tokens: int, width: int, max_bits: int, max_out: int, first=None):
    """Yield (bits, output) for every valid program of at most ``max_bits``
    bits emitting at most ``max_out`` tokens.  ``first`` restricts the first
    instruction to the given index set of ``_instructions`` (for sharding)."""
    if first is None or 0 in first:
        if max_bits >= 2:
            yield OP_HALT, (), ()
    body_budget = max_bits - 2
    if body_budget <= 0:
        return
    heads = _instructions(n_tokens, width, body_budget, 0, max_out)
    for idx, (bits, out, ins) in enumerate(heads):
        if first is not None and (idx + 1) not in first:
            continue
        yield bits + OP_HALT, out, (ins,)
        rest = body_budget - len(bits)
        for b2, o2, i2 in _sequences(n_tokens, width, rest, 0, max_out - len(out)):
            yield bits + b2 + OP_HALT, out + o2, (ins,) + i2


def _better(a, b) -> bool:
    """Shorter bit string first, then lexicographic."""
    return (len(a), a) < (len(b), b)


def _table_shard(args):
    n_tokens, width, max_bits, max_len, shard = args
    best: dict = {}
    count = 0
    for bits, out, _ in enumerate_programs(n_tokens, width, max_bits, max_len, first=shard):
        count += 1
        cur = best.get(out)
        if cur is None or _better(bits, cur):
            best[out] = bits
    return best, count


def _shards(n_tokens, width, max_bits, max_len, workers):
    n_heads = len(_instructions(n_tokens, width, max(0, max_bits - 2), 0, max_len)) + 1
    return [frozenset(range(i, n_heads, workers)) for i in range(workers)]


def oracle_table(alphabet: Alphabet, max_len: int, max_bits: int = MAX_SEARCH_BITS,
                 workers: int = 1) -> tuple[dict, int]:
    """Shortest program bits for every output of length <= ``max_len``.

    Returns ({output token tuple: program bits}, programs searched).  The
    result does not depend on ``workers``: shards are merged by (length,
    lexicographic) order.
    """
    if max_bits > MAX_SEARCH_BITS:
        raise ValueError(f"max_bits above {MAX_SEARCH_BITS} is not desk-scale")
    n, width = len(alphabet), alphabet.code_width
    args = [(n, width, max_bits, max_len, s) for s in _shards(n, width, max_bits, max_len, workers)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            parts = list(ex.map(_table_shard, args))
    else:
        parts = [_table_shard(a) for a in args]
    best: dict = {}
    total = 0
    for part, count in parts:
        total += count
        for out, bits in part.items():
            cur = best.get(out)
            if cur is None or _better(bits, cur):
                best[out] = bits
    return best, total


def shortest_program(w: Word, max_bits: int = 24) -> OracleResult:
    """Minimal-length program printing exactly ``w`` (ties: lexicographic)."""
    if max_bits > MAX_SEARCH_BITS:
        raise ValueError(f"max_bits above {MAX_SEARCH_BITS} is not desk-scale")
    a = w.alphabet
    target = w.tokens
    best = None
    count = 0
    for bits, out, _ in enumerate_programs(len(a), a.code_width, max_bits, len(target)):
        count += 1
        if out == target and (best is None or _better(bits, best)):
            best = bits
    if best is None:
        return OracleResult(w, None, None, count, max_bits)
    return OracleResult(w, len(best), TinyProgram.from_bits(best, a), count, max_bits)


# -- replication --------------------------------------------------------------------

def repair(bits: str, alphabet: Alphabet, max_bits: int | None = None) -> TinyProgram:
    """Longest valid prefix of whole top-level instructions, plus HALT.

    Bits after a HALT are ignored.  Instructions are dropped from the end if
    the repaired program would not fit in ``max_bits``.
    """
    prefixes = [()]
    try:
        instrs, _ = _parse(bits, 0, alphabet, 0, on_prefix=lambda ins, p: prefixes.append(ins))
    except ProgramError:
        instrs = prefixes[-1]
    prog = TinyProgram(instrs, alphabet)
    return prog if max_bits is None else _truncate(prog, max_bits)


def _truncate(prog: TinyProgram, max_bits: int) -> TinyProgram:
    instrs = prog.instructions
    while instrs and len(_bits(instrs, prog.alphabet.code_width)) + 2 > max_bits:
        instrs = instrs[:-1]
    return TinyProgram(instrs, prog.alphabet)


def replicate(r: RobotState, mutation_rate: float = 0.0, seed: int = 0,
              c0_jitter: float = 0.0) -> RobotState:
    """Copy of ``r`` whose program bits flip independently with ``mutation_rate``."""
    if not 0 <= mutation_rate <= 1:
        raise ValueError("mutation_rate must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    bits = r.program.encoded_bits
    flips = rng.random(len(bits)) < mutation_rate
    nflips = int(flips.sum())
    if nflips:
        mutated = "".join("10"[int(b)] if f else b for b, f in zip(bits, flips))
        program = repair(mutated, r.program.alphabet, r.memory_bits)
    else:
        program = r.program
    c0 = r.c0
    if c0_jitter > 0 and c0:
        c0 = tuple(np.asarray(c0) + rng.normal(0.0, c0_jitter, size=len(c0)))
    return replace(r, program=program, c0=c0, generation=r.generation + 1, last_flips=nflips)


# -- reversibility ------------------------------------------------------------------

class Reversibility(str, enum.Enum):
    REVERSIBLE = "Reversible"
    IRREVERSIBLE = "Irreversible"


def reversibility_test(memory_bits: float, w: Word, estimator: str = DEFAULT_ESTIMATOR) -> Reversibility:
    """Reversible iff the memory holds the word's estimated description."""
    if memory_bits >= estimate_word(w, estimator).bits:
        return Reversibility.REVERSIBLE
    return Reversibility.IRREVERSIBLE


def geometric_mean(a: float, b: float) -> float:
    return math.sqrt(a * b)
