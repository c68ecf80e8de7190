"""Circuit intermediate representation and its QASM-subset text format.

The text dialect is a strict subset of OpenQASM 2::

    // circuit: ghz-3
    qreg q[3];
    h q[0];
    cx q[0],q[1];
    rzz(pi/4) q[1],q[2];
    measure q;

One quantum register, gates from :data:`qorch.gates.GATE_KINDS`, and
terminal measurements only (``measure q;`` measures every qubit in order).
An ``OPENQASM 2.0;`` header and ``include "...";`` lines are accepted and
ignored. Angles accept ``+ - * /``, parentheses and ``pi``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .errors import CircuitError, CircuitSyntaxError
from .gates import GATE_KINDS, ONE_QUBIT, PARAMETRIC, TWO_QUBIT, inverse_kind

_TEXT_NAMES = {k.lower(): k for k in GATE_KINDS}


@dataclass(frozen=True)
class GateOp:
    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))

    def inverse(self) -> GateOp:
        kind, params = inverse_kind(self.kind, self.params)
        return GateOp(kind, self.qubits, params)

    def __str__(self) -> str:
        args = f"({', '.join(f'{p:.6g}' for p in self.params)})" if self.params else ""
        return f"{self.kind}{args}{list(self.qubits)}"


@dataclass(frozen=True)
class Circuit:
    """Immutable gate-list circuit.

    Construction does not validate; call :func:`validate` or
    :meth:`check` before executing a circuit from an untrusted source.
    """

    num_qubits: int
    ops: tuple[GateOp, ...] = ()
    measured_qubits: tuple[int, ...] = ()
    name: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "ops", tuple(self.ops))
        object.__setattr__(self, "measured_qubits", tuple(int(q) for q in self.measured_qubits))

    def check(self) -> Circuit:
        problems = validate(self)
        if problems:
            raise CircuitError("; ".join(problems))
        return self

    def inverse(self) -> Circuit:
        """Gate sequence undoing this circuit (measurements dropped)."""
        return Circuit(self.num_qubits, tuple(op.inverse() for op in reversed(self.ops)), ())

    def with_ops(self, ops: Iterable[GateOp]) -> Circuit:
        return Circuit(self.num_qubits, tuple(self.ops) + tuple(ops), self.measured_qubits, self.name)

    def measure_all(self) -> Circuit:
        return Circuit(self.num_qubits, self.ops, tuple(range(self.num_qubits)), self.name)

    def count_ops(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for op in self.ops:
            counts[op.kind] = counts.get(op.kind, 0) + 1
        return counts

    def depth(self) -> int:
        level = [0] * max(self.num_qubits, 1)
        for op in self.ops:
            d = max(level[q] for q in op.qubits) + 1
            for q in op.qubits:
                level[q] = d
        return max(level) if self.ops else 0

    def __len__(self) -> int:
        return len(self.ops)


def validate(c: Circuit) -> list[str]:
    """Return every invariant violation of ``c``; an empty list means valid."""
    problems: list[str] = []
    n = c.num_qubits
    if not isinstance(n, int) or n < 1:
        problems.append(f"num_qubits must be a positive integer, got {n!r}")
        n = 0
    for i, op in enumerate(c.ops):
        where = f"op {i} ({op.kind})"
        if op.kind not in GATE_KINDS:
            problems.append(f"{where}: unknown gate kind")
            continue
        arity = 1 if op.kind in ONE_QUBIT else 2
        if len(op.qubits) != arity:
            problems.append(f"{where}: expected {arity} qubit(s), got {len(op.qubits)}")
        if op.kind in PARAMETRIC:
            if len(op.params) == 0:
                problems.append(f"{where}: missing angle")
            elif len(op.params) > 1:
                problems.append(f"{where}: expected one angle, got {len(op.params)}")
            elif not math.isfinite(op.params[0]):
                problems.append(f"{where}: angle is not finite")
        elif op.params:
            problems.append(f"{where}: takes no angle")
        for q in op.qubits:
            if not 0 <= q < n:
                problems.append(f"{where}: qubit index {q} out of range for {n} qubits")
        if len(set(op.qubits)) != len(op.qubits):
            problems.append(f"{where}: duplicate qubit operands")
    seen: set[int] = set()
    for q in c.measured_qubits:
        if not 0 <= q < n:
            problems.append(f"measurement: qubit index {q} out of range for {n} qubits")
        if q in seen:
            problems.append(f"measurement: qubit {q} measured twice")
        seen.add(q)
    return problems


# -- serialization -----------------------------------------------------------

def _fmt_angle(x: float) -> str:
    return format(x, ".17g")


def serialize_circuit(c: Circuit) -> str:
    lines = []
    if c.name:
        lines.append(f"// circuit: {c.name.splitlines()[0]}")
    lines.append(f"qreg q[{c.num_qubits}];")
    for op in c.ops:
        name = op.kind.lower()
        if op.params:
            name += "(" + ",".join(_fmt_angle(p) for p in op.params) + ")"
        lines.append(f"{name} " + ",".join(f"q[{q}]" for q in op.qubits) + ";")
    if c.measured_qubits and list(c.measured_qubits) == list(range(c.num_qubits)):
        lines.append("measure q;")
    else:
        lines.extend(f"measure q[{q}];" for q in c.measured_qubits)
    return "\n".join(lines) + "\n"


# -- parsing -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<sym>[;\[\](),+\-*/])
    """,
    re.VERBOSE,
)
_NAME_COMMENT = re.compile(r"//\s*circuit:\s?(.*)$")
_MAX_NESTING = 64


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> tuple[list[_Tok], str | None]:
    toks: list[_Tok] = []
    name = None
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise CircuitSyntaxError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind == "comment":
            nm = _NAME_COMMENT.match(m.group())
            if nm and name is None and not toks:
                name = nm.group(1).strip() or None
        elif kind != "ws":
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks, name


class _Parser:
    def __init__(self, toks: list[_Tok]) -> None:
        self.toks = toks
        self.i = 0
        self.reg: str | None = None
        self.n = 0
        self.ops: list[GateOp] = []
        self.measured: list[int] = []

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: _Tok | None = None) -> CircuitSyntaxError:
        tok = tok or self.peek()
        return CircuitSyntaxError(msg, tok.line, tok.col)

    def next(self) -> _Tok:
        tok = self.toks[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def expect(self, text: str) -> _Tok:
        tok = self.peek()
        if tok.text != text or tok.kind not in ("sym", "ident"):
            shown = tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return self.next()

    def expect_int(self) -> int:
        tok = self.peek()
        if tok.kind != "number" or not tok.text.isdigit():
            raise self.error(f"expected integer, found {tok.text or 'end of input'!r}")
        self.next()
        return int(tok.text)

    def parse(self) -> None:
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "OPENQASM":
            self.next()
            if self.peek().kind != "number":
                raise self.error("expected version number after OPENQASM")
            self.next()
            self.expect(";")
        while self.peek().kind == "ident" and self.peek().text == "include":
            self.next()
            if self.peek().kind != "string":
                raise self.error("expected quoted file name after include")
            self.next()
            self.expect(";")
        tok = self.peek()
        if not (tok.kind == "ident" and tok.text == "qreg"):
            raise self.error("circuit must start with a qreg declaration")
        self.next()
        reg = self.peek()
        if reg.kind != "ident":
            raise self.error("expected register name")
        self.next()
        self.expect("[")
        size_tok = self.peek()
        self.n = self.expect_int()
        if self.n < 1:
            raise self.error("register size must be positive", size_tok)
        self.expect("]")
        self.expect(";")
        self.reg = reg.text
        while self.peek().kind != "eof":
            self.statement()

    def operand(self) -> int:
        tok = self.peek()
        if tok.kind != "ident" or tok.text != self.reg:
            raise self.error(f"expected qubit operand {self.reg}[i]")
        self.next()
        self.expect("[")
        idx_tok = self.peek()
        idx = self.expect_int()
        if idx >= self.n:
            raise self.error(f"qubit index {idx} out of range for register of size {self.n}", idx_tok)
        self.expect("]")
        return idx

    def statement(self) -> None:
        tok = self.peek()
        if tok.kind != "ident":
            raise self.error(f"expected statement, found {tok.text!r}")
        if tok.text == "qreg":
            raise self.error("only one quantum register is supported")
        if tok.text == "measure":
            self.next()
            reg = self.peek()
            if reg.kind != "ident" or reg.text != self.reg:
                raise self.error(f"expected register {self.reg!r} after measure")
            self.next()
            if self.peek().text == "[":
                self.next()
                idx_tok = self.peek()
                idx = self.expect_int()
                if idx >= self.n:
                    raise self.error(f"qubit index {idx} out of range for register of size {self.n}", idx_tok)
                self.expect("]")
                targets = [idx]
            else:
                targets = list(range(self.n))
            for q in targets:
                if q in self.measured:
                    raise self.error(f"qubit {q} measured twice", reg)
                self.measured.append(q)
            self.expect(";")
            return
        kind = _TEXT_NAMES.get(tok.text)
        if kind is None:
            raise self.error(f"unknown gate {tok.text!r}")
        if self.measured:
            raise self.error("gates after measurement are not supported")
        self.next()
        params: list[float] = []
        if self.peek().text == "(":
            self.next()
            params.append(self.expr(0))
            while self.peek().text == ",":
                self.next()
                params.append(self.expr(0))
            self.expect(")")
        want = 1 if kind in PARAMETRIC else 0
        if len(params) != want:
            raise self.error(f"gate {tok.text!r} takes {want} angle(s), got {len(params)}", tok)
        qubits = [self.operand()]
        while self.peek().text == ",":
            self.next()
            qubits.append(self.operand())
        arity = 1 if kind in ONE_QUBIT else 2
        if len(qubits) != arity:
            raise self.error(f"gate {tok.text!r} takes {arity} qubit(s), got {len(qubits)}", tok)
        if len(set(qubits)) != len(qubits):
            raise self.error("duplicate qubit operands", tok)
        self.expect(";")
        self.ops.append(GateOp(kind, tuple(qubits), tuple(params)))

    # angle expressions
    def expr(self, depth: int) -> float:
        if depth > _MAX_NESTING:
            raise self.error("expression nested too deeply")
        value = self.term(depth)
        while self.peek().text in ("+", "-") and self.peek().kind == "sym":
            op = self.next().text
            rhs = self.term(depth)
            value = value + rhs if op == "+" else value - rhs
        return value

    def term(self, depth: int) -> float:
        value = self.unary(depth)
        while self.peek().text in ("*", "/") and self.peek().kind == "sym":
            op_tok = self.next()
            rhs = self.unary(depth)
            if op_tok.text == "*":
                value *= rhs
            else:
                if rhs == 0:
                    raise self.error("division by zero", op_tok)
                value /= rhs
        if not math.isfinite(value):
            raise self.error("angle is not finite")
        return value

    def unary(self, depth: int) -> float:
        tok = self.peek()
        if tok.kind == "sym" and tok.text in ("-", "+"):
            if depth > _MAX_NESTING:
                raise self.error("expression nested too deeply")
            self.next()
            v = self.unary(depth + 1)
            return -v if tok.text == "-" else v
        if tok.kind == "number":
            self.next()
            v = float(tok.text)
            if not math.isfinite(v):
                raise self.error("angle is not finite", tok)
            return v
        if tok.kind == "ident" and tok.text == "pi":
            self.next()
            return math.pi
        if tok.text == "(" and tok.kind == "sym":
            self.next()
            v = self.expr(depth + 1)
            self.expect(")")
            return v
        raise self.error(f"expected angle expression, found {tok.text or 'end of input'!r}")


def parse_circuit_text(text: str) -> Circuit:
    """Parse QASM-subset text; raises :class:`CircuitSyntaxError` with a position."""
    toks, name = _tokenize(text)
    p = _Parser(toks)
    p.parse()
    return Circuit(p.n, tuple(p.ops), tuple(p.measured), name)


def as_circuit(obj: Circuit | str) -> Circuit:
    return obj if isinstance(obj, Circuit) else parse_circuit_text(obj)


def gate(kind: str, *qubits: int, angle: float | None = None) -> GateOp:
    """Shorthand: ``gate("RZZ", 0, 1, angle=0.3)``."""
    return GateOp(kind, qubits, () if angle is None else (angle,))


def circuit_from_ops(n: int, ops: Sequence[GateOp], measure: Sequence[int] | None = None,
                     name: str | None = None) -> Circuit:
    measured = tuple(range(n)) if measure is None else tuple(measure)
    return Circuit(n, tuple(ops), measured, name)


__all__ = [
    "Circuit",
    "GateOp",
    "TWO_QUBIT",
    "as_circuit",
    "circuit_from_ops",
    "gate",
    "parse_circuit_text",
    "serialize_circuit",
    "validate",
]
