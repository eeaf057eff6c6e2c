"""Recursive-descent parser for ``.lq`` sources.

A source is a sequence of declarations::

    channel c : qubit
    channel a, b : bit
    qubits q0 q1
    state |PhiPlus>
    proc Alice = t0:H(q0) . t1:c!q0 . nil[]
    proc Main = (Alice || Bob) \\ {c}

Declarations are delimited by their keywords, so a process may span
several lines. Comments start with ``--`` or ``#``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .. import qmath
from .syntax import (
    BIT,
    BOOL,
    QUBIT,
    BoolLit,
    ChanType,
    Eq,
    Expr,
    IfThenElse,
    Le,
    Meas,
    NatLit,
    Nil,
    Not,
    Or,
    Par,
    Prefix,
    Process,
    QubitLit,
    Recv,
    Restrict,
    Send,
    SopApply,
    Sum,
    Tau,
    TauPair,
    Var,
    nat_range,
)


class ParseError(ValueError):
    """Lexical, syntactic or name-resolution error, with a source position."""

    def __init__(self, message: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f"{line}:{col}: " if line else ""
        super().__init__(where + message)


KEYWORDS = {
    "channel", "qubits", "state", "proc", "superop", "measurement", "main",
    "nil", "tau", "meas", "if", "then", "else", "not", "or", "and",
    "true", "false",
}
DECL_KEYWORDS = {"channel", "qubits", "state", "proc", "superop", "measurement", "main"}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|--[^\n]*|\#[^\n]*)
  | (?P<op>\|\|)
  | (?P<ket>\|[A-Za-z0-9+\-]+>)
  | (?P<num>\d+(?:\.\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<op2><=|>=|!=|\.\.)
  | (?P<sym>[.+\\{}()\[\],:!?=<>*/^;-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos = 0
    line, line_start = 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise ParseError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            if kind in ("op", "op2", "sym"):
                kind = "sym"
            elif kind == "ident" and chunk in KEYWORDS:
                kind = "kw"
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


@dataclass
class Program:
    """A parsed source: declarations plus resolved process definitions."""

    channels: dict = field(default_factory=dict)
    qubits: tuple = ()
    superops: dict = field(default_factory=dict)
    measurements: dict = field(default_factory=dict)
    raw: dict = field(default_factory=dict)
    procs: dict = field(default_factory=dict)
    main: str | None = None
    initial: list | None = None

    def process(self, name: str | None = None) -> Process:
        """The named (default: main) definition, required to be closed."""
        name = name or self.main
        if name not in self.raw:
            raise ParseError(f"unknown process {name!r}")
        return resolve(self.raw[name], self, strict=True)

    def initial_ensemble(self) -> list:
        """Initial state as a list of ``(weight, density operator)`` pairs."""
        if self.initial is not None:
            return self.initial
        zero = qmath.outer(qmath.ket("0" * len(self.qubits))) if self.qubits else np.ones((1, 1))
        return [(1.0, zero.astype(complex))]

    def position(self, qubit: str) -> int:
        return self.qubits.index(qubit)


def parse(text: str) -> Program:
    """Parse a ``.lq`` source into a :class:`Program`."""
    return _Parser(tokenize(text)).program()


def parse_process(text: str, program: Program | None = None) -> Process:
    """Parse a single process expression against ``program``'s declarations."""
    program = program or Program()
    parser = _Parser(tokenize(text))
    parser.prog = program
    proc = parser.process()
    parser.expect_kind("eof")
    return resolve(proc, program, strict=False)


def lookup_superop(name: str, program: Program) -> qmath.Superoperator:
    if name in program.superops:
        return program.superops[name]
    if name in qmath.GATES:
        return qmath.GATES[name]
    raise ParseError(f"unknown superoperator {name!r}")


def lookup_measurement(name: str, program: Program) -> qmath.Measurement:
    if name in program.measurements:
        return program.measurements[name]
    if name in qmath.MEASUREMENTS:
        return qmath.MEASUREMENTS[name]
    m = re.fullmatch(r"coin\[(.+)\]", name)
    if m:
        bias = _Parser(tokenize(m.group(1))).number()
        return qmath.coin(float(bias.real))
    raise ParseError(f"unknown measurement {name!r}")


def lookup_superop_at(name: str, program: Program, tok: Token) -> qmath.Superoperator:
    try:
        return lookup_superop(name, program)
    except ParseError as exc:
        raise ParseError(str(exc), tok.line, tok.col) from None


def lookup_measurement_at(name: str, program: Program, tok: Token) -> qmath.Measurement:
    try:
        return lookup_measurement(name, program)
    except (ParseError, qmath.QMathError) as exc:
        raise ParseError(str(exc), tok.line, tok.col) from None


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.toks = tokens
        self.i = 0
        self.prog = Program()

    # token helpers

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("sym", "kw") and t.text == text

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def error(self, message: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        found = tok.text or "end of input"
        return ParseError(f"{message} (found {found!r})", tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.error(f"expected {text!r}")
        return self.advance()

    def expect_kind(self, kind: str) -> Token:
        if self.tok.kind != kind:
            raise self.error(f"expected {kind}")
        return self.advance()

    def ident(self) -> str:
        return self.expect_kind("ident").text

    # declarations

    def program(self) -> Program:
        prog = self.prog
        while self.tok.kind != "eof":
            t = self.tok
            if t.kind != "kw" or t.text not in DECL_KEYWORDS:
                raise self.error("expected a declaration")
            getattr(self, "decl_" + t.text)()
        if not prog.raw:
            raise ParseError("no process definitions")
        if prog.main is None:
            prog.main = "Main" if "Main" in prog.raw else list(prog.raw)[-1]
        elif prog.main not in prog.raw:
            raise ParseError(f"main process {prog.main!r} is not defined")
        for name, body in prog.raw.items():
            prog.procs[name] = resolve(body, prog, strict=False)
        if prog.initial is not None:
            dim = 2 ** len(prog.qubits)
            for _, rho in prog.initial:
                if rho.shape != (dim, dim):
                    raise ParseError(
                        f"initial state has dimension {rho.shape[0]} but the register "
                        f"has {len(prog.qubits)} qubits"
                    )
        return prog

    def _declare(self, name: str, tok: Token) -> None:
        taken = set(self.prog.channels) | set(self.prog.qubits) | set(self.prog.raw)
        taken |= set(self.prog.superops) | set(self.prog.measurements)
        if name in taken:
            raise ParseError(f"name {name!r} declared twice", tok.line, tok.col)

    def decl_channel(self) -> None:
        self.advance()
        names = [(self.tok, self.ident())]
        while self.at(","):
            self.advance()
            names.append((self.tok, self.ident()))
        self.expect(":")
        ctype = self.chan_type()
        for tok, name in names:
            self._declare(name, tok)
            self.prog.channels[name] = ctype

    def chan_type(self) -> ChanType:
        tok = self.tok
        word = self.ident()
        if word == "qubit":
            return QUBIT
        if word == "bool":
            return BOOL
        if word == "bit":
            return BIT
        if word == "nat":
            self.expect("(")
            lo = int(self.expect_kind("num").text)
            self.expect("..")
            hi = int(self.expect_kind("num").text)
            self.expect(")")
            try:
                return nat_range(lo, hi)
            except ValueError as exc:
                raise ParseError(str(exc), tok.line, tok.col) from None
        raise ParseError(f"unknown channel type {word!r}", tok.line, tok.col)

    def decl_qubits(self) -> None:
        self.advance()
        names = list(self.prog.qubits)
        while self.tok.kind == "ident":
            tok = self.tok
            name = self.ident()
            self._declare(name, tok)
            names.append(name)
            self.prog.qubits = tuple(names)

    def decl_main(self) -> None:
        self.advance()
        self.prog.main = self.ident()

    def decl_proc(self) -> None:
        self.advance()
        tok = self.tok
        name = self.ident()
        self._declare(name, tok)
        self.expect("=")
        self.prog.raw[name] = self.process()

    def decl_superop(self) -> None:
        self.advance()
        tok = self.tok
        name = self.ident()
        self._declare(name, tok)
        self.expect("=")
        mats = self.matrix_set()
        try:
            self.prog.superops[name] = qmath.Superoperator(tuple(mats), name)
        except qmath.QMathError as exc:
            raise ParseError(str(exc), tok.line, tok.col) from None

    def decl_measurement(self) -> None:
        self.advance()
        tok = self.tok
        name = self.ident()
        self._declare(name, tok)
        self.expect("=")
        mats = self.matrix_set()
        try:
            self.prog.measurements[name] = qmath.Measurement(tuple(mats), name)
        except qmath.QMathError as exc:
            raise ParseError(str(exc), tok.line, tok.col) from None

    def matrix_set(self) -> list:
        self.expect("{")
        mats = [self.matrix()]
        while self.at(","):
            self.advance()
            mats.append(self.matrix())
        self.expect("}")
        return mats

    def decl_state(self) -> None:
        self.advance()
        tok = self.tok
        if self.tok.kind == "ident" and self.tok.text == "ensemble":
            self.advance()
            self.expect("{")
            entries = [self.ensemble_entry()]
            while self.at(","):
                self.advance()
                entries.append(self.ensemble_entry())
            self.expect("}")
        else:
            entries = [(1.0, self.dm_expr())]
        total = sum(w for w, _ in entries)
        if abs(total - 1) > qmath.EPS:
            raise ParseError(f"ensemble weights sum to {total}, not 1", tok.line, tok.col)
        for _, rho in entries:
            if not qmath.is_density(rho, partial=False):
                raise ParseError("initial state is not a density operator", tok.line, tok.col)
        self.prog.initial = entries

    def ensemble_entry(self) -> tuple:
        w = self.number().real
        self.expect(":")
        return (float(w), self.dm_expr())

    def dm_expr(self) -> np.ndarray:
        rho = self.dm_factor()
        while self.at("*"):
            self.advance()
            rho = np.kron(rho, self.dm_factor())
        return rho

    def dm_factor(self) -> np.ndarray:
        t = self.tok
        if t.kind == "ket":
            self.advance()
            try:
                return qmath.outer(qmath.ket(t.text[1:-1]))
            except qmath.QMathError as exc:
                raise ParseError(str(exc), t.line, t.col) from None
        if t.kind == "ident" and t.text == "maxmixed":
            self.advance()
            self.expect("(")
            n = int(self.expect_kind("num").text)
            self.expect(")")
            return qmath.maxmixed(n)
        if t.kind == "ident" and t.text == "dm":
            self.advance()
            return self.matrix()
        if self.at("("):
            self.advance()
            rho = self.dm_expr()
            self.expect(")")
            return rho
        raise self.error("expected a state")

    def matrix(self) -> np.ndarray:
        tok = self.expect("[")
        rows = [self.matrix_row()]
        while self.at(","):
            self.advance()
            rows.append(self.matrix_row())
        self.expect("]")
        if any(len(r) != len(rows[0]) for r in rows):
            raise ParseError("ragged matrix literal", tok.line, tok.col)
        return np.array(rows, dtype=complex)

    def matrix_row(self) -> list:
        self.expect("[")
        row = [self.number()]
        while self.at(","):
            self.advance()
            row.append(self.number())
        self.expect("]")
        return row

    # complex arithmetic for matrix entries, weights and coin biases

    def number(self) -> complex:
        value = self.num_term()
        while self.at("+") or self.at("-"):
            op = self.advance().text
            rhs = self.num_term()
            value = value + rhs if op == "+" else value - rhs
        return value

    def num_term(self) -> complex:
        value = self.num_factor()
        while self.at("*") or self.at("/"):
            op = self.advance().text
            rhs = self.num_factor()
            if op == "/":
                if rhs == 0:
                    raise self.error("division by zero")
                value = value / rhs
            else:
                value = value * rhs
        return value

    def num_factor(self) -> complex:
        t = self.tok
        if self.at("-"):
            self.advance()
            return -self.num_factor()
        if t.kind == "num":
            self.advance()
            return complex(float(t.text))
        if t.kind == "ident" and t.text == "i":
            self.advance()
            return 1j
        if t.kind == "ident" and t.text == "sqrt":
            self.advance()
            self.expect("(")
            v = self.number()
            self.expect(")")
            return complex(np.sqrt(v))
        if self.at("("):
            self.advance()
            v = self.number()
            self.expect(")")
            return v
        raise self.error("expected a number")

    # processes

    def process(self) -> Process:
        p = self.sum_proc()
        while self.at("||"):
            self.advance()
            p = Par(p, self.sum_proc())
        return p

    def sum_proc(self) -> Process:
        p = self.unary()
        while self.at("+"):
            self.advance()
            p = Sum(p, self.unary())
        return p

    def unary(self) -> Process:
        if self.at("if"):
            self.advance()
            cond = self.expr()
            self.expect("then")
            then = self.unary()
            self.expect("else")
            return IfThenElse(cond, then, self.unary())
        if self._at_action():
            actions = self.action()
            if self.at("."):
                self.advance()
                cont = self.unary()
            else:
                cont = Nil()
            return _chain(actions, cont)
        if self.at("(") and self.at("if", 1):
            saved = self.i
            try:
                build = self.action_ite()
            except ParseError:
                self.i = saved
            else:
                if self.at("."):
                    self.advance()
                    return build(self.unary())
                return build(Nil())
        p = self.atom()
        while self.at("\\"):
            self.advance()
            self.expect("{")
            chans = []
            if not self.at("}"):
                chans.append(self.ident())
                while self.at(","):
                    self.advance()
                    chans.append(self.ident())
            self.expect("}")
            p = Restrict(p, frozenset(chans))
        return p

    def atom(self) -> Process:
        t = self.tok
        if self.at("nil"):
            self.advance()
            discard = ()
            if self.at("["):
                self.advance()
                if not self.at("]"):
                    discard = self.expr_list()
                self.expect("]")
            return Nil(discard)
        if self.at("("):
            self.advance()
            p = self.process()
            self.expect(")")
            return p
        if t.kind == "ident":
            self.advance()
            if t.text not in self.prog.raw:
                raise ParseError(f"unknown process {t.text!r}", t.line, t.col)
            return self.prog.raw[t.text]
        raise self.error("expected a process")

    def _at_action(self) -> bool:
        if self.tok.kind == "ident" and self.at(":", 1):
            return True
        return (
            self.at("(")
            and self.peek(1).kind == "ident"
            and self.at(",", 2)
            and self.peek(3).kind == "ident"
            and self.at(")", 4)
            and self.at(":", 5)
        )

    def action(self) -> list:
        """One tagged action; ``tau^n`` yields ``n`` copies."""
        if self.at("("):
            self.advance()
            t1 = self.ident()
            self.expect(",")
            t2 = self.ident()
            self.expect(")")
            self.expect(":")
            self.expect("tau")
            return [TauPair(t1, t2)] * self.repeat()
        tag = self.ident()
        self.expect(":")
        if self.at("tau"):
            self.advance()
            return [Tau(tag)] * self.repeat()
        if self.at("meas"):
            self.advance()
            tok = self.tok
            name = self.meas_name()
            self.expect("(")
            args = () if self.at(">") else self.expr_list()
            self.expect(">")
            var = self.ident()
            self.expect(")")
            meas = lookup_measurement_at(name, self.prog, tok)
            if meas.n_qubits != len(args):
                raise ParseError(
                    f"{name} measures {meas.n_qubits} qubits but is given {len(args)}",
                    tok.line, tok.col,
                )
            return [Meas(tag, name, args, var)]
        tok = self.tok
        name = self.ident()
        if self.at("!"):
            self.advance()
            self.check_channel(name, tok)
            return [Send(tag, name, self.expr_primary())]
        if self.at("?"):
            self.advance()
            self.check_channel(name, tok)
            return [Recv(tag, name, self.ident())]
        if self.at("("):
            self.advance()
            args = self.expr_list()
            self.expect(")")
            op = lookup_superop_at(name, self.prog, tok)
            if op.n_qubits != len(args):
                raise ParseError(
                    f"{name} acts on {op.n_qubits} qubits but is given {len(args)}",
                    tok.line, tok.col,
                )
            return [SopApply(tag, name, args)]
        raise self.error("expected '!', '?' or '(' after name in action")

    def check_channel(self, name: str, tok: Token) -> None:
        if name not in self.prog.channels:
            raise ParseError(f"undeclared channel {name!r}", tok.line, tok.col)

    def repeat(self) -> int:
        if not self.at("^"):
            return 1
        self.advance()
        tok = self.expect_kind("num")
        n = int(tok.text)
        if n < 1:
            raise ParseError("repetition count must be positive", tok.line, tok.col)
        return n

    def meas_name(self) -> str:
        name = self.ident()
        if self.at("["):
            self.advance()
            parts = []
            while not self.at("]"):
                if self.tok.kind == "eof":
                    raise self.error("unterminated measurement parameter")
                parts.append(self.advance().text)
            self.expect("]")
            name += "[" + "".join(parts) + "]"
        return name

    def action_seq(self) -> list:
        acts = self.action()
        while self.at(".") and self._at_action_after_dot():
            self.advance()
            acts += self.action()
        return acts

    def _at_action_after_dot(self) -> bool:
        self.i += 1
        try:
            return self._at_action()
        finally:
            self.i -= 1

    def action_ite(self) -> Callable[[Process], Process]:
        """``(if e then A1 . A2 else B1) . R`` with the continuation duplicated."""
        self.expect("(")
        build = self._ite_branches()
        self.expect(")")
        return build

    def _ite_branches(self) -> Callable[[Process], Process]:
        self.expect("if")
        cond = self.expr()
        self.expect("then")
        if not self._at_action():
            raise self.error("expected an action")
        then_acts = self.action_seq()
        self.expect("else")
        if self.at("if"):
            orelse = self._ite_branches()
        else:
            if not self._at_action():
                raise self.error("expected an action")
            else_acts = self.action_seq()

            def orelse(r, acts=else_acts):
                return _chain(acts, r)

        return lambda r: IfThenElse(cond, _chain(then_acts, r), orelse(r))

    # expressions

    def expr_list(self) -> tuple:
        items = [self.expr()]
        while self.at(","):
            self.advance()
            items.append(self.expr())
        return tuple(items)

    def expr(self) -> Expr:
        e = self.expr_and()
        while self.at("or"):
            self.advance()
            e = Or(e, self.expr_and())
        return e

    def expr_and(self) -> Expr:
        e = self.expr_not()
        while self.at("and"):
            self.advance()
            rhs = self.expr_not()
            e = Not(Or(Not(e), Not(rhs)))
        return e

    def expr_not(self) -> Expr:
        if self.at("not"):
            self.advance()
            return Not(self.expr_not())
        return self.expr_cmp()

    def expr_cmp(self) -> Expr:
        left = self.expr_primary()
        if self.at("="):
            self.advance()
            return Eq(left, self.expr_primary())
        if self.at("!="):
            self.advance()
            return Not(Eq(left, self.expr_primary()))
        if self.at("<="):
            self.advance()
            return Le(left, self.expr_primary())
        if self.at(">="):
            self.advance()
            return Le(self.expr_primary(), left)
        if self.at("<"):
            self.advance()
            return Not(Le(self.expr_primary(), left))
        return left

    def expr_primary(self) -> Expr:
        t = self.tok
        if t.kind == "num":
            self.advance()
            if "." in t.text:
                raise ParseError("natural literals must be integers", t.line, t.col)
            return NatLit(int(t.text))
        if self.at("true"):
            self.advance()
            return BoolLit(True)
        if self.at("false"):
            self.advance()
            return BoolLit(False)
        if t.kind == "ident":
            self.advance()
            return Var(t.text)
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise self.error("expected an expression")


def _chain(actions: list, cont: Process) -> Process:
    for a in reversed(actions):
        cont = Prefix(a, cont)
    return cont


def resolve(p: Process, prog: Program, strict: bool, bound: frozenset = frozenset()) -> Process:
    """Turn register names into qubit literals and check names and arities.

    Variables not bound by an input or measurement and not naming a register
    qubit are errors when ``strict`` is set and stay variables otherwise.
    """

    def ex(e: Expr) -> Expr:
        if isinstance(e, Var):
            if e.name in bound:
                return e
            if e.name in prog.qubits:
                return QubitLit(e.name)
            if strict:
                raise ParseError(f"unbound name {e.name!r}")
            return e
        if isinstance(e, Not):
            return Not(ex(e.arg))
        if isinstance(e, (Or, Le, Eq)):
            return type(e)(ex(e.left), ex(e.right))
        return e

    if isinstance(p, Nil):
        return Nil(tuple(ex(e) for e in p.discard))
    if isinstance(p, Prefix):
        a = p.action
        if isinstance(a, (Tau, TauPair)):
            return Prefix(a, resolve(p.cont, prog, strict, bound))
        if isinstance(a, Send):
            return Prefix(Send(a.tag, a.channel, ex(a.expr)), resolve(p.cont, prog, strict, bound))
        if isinstance(a, Recv):
            return Prefix(a, resolve(p.cont, prog, strict, bound | {a.var}))
        if isinstance(a, SopApply):
            args = tuple(ex(e) for e in a.args)
            return Prefix(SopApply(a.tag, a.op, args), resolve(p.cont, prog, strict, bound))
        if isinstance(a, Meas):
            args = tuple(ex(e) for e in a.args)
            cont = resolve(p.cont, prog, strict, bound | {a.var})
            return Prefix(Meas(a.tag, a.op, args, a.var), cont)
    if isinstance(p, IfThenElse):
        return IfThenElse(
            ex(p.cond), resolve(p.then, prog, strict, bound), resolve(p.orelse, prog, strict, bound)
        )
    if isinstance(p, (Sum, Par)):
        return type(p)(resolve(p.left, prog, strict, bound), resolve(p.right, prog, strict, bound))
    if isinstance(p, Restrict):
        return Restrict(resolve(p.proc, prog, strict, bound), p.channels)
    raise TypeError(f"not a process: {p!r}")
