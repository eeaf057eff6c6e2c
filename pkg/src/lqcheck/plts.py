"""Probabilistic configuration semantics and its lifted versions.

A configuration pairs a density operator over the whole register with a
closed process. The transitions of a process do not depend on the state
except through the operators they apply, so :class:`System` derives each
process's moves once, as *skeletons* ``(scheduler, action, branches)``
where every branch is ``(kraus operators or None, continuation)``. The
configuration semantics here normalises branch weights; the quantum
distribution semantics in :mod:`lqcheck.qlts` keeps them unnormalised.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import qmath
from .lang import Program, lookup_measurement, lookup_superop
from .lang.syntax import (
    BoolLit,
    ChanType,
    IfThenElse,
    Meas,
    NatLit,
    Nil,
    Par,
    Prefix,
    Process,
    QubitLit,
    Recv,
    Restrict,
    Scheduler,
    Send,
    SopApply,
    Sum,
    Tau,
    TauPair,
    Value,
    expr_str,
    pretty,
    sched_str,
)
from .lang.terms import EvalError, eval_expr, substitute, tags_of
from .typesys import typecheck


class SemanticsError(RuntimeError):
    """A run-time failure of the semantics (open term, bad value, blow-up)."""


class DeterminismError(SemanticsError):
    """Two moves share a scheduler without being inputs on one channel."""


@dataclass(frozen=True)
class Action:
    """Observable label: ``tau``, ``c!v`` or ``c?v``."""

    kind: str
    channel: str | None = None
    value: Value | None = None

    def __str__(self):
        if self.kind == "tau":
            return "tau"
        sym = "!" if self.kind == "send" else "?"
        return f"{self.channel}{sym}{expr_str(self.value)}"

    @staticmethod
    def send(channel: str, value: Value) -> "Action":
        return Action("send", channel, value)

    @staticmethod
    def recv(channel: str, value: Value) -> "Action":
        return Action("recv", channel, value)


TAU = Action("tau")


def parse_action(text: str) -> Action:
    """Parse ``tau``, ``c!v`` or ``c?v`` where ``v`` is a literal or qubit name."""
    text = text.strip()
    if text in ("tau", "τ"):
        return TAU
    for sym, kind in (("!", "send"), ("?", "recv")):
        if sym in text:
            chan, raw = (s.strip() for s in text.split(sym, 1))
            if raw in ("true", "false"):
                value: Value = BoolLit(raw == "true")
            elif raw.isdigit():
                value = NatLit(int(raw))
            else:
                value = QubitLit(raw)
            return Action(kind, chan, value)
    raise ValueError(f"cannot parse action {text!r}")


def parse_scheduler(text: str) -> Scheduler:
    """Parse ``t`` or ``(t,t')``."""
    text = text.strip()
    if text.startswith("("):
        inner = text.strip("()")
        a, b = (s.strip() for s in inner.split(","))
        return (a, b)
    return text


def sort_key(sched: Scheduler, action: Action) -> tuple:
    return (sched_str(sched), str(action))


@lru_cache(maxsize=None)
def proc_text(p: Process) -> str:
    """Cached pretty-printed form, used for ordering and digests."""
    return pretty(p)


def matrix_digest(mat: np.ndarray, grid: float = 1e-9) -> bytes:
    """Bytes of ``mat`` rounded to ``grid``; stable under tiny noise."""
    rounded = np.round(np.asarray(mat) / grid)
    return (rounded.real + 0.0).tobytes() + (rounded.imag + 0.0).tobytes()


@dataclass(frozen=True, eq=False)
class Move:
    """One derivable transition skeleton.

    ``branches`` is a tuple of ``(ops, continuation)`` where ``ops`` is a
    tuple of register-wide operators applied as ``sum K rho K^dagger``, or
    ``None`` for the identity.
    """

    sched: Scheduler
    action: Action
    branches: tuple

    def apply(self, rho: np.ndarray) -> list:
        """Unnormalised ``(state, continuation)`` pairs for input ``rho``."""
        out = []
        for ops, cont in self.branches:
            if ops is None:
                out.append((rho, cont))
            else:
                out.append((sum(k @ rho @ k.conj().T for k in ops), cont))
        return out

    def describe(self) -> str:
        conts = ", ".join(proc_text(c) for _, c in self.branches)
        return f"{sched_str(self.sched)}:{self.action} -> [{conts}]"


def _transfer(ops) -> np.ndarray | None:
    """Matrix representation ``sum K (x) conj(K)`` of a Kraus family."""
    if ops is None:
        return None
    return sum(np.kron(k, k.conj()) for k in ops)


def _same_branches(a: Move, b: Move) -> bool:
    if len(a.branches) != len(b.branches):
        return False
    for (ops_a, ca), (ops_b, cb) in zip(a.branches, b.branches):
        if ca != cb:
            return False
        ta, tb = _transfer(ops_a), _transfer(ops_b)
        if (ta is None) != (tb is None):
            dim = (ta if ta is not None else tb).shape[0]
            ident = np.eye(dim)
            ta = ident if ta is None else ta
            tb = ident if tb is None else tb
        if ta is not None and not qmath.approx_eq(ta, tb):
            return False
    return True


class System:
    """Register, channel and operator tables shared by all semantics.

    Move derivation is memoised per process, so a ``System`` should be
    reused across a whole exploration.
    """

    def __init__(
        self,
        qubits: Sequence[str],
        channels: Mapping[str, ChanType],
        superops: Mapping | None = None,
        measurements: Mapping | None = None,
    ):
        self.qubits = tuple(qubits)
        self.channels = dict(channels)
        self._prog = Program(
            channels=self.channels,
            qubits=self.qubits,
            superops=dict(superops or {}),
            measurements=dict(measurements or {}),
        )
        self._sigma: dict = {}
        self._raw_moves: dict = {}
        self._moves: dict = {}
        self._index: dict = {}
        self._kraus: dict = {}

    @classmethod
    def from_program(cls, prog: Program) -> "System":
        return cls(prog.qubits, prog.channels, prog.superops, prog.measurements)

    @classmethod
    def from_programs(cls, *progs: Program) -> "System":
        """A system for comparing processes drawn from several sources.

        All sources must share the register; channel and operator tables
        are merged and must agree on shared names.
        """
        first = progs[0]
        channels = dict(first.channels)
        superops = dict(first.superops)
        meas = dict(first.measurements)
        for other in progs[1:]:
            if other.qubits != first.qubits:
                raise SemanticsError(
                    f"register mismatch: {list(first.qubits)} vs {list(other.qubits)}"
                )
            for name, ctype in other.channels.items():
                if channels.setdefault(name, ctype) != ctype:
                    raise SemanticsError(f"channel {name!r} declared with different types")
            for table, extra in ((superops, other.superops), (meas, other.measurements)):
                for name, op in extra.items():
                    if name in table and table[name] is not op:
                        raise SemanticsError(f"operator {name!r} defined twice")
                    table[name] = op
        return cls(first.qubits, channels, superops, meas)

    @property
    def dim(self) -> int:
        return 2 ** len(self.qubits)

    def sigma(self, p: Process) -> frozenset:
        """Qubits owned by ``p`` (memoised :func:`typecheck`)."""
        s = self._sigma.get(p)
        if s is None:
            s = typecheck(p, self.channels)
            self._sigma[p] = s
        return s

    def env_qubits(self, p: Process) -> frozenset:
        return frozenset(self.qubits) - self.sigma(p)

    def positions(self, names: Iterable[str]) -> list:
        return [self.qubits.index(n) for n in names]

    # operator padding

    def _padded(self, kind: str, name: str, qubits: tuple) -> tuple:
        key = (kind, name, qubits)
        hit = self._kraus.get(key)
        if hit is not None:
            return hit
        pos = self.positions(qubits)
        total = len(self.qubits)
        if kind == "sop":
            op = lookup_superop(name, self._prog)
            hit = tuple(qmath.pad_operator(k, pos, total) for k in op.kraus)
        else:
            op = lookup_measurement(name, self._prog)
            hit = tuple(qmath.pad_operator(m, pos, total) for m in op.outcomes)
        self._kraus[key] = hit
        return hit

    def _qubit_args(self, args, where: Process) -> tuple:
        names = []
        for e in args:
            v = self._eval(e, where)
            if not isinstance(v, QubitLit) or v.name not in self.qubits:
                raise SemanticsError(f"'{expr_str(e)}' is not a register qubit in {proc_text(where)}")
            names.append(v.name)
        return tuple(names)

    def _eval(self, e, where: Process) -> Value:
        try:
            return eval_expr(e)
        except EvalError as exc:
            raise SemanticsError(f"{exc} in {proc_text(where)}") from None

    def _send_value(self, a: Send, where: Process) -> Value:
        ctype = self.channels[a.channel]
        v = self._eval(a.expr, where)
        if ctype.quantum:
            if not isinstance(v, QubitLit):
                raise SemanticsError(f"non-qubit value sent on quantum channel {a.channel}")
            return v
        if ctype.kind == "nat" and isinstance(v, BoolLit):
            v = NatLit(int(v.value))
        if ctype.kind == "nat" and not (isinstance(v, NatLit) and ctype.lo <= v.value <= ctype.hi):
            raise SemanticsError(f"value {expr_str(v)} outside channel {a.channel} : {ctype}")
        if ctype.kind == "bool" and not isinstance(v, BoolLit):
            raise SemanticsError(f"non-boolean value sent on channel {a.channel}")
        return v

    # move derivation

    def _derive(self, p: Process) -> tuple:
        hit = self._raw_moves.get(p)
        if hit is not None:
            return hit
        moves = tuple(self._derive_uncached(p))
        self._raw_moves[p] = moves
        return moves

    def _derive_uncached(self, p: Process) -> list:
        if isinstance(p, Nil):
            return []
        if isinstance(p, Prefix):
            a, cont = p.action, p.cont
            if isinstance(a, Tau):
                return [Move(a.tag, TAU, ((None, cont),))]
            if isinstance(a, TauPair):
                return [Move((a.tag, a.tag2), TAU, ((None, cont),))]
            if isinstance(a, SopApply):
                ops = self._padded("sop", a.op, self._qubit_args(a.args, p))
                return [Move(a.tag, TAU, ((ops, cont),))]
            if isinstance(a, Meas):
                outcomes = self._padded("meas", a.op, self._qubit_args(a.args, p))
                branches = tuple(
                    ((m,), substitute(cont, a.var, NatLit(i))) for i, m in enumerate(outcomes)
                )
                return [Move(a.tag, TAU, branches)]
            if isinstance(a, Send):
                v = self._send_value(a, p)
                return [Move(a.tag, Action.send(a.channel, v), ((None, cont),))]
            if isinstance(a, Recv):
                ctype = self.channels[a.channel]
                if ctype.quantum:
                    owned = self.sigma(p)
                    values = [QubitLit(q) for q in self.qubits if q not in owned]
                else:
                    values = ctype.classical_values()
                return [
                    Move(a.tag, Action.recv(a.channel, v), ((None, substitute(cont, a.var, v)),))
                    for v in values
                ]
        if isinstance(p, IfThenElse):
            cond = self._eval(p.cond, p)
            if not isinstance(cond, BoolLit):
                raise SemanticsError(f"condition of if is not boolean in {proc_text(p)}")
            return list(self._derive(p.then if cond.value else p.orelse))
        if isinstance(p, Sum):
            return list(self._derive(p.left)) + list(self._derive(p.right))
        if isinstance(p, Par):
            left, right = p.left, p.right
            lmoves, rmoves = self._derive(left), self._derive(right)
            out = []
            r_owned, l_owned = self.sigma(right), self.sigma(left)
            for m in lmoves:
                if _receives_owned(m.action, r_owned):
                    continue
                out.append(_wrap(m, lambda c: Par(c, right)))
            for m in rmoves:
                if _receives_owned(m.action, l_owned):
                    continue
                out.append(_wrap(m, lambda c: Par(left, c)))
            for ml in lmoves:
                if ml.action.kind == "tau":
                    continue
                for mr in rmoves:
                    if not _complementary(ml.action, mr.action):
                        continue
                    (_, lc), (_, rc) = ml.branches[0], mr.branches[0]
                    out.append(Move((ml.sched, mr.sched), TAU, ((None, Par(lc, rc)),)))
            return out
        if isinstance(p, Restrict):
            chans = p.channels
            return [
                _wrap(m, lambda c: Restrict(c, chans))
                for m in self._derive(p.proc)
                if m.action.channel not in chans
            ]
        raise SemanticsError(f"not a process: {p!r}")

    def moves(self, p: Process) -> tuple:
        """All moves of ``p``, checked for determinism."""
        hit = self._moves.get(p)
        if hit is not None:
            return hit
        raw = self._derive(p)
        by_sched: dict = {}
        kept = []
        for m in raw:
            group = by_sched.setdefault(m.sched, [])
            duplicate = False
            for other in group:
                if m.action == other.action and _same_branches(m, other):
                    duplicate = True
                    break
                both_inputs = (
                    m.action.kind == "recv"
                    and other.action.kind == "recv"
                    and m.action.channel == other.action.channel
                )
                if not both_inputs or m.action == other.action:
                    raise DeterminismError(
                        f"process is not deterministic under scheduler {sched_str(m.sched)}: "
                        f"{other.describe()} and {m.describe()}"
                    )
            if not duplicate:
                group.append(m)
                kept.append(m)
        result = tuple(kept)
        self._moves[p] = result
        self._index[p] = {(m.sched, m.action): m for m in result}
        return result

    def move_for(self, p: Process, sched: Scheduler, action: Action) -> Move | None:
        """The unique move of ``p`` for ``(sched, action)``, if any."""
        if p not in self._index:
            self.moves(p)
        return self._index[p].get((sched, action))


def _receives_owned(action: Action, owned: frozenset) -> bool:
    return (
        action.kind == "recv" and isinstance(action.value, QubitLit) and action.value.name in owned
    )


def _complementary(a: Action, b: Action) -> bool:
    return (
        a.channel == b.channel
        and a.value == b.value
        and {a.kind, b.kind} == {"send", "recv"}
    )


def _wrap(m: Move, ctx) -> Move:
    return Move(m.sched, m.action, tuple((ops, ctx(c)) for ops, c in m.branches))


# Probability distributions over configurations --------------------------------


class ProbDist:
    """Finite distribution over configurations ``(rho, P)``.

    Entries are ``(weight, rho, P)`` with normalised ``rho``. Construction
    canonicalises: configurations with equal processes and approximately
    equal states merge, tiny weights are dropped and the support is sorted.
    """

    __slots__ = ("entries", "_key")

    def __init__(self, entries: Iterable = (), *, floor: float = qmath.WEIGHT_FLOOR):
        merged: list = []
        for w, rho, p in entries:
            if w <= floor:
                continue
            for i, (w2, rho2, p2) in enumerate(merged):
                if p2 == p and qmath.approx_eq(rho, rho2):
                    total = w + w2
                    merged[i] = (total, (w * rho + w2 * rho2) / total, p)
                    break
            else:
                merged.append((float(w), np.asarray(rho, dtype=complex), p))
        merged.sort(key=lambda e: (proc_text(e[2]), matrix_digest(e[1])))
        self.entries = tuple(merged)
        self._key = None

    @classmethod
    def point(cls, rho: np.ndarray, p: Process) -> "ProbDist":
        return cls([(1.0, rho, p)])

    @classmethod
    def ensemble(cls, pairs: Iterable, p: Process) -> "ProbDist":
        """Distribution ``sum_i w_i <rho_i, p>`` from ``(w_i, rho_i)`` pairs."""
        return cls([(w, rho, p) for w, rho in pairs])

    def processes(self) -> list:
        return [p for _, _, p in self.entries]

    def mass(self) -> float:
        return float(sum(w for w, _, _ in self.entries))

    def is_empty(self) -> bool:
        return not self.entries

    def key(self) -> tuple:
        """Hashable digest, rounded to a 1e-9 grid."""
        if self._key is None:
            self._key = tuple(
                (proc_text(p), round(w, 9), matrix_digest(rho)) for w, rho, p in self.entries
            )
        return self._key

    def scaled(self, factor: float) -> "ProbDist":
        return ProbDist((w * factor, rho, p) for w, rho, p in self.entries)

    def approx_eq(self, other: "ProbDist", eps: float = qmath.EPS) -> bool:
        if len(self.entries) != len(other.entries):
            return False
        for (w1, r1, p1), (w2, r2, p2) in zip(self.entries, other.entries):
            if p1 != p2 or abs(w1 - w2) > eps or not qmath.approx_eq(r1, r2, eps):
                return False
        return True

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        parts = [f"{w:.6g}*<{proc_text(p)}>" for w, _, p in self.entries]
        return "ProbDist(" + " + ".join(parts) + ")" if parts else "ProbDist(eps)"


EMPTY = ProbDist()


def combine(parts: Iterable) -> ProbDist:
    """Weighted sum of ``(weight, ProbDist)`` pairs."""
    entries = []
    for w, d in parts:
        entries.extend((w * w2, rho, p) for w2, rho, p in d.entries)
    return ProbDist(entries)


def _branch_dist(move: Move, rho: np.ndarray) -> ProbDist:
    entries = []
    for sigma, cont in move.apply(rho):
        weight = float(np.trace(sigma).real)
        if weight > qmath.EPS:
            entries.append((weight, sigma / weight, cont))
    return ProbDist(entries)


def conf_moves(rho: np.ndarray, p: Process, system: System) -> list:
    """All transitions ``(scheduler, action, ProbDist)`` of ``<rho, p>``."""
    return [(m.sched, m.action, _branch_dist(m, rho)) for m in system.moves(p)]


def bot_step(rho: np.ndarray, p: Process, sched: Scheduler, action: Action, system: System) -> ProbDist:
    """The successor of ``<rho, p>`` under ``(sched, action)``, or the empty distribution."""
    m = system.move_for(p, sched, action)
    return EMPTY if m is None else _branch_dist(m, rho)


def scheduled_step(dist: ProbDist, sched: Scheduler, action: Action, system: System) -> ProbDist:
    """Lift of :func:`bot_step`: every element moves under the same scheduler."""
    return combine((w, bot_step(rho, p, sched, action, system)) for w, rho, p in dist.entries)


def enabled(dist: ProbDist, system: System) -> list:
    """Sorted ``(scheduler, action)`` pairs some element can perform."""
    found = set()
    for p in dist.processes():
        found.update((m.sched, m.action) for m in system.moves(p))
    return sorted(found, key=lambda sa: sort_key(*sa))


def unscheduled_successors(
    dist: ProbDist,
    action: Action,
    system: System,
    *,
    deadlock: bool = True,
    per_element_cap: int = 64,
    total_cap: int = 4096,
) -> list:
    """Every distribution reachable by choosing a scheduler per element.

    With ``deadlock`` (the lifted relation proper) an element may also
    contribute the empty distribution even when it could move. Without it,
    elements that can move must move (maximal runs).
    """
    options = []
    total = 1
    for w, rho, p in dist.entries:
        choices = [
            _branch_dist(m, rho) for m in system.moves(p) if m.action == action
        ]
        if deadlock or not choices:
            choices.append(EMPTY)
        if len(choices) > per_element_cap:
            raise SemanticsError(f"{len(choices)} choices for one element exceed the cap")
        total *= len(choices)
        if total > total_cap:
            raise SemanticsError(f"more than {total_cap} unscheduled combinations")
        options.append([(w, c) for c in choices])
    results: dict = {}
    for combo in itertools.product(*options):
        d = combine(combo)
        results.setdefault(d.key(), d)
    return [results[k] for k in sorted(results)]


def determinism_lint(p: Process) -> list:
    """Warn about choices whose branches start with a common tag.

    Distinct initial tags on both sides of every ``+`` is a sufficient,
    not a necessary, condition for determinism.
    """
    warnings = []

    def initial(q: Process) -> set:
        if isinstance(q, Prefix):
            a = q.action
            return {(a.tag, a.tag2)} if isinstance(a, TauPair) else {a.tag}
        if isinstance(q, IfThenElse):
            return initial(q.then) | initial(q.orelse)
        if isinstance(q, (Sum, Par)):
            return initial(q.left) | initial(q.right)
        if isinstance(q, Restrict):
            return initial(q.proc)
        return set()

    def walk(q: Process) -> None:
        if isinstance(q, Sum):
            shared = initial(q.left) & initial(q.right)
            if shared:
                names = ", ".join(sorted(sched_str(s) for s in shared))
                warnings.append(f"both branches of a choice start with tag(s) {names}")
        for child in _children(q):
            walk(child)

    walk(p)
    return warnings


def _children(q: Process) -> list:
    if isinstance(q, Prefix):
        return [q.cont]
    if isinstance(q, IfThenElse):
        return [q.then, q.orelse]
    if isinstance(q, (Sum, Par)):
        return [q.left, q.right]
    if isinstance(q, Restrict):
        return [q.proc]
    return []


__all__ = [
    "Action",
    "DeterminismError",
    "EMPTY",
    "Move",
    "ProbDist",
    "SemanticsError",
    "System",
    "TAU",
    "bot_step",
    "combine",
    "conf_moves",
    "determinism_lint",
    "enabled",
    "parse_action",
    "parse_scheduler",
    "proc_text",
    "scheduled_step",
    "tags_of",
    "unscheduled_successors",
]
