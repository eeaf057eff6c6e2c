"""Linear qubit-ownership typing.

``typecheck`` infers the unique set of qubits a process owns: every owned
qubit must end up discarded by a ``nil[...]`` or sent away, parallel
components own disjoint sets, and both branches of a choice own the same
set. The module is named ``typesys`` so it does not shadow the standard
library ``types``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .lang.syntax import (
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
    expr_str,
    pretty,
)


class TypingError(ValueError):
    """A linearity or channel-usage violation."""


@dataclass(frozen=True)
class ConfigType:
    """Qubits of the global state and qubits owned by the process."""

    sigma_rho: frozenset
    sigma_p: frozenset

    @property
    def env(self) -> frozenset:
        return self.sigma_rho - self.sigma_p


def _names(terms) -> str:
    return "{" + ", ".join(sorted(expr_str(t) for t in terms)) + "}"


def _short(p: Process, limit: int = 60) -> str:
    text = pretty(p)
    return text if len(text) <= limit else text[: limit - 3] + "..."


def _expr_type(e: Expr, venv: Mapping[str, str]) -> str | None:
    """Type of ``e``: ``bool``, ``nat``, ``qubit`` or ``None`` if unknown."""
    if isinstance(e, BoolLit):
        return "bool"
    if isinstance(e, NatLit):
        return "nat"
    if isinstance(e, QubitLit):
        return "qubit"
    if isinstance(e, Var):
        return venv.get(e.name)
    if isinstance(e, Not):
        _require(e.arg, "bool", venv)
        return "bool"
    if isinstance(e, Or):
        _require(e.left, "bool", venv)
        _require(e.right, "bool", venv)
        return "bool"
    if isinstance(e, Le):
        _require(e.left, "nat", venv)
        _require(e.right, "nat", venv)
        return "bool"
    if isinstance(e, Eq):
        lt, rt = _expr_type(e.left, venv), _expr_type(e.right, venv)
        if lt and rt and lt != rt:
            raise TypingError(f"'{expr_str(e)}' compares a {lt} with a {rt}")
        return "bool"
    raise TypingError(f"not an expression: {e!r}")


def _require(e: Expr, want: str, venv: Mapping[str, str]) -> None:
    got = _expr_type(e, venv)
    if got is not None and got != want:
        raise TypingError(f"expected a {want} but '{expr_str(e)}' is a {got}")


def _qubit_term(e: Expr, venv: Mapping[str, str], what: str) -> Expr:
    if isinstance(e, QubitLit):
        return e
    if isinstance(e, Var) and venv.get(e.name, "qubit") == "qubit":
        return e
    raise TypingError(f"{what} expects a qubit, got '{expr_str(e)}'")


def _chan(channels: Mapping[str, ChanType], name: str) -> ChanType:
    if name not in channels:
        raise TypingError(f"undeclared channel {name!r}")
    return channels[name]


def _sigma(p: Process, channels: Mapping[str, ChanType], venv: dict) -> frozenset:
    if isinstance(p, Nil):
        terms = [_qubit_term(e, venv, "nil") for e in p.discard]
        if len(set(terms)) != len(terms):
            raise TypingError(f"nil discards a qubit twice: {_short(p)}")
        return frozenset(terms)
    if isinstance(p, Prefix):
        a = p.action
        if isinstance(a, (Tau, TauPair)):
            return _sigma(p.cont, channels, venv)
        if isinstance(a, (SopApply, Meas)):
            args = [_qubit_term(e, venv, a.op) for e in a.args]
            if len(set(args)) != len(args):
                raise TypingError(f"{a.op} is applied to a repeated qubit in {_short(p)}")
            inner_env = venv if isinstance(a, SopApply) else {**venv, a.var: "nat"}
            inner = _sigma(p.cont, channels, inner_env)
            if isinstance(a, Meas) and Var(a.var) in inner:
                raise TypingError(f"measurement outcome {a.var!r} is used as a qubit")
            missing = set(args) - inner
            if missing:
                raise TypingError(
                    f"{a.op} acts on {_names(missing)} which the process does not own: {_short(p)}"
                )
            return inner
        if isinstance(a, Send):
            ctype = _chan(channels, a.channel)
            inner = _sigma(p.cont, channels, venv)
            if ctype.quantum:
                q = _qubit_term(a.expr, venv, f"quantum channel {a.channel}")
                if q in inner:
                    raise TypingError(
                        f"qubit {expr_str(q)} is sent on {a.channel} but still used afterwards"
                    )
                return inner | {q}
            got = _expr_type(a.expr, venv)
            if got == "qubit":
                raise TypingError(f"qubit '{expr_str(a.expr)}' sent on classical channel {a.channel}")
            if ctype.kind == "bool" and got == "nat":
                raise TypingError(f"natural sent on boolean channel {a.channel}")
            if isinstance(a.expr, NatLit) and ctype.kind == "nat":
                if not ctype.lo <= a.expr.value <= ctype.hi:
                    raise TypingError(f"{a.expr.value} is outside the range of {a.channel}: {ctype}")
            return inner
        if isinstance(a, Recv):
            ctype = _chan(channels, a.channel)
            if ctype.quantum:
                inner = _sigma(p.cont, channels, {**venv, a.var: "qubit"})
                x = Var(a.var)
                if x not in inner:
                    raise TypingError(
                        f"received qubit {a.var!r} is neither discarded nor sent on: {_short(p)}"
                    )
                return inner - {x}
            kind = "bool" if ctype.kind == "bool" else "nat"
            inner = _sigma(p.cont, channels, {**venv, a.var: kind})
            if Var(a.var) in inner:
                raise TypingError(f"classical input {a.var!r} is used as a qubit")
            return inner
    if isinstance(p, IfThenElse):
        _require(p.cond, "bool", venv)
        left = _sigma(p.then, channels, venv)
        right = _sigma(p.orelse, channels, venv)
        if left != right:
            raise TypingError(
                f"branches of if own different qubits: {_names(left)} vs {_names(right)}"
            )
        return left
    if isinstance(p, Sum):
        left = _sigma(p.left, channels, venv)
        right = _sigma(p.right, channels, venv)
        if left != right:
            raise TypingError(
                f"branches of + own different qubits: {_names(left)} vs {_names(right)}"
            )
        return left
    if isinstance(p, Par):
        left = _sigma(p.left, channels, venv)
        right = _sigma(p.right, channels, venv)
        shared = left & right
        if shared:
            raise TypingError(
                f"no-cloning violation: qubits {_names(shared)} are used by both parallel components"
            )
        return left | right
    if isinstance(p, Restrict):
        for c in p.channels:
            _chan(channels, c)
        return _sigma(p.proc, channels, venv)
    raise TypingError(f"not a process: {p!r}")


def typecheck(p: Process, channels: Mapping[str, ChanType]) -> frozenset:
    """Return the names of the qubits owned by ``p``.

    Free variables of ``p`` that are used as qubits are reported by name.
    """
    return frozenset(expr_str(t) for t in _sigma(p, channels, {}))


def type_distribution(dist, channels: Mapping[str, ChanType], register) -> ConfigType | None:
    """Common type of every process in ``dist``; ``None`` for the empty one.

    ``dist`` is anything with a ``processes()`` method.
    """
    procs = list(dist.processes())
    if not procs:
        return None
    sigmas = {typecheck(p, channels) for p in procs}
    if len(sigmas) > 1:
        listed = "; ".join(_names(QubitLit(q) for q in s) for s in sorted(sigmas, key=sorted))
        raise TypingError(f"distribution support has differing ownership: {listed}")
    (sigma,) = sigmas
    reg = frozenset(register)
    if not sigma <= reg:
        raise TypingError(f"process owns qubits {sorted(sigma - reg)} outside the register")
    return ConfigType(reg, sigma)


def uic(p: Process, channels: Mapping[str, ChanType]) -> frozenset:
    """Unrestricted quantum input channels of ``p``."""
    if isinstance(p, Nil):
        return frozenset()
    if isinstance(p, Prefix):
        inner = uic(p.cont, channels)
        a = p.action
        if isinstance(a, Recv) and _chan(channels, a.channel).quantum:
            return inner | {a.channel}
        return inner
    if isinstance(p, IfThenElse):
        return uic(p.then, channels) | uic(p.orelse, channels)
    if isinstance(p, (Sum, Par)):
        return uic(p.left, channels) | uic(p.right, channels)
    if isinstance(p, Restrict):
        return uic(p.proc, channels) - p.channels
    raise TypingError(f"not a process: {p!r}")


def input_restricted(p: Process, channels: Mapping[str, ChanType]) -> bool:
    """Whether ``p`` has no unrestricted quantum input."""
    return not uic(p, channels)
