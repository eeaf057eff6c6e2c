"""Quantum distributions: processes weighted by partial density operators.

A quantum distribution maps each process to an unnormalised density
operator over the full register; its trace is the probability of that
process. Ensembles that no observer can tell apart collapse to the same
quantum distribution, which is what makes the bisimulation checker in
:mod:`lqcheck.bisim` insensitive to the choice of ensemble.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from . import qmath
from .lang.syntax import Process, Scheduler
from .plts import EMPTY, Action, ProbDist, SemanticsError, System, matrix_digest, proc_text, sort_key


class QuantumDist:
    """Canonical map from processes to partial density operators.

    Construction merges equal processes by matrix addition, drops entries
    of trace at most ``EPS`` and sorts the support by process text.
    """

    __slots__ = ("entries", "_key")

    def __init__(self, entries: Iterable = (), *, eps: float = qmath.EPS):
        acc: dict = {}
        for p, rho in entries:
            rho = np.asarray(rho, dtype=complex)
            acc[p] = acc[p] + rho if p in acc else rho
        kept = [(p, rho) for p, rho in acc.items() if np.trace(rho).real > eps]
        kept.sort(key=lambda e: proc_text(e[0]))
        total = sum(np.trace(rho).real for _, rho in kept)
        if total > 1 + eps:
            raise SemanticsError(f"quantum distribution has total trace {total:.12g} > 1")
        self.entries = tuple(kept)
        self._key = None

    @classmethod
    def point(cls, rho: np.ndarray, p: Process) -> "QuantumDist":
        return cls([(p, rho)])

    def processes(self) -> list:
        return [p for p, _ in self.entries]

    def weight(self, p: Process) -> np.ndarray | None:
        for q, rho in self.entries:
            if q == p:
                return rho
        return None

    def is_empty(self) -> bool:
        return not self.entries

    def mass(self) -> np.ndarray | None:
        """Sum of all weights, or ``None`` for the empty distribution."""
        if not self.entries:
            return None
        return sum(rho for _, rho in self.entries)

    def total_trace(self) -> float:
        return float(sum(np.trace(rho).real for _, rho in self.entries))

    def key(self) -> tuple:
        """Hashable digest with matrices rounded to a 1e-9 grid."""
        if self._key is None:
            self._key = tuple((proc_text(p), matrix_digest(rho)) for p, rho in self.entries)
        return self._key

    def approx_eq(self, other: "QuantumDist", eps: float = qmath.EPS) -> bool:
        if len(self.entries) != len(other.entries):
            return False
        return all(
            p1 == p2 and qmath.approx_eq(r1, r2, eps)
            for (p1, r1), (p2, r2) in zip(self.entries, other.entries)
        )

    def __len__(self):
        return len(self.entries)

    def __repr__(self):
        parts = [f"tr={np.trace(rho).real:.6g}*<{proc_text(p)}>" for p, rho in self.entries]
        return "QuantumDist(" + " + ".join(parts) + ")" if parts else "QuantumDist(eps)"


QEMPTY = QuantumDist()


def canonicalize(entries: Iterable) -> QuantumDist:
    """Canonical quantum distribution from ``(process, matrix)`` pairs."""
    if isinstance(entries, QuantumDist):
        entries = entries.entries
    return QuantumDist(entries)


def qdist_step(dist: QuantumDist, sched: Scheduler, action: Action, system: System) -> QuantumDist:
    """Step every entry under ``(sched, action)``; entries that cannot move vanish."""
    out = []
    for p, rho in dist.entries:
        m = system.move_for(p, sched, action)
        if m is None:
            continue
        out.extend((cont, sigma) for sigma, cont in m.apply(rho))
    return QuantumDist(out)


def enabled_q(dist: QuantumDist, system: System) -> list:
    """Sorted ``(scheduler, action)`` pairs enabled for some support process."""
    found = set()
    for p in dist.processes():
        found.update((m.sched, m.action) for m in system.moves(p))
    return sorted(found, key=lambda sa: sort_key(*sa))


def env(dist: QuantumDist, system: System) -> np.ndarray | float:
    """Partial trace of the total weight over process-owned qubits.

    Returns ``0.0`` for the empty distribution and a ``1x1`` matrix when
    processes own the whole register.
    """
    mass = dist.mass()
    if mass is None:
        return 0.0
    owned = system.sigma(dist.entries[0][0])
    return qmath.partial_trace(mass, system.positions(sorted(owned, key=system.qubits.index)))


def alpha(dist: ProbDist) -> QuantumDist:
    """Merge a configuration distribution into a quantum distribution."""
    return QuantumDist((p, w * rho) for w, rho, p in dist.entries)


def gamma(dist: QuantumDist) -> ProbDist:
    """Split each weight into its trace and its normalised state."""
    entries = []
    for p, rho in dist.entries:
        tr = float(np.trace(rho).real)
        entries.append((tr, rho / tr, p))
    return ProbDist(entries) if entries else EMPTY


def apply_env_superop(
    E: qmath.Superoperator,
    dist: QuantumDist,
    system: System,
    qubits: Sequence[str] | None = None,
) -> QuantumDist:
    """Apply ``E`` to environment qubits of every weight.

    ``qubits`` names the qubits ``E`` acts on, defaulting to all environment
    qubits in register order. Touching a process-owned qubit is an error.
    """
    if dist.is_empty():
        return dist
    owned = system.sigma(dist.entries[0][0])
    if qubits is None:
        qubits = [q for q in system.qubits if q not in owned]
    qubits = list(qubits)
    clash = sorted(set(qubits) & owned)
    if clash:
        raise SemanticsError(f"superoperator touches process-owned qubits {clash}")
    if E.n_qubits != len(qubits):
        raise SemanticsError(
            f"superoperator acts on {E.n_qubits} qubits but the environment offers {len(qubits)}"
        )
    padded = qmath.pad(E, system.positions(qubits), len(system.qubits))
    return QuantumDist((p, qmath.apply(padded, rho)) for p, rho in dist.entries)


__all__ = [
    "QEMPTY",
    "QuantumDist",
    "alpha",
    "apply_env_superop",
    "canonicalize",
    "enabled_q",
    "env",
    "gamma",
    "qdist_step",
]
