"""Dense linear algebra on qubit registers.

States are plain ``numpy`` arrays: kets are 1-D complex vectors and density
operators are square complex matrices of dimension ``2**n``. Qubit index 0
is the leftmost tensor factor, so the label ``"01"`` means qubit 0 is in
``|0>`` and qubit 1 is in ``|1>``.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Sequence

import numpy as np


def _default_eps() -> float:
    raw = os.environ.get("LQCHECK_EPS")
    return float(raw) if raw else 1e-9


EPS = _default_eps()
"""Global comparison tolerance (override with the ``LQCHECK_EPS`` variable)."""

WEIGHT_FLOOR = 1e-12
"""Distribution entries with weight at or below this value are pruned."""


class QMathError(ValueError):
    """Raised on malformed quantum objects or inconsistent arities."""


_INV_SQRT2 = 1.0 / np.sqrt(2.0)

_SINGLE = {
    "0": np.array([1, 0], dtype=complex),
    "1": np.array([0, 1], dtype=complex),
    "+": np.array([1, 1], dtype=complex) * _INV_SQRT2,
    "-": np.array([1, -1], dtype=complex) * _INV_SQRT2,
    "i": np.array([1, 1j], dtype=complex) * _INV_SQRT2,
    "-i": np.array([1, -1j], dtype=complex) * _INV_SQRT2,
}

_NAMED = {
    "PhiPlus": np.array([1, 0, 0, 1], dtype=complex) * _INV_SQRT2,
    "PhiMinus": np.array([1, 0, 0, -1], dtype=complex) * _INV_SQRT2,
    "PsiPlus": np.array([0, 1, 1, 0], dtype=complex) * _INV_SQRT2,
    "PsiMinus": np.array([0, 1, -1, 0], dtype=complex) * _INV_SQRT2,
}


def ket(label: str) -> np.ndarray:
    """Return the unit vector for a basis label.

    Labels are words over ``0 1 + - i -i`` read left to right (``"-i"`` is
    taken greedily), or one of the named Bell states such as ``PhiPlus``.

    >>> ket("0")
    array([1.+0.j, 0.+0.j])
    """
    if label in _NAMED:
        return _NAMED[label].copy()
    if not label:
        raise QMathError("empty ket label")
    factors = []
    pos = 0
    while pos < len(label):
        if label.startswith("-i", pos):
            factors.append(_SINGLE["-i"])
            pos += 2
            continue
        ch = label[pos]
        if ch not in _SINGLE:
            raise QMathError(f"unknown ket label character {ch!r} in {label!r}")
        factors.append(_SINGLE[ch])
        pos += 1
    return reduce(np.kron, factors)


def outer(psi: np.ndarray) -> np.ndarray:
    """Return the rank-one operator ``|psi><psi|``."""
    psi = np.asarray(psi, dtype=complex)
    return np.outer(psi, psi.conj())


def tensor(*ops: np.ndarray) -> np.ndarray:
    """Kronecker product of the operands, left to right."""
    if not ops:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, (np.asarray(op, dtype=complex) for op in ops))


def maxmixed(n: int) -> np.ndarray:
    """The maximally mixed state on ``n`` qubits."""
    dim = 2**n
    return np.eye(dim, dtype=complex) / dim


def n_qubits_of(mat: np.ndarray) -> int:
    """Number of qubits of a ``2**n`` square matrix."""
    dim = mat.shape[0]
    n = dim.bit_length() - 1
    if mat.ndim != 2 or mat.shape[1] != dim or 2**n != dim:
        raise QMathError(f"matrix of shape {mat.shape} is not a qubit operator")
    return n


def is_density(rho: np.ndarray, eps: float = EPS, *, partial: bool = True) -> bool:
    """Check Hermiticity, positivity and the trace bound within ``eps``.

    With ``partial=False`` the trace must equal one.
    """
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        return False
    if not np.all(np.isfinite(rho)):
        return False
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > eps:
        return False
    if np.linalg.eigvalsh((rho + rho.conj().T) / 2).min() < -eps:
        return False
    tr = np.trace(rho).real
    if partial:
        return tr <= 1 + eps
    return abs(tr - 1) <= eps


@dataclass(frozen=True, eq=False)
class Superoperator:
    """A trace non-increasing map given by Kraus operators."""

    kraus: tuple[np.ndarray, ...]
    name: str = ""

    def __post_init__(self):
        mats = tuple(np.asarray(k, dtype=complex) for k in self.kraus)
        if not mats:
            raise QMathError("a superoperator needs at least one Kraus operator")
        shape = mats[0].shape
        if any(k.shape != shape for k in mats):
            raise QMathError("Kraus operators must share one shape")
        n_qubits_of(mats[0])
        object.__setattr__(self, "kraus", mats)
        gram = sum(k.conj().T @ k for k in mats)
        if np.linalg.eigvalsh(np.eye(shape[0]) - gram).min() < -EPS:
            raise QMathError(f"superoperator {self.name or '?'} increases trace")

    @property
    def n_qubits(self) -> int:
        return n_qubits_of(self.kraus[0])

    @property
    def trace_preserving(self) -> bool:
        gram = sum(k.conj().T @ k for k in self.kraus)
        return bool(np.allclose(gram, np.eye(gram.shape[0]), atol=EPS, rtol=0))

    def choi(self) -> np.ndarray:
        """Choi matrix, a basis-independent fingerprint of the map."""
        dim = self.kraus[0].shape[0]
        out = np.zeros((dim * dim, dim * dim), dtype=complex)
        for k in self.kraus:
            vec = k.reshape(-1, order="F")
            out += np.outer(vec, vec.conj())
        return out


@dataclass(frozen=True, eq=False)
class Measurement:
    """A complete family of measurement operators ``M_0 .. M_{k-1}``.

    Arity-zero measurements (classical coins) use ``1x1`` matrices.
    """

    outcomes: tuple[np.ndarray, ...]
    name: str = ""

    def __post_init__(self):
        mats = tuple(np.asarray(m, dtype=complex) for m in self.outcomes)
        if not mats:
            raise QMathError("a measurement needs at least one outcome")
        shape = mats[0].shape
        if any(m.shape != shape for m in mats):
            raise QMathError("measurement operators must share one shape")
        n_qubits_of(mats[0])
        object.__setattr__(self, "outcomes", mats)
        gram = sum(m.conj().T @ m for m in mats)
        if not np.allclose(gram, np.eye(shape[0]), atol=EPS, rtol=0):
            raise QMathError(f"measurement {self.name or '?'} is not complete")

    @property
    def n_qubits(self) -> int:
        return n_qubits_of(self.outcomes[0])


def unitary(mat, name: str = "") -> Superoperator:
    return Superoperator((np.asarray(mat, dtype=complex),), name)


def apply(E: Superoperator, rho: np.ndarray) -> np.ndarray:
    """Return ``sum_i E_i rho E_i^dagger``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != E.kraus[0].shape:
        raise QMathError(
            f"arity mismatch: superoperator on {E.n_qubits} qubits, state of shape {rho.shape}"
        )
    return sum(k @ rho @ k.conj().T for k in E.kraus)


def _check_positions(positions: Sequence[int], total: int) -> None:
    if len(set(positions)) != len(positions):
        raise QMathError(f"duplicate qubit index in {list(positions)}")
    for p in positions:
        if not 0 <= p < total:
            raise QMathError(f"qubit index {p} out of range for {total} qubits")


def _swap_matrix(i: int, j: int, total: int) -> np.ndarray:
    """Permutation matrix exchanging qubits ``i`` and ``j`` of the register."""
    dim = 2**total
    idx = np.arange(dim)
    shift_i, shift_j = total - 1 - i, total - 1 - j
    bit_i = (idx >> shift_i) & 1
    bit_j = (idx >> shift_j) & 1
    swapped = idx ^ ((bit_i ^ bit_j) << shift_i) ^ ((bit_i ^ bit_j) << shift_j)
    perm = np.zeros((dim, dim), dtype=complex)
    perm[swapped, idx] = 1
    return perm


def _front_permutation(positions: Sequence[int], total: int) -> np.ndarray:
    """Unitary built from SWAPs that moves ``positions`` to the front in order."""
    perm = np.eye(2**total, dtype=complex)
    order = list(range(total))
    for target, p in enumerate(positions):
        here = order.index(p)
        if here != target:
            perm = _swap_matrix(here, target, total) @ perm
            order[here], order[target] = order[target], order[here]
    return perm


def pad_operator(op: np.ndarray, positions: Sequence[int], total: int) -> np.ndarray:
    """Lift a single operator on ``len(positions)`` qubits to the whole register."""
    op = np.asarray(op, dtype=complex)
    k = n_qubits_of(op)
    if k != len(positions):
        raise QMathError(f"operator acts on {k} qubits but {len(positions)} positions given")
    _check_positions(positions, total)
    perm = _front_permutation(positions, total)
    lifted = np.kron(op, np.eye(2 ** (total - k), dtype=complex))
    return perm.conj().T @ lifted @ perm


def pad(E: Superoperator, positions: Sequence[int], total: int) -> Superoperator:
    """Return ``E`` acting on the given register positions, identity elsewhere."""
    if E.n_qubits != len(positions):
        raise QMathError(
            f"superoperator acts on {E.n_qubits} qubits but {len(positions)} positions given"
        )
    return Superoperator(tuple(pad_operator(k, positions, total) for k in E.kraus), E.name)


def partial_trace(rho: np.ndarray, qubits: Iterable[int], mode: str = "drop") -> np.ndarray:
    """Trace out (``mode="drop"``) or keep (``mode="keep"``) the given qubits.

    Tracing out every qubit returns a ``1x1`` matrix holding ``tr(rho)``.
    """
    rho = np.asarray(rho, dtype=complex)
    n = n_qubits_of(rho)
    chosen = set(qubits)
    for q in chosen:
        if not 0 <= q < n:
            raise QMathError(f"qubit index {q} out of range for {n} qubits")
    if mode == "drop":
        keep = [q for q in range(n) if q not in chosen]
    elif mode == "keep":
        keep = sorted(chosen)
    else:
        raise QMathError(f"unknown partial trace mode {mode!r}")
    drop = [q for q in range(n) if q not in keep]
    tensor_form = rho.reshape([2] * (2 * n))
    row = list(range(n))
    col = [n + q for q in range(n)]
    for q in drop:
        col[q] = row[q]
    out = [row[q] for q in keep] + [col[q] for q in keep]
    reduced = np.einsum(tensor_form, row + col, out)
    dim = 2 ** len(keep)
    return reduced.reshape(dim, dim)


def measure(M: Measurement, rho: np.ndarray, positions: Sequence[int] = ()):
    """Measure ``rho`` on ``positions``.

    Returns a list of ``(outcome, probability, post_state)`` for outcomes of
    probability above ``EPS``; post states are normalised.
    """
    rho = np.asarray(rho, dtype=complex)
    total = n_qubits_of(rho)
    if M.n_qubits != len(positions):
        raise QMathError(
            f"measurement {M.name or '?'} acts on {M.n_qubits} qubits but "
            f"{len(positions)} positions given"
        )
    results = []
    for m, op in enumerate(M.outcomes):
        full = pad_operator(op, positions, total)
        post = full @ rho @ full.conj().T
        p = float(np.trace(post).real)
        if p > EPS:
            results.append((m, p, post / p))
    return results


def approx_eq(a: np.ndarray, b: np.ndarray, eps: float = EPS) -> bool:
    """True iff the entrywise difference of ``a`` and ``b`` is at most ``eps``."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape:
        raise QMathError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return bool(np.max(np.abs(a - b), initial=0.0) <= eps)


def max_abs_diff(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)), initial=0.0))


def random_density(n: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """A random density operator on ``n`` qubits (Wishart construction)."""
    dim = 2**n
    rank = rank or dim
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """A Haar-random unitary on ``n`` qubits via QR decomposition."""
    dim = 2**n
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_channel(n: int, rng: np.random.Generator, n_kraus: int = 2) -> Superoperator:
    """A random trace-preserving channel, sliced from a random isometry."""
    dim = 2**n
    big = random_unitary(n + max(1, int(np.ceil(np.log2(n_kraus)))), rng)
    iso = big[:, :dim]
    kraus = tuple(iso[i * dim:(i + 1) * dim, :] for i in range(big.shape[0] // dim))
    return Superoperator(kraus, "random")


# Standard gates.
I = unitary(np.eye(2), "I")
X = unitary([[0, 1], [1, 0]], "X")
Z = unitary([[1, 0], [0, -1]], "Z")
H = unitary(np.array([[1, 1], [1, -1]]) * _INV_SQRT2, "H")
ZX = unitary(Z.kraus[0] @ X.kraus[0], "ZX")
_S_DAG = np.array([[1, 0], [0, -1j]])
SH = unitary(H.kraus[0] @ _S_DAG, "SH")
CNOT = unitary([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], "CNOT")
SWAP = unitary([[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], "SWAP")
SetHalfI = Superoperator(
    tuple(np.outer(ket(a), ket(b).conj()) * _INV_SQRT2 for a in "01" for b in "01"),
    "SetHalfI",
)


def projective(labels: Sequence[str], name: str = "") -> Measurement:
    return Measurement(tuple(outer(ket(lab)) for lab in labels), name)


M01 = projective(["0", "1"], "M01")
Mpm = projective(["+", "-"], "Mpm")
Mpmi = projective(["i", "-i"], "Mpmi")
M01_2 = projective(["00", "01", "10", "11"], "M01_2")


def coin(p: float) -> Measurement:
    """Arity-zero measurement with outcome 0 of probability ``p``."""
    if not 0 <= p <= 1:
        raise QMathError(f"coin bias {p} outside [0, 1]")
    return Measurement(
        (np.array([[np.sqrt(p)]]), np.array([[np.sqrt(1 - p)]])), f"coin[{p:g}]"
    )


GATES = {g.name: g for g in (I, X, Z, H, ZX, SH, CNOT, SWAP, SetHalfI)}
MEASUREMENTS = {m.name: m for m in (M01, Mpm, Mpmi, M01_2)}
MEASUREMENTS["coin"] = coin(0.5)
