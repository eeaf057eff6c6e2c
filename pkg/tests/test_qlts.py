import numpy as np
import pytest

from lqcheck import qmath
from lqcheck.corpus import load, point, teleport_pair
from lqcheck.lang import parse
from lqcheck.plts import EMPTY, TAU, ProbDist, SemanticsError, System, parse_action
from lqcheck.qlts import (
    QEMPTY,
    QuantumDist,
    alpha,
    apply_env_superop,
    canonicalize,
    enabled_q,
    env,
    gamma,
    qdist_step,
)

HEADER = "channel c : qubit\nchannel d : bit\nqubits q\n"


def ket_dm(label):
    return qmath.outer(qmath.ket(label))


def small(body: str):
    prog = parse(HEADER + "proc P = " + body)
    return prog.process("P"), System.from_program(prog)


def test_measure_then_send_merges_to_half_identity():
    p, system = small("t0:meas M01(q > x) . t0:c!q . nil[]")
    out = qdist_step(QuantumDist.point(ket_dm("+"), p), "t0", TAU, system)
    assert len(out) == 1
    assert qmath.approx_eq(out.entries[0][1], qmath.maxmixed(1))


def test_empty_steps_to_empty():
    _, system = small("nil[q]")
    assert qdist_step(QEMPTY, "t", TAU, system).is_empty()
    assert enabled_q(QEMPTY, system) == []


def test_canonicalize_merges_same_process():
    p, _ = small("nil[q]")
    d = canonicalize([(p, 0.5 * ket_dm("0")), (p, 0.5 * ket_dm("1"))])
    assert len(d) == 1 and qmath.approx_eq(d.entries[0][1], qmath.maxmixed(1))
    assert canonicalize(d).key() == d.key()


def test_canonicalize_drops_negligible_entries():
    p, _ = small("nil[q]")
    q, _ = small("t:d!0 . nil[q]")
    d = QuantumDist([(p, ket_dm("0")), (q, 1e-15 * ket_dm("1"))])
    assert d.processes() == [p]


def test_total_trace_above_one_rejected():
    p, _ = small("nil[q]")
    q, _ = small("t:d!0 . nil[q]")
    with pytest.raises(SemanticsError):
        QuantumDist([(p, ket_dm("0")), (q, 0.5 * ket_dm("1"))])


def test_env_fully_owned_is_scalar_trace():
    p, system = small("nil[q]")
    e = env(QuantumDist.point(0.5 * ket_dm("+"), p), system)
    assert e.shape == (1, 1) and np.isclose(e[0, 0], 0.5)


def test_env_of_empty_is_zero():
    _, system = small("nil[q]")
    assert env(QEMPTY, system) == 0.0


def test_env_after_teleport_is_input_state(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    psi = v / np.linalg.norm(v)
    d, _, system = teleport_pair(psi)
    for sched in ["t", "t", "t", ("t", "t"), "t"]:
        d = qdist_step(d, sched, TAU, system)
    d = qdist_step(d, "t", parse_action("out!q2"), system)
    assert qmath.approx_eq(env(d, system), qmath.outer(psi))


def test_alpha_examples():
    p, _ = small("nil[q]")
    d = alpha(ProbDist([(0.5, ket_dm("0"), p), (0.5, ket_dm("1"), p)]))
    assert len(d) == 1 and qmath.approx_eq(d.entries[0][1], qmath.maxmixed(1))
    rho = ket_dm("+")
    assert alpha(ProbDist.point(rho, p)).approx_eq(QuantumDist.point(rho, p))
    assert alpha(EMPTY).is_empty()


def test_gamma_examples():
    p, _ = small("nil[q]")
    g = gamma(QuantumDist.point(qmath.maxmixed(1), p))
    assert len(g) == 1 and np.isclose(g.entries[0][0], 1)
    assert qmath.approx_eq(g.entries[0][1], qmath.maxmixed(1))
    g = gamma(QuantumDist.point(0.25 * ket_dm("0"), p))
    assert np.isclose(g.entries[0][0], 0.25) and qmath.approx_eq(g.entries[0][1], ket_dm("0"))
    assert gamma(QEMPTY).is_empty()


def test_alpha_gamma_round_trip(rng):
    p, _ = small("nil[q]")
    q, _ = small("t:d!1 . nil[q]")
    d = QuantumDist([(p, 0.3 * qmath.random_density(1, rng)), (q, 0.6 * qmath.random_density(1, rng))])
    assert alpha(gamma(d)).approx_eq(d)


def test_apply_env_identity_and_sh():
    p, system = small("t:c?x . nil[x]")
    d = QuantumDist.point(ket_dm("i"), p)
    assert apply_env_superop(qmath.I, d, system).approx_eq(d)
    out = apply_env_superop(qmath.SH, d, system)
    assert qmath.approx_eq(out.entries[0][1], ket_dm("0"))


def test_apply_env_trace_decreasing_halves_env():
    p, system = small("t:c?x . nil[x]")
    d = QuantumDist.point(ket_dm("+"), p)
    half = qmath.Superoperator((np.diag([1, 0]).astype(complex),))
    out = apply_env_superop(half, d, system)
    assert np.isclose(np.trace(env(out, system)), 0.5)


def test_apply_env_rejects_owned_qubit():
    p, system = small("nil[q]")
    with pytest.raises(SemanticsError, match="process-owned"):
        apply_env_superop(qmath.X, QuantumDist.point(ket_dm("0"), p), system, ["q"])


def test_sdc_root_enabled():
    prog, system = load("sdc")
    assert enabled_q(point(prog, "SDC"), system) == [(f"t{n}", TAU) for n in range(4)]


def test_enabled_union_over_support():
    p, system = small("t:d!0 . nil[q]")
    q, _ = small("u:d!1 . nil[q]")
    d = QuantumDist([(p, 0.5 * ket_dm("0")), (q, 0.5 * ket_dm("0"))])
    assert [s for s, _ in enabled_q(d, system)] == ["t", "u"]


def test_sdc_choice_ends_in_basis_state():
    prog, system = load("sdc")
    for n in range(4):
        d = qdist_step(point(prog, "SDC"), f"t{n}", TAU, system)
        for sched in [("t", "t"), "t", "t", "t"]:
            d = qdist_step(d, sched, TAU, system)
        assert len(d) == 1
        basis = qmath.outer(qmath.ket(format(n, "02b")))
        assert qmath.approx_eq(d.entries[0][1], basis)
        assert str(enabled_q(d, system)[0][1]) == f"out!{n}"
