import pytest

from lqcheck.corpus import load, source_names, source_text
from lqcheck.lang import (
    EvalError,
    ParseError,
    eval_expr,
    free_vars,
    parse,
    parse_process,
    pretty,
    substitute,
    tags_of,
)
from lqcheck.lang.syntax import (
    FALSE,
    TRUE,
    Eq,
    Le,
    Meas,
    NatLit,
    Nil,
    Not,
    Par,
    Prefix,
    QubitLit,
    Recv,
    Send,
    SopApply,
    Sum,
    Tau,
    TauPair,
    Var,
)

HEADER = "channel c : qubit\nchannel d : bit\nqubits q q2\n"


def test_parse_send_then_nil():
    prog = parse(HEADER + "proc P = t0:c!q . nil[]")
    assert prog.process("P") == Prefix(Send("t0", "c", QubitLit("q")), Nil(()))


def test_parse_quantum_lottery_preparer():
    prog, _ = load("quantum_lottery")
    send = lambda: Prefix(Send("t3", "c", QubitLit("q")), Nil(()))  # noqa: E731
    expected = Sum(
        Prefix(SopApply("t1", "X", (QubitLit("q"),)), send()),
        Prefix(SopApply("t2", "H", (QubitLit("q"),)), send()),
    )
    assert prog.process("Pr") == expected
    assert isinstance(prog.process("QL"), Par)


def test_parse_pair_tau():
    prog = parse(HEADER + "proc P = (t,t'):tau . nil[q, q2]")
    p = prog.process("P")
    assert p.action == TauPair("t", "t'")


def test_parse_tau_power_repeats_tag():
    p = parse(HEADER + "proc P = t:tau^3 . nil[q, q2]").process("P")
    steps = 0
    while isinstance(p, Prefix):
        assert p.action == Tau("t")
        p, steps = p.cont, steps + 1
    assert steps == 3


def test_parse_implicit_nil():
    p = parse(HEADER + "proc P = t:d!1").process("P")
    assert p == Prefix(Send("t", "d", NatLit(1)), Nil(()))


def test_parse_measurement_binds_variable():
    p = parse(HEADER + "proc P = t:meas M01(q > x) . t:d!x . nil[q, q2]").process("P")
    assert isinstance(p.action, Meas) and p.action.var == "x"
    assert p.cont.action.expr == Var("x")


@pytest.mark.parametrize("name", source_names())
def test_corpus_sources_parse(name):
    prog = parse(source_text(name))
    assert prog.procs


@pytest.mark.parametrize("name", source_names())
def test_pretty_round_trip(name):
    prog, _ = load(name)
    for proc in prog.procs:
        try:
            p = prog.process(proc)
        except ParseError:
            continue  # fragments with free names are only used inside other processes
        assert parse_process(pretty(p), prog) == p


@pytest.mark.parametrize(
    "text, fragment",
    [
        ("", "no process"),
        (HEADER + "proc P = t:Foo(q) . nil[]", "Foo"),
        (HEADER + "proc P = t:meas Bar(q > x) . nil[q]", "Bar"),
        (HEADER + "proc P = t:e!1 . nil[]", "e"),
        (HEADER + "proc P = t:c!q . ", "expected"),
        (HEADER + "proc P = t:CNOT(q) . nil[q]", "CNOT"),
    ],
)
def test_parse_errors(text, fragment):
    with pytest.raises(ParseError) as info:
        parse(text).process()
    assert fragment in str(info.value)


def test_parse_error_carries_position():
    with pytest.raises(ParseError) as info:
        parse(HEADER + "proc P = t:c!q ) nil[]")
    assert info.value.line == 4


def test_eval_examples():
    assert eval_expr(Eq(NatLit(1), NatLit(1))) == TRUE
    assert eval_expr(Eq(QubitLit("q0"), QubitLit("q1"))) == FALSE
    assert eval_expr(Not(Le(NatLit(0), NatLit(1)))) == FALSE


def test_eval_uses_bindings():
    assert eval_expr(Le(Var("x"), NatLit(2)), {"x": NatLit(3)}) == FALSE


def test_eval_unbound_variable():
    with pytest.raises(EvalError):
        eval_expr(Var("x"))


def test_eval_rejects_mixed_equality():
    with pytest.raises(EvalError):
        eval_expr(Eq(NatLit(1), TRUE))


def test_substitute_send_value():
    p = Prefix(Send("t", "c", Var("x")), Nil(()))
    assert substitute(p, "x", NatLit(3)) == Prefix(Send("t", "c", NatLit(3)), Nil(()))


def test_substitute_reaches_later_measurement():
    prog, _ = load("qcf")
    bob = prog.process("Bob")
    assert isinstance(bob.action, Recv)
    after = substitute(bob.cont, bob.action.var, QubitLit("q"))
    assert "x" not in free_vars(after)
    assert "M01(q > p)" in pretty(after) and "nil[q]" in pretty(after)


def test_substitute_stops_at_binder():
    p = Prefix(Recv("t", "d", "x"), Prefix(Send("t", "d", Var("x")), Nil(())))
    assert substitute(p, "x", NatLit(1)) == p


def test_tags_examples():
    prog, _ = load("quantum_lottery")
    assert tags_of(prog.process("Pr")) == {"t1", "t2", "t3"}
    assert tags_of(prog.process("QL")) == {f"t{i}" for i in range(1, 7)}
    assert tags_of(Nil(())) == frozenset()
    a, b = prog.process("Pr"), prog.process("An")
    assert tags_of(Par(a, b)) == tags_of(a) | tags_of(b)


def test_tags_of_pair_scheduler():
    assert tags_of(Prefix(TauPair("a", "b"), Nil(()))) == {"a", "b"}
