import pytest
from hypothesis import given, settings, strategies as st

import helpers as H
from pipg import pi_syntax as px
from pipg.pi_syntax import (
    ZERO, Configuration, Const, In, Label, New, Out, Par, Sum, Tau, canonicalize, conf_derivations,
    conf_transitions, parse_process, parse_program, show_term, substitute,
)


def P(text, names=("a", "b", "c"), defs=px.EMPTY_DEFS):
    return parse_process(text, list(names), defs)


# ---------------------------------------------------------------- parser


def test_parse_guarded_sum():
    t = P("a(b).0 + a<a>.0", ["a"])
    assert t == Sum(((In(0), ZERO), (Out(0, 0), ZERO)))


def test_parse_par_with_constant():
    defs = px.parse_definitions(["X := tau.X"])
    t = P("tau.X | a<b>.0", ["a", "b"], defs)
    assert isinstance(t, Par)
    assert t.left == Sum(((Tau(), Const("X")),))
    assert px.unfold(Const("X"), defs) == Sum(((Tau(), Const("X")),))


def test_syntax_error_offset():
    with pytest.raises(px.SyntaxError_) as e:
        P("a(b", ["a"])
    assert e.value.offset == 3
    assert "offset 3" in str(e.value)


def test_unbound_name():
    with pytest.raises(px.UnboundName):
        P("z<a>.0", ["a"])


def test_unguarded_recursion_rejected():
    with pytest.raises(px.GuardednessError):
        px.parse_definitions(["X := X | tau.0"])
    with pytest.raises(px.GuardednessError):
        px.parse_definitions(["X := Y", "Y := X"])


def test_plus_needs_guarded_operands():
    with pytest.raises(px.SyntaxError_):
        P("(a<a>.0 | 0) + tau.0", ["a"])


def test_comments_and_program():
    prog = parse_program("# loop\nX := tau.X  # spins\n[a, b] X ; a(x).x<b>.0\n")
    assert prog.names == ["a", "b"]
    assert len(prog.procs) == 2
    assert prog.config.channels == {0, 1}


def test_constants_take_free_names_as_parameters():
    prog = parse_program("E := a(x).x<x>.E\n[b, a] E")
    assert prog.defs["E"].params == ("a",)
    assert prog.procs[0] == Const("E", (1,))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_print_parse_roundtrip(seed):
    r = H.rng(f"rt{seed}")
    names = ["a", "b"]
    t = P(H.random_process_text(r, names, 4), names)
    text = show_term(t, dict(enumerate(names)))
    assert P(text, names) == t
    assert show_term(P(text, names), dict(enumerate(names))) == text


# ---------------------------------------------------------- substitution


def test_substitute_renames_free_channel():
    t = P("a(b).b<b>.0", ["a", "c"])
    assert substitute(t, {0: 1, 1: 1}) == P("c(b).b<b>.0", ["a", "c"])


def test_substitute_avoids_capture():
    t = P("a(b).0", ["a", "b"])
    u = substitute(t, {0: 1, 1: 1})
    assert u == Sum(((In(1), ZERO),))
    # printed, the binder is freshened away from the free name b
    assert show_term(u, {0: "a", 1: "b"}) == "b(b').0"


def test_substitute_identity():
    t = P("a(x).(x<a>.0 | new y.y<x>.0) + tick.0", ["a"])
    assert substitute(t, {0: 0}) == t


# --------------------------------------------------------------- rules


def conf(text, names=("a", "b")):
    names = list(names)
    return Configuration(range(len(names)), [P(part, names) for part in text.split(";")] if text else [])


def test_rule_heat():
    c = conf("tau.0 | tick.0")
    assert conf_transitions(c) == {(Label.TAU, conf("tau.0 ; tick.0"))}
    # negative: a sum is not heated
    assert all(d.rule != "heat" for d in conf_derivations(conf("tau.0 + tick.0")))


def test_rule_tau():
    assert conf_transitions(conf("tau.a<b>.0")) == {(Label.TAU, conf("a<b>.0"))}
    assert all(d.rule != "tau" for d in conf_derivations(conf("tick.0")))


def test_rule_tick():
    assert conf_transitions(conf("tick.0")) == {(Label.TICK, Configuration({0, 1}, [ZERO]))}
    assert all(d.label is not Label.TICK for d in conf_derivations(conf("tau.0")))


def test_rule_new_picks_smallest_unused_channel():
    c = Configuration({0, 2}, [Sum(((New(), Sum(((Out(-1, 0), ZERO),))),))])
    (lab, tgt), = conf_transitions(c)
    assert lab is Label.TAU
    assert tgt == Configuration({0, 1, 2}, [Sum(((Out(1, 0), ZERO),))])
    assert all(d.rule != "new" for d in conf_derivations(conf("a(x).0")))


def test_rule_sync_substitutes_payload():
    c = conf("a(x).x<x>.0 + tick.0 ; a<b>.0 + tau.0")
    syncs = [d for d in conf_derivations(c) if d.rule == "sync"]
    assert len(syncs) == 1
    assert syncs[0].target == conf("b<b>.0 ; 0")
    # negative: different channels do not synchronise
    assert not any(d.rule == "sync" for d in conf_derivations(conf("a(x).0 ; b<a>.0")))


def test_rule_frame():
    base = conf("tau.0")
    framed = conf("tau.0 ; a(x).0")
    got = {t for _, t in conf_transitions(framed)}
    assert conf("0 ; a(x).0") in got
    # negative: a frame adds no redex of its own when it is inert
    assert len(conf_transitions(framed)) == len(conf_transitions(base))


def test_empty_configuration_is_stuck():
    assert conf_transitions(Configuration({0}, [])) == set()


def test_derivations_recheck():
    r = H.rng("recheck")
    for _ in range(100):
        c = H.random_config(r)
        for d in conf_derivations(c):
            assert px.check_derivation(c, d)


def test_constant_unfolds_at_redex():
    prog = parse_program("X := tau.X\n[a] X")
    (lab, tgt), = conf_transitions(prog.config, prog.defs)
    assert lab is Label.TAU and tgt == prog.config


# -------------------------------------------------------- canonicalize


def test_canonical_first_use_order():
    c = Configuration({5, 9}, [Sum(((Out(9, 5), ZERO),))])
    got, order = canonicalize(c)
    assert got == Configuration({0, 1}, [Sum(((Out(0, 1), ZERO),))])
    assert order == {9: 0, 5: 1}


def test_canonical_idempotent_and_permutation_invariant():
    r = H.rng("canon")
    for _ in range(1000):
        c = H.random_config(r, nchan=3, nproc=3, depth=2)
        k, _ = canonicalize(c)
        assert canonicalize(k)[0] == k
        perm = list(c.channels)
        r.shuffle(perm)
        sigma = dict(zip(sorted(c.channels), perm))
        d = Configuration(c.channels, [substitute(p, sigma) for p in reversed(c.procs)])
        assert canonicalize(d)[0] == k


def test_transitions_commute_with_canonicalization():
    r = H.rng("canon-steps")
    for _ in range(100):
        c = H.random_config(r)
        k, order = canonicalize(c)
        left = {(lab, canonicalize(t)[0]) for lab, t in conf_transitions(c)}
        right = {(lab, canonicalize(t)[0]) for lab, t in conf_transitions(k)}
        assert left == right


# --------------------------------------------------------- frame fuzz


def frame_closure_holds(c: Configuration, frame: list) -> bool:
    framed = Configuration(c.channels, list(c.procs) + frame)
    succ = {canonicalize(t)[0] for _, t in conf_transitions(framed)}
    for lab, t in conf_transitions(c):
        want = Configuration(t.channels, list(t.procs) + frame)
        if canonicalize(want)[0] not in succ:
            return False
    return True


def test_frame_closure_fuzz():
    r = H.rng("frame")
    for _ in range(200):
        c = H.random_config(r, nproc=2)
        names = [f"c{i}" for i in range(2)]
        frame = [P(H.random_process_text(r, names, 2), names)]
        assert frame_closure_holds(c, frame)
