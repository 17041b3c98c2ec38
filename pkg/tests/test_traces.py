import pytest

import helpers as H
from pipg import presheaf as ps
from pipg import traces as tr
from pipg.presheaf import STAR, Morphism, Obj, agent, fork, iota, nu, out, pil, pir, position, sync, tau, tick

# ------------------------------------------------------------------ seeds

FLAGS = {
    "fork": (False, True, True), "pil": (True, False, False), "pir": (True, False, False),
    "tau": (True, True, True), "tick": (True, True, True), "nu": (True, True, True),
    "iota": (True, True, False), "out": (True, True, False), "sync": (False, True, True),
}


@pytest.mark.parametrize("kind", sorted(FLAGS))
def test_seed_flags(kind):
    params = {"iota": (2, 1), "out": (2, 1, 2), "sync": (1, 1, 2, 1, 2)}.get(kind, (2,))
    o = Obj(kind, params)
    assert (tr.is_basic(o), tr.is_full(o), tr.is_closed_world(o)) == FLAGS[kind]


def arities(p):
    return sorted(a[0].params[0] for a in p.agents())


def test_fork_seed():
    c = tr.seed_cospan(fork(2))
    assert arities(c.initial) == [2] and arities(c.final) == [2, 2]
    assert c.final.channels() == c.initial.channels() and len(c.final.channels()) == 2
    assert {c.final.agent_channels(y) for y in c.final.agents()} == {c.initial.agent_channels(c.initial.agents()[0])}
    assert tr.check_trace(c) == tr.TraceOk(1)


def test_sync_seed():
    c = tr.seed_cospan(sync(1, 1, 3, 2, 3))
    assert arities(c.initial) == [1, 3] and arities(c.final) == [2, 3]
    (recv,) = [a for a in c.initial.agents() if a[0] == agent(1)]
    (snd,) = [a for a in c.initial.agents() if a[0] == agent(3)]
    # the receiver listens on the sender's second channel
    assert c.initial.agent_channels(recv)[0] == c.initial.agent_channels(snd)[1]
    (recv2,) = [a for a in c.final.agents() if a[0] == agent(2)]
    (snd2,) = [a for a in c.final.agents() if a[0] == agent(3)]
    sch = c.final.agent_channels(snd2)
    assert c.final.agent_channels(recv2) == (sch[1], sch[2])


def test_tick0_seed():
    c = tr.seed_cospan(tick(0))
    assert arities(c.initial) == arities(c.final) == [0]
    assert c.initial.channels() == ()


def test_seed_rejects_non_seed():
    with pytest.raises(ValueError):
        tr.seed_cospan(agent(2))


@pytest.mark.parametrize("label", [tau(2), tick(1), fork(0), fork(2), nu(1), pil(2), pir(1), iota(2, 1),
                                   out(2, 2, 1), sync(1, 1, 3, 2, 3), sync(2, 2, 2, 1, 1)], ids=lambda o: o.tag)
def test_every_seed_is_a_trace_of_length_one(label):
    c = tr.seed_cospan(label)
    assert tr.check_trace(c) == tr.TraceOk(1)
    (a,) = tr.sequentialize(c)
    assert a.label == label
    assert tr.special_iso(tr.recompose([a]), c) is not None


# -------------------------------------------------------- instantiation


def test_fork_with_passive_bystander():
    # ambient: channels a', b', c and a passive y(b', c)
    z = position([0, 1, 2], [(0, (1, 2))])
    iface = tr.seed_interface(fork(2))
    act = tr.instantiate_action(fork(2), Morphism(iface, z, {STAR: {0: 0, 1: 1}}))
    c = act.cospan
    assert tr.check_trace(c) == tr.TraceOk(1)
    assert len(c.initial.channels()) == 3 and arities(c.initial) == [2, 2]
    assert arities(c.final) == [2, 2, 2]
    ys = [y for y, (b, _) in act.branches.items() if b is None]
    assert len(ys) == 1
    word, origin = tr.view_of(c, ys[0])
    assert word == [] and c.initial.agent_channels(origin) == (1, 2)


def test_identity_attachment_gives_the_seed():
    for label in (fork(2), sync(1, 1, 3, 2, 3), nu(1), iota(2, 2)):
        iface = tr.seed_interface(label)
        seed = tr.seed_cospan(label)
        z, _ = ps.interface_of(seed.initial)
        act = tr.instantiate_action(label, ps.identity(iface))
        assert tr.check_trace(act.cospan) == tr.TraceOk(1)
        assert ps.iso_check(act.cospan.middle, seed.middle) is not None


def test_received_channel_stays_fresh():
    z = position([0], [(0, (0,))])
    iface = tr.seed_interface(iota(1, 1))
    act = tr.instantiate_action(iota(1, 1), Morphism(iface, z, {STAR: {0: 0}}))
    c = act.cospan
    assert len(c.initial.channels()) == 1 and len(c.final.channels()) == 2
    fresh = set(c.s.image()) - set(c.t.image())
    assert any(e[0] == STAR for e in fresh)
    assert tr.check_trace(c) == tr.TraceOk(1)


def test_instantiate_rejects_wrong_interface():
    z = position([0, 1], [])
    with pytest.raises(ValueError):
        tr.instantiate_action(fork(2), Morphism(ps.discrete([0]), z, {STAR: {0: 0}}))


# ------------------------------------------------------------ composition


def test_compose_identity_law():
    r = H.rng("id-law")
    for _ in range(30):
        c, _ = H.random_composite(r, 3)
        assert tr.special_iso(tr.compose_traces(c, tr.identity_cospan(c.final)), c) is not None
        assert tr.special_iso(tr.compose_traces(tr.identity_cospan(c.initial), c), c) is not None


def test_remote_forks_commute():
    x = position([0, 1, 2], [(0, (0, 1)), (1, (1, 2))])
    a, b = sorted(x.agents(), key=lambda e: e[1])
    f1 = tr.action_from(x, fork(2), (a,))
    g1 = tr.action_from(f1.cospan.final, fork(2), (b,))
    f2 = tr.action_from(x, fork(2), (b,))
    g2 = tr.action_from(f2.cospan.final, fork(2), (a,))
    left = tr.compose_traces(f1.cospan, g1.cospan)
    right = tr.compose_traces(f2.cospan, g2.cospan)
    assert tr.check_trace(left) == tr.check_trace(right) == tr.TraceOk(2)
    assert tr.special_iso(left, right) is not None


def test_relay_has_causal_path_back_to_receiver():
    c, d = H.relay_trace()
    assert tr.check_trace(c) == tr.TraceOk(2)
    g = tr.causal_graph(c.middle)
    cores = g.cores()
    second = next(m for m in cores if m[0] == sync(2, 2, 2, 1, 2))
    y = c.t(d["y"])
    assert y in g.reachable(second)
    first = next(m for m in cores if m[0] == sync(1, 1, 2, 2, 1))
    assert first in g.reachable(second) and second not in g.reachable(first)


def test_compose_rejects_mismatch():
    a = tr.seed_cospan(fork(1))
    b = tr.seed_cospan(fork(3))
    with pytest.raises(ValueError):
        tr.compose_traces(a, b)


# ------------------------------------------------------- cores and graph


def test_fork_core():
    u = ps.representable(fork(2)).presheaf
    (core,) = tr.core_info(u)
    assert len(core.targets) == 1 and len(core.sources) == 2
    assert core.targets[0] == u.follow(core.element, ("l", "t"))


def test_sync_core_creates_nothing():
    u = ps.representable(sync(1, 1, 3, 2, 3)).presheaf
    (core,) = tr.core_info(u)
    assert core.label.kind == "sync" and core.created is None


def test_input_core_creates_a_channel():
    u = ps.representable(iota(2, 1)).presheaf
    (core,) = tr.core_info(u)
    g = tr.causal_graph(u)
    assert (core.created, core.element) in g.edges


def test_position_graph():
    x = position([0, 1], [(0, (0, 1)), (1, (1,))])
    g = tr.causal_graph(x)
    assert g.cores() == []
    assert all(g.colour[a] == 1 and g.colour[b] == 0 for a, b in g.edges)
    assert g.find_cycle() is None


def test_graph_respects_colours():
    r = H.rng("colours")
    for _ in range(50):
        c, _ = H.random_composite(r, 3)
        g = tr.causal_graph(c.middle)
        for a, b in g.edges:
            assert not (g.colour[a] == 0 and g.colour[b] == 1)
            assert not (g.colour[a] == 2 and g.colour[b] == 0)


# ------------------------------------------------------------ check_trace


def test_identity_is_ok_zero():
    r = H.rng("ok0")
    for _ in range(20):
        assert tr.check_trace(tr.identity_cospan(H.random_position(r))) == tr.TraceOk(0)


def drop_final_agent(c: tr.Cospan, y) -> tr.Cospan:
    keep = [e for e in c.final.elems() if e != y]
    y2, _ = ps.subpresheaf(c.final, keep)
    s2 = Morphism(y2, c.middle, {o: {i: c.s.maps[o][i] for i in y2.ids(o)} for o in y2.elements})
    return tr.Cospan(c.initial, c.middle, y2, c.t, s2)


def test_fork_missing_final_agent():
    c = tr.seed_cospan(fork(2))
    y = c.final.agents()[0]
    v = tr.check_trace(drop_final_agent(c, y))
    assert v.kind == "iii" and v.witness == c.s(y)


def mutate_delete_final(r):
    while True:
        c, acts = H.random_composite(r, r.randint(1, 4))
        if acts and c.final.agents():
            return drop_final_agent(c, r.choice(c.final.agents()))


def merge_elements(u: ps.Presheaf, keep, drop) -> ps.Presheaf:
    elements = {o: [i for i in ids if (o, i) != drop] for o, ids in u.elements.items()}
    action = {}
    for (o, i, g), j in u.action.items():
        if (o, i) == drop:
            continue
        action[(o, i, g)] = keep[1] if (ps.gen_domain(o, g), j) == drop else j
    return ps.Presheaf(elements, action)


SOLO = ("tau", "tick", "fork", "nu", "iota", "out")


def mutate_identify_agents(r):
    """Two twin agents each act once; gluing the twins gives one agent with
    two actions starting from it."""
    nch = r.randint(1, 3)
    n = r.randint(1, 2)
    chans = tuple(r.randrange(nch) for _ in range(n))
    agents = [(0, chans), (1, chans)] + [(2 + k, tuple(r.randrange(nch) for _ in range(r.randint(0, 2))))
                                         for k in range(r.randint(0, 2))]
    x = position(range(nch), agents)
    x0, x1 = (agent(n), 0), (agent(n), 1)
    first = H.random_action(r, x, SOLO)
    while tr.targets(first.cospan.middle, first.core) != [x0]:
        first = H.random_action(r, x, SOLO)
    acts = [first]
    # the twin x1 is passive in the first action, so it survives unchanged
    opts = []
    while not opts:
        a = H.random_action(r, first.cospan.final, SOLO)
        if tr.targets(a.cospan.middle, a.core) == [a.cospan.t(x1)]:
            opts.append(a)
    acts.append(opts[0])
    for _ in range(r.randint(0, 2)):
        extra = H.random_action(r, acts[-1].cospan.final)
        if extra is not None:
            acts.append(extra)
    c = tr.compose_all(a.cospan for a in acts)
    keep, drop = c.t(x0), c.t(x1)
    u = merge_elements(c.middle, keep, drop)
    xk, _ = ps.subpresheaf(c.initial, [e for e in c.initial.elems() if e != x1])
    t = Morphism(xk, u, {o: {i: c.t.maps[o][i] for i in xk.ids(o)} for o in xk.elements})
    s = Morphism(c.final, u, c.s.maps)
    return tr.Cospan(xk, u, c.final, t, s)


def mutate_cycle(r):
    """Two synchronisations whose senders are rewired to each other's avatars."""
    nch = r.randint(1, 3)
    n = r.randint(1, 3)
    chans = tuple(r.randrange(nch) for _ in range(n))
    a = r.randint(1, n)
    c_ = r.choice([k for k in range(1, n + 1) if chans[k - 1] == chans[a - 1]])
    d = r.randint(1, n)
    extra = r.randint(0, 2)
    agents = [(k, chans) for k in range(4)]
    agents += [(10 + k, tuple(r.randrange(nch) for _ in range(r.randint(0, 3)))) for k in range(extra)]
    x = position(range(nch), agents)
    A, B, C, D = ((agent(n), k) for k in range(4))
    lab = sync(n, a, n, c_, d)
    act1 = tr.action_from(x, lab, (A, B))
    act2 = tr.action_from(act1.cospan.final, lab, (C, D))
    cos = tr.compose_traces(act1.cospan, act2.cospan)
    u = cos.middle
    cores = tr.cores_of(u)
    core1 = next(m for m in cores if u.follow(m, ("rho", "t")) == cos.t(A))
    core2 = next(m for m in cores if u.follow(m, ("rho", "t")) == cos.t(C))
    b_after, d_after = u.follow(core1, ("eps", "s")), u.follow(core2, ("eps", "s"))
    action = dict(u.action)
    for core, new in ((core1, d_after), (core2, b_after)):
        e = u.act(core, "eps")
        action[(e[0], e[1], "t")] = new[1]
    drop = {cos.t(B), cos.t(D)}
    elements = {o: [i for i in ids if (o, i) not in drop] for o, ids in u.elements.items()}
    action = {k: v for k, v in action.items() if (k[0], k[1]) not in drop}
    u2 = ps.Presheaf(elements, action)
    xk, _ = ps.subpresheaf(x, [e for e in x.elems() if e not in (B, D)])
    t = Morphism(xk, u2, {o: {i: cos.t.maps[o][i] for i in xk.ids(o)} for o in xk.elements})
    ys = set(u2.elems((0,))) | {u.follow(core1, ("rho", "s")), u.follow(core2, ("rho", "s"))}
    ys |= {cos.t(e) for e in x.agents() if e not in (A, B, C, D)}
    yk, inc = ps.subpresheaf(u2, ys)
    return tr.Cospan(xk, u2, yk, t, inc)


@pytest.mark.parametrize("mutate, kind", [(mutate_delete_final, "iii"), (mutate_identify_agents, "linearity"),
                                          (mutate_cycle, "acyclicity")])
def test_mutation_classes(mutate, kind):
    r = H.rng(f"mutation-{kind}")
    for _ in range(40):
        v = mutate(r)
        got = tr.check_trace(v)
        assert not got and got.kind == kind, str(got)


# --------------------------------------------------------- sequentialize


def test_sequentialize_remote_forks_both_orders():
    x = position([0, 1], [(0, (0,)), (1, (1,))])
    a, b = x.agents()
    f = tr.action_from(x, fork(1), (a,))
    g = tr.action_from(f.cospan.final, fork(1), (b,))
    c = tr.compose_traces(f.cospan, g.cospan)
    acts = tr.sequentialize(c)
    assert len(acts) == 2
    assert tr.special_iso(tr.recompose(acts), c) is not None
    other = tr.sequentialize(c, choose=lambda cores: max(cores, key=tr._order))
    assert tr.special_iso(tr.recompose(other), c) is not None
    assert [x.core for x in acts] != [x.core for x in other]


def test_sequentialize_relay_peels_the_enabling_sync_first():
    c, _ = H.relay_trace()
    acts = tr.sequentialize(c)
    assert [a.label for a in acts] == [sync(1, 1, 2, 2, 1), sync(2, 2, 2, 1, 2)]
    assert tr.special_iso(tr.recompose(acts), c) is not None


def test_sequentialize_rejects_invalid():
    c = drop_final_agent(tr.seed_cospan(fork(1)), tr.seed_cospan(fork(1)).final.agents()[0])
    with pytest.raises(ValueError):
        tr.sequentialize(c)


def test_roundtrip_fuzz():
    r = H.rng("trace-roundtrip")
    for _ in range(100):
        c, acts = H.random_composite(r, r.randint(0, 4))
        assert tr.check_trace(c) == tr.TraceOk(len(acts))
        back = tr.recompose(tr.sequentialize(c), c.initial)
        assert tr.special_iso(back, c) is not None


# ------------------------------------------------------------------ views


def test_fork_left_view():
    c = tr.seed_cospan(fork(2))
    mu = c.actions[0].core
    left = c.middle.follow(mu, ("l", "s"))
    yl = next(y for y in c.final.agents() if c.s(y) == left)
    word, origin = tr.view_of(c, yl)
    assert word == [pil(2)] and c.t(origin) == c.middle.follow(mu, ("l", "t"))


def test_fork_branches_recover_both_halves():
    c = tr.seed_cospan(fork(1))
    words = sorted(tuple(tr.view_of(c, y)[0]) for y in c.final.agents())
    assert words == [(pil(1),), (pir(1),)]


def test_relay_receiver_view():
    c, d = H.relay_trace()
    (y,) = [e for e in c.final.agents() if e[0] == agent(3)]
    word, origin = tr.view_of(c, y)
    assert word == [iota(1, 1), iota(2, 2)] and origin == d["y"]


def test_view_independent_of_decomposition():
    r = H.rng("views")
    for _ in range(60):
        c, acts = H.random_composite(r, 4)
        alt = tr.sequentialize(c, choose=lambda cores: max(cores, key=tr._order))
        for y in c.final.agents():
            w1 = tr.view_of(c, y)
            assert w1 == tr.view_of(c, y, alt)
            walked, origin = tr.view_walk(c.middle, c.s(y))
            assert w1 == (walked, next(e for e in c.initial.elems() if c.t(e) == origin))
            assert len(w1[0]) <= len(acts)


def test_view_requires_final_agent():
    c = tr.seed_cospan(fork(1))
    with pytest.raises(ValueError):
        tr.view_of(c, (STAR, 0))


# ----------------------------------------------------- closed-world moves


def test_closed_world_on_nullary_agent():
    x = position([], [(0, ())])
    labels = sorted(a.label.kind for a in tr.closed_world_actions_from(x))
    assert labels == ["fork", "nu", "tau", "tick"]


def brute_force_syncs(x) -> int:
    """Count (receiver, sender, a, c, d) with matching channels by scanning
    every seed shape up to the agents' arities."""
    count = 0
    ags = x.agents()
    for recv in ags:
        for snd in ags:
            if recv == snd:
                continue
            n, m = recv[0].params[0], snd[0].params[0]
            for a in range(1, n + 1):
                for c in range(1, m + 1):
                    for d in range(1, m + 1):
                        try:
                            tr.action_from(x, sync(n, a, m, c, d), (recv, snd))
                            count += 1
                        except ValueError:
                            pass
    return count


def test_closed_world_shared_channel():
    x = position([0], [(0, (0,)), (1, (0,))])
    acts = tr.closed_world_actions_from(x)
    assert len(acts) == 4 + 4 + 2
    assert sum(a.label.kind == "sync" for a in acts) == brute_force_syncs(x) == 2


def test_closed_world_disjoint_channels():
    x = position([0, 1], [(0, (0,)), (1, (1,))])
    assert not any(a.label.kind == "sync" for a in tr.closed_world_actions_from(x))


def test_closed_world_counts_against_brute_force():
    r = H.rng("cw-count")
    for _ in range(30):
        x = H.random_position(r, 3, 3)
        acts = tr.closed_world_actions_from(x)
        syncs = sum(a.label.kind == "sync" for a in acts)
        assert syncs == brute_force_syncs(x)
        assert len(acts) - syncs == 4 * len(x.agents())
        assert all(tr.check_trace(a.cospan) == tr.TraceOk(1) for a in acts)


# ------------------------------------------------------------- invariants


def test_legs_are_monic_and_keep_channels():
    r = H.rng("legs")
    for _ in range(100):
        c, _ = H.random_composite(r, r.randint(0, 4))
        assert c.s.is_monic() and c.t.is_monic()
        assert ps.is_one_injective(c.s) and ps.is_one_injective(c.t)
        assert {e for e in c.s.image() if e[0] == STAR} == set(c.middle.elems((0,)))


def test_cospan_format_roundtrip():
    r = H.rng("cospan-fmt")
    for _ in range(30):
        c, _ = H.random_composite(r, 3)
        text = tr.dump_cospan(c)
        back = tr.load_cospan(text)
        assert tr.dump_cospan(back) == text
        assert tr.check_trace(back) == tr.check_trace(c)


def test_cospan_format_errors():
    with pytest.raises(ps.FormatError):
        tr.load_cospan("SECTION Q\n")
    with pytest.raises(ps.FormatError):
        tr.load_cospan("CHANNELS 0\n")
