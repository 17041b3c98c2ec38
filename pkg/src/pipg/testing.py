"""Graphs with testing: exploration, poles, fair testing, bisimulation and
expansion games, the transition systems on mixed and positioned
behaviours, and a brute-force oracle for global behaviour states."""

from __future__ import annotations

import itertools
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Hashable, Iterable, Mapping, Sequence

from . import behaviours as bh
from . import pi_syntax as px
from .behaviours import MixedBehaviour, PositionedBehaviour, State
from .pi_syntax import Configuration, Label, Term
from .presheaf import Elem, Obj, pushout, discrete, Morphism, STAR
from .traces import Action, Cospan, closed_world_actions_from, lineage, view_walk

TAU, TICK = Label.TAU, Label.TICK


# ---------------------------------------------------------- exploration


@dataclass(frozen=True)
class Budget:
    max_states: int = 20_000
    max_depth: int | None = None
    time_cap: float | None = None

    def __post_init__(self):
        if self.max_states <= 0 or (self.max_depth is not None and self.max_depth <= 0) \
                or (self.time_cap is not None and self.time_cap <= 0):
            raise ValueError("budget limits must be positive")


@dataclass
class LtsGraph:
    """Explored fragment of a transition system over {tau, tick}.

    ``edges[v]`` lists ``(label, w)`` pairs; identity edges are implicit.
    """

    root: Hashable
    payload: dict[Hashable, object]
    edges: dict[Hashable, list[tuple[Label, Hashable]]]
    complete: bool
    budget_used: int

    @property
    def vertices(self) -> list[Hashable]:
        return list(self.payload)

    def edge_count(self) -> int:
        return sum(len(v) for v in self.edges.values())


def explore(root, successors: Callable[[object], Iterable[tuple[Label, object]]],
            key: Callable[[object], tuple[Hashable, object]],
            budget: Budget = Budget(), order: Callable[[Hashable], object] | None = None) -> LtsGraph:
    """Breadth-first exploration over canonical keys.

    ``key(state)`` returns ``(canonical key, representative)``; successors
    are computed on representatives.  ``order`` sorts successor keys so that
    the output is independent of set iteration order.
    """
    start = time.monotonic()
    k0, rep0 = key(root)
    payload = {k0: rep0}
    edges: dict[Hashable, list[tuple[Label, Hashable]]] = {}
    depth = {k0: 0}
    queue = deque([k0])
    complete = True
    while queue:
        v = queue.popleft()
        if budget.time_cap is not None and time.monotonic() - start > budget.time_cap:
            complete = False
            break
        if budget.max_depth is not None and depth[v] >= budget.max_depth:
            complete = False
            edges.setdefault(v, [])
            continue
        succ = []
        seen = set()
        for lab, s in successors(payload[v]):
            k, rep = key(s)
            if (lab, k) not in seen:
                seen.add((lab, k))
                succ.append((lab, k, rep))
        if order is not None:
            succ.sort(key=lambda e: (e[0].value, order(e[1])))
        out = []
        for lab, k, rep in succ:
            if k not in payload:
                if len(payload) >= budget.max_states:
                    complete = False
                    continue
                payload[k] = rep
                depth[k] = depth[v] + 1
                queue.append(k)
            out.append((lab, k))
        edges[v] = out
    for v in payload:
        edges.setdefault(v, [])
    if queue:
        complete = False
    return LtsGraph(k0, payload, edges, complete, len(payload))


def graph_from_edges(root, edges: Mapping[Hashable, Iterable[tuple[Label, Hashable]]]) -> LtsGraph:
    """A complete graph from an explicit edge table (restricted to the part reachable from ``root``)."""
    table = {v: list(e) for v, e in edges.items()}
    seen = {root: None}
    queue = deque([root])
    while queue:
        v = queue.popleft()
        for _, w in table.get(v, []):
            if w not in seen:
                seen[w] = None
                queue.append(w)
    return LtsGraph(root, {v: v for v in seen}, {v: table.get(v, []) for v in seen}, True, len(seen))


# ----------------------------------------------------------------- poles


@dataclass(frozen=True)
class PoleResult:
    """``member`` is ``None`` when the graph is truncated."""

    member: bool | None
    witness: tuple[str, ...] = ()

    def __str__(self):
        if self.member is None:
            return "inconclusive"
        return "pass" if self.member else "fail [" + " ".join(self.witness) + "]"


POLES = ("fair", "may", "must", "forallreach")


def _can_tick(g: LtsGraph) -> set:
    """Vertices with a tau*-tick path."""
    rev: dict = {}
    good = set()
    for v, es in g.edges.items():
        for lab, w in es:
            if lab is TICK:
                good.add(v)
            else:
                rev.setdefault(w, []).append(v)
    stack = list(good)
    while stack:
        w = stack.pop()
        for v in rev.get(w, ()):
            if v not in good:
                good.add(v)
                stack.append(v)
    return good


def _bfs(g: LtsGraph, v, labels: tuple[Label, ...]) -> dict:
    """Parent map of the vertices reachable from ``v`` along ``labels`` edges."""
    parent = {v: None}
    queue = deque([v])
    while queue:
        u = queue.popleft()
        for lab, w in g.edges[u]:
            if lab in labels and w not in parent:
                parent[w] = (u, lab)
                queue.append(w)
    return parent


def _path(parent: dict, w) -> tuple[str, ...]:
    out = []
    while parent[w] is not None:
        u, lab = parent[w]
        out.append(str(lab))
        w = u
    return tuple(reversed(out))


def pole_membership(g: LtsGraph, v, pole: str) -> PoleResult:
    if v not in g.payload:
        raise KeyError("vertex not in graph")
    if pole not in POLES:
        raise ValueError(f"unknown pole {pole!r}")
    if not g.complete:
        return PoleResult(None)
    good = _can_tick(g)
    if pole == "may":
        return PoleResult(True) if v in good else PoleResult(False, ("no tick reachable",))
    if pole in ("fair", "forallreach"):
        labels = (TAU,) if pole == "fair" else (TAU, TICK)
        parent = _bfs(g, v, labels)
        for w in parent:
            if w not in good:
                return PoleResult(False, _path(parent, w) + ("stuck",))
        return PoleResult(True)
    # must: the tau-only part below v is finite, acyclic and dead-end free
    parent = _bfs(g, v, (TAU,))
    for w in parent:
        if not g.edges[w]:
            return PoleResult(False, _path(parent, w) + ("deadlock",))
    state: dict = {}
    for r in parent:
        if r in state:
            continue
        stack = [(r, iter([w for lab, w in g.edges[r] if lab is TAU]))]
        state[r] = 1
        while stack:
            u, it = stack[-1]
            w = next(it, None)
            if w is None:
                state[u] = 2
                stack.pop()
            elif state.get(w) == 1:
                return PoleResult(False, _path(parent, w) + ("tau-cycle",))
            elif w not in state:
                state[w] = 1
                stack.append((w, iter([x for lab, x in g.edges[w] if lab is TAU])))
    return PoleResult(True)


# ------------------------------------------------------ testing structures


class TestingStructure:
    """Parallel composition, compatibility and the transition system of an
    instance."""

    __test__ = False  # not a pytest class

    def par(self, x, y):
        raise NotImplementedError

    def coh(self, x, y) -> bool:
        return self.par(x, y) is not None

    def successors(self, x) -> Iterable[tuple[Label, object]]:
        raise NotImplementedError

    def key(self, x) -> tuple[Hashable, object]:
        raise NotImplementedError

    def order(self, k) -> object:
        return repr(k)

    def explore(self, x, budget: Budget = Budget()) -> LtsGraph:
        return explore(x, self.successors, self.key, budget, self.order)


def _conf_order(c: Configuration):
    return (len(c.channels), tuple(px.term_key(p) for p in c.procs))


class ConfStructure(TestingStructure):
    def __init__(self, defs: Mapping[str, px.Definition] = px.EMPTY_DEFS):
        self.defs = defs

    def par(self, x: Configuration, y: Configuration):
        return x.par(y)

    def successors(self, x: Configuration):
        return px.conf_transitions(x, self.defs)

    def key(self, x: Configuration):
        c, _ = px.canonicalize(x)
        return c, c

    def order(self, k: Configuration):
        return _conf_order(k)


class MixedStructure(TestingStructure):
    def par(self, x: MixedBehaviour, y: MixedBehaviour):
        return x.par(y)

    def successors(self, x: MixedBehaviour):
        return m_transitions(x, canonical=False)

    def key(self, x: MixedBehaviour):
        c, _ = bh.canonicalize_mixed(x)
        return c, c

    def order(self, k: MixedBehaviour):
        return k.key()


class PositionedStructure(TestingStructure):
    def par(self, x: PositionedBehaviour, y: PositionedBehaviour):
        return s_par(x, y)

    def successors(self, x: PositionedBehaviour):
        return s_transitions(x)

    def key(self, x: PositionedBehaviour):
        c, _ = bh.canonicalize_mixed(bh.m_map(x))
        return c, x

    def order(self, k: MixedBehaviour):
        return k.key()


# ----------------------------------------------------------- fair testing


@dataclass(frozen=True)
class Same:
    tests: int
    states: int = field(default=0, compare=False)
    edges: int = field(default=0, compare=False)

    def __str__(self):
        return f"Same ({self.tests} tests)"


@dataclass(frozen=True)
class Differ:
    test: object
    side: str
    witness: tuple[str, ...]
    states: int = field(default=0, compare=False)
    edges: int = field(default=0, compare=False)

    def __str__(self):
        return f"Differ on {self.side}"


@dataclass(frozen=True)
class Inconclusive:
    reason: str
    states: int = field(default=0, compare=False)
    edges: int = field(default=0, compare=False)

    def __str__(self):
        return f"Inconclusive: {self.reason}"


def pass_test(structure: TestingStructure, x, t, pole: str, budget: Budget = Budget()) -> tuple[PoleResult, LtsGraph]:
    comp = structure.par(x, t)
    if comp is None:
        raise ValueError("test is not compatible with the tested state")
    g = structure.explore(comp, budget)
    return pole_membership(g, g.root, pole), g


def fair_testing_compare(x, y, tests: Sequence, pole: str = "fair", budget: Budget = Budget(),
                         structure: TestingStructure | None = None, jobs: int = 1):
    """Compare ``x`` and ``y`` on every test; the first disagreement wins."""
    structure = structure or ConfStructure()
    if not structure.coh(x, y):
        raise ValueError("compared states are not compatible")
    results = _run_tests(structure, x, y, tests, pole, budget, jobs)
    truncated = False
    states = edges = 0
    for t, (rx, ry, n, e) in zip(tests, results):
        states += n
        edges += e
        if rx.member is None or ry.member is None:
            truncated = True
            continue
        if rx.member != ry.member:
            side, w = ("left", rx.witness) if not rx.member else ("right", ry.witness)
            return Differ(t, side, w, states, edges)
    if truncated:
        return Inconclusive("exploration budget exhausted on some test", states, edges)
    return Same(len(tests), states, edges)


def _one_test(args):
    structure, x, y, t, pole, budget = args
    rx, gx = pass_test(structure, x, t, pole, budget)
    ry, gy = pass_test(structure, y, t, pole, budget)
    return rx, ry, len(gx.payload) + len(gy.payload), gx.edge_count() + gy.edge_count()


def _run_tests(structure, x, y, tests, pole, budget, jobs):
    for t in tests:
        if not structure.coh(x, t) or not structure.coh(y, t):
            raise ValueError("a test is not compatible with the compared states")
    work = [(structure, x, y, t, pole, budget) for t in tests]
    if jobs > 1 and len(work) > 1:
        from concurrent.futures import ProcessPoolExecutor
        try:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                return list(pool.map(_one_test, work, chunksize=max(1, len(work) // (4 * jobs))))
        except (OSError, TypeError, AttributeError, ValueError):
            pass
    return [_one_test(w) for w in work]


def battery(channels: Sequence[int], depth: int) -> list[Term]:
    """Tests of depth at most ``depth`` over ``channels``, each with exactly
    one tick: a chain of visible prefixes towards the tick, where every step
    may offer one extra visible prefix leading to ``0``.  Prefixed tests come
    before the bare tick."""
    guards: list[px.Guard] = [px.In(a, "x") for a in channels]
    guards += [px.Out(a, b) for a in channels for b in channels]
    tick = px.Sum(((px.Tick(), px.ZERO),))
    levels = [[tick]]
    for _ in range(depth - 1):
        prev = levels[-1]
        nxt = []
        for g in guards:
            for t in prev:
                nxt.append(px.Sum(((g, t),)))
        for g in guards:
            for t in prev:
                for g2 in guards:
                    if g2 != g:
                        nxt.append(px.Sum(((g, t), (g2, px.ZERO))))
        nxt.append(tick)
        levels.append(nxt)
    out = list(dict.fromkeys(levels[-1]))
    return out


# ---------------------------------------------------------- bisimulation


def _refine(vertices: list, succ: Callable[[Hashable], Iterable[tuple[object, Hashable]]]) -> dict:
    block = {v: 0 for v in vertices}
    nblocks = 1
    while True:
        sig = {v: (block[v], tuple(sorted({(str(l), block[w]) for l, w in succ(v)}))) for v in vertices}
        ids = {s: i for i, s in enumerate(sorted(set(sig.values())))}
        new = {v: ids[sig[v]] for v in vertices}
        if len(ids) == nblocks:
            return new
        block, nblocks = new, len(ids)


def _union(g1: LtsGraph, g2: LtsGraph):
    if not (g1.complete and g2.complete):
        raise ValueError("bisimulation checks need complete graphs")
    verts = [(1, v) for v in g1.payload] + [(2, v) for v in g2.payload]
    edges = {(1, v): [(l, (1, w)) for l, w in g1.edges[v]] for v in g1.payload}
    edges.update({(2, v): [(l, (2, w)) for l, w in g2.edges[v]] for v in g2.payload})
    return verts, edges


def strong_bisim_check(g1: LtsGraph, v1, g2: LtsGraph, v2) -> bool:
    verts, edges = _union(g1, g2)
    block = _refine(verts, lambda v: edges[v])
    return block[(1, v1)] == block[(2, v2)]


def _saturate(verts: list, edges: dict) -> dict:
    tau_star = {}
    for v in verts:
        seen = {v}
        stack = [v]
        while stack:
            u = stack.pop()
            for l, w in edges[u]:
                if l is TAU and w not in seen:
                    seen.add(w)
                    stack.append(w)
        tau_star[v] = seen
    weak = {}
    for v in verts:
        out = {(TAU, w) for w in tau_star[v]}
        for u in tau_star[v]:
            for l, w in edges[u]:
                if l is TICK:
                    out.update((TICK, x) for x in tau_star[w])
        weak[v] = sorted(out, key=repr)
    return weak


def weak_bisim_check(g1: LtsGraph, v1, g2: LtsGraph, v2) -> bool:
    verts, edges = _union(g1, g2)
    weak = _saturate(verts, edges)
    block = _refine(verts, lambda v: weak[v])
    return block[(1, v1)] == block[(2, v2)]


def bounded_bisim(x, y, succ_x, succ_y, key_x, key_y, depth: int) -> tuple[str, ...] | None:
    """Depth-bounded strong bisimulation game; ``None`` when the defender
    survives ``depth`` rounds, otherwise the attacker's labels."""
    memo: dict = {}
    cache_x: dict = {}
    cache_y: dict = {}

    def moves(cache, succ, key, s):
        k = key(s)
        if k not in cache:
            cache[k] = [(lab, key(t), t) for lab, t in succ(s)]
        return k, cache[k]

    def play(a, b, k) -> tuple[str, ...] | None:
        ka, ma = moves(cache_x, succ_x, key_x, a)
        kb, mb = moves(cache_y, succ_y, key_y, b)
        if k == 0:
            return None
        mk = (ka, kb, k)
        if mk in memo:
            return memo[mk]
        res = None
        for side, mine, theirs in (("left", ma, mb), ("right", mb, ma)):
            for lab, kt, t in mine:
                answers = sorted((u for u in theirs if u[0] is lab), key=lambda u: u[1] != kt)
                if not any((play(t, u[2], k - 1) if side == "left" else play(u[2], t, k - 1)) is None
                           for u in answers):
                    res = (f"{side}:{lab}",)
                    break
            if res:
                break
        memo[mk] = res
        return res

    return play(x, y, depth)


# ----------------------------------------------------------- expansion


@dataclass
class ExpansionResult:
    holds: bool
    play: tuple[str, ...] = ()

    def __bool__(self):
        return self.holds


def expansion_check(c: Configuration, m: MixedBehaviour, depth: int,
                    defs: Mapping[str, px.Definition] = px.EMPTY_DEFS, weak_cap: int = 2_000,
                    weak_steps: int = 8) -> ExpansionResult:
    """Bounded expansion game: each configuration step is answered by one
    mixed step (or the identity for tau), each mixed step by a weak
    configuration sequence.

    Weak answers are searched among sequences of at most ``weak_steps``
    silent steps around the visible one, so a negative answer on a process
    with unbounded silent growth is only relative to that bound.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    csucc: dict = {}
    msucc: dict = {}
    weak_cache: dict = {}

    def cs(x):
        if x not in csucc:
            csucc[x] = sorted(px.conf_transitions(x, defs), key=lambda e: (e[0].value, _conf_order(e[1])))
        return csucc[x]

    def ms(x):
        if x not in msucc:
            msucc[x] = sorted(m_transitions(x, canonical=False), key=lambda e: (e[0].value, e[1].key()))
        return msucc[x]

    def tau_closure(x) -> list:
        seen = {x: 0}
        queue = deque([x])
        while queue:
            u = queue.popleft()
            if seen[u] >= weak_steps:
                continue
            for lab, w in cs(u):
                if lab is TAU and w not in seen:
                    if len(seen) >= weak_cap:
                        raise RuntimeError("weak closure exceeds the cap")
                    seen[w] = seen[u] + 1
                    queue.append(w)
        return list(seen)

    def weak(x, lab) -> list:
        k = (x, lab)
        if k not in weak_cache:
            base = tau_closure(x)
            if lab is TAU:
                weak_cache[k] = base
            else:
                out: dict = {}
                for u in base:
                    for l2, w in cs(u):
                        if l2 is TICK:
                            for z in tau_closure(w):
                                out[z] = None
                weak_cache[k] = list(out)
        return weak_cache[k]

    memo: dict = {}

    def game(x, y, k) -> tuple[str, ...] | None:
        if k == 0:
            return None
        mk = (x, y, k)
        if mk in memo:
            return memo[mk]
        memo[mk] = None  # coinductive assumption for revisited pairs
        res = None
        for lab, x2 in cs(x):
            answers = [y2 for l2, y2 in ms(y) if l2 is lab]
            if lab is TAU:
                answers.append(y)
            if not any(game(x2, y2, k - 1) is None for y2 in answers):
                res = (f"process:{lab}",) + _show_conf(x2)
                break
        if res is None:
            for lab, y2 in ms(y):
                if not any(game(x2, y2, k - 1) is None for x2 in weak(x, lab)):
                    res = (f"behaviour:{lab}",)
                    break
        memo[mk] = res
        return res

    play = game(c, m, depth)
    return ExpansionResult(play is None, play or ())


def _show_conf(c: Configuration) -> tuple[str, ...]:
    return (px.show_configuration(c),)


# --------------------------------------------- transitions of behaviours


def m_transitions(m: MixedBehaviour, canonical: bool = True) -> set[tuple[Label, MixedBehaviour]]:
    """Fork splitting, tau, tick, name creation and synchronisation on a
    mixed behaviour; the rest of the multiset is framed."""
    items = list(m.items)
    gamma = m.channels
    out: set[tuple[Label, MixedBehaviour]] = set()

    def emit(lab, chans, new_items):
        mb = MixedBehaviour(chans, new_items)
        if canonical:
            mb = bh.canonicalize_mixed(mb)[0]
        out.add((lab, mb))

    for i, (n, d, sig) in enumerate(items):
        rest = items[:i] + items[i + 1:]
        rows = d.rows()
        for l in rows.get(Obj("pil", (n,)), ()):
            for r in rows.get(Obj("pir", (n,)), ()):
                emit(TAU, gamma, rest + [(n, l, sig), (n, r, sig)])
        for s in rows.get(Obj("tau", (n,)), ()):
            emit(TAU, gamma, rest + [(n, s, sig)])
        for s in rows.get(Obj("tick", (n,)), ()):
            emit(TICK, gamma, rest + [(n, s, sig)])
        nu_row = rows.get(Obj("nu", (n,)), ())
        if nu_row:
            a = px.fresh_channel(gamma)
            for s in nu_row:
                emit(TAU, gamma | {a}, rest + [(n + 1, s, sig + (a,))])
    for i, (n1, d1, s1) in enumerate(items):
        ins = [(lab, v) for lab, v in d1.rows().items() if lab.kind == "iota"]
        if not ins:
            continue
        for j, (n2, d2, s2) in enumerate(items):
            if i == j:
                continue
            outs = [(lab, v) for lab, v in d2.rows().items() if lab.kind == "out"]
            rest = [it for k, it in enumerate(items) if k not in (i, j)]
            for lab1, v1 in ins:
                a1 = lab1.params[1]
                for lab2, v2 in outs:
                    _, a2, b2 = lab2.params
                    if s1[a1 - 1] != s2[a2 - 1]:
                        continue
                    for e1 in v1:
                        for e2 in v2:
                            emit(TAU, gamma, rest + [(n1 + 1, e1, s1 + (s2[b2 - 1],)), (n2, e2, s2)])
    return out


def s_step(pb: PositionedBehaviour, action: Action) -> list[PositionedBehaviour]:
    return bh.residuals_along_action(pb, action)


_ACTIONS: dict = {}


def _actions_from(x) -> list[Action]:
    # positions recur constantly during exploration; actions are never mutated
    acts = _ACTIONS.get(x)
    if acts is None:
        if len(_ACTIONS) > 50_000:
            _ACTIONS.clear()
        acts = _ACTIONS[x] = closed_world_actions_from(x)
    return acts


def s_transitions(pb: PositionedBehaviour) -> list[tuple[Label, PositionedBehaviour]]:
    """Closed-world actions from the behaviour's position with every
    admissible choice of continuing summands."""
    out = []
    for act in _actions_from(pb.position):
        lab = TICK if act.is_tick else TAU
        for nxt in s_step(pb, act):
            out.append((lab, nxt))
    return out


def s_par(x: PositionedBehaviour, y: PositionedBehaviour) -> PositionedBehaviour | None:
    """Glue two positioned behaviours along their (equal) channel sets."""
    cx, cy = x.position.channels(), y.position.channels()
    if cx != cy:
        return None
    iface = discrete(cx)
    ident = {STAR: {c: c for c in cx}}
    po = pushout(Morphism(iface, x.position, ident), Morphism(iface, y.position, ident))
    assign = {po.in_a(a): s for a, s in x.assign.items()}
    assign.update({po.in_b(a): s for a, s in y.assign.items()})
    return PositionedBehaviour(po.presheaf, assign)


# ------------------------------------------------- global behaviour states


def _index_paths(d: State, word: Sequence[Obj]) -> list[tuple[tuple[int, ...], State]]:
    paths = [((), d)]
    for lab in word:
        paths = [(p + (i,), s) for p, st in paths for i, s in enumerate(st.row(lab))]
    return paths


@dataclass
class Occurrence:
    agent: Elem
    origin: Elem
    word: tuple[Obj, ...]
    parent: Elem | None


def view_occurrences(w: Cospan) -> list[Occurrence]:
    """Every agent of the trace with its view and the agent just before it."""
    u = w.middle
    lin = lineage(u)
    inv = {w.t(e): e for e in w.initial.elems()}
    out = []
    for z in sorted(u.agents(), key=lambda e: (e[1], e[0])):
        word, origin = view_walk(u, z)
        parent = lin[z][2] if z in lin else None
        out.append(Occurrence(z, inv[origin], tuple(word), parent))
    return out


def accept_states(pb: PositionedBehaviour, w: Cospan, cap: int = 200_000) -> list[dict[Elem, tuple[int, ...]]]:
    """All families choosing, for each view occurrence, an element of the
    behaviour along that view, compatible with the prefix order."""
    if w.initial != pb.position:
        raise ValueError("trace does not start at the behaviour's position")
    occs = view_occurrences(w)
    options = [[p for p, _ in _index_paths(pb.assign[o.origin], o.word)] for o in occs]
    size = 1
    for opt in options:
        size *= max(len(opt), 1)
    if size > cap:
        raise ValueError(f"{size} candidate families exceed the cap {cap}")
    by_agent = {o.agent: k for k, o in enumerate(occs)}
    out = []
    for combo in itertools.product(*options):
        ok = True
        for k, o in enumerate(occs):
            if o.parent is not None:
                p = combo[by_agent[o.parent]]
                if combo[k][:len(p)] != p:
                    ok = False
                    break
        if ok:
            out.append({o.agent: combo[k] for k, o in enumerate(occs)})
    return out


def psi(w: Cospan, sigma: Mapping[Elem, tuple[int, ...]]) -> dict[Elem, tuple[int, ...]]:
    """Project a global state to the choices at the final agents."""
    return {y: sigma[w.s(y)] for y in w.final.agents()}


def psi_codomain_size(pb: PositionedBehaviour, w: Cospan) -> int:
    occ = {o.agent: o for o in view_occurrences(w)}
    size = 1
    for y in w.final.agents():
        o = occ[w.s(y)]
        size *= len(_index_paths(pb.assign[o.origin], o.word))
    return size


def global_residual(pb: PositionedBehaviour, w: Cospan, choice: Mapping[Elem, tuple[int, ...]]) -> dict[Elem, State]:
    occ = {o.agent: o for o in view_occurrences(w)}
    out = {}
    for y in w.final.agents():
        o = occ[w.s(y)]
        st = pb.assign[o.origin]
        for lab, i in zip(o.word, choice[y]):
            st = st.row(lab)[i]
        out[y] = st
    return out


def c_transition_exists(pb: PositionedBehaviour, w: Cospan, target: PositionedBehaviour, depth: int = 6) -> bool:
    if target.position != w.final:
        raise ValueError("target must live on the trace's final position")
    for sigma in accept_states(pb, w):
        res = global_residual(pb, w, psi(w, sigma))
        if all(bh.behaviour_eq(res[y], target.assign[y], depth) for y in res):
            return True
    return False


def s_path_targets(pb: PositionedBehaviour, actions: Sequence[Action]) -> list[PositionedBehaviour]:
    cur = [pb]
    for act in actions:
        cur = [nxt for p in cur for nxt in s_step(p, act)]
    return cur
