"""Seeds, actions and traces as cospans of presheaves, with the causal-graph
correctness check, sequentialisation and views."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Mapping, Sequence

from .presheaf import (
    STAR, Elem, Morphism, Obj, Presentation, Presheaf, agent, downward_closure, dump_presheaf, fork, generators,
    identity, interface_of, is_position, iso_check, load_presheaf, nu, pushout, representable, subpresheaf, tau,
    tick,
)

# kind -> (basic, full, closed-world)
SEED_KINDS: dict[str, tuple[bool, bool, bool]] = {
    "tau": (True, True, True),
    "tick": (True, True, True),
    "nu": (True, True, True),
    "pil": (True, False, False),
    "pir": (True, False, False),
    "iota": (True, True, False),
    "out": (True, True, False),
    "fork": (False, True, True),
    "sync": (False, True, True),
}


def is_seed_label(o: Obj) -> bool:
    return o.kind in SEED_KINDS


def is_basic(o: Obj) -> bool:
    return SEED_KINDS[o.kind][0]


def is_full(o: Obj) -> bool:
    return SEED_KINDS[o.kind][1]


def is_closed_world(o: Obj) -> bool:
    return SEED_KINDS[o.kind][2]


def branches_of(o: Obj) -> list[tuple[Obj, tuple[str, ...], tuple[str, ...]]]:
    """Per-agent slices of a seed: (basic label, path to the agent after,
    path to the agent before)."""
    if o.kind == "fork":
        n = o.params[0]
        return [(Obj("pil", (n,)), ("l", "s"), ("l", "t")), (Obj("pir", (n,)), ("r", "s"), ("r", "t"))]
    if o.kind == "sync":
        n, a, m, c, d = o.params
        return [(Obj("iota", (n, a)), ("rho", "s"), ("rho", "t")), (Obj("out", (m, c, d)), ("eps", "s"), ("eps", "t"))]
    return [(o, ("s",), ("t",))]


def sources(u: Presheaf, mu: Elem) -> list[Elem]:
    """Agents right after the action ``mu``."""
    return [u.follow(mu, p) for _, p, _ in branches_of(mu[0])]


def targets(u: Presheaf, mu: Elem) -> list[Elem]:
    """Agents right before the action ``mu`` (without repetition)."""
    out: list[Elem] = []
    for _, _, p in branches_of(mu[0]):
        e = u.follow(mu, p)
        if e not in out:
            out.append(e)
    return out


def created(u: Presheaf, mu: Elem) -> Elem | None:
    """The channel created by a name-creation or input core."""
    o = mu[0]
    if o.kind in ("nu", "iota"):
        return u.follow(mu, ("s", f"s{o.params[0] + 1}"))
    return None


def _order(e: Elem):
    return (e[1], e[0])


# ------------------------------------------------------------ cospans


@dataclass
class Action:
    """One action: its seed label, the cospan ``final -> middle <- initial``,
    its core in the middle, the attachment of the seed's interface into the
    passive context, and, for each final agent, its basic label (``None``
    for a bystander) and originating initial agent."""

    label: Obj
    cospan: "Cospan"
    core: Elem
    attach: Morphism | None
    branches: dict[Elem, tuple[Obj | None, Elem]]

    @property
    def is_tick(self) -> bool:
        return self.label.kind == "tick"


@dataclass
class Cospan:
    initial: Presheaf
    middle: Presheaf
    final: Presheaf
    t: Morphism
    s: Morphism
    actions: tuple[Action, ...] | None = field(default=None, repr=False)

    def initial_agents(self) -> list[Elem]:
        return self.initial.agents()

    def final_agents(self) -> list[Elem]:
        return self.final.agents()


def identity_cospan(x: Presheaf) -> Cospan:
    i = identity(x)
    return Cospan(x, x, x, i, i, ())


@lru_cache(maxsize=None)
def _seed_parts(o: Obj) -> tuple[Presentation, Elem, frozenset, frozenset]:
    pres = representable(o)
    u, mu = pres.presheaf, pres.roots["id"]
    xs = frozenset(downward_closure(u, targets(u, mu)))
    ys = frozenset(downward_closure(u, sources(u, mu)))
    return pres, mu, xs, ys


def seed_cospan(label: Obj) -> Cospan:
    """The representable cospan of a seed."""
    if not is_seed_label(label):
        raise ValueError(f"{label.tag} is not a seed")
    pres, mu, xs, ys = _seed_parts(label)
    m = pres.presheaf
    x, tx = subpresheaf(m, xs)
    y, sy = subpresheaf(m, ys)
    c = Cospan(x, m, y, tx, sy)
    branches = {m.follow(mu, sp): (b, m.follow(mu, tp)) for b, sp, tp in branches_of(label)}
    iface, _ = interface_of(x)
    act = Action(label, c, mu, identity(iface), branches)
    c.actions = (act,)
    return c


def seed_interface(label: Obj) -> Presheaf:
    return interface_of(seed_cospan(label).initial)[0]


def instantiate_action(label: Obj, attach: Morphism) -> Action:
    """Push the seed cone out along ``attach``: interface -> passive position."""
    seed = seed_cospan(label)
    iface, i_x = interface_of(seed.initial)
    if attach.dom != iface:
        raise ValueError("attachment is not defined on the seed's interface")
    if not is_position(attach.cod):
        raise ValueError("attachment target is not a position")
    i_m = i_x.then(seed.t)
    i_y = Morphism(iface, seed.final, {STAR: {c: c for c in iface.channels()}})
    px = pushout(i_x, attach)
    pm = pushout(i_m, attach)
    py = pushout(i_y, attach)
    t = px.mediating(seed.t.then(pm.in_a), pm.in_b)
    s = py.mediating(seed.s.then(pm.in_a), pm.in_b)
    c = Cospan(px.presheaf, pm.presheaf, py.presheaf, t, s)
    mu = seed.actions[0].core
    branches: dict[Elem, tuple[Obj | None, Elem]] = {}
    for y0, (b, x0) in seed.actions[0].branches.items():
        branches[py.in_a(y0)] = (b, px.in_a(x0))
    for z in attach.cod.agents():
        branches[py.in_b(z)] = (None, px.in_b(z))
    act = Action(label, c, pm.in_a(mu), attach, branches)
    c.actions = (act,)
    return act


def action_from(x: Presheaf, label: Obj, actors: Sequence[Elem]) -> Action:
    """The action of shape ``label`` played by ``actors`` in position ``x``,
    with every other agent passive; its initial position is ``x`` itself.

    For a synchronisation the actors are (receiver, sender).
    """
    seed = seed_cospan(label)
    x0 = seed.initial
    mu = seed.actions[0].core
    seed_targets = targets(seed.middle, mu)
    if len(seed_targets) != len(actors) or len(set(actors)) != len(actors):
        raise ValueError(f"{label.tag} needs {len(seed_targets)} distinct actors")
    phi: dict = {o: {} for o in x0.elements}
    for st, a in zip(seed_targets, actors):
        if st[0] != a[0] or a not in x:
            raise ValueError(f"actor {a} does not fit {label.tag}")
        phi[st[0]][st[1]] = a[1]
        for k, c in enumerate(x0.agent_channels(st), 1):
            target = x.action[(a[0], a[1], f"s{k}")]
            if phi[STAR].setdefault(c, target) != target:
                raise ValueError(f"actors' channels do not match the shape {label.tag}")
    f = Morphism(x0, x, phi)
    po = pushout(f, seed.t)
    m = po.presheaf
    passive = [e for e in x.elems() if e not in actors]
    ys = {po.in_a(e) for e in passive} | {po.in_b(e) for e in seed.final.elems()}
    y, sy = subpresheaf(m, ys)
    c = Cospan(x, m, y, po.in_a, sy)
    branches: dict[Elem, tuple[Obj | None, Elem]] = {}
    for y0, (b, t0) in seed.actions[0].branches.items():
        branches[po.in_b(y0)] = (b, f(t0))
    for e in passive:
        if e[0].kind == "agent":
            branches[po.in_a(e)] = (None, e)
    z, _ = subpresheaf(x, passive)
    iface, _ = interface_of(x0)
    attach = Morphism(iface, z, {STAR: dict(phi.get(STAR, {}))})
    act = Action(label, c, po.in_b(mu), attach, branches)
    c.actions = (act,)
    return act


def closed_world_actions_from(x: Presheaf) -> list[Action]:
    """One closed-world action per agent and shape, and one synchronisation
    per (receiver, channel a, sender, channels c, d) with matching channels."""
    if not is_position(x):
        raise ValueError("not a position")
    out: list[Action] = []
    agents = sorted(x.agents(), key=_order)
    for a in agents:
        n = a[0].params[0]
        for lab in (tau(n), tick(n), fork(n), nu(n)):
            out.append(action_from(x, lab, (a,)))
    for recv in agents:
        n = recv[0].params[0]
        rch = x.agent_channels(recv)
        for snd in agents:
            if snd == recv:
                continue
            m = snd[0].params[0]
            sch = x.agent_channels(snd)
            for a in range(1, n + 1):
                for c in range(1, m + 1):
                    if rch[a - 1] != sch[c - 1]:
                        continue
                    for d in range(1, m + 1):
                        out.append(action_from(x, Obj("sync", (n, a, m, c, d)), (recv, snd)))
    return out


def compose_traces(u: Cospan, v: Cospan, ident: Morphism | None = None) -> Cospan:
    """``v`` after ``u``: glue ``u``'s final position to ``v``'s initial one."""
    if ident is None:
        if u.final == v.initial:
            ident = identity(u.final)
        else:
            ident = iso_check(u.final, v.initial)
            if ident is None:
                raise ValueError("final position of the first trace does not match the second's initial position")
    elif ident.dom != u.final or ident.cod != v.initial:
        raise ValueError("identification does not connect the two positions")
    po = pushout(u.s, ident.then(v.t))
    actions = None
    if u.actions is not None and v.actions is not None:
        actions = u.actions + v.actions
    return Cospan(u.initial, po.presheaf, v.final, u.t.then(po.in_a), v.s.then(po.in_b), actions)


def compose_all(cospans: Iterable[Cospan]) -> Cospan:
    it = iter(cospans)
    acc = next(it)
    for c in it:
        acc = compose_traces(acc, c)
    return acc


def special_iso(c1: Cospan, c2: Cospan) -> Morphism | None:
    """An isomorphism of middles commuting with both legs, where the two
    cospans share their boundary positions."""
    if c1.initial != c2.initial or c1.final != c2.final:
        f = iso_check(c1.initial, c2.initial)
        g = iso_check(c1.final, c2.final)
        if f is None or g is None:
            return None
        fixed = {c1.t(e): c2.t(f(e)) for e in c1.initial.elems()}
        fixed.update({c1.s(e): c2.s(g(e)) for e in c1.final.elems()})
    else:
        fixed = {c1.t(e): c2.t(e) for e in c1.initial.elems()}
        fixed.update({c1.s(e): c2.s(e) for e in c1.final.elems()})
    return iso_check(c1.middle, c2.middle, fixed=fixed)


# --------------------------------------------------- cores and causality


def cores_of(u: Presheaf) -> list[Elem]:
    covered = set()
    for e in u.elems((3, 4)):
        for g, _ in generators(e[0]):
            covered.add(u.act(e, g))
    return sorted((e for e in u.elems((2, 3, 4)) if e not in covered), key=_order)


@dataclass(frozen=True)
class Core:
    element: Elem
    sources: tuple[Elem, ...]
    targets: tuple[Elem, ...]
    created: Elem | None

    @property
    def label(self) -> Obj:
        return self.element[0]


def core_info(u: Presheaf) -> list[Core]:
    return [Core(mu, tuple(sources(u, mu)), tuple(targets(u, mu)), created(u, mu)) for mu in cores_of(u)]


@dataclass
class CausalGraph:
    """Vertices coloured 0 (channel), 1 (agent) or 2 (core); edges point from
    later to earlier elements."""

    colour: dict[Elem, int]
    edges: set[tuple[Elem, Elem]]

    def successors(self, v: Elem) -> list[Elem]:
        return sorted((w for (a, w) in self.edges if a == v), key=_order)

    def adjacency(self) -> dict[Elem, list[Elem]]:
        adj: dict[Elem, list[Elem]] = {v: [] for v in self.colour}
        for a, b in sorted(self.edges, key=lambda e: (_order(e[0]), _order(e[1]))):
            adj[a].append(b)
        return adj

    def cores(self) -> list[Elem]:
        return sorted((v for v, c in self.colour.items() if c == 2), key=_order)

    def find_cycle(self) -> list[Elem] | None:
        adj = self.adjacency()
        state: dict[Elem, int] = {}
        for root in sorted(adj, key=_order):
            if root in state:
                continue
            stack = [(root, iter(adj[root]))]
            path = [root]
            state[root] = 1
            while stack:
                v, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    state[v] = 2
                    stack.pop()
                    path.pop()
                elif state.get(nxt) == 1:
                    return path[path.index(nxt):] + [nxt]
                elif nxt not in state:
                    state[nxt] = 1
                    stack.append((nxt, iter(adj[nxt])))
                    path.append(nxt)
        return None

    def reachable(self, v: Elem) -> set[Elem]:
        adj = self.adjacency()
        seen = {v}
        stack = [v]
        while stack:
            for w in adj[stack.pop()]:
                if w not in seen:
                    seen.add(w)
                    stack.append(w)
        return seen


def causal_graph(u: Presheaf) -> CausalGraph:
    colour: dict[Elem, int] = {}
    edges: set[tuple[Elem, Elem]] = set()
    for e in u.elems((0,)):
        colour[e] = 0
    for x in u.agents():
        colour[x] = 1
        for c in u.agent_channels(x):
            edges.add((x, (STAR, c)))
    for core in core_info(u):
        colour[core.element] = 2
        for src in core.sources:
            edges.add((src, core.element))
        if core.created is not None:
            edges.add((core.created, core.element))
        for tgt in core.targets:
            edges.add((core.element, tgt))
    return CausalGraph(colour, edges)


def initial_elements(u: Presheaf) -> set[Elem]:
    after = {u.act(e, "s") for e in u.elems((2,))}
    made = {c for c in (created(u, mu) for mu in cores_of(u)) if c is not None}
    return {x for x in u.agents() if x not in after} | {e for e in u.elems((0,)) if e not in made}


def final_elements(u: Presheaf) -> set[Elem]:
    before = {u.act(e, "t") for e in u.elems((2,))}
    return {x for x in u.agents() if x not in before} | set(u.elems((0,)))


# ----------------------------------------------------- correctness check


@dataclass(frozen=True)
class TraceOk:
    length: int

    def __bool__(self):
        return True

    def __str__(self):
        return f"Ok length={self.length}"


@dataclass(frozen=True)
class Violation:
    """``kind`` is one of natural, monic, i, ii, iii, linearity, acyclicity."""

    kind: str
    witness: object

    def __bool__(self):
        return False

    def __str__(self):
        return f"Violation condition={self.kind} witness={_fmt(self.witness)}"


def _fmt(w) -> str:
    if isinstance(w, tuple) and len(w) == 2 and isinstance(w[0], Obj):
        return f"{w[0].tag}#{w[1]}"
    if isinstance(w, (list, tuple)):
        return "[" + ", ".join(_fmt(x) for x in w) + "]"
    return str(w)


def locally_one_injective(u: Presheaf) -> Elem | None:
    """A core whose neighbourhood is folded illegitimately, or ``None``."""
    for mu in cores_of(u):
        pres, root, xs, _ = _seed_parts(mu[0])
        iface = {e for e in xs if e[0] == STAR}
        image: dict[Elem, Elem] = {}
        for e, (_, path) in pres.paths.items():
            tgt = u.follow(mu, path)
            if tgt in image and image[tgt] != e:
                other = image[tgt]
                if e[0].dim > 0 or e not in iface or other not in iface:
                    return mu
            image.setdefault(tgt, e)
    return None


def check_trace(c: Cospan) -> TraceOk | Violation:
    u = c.middle
    for leg in (c.t, c.s):
        if not leg.is_natural():
            return Violation("natural", leg)
    for leg in (c.t, c.s):
        if not leg.is_monic():
            bad = next(o for o in leg.dom.elements if not leg.injective_at(o))
            return Violation("monic", bad.tag)
    mu = locally_one_injective(u)
    if mu is not None:
        return Violation("i", mu)
    if not is_position(c.initial):
        return Violation("ii", "initial side is not a position")
    ini = initial_elements(u)
    img = c.t.image()
    if img != ini:
        return Violation("ii", sorted(img ^ ini, key=_order)[0])
    if not is_position(c.final):
        return Violation("iii", "final side is not a position")
    fin = final_elements(u)
    img = c.s.image()
    if img != fin:
        return Violation("iii", sorted(img ^ fin, key=_order)[0])
    g = causal_graph(u)
    into: dict[Elem, set[Elem]] = {}
    outof: dict[Elem, set[Elem]] = {}
    for a, b in g.edges:
        if g.colour[b] == 2:
            outof.setdefault(a, set()).add(b)
        if g.colour[a] == 2:
            into.setdefault(b, set()).add(a)
    for v in sorted(outof, key=_order):
        if len(outof[v]) > 1:
            return Violation("linearity", v)
    for v in sorted(into, key=_order):
        if g.colour[v] == 1 and len(into[v]) > 1:
            return Violation("linearity", v)
    cyc = g.find_cycle()
    if cyc is not None:
        return Violation("acyclicity", cyc)
    return TraceOk(len(g.cores()))


# ------------------------------------------------------ sequentialisation


def least_core(cores: Sequence[Elem]) -> Elem:
    return min(cores, key=_order)


def sequentialize(c: Cospan, choose: Callable[[Sequence[Elem]], Elem] = least_core) -> list[Action]:
    """Split a trace into actions, earliest first, by repeatedly peeling
    off a core with no causal dependency on the remaining ones.

    All returned actions are built from subpresheaves of ``c.middle`` and
    keep its element ids.
    """
    verdict = check_trace(c)
    if not verdict:
        raise ValueError(str(verdict))
    u = c.middle
    cur = set(u.elems())
    before = set(c.t.image())
    out: list[Action] = []
    while True:
        sub, _ = subpresheaf(u, cur)
        g = causal_graph(sub)
        cores = g.cores()
        if not cores:
            break
        core_set = set(cores)
        maximal = [m for m in cores if not (g.reachable(m) - {m}) & core_set]
        mu = choose(maximal)
        pres, root, xs, ys = _seed_parts(mu[0])
        img = {e: u.follow(mu, path) for e, (_, path) in pres.paths.items()}
        image = set(img.values())
        after = {img[e] for e in ys}
        past = image - after
        tg = targets(u, mu)
        if not set(tg) <= before:
            raise ValueError("selected core is not enabled")
        mid = before | image
        nxt = (before - set(tg)) | after
        xk, _ = subpresheaf(u, before)
        mk, _ = subpresheaf(u, mid)
        yk, _ = subpresheaf(u, nxt)
        incl = lambda a, b: Morphism(a, b, {o: {i: i for i in ids} for o, ids in a.elements.items()})
        ck = Cospan(xk, mk, yk, incl(xk, mk), incl(yk, mk))
        branches: dict[Elem, tuple[Obj | None, Elem]] = {}
        for b, sp, tp in branches_of(mu[0]):
            branches[u.follow(mu, sp)] = (b, u.follow(mu, tp))
        for x in xk.agents():
            if x not in tg:
                branches[x] = (None, x)
        z, _ = subpresheaf(u, before - set(tg))
        iface = {e for e in xs if e[0] == STAR}
        attach = Morphism(interface_of(subpresheaf(pres.presheaf, xs)[0])[0], z,
                          {STAR: {e[1]: img[e][1] for e in iface}})
        act = Action(mu[0], ck, mu, attach, branches)
        ck.actions = (act,)
        out.append(act)
        cur -= past
        before = nxt
    if before != c.s.image():
        raise ValueError("sequentialisation did not reach the final position")
    return out


def recompose(actions: Sequence[Action], start: Presheaf | None = None) -> Cospan:
    if not actions:
        if start is None:
            raise ValueError("empty decomposition needs a starting position")
        return identity_cospan(start)
    return compose_all(a.cospan for a in actions)


# ------------------------------------------------------------------ views


def view_of(c: Cospan, y: Elem, actions: Sequence[Action] | None = None) -> tuple[list[Obj], Elem]:
    """The word of basic labels seen by final agent ``y`` (earliest first)
    and the initial agent it descends from."""
    if y not in c.final or y[0].kind != "agent":
        raise ValueError(f"{y} is not a final agent")
    if actions is None:
        actions = sequentialize(c)
    cur = c.s(y)
    word: list[Obj] = []
    for act in reversed(actions):
        b, origin = act.branches.get(cur, (None, cur))
        if b is not None:
            word.insert(0, b)
        cur = origin
    inv = {v: k for k, v in ((e, c.t(e)) for e in c.initial.elems())}
    return word, inv[cur]


def lineage(u: Presheaf) -> dict[Elem, tuple[Elem, Obj, Elem]]:
    """For every agent right after some action: (core, basic label, agent before)."""
    out = {}
    for mu in cores_of(u):
        for b, sp, tp in branches_of(mu[0]):
            out[u.follow(mu, sp)] = (mu, b, u.follow(mu, tp))
    return out


def view_walk(u: Presheaf, z: Elem) -> tuple[list[Obj], Elem]:
    """View of any agent of ``u`` by walking the causal graph backwards."""
    lin = lineage(u)
    word: list[Obj] = []
    seen = set()
    while z in lin:
        if z in seen:
            raise ValueError("cyclic lineage")
        seen.add(z)
        _, b, z = lin[z]
        word.insert(0, b)
    return word, z


# ------------------------------------------------------------ file format


def dump_cospan(c: Cospan) -> str:
    parts = ["SECTION U", dump_presheaf(c.middle).rstrip("\n"),
             "SECTION X", dump_presheaf(c.initial).rstrip("\n"),
             "SECTION Y", dump_presheaf(c.final).rstrip("\n")]
    for name, leg in (("T", c.t), ("S", c.s)):
        for o, ids in leg.dom.elements.items():
            for i in ids:
                parts.append(f"LEG {name}: {o.tag} {i}->{leg.maps[o][i]}")
    return "\n".join(parts) + "\n"


def load_cospan(text: str) -> Cospan:
    from .presheaf import FormatError

    sections: dict[str, list[str]] = {"U": [], "X": [], "Y": []}
    legs: dict[str, dict] = {"T": {}, "S": {}}
    cur = None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("SECTION"):
            cur = line.split()[1]
            if cur not in sections:
                raise FormatError(f"line {n}: unknown section {cur!r}")
        elif line.startswith("LEG"):
            try:
                head, rest = line.split(":", 1)
                which = head.split()[1]
                tag, arrow = rest.split()
                a, b = arrow.split("->")
                legs[which].setdefault(Obj.from_tag(tag), {})[int(a)] = int(b)
            except (ValueError, KeyError, IndexError):
                raise FormatError(f"line {n}: malformed leg") from None
        elif cur is None:
            raise FormatError(f"line {n}: record outside a section")
        else:
            sections[cur].append(line)
    u, x, y = (load_presheaf(sections[k]) for k in "UXY")
    t = Morphism(x, u, legs["T"])
    s = Morphism(y, u, legs["S"])
    for leg, name in ((t, "T"), (s, "S")):
        if not leg.is_total():
            raise FormatError(f"leg {name} is not total")
        for o, m in leg.maps.items():
            if any(j not in u.ids(o) for j in m.values()):
                raise FormatError(f"leg {name} points outside the middle")
    return Cospan(x, u, y, t, s)
