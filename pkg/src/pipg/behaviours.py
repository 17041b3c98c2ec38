"""Definite behaviours as rational systems of guarded tables.

A behaviour state of arity ``n`` maps basic labels of arity ``n`` to formal
sums (tuples) of states of the label's target arity.  States come in three
flavours sharing one interface: translated process terms (unfolded lazily),
named states of an explicit :class:`BehaviourSystem`, and ad hoc tables.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from . import pi_syntax as px
from .pi_syntax import Configuration, Const, Definition, Definitions, Par, Sum, Term
from .presheaf import Elem, Obj, Presheaf, position
from .traces import Action

BASIC_KINDS = ("pil", "pir", "tau", "tick", "nu", "iota", "out")


def source_arity(label: Obj) -> int:
    return label.params[0]


def target_arity(label: Obj) -> int:
    return label.params[0] + 1 if label.kind in ("nu", "iota") else label.params[0]


def check_label(label: Obj) -> None:
    if label.kind not in BASIC_KINDS:
        raise ValueError(f"{label.tag} is not a basic label")


class ActionRefused(Exception):
    """Some agent's behaviour has no summand for the required label."""


# ------------------------------------------------------------------ states


class State:
    """Common interface of behaviour states."""

    arity: int

    def rows(self) -> dict[Obj, tuple["State", ...]]:
        raise NotImplementedError

    def sort_key(self) -> str:
        raise NotImplementedError

    def row(self, label: Obj) -> tuple["State", ...]:
        return self.rows().get(label, ())

    def __repr__(self):
        return f"<{type(self).__name__} {self.sort_key()}>"


class TermState(State):
    """The translation of a process whose free channels are ``1..arity``."""

    __slots__ = ("arity", "term", "_tr", "_rows")

    def __init__(self, arity: int, term: Term, tr: "Translator"):
        self.arity = arity
        self.term = term
        self._tr = tr
        self._rows = None

    def sort_key(self) -> str:
        return f"T{self._tr.uid}/{self.arity}/{px.term_key(self.term)}"

    def rows(self) -> dict[Obj, tuple[State, ...]]:
        if self._rows is None:
            self._rows = self._tr.rows_of(self)
        return self._rows


class Translator:
    """Interns translated states for one definition environment."""

    _count = itertools.count()

    def __init__(self, defs: Mapping[str, Definition]):
        self.defs = defs
        self.uid = next(Translator._count)
        self._cache: dict[tuple[int, Term], TermState] = {}

    def state(self, n: int, t: Term) -> TermState:
        t = px.unfold(t, self.defs)
        key = (n, t)
        st = self._cache.get(key)
        if st is None:
            st = self._cache[key] = TermState(n, t, self)
        return st

    def rows_of(self, s: TermState) -> dict[Obj, tuple[State, ...]]:
        n, t = s.arity, s.term
        rows: dict[Obj, list[State]] = {}
        if isinstance(t, Par):
            return {Obj("pil", (n,)): (self.state(n, t.left),), Obj("pir", (n,)): (self.state(n, t.right),)}
        for g, k in t.branches:
            if isinstance(g, px.Tau):
                rows.setdefault(Obj("tau", (n,)), []).append(self.state(n, k))
            elif isinstance(g, px.Tick):
                rows.setdefault(Obj("tick", (n,)), []).append(self.state(n, k))
            elif isinstance(g, px.New):
                rows.setdefault(Obj("nu", (n,)), []).append(self.state(n + 1, px.open_binder(k, n + 1)))
            elif isinstance(g, px.In):
                rows.setdefault(Obj("iota", (n, g.chan)), []).append(self.state(n + 1, px.open_binder(k, n + 1)))
            else:
                rows.setdefault(Obj("out", (n, g.chan, g.payload)), []).append(self.state(n, k))
        return {lab: tuple(v) for lab, v in rows.items()}


_translators: dict[int, Translator] = {}


def translator(defs: Mapping[str, Definition] = px.EMPTY_DEFS) -> Translator:
    tr = _translators.get(id(defs))
    if tr is None or tr.defs is not defs:
        tr = _translators[id(defs)] = Translator(defs)
    return tr


def translate_process(p: Term, h: Mapping[int, int], defs: Mapping[str, Definition] = px.EMPTY_DEFS) -> TermState:
    """Translate ``p`` along the bijection ``h`` from its channels onto ``1..n``."""
    n = len(h)
    if sorted(h.values()) != list(range(1, n + 1)):
        raise ValueError("h must be a bijection onto 1..n")
    missing = set(px.free_channels(p)) - set(h)
    if missing:
        raise px.UnboundName(f"channels {sorted(missing)} outside the domain of h")
    return translator(defs).state(n, px.substitute(p, h))


def order_map(channels: Iterable[int]) -> dict[int, int]:
    """Each channel to its 1-based position in increasing order."""
    return {c: i for i, c in enumerate(sorted(channels), 1)}


class SystemState(State):
    __slots__ = ("arity", "system", "name")

    def __init__(self, system: "BehaviourSystem", name: str, arity: int):
        self.system = system
        self.name = name
        self.arity = arity

    def sort_key(self) -> str:
        return f"S{self.system.uid}/{self.name}"

    def rows(self) -> dict[Obj, tuple[State, ...]]:
        return self.system.rows_of(self.name)


class TableState(State):
    """An explicitly given table; equality is identity."""

    _count = itertools.count()
    __slots__ = ("arity", "_rows", "_uid")

    def __init__(self, arity: int, rows: Mapping[Obj, Sequence[State]]):
        self.arity = arity
        self._rows = {lab: tuple(v) for lab, v in rows.items() if v}
        for lab, v in self._rows.items():
            if source_arity(lab) != arity or any(s.arity != target_arity(lab) for s in v):
                raise ValueError(f"arity mismatch in row {lab.tag}")
        self._uid = next(TableState._count)

    def sort_key(self) -> str:
        return f"D{self._uid}"

    def rows(self) -> dict[Obj, tuple[State, ...]]:
        return self._rows


def empty(n: int) -> TableState:
    return TableState(n, {})


def definite_sum(*states: State) -> TableState:
    """Row-wise concatenation of the formal sums of the given states."""
    if not states:
        raise ValueError("need at least one state")
    n = states[0].arity
    rows: dict[Obj, list[State]] = {}
    for s in states:
        if s.arity != n:
            raise ValueError("definite sum of states of different arities")
        for lab, v in s.rows().items():
            rows.setdefault(lab, []).extend(v)
    return TableState(n, rows)


def card(formal_sum: Sequence[State]) -> int:
    return len(formal_sum)


def residual_basic(d: State, label: Obj) -> tuple[State, ...]:
    check_label(label)
    if source_arity(label) != d.arity:
        raise ValueError(f"label {label.tag} does not fit arity {d.arity}")
    return d.row(label)


def restrict(formal_sum: Sequence[State], k: int) -> State:
    if not 0 <= k < len(formal_sum):
        raise IndexError(f"summand {k} out of range for a sum of {len(formal_sum)}")
    return formal_sum[k]


# ------------------------------------------------------------ systems


class BehaviourSystem:
    """A finite system of named states with explicit tables."""

    _count = itertools.count()

    def __init__(self):
        self.uid = next(BehaviourSystem._count)
        self._arity: dict[str, int] = {}
        self._table: dict[str, dict[Obj, list[str]]] = {}
        self._states: dict[str, SystemState] = {}
        self._resolved: dict[str, dict[Obj, tuple[State, ...]]] = {}

    def add(self, name: str, arity: int, rows: Mapping[Obj, Sequence[str]] | None = None) -> SystemState:
        if name in self._arity:
            raise ValueError(f"state {name!r} defined twice")
        self._arity[name] = arity
        self._table[name] = {lab: list(v) for lab, v in (rows or {}).items()}
        return self.state(name)

    def set_row(self, name: str, label: Obj, targets: Sequence[str]) -> None:
        self._table[name][label] = list(targets)
        self._resolved.pop(name, None)

    def names(self) -> list[str]:
        return list(self._arity)

    def state(self, name: str) -> SystemState:
        if name not in self._arity:
            raise KeyError(f"unknown state {name!r}")
        st = self._states.get(name)
        if st is None:
            st = self._states[name] = SystemState(self, name, self._arity[name])
        return st

    def rows_of(self, name: str) -> dict[Obj, tuple[State, ...]]:
        r = self._resolved.get(name)
        if r is None:
            r = {lab: tuple(self.state(t) for t in v) for lab, v in self._table[name].items() if v}
            self._resolved[name] = r
        return r

    def __len__(self):
        return len(self._arity)

    def validate(self) -> list[str]:
        errs = []
        for name, rows in self._table.items():
            n = self._arity[name]
            for lab, v in rows.items():
                if lab.kind not in BASIC_KINDS:
                    errs.append(f"{name}: {lab.tag} is not a basic label")
                    continue
                if source_arity(lab) != n:
                    errs.append(f"{name}: label {lab.tag} does not fit arity {n}")
                for t in v:
                    if t not in self._arity:
                        errs.append(f"{name}: unknown state {t!r}")
                    elif self._arity[t] != target_arity(lab):
                        errs.append(f"{name}: {t!r} has arity {self._arity[t]}, row {lab.tag} needs {target_arity(lab)}")
        return errs

    def dump(self) -> str:
        lines = []
        for name in self._arity:
            lines.append(f"STATE {name} {self._arity[name]}")
            for lab, v in self._table[name].items():
                lines.append(f"ROW {lab.tag} -> {','.join(v)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def load(cls, text: str) -> "BehaviourSystem":
        sys_ = cls()
        cur = None
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                if parts[0] == "STATE":
                    cur = parts[1]
                    sys_.add(cur, int(parts[2]))
                elif parts[0] == "ROW":
                    if cur is None or parts[2] != "->":
                        raise ValueError("ROW outside a STATE")
                    targets = parts[3].split(",") if len(parts) > 3 else []
                    sys_._table[cur][Obj.from_tag(parts[1])] = targets
                else:
                    raise ValueError(f"unknown record {parts[0]!r}")
            except (ValueError, IndexError) as exc:
                raise ValueError(f"line {n}: {exc}") from None
        errs = sys_.validate()
        if errs:
            raise ValueError(errs[0])
        return sys_


def reachable_states(roots: Iterable[State], cap: int | None = None) -> tuple[list[State], bool]:
    """States reachable from ``roots`` in BFS order, and whether the search completed."""
    seen: dict[int, State] = {}
    order: list[State] = []
    queue = list(roots)
    for s in queue:
        if id(s) not in seen:
            seen[id(s)] = s
            order.append(s)
    i = 0
    while i < len(order):
        if cap is not None and len(order) > cap:
            return order, False
        for v in order[i].rows().values():
            for t in v:
                if id(t) not in seen:
                    seen[id(t)] = t
                    order.append(t)
        i += 1
    return order, True


def export_system(root: State, max_states: int = 10_000) -> tuple[BehaviourSystem, str]:
    """Materialise the states reachable from ``root`` as a named system."""
    states, complete = reachable_states([root], cap=max_states)
    if not complete:
        raise ValueError(f"more than {max_states} reachable states")
    names = {id(s): f"s{i}" for i, s in enumerate(states)}
    out = BehaviourSystem()
    for s in states:
        out.add(names[id(s)], s.arity, {lab: [names[id(t)] for t in v] for lab, v in s.rows().items()})
    return out, names[id(root)]


# -------------------------------------------------------------- equality


def _refine(states: list[State]) -> dict[int, int]:
    """Coarsest partition respecting arities and summand multisets per label."""
    block = {id(s): s.arity for s in states}
    while True:
        sigs: dict[int, tuple] = {}
        for s in states:
            sig = tuple(sorted((lab.tag, tuple(sorted(block[id(t)] for t in v))) for lab, v in s.rows().items()))
            sigs[id(s)] = (block[id(s)], sig)
        ids = {sig: i for i, sig in enumerate(sorted(set(sigs.values()), key=repr))}
        new = {k: ids[v] for k, v in sigs.items()}
        if len(set(new.values())) == len(set(block.values())):
            return new
        block = new


def behaviour_eq(s1: State, s2: State, depth: int) -> bool:
    """Depth-bounded bisimilarity with summands matched up to bijection.

    When both sides reach at most ``depth`` states the answer is exact.
    """
    if depth < 0:
        raise ValueError("depth must be non-negative")
    states, complete = reachable_states([s1, s2], cap=max(depth, 1) * 2)
    if complete and len(states) <= 2 * max(depth, 1):
        part = _refine(states)
        r1, _ = reachable_states([s1], cap=depth)
        r2, _ = reachable_states([s2], cap=depth)
        if len(r1) <= depth and len(r2) <= depth:
            return part[id(s1)] == part[id(s2)]
    memo: dict[tuple[int, int, int], bool] = {}

    def eq(a: State, b: State, k: int) -> bool:
        if a is b:
            return True
        if a.arity != b.arity:
            return False
        if k == 0:
            return True
        key = (id(a), id(b), k)
        if key in memo:
            return memo[key]
        ra, rb = a.rows(), b.rows()
        ok = set(ra) == set(rb)
        if ok:
            for lab, va in ra.items():
                vb = list(rb[lab])
                if len(va) != len(vb):
                    ok = False
                    break
                for x in va:
                    hit = next((j for j, y in enumerate(vb) if eq(x, y, k - 1)), None)
                    if hit is None:
                        ok = False
                        break
                    vb.pop(hit)
                if not ok:
                    break
        memo[key] = ok
        return ok

    return eq(s1, s2, depth)


def behaviour_bisimilar(s1: State, s2: State, max_states: int = 10_000) -> bool:
    """Exact graded bisimilarity of two finitely reachable states."""
    states, complete = reachable_states([s1, s2], cap=max_states)
    if not complete:
        raise ValueError("reachable system too large")
    part = _refine(states)
    return part[id(s1)] == part[id(s2)]


# ---------------------------------------------------- positioned behaviours


@dataclass
class PositionedBehaviour:
    position: Presheaf
    assign: dict[Elem, State]

    def __post_init__(self):
        agents = set(self.position.agents())
        if set(self.assign) != agents:
            raise ValueError("assignment must cover exactly the agents of the position")
        for x, s in self.assign.items():
            if s.arity != x[0].params[0]:
                raise ValueError(f"agent {x} has arity {x[0].params[0]}, its state {s.arity}")


def branch_cards(pb: PositionedBehaviour, action: Action) -> dict[Elem, int | None]:
    """For each final agent, the number of summands it may continue with
    (``None`` for bystanders)."""
    out = {}
    for y, (b, origin) in action.branches.items():
        out[y] = None if b is None else len(pb.assign[origin].row(b))
    return out


def residual_along_action(pb: PositionedBehaviour, action: Action, choices: Mapping[Elem, int]) -> PositionedBehaviour:
    """Behaviour on the action's final position, each acting agent's new
    state being the chosen summand of its residual."""
    if action.cospan.initial != pb.position:
        raise ValueError("action does not start from the behaviour's position")
    assign: dict[Elem, State] = {}
    for y, (b, origin) in action.branches.items():
        d = pb.assign[origin]
        if b is None:
            assign[y] = d
            continue
        row = d.row(b)
        if not row:
            raise ActionRefused(f"agent {origin} has no {b.tag} summand")
        assign[y] = restrict(row, choices[y])
    return PositionedBehaviour(action.cospan.final, assign)


def residuals_along_action(pb: PositionedBehaviour, action: Action) -> list[PositionedBehaviour]:
    """All branch-choice families; empty when the action is refused."""
    cards = branch_cards(pb, action)
    acting = sorted((y for y, k in cards.items() if k is not None), key=lambda e: (e[1], e[0]))
    ranges = [range(cards[y]) for y in acting]
    out = []
    for combo in itertools.product(*ranges):
        out.append(residual_along_action(pb, action, dict(zip(acting, combo))))
    return out


# ------------------------------------------------------- mixed behaviours

Item = tuple[int, State, tuple[int, ...]]


def _item_key(it: Item) -> str:
    return f"{it[0]}|{it[1].sort_key()}|{','.join(map(str, it[2]))}"


@dataclass(frozen=True)
class MixedBehaviour:
    channels: frozenset[int]
    items: tuple[Item, ...]

    def __init__(self, channels: Iterable[int], items: Iterable[Item]):
        items = tuple(sorted(((n, s, tuple(sig)) for n, s, sig in items), key=_item_key))
        chans = frozenset(channels)
        for n, s, sig in items:
            if s.arity != n or len(sig) != n:
                raise ValueError("arity mismatch in mixed behaviour")
            if not set(sig) <= chans:
                raise ValueError("substitution leaves the channel set")
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "items", items)

    def key(self) -> tuple:
        return (tuple(sorted(self.channels)), tuple(_item_key(it) for it in self.items))

    def __eq__(self, other):
        return isinstance(other, MixedBehaviour) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def par(self, other: "MixedBehaviour") -> "MixedBehaviour | None":
        if self.channels != other.channels:
            return None
        return MixedBehaviour(self.channels, self.items + other.items)


def canonicalize_mixed(m: MixedBehaviour) -> tuple[MixedBehaviour, dict[int, int]]:
    items, order = px.canonical_multiset(
        m.items, m.channels,
        used=lambda it: list(dict.fromkeys(it[2])),
        rename=lambda it, r: (it[0], it[1], tuple(r.get(c, c) for c in it[2])),
        key=_item_key,
    )
    return MixedBehaviour(range(len(m.channels)), items), order


def m_map(pb: PositionedBehaviour) -> MixedBehaviour:
    x = pb.position
    return MixedBehaviour(x.channels(), [(a[0].params[0], pb.assign[a], x.agent_channels(a)) for a in x.agents()])


def a_section(m: MixedBehaviour) -> PositionedBehaviour:
    """One agent per item, wired to the channels its substitution names."""
    x = position(sorted(m.channels), [(i, sig) for i, (_, _, sig) in enumerate(m.items)])
    assign = {(Obj("agent", (n,)), i): s for i, (n, s, _) in enumerate(m.items)}
    return PositionedBehaviour(x, assign)


def translate_config(c: Configuration, defs: Mapping[str, Definition] = px.EMPTY_DEFS) -> MixedBehaviour:
    h = order_map(c.channels)
    inv = tuple(sorted(c.channels))
    n = len(inv)
    return MixedBehaviour(c.channels, [(n, translate_process(p, h, defs), inv) for p in c.procs])


# -------------------------------------------------------------------- zeta


class ZetaDefinitions(Definitions):
    """Definitions of the constants introduced by back-translation, built
    on first lookup so that infinite systems stay usable."""

    def __init__(self):
        super().__init__()
        self._pending: dict[str, State] = {}
        self._names: dict[int, str] = {}
        self._recursive: set[int] | None = None
        self._by_name: dict[str, State] = {}

    def name_for(self, s: State) -> str:
        name = self._names.get(id(s))
        if name is None:
            name = self._names[id(s)] = f"Z{len(self._names)}"
            self._pending[name] = s
            self._by_name[name] = s
        return name

    def state_of(self, name: str) -> State:
        return self._by_name[name]

    def __getitem__(self, name: str) -> Definition:
        if name not in self._table and name in self._pending:
            s = self._pending.pop(name)
            params = tuple(f"x{i}" for i in range(1, s.arity + 1))
            self._table[name] = Definition(params, _zeta_body(s, tuple(range(s.arity)), self))
        return self._table[name]

    def __iter__(self):
        return iter(list(self._table) + list(self._pending))

    def __len__(self):
        return len(self._table) + len(self._pending)

    def force(self, limit: int = 10_000) -> None:
        """Build every pending definition (finite systems only)."""
        k = 0
        while self._pending:
            self[next(iter(self._pending))]
            k += 1
            if k > limit:
                raise ValueError("back-translation does not close off")


def _recursive_states(root: Iterable[State], cap: int) -> set[int] | None:
    """Ids of states lying on a cycle, or ``None`` if the system is too big."""
    states, complete = reachable_states(root, cap=cap)
    if not complete:
        return None
    succ = {id(s): [id(t) for v in s.rows().values() for t in v] for s in states}
    index: dict[int, int] = {}
    low: dict[int, int] = {}
    on: set[int] = set()
    stack: list[int] = []
    out: set[int] = set()
    counter = itertools.count()

    for start in succ:
        if start in index:
            continue
        work = [(start, iter(succ[start]))]
        index[start] = low[start] = next(counter)
        stack.append(start)
        on.add(start)
        while work:
            v, it = work[-1]
            w = next(it, None)
            if w is not None:
                if w not in index:
                    index[w] = low[w] = next(counter)
                    stack.append(w)
                    on.add(w)
                    work.append((w, iter(succ[w])))
                elif w in on:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                low[work[-1][0]] = min(low[work[-1][0]], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 or v in succ[v]:
                    out.update(comp)
    return out


def _shift(chans: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(r - 1 if r < 0 else r for r in chans)


def _zeta_term(s: State, chans: tuple[int, ...], env: ZetaDefinitions) -> Term:
    if env._recursive is None or id(s) in env._recursive:
        return Const(env.name_for(s), chans)
    return _zeta_body(s, chans, env)


def _zeta_body(s: State, chans: tuple[int, ...], env: ZetaDefinitions) -> Term:
    n = s.arity
    rows = s.rows()
    branches: list = []
    left, right = rows.get(Obj("pil", (n,)), ()), rows.get(Obj("pir", (n,)), ())
    for l in left:
        for r in right:
            branches.append((px.Tau(), Par(_zeta_term(l, chans, env), _zeta_term(r, chans, env))))
    for lab, v in rows.items():
        for t in v:
            if lab.kind == "tau":
                branches.append((px.Tau(), _zeta_term(t, chans, env)))
            elif lab.kind == "tick":
                branches.append((px.Tick(), _zeta_term(t, chans, env)))
            elif lab.kind == "nu":
                branches.append((px.New(f"x{n + 1}"), _zeta_term(t, _shift(chans) + (-1,), env)))
            elif lab.kind == "iota":
                a = lab.params[1]
                branches.append((px.In(chans[a - 1], f"x{n + 1}"), _zeta_term(t, _shift(chans) + (-1,), env)))
            elif lab.kind == "out":
                _, a, b = lab.params
                branches.append((px.Out(chans[a - 1], chans[b - 1]), _zeta_term(t, chans, env)))
    return Sum(tuple(branches))


def zeta(d: State, env: ZetaDefinitions | None = None, inline_cap: int = 500) -> tuple[Term, ZetaDefinitions]:
    """Back-translate a state into a guarded sum over channels ``1..n``.

    States on a cycle become constants; others are inlined.  Systems too
    large to analyse use a constant for every state.
    """
    terms, env = zeta_many([(d, tuple(range(1, d.arity + 1)))], env, inline_cap)
    return terms[0], env


def zeta_many(items: Sequence[tuple[State, tuple[int, ...]]], env: ZetaDefinitions | None = None,
              inline_cap: int = 500) -> tuple[list[Term], ZetaDefinitions]:
    if env is None:
        env = ZetaDefinitions()
        env._recursive = _recursive_states([s for s, _ in items], inline_cap)
    return [_zeta_term(s, tuple(sig), env) for s, sig in items], env


def zeta_config(m: MixedBehaviour, inline_cap: int = 500) -> tuple[Configuration, ZetaDefinitions]:
    """The configuration running the back-translation of each component."""
    terms, env = zeta_many([(s, sig) for _, s, sig in m.items], inline_cap=inline_cap)
    return Configuration(m.channels, terms), env


# --------------------------------------------------------- mixed files


def dump_mixed(m: MixedBehaviour, max_states: int = 10_000) -> str:
    """A behaviour system followed by ``CHANNELS`` and one ``ITEM state
    c1,c2`` line per component."""
    states, complete = reachable_states([s for _, s, _ in m.items], cap=max_states)
    if not complete:
        raise ValueError(f"more than {max_states} reachable states")
    names = {id(s): f"s{i}" for i, s in enumerate(states)}
    system = BehaviourSystem()
    for s in states:
        system.add(names[id(s)], s.arity, {lab: [names[id(t)] for t in v] for lab, v in s.rows().items()})
    lines = [system.dump().rstrip("\n"), "CHANNELS " + ",".join(map(str, sorted(m.channels)))]
    for _, s, sig in m.items:
        lines.append(f"ITEM {names[id(s)]} {','.join(map(str, sig))}".rstrip())
    return "\n".join(lines) + "\n"


def load_mixed(text: str) -> MixedBehaviour:
    table, tail = [], []
    for line in text.splitlines():
        word = line.split("#", 1)[0].strip().split(" ", 1)[0]
        (tail if word in ("CHANNELS", "ITEM") else table).append(line)
    system = BehaviourSystem.load("\n".join(table))
    chans: list[int] | None = None
    items = []
    for line in tail:
        parts = line.split("#", 1)[0].split()
        try:
            if parts[0] == "CHANNELS":
                chans = [int(c) for c in parts[1].split(",")] if len(parts) > 1 else []
            else:
                sig = tuple(int(c) for c in parts[2].split(",")) if len(parts) > 2 else ()
                st = system.state(parts[1])
                items.append((st.arity, st, sig))
        except (ValueError, IndexError, KeyError) as exc:
            raise ValueError(f"malformed record {line.strip()!r}: {exc}") from None
    if chans is None:
        raise ValueError("missing CHANNELS record")
    return MixedBehaviour(chans, items)
