"""Finite presheaves over the base category of positions and actions.

Objects are tagged values (``Obj``).  A presheaf stores, for every inhabited
object, a set of element ids and, for every generator out of that object, a
total function on ids.  The action is contravariant: for an element ``x`` of
``U(c)`` and a generator ``g`` with codomain ``c``, ``x.g`` lives in
``U(dom g)``.
"""

from __future__ import annotations

import itertools
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

# ---------------------------------------------------------------- objects

_DIM = {
    "star": 0, "agent": 1,
    "pil": 2, "pir": 2, "tick": 2, "tau": 2, "nu": 2, "iota": 2, "out": 2,
    "fork": 3, "sync": 4,
}
_ARGC = {
    "star": 0, "agent": 1, "pil": 1, "pir": 1, "tick": 1, "tau": 1, "nu": 1,
    "iota": 2, "out": 3, "fork": 1, "sync": 5,
}


@dataclass(frozen=True, order=True)
class Obj:
    kind: str
    params: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in _DIM:
            raise ValueError(f"unknown object kind {self.kind!r}")
        if len(self.params) != _ARGC[self.kind]:
            raise ValueError(f"{self.kind} takes {_ARGC[self.kind]} indices")
        if any(p < 0 for p in self.params):
            raise ValueError("negative index")
        k, p = self.kind, self.params
        if k == "iota" and not 1 <= p[1] <= p[0]:
            raise ValueError(f"iota channel {p[1]} out of range")
        if k == "out" and not (1 <= p[1] <= p[0] and 1 <= p[2] <= p[0]):
            raise ValueError("out channels out of range")
        if k == "sync":
            n, a, m, c, d = p
            if not (1 <= a <= n and 1 <= c <= m and 1 <= d <= m):
                raise ValueError("sync indices out of range")

    @property
    def dim(self) -> int:
        return _DIM[self.kind]

    @property
    def arity(self) -> int:
        """Arity of the acting (initial) agent; for sync, the receiver's."""
        return self.params[0] if self.params else 0

    @property
    def tag(self) -> str:
        if not self.params:
            return self.kind
        return f"{self.kind}:{','.join(map(str, self.params))}"

    @classmethod
    def from_tag(cls, tag: str) -> "Obj":
        kind, _, rest = tag.partition(":")
        params = tuple(int(x) for x in rest.split(",")) if rest else ()
        return cls(kind, params)

    def __str__(self):
        return self.tag


STAR = Obj("star")


def agent(n: int) -> Obj:
    return Obj("agent", (n,))


def pil(n: int) -> Obj:
    return Obj("pil", (n,))


def pir(n: int) -> Obj:
    return Obj("pir", (n,))


def fork(n: int) -> Obj:
    return Obj("fork", (n,))


def nu(n: int) -> Obj:
    return Obj("nu", (n,))


def tick(n: int) -> Obj:
    return Obj("tick", (n,))


def tau(n: int) -> Obj:
    return Obj("tau", (n,))


def iota(n: int, a: int) -> Obj:
    return Obj("iota", (n, a))


def out(m: int, c: int, d: int) -> Obj:
    return Obj("out", (m, c, d))


def sync(n: int, a: int, m: int, c: int, d: int) -> Obj:
    return Obj("sync", (n, a, m, c, d))


def generators(o: Obj) -> list[tuple[str, Obj]]:
    """Generators with codomain ``o`` as (name, domain) pairs."""
    k, p = o.kind, o.params
    if k == "star":
        return []
    if k == "agent":
        return [(f"s{i}", STAR) for i in range(1, p[0] + 1)]
    if k in ("pil", "pir", "tick", "tau"):
        return [("s", agent(p[0])), ("t", agent(p[0]))]
    if k == "out":
        return [("s", agent(p[0])), ("t", agent(p[0]))]
    if k in ("nu", "iota"):
        return [("s", agent(p[0] + 1)), ("t", agent(p[0]))]
    if k == "fork":
        return [("l", pil(p[0])), ("r", pir(p[0]))]
    n, a, m, c, d = p
    return [("rho", iota(n, a)), ("eps", out(m, c, d))]


def gen_domain(o: Obj, g: str) -> Obj:
    for name, dom in generators(o):
        if name == g:
            return dom
    raise KeyError(f"{o.tag} has no generator {g!r}")


def equations(o: Obj) -> list[tuple[str, tuple[str, ...], tuple[str, ...]]]:
    """The defining equations of the category, as path pairs out of ``o``."""
    k, p = o.kind, o.params
    if k in ("pil", "pir", "tick", "tau", "nu", "iota", "out"):
        return [("s.s_i = t.s_i", ("s", f"s{i}"), ("t", f"s{i}")) for i in range(1, p[0] + 1)]
    if k == "fork":
        return [("l.t = r.t", ("l", "t"), ("r", "t"))]
    if k == "sync":
        n, a, m, c, d = p
        return [
            ("rho.t.s_a = eps.t.s_c", ("rho", "t", f"s{a}"), ("eps", "t", f"s{c}")),
            ("rho.s.s_n+1 = eps.s.s_d", ("rho", "s", f"s{n + 1}"), ("eps", "s", f"s{d}")),
        ]
    return []


# ------------------------------------------------------------ presheaves

Elem = tuple[Obj, int]


class Presheaf:
    """A finite presheaf, stored by generator actions only."""

    __slots__ = ("elements", "action", "_key")

    def __init__(self, elements: Mapping[Obj, Iterable[int]], action: Mapping[tuple[Obj, int, str], int]):
        self.elements: dict[Obj, tuple[int, ...]] = {
            o: tuple(sorted(set(ids))) for o, ids in sorted(elements.items()) if ids
        }
        self.action: dict[tuple[Obj, int, str], int] = dict(action)
        self._key = None

    # basic access
    def objects(self) -> list[Obj]:
        return list(self.elements)

    def ids(self, o: Obj) -> tuple[int, ...]:
        return self.elements.get(o, ())

    def elems(self, dims: Iterable[int] | None = None) -> Iterator[Elem]:
        for o, ids in self.elements.items():
            if dims is None or o.dim in dims:
                for i in ids:
                    yield (o, i)

    def __contains__(self, e: Elem) -> bool:
        return e[1] in self.elements.get(e[0], ())

    def act(self, e: Elem, g: str) -> Elem:
        o, i = e
        return (gen_domain(o, g), self.action[(o, i, g)])

    def follow(self, e: Elem, path: Iterable[str]) -> Elem:
        for g in path:
            e = self.act(e, g)
        return e

    def channels(self) -> tuple[int, ...]:
        return self.ids(STAR)

    def agents(self) -> list[Elem]:
        return [e for e in self.elems((1,))]

    def agent_channels(self, x: Elem) -> tuple[int, ...]:
        return tuple(self.action[(x[0], x[1], f"s{i}")] for i in range(1, x[0].params[0] + 1))

    def size(self) -> int:
        return sum(len(v) for v in self.elements.values())

    def key(self):
        if self._key is None:
            self._key = (tuple(self.elements.items()), tuple(sorted(self.action.items())))
        return self._key

    def __eq__(self, other):
        return isinstance(other, Presheaf) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        counts = ", ".join(f"{o.tag}:{len(v)}" for o, v in self.elements.items())
        return f"Presheaf({counts})"


EMPTY = Presheaf({}, {})


def dimension(u: Presheaf) -> int:
    return max((o.dim for o in u.elements), default=0)


def is_position(u: Presheaf) -> bool:
    return dimension(u) <= 1


def is_interface(u: Presheaf) -> bool:
    return all(o == STAR for o in u.elements)


@dataclass(frozen=True)
class EquationViolation:
    equation: str
    element: Elem
    lhs: object
    rhs: object

    def __str__(self):
        o, i = self.element
        return f"{self.equation} fails at {o.tag}#{i}: {self.lhs} != {self.rhs}"


def validate_presheaf(u: Presheaf) -> list[EquationViolation]:
    """Typing and equation violations of ``u``; empty means valid."""
    bad: list[EquationViolation] = []
    for o, ids in u.elements.items():
        for i in ids:
            for g, dom in generators(o):
                t = u.action.get((o, i, g))
                if t is None:
                    bad.append(EquationViolation(f"{g} total", (o, i), "undefined", "defined"))
                elif t not in u.ids(dom):
                    bad.append(EquationViolation(f"{g} typed", (o, i), t, f"an element of {dom.tag}"))
    if bad:
        return bad
    for o, ids in u.elements.items():
        for i in ids:
            for name, p1, p2 in equations(o):
                lhs, rhs = u.follow((o, i), p1), u.follow((o, i), p2)
                if lhs != rhs:
                    bad.append(EquationViolation(name, (o, i), lhs[1], rhs[1]))
    return bad


# ------------------------------------------------ generators and relations


class _UnionFind:
    def __init__(self):
        self.parent: list[int] = []

    def add(self) -> int:
        self.parent.append(len(self.parent))
        return len(self.parent) - 1

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> bool:
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        if b < a:
            a, b = b, a
        self.parent[b] = a
        return True


Path = tuple[str, tuple[str, ...]]


@dataclass
class Presentation:
    """Result of :func:`present`: the presheaf, the generating elements and
    one representative path for every element."""

    presheaf: Presheaf
    roots: dict[str, Elem]
    paths: dict[Elem, Path]


def present(gens: Sequence[tuple[str, Obj]], relations: Sequence[tuple[Path, Path]] = ()) -> Presentation:
    """The presheaf freely generated by ``gens`` modulo the category's
    equations and the extra identifications ``relations``."""
    node_obj: list[Obj] = []
    node_path: list[Path] = []
    index: dict[Path, int] = {}
    child: dict[tuple[int, str], int] = {}
    uf = _UnionFind()

    def add(path: Path, o: Obj) -> int:
        k = uf.add()
        node_obj.append(o)
        node_path.append(path)
        index[path] = k
        return k

    queue = []
    for name, o in gens:
        queue.append(add((name, ()), o))
    while queue:
        k = queue.pop(0)
        root, path = node_path[k]
        for g, dom in generators(node_obj[k]):
            c = add((root, path + (g,)), dom)
            child[(k, g)] = c
            queue.append(c)

    def walk(k: int, path: Iterable[str]) -> int:
        for g in path:
            k = child[(k, g)]
        return k

    for k in range(len(node_obj)):
        for _, p1, p2 in equations(node_obj[k]):
            uf.union(walk(k, p1), walk(k, p2))
    for (r1, p1), (r2, p2) in relations:
        a, b = walk(index[(r1, ())], p1), walk(index[(r2, ())], p2)
        if node_obj[a] != node_obj[b]:
            raise ValueError(f"relation between different objects {node_obj[a].tag} and {node_obj[b].tag}")
        uf.union(a, b)

    # congruence closure
    changed = True
    while changed:
        changed = False
        classes: dict[int, list[int]] = defaultdict(list)
        for k in range(len(node_obj)):
            classes[uf.find(k)].append(k)
        for members in classes.values():
            rep = members[0]
            for k in members[1:]:
                for g, _ in generators(node_obj[k]):
                    if uf.union(child[(k, g)], child[(rep, g)]):
                        changed = True

    ids: dict[int, Elem] = {}
    counter: Counter = Counter()
    elements: dict[Obj, list[int]] = defaultdict(list)
    paths: dict[Elem, Path] = {}
    for k in range(len(node_obj)):
        r = uf.find(k)
        if r not in ids:
            o = node_obj[k]
            ids[r] = (o, counter[o])
            elements[o].append(counter[o])
            paths[ids[r]] = node_path[k]
            counter[o] += 1
    action = {}
    for (k, g), c in child.items():
        o, i = ids[uf.find(k)]
        action[(o, i, g)] = ids[uf.find(c)][1]
    roots = {name: ids[uf.find(index[(name, ())])] for name, _ in gens}
    return Presentation(Presheaf(elements, action), roots, paths)


def representable(o: Obj) -> Presentation:
    """The representable presheaf at ``o``; its generating element is ``roots['id']``."""
    return present([("id", o)])


# ------------------------------------------------------------- morphisms


class Morphism:
    """A natural transformation given objectwise by dictionaries of ids."""

    __slots__ = ("dom", "cod", "maps")

    def __init__(self, dom: Presheaf, cod: Presheaf, maps: Mapping[Obj, Mapping[int, int]]):
        self.dom = dom
        self.cod = cod
        self.maps = {o: dict(m) for o, m in maps.items()}

    def __call__(self, e: Elem) -> Elem:
        return (e[0], self.maps[e[0]][e[1]])

    def image(self) -> set[Elem]:
        return {(o, j) for o, m in self.maps.items() for j in m.values()}

    def is_total(self) -> bool:
        return all(set(self.maps.get(o, {})) == set(ids) for o, ids in self.dom.elements.items())

    def is_natural(self) -> bool:
        if not self.is_total():
            return False
        for o, ids in self.dom.elements.items():
            for i in ids:
                if (o, self.maps[o][i]) not in self.cod:
                    return False
                for g, _ in generators(o):
                    if self(self.dom.act((o, i), g)) != self.cod.act(self((o, i)), g):
                        return False
        return True

    def injective_at(self, o: Obj) -> bool:
        vals = list(self.maps.get(o, {}).values())
        return len(vals) == len(set(vals))

    def is_monic(self) -> bool:
        return all(self.injective_at(o) for o in self.dom.elements)

    def then(self, other: "Morphism") -> "Morphism":
        """Diagrammatic composite: first ``self``, then ``other``."""
        return Morphism(self.dom, other.cod,
                        {o: {i: other.maps[o][j] for i, j in m.items()} for o, m in self.maps.items()})

    def inverse(self) -> "Morphism":
        return Morphism(self.cod, self.dom, {o: {j: i for i, j in m.items()} for o, m in self.maps.items()})

    def key(self):
        return tuple(sorted((o, tuple(sorted(m.items()))) for o, m in self.maps.items()))

    def __eq__(self, other):
        return isinstance(other, Morphism) and self.dom == other.dom and self.cod == other.cod and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"Morphism({self.dom!r} -> {self.cod!r})"


def identity(u: Presheaf) -> Morphism:
    return Morphism(u, u, {o: {i: i for i in ids} for o, ids in u.elements.items()})


def is_one_injective(f: Morphism) -> bool:
    """Injective at every object of positive dimension."""
    return all(f.injective_at(o) for o in f.dom.elements if o.dim > 0)


def subpresheaf(u: Presheaf, elems: Iterable[Elem]) -> tuple[Presheaf, Morphism]:
    """The subpresheaf on ``elems`` (which must be downward closed) and its inclusion."""
    chosen: dict[Obj, set[int]] = defaultdict(set)
    for o, i in elems:
        chosen[o].add(i)
    action = {}
    for o, ids in chosen.items():
        for i in ids:
            for g, dom in generators(o):
                j = u.action[(o, i, g)]
                if j not in chosen.get(dom, ()):
                    raise ValueError(f"not downward closed: {o.tag}#{i}.{g} missing")
                action[(o, i, g)] = j
    sub = Presheaf(chosen, action)
    return sub, Morphism(sub, u, {o: {i: i for i in ids} for o, ids in sub.elements.items()})


def downward_closure(u: Presheaf, elems: Iterable[Elem]) -> set[Elem]:
    seen: set[Elem] = set()
    stack = list(elems)
    while stack:
        e = stack.pop()
        if e in seen:
            continue
        seen.add(e)
        for g, _ in generators(e[0]):
            stack.append(u.act(e, g))
    return seen


def interface_of(u: Presheaf) -> tuple[Presheaf, Morphism]:
    """The discrete presheaf on ``u``'s channels and its injection."""
    return subpresheaf(u, [(STAR, i) for i in u.channels()])


def discrete(channels: Iterable[int]) -> Presheaf:
    return Presheaf({STAR: list(channels)}, {})


def position(channels: Iterable[int], agents: Iterable[tuple[int, Sequence[int]]]) -> Presheaf:
    """A position from channel ids and ``(agent id, channel list)`` pairs."""
    elements: dict[Obj, list[int]] = defaultdict(list)
    elements[STAR] = list(channels)
    action = {}
    for aid, chans in agents:
        o = agent(len(chans))
        elements[o].append(aid)
        for k, c in enumerate(chans, 1):
            action[(o, aid, f"s{k}")] = c
    return Presheaf(elements, action)


# --------------------------------------------------------------- pushouts


@dataclass
class Pushout:
    presheaf: Presheaf
    in_a: Morphism
    in_b: Morphism

    def mediating(self, h: Morphism, k: Morphism) -> Morphism:
        """The unique map out of the pushout agreeing with the cocone (h, k)."""
        p = self.presheaf
        maps: dict[Obj, dict[int, int]] = defaultdict(dict)
        for leg, other in ((self.in_a, h), (self.in_b, k)):
            for o, m in leg.maps.items():
                for i, j in m.items():
                    v = other.maps[o][i]
                    if maps[o].setdefault(j, v) != v:
                        raise ValueError("cocone does not commute with the span")
        med = Morphism(p, h.cod, maps)
        if not med.is_natural():
            raise ValueError("mediating map is not natural")
        return med


def pushout(f: Morphism, g: Morphism) -> Pushout:
    """Objectwise pushout of ``A <-f- I -g-> B``; ids of A are kept, B's
    unmatched elements get fresh ids above A's."""
    a, b, i = f.cod, g.cod, f.dom
    if g.dom != i:
        raise ValueError("pushout legs have different domains")
    elements: dict[Obj, list[int]] = {}
    cls_a: dict[Obj, dict[int, int]] = {}
    cls_b: dict[Obj, dict[int, int]] = {}
    for o in sorted(set(a.elements) | set(b.elements)):
        uf = _UnionFind()
        ka = {x: uf.add() for x in a.ids(o)}
        kb = {x: uf.add() for x in b.ids(o)}
        for x in i.ids(o):
            uf.union(ka[f.maps[o][x]], kb[g.maps[o][x]])
        name: dict[int, int] = {}
        for x in a.ids(o):
            r = uf.find(ka[x])
            name.setdefault(r, x)
        nxt = max(a.ids(o), default=-1) + 1
        for x in b.ids(o):
            r = uf.find(kb[x])
            if r not in name:
                name[r] = nxt
                nxt += 1
        cls_a[o] = {x: name[uf.find(ka[x])] for x in a.ids(o)}
        cls_b[o] = {x: name[uf.find(kb[x])] for x in b.ids(o)}
        elements[o] = sorted(set(name.values()))
    action = {}
    for src, cls in ((a, cls_a), (b, cls_b)):
        for (o, x, gname), y in src.action.items():
            dom = gen_domain(o, gname)
            action[(o, cls[o][x], gname)] = cls[dom][y]
    p = Presheaf(elements, action)
    return Pushout(p, Morphism(a, p, cls_a), Morphism(b, p, cls_b))


# ---------------------------------------------------------- isomorphisms


class Inconclusive(Exception):
    """A bounded search gave up before deciding."""


def _signature(u: Presheaf) -> dict[Elem, tuple]:
    indeg: dict[Elem, Counter] = defaultdict(Counter)
    for (o, x, g), y in u.action.items():
        indeg[(gen_domain(o, g), y)][(o.tag, g)] += 1
    return {e: (e[0], tuple(sorted(indeg[e].items()))) for e in u.elems()}


def iso_check(u: Presheaf, v: Presheaf, fixed: Mapping[Elem, Elem] | None = None,
              cap: int = 200, budget: int = 200_000) -> Morphism | None:
    """A natural isomorphism ``u -> v`` extending ``fixed``, or ``None``.

    Raises :class:`Inconclusive` when a dimension holds more than ``cap``
    elements or the search exceeds ``budget`` nodes.
    """
    if {o: len(x) for o, x in u.elements.items()} != {o: len(x) for o, x in v.elements.items()}:
        return None
    per_dim = Counter()
    for o, ids in u.elements.items():
        per_dim[o.dim] += len(ids)
    if any(n > cap for n in per_dim.values()):
        raise Inconclusive(f"more than {cap} elements in one dimension")
    su, sv = _signature(u), _signature(v)
    if sorted(map(repr, su.values())) != sorted(map(repr, sv.values())):
        return None
    cands: dict[tuple, list[Elem]] = defaultdict(list)
    for e, s in sv.items():
        cands[s].append(e)

    def assign(m: dict, inv: dict, pairs: list[tuple[Elem, Elem]]) -> bool:
        stack = list(pairs)
        while stack:
            x, y = stack.pop()
            if x in m:
                if m[x] != y:
                    return False
                continue
            if y in inv or su[x] != sv[y]:
                return False
            m[x] = y
            inv[y] = x
            for g, _ in generators(x[0]):
                stack.append((u.act(x, g), v.act(y, g)))
        return True

    m0: dict[Elem, Elem] = {}
    inv0: dict[Elem, Elem] = {}
    if fixed and not assign(m0, inv0, list(fixed.items())):
        return None
    order = sorted(u.elems(), key=lambda e: (-e[0].dim, e[0], e[1]))
    nodes = 0

    def search(m: dict, inv: dict, start: int) -> dict | None:
        nonlocal nodes
        k = start
        while k < len(order) and order[k] in m:
            k += 1
        if k == len(order):
            return m
        x = order[k]
        for y in cands[su[x]]:
            if y in inv:
                continue
            nodes += 1
            if nodes > budget:
                raise Inconclusive("isomorphism search budget exhausted")
            m2, inv2 = dict(m), dict(inv)
            if assign(m2, inv2, [(x, y)]):
                r = search(m2, inv2, k + 1)
                if r is not None:
                    return r
        return None

    res = search(m0, inv0, 0)
    if res is None:
        return None
    maps: dict[Obj, dict[int, int]] = defaultdict(dict)
    for (o, i), (_, j) in res.items():
        maps[o][i] = j
    return Morphism(u, v, maps)


def homomorphisms(u: Presheaf, v: Presheaf, one_injective: bool = True) -> Iterator[Morphism]:
    """Brute-force enumeration of natural maps ``u -> v`` (desk scale)."""
    order = sorted(u.elems(), key=lambda e: (-e[0].dim, e[0], e[1]))

    def extend(m: dict, pairs) -> dict | None:
        m = dict(m)
        stack = list(pairs)
        while stack:
            x, y = stack.pop()
            if x in m:
                if m[x] != y:
                    return None
                continue
            m[x] = y
            for g, _ in generators(x[0]):
                stack.append((u.act(x, g), v.act(y, g)))
        return m

    def go(m: dict, k: int):
        while k < len(order) and order[k] in m:
            k += 1
        if k == len(order):
            yield m
            return
        x = order[k]
        for j in v.ids(x[0]):
            m2 = extend(m, [(x, (x[0], j))])
            if m2 is not None:
                yield from go(m2, k + 1)

    for m in go({}, 0):
        maps: dict[Obj, dict[int, int]] = defaultdict(dict)
        for (o, i), (_, j) in m.items():
            maps[o][i] = j
        f = Morphism(u, v, maps)
        if not one_injective or is_one_injective(f):
            yield f


# ------------------------------------------------------------ text format


def dump_presheaf(u: Presheaf) -> str:
    lines = ["CHANNELS" + "".join(f" {c}" for c in u.channels())]
    for o, ids in u.elements.items():
        if o.kind == "agent":
            for i in ids:
                lines.append(" ".join(["AGENTS", str(i), str(o.params[0])] + [str(c) for c in u.agent_channels((o, i))]))
    for o, ids in sorted(u.elements.items(), key=lambda kv: (kv[0].dim, kv[0])):
        if o.dim < 2:
            continue
        for i in ids:
            gens = " ".join(f"{g}={u.action[(o, i, g)]}" for g, _ in generators(o))
            lines.append(f"ELEM {o.tag} {i} {gens}")
    return "\n".join(lines) + "\n"


class FormatError(ValueError):
    pass


def load_presheaf(text: str | Iterable[str]) -> Presheaf:
    lines = text.splitlines() if isinstance(text, str) else list(text)
    elements: dict[Obj, list[int]] = defaultdict(list)
    action: dict[tuple[Obj, int, str], int] = {}
    for n, line in enumerate(lines, 1):
        parts = line.split()
        if not parts:
            continue
        try:
            if parts[0] == "CHANNELS":
                elements[STAR].extend(int(x) for x in parts[1:])
            elif parts[0] == "AGENTS":
                i, arity = int(parts[1]), int(parts[2])
                chans = [int(x) for x in parts[3:]]
                if len(chans) != arity:
                    raise FormatError(f"line {n}: agent {i} lists {len(chans)} channels, arity {arity}")
                o = agent(arity)
                elements[o].append(i)
                for k, c in enumerate(chans, 1):
                    action[(o, i, f"s{k}")] = c
            elif parts[0] == "ELEM":
                o = Obj.from_tag(parts[1])
                i = int(parts[2])
                elements[o].append(i)
                for kv in parts[3:]:
                    g, _, t = kv.partition("=")
                    action[(o, i, g)] = int(t)
            else:
                raise FormatError(f"line {n}: unknown record {parts[0]!r}")
        except (ValueError, IndexError) as exc:
            if isinstance(exc, FormatError):
                raise
            raise FormatError(f"line {n}: {exc}") from None
    for o, ids in elements.items():
        if len(ids) != len(set(ids)):
            raise FormatError(f"duplicate ids for {o.tag}")
    u = Presheaf(elements, action)
    bad = validate_presheaf(u)
    if bad:
        raise FormatError(str(bad[0]))
    return u
