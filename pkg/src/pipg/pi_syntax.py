"""Process terms, configurations, the concrete syntax and the reduction rules
of the chemical abstract machine.

Terms are stored locally nameless.  A channel reference is an ``int``:

* ``r >= 0`` is a free channel, a natural number of the ambient channel set;
* ``r < 0`` is a bound variable, ``-1`` being the innermost enclosing binder,
  ``-2`` the next one out, and so on.

Binders keep the name they were written with as a printing hint only, so
alpha-equivalent terms are structurally equal and substitution never
captures.
"""

from __future__ import annotations

import enum
import itertools
import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Mapping, Sequence

NAME_RE = re.compile(r"[a-zA-Z_][a-zA-Z0-9_']*")
KEYWORDS = frozenset({"tau", "tick", "new"})


class SyntaxError_(ValueError):
    """Malformed process text; ``offset`` is the character position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnboundName(ValueError):
    pass


class GuardednessError(ValueError):
    pass


# ---------------------------------------------------------------- terms


class _Node:
    """Mixin caching the structural hash of immutable term nodes."""

    __slots__ = ()

    def __hash__(self):
        try:
            return self.__dict__["_h"]
        except KeyError:
            h = hash((type(self).__name__,) + self._fields())
            object.__setattr__(self, "_h", h)
            return h


@dataclass(frozen=True, eq=True)
class Tau(_Node):
    def _fields(self):
        return ()

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Tick(_Node):
    def _fields(self):
        return ()

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class New(_Node):
    hint: str = field(default="x", compare=False, repr=False)

    def _fields(self):
        return ()

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class In(_Node):
    chan: int
    hint: str = field(default="x", compare=False, repr=False)

    def _fields(self):
        return (self.chan,)

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Out(_Node):
    chan: int
    payload: int

    def _fields(self):
        return (self.chan, self.payload)

    __hash__ = _Node.__hash__


Guard = Tau | Tick | New | In | Out


@dataclass(frozen=True, eq=True)
class Sum(_Node):
    """Guarded sum; the empty sum is the inert process ``0``."""

    branches: tuple[tuple[Guard, "Term"], ...] = ()

    def _fields(self):
        return self.branches

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Par(_Node):
    left: "Term"
    right: "Term"

    def _fields(self):
        return (self.left, self.right)

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Const(_Node):
    """Reference to a named definition, instantiated with ``args``.

    ``args[i]`` is the channel passed for the definition's i-th parameter.
    """

    name: str
    args: tuple[int, ...] = ()

    def _fields(self):
        return (self.name, self.args)

    __hash__ = _Node.__hash__


Term = Sum | Par | Const
ZERO = Sum(())


def binds(g: Guard) -> bool:
    return isinstance(g, (New, In))


@dataclass(frozen=True)
class Definition:
    params: tuple[str, ...]
    body: Term


class Definitions(Mapping[str, Definition]):
    """Environment of named constants; bodies use free channel ``i`` for
    the i-th parameter."""

    def __init__(self, table: Mapping[str, Definition] | None = None):
        self._table = dict(table or {})

    def __getitem__(self, name: str) -> Definition:
        return self._table[name]

    def __iter__(self):
        return iter(self._table)

    def __len__(self):
        return len(self._table)

    def add(self, name: str, definition: Definition) -> None:
        self._table[name] = definition


EMPTY_DEFS = Definitions()


# ------------------------------------------------------- term algebra


def map_free(t: Term, f: Callable[[int], int], depth: int = 0) -> Term:
    """Apply ``f`` to every free channel of ``t``.

    ``f`` may return a bound reference (negative); it is then shifted past
    the binders crossed on the way down.
    """

    def ref(r: int, d: int) -> int:
        if r < 0:
            return r
        v = f(r)
        return v - d if v < 0 else v

    def go(t: Term, d: int) -> Term:
        if isinstance(t, Sum):
            out = []
            for g, k in t.branches:
                if isinstance(g, In):
                    g = In(ref(g.chan, d), g.hint)
                elif isinstance(g, Out):
                    g = Out(ref(g.chan, d), ref(g.payload, d))
                out.append((g, go(k, d + binds(g))))
            return Sum(tuple(out))
        if isinstance(t, Par):
            return Par(go(t.left, d), go(t.right, d))
        return Const(t.name, tuple(ref(a, d) for a in t.args))

    return go(t, depth)


def open_binder(t: Term, c: int) -> Term:
    """Instantiate the variable bound just outside ``t`` with channel ``c``."""

    def ref(r: int, d: int) -> int:
        if r >= 0 or r > -(d + 1):
            return r
        if r == -(d + 1):
            return c - d if c < 0 else c
        return r + 1

    def go(t: Term, d: int) -> Term:
        if isinstance(t, Sum):
            out = []
            for g, k in t.branches:
                if isinstance(g, In):
                    g = In(ref(g.chan, d), g.hint)
                elif isinstance(g, Out):
                    g = Out(ref(g.chan, d), ref(g.payload, d))
                out.append((g, go(k, d + binds(g))))
            return Sum(tuple(out))
        if isinstance(t, Par):
            return Par(go(t.left, d), go(t.right, d))
        return Const(t.name, tuple(ref(a, d) for a in t.args))

    return go(t, 0)


def substitute(t: Term, sigma: Mapping[int, int]) -> Term:
    """Capture-avoiding renaming of free channels (identity off ``sigma``)."""
    return map_free(t, lambda r: sigma.get(r, r))


def free_channels(t: Term) -> list[int]:
    """Free channels of ``t`` in first-occurrence order."""
    seen: dict[int, None] = {}

    def go(t: Term) -> None:
        if isinstance(t, Sum):
            for g, k in t.branches:
                if isinstance(g, In) and g.chan >= 0:
                    seen.setdefault(g.chan)
                elif isinstance(g, Out):
                    for r in (g.chan, g.payload):
                        if r >= 0:
                            seen.setdefault(r)
                go(k)
        elif isinstance(t, Par):
            go(t.left)
            go(t.right)
        else:
            for a in t.args:
                if a >= 0:
                    seen.setdefault(a)

    # bound references are negative at every depth, so no depth tracking
    go(t)
    return list(seen)


def unfold(t: Term, defs: Mapping[str, Definition]) -> Term:
    """Replace a top-level constant by its body until the head is not a constant."""
    seen = 0
    while isinstance(t, Const):
        d = defs[t.name]
        args = t.args
        t = map_free(d.body, lambda i: args[i])
        seen += 1
        if seen > 10_000:
            raise GuardednessError(f"unguarded recursion through {d}")
    return t


def constants_of(t: Term) -> set[str]:
    out: set[str] = set()

    def go(t: Term) -> None:
        if isinstance(t, Sum):
            for _, k in t.branches:
                go(k)
        elif isinstance(t, Par):
            go(t.left)
            go(t.right)
        else:
            out.add(t.name)

    go(t)
    return out


@lru_cache(maxsize=200_000)
def term_key(t: Term) -> str:
    """Total order on terms: a compact, injective rendering."""
    if isinstance(t, Sum):
        parts = []
        for g, k in t.branches:
            if isinstance(g, Tau):
                gs = "t"
            elif isinstance(g, Tick):
                gs = "h"
            elif isinstance(g, New):
                gs = "n"
            elif isinstance(g, In):
                gs = f"i{g.chan}"
            else:
                gs = f"o{g.chan},{g.payload}"
            parts.append(f"{gs}.{term_key(k)}")
        return "S(" + ";".join(parts) + ")"
    if isinstance(t, Par):
        return f"P({term_key(t.left)}|{term_key(t.right)})"
    return f"K{t.name}({','.join(map(str, t.args))})"


# ------------------------------------------------------------ printing


def _fresh(base: str, taken: set[str]) -> str:
    name = base
    while name in taken:
        name += "'"
    return name


def show_term(t: Term, names: Mapping[int, str] | Callable[[int], str] | None = None) -> str:
    """Render ``t`` in the concrete syntax; free channel ``i`` prints as ``names[i]``."""
    if names is None:
        lookup: Callable[[int], str] = lambda i: f"c{i}"
    elif callable(names):
        lookup = names
    else:
        lookup = lambda i: names[i] if i in names else f"c{i}"
    free = {lookup(c) for c in free_channels(t)}

    def name(r: int, scope: list[str]) -> str:
        return lookup(r) if r >= 0 else scope[r]

    def guard(g: Guard, scope: list[str]) -> tuple[str, list[str]]:
        if isinstance(g, Tau):
            return "tau", scope
        if isinstance(g, Tick):
            return "tick", scope
        if isinstance(g, Out):
            return f"{name(g.chan, scope)}<{name(g.payload, scope)}>", scope
        b = _fresh(g.hint, free | set(scope))
        if isinstance(g, New):
            return f"new {b}", scope + [b]
        return f"{name(g.chan, scope)}({b})", scope + [b]

    def atom(t: Term, scope: list[str]) -> str:
        if isinstance(t, Sum) and len(t.branches) == 1:
            return proc(t, scope)
        if isinstance(t, Sum) and not t.branches or isinstance(t, Const):
            return proc(t, scope)
        return "(" + proc(t, scope) + ")"

    def proc(t: Term, scope: list[str]) -> str:
        if isinstance(t, Sum):
            if not t.branches:
                return "0"
            out = []
            for g, k in t.branches:
                gs, inner = guard(g, scope)
                out.append(f"{gs}.{atom(k, inner)}")
            return " + ".join(out)
        if isinstance(t, Par):
            left = proc(t.left, scope) if isinstance(t.left, Par) else atom(t.left, scope)
            return f"{left} | {atom(t.right, scope)}"
        if not t.args:
            return t.name
        # instantiated constants are printed with explicit arguments
        return f"{t.name}{{{', '.join(name(a, scope) for a in t.args)}}}"

    return proc(t, [])


# ------------------------------------------------------------- parsing

_TOKEN_RE = re.compile(r"\s*(?:(#[^\n]*)|(:=)|([a-zA-Z_][a-zA-Z0-9_']*|0)|([().<>+|,\[\];{}]))")


@dataclass
class _Tok:
    kind: str  # 'id', 'sym', 'eof'
    text: str
    pos: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i = 0
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if not m or m.end() == i:
            j = i
            while j < len(text) and text[j].isspace():
                j += 1
            if j >= len(text):
                break
            raise SyntaxError_(f"unexpected character {text[j]!r}", j)
        if m.group(1) is not None:
            i = m.end()
            continue
        start = m.start(2) if m.group(2) else m.start(3) if m.group(3) else m.start(4)
        if m.group(2):
            toks.append(_Tok("sym", ":=", start))
        elif m.group(3):
            toks.append(_Tok("id", m.group(3), start))
        else:
            toks.append(_Tok("sym", m.group(4), start))
        i = m.end()
    toks.append(_Tok("eof", "", len(text)))
    return toks


# raw syntax with names, resolved against scopes afterwards
@dataclass
class _RSum:
    branches: list[tuple[tuple, object]]
    pos: int
    prefixed: bool = True


@dataclass
class _RPar:
    left: object
    right: object


@dataclass
class _RConst:
    name: str
    pos: int
    args: list[str] | None = None


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def advance(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> _Tok:
        t = self.tok
        if t.text != text or t.kind == "eof":
            raise SyntaxError_(f"expected {text!r}", t.pos)
        return self.advance()

    def name(self) -> str:
        t = self.tok
        if t.kind != "id" or t.text == "0" or t.text in KEYWORDS:
            raise SyntaxError_("expected a name", t.pos)
        return self.advance().text

    def at_guard(self) -> bool:
        t = self.tok
        if t.kind != "id" or t.text == "0":
            return False
        if t.text in KEYWORDS:
            return True
        nxt = self.toks[self.i + 1]
        return nxt.kind == "sym" and nxt.text in "(<"

    def process(self):
        left = self.choice()
        while self.tok.kind == "sym" and self.tok.text == "|":
            self.advance()
            left = _RPar(left, self.choice())
        return left

    def choice(self):
        start = self.tok.pos
        first = self.unit()
        if not (self.tok.kind == "sym" and self.tok.text == "+"):
            return first
        operands = [(first, start)]
        while self.tok.kind == "sym" and self.tok.text == "+":
            self.advance()
            pos = self.tok.pos
            operands.append((self.unit(), pos))
        branches = []
        for op, pos in operands:
            if not (isinstance(op, _RSum) and op.branches and op.prefixed):
                raise SyntaxError_("'+' applied to a non-guarded operand", pos)
            branches.extend(op.branches)
        return _RSum(branches, start)

    def unit(self):
        t = self.tok
        if self.at_guard():
            g = self.guard()
            self.expect(".")
            return _RSum([(g, self.unit())], t.pos)
        if t.kind == "id" and t.text == "0":
            self.advance()
            return _RSum([], t.pos, prefixed=False)
        if t.kind == "id":
            name = self.advance().text
            args = None
            if self.tok.kind == "sym" and self.tok.text == "{":
                self.advance()
                args = [self.name()]
                while self.tok.text == ",":
                    self.advance()
                    args.append(self.name())
                self.expect("}")
            return _RConst(name, t.pos, args)
        if t.kind == "sym" and t.text == "(":
            self.advance()
            inner = self.process()
            self.expect(")")
            if isinstance(inner, _RSum):
                # a parenthesised sum may be a '+' operand
                inner = _RSum(inner.branches, inner.pos, prefixed=bool(inner.branches))
            return inner
        raise SyntaxError_("expected a process", t.pos)

    def guard(self) -> tuple:
        t = self.advance()
        if t.text == "tau":
            return ("tau",)
        if t.text == "tick":
            return ("tick",)
        if t.text == "new":
            return ("new", self.name())
        if self.tok.text == "(":
            self.advance()
            b = self.name()
            self.expect(")")
            return ("in", t.text, b, t.pos)
        self.expect("<")
        b = self.name()
        self.expect(">")
        return ("out", t.text, b, t.pos)

    def end(self) -> None:
        if self.tok.kind != "eof":
            raise SyntaxError_(f"unexpected {self.tok.text!r}", self.tok.pos)


def _raw_free(raw, params: Mapping[str, Sequence[str]]) -> list[str]:
    """Free names of a raw term, constants contributing their parameters."""
    seen: dict[str, None] = {}

    def go(r, bound: tuple[str, ...]) -> None:
        if isinstance(r, _RSum):
            for g, k in r.branches:
                inner = bound
                if g[0] == "new":
                    inner = bound + (g[1],)
                elif g[0] == "in":
                    if g[1] not in bound:
                        seen.setdefault(g[1])
                    inner = bound + (g[2],)
                elif g[0] == "out":
                    for n in g[1:3]:
                        if n not in bound:
                            seen.setdefault(n)
                go(k, inner)
        elif isinstance(r, _RPar):
            go(r.left, bound)
            go(r.right, bound)
        else:
            for n in (r.args if r.args is not None else params.get(r.name, ())):
                if n not in bound:
                    seen.setdefault(n)

    go(raw, ())
    return list(seen)


def _resolve(raw, gamma: Mapping[str, int], defs: Mapping[str, Definition]) -> Term:
    def look(n: str, scope: list[str], pos: int) -> int:
        for k in range(len(scope) - 1, -1, -1):
            if scope[k] == n:
                return -(len(scope) - k)
        if n in gamma:
            return gamma[n]
        raise UnboundName(f"unbound name {n!r} at offset {pos}")

    def go(r, scope: list[str]) -> Term:
        if isinstance(r, _RSum):
            out = []
            for g, k in r.branches:
                if g[0] == "tau":
                    out.append((Tau(), go(k, scope)))
                elif g[0] == "tick":
                    out.append((Tick(), go(k, scope)))
                elif g[0] == "new":
                    out.append((New(g[1]), go(k, scope + [g[1]])))
                elif g[0] == "in":
                    out.append((In(look(g[1], scope, g[3]), g[2]), go(k, scope + [g[2]])))
                else:
                    out.append((Out(look(g[1], scope, g[3]), look(g[2], scope, g[3])), go(k, scope)))
            return Sum(tuple(out))
        if isinstance(r, _RPar):
            return Par(go(r.left, scope), go(r.right, scope))
        if r.name not in defs:
            raise UnboundName(f"undefined constant {r.name!r} at offset {r.pos}")
        names = r.args if r.args is not None else defs[r.name].params
        if len(names) != len(defs[r.name].params):
            raise SyntaxError_(f"constant {r.name!r} takes {len(defs[r.name].params)} arguments", r.pos)
        return Const(r.name, tuple(look(n, scope, r.pos) for n in names))

    return go(raw, [])


def _unguarded_refs(raw) -> set[str]:
    out: set[str] = set()

    def go(r) -> None:
        if isinstance(r, _RPar):
            go(r.left)
            go(r.right)
        elif isinstance(r, _RConst):
            out.add(r.name)

    go(raw)
    return out


def _check_guarded(edges: Mapping[str, set[str]]) -> None:
    state: dict[str, int] = {}

    def visit(n: str, path: list[str]) -> None:
        state[n] = 1
        for m in sorted(edges.get(n, ())):
            if state.get(m) == 1:
                cycle = path[path.index(m):] + [m] if m in path else [n, m]
                raise GuardednessError("unguarded constant: " + " -> ".join(cycle))
            if m not in state:
                visit(m, path + [m])
        state[n] = 2

    for n in sorted(edges):
        if n not in state:
            visit(n, [n])


def parse_definitions(lines: Iterable[str], base: Definitions | None = None) -> Definitions:
    """Parse ``NAME := process`` lines into a closed, guarded environment."""
    raws: dict[str, object] = {}
    for line in lines:
        p = _Parser(line)
        if p.tok.kind == "eof":
            continue
        name = p.name()
        p.expect(":=")
        raws[name] = p.process()
        p.end()
    return _build_definitions(raws, base)


def _build_definitions(raws: Mapping[str, object], base: Definitions | None) -> Definitions:
    params: dict[str, list[str]] = {n: list(d.params) for n, d in (base or {}).items()}
    for n in raws:
        params[n] = []
    for n, r in raws.items():
        for c in _const_refs(r):
            if c not in params:
                raise UnboundName(f"undefined constant {c!r} in definition of {n!r}")
    changed = True
    while changed:
        changed = False
        for n, r in raws.items():
            fv = _raw_free(r, params)
            if fv != params[n]:
                merged = params[n] + [x for x in fv if x not in params[n]]
                if merged != params[n]:
                    params[n] = merged
                    changed = True
    edges = {n: _unguarded_refs(r) for n, r in raws.items()}
    _check_guarded(edges)
    defs = Definitions(dict(base.items()) if base else {})
    for n in raws:
        defs.add(n, Definition(tuple(params[n]), ZERO))
    for n, r in raws.items():
        gamma = {p: i for i, p in enumerate(params[n])}
        defs.add(n, Definition(tuple(params[n]), _resolve(r, gamma, defs)))
    return defs


def _const_refs(raw) -> set[str]:
    out: set[str] = set()

    def go(r) -> None:
        if isinstance(r, _RSum):
            for _, k in r.branches:
                go(k)
        elif isinstance(r, _RPar):
            go(r.left)
            go(r.right)
        else:
            out.add(r.name)

    go(raw)
    return out


def parse_process(text: str, gamma: Sequence[str] | Mapping[str, int],
                  defs: Mapping[str, Definition] = EMPTY_DEFS) -> Term:
    """Parse a process over the channel names ``gamma``.

    A name list maps the i-th name to channel ``i``; a mapping is used as is.
    """
    if not isinstance(gamma, Mapping):
        gamma = {n: i for i, n in enumerate(gamma)}
    p = _Parser(text)
    raw = p.process()
    p.end()
    return _resolve(raw, gamma, defs)


# ------------------------------------------------------- configurations


class Label(enum.Enum):
    TAU = "tau"
    TICK = "tick"

    def __str__(self):
        return self.value


def _sorted_procs(procs: Iterable[Term]) -> tuple[Term, ...]:
    return tuple(sorted(procs, key=term_key))


@dataclass(frozen=True)
class Configuration:
    """A finite channel set with a multiset of processes over it."""

    channels: frozenset[int]
    procs: tuple[Term, ...]

    def __init__(self, channels: Iterable[int], procs: Iterable[Term]):
        object.__setattr__(self, "channels", frozenset(channels))
        object.__setattr__(self, "procs", _sorted_procs(procs))

    def __hash__(self):
        return hash((self.channels, self.procs))

    def check(self) -> None:
        for p in self.procs:
            extra = set(free_channels(p)) - self.channels
            if extra:
                raise UnboundName(f"channels {sorted(extra)} not in the channel set")

    def par(self, other: "Configuration") -> "Configuration | None":
        """Parallel composition, defined only on equal channel sets."""
        if self.channels != other.channels:
            return None
        return Configuration(self.channels, self.procs + other.procs)


def fresh_channel(channels: Iterable[int]) -> int:
    used = set(channels)
    n = 0
    while n in used:
        n += 1
    return n


@dataclass(frozen=True)
class Derivation:
    """One rule instance: ``rule`` names the reduction rule; ``redex`` the
    indices of the consumed processes in the source multiset."""

    rule: str
    label: Label
    redex: tuple[int, ...]
    target: Configuration


def conf_derivations(c: Configuration, defs: Mapping[str, Definition] = EMPTY_DEFS) -> Iterator[Derivation]:
    """All rule instances applicable to ``c``; the surrounding processes are
    carried along unchanged, which is the frame rule."""
    procs = [unfold(p, defs) for p in c.procs]
    gamma = c.channels

    def rest(*drop: int) -> list[Term]:
        return [p for k, p in enumerate(c.procs) if k not in drop]

    for i, p in enumerate(procs):
        if isinstance(p, Par):
            yield Derivation("heat", Label.TAU, (i,), Configuration(gamma, rest(i) + [p.left, p.right]))
            continue
        for g, k in p.branches:
            if isinstance(g, Tau):
                yield Derivation("tau", Label.TAU, (i,), Configuration(gamma, rest(i) + [k]))
            elif isinstance(g, Tick):
                yield Derivation("tick", Label.TICK, (i,), Configuration(gamma, rest(i) + [k]))
            elif isinstance(g, New):
                a = fresh_channel(gamma)
                yield Derivation("new", Label.TAU, (i,), Configuration(gamma | {a}, rest(i) + [open_binder(k, a)]))
    for i, p in enumerate(procs):
        if isinstance(p, Par):
            continue
        for j, q in enumerate(procs):
            if i == j or isinstance(q, Par):
                continue
            for gi, ki in p.branches:
                if not isinstance(gi, In):
                    continue
                for gj, kj in q.branches:
                    if isinstance(gj, Out) and gj.chan == gi.chan:
                        tgt = Configuration(gamma, rest(i, j) + [open_binder(ki, gj.payload), kj])
                        yield Derivation("sync", Label.TAU, (i, j), tgt)


def conf_transitions(c: Configuration, defs: Mapping[str, Definition] = EMPTY_DEFS) -> set[tuple[Label, Configuration]]:
    """One-step successors of ``c``; identity edges are left implicit."""
    return {(d.label, d.target) for d in conf_derivations(c, defs)}


def check_derivation(c: Configuration, d: Derivation, defs: Mapping[str, Definition] = EMPTY_DEFS) -> bool:
    """Re-derive ``d`` from its rule tag and redex independently of the
    enumeration order."""
    procs = list(c.procs)
    if any(k >= len(procs) for k in d.redex) or len(set(d.redex)) != len(d.redex):
        return False
    frame = [p for k, p in enumerate(procs) if k not in d.redex]
    heads = [unfold(procs[k], defs) for k in d.redex]
    candidates: list[tuple[Label, Configuration]] = []
    if d.rule == "heat" and isinstance(heads[0], Par):
        candidates.append((Label.TAU, Configuration(c.channels, frame + [heads[0].left, heads[0].right])))
    elif d.rule in ("tau", "tick", "new") and isinstance(heads[0], Sum):
        for g, k in heads[0].branches:
            if d.rule == "tau" and isinstance(g, Tau):
                candidates.append((Label.TAU, Configuration(c.channels, frame + [k])))
            elif d.rule == "tick" and isinstance(g, Tick):
                candidates.append((Label.TICK, Configuration(c.channels, frame + [k])))
            elif d.rule == "new" and isinstance(g, New):
                a = fresh_channel(c.channels)
                candidates.append((Label.TAU, Configuration(c.channels | {a}, frame + [open_binder(k, a)])))
    elif d.rule == "sync" and len(heads) == 2 and all(isinstance(h, Sum) for h in heads):
        for gi, ki in heads[0].branches:
            for gj, kj in heads[1].branches:
                if isinstance(gi, In) and isinstance(gj, Out) and gi.chan == gj.chan:
                    candidates.append((Label.TAU, Configuration(c.channels, frame + [open_binder(ki, gj.payload), kj])))
    return (d.label, d.target) in candidates


# ---------------------------------------------------- canonical forms


def canonical_multiset(items: Sequence, channels: Iterable[int],
                       used: Callable[[object], list[int]],
                       rename: Callable[[object, Mapping[int, int]], object],
                       key: Callable[[object], str],
                       limit: int = 50_000) -> tuple[tuple, dict[int, int]]:
    """Canonical representative of a multiset of channel-carrying items.

    Channels are renamed to ``0..k-1`` by first use; the processing order
    is by renaming-invariant shape, and ties between distinct items of the
    same shape are broken by trying every order and keeping the least
    result.  Returns the sorted renamed items and the renaming.
    """
    channels = sorted(set(channels))

    def shape(it) -> str:
        local = {c: i for i, c in enumerate(used(it))}
        return key(rename(it, local))

    shaped = sorted(((shape(it), key(it), it) for it in items), key=lambda x: (x[0], x[1]))
    groups: list[list] = []
    for s, grp in itertools.groupby(shaped, key=lambda x: x[0]):
        members = [x for x in grp]
        distinct: dict[str, list] = {}
        for _, k, it in members:
            distinct.setdefault(k, []).append(it)
        groups.append(list(distinct.values()))

    choices = []
    total = 1
    for g in groups:
        if len(g) == 1:
            choices.append([g])
        else:
            perms = list(itertools.permutations(g))
            total *= len(perms)
            choices.append(perms)
    if total > limit:
        # beyond the cap fall back to a single deterministic order
        choices = [[c[0]] for c in choices]

    best = None
    for combo in itertools.product(*choices):
        order: dict[int, int] = {}
        for group in combo:
            for copies in group:
                for c in used(copies[0]):
                    if c not in order:
                        order[c] = len(order)
        for c in channels:
            if c not in order:
                order[c] = len(order)
        renamed = tuple(sorted((rename(it, order) for grp in combo for copies in grp for it in copies), key=key))
        k = tuple(key(x) for x in renamed)
        if best is None or k < best[0]:
            best = (k, renamed, order)
    if best is None:
        order = {c: i for i, c in enumerate(channels)}
        return (), order
    return best[1], best[2]


def canonicalize(c: Configuration) -> tuple[Configuration, dict[int, int]]:
    """Alpha-canonical form of ``c`` and the channel renaming that produced it."""
    procs, order = canonical_multiset(c.procs, c.channels, free_channels, substitute, term_key)
    return Configuration(range(len(c.channels)), procs), order


# -------------------------------------------------------------- files


@dataclass
class Program:
    """A parsed ``.pi`` file: definitions, channel names and processes."""

    defs: Definitions
    names: list[str]
    procs: list[Term]

    @property
    def config(self) -> Configuration:
        return Configuration(range(len(self.names)), self.procs)

    def name_map(self) -> dict[int, str]:
        return dict(enumerate(self.names))


def parse_program(text: str, base: Definitions | None = None) -> Program:
    """Parse a file of definitions followed by one ``[names] P ; Q`` line."""
    def_lines: list[str] = []
    config_line: tuple[int, str] | None = None
    offset = 0
    for line in text.splitlines(keepends=True):
        body = line.split("#", 1)[0]
        if body.strip():
            if ":=" in body:
                def_lines.append(body)
            elif config_line is None:
                config_line = (offset, body)
            else:
                raise SyntaxError_("more than one configuration line", offset)
        offset += len(line)
    defs = parse_definitions(def_lines, base)
    if config_line is None:
        return Program(defs, [], [])
    start, line = config_line
    p = _Parser(line)
    p.expect("[")
    names: list[str] = []
    if p.tok.text != "]":
        names.append(p.name())
        while p.tok.text == ",":
            p.advance()
            names.append(p.name())
    p.expect("]")
    if len(set(names)) != len(names):
        raise SyntaxError_("repeated channel name", start)
    gamma = {n: i for i, n in enumerate(names)}
    procs: list[Term] = []
    if p.tok.kind != "eof":
        procs.append(_resolve(p.process(), gamma, defs))
        while p.tok.text == ";":
            p.advance()
            procs.append(_resolve(p.process(), gamma, defs))
    p.end()
    return Program(defs, names, procs)


def show_configuration(c: Configuration, names: Mapping[int, str] | None = None) -> str:
    names = dict(names or {})
    for ch in sorted(c.channels):
        names.setdefault(ch, f"c{ch}")
    head = "[" + ", ".join(names[ch] for ch in sorted(c.channels)) + "]"
    if not c.procs:
        return head
    return head + " " + " ; ".join(show_term(p, names) for p in c.procs)


def show_definitions(defs: Mapping[str, Definition]) -> str:
    lines = []
    for n, d in defs.items():
        lines.append(f"{n} := {show_term(d.body, dict(enumerate(d.params)))}")
    return "\n".join(lines)
