"""Seeded random generators shared by the test modules.

``PIPG_SEED`` fixes the base seed; every generator takes its own
``random.Random`` so suites stay independent of each other.
"""

from __future__ import annotations

import os
import random

from pipg import behaviours as bh
from pipg import pi_syntax as px
from pipg import traces as tr
from pipg.presheaf import Obj, fork, nu, pil, pir, position, tau, tick

BASE_SEED = int(os.environ.get("PIPG_SEED", "20240607"))


def rng(salt: str) -> random.Random:
    return random.Random(f"{BASE_SEED}:{salt}")


# ----------------------------------------------------------------- terms


def random_process_text(r: random.Random, names: list[str], depth: int, allow_par: bool = True,
                        consts: tuple[str, ...] = ()) -> str:
    """Concrete syntax of a random process over ``names``."""
    if depth <= 0 or r.random() < 0.15:
        if consts and r.random() < 0.3:
            return r.choice(consts)
        return "0"
    if allow_par and r.random() < 0.2:
        return "(" + random_process_text(r, names, depth - 1, allow_par, consts) + " | " \
            + random_process_text(r, names, depth - 1, allow_par, consts) + ")"
    k = 1 if r.random() < 0.7 else 2
    branches = []
    for _ in range(k):
        g, inner = _random_guard(r, names)
        body = random_process_text(r, inner, depth - 1, allow_par, consts)
        branches.append(f"{g}.({body})")
    return " + ".join(branches)


def _random_guard(r: random.Random, names: list[str]) -> tuple[str, list[str]]:
    kind = r.choice(["tau", "tick", "new", "in", "out", "out"] if names else ["tau", "tick", "new"])
    fresh = f"v{len(names)}"
    if kind in ("tau", "tick"):
        return kind, names
    if kind == "new":
        return f"new {fresh}", names + [fresh]
    a = r.choice(names)
    if kind == "in":
        return f"{a}({fresh})", names + [fresh]
    return f"{a}<{r.choice(names)}>", names


def random_config(r: random.Random, nchan: int = 2, nproc: int = 2, depth: int = 3,
                  allow_par: bool = True) -> px.Configuration:
    names = [f"c{i}" for i in range(nchan)]
    procs = [px.parse_process(random_process_text(r, names, depth, allow_par), names) for _ in range(nproc)]
    return px.Configuration(range(nchan), procs)


# ---------------------------------------------------------- positions


def random_position(r: random.Random, max_agents: int = 3, max_channels: int = 4):
    nch = r.randint(1, max_channels)
    agents = []
    for i in range(r.randint(1, max_agents)):
        arity = r.randint(0, min(nch, 3))
        agents.append((i, tuple(r.choice(range(nch)) for _ in range(arity))))
    return position(range(nch), agents)


ALL_SHAPES = ("tau", "tick", "fork", "nu", "pil", "pir", "iota", "out", "sync")


def random_action(r: random.Random, x, shapes=ALL_SHAPES) -> tr.Action | None:
    """A random action from ``x`` of one of the given shapes, if any fits."""
    agents = sorted(x.agents(), key=lambda e: (e[1], e[0].params))
    options = []
    for a in agents:
        n = a[0].params[0]
        for kind in shapes:
            if kind in ("tau", "tick", "fork", "nu", "pil", "pir"):
                options.append((Obj(kind, (n,)), (a,)))
            elif kind == "iota":
                options.extend((Obj("iota", (n, i)), (a,)) for i in range(1, n + 1))
            elif kind == "out":
                options.extend((Obj("out", (n, i, j)), (a,)) for i in range(1, n + 1) for j in range(1, n + 1))
    if "sync" in shapes:
        for recv in agents:
            n, rch = recv[0].params[0], x.agent_channels(recv)
            for snd in agents:
                if snd == recv:
                    continue
                m, sch = snd[0].params[0], x.agent_channels(snd)
                for a in range(1, n + 1):
                    for c in range(1, m + 1):
                        if rch[a - 1] == sch[c - 1]:
                            options.extend((Obj("sync", (n, a, m, c, d)), (recv, snd)) for d in range(1, m + 1))
    if not options:
        return None
    label, actors = r.choice(options)
    return tr.action_from(x, label, actors)


def random_composite(r: random.Random, length: int, shapes=ALL_SHAPES, max_agents: int = 3,
                     max_channels: int = 4) -> tuple[tr.Cospan, list[tr.Action]]:
    x = random_position(r, max_agents, max_channels)
    acts: list[tr.Action] = []
    cur = x
    for _ in range(length):
        a = random_action(r, cur, shapes)
        if a is None:
            break
        acts.append(a)
        cur = a.cospan.final
    if not acts:
        return tr.identity_cospan(x), []
    return tr.compose_all(a.cospan for a in acts), acts


# ---------------------------------------------------------- behaviours


def random_system(r: random.Random, nstates: int = 4, max_arity: int = 2) -> bh.BehaviourSystem:
    """A random closed behaviour system whose states cover arities 0..max_arity+1."""
    sysm = bh.BehaviourSystem()
    names_by_arity: dict[int, list[str]] = {}
    k = 0
    for n in range(max_arity + 2):
        for _ in range(nstates):
            name = f"q{k}"
            k += 1
            sysm.add(name, n)
            names_by_arity.setdefault(n, []).append(name)
    for n in range(max_arity + 1):
        for name in names_by_arity[n]:
            labels = [tau(n), tick(n), pil(n), pir(n), nu(n)]
            labels += [Obj("iota", (n, a)) for a in range(1, n + 1)]
            labels += [Obj("out", (n, a, b)) for a in range(1, n + 1) for b in range(1, n + 1)]
            for lab in r.sample(labels, k=min(len(labels), r.randint(0, 3))):
                tgt = bh.target_arity(lab)
                sysm.set_row(name, lab, [r.choice(names_by_arity[tgt]) for _ in range(r.randint(1, 2))])
    return sysm


def random_mixed(r: random.Random, nchan: int = 3, nitems: int = 2, max_arity: int = 2,
                 system: bh.BehaviourSystem | None = None) -> bh.MixedBehaviour:
    system = system or random_system(r, max_arity=max_arity)
    by_arity: dict[int, list[str]] = {}
    for name in system.names():
        by_arity.setdefault(system.state(name).arity, []).append(name)
    items = []
    for _ in range(nitems):
        n = r.randint(0, max_arity)
        st = system.state(r.choice(by_arity[n]))
        items.append((n, st, tuple(r.randrange(nchan) for _ in range(n))))
    return bh.MixedBehaviour(range(nchan), items)


def random_pb(r: random.Random, nchan: int = 2, nitems: int = 2, max_arity: int = 2) -> bh.PositionedBehaviour:
    return bh.a_section(random_mixed(r, nchan, nitems, max_arity))


# ------------------------------------------------------------- corpus

# configurations used by the expansion and correspondence suites
CORPUS = {
    "coffee-two-inputs": "[a, b, c] a(x).b(y).0 + a(x).c(y).0",
    "coffee-one-input": "[a, b, c] a(x).(b(y).0 + c(y).0)",
    "tau-loop-beside-input": "X := tau.X\n[a] X ; a(x).0",
    "input-alone": "[a] a(x).0",
    "disable-a-first": "[a, b] tau.(tau.(tau.0 + b(x).0) + a(x).0) + tau.0",
    "disable-b-first": "[a, b] tau.(tau.(tau.0 + a(x).0) + b(x).0) + tau.0",
    "must-test": "[a] a<a>.tick.0",
    "fork-exerciser": "[a] (tick.0 | tau.0) | a<a>.0",
    "nested-fork": "[a, b] ((a<b>.0 | b(x).0) | tick.0)",
    "nu-exerciser": "[a] new x.(a<x>.0 | x(y).tick.0) ; a(z).z<z>.0",
    "nu-twice": "[] new x.new y.(x<y>.0 | x(z).z<z>.0)",
    "sync-exerciser": "[a, b] a<b>.0 ; a(x).x<x>.0",
    "sync-choice": "[a, b] a(x).0 + b(y).0 ; a<b>.0 + b<a>.0 ; tau.0",
    "mobility": "[a, b] a(x).x<b>.0 ; new y.a<y>.y(z).tick.0",
    "recursive-reader": "X := a(x).X\n[a] X ; a<a>.a<a>.0",
    "recursive-creator": "Y := new z.(tau.Y | z<z>.0)\n[a] Y",
    "ticker": "T := tick.T + tau.0\n[] T",
    "echo-server": "E := a(x).x<x>.E\n[a, b] E ; a<b>.b(y).tick.0",
    "choice-tick": "[a] a<a>.tick.0 + tau.0 ; a(x).0",
    "empty": "[a, b]",
    "dead-sum": "[a] tau.0 + tick.0 + a<a>.0",
    "race": "[a] a(x).tick.0 ; a(y).0 ; a<a>.0",
}


def corpus_program(key: str) -> px.Program:
    return px.parse_program(CORPUS[key])


# ------------------------------------------------------ example traces


def relay_trace() -> tuple[tr.Cospan, dict]:
    """Channels a, b, c and agents x(a, b), y(b), z(a, c): x sends a on b to
    y, then z sends c on a to y's avatar, which learnt a in the first step."""
    x0 = position([0, 1, 2], [(0, (0, 1)), (1, (1,)), (2, (0, 2))])
    binaries = sorted((e for e in x0.agents() if e[0].params == (2,)), key=lambda e: e[1])
    x, z = binaries
    y, = [e for e in x0.agents() if e[0].params == (1,)]
    first = tr.action_from(x0, Obj("sync", (1, 1, 2, 2, 1)), (y, x))
    y1, = [e for e in first.cospan.final.agents() if e[0].params == (2,) and first.branches[e][1] == y]
    second = tr.action_from(first.cospan.final, Obj("sync", (2, 2, 2, 1, 2)), (y1, z))
    return tr.compose_all([first.cospan, second.cospan]), {"x": x, "y": y, "z": z, "first": first, "second": second}
