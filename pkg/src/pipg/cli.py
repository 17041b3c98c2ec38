"""Command-line front end.

Exit codes: 0 success or ``Same``, 1 ``Differ`` or a trace violation,
2 usage or input errors, 3 inconclusive or budget exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Sequence

from . import behaviours as bh
from . import pi_syntax as px
from . import testing as ts
from . import traces as tr
from .presheaf import FormatError, Inconclusive as IsoInconclusive, Presheaf, load_presheaf

OK, DIFFER, USAGE, INCONCLUSIVE = 0, 1, 2, 3


class UsageError(Exception):
    pass


class BudgetError(Exception):
    pass


# ------------------------------------------------------------------ input


def _read(path: str) -> str:
    try:
        if path == "-":
            return sys.stdin.read()
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None


def load_program(path: str) -> px.Program:
    return px.parse_program(_read(path))


def _merge_defs(a: px.Definitions, b: px.Definitions) -> px.Definitions:
    out = px.Definitions(dict(a.items()))
    for name, d in b.items():
        if name in out and out[name] != d:
            raise UsageError(f"constant {name!r} is defined differently in the two inputs")
        out.add(name, d)
    return out


def _align(p: px.Program, names: list[str]) -> px.Configuration:
    """Rename ``p``'s channels onto the positions of ``names``."""
    if sorted(p.names) != sorted(names):
        raise UsageError(f"channel sets differ: [{', '.join(p.names)}] vs [{', '.join(names)}]")
    sigma = {i: names.index(n) for i, n in enumerate(p.names)}
    return px.Configuration(range(len(names)), [px.substitute(t, sigma) for t in p.procs])


def _tests(spec: str, prog: px.Program, defs: px.Definitions) -> tuple[list[px.Configuration], px.Definitions]:
    chans = range(len(prog.names))
    if spec.startswith("auto:"):
        try:
            depth = int(spec[5:])
        except ValueError:
            raise UsageError(f"bad battery depth in {spec!r}") from None
        if depth < 1:
            raise UsageError("battery depth must be at least 1")
        return [px.Configuration(chans, [t]) for t in ts.battery(list(chans), depth)], defs
    text = _read(spec)
    def_lines, proc_lines = [], []
    for line in text.splitlines():
        body = line.split("#", 1)[0]
        if body.strip():
            (def_lines if ":=" in body else proc_lines).append(body)
    tdefs = _merge_defs(defs, px.parse_definitions(def_lines, defs))
    tests = []
    for line in proc_lines:
        procs = [px.parse_process(part, prog.names, tdefs) for part in line.split(";")]
        tests.append(px.Configuration(chans, procs))
    if not tests:
        raise UsageError(f"{spec} contains no tests")
    return tests, tdefs


def _lts(kind: str, prog: px.Program, defs: px.Definitions | None = None):
    """The testing structure and root state for ``prog`` in the chosen LTS."""
    defs = prog.defs if defs is None else defs
    c = prog.config
    if kind == "conf":
        return ts.ConfStructure(defs), c
    m = bh.translate_config(c, defs)
    if kind == "m":
        return ts.MixedStructure(), m
    return ts.PositionedStructure(), bh.a_section(m)


def _budget(args) -> ts.Budget:
    return ts.Budget(max_states=args.cap, max_depth=getattr(args, "max_depth", None),
                     time_cap=getattr(args, "time_cap", None))


def _show_state(x, names: dict[int, str] | None = None) -> str:
    if isinstance(x, px.Configuration):
        return px.show_configuration(x, names)
    if isinstance(x, bh.PositionedBehaviour):
        x = bh.m_map(x)
    c, _ = bh.zeta_config(x)
    return px.show_configuration(c)


def _emit(obj) -> None:
    print(json.dumps(obj, indent=2, sort_keys=True))


# ------------------------------------------------------------- commands


def cmd_parse(args) -> int:
    prog = load_program(args.file)
    if prog.defs:
        print(px.show_definitions(prog.defs).rstrip("\n"))
    print(px.show_configuration(prog.config, prog.name_map()))
    if args.canonical:
        c, _ = px.canonicalize(prog.config)
        print(px.show_configuration(c))
    return OK


def cmd_step(args) -> int:
    prog = load_program(args.file)
    structure, root = _lts(args.lts, prog)
    g = structure.explore(root, ts.Budget(max_states=args.cap, max_depth=args.n))
    index = {k: i for i, k in enumerate(g.payload)}
    for k, i in index.items():
        print(f"[{i}] {_show_state(g.payload[k], prog.name_map() if i == 0 and args.lts == 'conf' else None)}")
        for lab, w in g.edges[k]:
            print(f"    --{lab}--> [{index[w]}]")
    print(f"# states={len(g.payload)} edges={g.edge_count()} complete={str(g.complete).lower()}")
    return OK


def cmd_translate(args) -> int:
    prog = load_program(args.file)
    m = bh.translate_config(prog.config, prog.defs)
    try:
        text = bh.dump_mixed(m, max_states=args.cap)
    except ValueError as exc:
        raise BudgetError(str(exc)) from None
    sys.stdout.write(text)
    return OK


def cmd_zeta(args) -> int:
    try:
        m = bh.load_mixed(_read(args.file))
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    c, env = bh.zeta_config(m)
    env.force()
    names = {ch: f"c{ch}" for ch in c.channels}
    if len(env):
        print(px.show_definitions(env).rstrip("\n"))
    print(px.show_configuration(c, names))
    return OK


def _load_trace(path: str) -> tr.Cospan:
    return tr.load_cospan(_read(path))


def cmd_trace(args) -> int:
    if args.action == "compose":
        if len(args.files) < 2:
            raise UsageError("compose needs at least two traces")
        try:
            c = tr.compose_all(_load_trace(f) for f in args.files)
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        sys.stdout.write(tr.dump_cospan(c))
        return OK
    if len(args.files) != 1:
        raise UsageError(f"trace {args.action} takes one file")
    c = _load_trace(args.files[0])
    verdict = tr.check_trace(c)
    if args.action == "check":
        print(verdict)
        return OK if verdict else DIFFER
    if not verdict:
        print(verdict)
        return DIFFER
    actions = tr.sequentialize(c)
    if args.action == "seq":
        for k, act in enumerate(actions):
            print(f"{k}: {act.label.tag} core={act.core[1]}")
        return OK
    for y in sorted(c.final.agents(), key=lambda e: (e[0].params, e[1])):
        word, origin = tr.view_of(c, y, actions)
        print(f"{y[0].tag}#{y[1]} from {origin[0].tag}#{origin[1]}: {' '.join(b.tag for b in word) or '-'}")
    return OK


# ----------------------------------------------------------------- dot


def _dot_id(e) -> str:
    return f"{e[0].kind}_{'_'.join(map(str, e[0].params))}_{e[1]}".replace("__", "_")


def _dot_label(e) -> str:
    if e[0].kind == "star":
        return f"c{e[1]}"
    return f"{e[0].tag}#{e[1]}"


_SHAPE = {0: "ellipse", 1: "box", 2: "diamond"}


def emit_dot_causal(u: Presheaf) -> str:
    """The causal graph: channels as ellipses, agents as boxes, cores as
    diamonds; edges point from later to earlier elements."""
    g = tr.causal_graph(u)
    lines = ["digraph causal {", "  node [fontname=\"Helvetica\"];"]
    for v in sorted(g.colour, key=tr._order):
        lines.append(f"  {_dot_id(v)} [shape={_SHAPE[g.colour[v]]}, label=\"{_dot_label(v)}\"];")
    for a, b in sorted(g.edges, key=lambda e: (tr._order(e[0]), tr._order(e[1]))):
        lines.append(f"  {_dot_id(a)} -> {_dot_id(b)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _layers(g: tr.CausalGraph) -> dict:
    """Longest distance to an earliest element, along the causal edges."""
    adj = g.adjacency()
    depth: dict = {}
    for root in sorted(adj, key=tr._order):
        if root in depth:
            continue
        stack = [(root, False)]
        while stack:
            v, done = stack.pop()
            if done:
                depth[v] = max((depth[w] + 1 for w in adj[v]), default=0)
            elif v not in depth:
                stack.append((v, True))
                stack.extend((w, False) for w in adj[v] if w not in depth)
    return depth


def emit_dot_diagram(c: tr.Cospan) -> str:
    """The trace's middle laid out in layers, earliest at the bottom;
    initial and final elements are marked."""
    u = c.middle
    g = tr.causal_graph(u)
    if g.find_cycle() is not None:
        raise ValueError("causal graph has a cycle")
    layer = _layers(g)
    first = set(c.t.image())
    last = set(c.s.image())
    lines = ["digraph trace {", "  rankdir=BT;", "  node [fontname=\"Helvetica\"];"]
    by_layer: dict[int, list] = {}
    for v in sorted(g.colour, key=tr._order):
        by_layer.setdefault(layer[v], []).append(v)
        style = []
        if v in first:
            style.append("bold")
        if v in last:
            style.append("filled")
        extra = f", style=\"{','.join(style)}\"" if style else ""
        lines.append(f"  {_dot_id(v)} [shape={_SHAPE[g.colour[v]]}, label=\"{_dot_label(v)}\"{extra}];")
    for k in sorted(by_layer):
        lines.append(f"  {{ rank=same; {' '.join(_dot_id(v) for v in by_layer[k])} }}")
    for a, b in sorted(g.edges, key=lambda e: (tr._order(e[0]), tr._order(e[1]))):
        lines.append(f"  {_dot_id(b)} -> {_dot_id(a)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def cmd_dot(args) -> int:
    text = _read(args.file)
    if "SECTION" in text:
        c = tr.load_cospan(text)
    else:
        c = tr.identity_cospan(load_presheaf(text))
    if args.kind == "causal":
        sys.stdout.write(emit_dot_causal(c.middle))
    else:
        try:
            sys.stdout.write(emit_dot_diagram(c))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
    return OK


# ------------------------------------------------------------- testing


def _report(pole: str, complete: bool, verdict: str, witness: Sequence[str], states: int, edges: int,
            budget_used: int, **extra) -> dict:
    out = {"pole": pole, "complete": complete, "verdict": verdict, "witness-path": list(witness),
           "states": states, "edges": edges, "budget-used": budget_used}
    out.update(extra)
    return out


def cmd_fairtest(args) -> int:
    px_prog = load_program(args.left)
    py_prog = load_program(args.right)
    defs = _merge_defs(px_prog.defs, py_prog.defs)
    x = px_prog.config
    y = _align(py_prog, px_prog.names)
    tests, defs = _tests(args.tests, px_prog, defs)
    structure = ts.ConfStructure(defs)
    try:
        res = ts.fair_testing_compare(x, y, tests, args.pole, _budget(args), structure, jobs=args.jobs)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    names = px_prog.name_map()
    if isinstance(res, ts.Same):
        _emit(_report(args.pole, True, "Same", [], res.states, res.edges, res.states, tests=len(tests)))
        return OK
    if isinstance(res, ts.Differ):
        shown = " ; ".join(px.show_term(p, names) for p in res.test.procs)
        _emit(_report(args.pole, True, "Differ", res.witness, res.states, res.edges, res.states,
                      tests=len(tests), test=shown, side=res.side))
        return DIFFER
    _emit(_report(args.pole, False, "Inconclusive", [], res.states, res.edges, res.states,
                  tests=len(tests), reason=res.reason))
    return INCONCLUSIVE


def cmd_bbot(args) -> int:
    prog = load_program(args.file)
    structure, root = _lts(args.lts, prog)
    g = structure.explore(root, _budget(args))
    r = ts.pole_membership(g, g.root, args.pole)
    verdict = {True: "pass", False: "fail", None: "inconclusive"}[r.member]
    _emit(_report(args.pole, g.complete, verdict, r.witness, len(g.payload), g.edge_count(), g.budget_used))
    return {True: OK, False: DIFFER, None: INCONCLUSIVE}[r.member]


def cmd_bisim(args) -> int:
    if args.expansion or args.mode == "expansion":
        return _bisim_expansion(args)
    if len(args.files) != 2:
        raise UsageError("bisim needs two process files")
    p1, p2 = (load_program(f) for f in args.files)
    s1, r1 = _lts(args.lts, p1)
    s2, r2 = _lts(args.lts, p2)
    if args.depth is not None:
        if args.mode != "strong":
            raise UsageError("--depth applies to strong and expansion modes only")
        play = ts.bounded_bisim(r1, r2, s1.successors, s2.successors,
                                lambda s: s1.key(s)[0], lambda s: s2.key(s)[0], args.depth)
        _emit({"mode": "strong", "depth": args.depth, "verdict": play is None, "play": list(play or ())})
        return OK if play is None else DIFFER
    g1, g2 = s1.explore(r1, _budget(args)), s2.explore(r2, _budget(args))
    if not (g1.complete and g2.complete):
        _emit({"mode": args.mode, "complete": False, "verdict": None})
        return INCONCLUSIVE
    check = ts.strong_bisim_check if args.mode == "strong" else ts.weak_bisim_check
    ok = check(g1, g1.root, g2, g2.root)
    _emit({"mode": args.mode, "complete": True, "verdict": ok,
           "states": len(g1.payload) + len(g2.payload), "edges": g1.edge_count() + g2.edge_count()})
    return OK if ok else DIFFER


def _bisim_expansion(args) -> int:
    src = args.expansion or (args.files[0] if args.files else None)
    if src is None:
        raise UsageError("expansion mode needs a process file")
    prog = load_program(src)
    c = prog.config
    if args.against in (None, "auto"):
        m = bh.translate_config(c, prog.defs)
    else:
        try:
            m = bh.load_mixed(_read(args.against))
        except ValueError as exc:
            raise UsageError(str(exc)) from None
        if m.channels != c.channels:
            raise UsageError("behaviour and configuration have different channel sets")
    depth = 6 if args.depth is None else args.depth
    try:
        res = ts.expansion_check(c, m, depth, prog.defs)
    except RuntimeError as exc:
        raise BudgetError(str(exc)) from None
    _emit({"mode": "expansion", "depth": depth, "verdict": res.holds, "play": list(res.play)})
    return OK if res.holds else DIFFER


# -------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pipg", description="pi-calculus configurations, traces, behaviours and testing")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("parse", help="parse a .pi file and print it back")
    p.add_argument("file")
    p.add_argument("--canonical", action="store_true", help="also print the canonical form")
    p.set_defaults(func=cmd_parse)

    def lts_flags(p, default_cap=20_000):
        p.add_argument("--lts", choices=("conf", "m", "s"), default="conf")
        p.add_argument("--cap", type=_positive, default=default_cap, help="maximum number of explored states")

    p = sub.add_parser("step", help="explore the transition system")
    p.add_argument("file")
    p.add_argument("-n", type=_positive, default=1, help="exploration depth")
    lts_flags(p, 1000)
    p.set_defaults(func=cmd_step)

    p = sub.add_parser("translate", help="translate a configuration into a mixed behaviour")
    p.add_argument("file")
    p.add_argument("--cap", type=_positive, default=10_000)
    p.set_defaults(func=cmd_translate)

    p = sub.add_parser("zeta", help="back-translate a mixed behaviour file into a configuration")
    p.add_argument("file")
    p.set_defaults(func=cmd_zeta)

    p = sub.add_parser("trace", help="check, sequentialise, view or compose traces")
    p.add_argument("action", choices=("check", "seq", "views", "compose"))
    p.add_argument("files", nargs="+")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("dot", help="emit DOT for a trace or presheaf")
    p.add_argument("kind", choices=("causal", "diagram"))
    p.add_argument("file")
    p.set_defaults(func=cmd_dot)

    p = sub.add_parser("fairtest", help="compare two configurations over a test battery")
    p.add_argument("left")
    p.add_argument("right")
    p.add_argument("--pole", choices=ts.POLES, default="fair")
    p.add_argument("--tests", default="auto:2", help="FILE or auto:DEPTH")
    p.add_argument("--cap", type=_positive, default=20_000)
    p.add_argument("--jobs", type=_positive, default=1)
    p.set_defaults(func=cmd_fairtest)

    p = sub.add_parser("bisim", help="strong, weak or expansion checks")
    p.add_argument("files", nargs="*")
    p.add_argument("--mode", choices=("weak", "strong", "expansion"), default="weak")
    p.add_argument("--depth", type=_natural, default=None)
    p.add_argument("--expansion", metavar="FILE", help="configuration for the expansion game")
    p.add_argument("--against", default=None, help="'auto' (the translation) or a mixed behaviour file")
    lts_flags(p)
    p.set_defaults(func=cmd_bisim)

    p = sub.add_parser("bbot", help="pole membership of a single configuration")
    p.add_argument("file")
    p.add_argument("--pole", choices=ts.POLES, default="fair")
    lts_flags(p)
    p.set_defaults(func=cmd_bbot)
    return ap


def _positive(text: str) -> int:
    v = _natural(text)
    if v == 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def _natural(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def run(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return USAGE if exc.code not in (0, None) else OK
    try:
        return args.func(args)
    except (UsageError, px.SyntaxError_, px.UnboundName, px.GuardednessError, FormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except (BudgetError, IsoInconclusive) as exc:
        print(f"inconclusive: {exc}", file=sys.stderr)
        return INCONCLUSIVE
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
