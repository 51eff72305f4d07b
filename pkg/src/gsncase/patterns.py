"""Pattern instantiation: role binding, multiplicity expansion, choice and
optional-link resolution, plus the instantiation-completeness report.

Expansion order is fixed so that identical inputs always yield identical
instances:

1. choice groups and optional links are resolved, and elements that lose
   their last incoming link are pruned;
2. multiplicity links are expanded outermost first; the target subtree of a
   link with count ``k`` is copied ``k`` times with ids suffixed ``_1.._k``;
3. placeholders are substituted, the innermost copy index selecting any
   indexed binding.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

from . import lexer
from .diagnostics import Diagnostic, DiagnosticError, error, has_errors
from .lexer import IDENT, NUMBER, STRING, TokenStream
from .model import (
    ArgumentGraph,
    AssuranceClaimPoint,
    ChoiceMember,
    Edge,
    EdgeKind,
    EdgeRef,
    Multiplicity,
    NodeKind,
    OptionalLink,
    placeholder_spans,
    placeholders,
    substitute,
)
from .validator import validate_graph


class InstantiationError(ValueError):
    def __init__(self, message: str, diagnostics: list[Diagnostic] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or []


class UnboundRoleError(InstantiationError):
    def __init__(self, roles: list[str]):
        self.roles = roles
        super().__init__("unbound role(s): " + ", ".join(f'"{r}"' for r in roles))


class CardinalityError(InstantiationError):
    pass


class EmptyBindingError(InstantiationError):
    pass


class EdgeKey(NamedTuple):
    """An edge reference in a binding; ``kind`` None matches either kind."""

    source: str
    target: str
    kind: EdgeKind | None = None

    def __str__(self) -> str:
        text = f"{self.source} -> {self.target}"
        return f"{text} : {self.kind.value}" if self.kind else text


@dataclass
class BindingSet:
    roles: dict[str, str] = field(default_factory=dict)
    counts: dict[EdgeKey, int] = field(default_factory=dict)
    choices: dict[str, tuple[str, ...]] = field(default_factory=dict)
    inclusions: dict[EdgeKey, bool] = field(default_factory=dict)
    indexed: dict[tuple[str, int], str] = field(default_factory=dict)

    def check_texts(self) -> None:
        for label, text in [(f'"{r}"', t) for r, t in self.roles.items()] + [
            (f'"{r}"[{i}]', t) for (r, i), t in self.indexed.items()
        ]:
            if not text.strip():
                raise EmptyBindingError(f"role {label} is bound to an empty string")
            if "{" in text or "}" in text:
                raise InstantiationError(f"binding for role {label} contains placeholder braces")


@dataclass(frozen=True)
class InstantiationReport:
    remaining_placeholders: tuple[tuple[str, str], ...] = ()
    remaining_undeveloped: tuple[str, ...] = ()

    @property
    def fully_instantiated(self) -> bool:
        return not self.remaining_placeholders

    def summary(self) -> str:
        return (
            f"placeholders remaining: {len(self.remaining_placeholders)}\n"
            f"undeveloped remaining: {len(self.remaining_undeveloped)}\n"
            f"fully instantiated: {'yes' if self.fully_instantiated else 'no'}"
        )


class Instantiation(NamedTuple):
    graph: ArgumentGraph
    report: InstantiationReport


def completeness(instance: ArgumentGraph) -> InstantiationReport:
    remaining = []
    for n in instance.nodes:
        for role in placeholders(n):
            remaining.append((n.id, role))
    undeveloped = tuple(n.id for n in instance.nodes if n.undeveloped)
    return InstantiationReport(tuple(remaining), undeveloped)


def _lookup(mapping: dict, ref: EdgeRef, used: set):
    for key in (EdgeKey(ref.source, ref.target, ref.kind), EdgeKey(ref.source, ref.target)):
        if key in mapping:
            used.add(key)
            return mapping[key]
    return None


class _Work:
    """Mutable working copy of a graph during instantiation."""

    def __init__(self, pattern: ArgumentGraph):
        self.nodes = list(pattern.nodes)
        self.edges = list(pattern.edges)
        self.acps = list(pattern.acps)
        self.origin = {n.id: n.id for n in pattern.nodes}
        self.path: dict[str, tuple[int, ...]] = {n.id: () for n in pattern.nodes}

    def ids(self) -> set[str]:
        return {n.id for n in self.nodes}

    def remove_edges(self, doomed: list[Edge]) -> None:
        """Drop ``doomed`` and prune elements left without an incoming link."""
        queue = list(doomed)
        gone_nodes: set[str] = set()
        while queue:
            refs = {e.ref for e in queue}
            self.edges = [e for e in self.edges if e.ref not in refs]
            targets = [e.target for e in queue]
            queue = []
            incoming = {e.target for e in self.edges}
            for t in targets:
                if t in self.path and t not in incoming and t not in gone_nodes:
                    gone_nodes.add(t)
                    queue.extend(e for e in self.edges if e.source == t)
        if gone_nodes:
            self.nodes = [n for n in self.nodes if n.id not in gone_nodes]
            for nid in gone_nodes:
                del self.origin[nid]
                del self.path[nid]
        live = {e.ref for e in self.edges}
        self.acps = [a for a in self.acps if a.edge in live]

    def subtree(self, root: str) -> list[str]:
        out: dict[str, list[str]] = {}
        for e in self.edges:
            out.setdefault(e.source, []).append(e.target)
        seen = {root}
        stack = [root]
        while stack:
            for w in out.get(stack.pop(), []):
                if w in self.path and w not in seen:
                    seen.add(w)
                    stack.append(w)
        return [n.id for n in self.nodes if n.id in seen]


def _resolve_choices(work: _Work, pattern: ArgumentGraph, b: BindingSet) -> None:
    doomed: list[Edge] = []
    keep: set[EdgeRef] = set()
    for g in pattern.choice_groups:
        members = pattern.choice_members(g.group)
        if g.group not in b.choices:
            raise CardinalityError(f"choice group {g.group} needs a selection of {g.min}..{g.max}")
        chosen = b.choices[g.group]
        targets = [e.target for e in members]
        unknown = [c for c in chosen if c not in targets]
        if unknown:
            raise CardinalityError(f"choice group {g.group} has no member {', '.join(unknown)}")
        if len(set(chosen)) != len(chosen) or not g.min <= len(chosen) <= g.max:
            raise CardinalityError(
                f"choice group {g.group} selects {len(set(chosen))} but allows {g.min}..{g.max}"
            )
        for e in members:
            (keep.add(e.ref) if e.target in chosen else doomed.append(e))
    unknown_groups = sorted(set(b.choices) - {g.group for g in pattern.choice_groups})
    if unknown_groups:
        raise InstantiationError(f"no choice group named {', '.join(unknown_groups)}")

    used: set = set()
    for e in pattern.edges:
        if isinstance(e.decoration, OptionalLink):
            if _lookup(b.inclusions, e.ref, used):
                keep.add(e.ref)
            else:
                doomed.append(e)
    stray = [str(k) for k in b.inclusions if k not in used]
    if stray:
        raise InstantiationError(f"include given for non-optional link(s): {', '.join(stray)}")

    work.edges = [replace(e, decoration=None) if e.ref in keep else e for e in work.edges]
    work.remove_edges(doomed)


def _next_multiplicity(work: _Work) -> Edge | None:
    mult = [e for e in work.edges if isinstance(e.decoration, Multiplicity)]
    if not mult:
        return None
    inner: set[str] = set()
    for e in mult:
        inner.update(work.subtree(e.target))
    for e in mult:
        if e.source not in inner:
            return e
    return mult[0]


def _default_count(m: Multiplicity) -> int:
    k = max(m.min, 1)
    return k if m.max is None or k <= m.max else m.max


def _expand(work: _Work, e: Edge, b: BindingSet, used: set) -> None:
    m = e.decoration
    k = _lookup(b.counts, e.ref, used)
    if k is None:
        origin_ref = EdgeRef(work.origin[e.source], work.origin[e.target], e.kind)
        k = _lookup(b.counts, origin_ref, used)
    if k is None:
        k = _default_count(m)
    if not m.allows(k):
        raise CardinalityError(f"count {k} for {e.ref} is outside {m}")

    members = work.subtree(e.target)
    member_set = set(members)
    existing = work.ids()
    new_nodes = []
    new_edges = []
    new_acps = []
    internal = [x for x in work.edges if x.source in member_set]
    for i in range(1, k + 1):
        rename = {nid: f"{nid}_{i}" for nid in members}
        for nid in members:
            if rename[nid] in existing:
                raise InstantiationError(f"replicated id {rename[nid]} collides with an existing node")
            existing.add(rename[nid])
        for node in work.nodes:
            if node.id in member_set:
                new_nodes.append(replace(node, id=rename[node.id]))
                work.origin[rename[node.id]] = work.origin[node.id]
                work.path[rename[node.id]] = work.path[node.id] + (i,)
        new_edges.append(replace(e, target=rename[e.target], decoration=None))
        for x in internal:
            new_edges.append(replace(x, source=rename[x.source], target=rename.get(x.target, x.target)))
        for a in work.acps:
            if a.edge == e.ref or a.edge.source in member_set:
                mapped = EdgeRef(rename.get(a.edge.source, a.edge.source), rename.get(a.edge.target, a.edge.target), a.edge.kind)
                if f"{a.id}_{i}" in {x.id for x in work.acps}:
                    raise InstantiationError(f"replicated ACP id {a.id}_{i} collides with an existing ACP")
                new_acps.append(replace(a, id=f"{a.id}_{i}", edge=mapped))

    at = next(j for j, n in enumerate(work.nodes) if n.id == e.target)
    work.nodes[at:at] = new_nodes
    at = next(j for j, x in enumerate(work.edges) if x.ref == e.ref)
    work.edges[at + 1 : at + 1] = new_edges
    work.acps.extend(new_acps)
    work.remove_edges([e])


def instantiate(
    pattern: ArgumentGraph,
    bindings: BindingSet | None = None,
    *,
    partial: bool = False,
    module_name: str | None = None,
) -> Instantiation:
    """Turn ``pattern`` into a concrete argument.

    With ``partial`` set, roles without a binding are left in place (and
    reported) instead of raising :class:`UnboundRoleError`.
    """
    b = bindings or BindingSet()
    b.check_texts()
    pre = [d for d in validate_graph(pattern) if d.is_error]
    if pre:
        raise InstantiationError(f"pattern {pattern.module_name} does not validate", pre)

    work = _Work(pattern)
    _resolve_choices(work, pattern, b)

    used: set = set()
    while (e := _next_multiplicity(work)) is not None:
        _expand(work, e, b, used)
    stray = [str(k) for k in b.counts if k not in used]
    if stray:
        raise InstantiationError(f"count given for link(s) without multiplicity: {', '.join(stray)}")

    unbound: list[str] = []
    nodes = []
    for node in work.nodes:
        spans = placeholder_spans(node.statement)
        if not spans:
            nodes.append(node)
            continue
        path = work.path[node.id]

        def lookup(role: str, path=path):
            if path and (role, path[-1]) in b.indexed:
                return b.indexed[(role, path[-1])]
            value = b.roles.get(role)
            if value is None and role not in unbound:
                unbound.append(role)
            return value

        text = substitute(node.statement, lookup)
        left = placeholder_spans(text)
        nodes.append(replace(node, statement=text, uninstantiated=node.uninstantiated and bool(left)))
    if unbound and not partial:
        raise UnboundRoleError(unbound)

    ids = {n.id for n in nodes}
    graph = ArgumentGraph(
        module_name or pattern.module_name,
        tuple(nodes),
        tuple(work.edges),
        (),
        tuple(work.acps),
        tuple(p for p in pattern.public_ids if p in ids),
        span=pattern.span,
        comments=pattern.comments,
        tail_comments=pattern.tail_comments,
    )
    post = [d for d in validate_graph(graph) if d.is_error]
    if post:
        raise InstantiationError("bindings produce an ill-formed instance", post)
    return Instantiation(graph, completeness(graph))


# -- bindings file ---------------------------------------------------------------


class BindingsError(DiagnosticError):
    pass


def _parse_edge_key(ts: TokenStream, fail) -> EdgeKey:
    src = ts.next()
    if src.kind != IDENT:
        fail(src, "expected edge source")
    if not ts.next().is_symbol("->"):
        fail(ts.last, "expected '->'")
    tgt = ts.next()
    if tgt.kind != IDENT:
        fail(tgt, "expected edge target")
    kind = None
    if ts.peek().is_symbol(":"):
        ts.next()
        k = ts.next()
        if not k.is_word("supported_by", "in_context_of"):
            fail(k, "expected edge kind")
        kind = EdgeKind(k.value)
    return EdgeKey(src.value, tgt.value, kind)


def parse_bindings(text: str, file: str = "<bindings>") -> BindingSet:
    """Read the flat ``role``/``count``/``choose``/``include`` bindings format."""
    tokens, diags = lexer.tokenize(text, file, "B001")
    ts = TokenStream(tokens)
    b = BindingSet()

    class _Bad(Exception):
        pass

    def fail(tok, msg):
        diags.append(error("B002", f"{msg}, found {tok}", tok.span(file)))
        raise _Bad

    def expect_eq():
        tok = ts.next()
        if not tok.is_symbol("="):
            fail(tok, "expected '='")

    while not ts.at_eof():
        head = ts.next()
        try:
            if head.is_word("role"):
                name = ts.next()
                if name.kind != STRING:
                    fail(name, "expected quoted role name")
                index = None
                if ts.peek().is_symbol("["):
                    ts.next()
                    num = ts.next()
                    if num.kind != NUMBER or not num.value.isdigit() or int(num.value) < 1:
                        fail(num, "expected positive index")
                    index = int(num.value)
                    if not ts.next().is_symbol("]"):
                        fail(ts.last, "expected ']'")
                expect_eq()
                value = ts.next()
                if value.kind != STRING:
                    fail(value, "expected quoted text")
                if index is None:
                    b.roles[name.value] = value.value
                else:
                    b.indexed[(name.value, index)] = value.value
            elif head.is_word("count"):
                key = _parse_edge_key(ts, fail)
                expect_eq()
                num = ts.next()
                if num.kind != NUMBER or not num.value.isdigit():
                    fail(num, "expected a count")
                b.counts[key] = int(num.value)
            elif head.is_word("choose"):
                group = ts.next()
                if group.kind != IDENT:
                    fail(group, "expected choice group")
                expect_eq()
                picks = []
                while True:
                    tok = ts.next()
                    if tok.kind != IDENT:
                        fail(tok, "expected member id")
                    picks.append(tok.value)
                    if not ts.peek().is_symbol(","):
                        break
                    ts.next()
                b.choices[group.value] = tuple(picks)
            elif head.is_word("include"):
                key = _parse_edge_key(ts, fail)
                expect_eq()
                flag = ts.next()
                if not flag.is_word("true", "false"):
                    fail(flag, "expected true or false")
                b.inclusions[key] = flag.value == "true"
            else:
                fail(head, "expected role, count, choose or include")
        except _Bad:
            while not ts.at_eof() and not ts.peek().is_word("role", "count", "choose", "include"):
                ts.next()
    if has_errors(diags):
        raise BindingsError(diags)
    return b


def load_bindings(path) -> BindingSet:
    p = Path(path)
    return parse_bindings(p.read_bytes().decode("utf-8"), str(path))


__all__ = [
    "BindingSet",
    "BindingsError",
    "CardinalityError",
    "EdgeKey",
    "EmptyBindingError",
    "Instantiation",
    "InstantiationError",
    "InstantiationReport",
    "UnboundRoleError",
    "completeness",
    "instantiate",
    "load_bindings",
    "parse_bindings",
]
