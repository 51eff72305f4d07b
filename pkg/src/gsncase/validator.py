"""Well-formedness rules V001-V012 for GSN modules."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from .diagnostics import Diagnostic, Severity, error, sort_diagnostics, warning
from .dsl import Document
from .model import (
    CONTEXT_KINDS,
    ArgumentGraph,
    ChoiceMember,
    EdgeKind,
    MalformedPlaceholderError,
    Node,
    NodeKind,
    is_qualified,
    placeholder_spans,
    root_elements,
)


@dataclass(frozen=True)
class RuleCode:
    code: str
    description: str
    severity: Severity


RULES = {
    r.code: r
    for r in (
        RuleCode("V001", "SupportedBy source must be a Goal or Strategy", Severity.ERROR),
        RuleCode("V002", "SupportedBy target must be a Goal, Strategy, Solution, ModuleRef or AwayGoal", Severity.ERROR),
        RuleCode("V003", "InContextOf must link a Goal or Strategy to a Context, Assumption or Justification", Severity.ERROR),
        RuleCode("V004", "SupportedBy links must not form a cycle", Severity.ERROR),
        RuleCode("V005", "Solutions have no outgoing SupportedBy", Severity.ERROR),
        RuleCode("V006", "undeveloped elements have no outgoing SupportedBy", Severity.ERROR),
        RuleCode("V007", "an uninstantiated element must carry a placeholder unless it is a ModuleRef", Severity.ERROR),
        RuleCode("V008", "a placeholder requires the uninstantiated flag", Severity.ERROR),
        RuleCode("V009", "choice group cardinality must be satisfiable", Severity.ERROR),
        RuleCode("V010", "an ACP must be attached to an existing edge", Severity.ERROR),
        RuleCode("V011", "a module needs a root Goal (warning when there are several)", Severity.ERROR),
        RuleCode("V012", "a Strategy needs an outgoing SupportedBy unless undeveloped", Severity.ERROR),
    )
}

# Codes that may legitimately accompany a planted single-rule violation.
CONSEQUENTIAL_CODES: dict[str, frozenset[str]] = {
    # A cycle that passes through every root goal leaves the module rootless.
    "V004": frozenset({"V011"}),
    # Stripping a strategy's support can orphan the goals it used to support.
    "V012": frozenset({"V011"}),
    # Retyping a root goal into a non-goal source kind removes the root.
    "V001": frozenset({"V011"}),
}

_SB_SOURCES = (NodeKind.GOAL, NodeKind.STRATEGY, NodeKind.MODULE_REF)
_SB_TARGETS = (NodeKind.GOAL, NodeKind.STRATEGY, NodeKind.SOLUTION, NodeKind.MODULE_REF, NodeKind.AWAY_GOAL)
_IC_SOURCES = (NodeKind.GOAL, NodeKind.STRATEGY)


def _count_placeholders(node: Node) -> int | None:
    try:
        return len(placeholder_spans(node.statement))
    except MalformedPlaceholderError:
        return None


def check_acyclic(graph: ArgumentGraph) -> list[list[str]]:
    """One shortest cycle per strongly connected SupportedBy component.

    Each cycle is ``[a, b, ..., a]`` with no other repeated node and starts at
    the component's first-declared node.  Empty iff the SupportedBy subgraph is
    a DAG.
    """
    order = {nid: i for i, nid in enumerate(graph.node_ids())}
    succ = {
        nid: [e.target for e in graph.out_edges(nid, EdgeKind.SUPPORTED_BY) if e.target in order]
        for nid in order
    }

    # Tarjan's SCC, iterative to stay clear of the recursion limit.
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    comps: list[list[str]] = []
    counter = 0
    for start in order:
        if start in index:
            continue
        work = [(start, 0)]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack.add(start)
        while work:
            v, i = work[-1]
            if i < len(succ[v]):
                work[-1] = (v, i + 1)
                w = succ[v][i]
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, 0))
                elif w in on_stack:
                    low[v] = min(low[v], index[w])
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1:
                    comps.append(comp)

    cycles = []
    for comp in comps:
        members = set(comp)
        head = min(comp, key=order.__getitem__)
        # BFS from head back to head inside the component.
        parent: dict[str, str] = {}
        frontier = [head]
        found = None
        visited = {head}
        while frontier and found is None:
            nxt = []
            for v in frontier:
                for w in succ[v]:
                    if w not in members:
                        continue
                    if w == head:
                        found = v
                        break
                    if w not in visited:
                        visited.add(w)
                        parent[w] = v
                        nxt.append(w)
                if found is not None:
                    break
            frontier = nxt
        path = [found]
        while path[-1] != head:
            path.append(parent[path[-1]])
        path.reverse()
        cycles.append(path + [head])
    cycles.sort(key=lambda c: order[c[0]])
    return cycles


def validate_graph(graph: ArgumentGraph) -> list[Diagnostic]:
    """All V-rule violations in one module, ordered by span then code."""
    diags: list[Diagnostic] = []
    sb = EdgeKind.SUPPORTED_BY

    for e in graph.edges:
        src = graph.node(e.source)
        tgt = graph.get(e.target)
        if e.kind is sb:
            if src.kind is NodeKind.SOLUTION:
                diags.append(error("V005", f"solution {src.id} cannot be supported (edge to {e.target})", e.span))
            elif src.kind not in _SB_SOURCES:
                diags.append(error("V001", f"{src.kind.value} {src.id} cannot be the source of supported_by", e.span))
            elif src.undeveloped and src.kind is not NodeKind.MODULE_REF:
                diags.append(error("V006", f"undeveloped {src.kind.value} {src.id} has supporting edge to {e.target}", e.span))
            if tgt is None:
                if is_qualified(e.target):
                    diags.append(warning("V002", f"supported_by target {e.target} lies in another module; checked at composition", e.span))
            elif tgt.kind not in _SB_TARGETS:
                diags.append(error("V002", f"{tgt.kind.value} {tgt.id} cannot be the target of supported_by", e.span))
        else:
            if src.kind not in _IC_SOURCES:
                diags.append(error("V003", f"{src.kind.value} {src.id} cannot be the source of in_context_of", e.span))
            elif tgt is None:
                if is_qualified(e.target):
                    diags.append(warning("V003", f"in_context_of target {e.target} lies in another module; checked at composition", e.span))
            elif tgt.kind not in CONTEXT_KINDS:
                diags.append(error("V003", f"{tgt.kind.value} {tgt.id} cannot be the target of in_context_of", e.span))

    for cycle in check_acyclic(graph):
        first = graph.edge((cycle[0], cycle[1], sb))
        diags.append(error("V004", "supported_by cycle: " + " -> ".join(cycle), first.span if first else None))

    for n in graph.nodes:
        count = _count_placeholders(n)
        if count is None:
            continue  # already reported by the parser
        if n.uninstantiated and count == 0 and n.kind is not NodeKind.MODULE_REF:
            diags.append(error("V007", f"{n.id} is flagged uninstantiated but has no placeholder", n.span))
        if not n.uninstantiated and count > 0:
            diags.append(error("V008", f"{n.id} has placeholders but is not flagged uninstantiated", n.span))
        if n.kind is NodeKind.STRATEGY and not n.undeveloped and not graph.out_edges(n.id, sb):
            diags.append(error("V012", f"strategy {n.id} has no supporting element", n.span))

    declared = {g.group for g in graph.choice_groups}
    for g in graph.choice_groups:
        members = graph.choice_members(g.group)
        problems = []
        if g.source not in graph:
            problems.append(f"source {g.source} is not a node")
        if not 1 <= g.min <= g.max:
            problems.append(f"range {g.min}..{g.max} is empty")
        if g.min > len(members):
            problems.append(f"needs at least {g.min} of {len(members)} member(s)")
        elif g.max > len(members):
            problems.append(f"allows up to {g.max} but has {len(members)} member(s)")
        stray = [e.source for e in members if e.source != g.source]
        if stray:
            problems.append(f"member edges leave {', '.join(sorted(set(stray)))} instead of {g.source}")
        if problems:
            diags.append(error("V009", f"choice group {g.group}: " + "; ".join(problems), g.span))
    for e in graph.edges:
        if isinstance(e.decoration, ChoiceMember) and e.decoration.group not in declared:
            diags.append(error("V009", f"edge {e.ref} uses undeclared choice group {e.decoration.group}", e.span))

    for a in graph.acps:
        if graph.edge(a.edge) is None:
            diags.append(error("V010", f"ACP {a.id} is attached to missing edge {a.edge}", a.span))

    if graph.nodes:
        heads = root_elements(graph)
        if not heads:
            diags.append(error("V011", f"module {graph.module_name} has no root goal", graph.span))
        elif len(heads) > 1:
            diags.append(warning("V011", f"module {graph.module_name} has {len(heads)} roots: {', '.join(heads)}", graph.span))

    return sort_diagnostics(diags)


def validate(doc: Document | ArgumentGraph | Iterable[ArgumentGraph]) -> list[Diagnostic]:
    """Validate every module of a document (or a single graph)."""
    if isinstance(doc, ArgumentGraph):
        graphs = [doc]
    elif isinstance(doc, Document):
        graphs = list(doc.modules)
    else:
        graphs = list(doc)
    diags: list[Diagnostic] = []
    for g in graphs:
        diags.extend(validate_graph(g))
    return sort_diagnostics(diags)
