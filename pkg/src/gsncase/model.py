"""GSN domain model: nodes, edges, decorations, modules and basic graph queries.

Graphs are immutable values.  Every query here is a pure function of its
inputs, and iteration order always follows declaration order so that output
is reproducible regardless of hash seeding.
"""

from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Iterator, NamedTuple, Union

from .diagnostics import SourceSpan

_ID = r"[A-Za-z][A-Za-z0-9_.\-]*"
ID_RE = re.compile(rf"^{_ID}$")
QUALIFIED_RE = re.compile(rf"^{_ID}::{_ID}$")


class GraphError(ValueError):
    """A graph, node or edge violates a structural invariant."""


class UnknownNodeError(LookupError):
    def __init__(self, node_id: str, module: str | None = None):
        self.node_id = node_id
        where = f" in module {module!r}" if module else ""
        super().__init__(f"unknown node id {node_id!r}{where}")


class MalformedPlaceholderError(ValueError):
    def __init__(self, text: str, offset: int, reason: str):
        self.text = text
        self.offset = offset
        self.reason = reason
        super().__init__(f"malformed placeholder at offset {offset}: {reason}")


class NodeKind(enum.Enum):
    GOAL = "goal"
    STRATEGY = "strategy"
    SOLUTION = "solution"
    CONTEXT = "context"
    ASSUMPTION = "assumption"
    JUSTIFICATION = "justification"
    MODULE_REF = "moduleref"
    AWAY_GOAL = "awaygoal"

    @property
    def keyword(self) -> str:
        return self.value


CONTEXT_KINDS = frozenset({NodeKind.CONTEXT, NodeKind.ASSUMPTION, NodeKind.JUSTIFICATION})


class EdgeKind(enum.Enum):
    SUPPORTED_BY = "supported_by"
    IN_CONTEXT_OF = "in_context_of"


def is_qualified(node_id: str) -> bool:
    return "::" in node_id


def split_qualified(node_id: str) -> tuple[str, str]:
    module, _, local = node_id.partition("::")
    return module, local


def qualify(module: str, node_id: str) -> str:
    return node_id if is_qualified(node_id) else f"{module}::{node_id}"


def check_id(value: str, *, allow_qualified: bool = True) -> str:
    if ID_RE.match(value) or (allow_qualified and QUALIFIED_RE.match(value)):
        return value
    raise GraphError(f"invalid identifier {value!r}")


# -- decorations --------------------------------------------------------------


@dataclass(frozen=True)
class Multiplicity:
    """Solid-circle decoration: the target subtree is repeated min..max times.

    ``max`` of None means unbounded.
    """

    min: int = 0
    max: int | None = None

    def __post_init__(self) -> None:
        if self.min < 0:
            raise GraphError(f"multiplicity minimum must be >= 0, got {self.min}")
        if self.max is not None and (self.max < self.min or self.max < 1):
            raise GraphError(f"invalid multiplicity range {self.min}..{self.max}")

    def allows(self, count: int) -> bool:
        return count >= self.min and (self.max is None or count <= self.max)

    def __str__(self) -> str:
        return f"{self.min}..{'*' if self.max is None else self.max}"


@dataclass(frozen=True)
class OptionalLink:
    """Hollow-circle decoration: the link is kept only when included."""


@dataclass(frozen=True)
class ChoiceMember:
    """Diamond decoration: the link belongs to choice ``group``."""

    group: str

    def __post_init__(self) -> None:
        check_id(self.group, allow_qualified=False)


Decoration = Union[Multiplicity, OptionalLink, ChoiceMember, None]


def normalize_decoration(decoration: Decoration) -> Decoration:
    if isinstance(decoration, Multiplicity) and decoration.min == 1 and decoration.max == 1:
        return None
    return decoration


# -- elements -----------------------------------------------------------------


class EdgeRef(NamedTuple):
    source: str
    target: str
    kind: EdgeKind

    def __str__(self) -> str:
        return f"{self.source} -> {self.target} : {self.kind.value}"


@dataclass(frozen=True)
class Node:
    id: str
    kind: NodeKind
    statement: str
    undeveloped: bool = False
    uninstantiated: bool = False
    # Module name (ModuleRef) or qualified goal id (AwayGoal) this node stands for.
    ref: str | None = None
    span: SourceSpan | None = field(default=None, compare=False)
    comments: tuple[str, ...] = field(default=(), compare=False)
    trailing: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        check_id(self.id)
        if not isinstance(self.kind, NodeKind):
            raise GraphError(f"unknown node kind {self.kind!r}")
        if self.ref is not None:
            if self.kind is NodeKind.MODULE_REF:
                check_id(self.ref, allow_qualified=False)
            elif self.kind is NodeKind.AWAY_GOAL:
                if not QUALIFIED_RE.match(self.ref):
                    raise GraphError(f"away goal {self.id} must reference module::id, got {self.ref!r}")
            else:
                raise GraphError(f"only moduleref and awaygoal nodes carry a ref ({self.id})")

    @property
    def placeholders(self) -> list[str]:
        return placeholders(self)


@dataclass(frozen=True)
class Edge:
    source: str
    target: str
    kind: EdgeKind
    decoration: Decoration = None
    span: SourceSpan | None = field(default=None, compare=False)
    comments: tuple[str, ...] = field(default=(), compare=False)
    trailing: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        check_id(self.source)
        check_id(self.target)
        if self.source == self.target:
            raise GraphError(f"self-loop on {self.source}")
        object.__setattr__(self, "decoration", normalize_decoration(self.decoration))

    @property
    def ref(self) -> EdgeRef:
        return EdgeRef(self.source, self.target, self.kind)


@dataclass(frozen=True)
class ChoiceGroup:
    """An m-of-n selection over the decorated edges leaving ``source``.

    Members are the edges whose decoration is ``ChoiceMember(group)``; see
    :meth:`ArgumentGraph.choice_members`.
    """

    group: str
    source: str
    min: int
    max: int
    span: SourceSpan | None = field(default=None, compare=False)
    comments: tuple[str, ...] = field(default=(), compare=False)
    trailing: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        check_id(self.group, allow_qualified=False)
        check_id(self.source)


@dataclass(frozen=True)
class AssuranceClaimPoint:
    id: str
    edge: EdgeRef
    confidence_module: str
    span: SourceSpan | None = field(default=None, compare=False)
    comments: tuple[str, ...] = field(default=(), compare=False)
    trailing: str | None = field(default=None, compare=False)

    def __post_init__(self) -> None:
        check_id(self.id)
        check_id(self.confidence_module, allow_qualified=False)
        object.__setattr__(self, "edge", EdgeRef(*self.edge))


@dataclass(frozen=True)
class ArgumentGraph:
    """One GSN module: nodes, edges, choice groups, ACPs and its public interface."""

    module_name: str
    nodes: tuple[Node, ...] = ()
    edges: tuple[Edge, ...] = ()
    choice_groups: tuple[ChoiceGroup, ...] = ()
    acps: tuple[AssuranceClaimPoint, ...] = ()
    public_ids: tuple[str, ...] = ()
    span: SourceSpan | None = field(default=None, compare=False)
    comments: tuple[str, ...] = field(default=(), compare=False)
    tail_comments: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        check_id(self.module_name, allow_qualified=False)
        for name in ("nodes", "edges", "choice_groups", "acps", "public_ids"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        seen: set[str] = set()
        for node in self.nodes:
            if node.id in seen:
                raise GraphError(f"duplicate node id {node.id!r} in module {self.module_name!r}")
            seen.add(node.id)
        refs: set[EdgeRef] = set()
        for edge in self.edges:
            if edge.source not in seen:
                raise GraphError(f"edge source {edge.source!r} is not a node of {self.module_name!r}")
            if edge.target not in seen and not is_qualified(edge.target):
                raise GraphError(f"edge target {edge.target!r} is not a node of {self.module_name!r}")
            if edge.ref in refs:
                raise GraphError(f"duplicate edge {edge.ref}")
            refs.add(edge.ref)
        for pid in self.public_ids:
            if pid not in seen:
                raise GraphError(f"public id {pid!r} is not a node of {self.module_name!r}")
        if len(set(self.public_ids)) != len(self.public_ids):
            raise GraphError("duplicate public id")

    # -- indexes --

    @cached_property
    def _node_index(self) -> dict[str, Node]:
        return {n.id: n for n in self.nodes}

    @cached_property
    def _edge_index(self) -> dict[EdgeRef, Edge]:
        return {e.ref: e for e in self.edges}

    @cached_property
    def _out(self) -> dict[str, list[Edge]]:
        out: dict[str, list[Edge]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            out[e.source].append(e)
        return out

    @cached_property
    def _in(self) -> dict[str, list[Edge]]:
        inc: dict[str, list[Edge]] = {n.id: [] for n in self.nodes}
        for e in self.edges:
            inc.setdefault(e.target, []).append(e)
        return inc

    # -- lookups --

    def __contains__(self, node_id: object) -> bool:
        return node_id in self._node_index

    def node(self, node_id: str) -> Node:
        try:
            return self._node_index[node_id]
        except KeyError:
            raise UnknownNodeError(node_id, self.module_name) from None

    def get(self, node_id: str) -> Node | None:
        return self._node_index.get(node_id)

    def edge(self, ref: EdgeRef) -> Edge | None:
        return self._edge_index.get(EdgeRef(*ref))

    def node_ids(self) -> list[str]:
        return [n.id for n in self.nodes]

    def out_edges(self, node_id: str, kind: EdgeKind | None = None) -> list[Edge]:
        edges = self._out.get(node_id, [])
        return [e for e in edges if kind is None or e.kind is kind]

    def in_edges(self, node_id: str, kind: EdgeKind | None = None) -> list[Edge]:
        edges = self._in.get(node_id, [])
        return [e for e in edges if kind is None or e.kind is kind]

    def children(self, node_id: str, kind: EdgeKind = EdgeKind.SUPPORTED_BY) -> list[str]:
        return [e.target for e in self.out_edges(node_id, kind)]

    def choice_group(self, group: str) -> ChoiceGroup | None:
        for g in self.choice_groups:
            if g.group == group:
                return g
        return None

    def choice_members(self, group: str) -> list[Edge]:
        return [e for e in self.edges if isinstance(e.decoration, ChoiceMember) and e.decoration.group == group]

    def replace(self, **changes) -> "ArgumentGraph":
        return replace(self, **changes)

    def __iter__(self) -> Iterator[Node]:
        return iter(self.nodes)

    def __len__(self) -> int:
        return len(self.nodes)


# -- queries --------------------------------------------------------------------


def roots(graph: ArgumentGraph) -> list[str]:
    """Goal nodes with no incoming SupportedBy edge, in declaration order."""
    return [
        n.id
        for n in graph.nodes
        if n.kind is NodeKind.GOAL and not graph.in_edges(n.id, EdgeKind.SUPPORTED_BY)
    ]


def root_elements(graph: ArgumentGraph) -> list[str]:
    """Like :func:`roots`, but a module-view diagram may also be headed by a ModuleRef."""
    heads = (NodeKind.GOAL, NodeKind.MODULE_REF)
    return [
        n.id
        for n in graph.nodes
        if n.kind in heads and not graph.in_edges(n.id, EdgeKind.SUPPORTED_BY)
    ]


def ancestors(graph: ArgumentGraph, node_id: str) -> set[str]:
    """All nodes from which ``node_id`` is reachable along SupportedBy edges."""
    graph.node(node_id)
    seen: set[str] = set()
    queue = deque([node_id])
    while queue:
        current = queue.popleft()
        for e in graph.in_edges(current, EdgeKind.SUPPORTED_BY):
            if e.source not in seen:
                seen.add(e.source)
                queue.append(e.source)
    seen.discard(node_id)
    return seen


def descendants(graph: ArgumentGraph, node_id: str, kinds: Iterable[EdgeKind] | None = None) -> list[str]:
    """Nodes reachable from ``node_id`` (inclusive), in declaration order."""
    allowed = set(kinds) if kinds is not None else set(EdgeKind)
    seen = {node_id}
    stack = [node_id]
    while stack:
        current = stack.pop()
        for e in graph.out_edges(current):
            if e.kind in allowed and e.target in graph and e.target not in seen:
                seen.add(e.target)
                stack.append(e.target)
    return [n for n in graph.node_ids() if n in seen]


# -- placeholders ---------------------------------------------------------------


class PlaceholderSpan(NamedTuple):
    start: int
    end: int
    role: str


def placeholder_spans(text: str) -> list[PlaceholderSpan]:
    """Locate ``{Role}`` spans in ``text``; a backslash escapes the next character."""
    spans: list[PlaceholderSpan] = []
    open_at: int | None = None
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == "{":
            if open_at is not None:
                raise MalformedPlaceholderError(text, i, "nested '{'")
            open_at = i
        elif ch == "}":
            if open_at is None:
                raise MalformedPlaceholderError(text, i, "unmatched '}'")
            role = text[open_at + 1 : i]
            if not role.strip():
                raise MalformedPlaceholderError(text, open_at, "empty placeholder")
            spans.append(PlaceholderSpan(open_at, i + 1, role))
            open_at = None
        i += 1
    if open_at is not None:
        raise MalformedPlaceholderError(text, open_at, "unclosed '{'")
    return spans


def placeholders(node_or_text: Node | str) -> list[str]:
    """Ordered, deduplicated role names of the placeholders in a statement."""
    text = node_or_text.statement if isinstance(node_or_text, Node) else node_or_text
    out: list[str] = []
    for span in placeholder_spans(text):
        if span.role not in out:
            out.append(span.role)
    return out


def substitute(text: str, lookup) -> str:
    """Replace each placeholder whose role ``lookup(role)`` maps to a string."""
    pieces = []
    last = 0
    for span in placeholder_spans(text):
        value = lookup(span.role)
        if value is None:
            continue
        pieces.append(text[last : span.start])
        pieces.append(value)
        last = span.end
    pieces.append(text[last:])
    return "".join(pieces)


# -- structural equality ----------------------------------------------------------


def structural_key(graph: ArgumentGraph) -> tuple:
    """Order-insensitive identity of a graph, ignoring spans and comments."""
    return (
        graph.module_name,
        frozenset(graph.nodes),
        frozenset(graph.edges),
        frozenset(graph.choice_groups),
        frozenset(graph.acps),
        frozenset(graph.public_ids),
    )


def structurally_equal(a: ArgumentGraph, b: ArgumentGraph) -> bool:
    return structural_key(a) == structural_key(b)
