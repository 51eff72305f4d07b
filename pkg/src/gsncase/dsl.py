"""Textual front end for GSN modules and patterns.

Grammar (line oriented, ``#`` comments)::

    document   := (("module" | "pattern") NAME "{" decl* "}")*
    decl       := node | edge | choice | acp | public
    node       := KIND ID STRING ["ref" REF] ["undeveloped"] ["uninstantiated"]
    edge       := ID "->" REF ":" ("supported_by" | "in_context_of")
                  ["mult" MIN ".." (MAX | "*") | "optional" | "choice" GROUP]
    choice     := "choice" GROUP "at" ID "pick" MIN ".." MAX
    acp        := "acp" ID "on" "(" ID "->" REF ":" EDGEKIND ")" "confidence" MODULE
    public     := "public" ID ("," ID)*

``REF`` is an id or a qualified ``module::id``.  Parsing never aborts: after an
error the parser resumes at the next declaration keyword, the next line that
starts with an identifier, or the closing brace.

Diagnostic codes:

    P001 bad token            P006 duplicate module name
    P002 unexpected token     P007 duplicate edge
    P003 duplicate id         P008 invalid multiplicity or range
    P004 malformed placeholder
    P005 unknown reference
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

from . import lexer
from .diagnostics import Diagnostic, DiagnosticError, SourceSpan, error, has_errors, sort_diagnostics
from .lexer import EOF, IDENT, NUMBER, STRING, Token, TokenStream
from .model import (
    ArgumentGraph,
    AssuranceClaimPoint,
    ChoiceGroup,
    ChoiceMember,
    Edge,
    EdgeKind,
    EdgeRef,
    GraphError,
    MalformedPlaceholderError,
    Multiplicity,
    Node,
    NodeKind,
    OptionalLink,
    is_qualified,
    placeholder_spans,
)

NODE_KEYWORDS = {k.value: k for k in NodeKind}
EDGE_KEYWORDS = {k.value: k for k in EdgeKind}
MODULE_KEYWORDS = ("module", "pattern")
DECL_KEYWORDS = frozenset(NODE_KEYWORDS) | {"choice", "acp", "public"}
RESERVED = DECL_KEYWORDS | frozenset(MODULE_KEYWORDS) | frozenset(EDGE_KEYWORDS) | {
    "ref", "undeveloped", "uninstantiated", "mult", "optional", "at", "pick", "on", "confidence",
}


class ModuleTag(enum.Enum):
    PATTERN = "pattern"
    INSTANCE = "module"


@dataclass(frozen=True)
class Document:
    modules: tuple[ArgumentGraph, ...] = ()
    tags: tuple[ModuleTag, ...] = ()
    comments: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "modules", tuple(self.modules))
        tags = tuple(self.tags) or tuple(ModuleTag.INSTANCE for _ in self.modules)
        object.__setattr__(self, "tags", tags)
        if len(self.tags) != len(self.modules):
            raise ValueError("one tag per module required")
        names = [m.module_name for m in self.modules]
        if len(set(names)) != len(names):
            raise ValueError("module names must be unique within a document")

    def module(self, name: str) -> ArgumentGraph:
        for m in self.modules:
            if m.module_name == name:
                return m
        raise KeyError(name)

    def tag(self, name: str) -> ModuleTag:
        for m, t in zip(self.modules, self.tags):
            if m.module_name == name:
                return t
        raise KeyError(name)

    def __iter__(self):
        return iter(zip(self.modules, self.tags))

    def __len__(self) -> int:
        return len(self.modules)


class ParseError(DiagnosticError):
    pass


class _Recover(Exception):
    """Unwinds a declaration after its error has been recorded."""


@dataclass
class _ModuleDraft:
    name: str
    tag: ModuleTag
    span: SourceSpan
    comments: tuple[str, ...]
    nodes: list[Node] = field(default_factory=list)
    edges: list[tuple[Edge, Token]] = field(default_factory=list)
    groups: list[ChoiceGroup] = field(default_factory=list)
    acps: list[AssuranceClaimPoint] = field(default_factory=list)
    public: list[tuple[str, Token]] = field(default_factory=list)
    tail: tuple[str, ...] = ()
    node_spans: dict[str, SourceSpan] = field(default_factory=dict)


class _Parser:
    def __init__(self, text: str, file: str):
        self.file = file
        tokens, self.diags = lexer.tokenize(text, file, "P001")
        self.ts = TokenStream(tokens)
        self._line_starts = self._first_tokens(tokens)

    @staticmethod
    def _first_tokens(tokens: list[Token]) -> set[int]:
        firsts = set()
        prev_line = 0
        for i, t in enumerate(tokens):
            if t.line != prev_line:
                firsts.add(i)
                prev_line = t.line
        return firsts

    # -- helpers --

    def span(self, start: Token, end: Token | None = None) -> SourceSpan:
        end = end or start
        return SourceSpan(self.file, start.line, start.col, end.end_line, end.end_col)

    def fail(self, code: str, message: str, tok: Token, **kw) -> None:
        self.diags.append(error(code, message, self.span(tok), **kw))
        raise _Recover

    def expect_word(self, *words: str) -> Token:
        tok = self.ts.peek()
        if not tok.is_word(*words):
            self.fail("P002", f"expected {' or '.join(repr(w) for w in words)}, found {tok}", tok)
        return self.ts.next()

    def expect_symbol(self, sym: str) -> Token:
        tok = self.ts.peek()
        if not tok.is_symbol(sym):
            self.fail("P002", f"expected {sym!r}, found {tok}", tok)
        return self.ts.next()

    def expect_ident(self, what: str) -> Token:
        tok = self.ts.peek()
        if tok.kind != IDENT:
            self.fail("P002", f"expected {what}, found {tok}", tok)
        if tok.value in RESERVED:
            self.fail("P002", f"reserved word {tok.value!r} cannot be used as {what}", tok)
        return self.ts.next()

    def expect_ref(self, what: str) -> tuple[str, Token, Token]:
        first = self.expect_ident(what)
        if self.ts.peek().is_symbol("::"):
            self.ts.next()
            second = self.expect_ident(what)
            return f"{first.value}::{second.value}", first, second
        return first.value, first, first

    def expect_int(self, what: str) -> Token:
        tok = self.ts.peek()
        if tok.kind != NUMBER or not tok.value.isdigit():
            self.fail("P002", f"expected {what}, found {tok}", tok)
        return self.ts.next()

    def _is_sync(self) -> bool:
        tok = self.ts.peek()
        if tok.kind == EOF or tok.is_symbol("}"):
            return True
        if tok.is_word(*DECL_KEYWORDS, *MODULE_KEYWORDS):
            return True
        return tok.kind == IDENT and self.ts.pos in self._line_starts

    # -- top level --

    def parse(self) -> Document:
        drafts: list[_ModuleDraft] = []
        names: dict[str, SourceSpan] = {}
        while not self.ts.at_eof():
            tok = self.ts.peek()
            if not tok.is_word(*MODULE_KEYWORDS):
                self.diags.append(error("P002", f"expected 'module' or 'pattern', found {tok}", self.span(tok)))
                self.ts.next()
                while not self.ts.at_eof() and not self.ts.peek().is_word(*MODULE_KEYWORDS):
                    self.ts.next()
                continue
            draft = self.parse_module()
            if draft is None:
                continue
            if draft.name in names:
                self.diags.append(
                    error(
                        "P006",
                        f"duplicate module name {draft.name!r} (first declared at {names[draft.name]})",
                        draft.span,
                        related=(names[draft.name],),
                    )
                )
                continue
            names[draft.name] = draft.span
            drafts.append(draft)
        trailing = self.ts.take_comments()
        modules = []
        tags = []
        for d in drafts:
            graph = self.finish_module(d)
            modules.append(graph)
            tags.append(d.tag)
        return Document(tuple(modules), tuple(tags), trailing)

    def parse_module(self) -> _ModuleDraft | None:
        kw = self.ts.next()
        comments = self.ts.take_comments(kw.line)
        try:
            name = self.expect_ident("module name")
            self.expect_symbol("{")
        except _Recover:
            while not self.ts.at_eof() and not self.ts.peek().is_word(*MODULE_KEYWORDS):
                self.ts.next()
            return None
        tag = ModuleTag.PATTERN if kw.value == "pattern" else ModuleTag.INSTANCE
        draft = _ModuleDraft(name.value, tag, self.span(kw, name), comments)
        while True:
            tok = self.ts.peek()
            if tok.is_symbol("}"):
                draft.tail = self.ts.take_comments(tok.line + 1)
                self.ts.next()
                break
            if tok.kind == EOF or tok.is_word(*MODULE_KEYWORDS):
                self.diags.append(error("P002", f"expected '}}' to close module {name.value!r}, found {tok}", self.span(tok)))
                draft.tail = self.ts.take_comments(tok.line)
                break
            start = self.ts.pos
            try:
                self.parse_decl(draft)
            except _Recover:
                self.ts.take_comments(self.ts.peek().line)
                if self.ts.pos == start:
                    self.ts.next()
                while not self._is_sync():
                    self.ts.next()
        return draft

    def parse_decl(self, draft: _ModuleDraft) -> None:
        tok = self.ts.peek()
        comments = self.ts.take_comments(tok.line)
        if tok.is_word(*NODE_KEYWORDS):
            self.parse_node(draft, comments)
        elif tok.is_word("choice"):
            self.parse_choice(draft, comments)
        elif tok.is_word("acp"):
            self.parse_acp(draft, comments)
        elif tok.is_word("public"):
            self.parse_public(draft)
        elif tok.kind == IDENT:
            self.parse_edge(draft, comments)
        else:
            self.fail("P002", f"expected a declaration, found {tok}", tok)

    def parse_node(self, draft: _ModuleDraft, comments: tuple[str, ...]) -> None:
        kw = self.ts.next()
        kind = NODE_KEYWORDS[kw.value]
        ident = self.expect_ident("node id")
        stmt_tok = self.ts.peek()
        if stmt_tok.kind != STRING:
            self.fail("P002", f"expected statement string, found {stmt_tok}", stmt_tok)
        self.ts.next()
        last = stmt_tok
        ref = None
        undeveloped = uninstantiated = False
        while True:
            nxt = self.ts.peek()
            if nxt.is_word("ref") and ref is None:
                self.ts.next()
                ref, _, last = self.expect_ref("reference")
                if kind is NodeKind.MODULE_REF and is_qualified(ref):
                    self.fail("P002", "moduleref must reference a module name", nxt)
                if kind is NodeKind.AWAY_GOAL and not is_qualified(ref):
                    self.fail("P002", "awaygoal must reference module::id", nxt)
                if kind not in (NodeKind.MODULE_REF, NodeKind.AWAY_GOAL):
                    self.fail("P002", f"{kind.value} nodes cannot carry a ref", nxt)
            elif nxt.is_word("undeveloped") and not undeveloped:
                undeveloped = True
                last = self.ts.next()
            elif nxt.is_word("uninstantiated") and not uninstantiated:
                uninstantiated = True
                last = self.ts.next()
            else:
                break
        span = self.span(kw, last)
        trailing = self.ts.take_trailing(last.end_line)
        try:
            placeholder_spans(stmt_tok.value)
        except MalformedPlaceholderError as exc:
            self.diags.append(error("P004", f"malformed placeholder in {ident.value}: {exc.reason}", self.span(stmt_tok)))
        if ident.value in draft.node_spans:
            first = draft.node_spans[ident.value]
            self.diags.append(
                error(
                    "P003",
                    f"duplicate id {ident.value!r} (first declared at {first})",
                    self.span(ident),
                    related=(first,),
                )
            )
            return
        draft.node_spans[ident.value] = self.span(ident)
        draft.nodes.append(
            Node(ident.value, kind, stmt_tok.value, undeveloped, uninstantiated, ref, span, comments, trailing)
        )

    def parse_range(self, allow_star: bool) -> tuple[int, int | None, Token]:
        tok = self.ts.peek()
        if allow_star and tok.is_symbol("*"):
            self.ts.next()
            return 0, None, tok
        lo = self.expect_int("range minimum")
        self.expect_symbol("..")
        hi_tok = self.ts.peek()
        if allow_star and hi_tok.is_symbol("*"):
            self.ts.next()
            return int(lo.value), None, hi_tok
        hi = self.expect_int("range maximum")
        return int(lo.value), int(hi.value), hi

    def parse_edge(self, draft: _ModuleDraft, comments: tuple[str, ...]) -> None:
        src_tok = self.ts.peek()
        source, _, _ = self.expect_ref("edge source")
        if is_qualified(source):
            self.fail("P002", "edge source must be a local node id", src_tok)
        self.expect_symbol("->")
        target, tgt_tok, tgt_end = self.expect_ref("edge target")
        self.expect_symbol(":")
        kind_tok = self.ts.peek()
        if not kind_tok.is_word(*EDGE_KEYWORDS):
            self.fail("P002", f"expected 'supported_by' or 'in_context_of', found {kind_tok}", kind_tok)
        self.ts.next()
        kind = EDGE_KEYWORDS[kind_tok.value]
        last = kind_tok
        decoration = None
        while True:
            nxt = self.ts.peek()
            if nxt.is_word("mult"):
                self._one_decoration(decoration, nxt)
                self.ts.next()
                lo, hi, last = self.parse_range(allow_star=True)
                if (hi is not None and (hi < lo or hi < 1)):
                    self.fail("P008", f"invalid multiplicity {lo}..{hi}", last)
                decoration = Multiplicity(lo, hi)
            elif nxt.is_word("optional"):
                self._one_decoration(decoration, nxt)
                last = self.ts.next()
                decoration = OptionalLink()
            elif nxt.is_word("choice") and not self.ts.peek(2).is_word("at"):
                self._one_decoration(decoration, nxt)
                self.ts.next()
                last = self.expect_ident("choice group")
                decoration = ChoiceMember(last.value)
            else:
                break
        if source == target:
            self.fail("P002", f"edge from {source} to itself", tgt_tok)
        span = self.span(src_tok, last)
        trailing = self.ts.take_trailing(last.end_line)
        edge = Edge(source, target, kind, decoration, span, comments, trailing)
        draft.edges.append((edge, tgt_tok))

    def _one_decoration(self, current, tok: Token) -> None:
        if current is not None:
            self.fail("P002", "an edge carries at most one decoration", tok)

    def parse_choice(self, draft: _ModuleDraft, comments: tuple[str, ...]) -> None:
        kw = self.ts.next()
        group = self.expect_ident("choice group")
        self.expect_word("at")
        at = self.expect_ident("choice source")
        self.expect_word("pick")
        lo, hi, last = self.parse_range(allow_star=False)
        if hi < lo or lo < 1:
            self.fail("P008", f"invalid choice range {lo}..{hi}", last)
        if any(g.group == group.value for g in draft.groups):
            self.fail("P003", f"duplicate choice group {group.value!r}", group)
        trailing = self.ts.take_trailing(last.end_line)
        draft.groups.append(ChoiceGroup(group.value, at.value, lo, hi, self.span(kw, last), comments, trailing))

    def parse_acp(self, draft: _ModuleDraft, comments: tuple[str, ...]) -> None:
        kw = self.ts.next()
        ident = self.expect_ident("ACP id")
        self.expect_word("on")
        self.expect_symbol("(")
        source = self.expect_ident("edge source").value
        self.expect_symbol("->")
        target, _, _ = self.expect_ref("edge target")
        self.expect_symbol(":")
        kind_tok = self.ts.peek()
        if not kind_tok.is_word(*EDGE_KEYWORDS):
            self.fail("P002", f"expected edge kind, found {kind_tok}", kind_tok)
        self.ts.next()
        self.expect_symbol(")")
        self.expect_word("confidence")
        module = self.expect_ident("confidence module")
        if any(a.id == ident.value for a in draft.acps):
            self.fail("P003", f"duplicate ACP id {ident.value!r}", ident)
        trailing = self.ts.take_trailing(module.end_line)
        ref = EdgeRef(source, target, EDGE_KEYWORDS[kind_tok.value])
        draft.acps.append(AssuranceClaimPoint(ident.value, ref, module.value, self.span(kw, module), comments, trailing))

    def parse_public(self, draft: _ModuleDraft) -> None:
        self.ts.next()
        while True:
            tok = self.expect_ident("public node id")
            draft.public.append((tok.value, tok))
            if not self.ts.peek().is_symbol(","):
                break
            self.ts.next()
        # comments on a public line are not retained
        self.ts.take_trailing(tok.end_line)

    # -- assembly --

    def finish_module(self, d: _ModuleDraft) -> ArgumentGraph:
        ids = {n.id for n in d.nodes}
        edges: list[Edge] = []
        seen: dict[EdgeRef, SourceSpan] = {}
        for edge, tgt_tok in d.edges:
            if edge.source not in ids:
                self.diags.append(error("P005", f"unknown node {edge.source!r} in module {d.name!r}", edge.span))
                continue
            if edge.target not in ids and not is_qualified(edge.target):
                self.diags.append(error("P005", f"unknown node {edge.target!r} in module {d.name!r}", self.span(tgt_tok)))
                continue
            if edge.ref in seen:
                self.diags.append(
                    error("P007", f"duplicate edge {edge.ref} (first at {seen[edge.ref]})", edge.span, related=(seen[edge.ref],))
                )
                continue
            seen[edge.ref] = edge.span
            edges.append(edge)
        public: list[str] = []
        for pid, tok in d.public:
            if pid not in ids:
                self.diags.append(error("P005", f"public id {pid!r} is not declared in module {d.name!r}", self.span(tok)))
            elif pid not in public:
                public.append(pid)
        try:
            return ArgumentGraph(
                d.name, tuple(d.nodes), tuple(edges), tuple(d.groups), tuple(d.acps), tuple(public),
                span=d.span, comments=d.comments, tail_comments=d.tail,
            )
        except GraphError as exc:  # pragma: no cover - guarded by the checks above
            self.diags.append(error("P002", str(exc), d.span))
            return ArgumentGraph(d.name, span=d.span)


def parse(text: str, file: str = "<input>") -> tuple[Document, list[Diagnostic]]:
    """Parse ``text`` into a :class:`Document` plus diagnostics.  Never raises."""
    parser = _Parser(text, file)
    doc = parser.parse()
    return doc, sort_diagnostics(parser.diags)


def parse_strict(text: str, file: str = "<input>") -> Document:
    doc, diags = parse(text, file)
    if has_errors(diags):
        raise ParseError(diags)
    return doc


def parse_file(path) -> tuple[Document, list[Diagnostic]]:
    from pathlib import Path

    p = Path(path)
    return parse(p.read_bytes().decode("utf-8"), str(path))


# -- serialization ----------------------------------------------------------------


class SerializeError(ValueError):
    pass


def _comment_lines(comments, indent: str) -> list[str]:
    return [f"{indent}# {c}".rstrip() for c in comments]


def _with_trailing(line: str, trailing: str | None) -> str:
    return f"{line}  # {trailing}".rstrip() if trailing is not None else line


def _edge_text(ref: EdgeRef) -> str:
    return f"{ref.source} -> {ref.target} : {ref.kind.value}"


def _decoration_text(decoration) -> str:
    if decoration is None:
        return ""
    if isinstance(decoration, Multiplicity):
        return f" mult {decoration}"
    if isinstance(decoration, OptionalLink):
        return " optional"
    return f" choice {decoration.group}"


def _check_word(value: str) -> str:
    for part in value.split("::"):
        if part in RESERVED:
            raise SerializeError(f"identifier {value!r} is a reserved word")
    return value


def serialize_module(graph: ArgumentGraph, tag: ModuleTag = ModuleTag.INSTANCE) -> list[str]:
    ind = "  "
    lines = _comment_lines(graph.comments, "")
    lines.append(f"{tag.value} {_check_word(graph.module_name)} {{")
    sections: list[list[str]] = []

    block = []
    for n in graph.nodes:
        block += _comment_lines(n.comments, ind)
        try:
            text = f"{ind}{n.kind.keyword} {_check_word(n.id)} {lexer.quote(n.statement)}"
        except ValueError as exc:
            raise SerializeError(f"node {n.id}: {exc}") from None
        if n.ref is not None:
            text += f" ref {n.ref}"
        if n.undeveloped:
            text += " undeveloped"
        if n.uninstantiated:
            text += " uninstantiated"
        block.append(_with_trailing(text, n.trailing))
    sections.append(block)

    block = []
    for e in graph.edges:
        block += _comment_lines(e.comments, ind)
        block.append(_with_trailing(f"{ind}{_edge_text(e.ref)}{_decoration_text(e.decoration)}", e.trailing))
    sections.append(block)

    block = []
    for g in graph.choice_groups:
        block += _comment_lines(g.comments, ind)
        block.append(_with_trailing(f"{ind}choice {g.group} at {g.source} pick {g.min}..{g.max}", g.trailing))
    sections.append(block)

    block = []
    for a in graph.acps:
        block += _comment_lines(a.comments, ind)
        line = f"{ind}acp {a.id} on ({_edge_text(a.edge)}) confidence {a.confidence_module}"
        block.append(_with_trailing(line, a.trailing))
    sections.append(block)

    if graph.public_ids:
        sections.append([f"{ind}public {', '.join(graph.public_ids)}"])

    body = [s for s in sections if s]
    for i, s in enumerate(body):
        if i:
            lines.append("")
        lines.extend(s)
    lines += _comment_lines(graph.tail_comments, ind)
    lines.append("}")
    return lines


def serialize(doc: Document) -> str:
    """Canonical text for ``doc``; ``parse(serialize(d))`` is structurally ``d``."""
    out: list[str] = []
    for i, (graph, tag) in enumerate(doc):
        if i:
            out.append("")
        out.extend(serialize_module(graph, tag))
    if doc.comments:
        if out:
            out.append("")
        out.extend(_comment_lines(doc.comments, ""))
    return "\n".join(out) + "\n" if out else ""


def format_text(text: str, file: str = "<input>") -> str:
    """Canonicalize ``text``; raises :class:`ParseError` if it has errors."""
    doc = parse_strict(text, file)
    return serialize(doc)


def documents_equal(a: Document, b: Document) -> bool:
    """Structural equality: same modules, tags and graph content, spans ignored."""
    from .model import structurally_equal

    if [m.module_name for m in a.modules] != [m.module_name for m in b.modules]:
        return False
    if a.tags != b.tags:
        return False
    return all(structurally_equal(x, y) for x, y in zip(a.modules, b.modules))
