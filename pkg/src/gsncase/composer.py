"""Multi-module case archives: composition into one graph and the
architecture shape check (ethics over system over model arguments)."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, NamedTuple

from . import lexer
from .diagnostics import Diagnostic, DiagnosticError, SourceSpan, error, has_errors, sort_diagnostics
from .dsl import parse
from .lexer import IDENT, STRING, TokenStream
from .model import (
    ArgumentGraph,
    AssuranceClaimPoint,
    ChoiceGroup,
    ChoiceMember,
    Edge,
    EdgeKind,
    EdgeRef,
    NodeKind,
    OptionalLink,
    is_qualified,
    root_elements,
    split_qualified,
)
from .validator import validate_graph


class ArchTag(enum.Enum):
    ETHICS = "ethics"
    SYSTEM = "system"
    PURPOSE_SPECIFIC_MODEL = "purpose_specific_model"
    GENERAL_PURPOSE_MODEL = "general_purpose_model"
    CONFIDENCE = "confidence"
    OTHER = "other"


MODEL_TAGS = (ArchTag.PURPOSE_SPECIFIC_MODEL, ArchTag.GENERAL_PURPOSE_MODEL)


class LinkKind(enum.Enum):
    SUPPORTED_BY = "supported_by"
    OPTIONAL = "optional"


@dataclass(frozen=True)
class CompositionLink:
    """``source`` is supported by ``target``; each is ``module::id`` or a bare
    module name standing for that module's root."""

    source: str
    target: str
    kind: LinkKind = LinkKind.SUPPORTED_BY
    span: SourceSpan | None = field(default=None, compare=False)

    @property
    def source_module(self) -> str:
        return split_qualified(self.source)[0]

    @property
    def target_module(self) -> str:
        return split_qualified(self.target)[0]


@dataclass(frozen=True, eq=False)
class CaseArchive:
    modules: dict[str, ArgumentGraph]
    links: tuple[CompositionLink, ...] = ()
    tags: dict[str, ArchTag] = field(default_factory=dict)
    trace: Path | None = None

    def tag(self, name: str) -> ArchTag:
        return self.tags.get(name, ArchTag.OTHER)

    def names(self) -> list[str]:
        return sorted(self.modules)

    def without(self, name: str) -> "CaseArchive":
        """A copy lacking module ``name`` and every link that touches it."""
        return CaseArchive(
            {k: v for k, v in self.modules.items() if k != name},
            tuple(l for l in self.links if name not in (l.source_module, l.target_module)),
            {k: v for k, v in self.tags.items() if k != name},
            self.trace,
        )


class CompositionError(DiagnosticError):
    pass


def merge_archives(*archives: CaseArchive) -> CaseArchive:
    """Union of archives; a module name defined twice with different content is C003."""
    modules: dict[str, ArgumentGraph] = {}
    tags: dict[str, ArchTag] = {}
    links: list[CompositionLink] = []
    trace = None
    diags = []
    for a in archives:
        for name, g in a.modules.items():
            if name in modules and modules[name] != g:
                diags.append(error("C003", f"module {name} is defined by two archives"))
                continue
            modules[name] = g
            tags[name] = a.tag(name)
        for l in a.links:
            if l not in links:
                links.append(l)
        trace = trace or a.trace
    if diags:
        raise CompositionError(diags)
    return CaseArchive(modules, tuple(links), tags, trace)


class Composition(NamedTuple):
    graph: ArgumentGraph
    diagnostics: list[Diagnostic]

    @property
    def ok(self) -> bool:
        return not has_errors(self.diagnostics)


def _single_root(graph: ArgumentGraph) -> str | None:
    heads = root_elements(graph)
    return heads[0] if len(heads) == 1 else None


def _link_module_targets(archive: CaseArchive, name: str, graph: ArgumentGraph) -> dict[str, str | None]:
    """Local id -> replacement id for AwayGoals and resolvable ModuleRefs."""
    out: dict[str, str | None] = {}
    for n in graph.nodes:
        if n.kind is NodeKind.AWAY_GOAL and n.ref:
            out[n.id] = n.ref
        elif n.kind is NodeKind.MODULE_REF and n.ref:
            target = archive.modules.get(n.ref)
            root = _single_root(target) if target is not None else None
            out[n.id] = f"{n.ref}::{root}" if root else None
    return out


def compose(archive: CaseArchive, name: str = "case") -> Composition:
    """Merge every module into one graph whose ids are ``module::id``.

    AwayGoals and resolved ModuleRefs disappear; edges that touched them are
    redirected to the referenced goal or module root.
    """
    diags: list[Diagnostic] = []
    for mod in archive.names():
        diags.extend(validate_graph(archive.modules[mod]))

    def check_target(qid: str, origin: str, span, *, public: bool = True) -> bool:
        mod, local = split_qualified(qid)
        target = archive.modules.get(mod)
        if target is None:
            diags.append(error("C001", f"{origin} refers to unknown module {mod}", span))
            return False
        if local not in target:
            diags.append(error("C005", f"{origin} refers to {qid}, which module {mod} does not define", span))
            return False
        if public and local not in target.public_ids:
            diags.append(
                error("C002", f"{origin} refers to {local}, which module {mod} does not make public", span)
            )
            return False
        return True

    nodes = []
    edges: list[Edge] = []
    seen_edges: set[EdgeRef] = set()
    groups: list[ChoiceGroup] = []
    acps: list[AssuranceClaimPoint] = []
    public: list[str] = []
    node_ids: set[str] = set()
    replacement: dict[str, dict[str, str]] = {}

    for mod in archive.names():
        g = archive.modules[mod]
        repl = {}
        for local, target in _link_module_targets(archive, mod, g).items():
            node = g.node(local)
            origin = f"{node.kind.value} {mod}::{local}"
            if node.kind is NodeKind.MODULE_REF:
                if node.ref not in archive.modules:
                    diags.append(error("C001", f"{origin} refers to unknown module {node.ref}", node.span))
                    continue
                if target is None:
                    heads = root_elements(archive.modules[node.ref])
                    diags.append(
                        error("C006", f"{origin}: module {node.ref} has {len(heads)} roots, need exactly one", node.span)
                    )
                    continue
            if check_target(target, origin, node.span):
                repl[local] = target
        replacement[mod] = repl

    def resolve(mod: str, local: str) -> str:
        if is_qualified(local):
            return local
        return replacement[mod].get(local, f"{mod}::{local}")

    def add_edge(src: str, dst: str, kind: EdgeKind, dec, span) -> EdgeRef | None:
        if src == dst:
            diags.append(error("C005", f"edge {src} -> {dst} resolves onto itself", span))
            return None
        edge = Edge(src, dst, kind, dec, span)
        if edge.ref not in seen_edges:
            seen_edges.add(edge.ref)
            edges.append(edge)
        return edge.ref

    for mod in archive.names():
        g = archive.modules[mod]
        for n in g.nodes:
            if n.id in replacement[mod]:
                continue
            qid = f"{mod}::{n.id}"
            if qid in node_ids:
                diags.append(error("C003", f"duplicate qualified id {qid}", n.span))
                continue
            node_ids.add(qid)
            nodes.append(replace(n, id=qid))
        public.extend(f"{mod}::{p}" for p in g.public_ids if p not in replacement[mod])

    ok_edges: dict[tuple[str, EdgeRef], EdgeRef | None] = {}
    for mod in archive.names():
        g = archive.modules[mod]
        for e in g.edges:
            if is_qualified(e.target) and not check_target(e.target, f"edge {mod}::{e.source}", e.span):
                continue
            dec = e.decoration
            if isinstance(dec, ChoiceMember):
                dec = ChoiceMember(f"{mod}.{dec.group}")
            src, dst = resolve(mod, e.source), resolve(mod, e.target)
            ok_edges[(mod, e.ref)] = add_edge(src, dst, e.kind, dec, e.span)
        for cg in g.choice_groups:
            groups.append(ChoiceGroup(f"{mod}.{cg.group}", resolve(mod, cg.source), cg.min, cg.max, cg.span))
        for a in g.acps:
            if a.confidence_module not in archive.modules:
                diags.append(
                    error("C004", f"ACP {mod}::{a.id} names missing confidence module {a.confidence_module}", a.span)
                )
            ref = ok_edges.get((mod, a.edge))
            if ref is not None:
                acps.append(AssuranceClaimPoint(f"{mod}::{a.id}", ref, a.confidence_module, a.span))

    for link in archive.links:
        ends = []
        for end, is_target in ((link.source, False), (link.target, True)):
            mod, local = split_qualified(end)
            g = archive.modules.get(mod)
            if g is None:
                diags.append(error("C001", f"link {link.source} -> {link.target} names unknown module {mod}", link.span))
                break
            if not local:
                local = _single_root(g)
                if local is None:
                    diags.append(error("C006", f"module {mod} has no single root to link to", link.span))
                    break
            qid = f"{mod}::{local}"
            if local not in g:
                diags.append(error("C005", f"link endpoint {qid} does not exist", link.span))
                break
            if is_target and not check_target(qid, f"link from {link.source}", link.span):
                break
            ends.append(resolve(mod, local))
        else:
            dec = OptionalLink() if link.kind is LinkKind.OPTIONAL else None
            add_edge(ends[0], ends[1], EdgeKind.SUPPORTED_BY, dec, link.span)

    live = {n.id for n in nodes}
    for e in edges:
        if e.target not in live:
            diags.append(error("C005", f"edge {e.source} -> {e.target} points at a node that was itself a reference", e.span))
    edges = [e for e in edges if e.source in live and e.target in live]
    graph = ArgumentGraph(name, tuple(nodes), tuple(edges), tuple(groups), tuple(acps), tuple(public))
    return Composition(graph, sort_diagnostics(diags))


# -- architecture ----------------------------------------------------------------


@dataclass(frozen=True)
class ArchitectureReport:
    findings: tuple[Diagnostic, ...] = ()

    @property
    def shape_ok(self) -> bool:
        return not has_errors(self.findings)

    @property
    def codes(self) -> list[str]:
        return [d.code for d in self.findings]


class ModuleLink(NamedTuple):
    supported: str
    supporter: str
    optional: bool


def module_links(archive: CaseArchive) -> list[ModuleLink]:
    """Module-level support relation from links, references and cross-module edges."""
    found: dict[tuple[str, str], bool] = {}

    def add(a: str, b: str, optional: bool) -> None:
        if a != b and a in archive.modules and b in archive.modules:
            found[(a, b)] = found.get((a, b), True) and optional

    for l in archive.links:
        add(l.source_module, l.target_module, l.kind is LinkKind.OPTIONAL)
    for mod in archive.names():
        g = archive.modules[mod]
        for e in g.edges:
            if e.kind is not EdgeKind.SUPPORTED_BY:
                continue
            optional = isinstance(e.decoration, OptionalLink)
            if is_qualified(e.target):
                add(mod, split_qualified(e.target)[0], optional)
                continue
            tgt = g.get(e.target)
            if tgt is None or tgt.ref is None:
                continue
            other = tgt.ref if tgt.kind is NodeKind.MODULE_REF else split_qualified(tgt.ref)[0]
            add(mod, other, optional)
    return [ModuleLink(a, b, opt) for (a, b), opt in sorted(found.items())]


ETHICS_PRINCIPLES = ("justice", "beneficence", "non-maleficence", "autonomy")


def check_architecture(archive: CaseArchive) -> ArchitectureReport:
    findings: list[Diagnostic] = []
    links = [l for l in module_links(archive) if archive.tag(l.supported) is not ArchTag.CONFIDENCE]
    supporters: dict[str, list[ModuleLink]] = {m: [] for m in archive.names()}
    for l in links:
        supporters[l.supported].append(l)

    ethics = [m for m in archive.names() if archive.tag(m) is ArchTag.ETHICS]
    systems = [m for m in archive.names() if archive.tag(m) is ArchTag.SYSTEM]

    if len(ethics) != 1:
        findings.append(error("A1", f"expected exactly one ethics module, found {len(ethics)}: {', '.join(ethics) or 'none'}"))
    for m in ethics:
        above = sorted(l.supported for l in links if l.supporter == m)
        if above:
            findings.append(error("A1", f"ethics module {m} supports {', '.join(above)} instead of heading the case"))

    for m in ethics:
        if not any(archive.tag(l.supporter) is ArchTag.SYSTEM for l in supporters[m]):
            findings.append(error("A2", f"ethics module {m} is not supported by any system module"))

    for m in systems:
        models = [l.supporter for l in supporters[m] if archive.tag(l.supporter) in MODEL_TAGS]
        if not models:
            findings.append(error("A3", f"system module {m} is not supported by any model argument module"))

    for l in links:
        ps_gp = (
            archive.tag(l.supported) is ArchTag.PURPOSE_SPECIFIC_MODEL
            and archive.tag(l.supporter) is ArchTag.GENERAL_PURPOSE_MODEL
        )
        if ps_gp and not l.optional:
            findings.append(error("A4", f"link {l.supported} -> {l.supporter} between model modules must be optional"))
        if l.optional and not ps_gp:
            findings.append(
                error("A4", f"optional link {l.supported} -> {l.supporter} must go from a purpose-specific to a general-purpose model module")
            )

    for m in ethics:
        refs = [n.statement.lower() for n in archive.modules[m].nodes if n.kind is NodeKind.MODULE_REF]
        if refs:
            missing = [p for p in ETHICS_PRINCIPLES if not any(p in s for s in refs)]
            if missing:
                findings.append(error("A5", f"ethics module {m} lacks sub-modules for {', '.join(missing)}"))

    return ArchitectureReport(tuple(sort_diagnostics(findings)))


# -- manifest ----------------------------------------------------------------------


class ManifestError(DiagnosticError):
    pass


def _parse_endpoint(ts: TokenStream, fail) -> str:
    mod = ts.next()
    if mod.kind != IDENT:
        fail(mod, "expected module name")
    if ts.peek().is_symbol("::"):
        ts.next()
        local = ts.next()
        if local.kind != IDENT:
            fail(local, "expected node id")
        return f"{mod.value}::{local.value}"
    return mod.value


def parse_manifest(text: str, file: str = "<manifest>"):
    """Parse manifest text into (module entries, links, trace path, diagnostics).

    Module entries are ``(name, path, tag, span)`` tuples; paths are left
    unresolved.
    """
    tokens, diags = lexer.tokenize(text, file, "M001")
    ts = TokenStream(tokens)
    entries = []
    links = []
    trace = None

    class _Bad(Exception):
        pass

    def fail(tok, msg):
        diags.append(error("M001", f"{msg}, found {tok}", tok.span(file)))
        raise _Bad

    while not ts.at_eof():
        head = ts.next()
        try:
            if head.is_word("module"):
                name = ts.next()
                if name.kind != IDENT:
                    fail(name, "expected module name")
                if not ts.next().is_symbol("="):
                    fail(ts.last, "expected '='")
                path = ts.next()
                if path.kind != STRING:
                    fail(path, "expected quoted file path")
                tag = ArchTag.OTHER
                if ts.peek().is_word("tag"):
                    ts.next()
                    t = ts.next()
                    try:
                        tag = ArchTag(t.value) if t.kind == IDENT else None
                    except ValueError:
                        tag = None
                    if tag is None:
                        fail(t, "expected one of " + ", ".join(x.value for x in ArchTag))
                entries.append((name.value, path.value, tag, name.span(file)))
            elif head.is_word("link"):
                src = _parse_endpoint(ts, fail)
                if not ts.next().is_symbol("->"):
                    fail(ts.last, "expected '->'")
                dst = _parse_endpoint(ts, fail)
                if not ts.next().is_symbol(":"):
                    fail(ts.last, "expected ':'")
                kind = ts.next()
                if not kind.is_word("supported_by", "optional"):
                    fail(kind, "expected supported_by or optional")
                links.append(CompositionLink(src, dst, LinkKind(kind.value), head.span(file)))
            elif head.is_word("trace"):
                path = ts.next()
                if path.kind != STRING:
                    fail(path, "expected quoted file path")
                trace = path.value
            else:
                fail(head, "expected module, link or trace")
        except _Bad:
            while not ts.at_eof() and not ts.peek().is_word("module", "link", "trace"):
                ts.next()
    return entries, links, trace, diags


def load_archive(path) -> CaseArchive:
    """Read a manifest and the module files it lists (paths relative to it)."""
    path = Path(path)
    text = path.read_bytes().decode("utf-8")
    entries, links, trace, diags = parse_manifest(text, str(path))
    modules: dict[str, ArgumentGraph] = {}
    tags: dict[str, ArchTag] = {}
    docs = {}
    for name, rel, tag, span in entries:
        if name in modules:
            diags.append(error("M004", f"module {name} listed twice", span))
            continue
        file = path.parent / rel
        if file not in docs:
            try:
                docs[file] = parse(file.read_bytes().decode("utf-8"), str(file))
            except OSError as exc:
                diags.append(error("M002", f"cannot read {rel}: {exc.strerror}", span))
                continue
            diags.extend(docs[file][1])
        doc = docs[file][0]
        if name not in {g.module_name for g in doc.modules}:
            diags.append(error("M003", f"{rel} does not define module {name}", span))
            continue
        modules[name] = doc.module(name)
        tags[name] = tag
    if has_errors(diags):
        raise ManifestError(sort_diagnostics(diags))
    return CaseArchive(modules, tuple(links), tags, path.parent / trace if trace else None)


def archive_from_graphs(graphs: Iterable[ArgumentGraph], tags: dict[str, ArchTag] | None = None, links=()) -> CaseArchive:
    graphs = list(graphs)
    return CaseArchive({g.module_name: g for g in graphs}, tuple(links), dict(tags or {}))


__all__ = [
    "ArchTag",
    "ArchitectureReport",
    "CaseArchive",
    "Composition",
    "CompositionError",
    "CompositionLink",
    "LinkKind",
    "ManifestError",
    "ModuleLink",
    "archive_from_graphs",
    "check_architecture",
    "compose",
    "load_archive",
    "merge_archives",
    "module_links",
    "parse_manifest",
]
