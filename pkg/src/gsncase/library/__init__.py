"""Shipped argument patterns and sample cases, with golden expectations."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from ..composer import CaseArchive, load_archive
from ..diagnostics import DiagnosticError, error, has_errors
from ..dsl import parse_file
from ..model import ArgumentGraph, EdgeKind, EdgeRef, NodeKind
from ..validator import validate_graph

ROOT = Path(__file__).resolve().parent
PATTERNS = ROOT / "patterns"
SAMPLES = ROOT / "samples"


class LibraryError(DiagnosticError):
    pass


class UnknownEntryError(KeyError):
    pass


@dataclass(frozen=True)
class Expectation:
    min_kinds: dict[NodeKind, int] = field(default_factory=dict)
    required_ids: tuple[str, ...] = ()
    required_edges: tuple[EdgeRef, ...] = ()
    # node id -> text its statement must contain
    fragments: dict[str, str] = field(default_factory=dict)
    # node id -> text its statement must start with
    prefixes: dict[str, str] = field(default_factory=dict)
    min_acps: int = 0
    acp_edges: tuple[EdgeRef, ...] = ()


@dataclass(frozen=True)
class LibraryEntry:
    name: str
    path: Path
    kind: str  # "pattern" or "archive"
    provenance: str
    expected: Expectation = field(default_factory=Expectation)


def _sb(a: str, b: str) -> EdgeRef:
    return EdgeRef(a, b, EdgeKind.SUPPORTED_BY)


def _ic(a: str, b: str) -> EdgeRef:
    return EdgeRef(a, b, EdgeKind.IN_CONTEXT_OF)


_STAGES = ("ST1", "ST2", "ST3", "ST4", "ST5", "ST6")

_CATALOG = (
    LibraryEntry(
        "big_top",
        PATTERNS / "big_top.gsn",
        "pattern",
        "top-level composition diagram",
        Expectation(
            {NodeKind.MODULE_REF: 4},
            ("ETH", "SYS", "PSM", "GPM"),
            (_sb("ETH", "SYS"), _sb("SYS", "PSM"), _sb("SYS", "GPM"), _sb("PSM", "GPM")),
        ),
    ),
    LibraryEntry(
        "ethics",
        PATTERNS / "ethics.gsn",
        "pattern",
        "ethical argument diagram",
        Expectation(
            {NodeKind.MODULE_REF: 6},
            ("EA", "JU", "BE", "NM", "HA", "TR"),
            (_sb("EA", "JU"), _sb("JU", "BE"), _sb("JU", "NM"), _sb("JU", "HA")),
        ),
    ),
    LibraryEntry(
        "justice",
        PATTERNS / "justice.gsn",
        "pattern",
        "justice argument module diagram",
        Expectation(
            {NodeKind.GOAL: 5, NodeKind.STRATEGY: 2},
            ("JG1", "JA1", "JA2", "JG3", "JG4", "JG5"),
            (_sb("JG1", "JA1"), _sb("JG1", "JA2"), _sb("JA2", "JG3"), _sb("JA2", "JG4"), _sb("JA2", "JG5")),
            {"JG3": "Unacceptable role combinations are eliminated", "JG4": "does not entrench existing inequalities"},
            {"JG1": "distribution of benefit, tolerable residual risk"},
        ),
    ),
    LibraryEntry(
        "system",
        PATTERNS / "system.gsn",
        "pattern",
        "AI system safety argument diagram",
        Expectation(
            {NodeKind.GOAL: 6, NodeKind.CONTEXT: 4, NodeKind.JUSTIFICATION: 1},
            ("G0", "G1", "G3", "G7", "G9", "S3", "J1", "C1", "C2", "C3", "C4"),
            (_sb("G0", "S1"), _sb("S1", "G1"), _sb("S1", "G7"), _ic("G3", "C2"), _ic("G3", "J1"), _ic("G9", "C4")),
            {"G0": "sufficiently safe throughout its entire operational life", "J1": "Safe Operating Concept"},
            {},
            2,
            (_ic("G3", "C2"),),
        ),
    ),
    LibraryEntry(
        "amlas_scoping",
        PATTERNS / "amlas_scoping.gsn",
        "pattern",
        "purpose-specific AI model safety argument diagram",
        Expectation(
            {NodeKind.GOAL: 11, NodeKind.SOLUTION: 1},
            ("G3.1", "G3.2", *_STAGES),
            tuple(_sb("S3.1", s) for s in _STAGES) + (_sb("G3.1", "S3.1"), _sb("ST3", "G3.2")),
            {
                "G3.1": "satisfies its allocated system safety requirements",
                "ST1": "ML Safety Assurance Scoping",
                "ST2": "ML Safety Requirements Assurance",
                "ST3": "Data Management Assurance",
                "ST4": "Model Learning Assurance",
                "ST5": "Model Verification Assurance",
                "ST6": "Model Deployment Assurance",
                "DR1": "relevance",
                "DR2": "completeness",
                "DR3": "accuracy",
                "DR4": "balance",
            },
        ),
    ),
    LibraryEntry(
        "gpai",
        PATTERNS / "gpai.gsn",
        "pattern",
        "general-purpose AI model safety argument diagram",
        Expectation(
            {NodeKind.CONTEXT: 3},
            ("GPG1", "GPC3", "GPC5"),
            (_ic("GPG1", "GPC3"),),
            {"GPG1": "GPAI capabilities do not cause unacceptable outcomes"},
        ),
    ),
    LibraryEntry(
        "wildfire_case",
        SAMPLES / "wildfire" / "case.manifest",
        "archive",
        "wildfire alert system worked example",
    ),
    LibraryEntry(
        "sepsis_trace",
        SAMPLES / "sepsis" / "case.manifest",
        "archive",
        "sepsis treatment worked example",
    ),
)


def catalog() -> list[LibraryEntry]:
    return list(_CATALOG)


def entry(name: str) -> LibraryEntry:
    for e in _CATALOG:
        if e.name == name:
            return e
    raise UnknownEntryError(f"no library entry named {name!r}; known: {', '.join(e.name for e in _CATALOG)}")


def check_expectation(graph: ArgumentGraph, exp: Expectation) -> list[str]:
    """Human-readable mismatches between ``graph`` and ``exp``; empty when conformant."""
    problems = []
    for kind, n in exp.min_kinds.items():
        have = sum(1 for x in graph.nodes if x.kind is kind)
        if have < n:
            problems.append(f"expected at least {n} {kind.value} nodes, found {have}")
    for nid in exp.required_ids:
        if nid not in graph:
            problems.append(f"missing node {nid}")
    for ref in exp.required_edges:
        if graph.edge(ref) is None:
            problems.append(f"missing edge {ref}")
    for nid, text in exp.fragments.items():
        node = graph.get(nid)
        if node is None or text not in node.statement:
            problems.append(f"{nid} should contain {text!r}")
    for nid, text in exp.prefixes.items():
        node = graph.get(nid)
        if node is None or not node.statement.startswith(text):
            problems.append(f"{nid} should begin with {text!r}")
    if len(graph.acps) < exp.min_acps:
        problems.append(f"expected at least {exp.min_acps} ACPs, found {len(graph.acps)}")
    attached = {a.edge for a in graph.acps}
    for ref in exp.acp_edges:
        if ref not in attached:
            problems.append(f"no ACP on {ref}")
    return problems


def load(name: str) -> ArgumentGraph | CaseArchive:
    """Parse and validate a library entry; any Error is a build-breaking LibraryError."""
    e = entry(name)
    if e.kind == "archive":
        archive = load_archive(e.path)
        diags = [d for g in archive.modules.values() for d in validate_graph(g)]
        if has_errors(diags):
            raise LibraryError(diags)
        return archive
    doc, diags = parse_file(e.path)
    if not has_errors(diags):
        diags = diags + validate_graph(doc.modules[0])
    if has_errors(diags):
        raise LibraryError(diags)
    graph = doc.modules[0]
    problems = check_expectation(graph, e.expected)
    if problems:
        raise LibraryError([error("L001", f"{name}: {p}") for p in problems])
    return graph


__all__ = [
    "Expectation",
    "LibraryEntry",
    "LibraryError",
    "UnknownEntryError",
    "catalog",
    "check_expectation",
    "entry",
    "load",
]
