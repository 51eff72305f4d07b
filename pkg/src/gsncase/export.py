"""Graphviz DOT rendering and the versioned JSON interchange format."""

from __future__ import annotations

import json
import textwrap
from functools import lru_cache
from pathlib import Path
from typing import Iterable

import jsonschema

from .dsl import Document, ModuleTag
from .model import (
    ArgumentGraph,
    AssuranceClaimPoint,
    ChoiceGroup,
    ChoiceMember,
    Edge,
    EdgeKind,
    EdgeRef,
    Multiplicity,
    Node,
    NodeKind,
    OptionalLink,
)

FORMAT_VERSION = 1
SCHEMA_PATH = Path(__file__).resolve().parent / "schema" / "gsn_document.schema.json"


class SchemaError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("; ".join(problems))


@lru_cache(maxsize=1)
def schema() -> dict:
    return json.loads(SCHEMA_PATH.read_text(encoding="utf-8"))


def _modules(doc) -> list[tuple[ArgumentGraph, ModuleTag]]:
    if isinstance(doc, ArgumentGraph):
        return [(doc, ModuleTag.INSTANCE)]
    if isinstance(doc, Document):
        return list(doc)
    return [(g, ModuleTag.INSTANCE) for g in doc]


# -- JSON -------------------------------------------------------------------------


def _decoration_json(dec):
    if isinstance(dec, Multiplicity):
        return {"type": "multiplicity", "min": dec.min, "max": dec.max}
    if isinstance(dec, OptionalLink):
        return {"type": "optional"}
    if isinstance(dec, ChoiceMember):
        return {"type": "choice", "group": dec.group}
    return None


def module_json(graph: ArgumentGraph, tag: ModuleTag = ModuleTag.INSTANCE) -> dict:
    return {
        "name": graph.module_name,
        "tag": tag.value,
        "nodes": [
            {
                "id": n.id,
                "kind": n.kind.value,
                "statement": n.statement,
                "undeveloped": n.undeveloped,
                "uninstantiated": n.uninstantiated,
                "ref": n.ref,
            }
            for n in graph.nodes
        ],
        "edges": [
            {"source": e.source, "target": e.target, "kind": e.kind.value, "decoration": _decoration_json(e.decoration)}
            for e in graph.edges
        ],
        "choice_groups": [
            {"group": g.group, "source": g.source, "min": g.min, "max": g.max} for g in graph.choice_groups
        ],
        "acps": [
            {
                "id": a.id,
                "source": a.edge.source,
                "target": a.edge.target,
                "kind": a.edge.kind.value,
                "confidence_module": a.confidence_module,
            }
            for a in graph.acps
        ],
        "public": list(graph.public_ids),
    }


def to_json_data(doc: Document | ArgumentGraph | Iterable[ArgumentGraph]) -> dict:
    return {"format_version": FORMAT_VERSION, "modules": [module_json(g, t) for g, t in _modules(doc)]}


def to_json(doc) -> str:
    return json.dumps(to_json_data(doc), indent=2, ensure_ascii=False) + "\n"


def validate_json(data) -> list[str]:
    """Schema violations as ``path: message`` strings, in a stable order."""
    validator = jsonschema.Draft202012Validator(schema())
    problems = []
    for err in validator.iter_errors(data):
        path = "/".join(str(p) for p in err.absolute_path) or "(root)"
        problems.append(f"{path}: {err.message}")
    return sorted(problems)


def _decoration(data):
    if data is None:
        return None
    if data["type"] == "multiplicity":
        return Multiplicity(data["min"], data["max"])
    if data["type"] == "optional":
        return OptionalLink()
    return ChoiceMember(data["group"])


def from_json_data(data) -> Document:
    """Rebuild a document; unknown fields or versions are rejected."""
    problems = validate_json(data)
    if problems:
        raise SchemaError(problems)
    graphs = []
    tags = []
    for m in data["modules"]:
        nodes = tuple(
            Node(
                n["id"],
                NodeKind(n["kind"]),
                n["statement"],
                n.get("undeveloped", False),
                n.get("uninstantiated", False),
                n.get("ref"),
            )
            for n in m["nodes"]
        )
        edges = tuple(
            Edge(e["source"], e["target"], EdgeKind(e["kind"]), _decoration(e.get("decoration"))) for e in m["edges"]
        )
        groups = tuple(ChoiceGroup(g["group"], g["source"], g["min"], g["max"]) for g in m["choice_groups"])
        acps = tuple(
            AssuranceClaimPoint(a["id"], EdgeRef(a["source"], a["target"], EdgeKind(a["kind"])), a["confidence_module"])
            for a in m["acps"]
        )
        graphs.append(ArgumentGraph(m["name"], nodes, edges, groups, acps, tuple(m["public"])))
        tags.append(ModuleTag(m.get("tag", "module")))
    return Document(tuple(graphs), tuple(tags))


def from_json(text: str) -> Document:
    return from_json_data(json.loads(text))


# -- DOT --------------------------------------------------------------------------

_SHAPES = {
    NodeKind.GOAL: ("box", ""),
    NodeKind.STRATEGY: ("parallelogram", ""),
    NodeKind.SOLUTION: ("circle", ""),
    NodeKind.CONTEXT: ("box", "rounded"),
    NodeKind.ASSUMPTION: ("ellipse", ""),
    NodeKind.JUSTIFICATION: ("ellipse", ""),
    NodeKind.MODULE_REF: ("tab", ""),
    NodeKind.AWAY_GOAL: ("box", "dashed"),
}

# Assumptions and justifications share the ellipse; GSN marks them with a letter.
_LABEL_MARK = {NodeKind.ASSUMPTION: " (A)", NodeKind.JUSTIFICATION: " (J)"}


def _dot_str(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n") + '"'


def _node_label(n: Node) -> str:
    lines = [n.id + _LABEL_MARK.get(n.kind, "")]
    lines.extend(textwrap.wrap(n.statement, 32) or [""])
    if n.ref:
        lines.append(f"[{n.ref}]")
    flags = []
    if n.undeveloped:
        flags.append("\u25c7 undeveloped")
    if n.uninstantiated:
        flags.append("\u25b3 uninstantiated")
    if flags:
        lines.append(" ".join(flags))
    return "\n".join(lines)


def _edge_label(e: Edge, acps: list[AssuranceClaimPoint]) -> str:
    parts = []
    dec = e.decoration
    if isinstance(dec, Multiplicity):
        parts.append(f"\u25cf {dec}")
    elif isinstance(dec, OptionalLink):
        parts.append("\u25cb optional")
    elif isinstance(dec, ChoiceMember):
        parts.append(f"\u25c6 {dec.group}")
    parts.extend(f"\u25a0 {a.id}" for a in acps)
    return " ".join(parts)


def to_dot(doc) -> str:
    """Deterministic DOT text; modules become clusters and ids are ``module::id``."""
    modules = _modules(doc)
    single = len(modules) == 1
    name = modules[0][0].module_name if single else "document"
    out = [f"digraph {_dot_str(name)} {{", "  rankdir=TB;", '  node [fontname="Helvetica", fontsize=10];',
           '  edge [fontname="Helvetica", fontsize=9];']
    for graph, tag in modules:
        indent = "    "
        out.append(f"  subgraph {_dot_str('cluster_' + graph.module_name)} {{")
        out.append(f"{indent}label={_dot_str(f'{tag.value} {graph.module_name}')};")

        def qid(node_id: str, graph=graph) -> str:
            return node_id if "::" in node_id else f"{graph.module_name}::{node_id}"

        for n in graph.nodes:
            shape, style = _SHAPES[n.kind]
            attrs = [f"label={_dot_str(_node_label(n))}", f"shape={shape}"]
            if style:
                attrs.append(f'style="{style}"')
            if n.kind is NodeKind.SOLUTION:
                attrs.append("fixedsize=false")
            out.append(f"{indent}{_dot_str(qid(n.id))} [{', '.join(attrs)}];")
        for e in graph.edges:
            attrs = ["arrowhead=normal" if e.kind is EdgeKind.SUPPORTED_BY else "arrowhead=empty"]
            label = _edge_label(e, [a for a in graph.acps if a.edge == e.ref])
            if label:
                attrs.append(f"label={_dot_str(label)}")
            if isinstance(e.decoration, OptionalLink):
                attrs.append('style="dashed"')
            out.append(f"{indent}{_dot_str(qid(e.source))} -> {_dot_str(qid(e.target))} [{', '.join(attrs)}];")
        out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"


__all__ = [
    "FORMAT_VERSION",
    "SCHEMA_PATH",
    "SchemaError",
    "from_json",
    "from_json_data",
    "module_json",
    "schema",
    "to_dot",
    "to_json",
    "to_json_data",
    "validate_json",
]
