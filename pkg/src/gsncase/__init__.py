"""Goal Structuring Notation (GSN) assurance cases as text: a line-oriented
DSL, well-formedness checking, pattern instantiation, multi-module
composition and hazard-to-evidence traceability."""

__version__ = "0.1.0"

from .composer import CaseArchive, check_architecture, compose, load_archive
from .diagnostics import Diagnostic, Severity, SourceSpan
from .dsl import Document, ModuleTag, parse, parse_file, serialize
from .model import ArgumentGraph, Edge, EdgeKind, Node, NodeKind
from .patterns import BindingSet, instantiate, completeness
from .traceability import TraceModel, coverage, impact, link_to_case, parse_trace
from .validator import validate

__all__ = [
    "ArgumentGraph",
    "BindingSet",
    "CaseArchive",
    "Diagnostic",
    "Document",
    "Edge",
    "EdgeKind",
    "ModuleTag",
    "Node",
    "NodeKind",
    "Severity",
    "SourceSpan",
    "TraceModel",
    "check_architecture",
    "completeness",
    "compose",
    "coverage",
    "impact",
    "instantiate",
    "link_to_case",
    "load_archive",
    "parse",
    "parse_file",
    "parse_trace",
    "serialize",
    "validate",
]
