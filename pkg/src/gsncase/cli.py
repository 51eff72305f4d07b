"""``gsncase`` command line: check, fmt, instantiate, compose, arch-check,
trace, export and catalog.

Exit status is 0 on success, 1 when Error diagnostics (or rejected inputs)
were reported, and 2 on usage or I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from . import __version__
from .composer import ManifestError, check_architecture, compose, load_archive
from .diagnostics import Diagnostic, DiagnosticError, has_errors, sort_diagnostics
from .dsl import Document, ModuleTag, parse, serialize
from .export import to_dot, to_json
from .library import ROOT as LIBRARY_ROOT
from .library import catalog
from .patterns import BindingsError, InstantiationError, instantiate, load_bindings
from .traceability import (
    TraceError,
    UnknownEntityError,
    check_bindings,
    coverage,
    impact,
    load_trace,
    parse_trace,
)
from .validator import validate

EXIT_OK = 0
EXIT_ERRORS = 1
EXIT_USAGE = 2


class _Fail(Exception):
    def __init__(self, status: int, message: str = ""):
        super().__init__(message)
        self.status = status
        self.message = message


class Console:
    """Writes to the given streams; colour only on a TTY without NO_COLOR."""

    _COLOURS = {"error": "31", "warning": "33", "info": "36", "ok": "32"}

    def __init__(self, out=None, err=None):
        self.out = out or sys.stdout
        self.err = err or sys.stderr

    def _styled(self, stream) -> bool:
        return "NO_COLOR" not in os.environ and hasattr(stream, "isatty") and stream.isatty()

    def paint(self, text: str, tone: str, stream=None) -> str:
        if not self._styled(stream or self.out):
            return text
        return f"\033[{self._COLOURS[tone]}m{text}\033[0m"

    def print(self, text: str = "") -> None:
        self.out.write(text + "\n")

    def write(self, text: str) -> None:
        self.out.write(text)

    def eprint(self, text: str) -> None:
        self.err.write(text + "\n")

    def diagnostic(self, d: Diagnostic, stream=None) -> None:
        line = d.render()
        tone = d.severity.value
        head = f"{d.severity.value}[{d.code}]"
        target = stream or self.out
        target.write(line.replace(head, self.paint(head, tone, target), 1) + "\n")


def _read(path: str) -> str:
    try:
        return Path(path).read_bytes().decode("utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        reason = exc.strerror if isinstance(exc, OSError) else "not valid UTF-8"
        raise _Fail(EXIT_USAGE, f"error: cannot read {path}: {reason}") from None


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_bytes(text.encode("utf-8"))
    except OSError as exc:
        raise _Fail(EXIT_USAGE, f"error: cannot write {path}: {exc.strerror}") from None


def _emit(con: Console, text: str, out: str | None) -> None:
    if out:
        _write(out, text)
    else:
        con.write(text)


def _load_document(path: str) -> tuple[Document, list[Diagnostic]]:
    doc, diags = parse(_read(path), path)
    if not has_errors(diags):
        diags = sort_diagnostics(diags + validate(doc))
    return doc, diags


# -- check ------------------------------------------------------------------------


def _check_one(path: str) -> tuple[list[Diagnostic], str | None]:
    try:
        if path.endswith(".trc"):
            try:
                return parse_trace(_read(path), path)[1], None
            except TraceError as exc:
                return list(exc.diagnostics), None
        if path.endswith(".manifest"):
            try:
                archive = load_archive(path)
            except ManifestError as exc:
                return list(exc.diagnostics), None
            except OSError as exc:
                return [], f"error: cannot read {path}: {exc.strerror}"
            return compose(archive).diagnostics, None
        return _load_document(path)[1], None
    except _Fail as f:
        return [], f.message


def cmd_check(args, con: Console) -> int:
    with ThreadPoolExecutor(max_workers=min(8, max(1, len(args.paths)))) as pool:
        results = list(pool.map(_check_one, args.paths))
    diags: list[Diagnostic] = []
    io_failures = []
    for diag_list, failure in results:
        diags.extend(diag_list)
        if failure:
            io_failures.append(failure)
    diags = sort_diagnostics(diags)
    if args.format == "json":
        con.write(json.dumps({"diagnostics": [d.to_json() for d in diags]}, indent=2) + "\n")
    else:
        for d in diags:
            con.diagnostic(d)
    for f in io_failures:
        con.eprint(f)
    if io_failures:
        return EXIT_USAGE
    return EXIT_ERRORS if has_errors(diags) else EXIT_OK


# -- fmt --------------------------------------------------------------------------


def _format_one(path: str):
    """(path, original text, diagnostics, canonical text or None, read failure)."""
    try:
        text = _read(path)
    except _Fail as f:
        return path, None, [], None, f.message
    doc, diags = parse(text, path)
    if has_errors(diags):
        return path, text, diags, None, None
    return path, text, diags, serialize(doc), None


def cmd_fmt(args, con: Console) -> int:
    if args.out and len(args.paths) != 1:
        raise _Fail(EXIT_USAGE, "error: --out needs exactly one input path")
    with ThreadPoolExecutor(max_workers=min(8, max(1, len(args.paths)))) as pool:
        results = list(pool.map(_format_one, args.paths))
    status = EXIT_OK
    for path, text, diags, formatted, failure in results:
        if failure:
            con.eprint(failure)
            status = EXIT_USAGE
            continue
        for d in diags:
            con.diagnostic(d, con.err)
        if formatted is None:
            # Unparseable input passes through untouched.
            if not args.check:
                _emit(con, text, args.out)
            status = max(status, EXIT_ERRORS)
            continue
        if args.check:
            if formatted != text:
                con.print(f"would reformat {path}")
                status = max(status, EXIT_ERRORS)
        else:
            _emit(con, formatted, args.out)
    return status


# -- instantiate --------------------------------------------------------------------


def cmd_instantiate(args, con: Console) -> int:
    doc, diags = _load_document(args.pattern)
    for d in diags:
        con.diagnostic(d, con.err)
    if has_errors(diags):
        return EXIT_ERRORS
    if not doc.modules:
        raise _Fail(EXIT_ERRORS, f"error: {args.pattern} defines no module")
    if args.module:
        try:
            pattern = doc.module(args.module)
        except KeyError:
            raise _Fail(EXIT_ERRORS, f"error: {args.pattern} has no module {args.module}") from None
    else:
        pattern = doc.modules[0]
    bindings = None
    if args.bindings:
        try:
            bindings = load_bindings(args.bindings)
        except OSError as exc:
            raise _Fail(EXIT_USAGE, f"error: cannot read {args.bindings}: {exc.strerror}") from None
        except BindingsError as exc:
            for d in exc.diagnostics:
                con.diagnostic(d, con.err)
            return EXIT_ERRORS
    try:
        result = instantiate(pattern, bindings, partial=args.partial, module_name=args.name)
    except InstantiationError as exc:
        con.eprint(f"error: {exc}")
        for d in exc.diagnostics:
            con.diagnostic(d, con.err)
        return EXIT_ERRORS
    text = serialize(Document((result.graph,), (ModuleTag.INSTANCE,)))
    _emit(con, text, args.out)
    summary = result.report.summary()
    if args.out:
        con.print(summary)
    else:
        con.eprint(summary)
    return EXIT_OK


# -- compose / arch-check -------------------------------------------------------------


def _archive(path: str, con: Console):
    try:
        return load_archive(path)
    except OSError as exc:
        raise _Fail(EXIT_USAGE, f"error: cannot read {path}: {exc.strerror}") from None
    except ManifestError as exc:
        for d in exc.diagnostics:
            con.diagnostic(d, con.err)
        raise _Fail(EXIT_ERRORS) from None


def cmd_compose(args, con: Console) -> int:
    archive = _archive(args.manifest, con)
    result = compose(archive, args.name)
    for d in result.diagnostics:
        con.diagnostic(d, con.err)
    text = to_dot(result.graph) if args.format == "dot" else to_json(result.graph)
    _emit(con, text, args.out)
    return EXIT_OK if result.ok else EXIT_ERRORS


def cmd_arch_check(args, con: Console) -> int:
    archive = _archive(args.manifest, con)
    report = check_architecture(archive)
    if args.format == "json":
        data = {"shape_ok": report.shape_ok, "findings": [d.to_json() for d in report.findings]}
        con.write(json.dumps(data, indent=2) + "\n")
    else:
        for d in report.findings:
            con.diagnostic(d)
        con.print("shape ok" if report.shape_ok else "shape violated")
    return EXIT_OK if report.shape_ok else EXIT_ERRORS


# -- trace ------------------------------------------------------------------------


def cmd_trace(args, con: Console) -> int:
    archive = None
    if args.path.endswith(".trc"):
        trace_path = args.path
    else:
        archive = _archive(args.path, con)
        if archive.trace is None:
            raise _Fail(EXIT_ERRORS, f"error: {args.path} names no trace file")
        trace_path = str(archive.trace)
    try:
        model, diags = load_trace(trace_path)
    except OSError as exc:
        raise _Fail(EXIT_USAGE, f"error: cannot read {trace_path}: {exc.strerror}") from None
    except TraceError as exc:
        for d in exc.diagnostics:
            con.diagnostic(d, con.err)
        return EXIT_ERRORS
    if archive is not None:
        diags = diags + check_bindings(model, archive)
    for d in sort_diagnostics(diags):
        con.diagnostic(d, con.err)
    if has_errors(diags):
        return EXIT_ERRORS
    if args.impact:
        try:
            report = impact(model, archive, args.impact, strict=args.strict)
        except UnknownEntityError as exc:
            raise _Fail(EXIT_ERRORS, f"error: {exc.args[0]}") from None
        if args.format == "json":
            con.write(json.dumps(report.to_json(), indent=2) + "\n")
        else:
            con.write(report.render())
        return EXIT_OK
    cov = coverage(model, strict=args.strict)
    if args.format == "json":
        con.write(json.dumps(cov.to_json(), indent=2) + "\n")
    else:
        con.write(cov.render())
    return EXIT_OK


# -- export / catalog ------------------------------------------------------------------


def cmd_export(args, con: Console) -> int:
    doc, diags = _load_document(args.path)
    for d in diags:
        con.diagnostic(d, con.err)
    if has_errors(diags):
        return EXIT_ERRORS
    text = to_dot(doc) if args.format == "dot" else to_json(doc)
    _emit(con, text, args.out)
    return EXIT_OK


def cmd_catalog(args, con: Console) -> int:
    rows = [
        {"name": e.name, "kind": e.kind, "path": e.path.relative_to(LIBRARY_ROOT).as_posix(), "source": e.provenance}
        for e in catalog()
    ]
    if args.format == "json":
        con.write(json.dumps({"entries": rows}, indent=2) + "\n")
    else:
        width = max(len(r["name"]) for r in rows)
        for r in rows:
            con.print(f"{r['name']:<{width}}  {r['kind']:<7}  {r['path']}")
    return EXIT_OK


# -- entry point -------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gsncase", description="Author, check and compose GSN assurance cases.")
    p.add_argument("--version", action="version", version=f"gsncase {__version__}")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    c = sub.add_parser("check", help="parse and validate .gsn files (also .trc and .manifest)")
    c.add_argument("paths", nargs="+")
    c.add_argument("--format", choices=("text", "json"), default="text")
    c.set_defaults(run=cmd_check)

    f = sub.add_parser("fmt", help="print files in canonical form")
    f.add_argument("paths", nargs="+")
    f.add_argument("--check", action="store_true", help="only report files that are not canonical")
    f.add_argument("--out", help="write the result here instead of standard output")
    f.set_defaults(run=cmd_fmt)

    i = sub.add_parser("instantiate", help="instantiate a pattern with a bindings file")
    i.add_argument("pattern")
    i.add_argument("--bindings")
    i.add_argument("--out")
    i.add_argument("--module", help="pattern module to use when the file holds several")
    i.add_argument("--name", help="module name for the instance")
    i.add_argument("--partial", action="store_true", help="leave unbound roles in place")
    i.set_defaults(run=cmd_instantiate)

    m = sub.add_parser("compose", help="merge the modules of a case manifest")
    m.add_argument("manifest")
    m.add_argument("--format", choices=("json", "dot"), default="json")
    m.add_argument("--name", default="case")
    m.add_argument("--out")
    m.set_defaults(run=cmd_compose)

    a = sub.add_parser("arch-check", help="check the module architecture of a case manifest")
    a.add_argument("manifest")
    a.add_argument("--format", choices=("text", "json"), default="text")
    a.set_defaults(run=cmd_arch_check)

    t = sub.add_parser("trace", help="coverage or evidence impact for a trace model")
    t.add_argument("path", help="a .trc file or a case manifest naming one")
    t.add_argument("--impact", metavar="EVIDENCE_ID")
    t.add_argument("--format", choices=("text", "json"), default="text")
    t.add_argument("--strict", action="store_true", help="require measured values to meet thresholds")
    t.set_defaults(run=cmd_trace)

    e = sub.add_parser("export", help="render a .gsn file as DOT or JSON")
    e.add_argument("path")
    e.add_argument("--format", choices=("dot", "json"), default="dot")
    e.add_argument("--out")
    e.set_defaults(run=cmd_export)

    k = sub.add_parser("catalog", help="list the shipped patterns and samples")
    k.add_argument("--format", choices=("text", "json"), default="text")
    k.set_defaults(run=cmd_catalog)
    return p


def main(argv: list[str] | None = None, *, stdout=None, stderr=None) -> int:
    con = Console(stdout, stderr)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.run(args, con)
    except _Fail as f:
        if f.message:
            con.eprint(f.message)
        return f.status
    except DiagnosticError as exc:
        for d in exc.diagnostics:
            con.diagnostic(d, con.err)
        return EXIT_ERRORS


def run() -> None:
    sys.exit(main())
