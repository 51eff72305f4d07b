import random

import pytest

from gsncase.dsl import (
    Document,
    ModuleTag,
    ParseError,
    SerializeError,
    documents_equal,
    format_text,
    parse,
    parse_strict,
    serialize,
)
from gsncase.lexer import quote, tokenize, unescape_string
from gsncase.model import ArgumentGraph, ChoiceMember, EdgeKind, Multiplicity, Node, NodeKind, OptionalLink

from generators import random_document

SAMPLE = """\
# leading comment
pattern demo {
  goal G1 "{System} is safe" uninstantiated  # root
  strategy S1 "Argue over hazards"
  # about G2
  goal G2 "Hazard {H} is mitigated" undeveloped uninstantiated
  solution Sn1 "Test report"
  context C1 "Operating context"
  moduleref M1 "Model argument" ref model
  awaygoal A1 "Model is safe" ref model::G0

  G1 -> S1 : supported_by
  S1 -> G2 : supported_by mult 1..*
  S1 -> Sn1 : supported_by optional
  G1 -> C1 : in_context_of
  S1 -> M1 : supported_by choice kinds
  S1 -> A1 : supported_by choice kinds

  choice kinds at S1 pick 1..2

  acp ACP1 on (G1 -> C1 : in_context_of) confidence conf

  public G1, S1
  # tail
}
"""


def test_parse_sample():
    doc, diags = parse(SAMPLE, "demo.gsn")
    assert diags == []
    g = doc.module("demo")
    assert doc.tag("demo") is ModuleTag.PATTERN
    assert g.node("G2").undeveloped and g.node("G2").uninstantiated
    assert g.node("M1").ref == "model"
    assert g.edge(("S1", "G2", EdgeKind.SUPPORTED_BY)).decoration == Multiplicity(1, None)
    assert g.edge(("S1", "Sn1", EdgeKind.SUPPORTED_BY)).decoration == OptionalLink()
    assert g.edge(("S1", "A1", EdgeKind.SUPPORTED_BY)).decoration == ChoiceMember("kinds")
    assert g.choice_group("kinds").max == 2
    assert g.acps[0].edge.target == "C1"
    assert g.public_ids == ("G1", "S1")
    assert g.node("G1").span.start_line == 3


def test_sample_is_canonical():
    assert format_text(SAMPLE) == SAMPLE


def test_comments_survive_formatting():
    text = format_text(SAMPLE)
    for c in ("# leading comment", "# root", "# about G2", "# tail"):
        assert c in text


def test_format_normalizes_layout():
    messy = 'module  m{goal G1 "x"\r\n\n\n   goal G2 "y"  G1->G2:supported_by public G1}'
    assert format_text(messy) == (
        'module m {\n  goal G1 "x"\n  goal G2 "y"\n\n  G1 -> G2 : supported_by\n\n  public G1\n}\n'
    )


@pytest.mark.parametrize(
    "text, code, where",
    [
        ('module m {\n  goal G1 "x" $\n}\n', "P001", (2, 15)),
        ('module m {\n  goal G1 "x\n}\n', "P001", (2, 11)),
        ('module m {\n  goal "x"\n}\n', "P002", (2, 8)),
        ('module m {\n  goal G1 "x"\n', "P002", (3, 1)),
        ('module m {\n  goal goal "x"\n}\n', "P002", (2, 8)),
        ('module m {\n  goal G1 "x"\n  goal G1 "y"\n}\n', "P003", (3, 8)),
        ('module m {\n  goal G1 "{oops" uninstantiated\n}\n', "P004", (2, 11)),
        ('module m {\n  goal G1 "x"\n  G1 -> G9 : supported_by\n}\n', "P005", (3, 9)),
        ('module m {\n  goal G1 "x"\n  public G9\n}\n', "P005", (3, 10)),
        ("module m {\n}\nmodule m {\n}\n", "P006", (3, 1)),
        ('module m {\n  goal A "x"\n  goal B "y"\n  A -> B : supported_by\n  A -> B : supported_by\n}\n', "P007", (5, 3)),
        ('module m {\n  goal A "x"\n  goal B "y"\n  A -> B : supported_by mult 3..1\n}\n', "P008", (4, 33)),
    ],
)
def test_parse_errors(text, code, where):
    _, diags = parse(text, "t.gsn")
    first = diags[0]
    assert first.code == code
    assert (first.span.start_line, first.span.start_col) == where
    assert first.render().startswith(f"t.gsn:{where[0]}:{where[1]}: error[{code}] ")


def test_parse_never_raises_and_recovers():
    text = 'module m {\n  goal G1 "x" bogus\n  goal G2 "y"\n  G1 -> G2 : supported_by\n}\n'
    doc, diags = parse(text)
    assert [d.code for d in diags] == ["P002"]
    assert doc.module("m").node_ids() == ["G1", "G2"]
    assert len(doc.module("m").edges) == 1


def test_reports_every_error_in_one_pass():
    text = 'module m {\n  goal G1 "x" $\n  goal G1 "y"\n  G1 -> G7 : supported_by\n}\n'
    codes = sorted({d.code for d in parse(text)[1]})
    assert codes == ["P001", "P003", "P005"]


def test_parse_strict_raises():
    with pytest.raises(ParseError) as info:
        parse_strict('module m { goal }', "bad.gsn")
    assert info.value.diagnostics[0].code == "P002"


@pytest.mark.parametrize("text", ["", "# only a comment\n", "module m {\n}\n"])
def test_trivial_documents(text):
    doc, diags = parse(text)
    assert diags == []
    assert documents_equal(parse(serialize(doc))[0], doc)


@pytest.mark.parametrize(
    "value",
    ['plain', 'with "quotes"', "back\\slash", "ends with \\", "\\{escaped\\}", "ünï", 'both \\" kinds', ""],
)
def test_quote_roundtrip(value):
    assert unescape_string(quote(value)[1:-1]) == value


def test_quote_rejects_newline():
    with pytest.raises(ValueError):
        quote("a\nb")


def test_tokenize_positions():
    toks, diags = tokenize('goal G1 "x" # c\n', "f")
    assert diags == []
    assert [(t.kind, t.value) for t in toks[:3]] == [("IDENT", "goal"), ("IDENT", "G1"), ("STRING", "x")]
    assert (toks[1].line, toks[1].col) == (1, 6)


def test_serialize_rejects_reserved_ids():
    g = ArgumentGraph("m", (Node("pick", NodeKind.GOAL, "x"),))
    with pytest.raises(SerializeError):
        serialize(Document((g,)))


def test_qualified_targets_roundtrip():
    text = 'module m {\n  goal G1 "x"\n\n  G1 -> other::G0 : supported_by\n}\n'
    doc, diags = parse(text)
    assert diags == []
    assert serialize(doc) == text


def test_choice_group_and_edge_order_preserved():
    text = serialize(parse(SAMPLE)[0])
    assert text.index("S1 -> G2") < text.index("S1 -> Sn1") < text.index("S1 -> M1")


@pytest.mark.parametrize("seed", range(50))
def test_random_roundtrip(seed):
    doc = random_document(random.Random(seed))
    text = serialize(doc)
    back, diags = parse(text)
    assert not [d for d in diags if d.is_error]
    assert documents_equal(back, doc)
    assert format_text(text) == text
    assert back.comments == doc.comments
    for a, b in zip(back.modules, doc.modules):
        assert [n.comments for n in a.nodes] == [n.comments for n in b.nodes]
        assert [n.trailing for n in a.nodes] == [n.trailing for n in b.nodes]
