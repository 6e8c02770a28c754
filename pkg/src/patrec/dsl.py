"""Textual format for knowledge bases (`.kb`) and context files (`.ctx`).

The `.kb` format is a line-oriented block DSL:

    control authn {
      description "Authentication patterns."
    }

    property context sec-lev {
      values low, high              # declaration order = ordinal rank
      question "Which security level must be reached?"
      description "Required security level."
    }

    property pattern costs {
      values low, medium, high
    }

    pattern password {
      description "Classic password login."
      costs = low
      child "password.kb"           # SP-level patterns may link a child KB
    }

    constraint sane-budget {
      require not (budget = low and no-users = high)
      message "..."
    }

    filter strong-auth {
      when sec-lev = high           # guard over context properties
      require AuthN-strength != low # requirement over pattern properties
      message "..."
    }

    criterion usability {
      property AuthN-usablty
      direction direct
    }

    weights {                       # base weight per criterion
      usability = 1
      costs = 1
    }

    weights low-budget when budget = low {   # additive adjustment rule
      usability = -0.6
      costs = 0.6
    }

Guards, requirements and constraint expressions are infix boolean
expressions over property tests (`=`, `!=`, `in {a, b}`, `and`, `or`,
`not`, `true`, `false`). `#` starts a comment; LF and CRLF both parse;
the canonical serializer emits LF.

Context files (`.ctx`) are plain `property = value` lines with the same
comment rules.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Optional

from .errors import InvalidKnowledgeBaseError, PatrecError
from .model import (
    And,
    BoolLiteral,
    Condition,
    ContextualConstraint,
    Criterion,
    FilterCondition,
    KBLevel,
    KnowledgeBase,
    Not,
    Or,
    PatternDefinition,
    PatternLevel,
    Polarity,
    PropertyDecl,
    PropertyKind,
    PropertyTest,
    TestOp,
    WeightRule,
    iter_tests,
    validate,
)

__all__ = ["SourceSpan", "ParseError", "parse_kb", "serialize_kb", "parse_context", "render_condition"]


@dataclass(frozen=True)
class SourceSpan:
    file: str
    line: int    # 1-based
    column: int  # 1-based
    length: int

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


class ParseError(PatrecError):
    """Syntax or semantic error in a document; always carries a span."""

    def __init__(self, message: str, span: SourceSpan, expected: tuple[str, ...] = ()):
        detail = message
        if expected:
            detail = f"{message} (expected {', '.join(expected)})"
        super().__init__(f"{span}: {detail}")
        self.reason = message
        self.span = span
        self.expected = expected


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

IDENT = "ident"
NUMBER = "number"
STRING = "string"

_IDENT_START = set(string.ascii_letters + "_")
_IDENT_CONT = set(string.ascii_letters + string.digits + "_-.")
_PUNCT = {"=", ",", "{", "}", "(", ")"}

_ESCAPES = {"\\": "\\", '"': '"', "n": "\n", "t": "\t", "r": "\r"}
_UNESCAPES = {"\\": "\\\\", '"': '\\"', "\n": "\\n", "\t": "\\t", "\r": "\\r"}


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT, NUMBER, STRING or the punctuation symbol itself
    text: str
    value: object
    line: int
    col: int

    def span(self, file: str) -> SourceSpan:
        return SourceSpan(file, self.line, self.col, max(len(self.text), 1))


def _tokenize_line(text: str, line_no: int, file: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in " \t":
            i += 1
            continue
        if ch == "#":
            break
        col = i + 1
        if ch == '"':
            i += 1
            parts: list[str] = []
            while i < n and text[i] != '"':
                if text[i] == "\\":
                    if i + 1 >= n or text[i + 1] not in _ESCAPES:
                        raise ParseError(
                            "invalid escape sequence",
                            SourceSpan(file, line_no, i + 1, 2),
                        )
                    parts.append(_ESCAPES[text[i + 1]])
                    i += 2
                else:
                    parts.append(text[i])
                    i += 1
            if i >= n:
                raise ParseError("unterminated string", SourceSpan(file, line_no, col, n - col + 1))
            i += 1
            raw = text[col - 1 : i]
            tokens.append(Token(STRING, raw, "".join(parts), line_no, col))
            continue
        if ch in _IDENT_START:
            j = i + 1
            while j < n and text[j] in _IDENT_CONT:
                j += 1
            word = text[i:j]
            tokens.append(Token(IDENT, word, word, line_no, col))
            i = j
            continue
        if ch.isdigit() or (ch in "+-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            seen_dot = False
            while j < n and (text[j].isdigit() or (text[j] == "." and not seen_dot)):
                if text[j] == ".":
                    seen_dot = True
                j += 1
            word = text[i:j]
            tokens.append(Token(NUMBER, word, float(word), line_no, col))
            i = j
            continue
        if ch == "!" and i + 1 < n and text[i + 1] == "=":
            tokens.append(Token("!=", "!=", "!=", line_no, col))
            i += 2
            continue
        if ch in _PUNCT:
            tokens.append(Token(ch, ch, ch, line_no, col))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", SourceSpan(file, line_no, col, 1))
    return tokens


# ---------------------------------------------------------------------------
# Expression parser
# ---------------------------------------------------------------------------


class _TokenStream:
    def __init__(self, tokens: list[Token], file: str, fallback_span: SourceSpan):
        self.tokens = tokens
        self.pos = 0
        self.file = file
        self.fallback_span = fallback_span

    def peek(self) -> Optional[Token]:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def next(self) -> Optional[Token]:
        token = self.peek()
        if token is not None:
            self.pos += 1
        return token

    def at_end_span(self) -> SourceSpan:
        if self.tokens:
            last = self.tokens[-1]
            return SourceSpan(self.file, last.line, last.col + len(last.text) - 1, 1)
        return self.fallback_span

    def error(self, message: str, expected: tuple[str, ...] = ()) -> ParseError:
        token = self.peek()
        span = token.span(self.file) if token else self.at_end_span()
        return ParseError(message, span, expected)


def _peek_word(stream: _TokenStream) -> Optional[str]:
    token = stream.peek()
    if token is not None and token.kind == IDENT:
        return token.value  # type: ignore[return-value]
    return None


def _parse_expr(stream: _TokenStream) -> Condition:
    expr = _parse_or(stream)
    leftover = stream.peek()
    if leftover is not None:
        raise stream.error(f"unexpected '{leftover.text}' after expression")
    return expr


def _parse_or(stream: _TokenStream) -> Condition:
    parts = [_parse_and(stream)]
    while _peek_word(stream) == "or":
        stream.next()
        parts.append(_parse_and(stream))
    return parts[0] if len(parts) == 1 else Or(tuple(parts))


def _parse_and(stream: _TokenStream) -> Condition:
    parts = [_parse_unary(stream)]
    while _peek_word(stream) == "and":
        stream.next()
        parts.append(_parse_unary(stream))
    return parts[0] if len(parts) == 1 else And(tuple(parts))


def _parse_unary(stream: _TokenStream) -> Condition:
    if _peek_word(stream) == "not":
        stream.next()
        return Not(_parse_unary(stream))
    return _parse_atom(stream)


def _parse_atom(stream: _TokenStream) -> Condition:
    token = stream.peek()
    if token is None:
        raise stream.error("incomplete expression", ("property test", "'('", "'true'", "'false'"))
    if token.kind == "(":
        stream.next()
        inner = _parse_or(stream)
        closing = stream.next()
        if closing is None or closing.kind != ")":
            raise stream.error("unbalanced parenthesis", ("')'",))
        return inner
    if token.kind == IDENT and token.value in ("true", "false"):
        stream.next()
        return BoolLiteral(token.value == "true")
    if token.kind != IDENT:
        raise stream.error(f"unexpected '{token.text}' in expression", ("property test",))
    stream.next()
    op = stream.next()
    if op is None:
        raise stream.error("property test is missing its operator", ("'='", "'!='", "'in'"))
    if op.kind == "=":
        value = stream.next()
        if value is None or value.kind != IDENT:
            raise stream.error("expected a domain value", ("value identifier",))
        return PropertyTest(token.value, TestOp.EQ, (value.value,))
    if op.kind == "!=":
        value = stream.next()
        if value is None or value.kind != IDENT:
            raise stream.error("expected a domain value", ("value identifier",))
        return PropertyTest(token.value, TestOp.NE, (value.value,))
    if op.kind == IDENT and op.value == "in":
        opening = stream.next()
        if opening is None or opening.kind != "{":
            raise stream.error("'in' needs a value set", ("'{'",))
        values: list[str] = []
        while True:
            value = stream.next()
            if value is None or value.kind != IDENT:
                raise stream.error("expected a domain value", ("value identifier",))
            values.append(value.value)
            sep = stream.next()
            if sep is None:
                raise stream.error("unclosed value set", ("'}'",))
            if sep.kind == "}":
                break
            if sep.kind != ",":
                raise ParseError("expected ',' or '}' in value set", sep.span(stream.file))
        return PropertyTest(token.value, TestOp.IN, tuple(values))
    raise ParseError(f"unknown operator '{op.text}'", op.span(stream.file), ("'='", "'!='", "'in'"))


def render_condition(cond: Condition) -> str:
    """Infix rendering; inverse of the expression parser."""
    if isinstance(cond, BoolLiteral):
        return "true" if cond.value else "false"
    if isinstance(cond, PropertyTest):
        if cond.op is TestOp.EQ:
            return f"{cond.property_id} = {cond.values[0]}"
        if cond.op is TestOp.NE:
            return f"{cond.property_id} != {cond.values[0]}"
        return f"{cond.property_id} in {{{', '.join(cond.values)}}}"
    if isinstance(cond, And):
        return " and ".join(_render_child(part) for part in cond.parts)
    if isinstance(cond, Or):
        return " or ".join(_render_child(part) for part in cond.parts)
    if isinstance(cond, Not):
        inner = cond.inner
        if isinstance(inner, BoolLiteral):
            return f"not {render_condition(inner)}"
        return f"not ({render_condition(inner)})"
    raise TypeError(f"not a condition: {cond!r}")


def _render_child(cond: Condition) -> str:
    if isinstance(cond, (And, Or)):
        return f"({render_condition(cond)})"
    return render_condition(cond)


# ---------------------------------------------------------------------------
# Document structure
# ---------------------------------------------------------------------------

_BLOCK_KEYWORDS = ("control", "property", "pattern", "constraint", "filter", "criterion", "weights")


@dataclass
class _Block:
    keyword: str
    header: list[Token]
    span: SourceSpan
    body: list[tuple[list[Token], SourceSpan]]


def _split_blocks(text: str, file: str) -> list[_Block]:
    lines = text.split("\n")
    blocks: list[_Block] = []
    current: Optional[_Block] = None
    last_span = SourceSpan(file, 1, 1, 0)
    for idx, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r")
        tokens = _tokenize_line(line, idx, file)
        if not tokens:
            continue
        span = tokens[0].span(file)
        last_span = span
        if current is None:
            if tokens[0].kind != IDENT or tokens[0].value not in _BLOCK_KEYWORDS:
                raise ParseError(
                    f"expected a block keyword, found '{tokens[0].text}'",
                    span,
                    _BLOCK_KEYWORDS,
                )
            if tokens[-1].kind != "{":
                raise ParseError("block header must end with '{'", tokens[-1].span(file), ("'{'",))
            current = _Block(tokens[0].value, tokens[1:-1], span, [])
            continue
        if len(tokens) == 1 and tokens[0].kind == "}":
            blocks.append(current)
            current = None
            continue
        current.body.append((tokens, span))
    if current is not None:
        raise ParseError(f"unclosed '{current.keyword}' block", last_span, ("'}'",))
    return blocks


def _header_id(block: _Block, file: str, position: int = 0) -> Token:
    if len(block.header) <= position or block.header[position].kind != IDENT:
        raise ParseError(f"'{block.keyword}' block needs a name", block.span, ("identifier",))
    return block.header[position]


def _only_string(tokens: list[Token], span: SourceSpan, file: str, directive: str) -> str:
    if len(tokens) != 2 or tokens[1].kind != STRING:
        raise ParseError(f"'{directive}' takes a single quoted string", span, ("string",))
    return tokens[1].value  # type: ignore[return-value]


def _expr_after(tokens: list[Token], file: str, span: SourceSpan) -> Condition:
    stream = _TokenStream(tokens[1:], file, span)
    if stream.peek() is None:
        raise ParseError(f"'{tokens[0].text}' needs an expression", span, ("expression",))
    return _parse_expr(stream)


# ---------------------------------------------------------------------------
# parse_kb
# ---------------------------------------------------------------------------


def parse_kb(text: str, file: str = "<kb>") -> KnowledgeBase:
    """Parse a `.kb` document into a validated KnowledgeBase.

    Raises ParseError (with a SourceSpan) on both syntax errors and
    semantic errors such as unresolved references, duplicate ids, or
    values outside a property's domain.
    """
    blocks = _split_blocks(text, file)

    control_blocks = [b for b in blocks if b.keyword == "control"]
    if not control_blocks:
        raise ParseError("no knowledge base declared", SourceSpan(file, 1, 1, 0), ("control block",))
    if len(control_blocks) > 1:
        raise ParseError("more than one control block", control_blocks[1].span)
    control = control_blocks[0]
    kb_id = _header_id(control, file).value
    if control.header[1:]:
        raise ParseError("unexpected tokens after control name", control.header[1].span(file))
    level = KBLevel.CONTROL
    kb_description = ""
    seen_directives: set[str] = set()
    for tokens, span in control.body:
        head = tokens[0]
        if head.kind != IDENT or head.value not in ("level", "description"):
            raise ParseError(f"unknown control directive '{head.text}'", span, ("level", "description"))
        if head.value in seen_directives:
            raise ParseError(f"duplicate '{head.value}' directive", span)
        seen_directives.add(head.value)
        if head.value == "level":
            if len(tokens) != 2 or tokens[1].kind != IDENT or tokens[1].value not in ("control", "pattern"):
                raise ParseError("level must be 'control' or 'pattern'", span, ("control", "pattern"))
            level = KBLevel(tokens[1].value)
        else:
            kb_description = _only_string(tokens, span, file, "description")

    # Pass 1: property declarations (file order defines ordinal ranks).
    decls: list[PropertyDecl] = []
    decl_spans: dict[str, SourceSpan] = {}
    for block in blocks:
        if block.keyword != "property":
            continue
        if (
            len(block.header) != 2
            or block.header[0].kind != IDENT
            or block.header[0].value not in ("context", "pattern")
        ):
            raise ParseError(
                "property header must be 'property context <id>' or 'property pattern <id>'",
                block.span,
                ("context", "pattern"),
            )
        kind = PropertyKind(block.header[0].value)
        name_token = block.header[1]
        if name_token.kind != IDENT:
            raise ParseError("property needs an identifier name", name_token.span(file))
        prop_id = name_token.value
        if prop_id in decl_spans:
            raise ParseError(f"duplicate property id '{prop_id}'", block.span)
        domain: list[str] = []
        question: Optional[str] = None
        description = ""
        seen: set[str] = set()
        for tokens, span in block.body:
            head = tokens[0]
            if head.kind != IDENT or head.value not in ("values", "question", "description"):
                raise ParseError(
                    f"unknown property directive '{head.text}'", span, ("values", "question", "description")
                )
            if head.value in seen:
                raise ParseError(f"duplicate '{head.value}' directive", span)
            seen.add(head.value)
            if head.value == "values":
                expecting_value = True
                for token in tokens[1:]:
                    if expecting_value:
                        if token.kind != IDENT:
                            raise ParseError("domain values must be identifiers", token.span(file))
                        if token.value in domain:
                            raise ParseError(f"duplicate domain value '{token.value}'", token.span(file))
                        domain.append(token.value)
                        expecting_value = False
                    else:
                        if token.kind != ",":
                            raise ParseError("domain values must be comma-separated", token.span(file))
                        expecting_value = True
                if expecting_value:
                    raise ParseError("'values' needs at least one value", span, ("value identifier",))
            elif head.value == "question":
                question = _only_string(tokens, span, file, "question")
            else:
                description = _only_string(tokens, span, file, "description")
        if len(domain) < 2:
            raise ParseError(f"property '{prop_id}' needs a domain of at least 2 values", block.span)
        if kind is PropertyKind.PATTERN and question is not None:
            raise ParseError(f"pattern property '{prop_id}' must not declare a question", block.span)
        decls.append(PropertyDecl(prop_id, kind, tuple(domain), question, description))
        decl_spans[prop_id] = block.span

    by_id = {d.id: d for d in decls}
    pattern_props = [d for d in decls if d.kind is PropertyKind.PATTERN]

    def check_test_semantics(cond: Condition, span: SourceSpan, allowed: PropertyKind, role: str) -> None:
        for test in iter_tests(cond):
            prop = by_id.get(test.property_id)
            if prop is None:
                raise ParseError(f"{role} references undeclared property '{test.property_id}'", span)
            if prop.kind is not allowed:
                raise ParseError(
                    f"{role} must test {allowed.value} properties, but '{prop.id}' is a {prop.kind.value} property",
                    span,
                )
            for value in test.values:
                if value not in prop.domain:
                    raise ParseError(
                        f"value '{value}' is not in the domain of '{prop.id}' ({', '.join(prop.domain)})",
                        span,
                    )

    # Pass 2: patterns.
    patterns: list[PatternDefinition] = []
    pattern_ids: set[str] = set()
    pattern_level = PatternLevel.SP if level is KBLevel.CONTROL else PatternLevel.SDP
    for block in blocks:
        if block.keyword != "pattern":
            continue
        name = _header_id(block, file)
        if block.header[1:]:
            raise ParseError("unexpected tokens after pattern name", block.header[1].span(file))
        if name.value in pattern_ids:
            raise ParseError(f"duplicate pattern id '{name.value}'", block.span)
        pattern_ids.add(name.value)
        values: dict[str, str] = {}
        description = ""
        child_ref: Optional[str] = None
        for tokens, span in block.body:
            head = tokens[0]
            if head.kind != IDENT:
                raise ParseError("expected a pattern directive", span)
            if len(tokens) >= 2 and tokens[1].kind == "=":
                if len(tokens) != 3 or tokens[2].kind != IDENT:
                    raise ParseError("pattern value assignment must be '<property> = <value>'", span)
                prop = by_id.get(head.value)
                if prop is None:
                    raise ParseError(f"pattern assigns undeclared property '{head.value}'", span)
                if prop.kind is not PropertyKind.PATTERN:
                    raise ParseError(f"'{head.value}' is a context property, not a pattern property", span)
                if head.value in values:
                    raise ParseError(f"duplicate assignment for '{head.value}'", span)
                if tokens[2].value not in prop.domain:
                    raise ParseError(
                        f"value '{tokens[2].value}' is not in the domain of '{prop.id}' ({', '.join(prop.domain)})",
                        tokens[2].span(file),
                    )
                values[head.value] = tokens[2].value
            elif head.value == "description":
                description = _only_string(tokens, span, file, "description")
            elif head.value == "child":
                if child_ref is not None:
                    raise ParseError("duplicate 'child' directive", span)
                if level is not KBLevel.CONTROL:
                    raise ParseError("only sp-level patterns may declare a child knowledge base", span)
                child_ref = _only_string(tokens, span, file, "child")
            else:
                raise ParseError(
                    f"unknown pattern directive '{head.text}'", span, ("description", "child", "<property> = <value>")
                )
        missing = [p.id for p in pattern_props if p.id not in values]
        if missing:
            raise ParseError(
                f"pattern '{name.value}' is missing values for: {', '.join(missing)}", block.span
            )
        patterns.append(PatternDefinition(name.value, pattern_level, values, description, child_ref))

    # Pass 3: constraints and filters.
    constraints: list[ContextualConstraint] = []
    seen_ids: set[str] = set()
    for block in blocks:
        if block.keyword != "constraint":
            continue
        name = _header_id(block, file)
        if name.value in seen_ids:
            raise ParseError(f"duplicate constraint id '{name.value}'", block.span)
        seen_ids.add(name.value)
        expr: Optional[Condition] = None
        message = ""
        for tokens, span in block.body:
            head = tokens[0]
            if head.kind == IDENT and head.value == "require":
                if expr is not None:
                    raise ParseError("duplicate 'require' directive", span)
                expr = _expr_after(tokens, file, span)
                check_test_semantics(expr, span, PropertyKind.CONTEXT, "constraint expression")
            elif head.kind == IDENT and head.value == "message":
                message = _only_string(tokens, span, file, "message")
            else:
                raise ParseError(f"unknown constraint directive '{head.text}'", span, ("require", "message"))
        if expr is None:
            raise ParseError(f"constraint '{name.value}' needs a 'require' expression", block.span)
        constraints.append(ContextualConstraint(name.value, expr, message))

    filters: list[FilterCondition] = []
    seen_ids = set()
    for block in blocks:
        if block.keyword != "filter":
            continue
        name = _header_id(block, file)
        if name.value in seen_ids:
            raise ParseError(f"duplicate filter id '{name.value}'", block.span)
        seen_ids.add(name.value)
        guard: Optional[Condition] = None
        requirement: Optional[Condition] = None
        message = ""
        for tokens, span in block.body:
            head = tokens[0]
            if head.kind == IDENT and head.value == "when":
                if guard is not None:
                    raise ParseError("duplicate 'when' directive", span)
                guard = _expr_after(tokens, file, span)
                check_test_semantics(guard, span, PropertyKind.CONTEXT, "filter guard")
            elif head.kind == IDENT and head.value == "require":
                if requirement is not None:
                    raise ParseError("duplicate 'require' directive", span)
                requirement = _expr_after(tokens, file, span)
                check_test_semantics(requirement, span, PropertyKind.PATTERN, "filter requirement")
            elif head.kind == IDENT and head.value == "message":
                message = _only_string(tokens, span, file, "message")
            else:
                raise ParseError(f"unknown filter directive '{head.text}'", span, ("when", "require", "message"))
        if guard is None:
            raise ParseError(f"filter '{name.value}' needs a 'when' guard", block.span)
        if requirement is None:
            raise ParseError(f"filter '{name.value}' needs a 'require' expression", block.span)
        filters.append(FilterCondition(name.value, guard, requirement, message))

    # Pass 4: criteria.
    criteria: list[Criterion] = []
    seen_ids = set()
    for block in blocks:
        if block.keyword != "criterion":
            continue
        name = _header_id(block, file)
        if name.value in seen_ids:
            raise ParseError(f"duplicate criterion id '{name.value}'", block.span)
        seen_ids.add(name.value)
        source: Optional[str] = None
        polarity = Polarity.DIRECT
        for tokens, span in block.body:
            head = tokens[0]
            if head.kind == IDENT and head.value == "property":
                if len(tokens) != 2 or tokens[1].kind != IDENT:
                    raise ParseError("'property' takes one property id", span)
                prop = by_id.get(tokens[1].value)
                if prop is None:
                    raise ParseError(f"criterion references undeclared property '{tokens[1].value}'", span)
                if prop.kind is not PropertyKind.PATTERN:
                    raise ParseError(f"criterion source '{prop.id}' must be a pattern property", span)
                source = prop.id
            elif head.kind == IDENT and head.value == "direction":
                if len(tokens) != 2 or tokens[1].kind != IDENT or tokens[1].value not in ("direct", "inverse"):
                    raise ParseError("direction must be 'direct' or 'inverse'", span, ("direct", "inverse"))
                polarity = Polarity(tokens[1].value)
            else:
                raise ParseError(f"unknown criterion directive '{head.text}'", span, ("property", "direction"))
        if source is None:
            raise ParseError(f"criterion '{name.value}' needs a source property", block.span)
        criteria.append(Criterion(name.value, source, polarity))
    criterion_ids = {c.id for c in criteria}

    # Pass 5: weights (one base block, any number of named rules).
    base_weights: dict[str, float] = {}
    base_span: Optional[SourceSpan] = None
    rules: list[WeightRule] = []
    rule_ids: set[str] = set()
    for block in blocks:
        if block.keyword != "weights":
            continue
        entries: dict[str, float] = {}
        for tokens, span in block.body:
            if (
                len(tokens) != 3
                or tokens[0].kind != IDENT
                or tokens[1].kind != "="
                or tokens[2].kind != NUMBER
            ):
                raise ParseError("weight entries must be '<criterion> = <number>'", span)
            criterion_id = tokens[0].value
            if criterion_id not in criterion_ids:
                raise ParseError(f"weight entry for undeclared criterion '{criterion_id}'", span)
            if criterion_id in entries:
                raise ParseError(f"duplicate weight entry for '{criterion_id}'", span)
            entries[criterion_id] = tokens[2].value  # type: ignore[assignment]
        if not block.header:
            if base_span is not None:
                raise ParseError("more than one base weights block", block.span)
            for criterion_id, value in entries.items():
                if value < 0:
                    raise ParseError(f"base weight for '{criterion_id}' must be non-negative", block.span)
            base_weights = entries
            base_span = block.span
            continue
        name = _header_id(block, file)
        if name.value in rule_ids:
            raise ParseError(f"duplicate weight rule id '{name.value}'", block.span)
        rule_ids.add(name.value)
        if len(block.header) < 2 or block.header[1].kind != IDENT or block.header[1].value != "when":
            raise ParseError("weight rule header must be 'weights <id> when <expr>'", block.span, ("when",))
        stream = _TokenStream(block.header[2:], file, block.span)
        if stream.peek() is None:
            raise ParseError("weight rule needs a guard expression", block.span, ("expression",))
        guard = _parse_expr(stream)
        check_test_semantics(guard, block.span, PropertyKind.CONTEXT, "weight rule guard")
        rules.append(WeightRule(name.value, guard, entries))

    missing_weights = sorted(criterion_ids - set(base_weights))
    if missing_weights:
        raise ParseError(
            f"base weights missing for: {', '.join(missing_weights)}", base_span or control.span
        )

    kb = KnowledgeBase(
        id=kb_id,
        level=level,
        property_decls=tuple(decls),
        patterns=tuple(patterns),
        contextual_constraints=tuple(constraints),
        filter_conditions=tuple(filters),
        criteria=tuple(criteria),
        weight_rules=tuple(rules),
        base_weights=base_weights,
        description=kb_description,
    )
    report = validate(kb)
    if not report.ok:  # parser checks should make this unreachable
        raise ParseError(f"knowledge base is invalid: {report.violations[0]}", control.span)
    return kb


# ---------------------------------------------------------------------------
# serialize_kb
# ---------------------------------------------------------------------------


def _quote(text: str) -> str:
    return '"' + "".join(_UNESCAPES.get(ch, ch) for ch in text) + '"'


def _format_number(value: float) -> str:
    return repr(float(value))


def serialize_kb(kb: KnowledgeBase) -> str:
    """Render a knowledge base in canonical form (LF line endings).

    parse_kb(serialize_kb(kb)) is structurally equal to kb; declaration
    order is preserved because it carries meaning (ordinal ranks, tie
    breaking, question order).
    """
    report = validate(kb)
    if not report.ok:
        raise InvalidKnowledgeBaseError(
            f"refusing to serialize an invalid knowledge base: {report.violations[0]}",
            report.violations,
        )
    out: list[str] = []
    out.append(f"control {kb.id} {{")
    if kb.level is not KBLevel.CONTROL:
        out.append(f"  level {kb.level.value}")
    if kb.description:
        out.append(f"  description {_quote(kb.description)}")
    out.append("}")

    for prop in kb.property_decls:
        out.append("")
        out.append(f"property {prop.kind.value} {prop.id} {{")
        out.append(f"  values {', '.join(prop.domain)}")
        if prop.question_text is not None:
            out.append(f"  question {_quote(prop.question_text)}")
        if prop.description:
            out.append(f"  description {_quote(prop.description)}")
        out.append("}")

    decl_order = [p.id for p in kb.pattern_properties()]
    for pattern in kb.patterns:
        out.append("")
        out.append(f"pattern {pattern.id} {{")
        if pattern.description:
            out.append(f"  description {_quote(pattern.description)}")
        for prop_id in decl_order:
            if prop_id in pattern.values:
                out.append(f"  {prop_id} = {pattern.values[prop_id]}")
        if pattern.child_ref is not None:
            out.append(f"  child {_quote(pattern.child_ref)}")
        out.append("}")

    for constraint in kb.contextual_constraints:
        out.append("")
        out.append(f"constraint {constraint.id} {{")
        out.append(f"  require {render_condition(constraint.expr)}")
        if constraint.message:
            out.append(f"  message {_quote(constraint.message)}")
        out.append("}")

    for filt in kb.filter_conditions:
        out.append("")
        out.append(f"filter {filt.id} {{")
        out.append(f"  when {render_condition(filt.guard)}")
        out.append(f"  require {render_condition(filt.requirement)}")
        if filt.message:
            out.append(f"  message {_quote(filt.message)}")
        out.append("}")

    for criterion in kb.criteria:
        out.append("")
        out.append(f"criterion {criterion.id} {{")
        out.append(f"  property {criterion.source_property}")
        out.append(f"  direction {criterion.polarity.value}")
        out.append("}")

    if kb.criteria:
        out.append("")
        out.append("weights {")
        for criterion in kb.criteria:
            out.append(f"  {criterion.id} = {_format_number(kb.base_weights[criterion.id])}")
        out.append("}")

    for rule in kb.weight_rules:
        out.append("")
        out.append(f"weights {rule.id} when {render_condition(rule.guard)} {{")
        for criterion in kb.criteria:
            if criterion.id in rule.deltas:
                out.append(f"  {criterion.id} = {_format_number(rule.deltas[criterion.id])}")
        out.append("}")

    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# Context files
# ---------------------------------------------------------------------------


def parse_context(text: str, kb: KnowledgeBase, file: str = "<ctx>") -> dict[str, str]:
    """Parse `property = value` lines into a context assignment.

    Line order becomes assignment order. Unknown properties, pattern
    properties, out-of-domain values and duplicates are rejected with a
    span.
    """
    ctx: dict[str, str] = {}
    for idx, raw in enumerate(text.split("\n"), start=1):
        line = raw.rstrip("\r")
        tokens = _tokenize_line(line, idx, file)
        if not tokens:
            continue
        span = tokens[0].span(file)
        if len(tokens) != 3 or tokens[0].kind != IDENT or tokens[1].kind != "=" or tokens[2].kind != IDENT:
            raise ParseError("context lines must be '<property> = <value>'", span)
        prop = kb.property_decl(tokens[0].value)
        if prop is None:
            raise ParseError(f"unknown context property '{tokens[0].value}'", span)
        if prop.kind is not PropertyKind.CONTEXT:
            raise ParseError(f"'{prop.id}' is a pattern property, not a context property", span)
        if prop.id in ctx:
            raise ParseError(f"duplicate assignment for '{prop.id}'", span)
        if tokens[2].value not in prop.domain:
            raise ParseError(
                f"value '{tokens[2].value}' is not in the domain of '{prop.id}' ({', '.join(prop.domain)})",
                tokens[2].span(file),
            )
        ctx[prop.id] = tokens[2].value
    return ctx
