"""Domain model for pattern knowledge bases.

A knowledge base describes one catalog of patterns: the finite ordinal
properties that characterize patterns and their deployment context, the
pattern definitions themselves, rules restricting valid contexts, filter
rules that exclude patterns in certain contexts, and the criteria/weight
machinery used for scoring.

Everything here is an immutable in-memory value; parsing and
serialization live in :mod:`patrec.dsl`, evaluation in
:mod:`patrec.solver` and :mod:`patrec.scoring`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterator, Mapping, Optional

__all__ = [
    "PropertyKind",
    "PatternLevel",
    "KBLevel",
    "Polarity",
    "TestOp",
    "Condition",
    "BoolLiteral",
    "PropertyTest",
    "And",
    "Or",
    "Not",
    "eval_condition",
    "referenced_properties",
    "iter_tests",
    "PropertyDecl",
    "PatternDefinition",
    "ContextAssignment",
    "ContextualConstraint",
    "FilterCondition",
    "Criterion",
    "WeightRule",
    "KnowledgeBase",
    "Violation",
    "ValidationReport",
    "validate",
]


class PropertyKind(Enum):
    CONTEXT = "context"
    PATTERN = "pattern"


class PatternLevel(Enum):
    SP = "sp"    # conceptual security pattern
    SDP = "sdp"  # design-level refinement of an SP


class KBLevel(Enum):
    CONTROL = "control"  # catalog of SPs for one security control
    PATTERN = "pattern"  # catalog of SDPs for one SP


class Polarity(Enum):
    DIRECT = "direct"    # higher ordinal rank -> higher utility
    INVERSE = "inverse"  # lower ordinal rank -> higher utility (e.g. costs)


# ---------------------------------------------------------------------------
# Boolean conditions over property assignments
# ---------------------------------------------------------------------------


class TestOp(Enum):
    EQ = "="
    NE = "!="
    IN = "in"


class Condition:
    """Marker base class for boolean expression trees over property tests."""

    __slots__ = ()


@dataclass(frozen=True)
class BoolLiteral(Condition):
    value: bool


@dataclass(frozen=True)
class PropertyTest(Condition):
    """Single test `property op value(s)`; IN takes one or more values."""

    property_id: str
    op: TestOp
    values: tuple[str, ...]


@dataclass(frozen=True)
class And(Condition):
    parts: tuple[Condition, ...]


@dataclass(frozen=True)
class Or(Condition):
    parts: tuple[Condition, ...]


@dataclass(frozen=True)
class Not(Condition):
    inner: Condition


def eval_condition(cond: Condition, assignment: Mapping[str, str]) -> Optional[bool]:
    """Evaluate under a (possibly partial) assignment with Kleene three-valued logic.

    Returns True/False when decidable, None when an unassigned property
    leaves the outcome open. Partial contexts therefore never trigger a
    rule whose guard is still undecided.
    """
    if isinstance(cond, BoolLiteral):
        return cond.value
    if isinstance(cond, PropertyTest):
        value = assignment.get(cond.property_id)
        if value is None:
            return None
        if cond.op is TestOp.EQ:
            return value == cond.values[0]
        if cond.op is TestOp.NE:
            return value != cond.values[0]
        return value in cond.values
    if isinstance(cond, And):
        saw_unknown = False
        for part in cond.parts:
            result = eval_condition(part, assignment)
            if result is False:
                return False
            if result is None:
                saw_unknown = True
        return None if saw_unknown else True
    if isinstance(cond, Or):
        saw_unknown = False
        for part in cond.parts:
            result = eval_condition(part, assignment)
            if result is True:
                return True
            if result is None:
                saw_unknown = True
        return None if saw_unknown else False
    if isinstance(cond, Not):
        result = eval_condition(cond.inner, assignment)
        return None if result is None else not result
    raise TypeError(f"not a condition: {cond!r}")


def referenced_properties(cond: Condition) -> frozenset[str]:
    """All property ids tested anywhere inside the condition."""
    return frozenset(test.property_id for test in iter_tests(cond))


def iter_tests(cond: Condition) -> Iterator[PropertyTest]:
    if isinstance(cond, PropertyTest):
        yield cond
    elif isinstance(cond, (And, Or)):
        for part in cond.parts:
            yield from iter_tests(part)
    elif isinstance(cond, Not):
        yield from iter_tests(cond.inner)


# ---------------------------------------------------------------------------
# Knowledge base elements
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PropertyDecl:
    """A finite ordinal property; the position of a value in `domain` is its rank."""

    id: str
    kind: PropertyKind
    domain: tuple[str, ...]
    question_text: Optional[str] = None  # context properties only
    description: str = ""

    def rank(self, value: str) -> int:
        return self.domain.index(value)


@dataclass(frozen=True)
class PatternDefinition:
    """A named pattern as a total assignment over the declared pattern properties."""

    id: str
    level: PatternLevel
    values: Mapping[str, str]
    description: str = ""
    child_ref: Optional[str] = None  # file reference to this SP's pattern-level KB


# A realization context: partial map of context-property id -> domain value.
# Insertion order is meaningful (it is the assignment order used when
# minimizing conflicts), so plain dicts are used throughout.
ContextAssignment = dict


@dataclass(frozen=True)
class ContextualConstraint:
    """A rule that must hold for a context to be considered valid at all."""

    id: str
    expr: Condition
    message: str = ""


@dataclass(frozen=True)
class FilterCondition:
    """Implication from the context onto pattern properties.

    When `guard` is decidably true in the context, only patterns whose
    values satisfy `requirement` stay feasible.
    """

    id: str
    guard: Condition
    requirement: Condition
    message: str = ""


@dataclass(frozen=True)
class Criterion:
    """A scored aspect, fed by exactly one pattern property."""

    id: str
    source_property: str
    polarity: Polarity = Polarity.DIRECT


@dataclass(frozen=True)
class WeightRule:
    """Context-dependent adjustment of criterion weights; deltas are additive."""

    id: str
    guard: Condition
    deltas: Mapping[str, float]


@dataclass(frozen=True)
class KnowledgeBase:
    id: str
    level: KBLevel
    property_decls: tuple[PropertyDecl, ...]
    patterns: tuple[PatternDefinition, ...]
    contextual_constraints: tuple[ContextualConstraint, ...] = ()
    filter_conditions: tuple[FilterCondition, ...] = ()
    criteria: tuple[Criterion, ...] = ()
    weight_rules: tuple[WeightRule, ...] = ()
    base_weights: Mapping[str, float] = field(default_factory=dict)
    description: str = ""

    # Lookup caches; derived data, excluded from equality.
    _properties_by_id: dict = field(
        init=False, repr=False, compare=False, default_factory=dict
    )
    _patterns_by_id: dict = field(
        init=False, repr=False, compare=False, default_factory=dict
    )

    def __post_init__(self):
        self._properties_by_id.update({p.id: p for p in self.property_decls})
        self._patterns_by_id.update({p.id: p for p in self.patterns})

    def property_decl(self, property_id: str) -> Optional[PropertyDecl]:
        return self._properties_by_id.get(property_id)

    def pattern(self, pattern_id: str) -> Optional[PatternDefinition]:
        return self._patterns_by_id.get(pattern_id)

    def context_properties(self) -> tuple[PropertyDecl, ...]:
        return tuple(p for p in self.property_decls if p.kind is PropertyKind.CONTEXT)

    def pattern_properties(self) -> tuple[PropertyDecl, ...]:
        return tuple(p for p in self.property_decls if p.kind is PropertyKind.PATTERN)

    def criterion(self, criterion_id: str) -> Optional[Criterion]:
        for criterion in self.criteria:
            if criterion.id == criterion_id:
                return criterion
        return None

    def pattern_level(self) -> PatternLevel:
        return PatternLevel.SP if self.level is KBLevel.CONTROL else PatternLevel.SDP


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    """One broken invariant; `kind` names the element type, `subject` its id."""

    kind: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind} '{self.subject}': {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        if self.ok:
            return "valid"
        return "\n".join(str(v) for v in self.violations)


def validate(kb: KnowledgeBase) -> ValidationReport:
    """Check every structural invariant; total, never raises.

    An empty report means the knowledge base is safe to hand to the
    solver, scorer, serializer and session machinery.
    """
    out: list[Violation] = []

    def bad(kind: str, subject: str, message: str) -> None:
        out.append(Violation(kind, subject, message))

    seen_props: set[str] = set()
    for prop in kb.property_decls:
        if prop.id in seen_props:
            bad("property", prop.id, "duplicate property id")
            continue
        seen_props.add(prop.id)
        if len(prop.domain) < 2:
            bad("property", prop.id, "domain must contain at least 2 values")
        if len(set(prop.domain)) != len(prop.domain):
            bad("property", prop.id, "domain values must be unique")
        if prop.kind is PropertyKind.PATTERN and prop.question_text is not None:
            bad("property", prop.id, "pattern properties must not carry question text")

    def check_condition(kind: str, subject: str, cond: Condition, allowed: PropertyKind, role: str) -> None:
        for test in iter_tests(cond):
            prop = kb.property_decl(test.property_id)
            if prop is None:
                bad(kind, subject, f"{role} references undeclared property '{test.property_id}'")
                continue
            if prop.kind is not allowed:
                bad(
                    kind,
                    subject,
                    f"{role} references {prop.kind.value} property '{prop.id}' "
                    f"but only {allowed.value} properties are allowed",
                )
            for value in test.values:
                if value not in prop.domain:
                    bad(kind, subject, f"{role} tests '{prop.id}' against value '{value}' outside its domain")

    pattern_props = [p for p in kb.pattern_properties() if p.id in seen_props]
    expected_level = kb.pattern_level()
    seen_patterns: set[str] = set()
    for pattern in kb.patterns:
        if pattern.id in seen_patterns:
            bad("pattern", pattern.id, "duplicate pattern id")
            continue
        seen_patterns.add(pattern.id)
        if pattern.level is not expected_level:
            bad(
                "pattern",
                pattern.id,
                f"{kb.level.value}-level knowledge bases hold {expected_level.value} patterns, "
                f"not {pattern.level.value}",
            )
        if pattern.child_ref is not None and pattern.level is not PatternLevel.SP:
            bad("pattern", pattern.id, "only sp-level patterns may reference a child knowledge base")
        for prop in pattern_props:
            if prop.id not in pattern.values:
                bad("pattern", pattern.id, f"missing value for pattern property '{prop.id}'")
        for prop_id, value in pattern.values.items():
            prop = kb.property_decl(prop_id)
            if prop is None:
                bad("pattern", pattern.id, f"assigns undeclared property '{prop_id}'")
            elif prop.kind is not PropertyKind.PATTERN:
                bad("pattern", pattern.id, f"assigns context property '{prop_id}'")
            elif value not in prop.domain:
                bad("pattern", pattern.id, f"value '{value}' outside the domain of '{prop_id}'")

    seen: set[str] = set()
    for constraint in kb.contextual_constraints:
        if constraint.id in seen:
            bad("constraint", constraint.id, "duplicate constraint id")
        seen.add(constraint.id)
        check_condition("constraint", constraint.id, constraint.expr, PropertyKind.CONTEXT, "expression")

    seen = set()
    for filt in kb.filter_conditions:
        if filt.id in seen:
            bad("filter", filt.id, "duplicate filter id")
        seen.add(filt.id)
        check_condition("filter", filt.id, filt.guard, PropertyKind.CONTEXT, "guard")
        check_condition("filter", filt.id, filt.requirement, PropertyKind.PATTERN, "requirement")

    seen = set()
    for criterion in kb.criteria:
        if criterion.id in seen:
            bad("criterion", criterion.id, "duplicate criterion id")
        seen.add(criterion.id)
        prop = kb.property_decl(criterion.source_property)
        if prop is None:
            bad("criterion", criterion.id, f"source property '{criterion.source_property}' is not declared")
        elif prop.kind is not PropertyKind.PATTERN:
            bad("criterion", criterion.id, f"source property '{criterion.source_property}' is not a pattern property")

    criterion_ids = {c.id for c in kb.criteria}
    for criterion_id in criterion_ids:
        if criterion_id not in kb.base_weights:
            bad("weights", criterion_id, "base weights must cover every criterion")
    for criterion_id, weight in kb.base_weights.items():
        if criterion_id not in criterion_ids:
            bad("weights", criterion_id, "base weight for undeclared criterion")
        elif weight < 0:
            bad("weights", criterion_id, "base weights must be non-negative")

    seen = set()
    for rule in kb.weight_rules:
        if rule.id in seen:
            bad("weight-rule", rule.id, "duplicate weight rule id")
        seen.add(rule.id)
        check_condition("weight-rule", rule.id, rule.guard, PropertyKind.CONTEXT, "guard")
        for criterion_id in rule.deltas:
            if criterion_id not in criterion_ids:
                bad("weight-rule", rule.id, f"delta for undeclared criterion '{criterion_id}'")

    return ValidationReport(tuple(out))
