"""Knowledge-based recommender for security design patterns.

The engine filters a pattern catalog down to the patterns feasible in a
given realization context (conjunctive filter conditions over finite
ordinal properties), ranks the survivors with context-weighted additive
utility scoring, explains every recommendation and exclusion, and
diagnoses minimal conflicts when nothing remains feasible.
"""

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
    eval_condition,
    validate,
)
from .dsl import ParseError, SourceSpan, parse_context, parse_kb, serialize_kb
from .solver import ConflictDiagnosis, FeasibilityResult, check_context, diagnose_conflict, feasible_patterns
from .scoring import (
    ScoredPattern,
    WeightVector,
    build_recommendation_payload,
    rank,
    resolve_weights,
    score,
    utility,
)

__version__ = "0.1.0"
