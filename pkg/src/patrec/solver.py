"""Feasibility of patterns under a context, and conflict diagnosis.

Patterns are an enumerated list, so the constraint problem is solved by
direct evaluation: a pattern stays feasible unless some filter whose
guard is decidably true under the context has a requirement the
pattern's values violate. Undecided guards (partial contexts) never
exclude, which makes the feasible set shrink monotonically as answers
arrive.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

from .errors import (
    ConstraintViolatedError,
    DiagnosisPreconditionError,
    DomainValueError,
    UnknownReferenceError,
)
from .model import KnowledgeBase, PropertyKind, eval_condition

__all__ = ["FeasibilityResult", "ConflictDiagnosis", "check_context", "feasible_patterns", "diagnose_conflict"]


@dataclass(frozen=True)
class FeasibilityResult:
    """Partition of the catalog into feasible patterns and audited exclusions."""

    feasible: tuple[str, ...]
    exclusions: Mapping[str, tuple[str, ...]]  # pattern id -> violated filter ids

    def is_empty(self) -> bool:
        return not self.feasible


@dataclass(frozen=True)
class ConflictDiagnosis:
    """A minimal subset of the answers that jointly empties the feasible set.

    Dropping any single pair from `conflict` leaves a context with at
    least one feasible pattern. `filter_messages` carries the message of
    every filter involved in the conflict; `unconditional` lists filters
    that exclude patterns even under the empty context (their guards
    need no answers at all), which is the only way `conflict` can be
    empty.
    """

    conflict: tuple[tuple[str, str], ...]
    filter_messages: Mapping[str, str]
    unconditional: tuple[str, ...] = ()


def _check_assignment(kb: KnowledgeBase, ctx: Mapping[str, str]) -> None:
    for prop_id, value in ctx.items():
        prop = kb.property_decl(prop_id)
        if prop is None:
            raise UnknownReferenceError(f"unknown property '{prop_id}'")
        if prop.kind is not PropertyKind.CONTEXT:
            raise UnknownReferenceError(f"'{prop_id}' is a pattern property, not a context property")
        if value not in prop.domain:
            raise DomainValueError(
                f"value '{value}' is not in the domain of '{prop_id}' ({', '.join(prop.domain)})"
            )


def check_context(kb: KnowledgeBase, ctx: Mapping[str, str]) -> list[str]:
    """Ids of contextual constraints the assignment decidably violates.

    A constraint with unassigned properties is not yet decidable and is
    not reported.
    """
    _check_assignment(kb, ctx)
    return [c.id for c in kb.contextual_constraints if eval_condition(c.expr, ctx) is False]


def feasible_patterns(kb: KnowledgeBase, ctx: Mapping[str, str]) -> FeasibilityResult:
    """Split the catalog by the filter conditions active under `ctx`.

    A filter is active when its guard evaluates to true; active filters
    exclude every pattern whose values fail the requirement. The
    exclusion audit lists, per excluded pattern, exactly the violated
    filter ids in declaration order.
    """
    violated = check_context(kb, ctx)
    if violated:
        raise ConstraintViolatedError(
            f"context violates contextual constraints: {', '.join(violated)}", violated
        )
    active = [f for f in kb.filter_conditions if eval_condition(f.guard, ctx) is True]
    feasible: list[str] = []
    exclusions: dict[str, tuple[str, ...]] = {}
    for pattern in kb.patterns:
        broken = tuple(
            f.id for f in active if eval_condition(f.requirement, pattern.values) is False
        )
        if broken:
            exclusions[pattern.id] = broken
        else:
            feasible.append(pattern.id)
    return FeasibilityResult(tuple(feasible), exclusions)


def diagnose_conflict(kb: KnowledgeBase, ctx: Mapping[str, str]) -> ConflictDiagnosis:
    """Minimize the answers responsible for an empty feasible set.

    Greedy deletion over the assigned pairs in reverse assignment
    order: a pair is dropped whenever the remaining pairs alone still
    exclude every pattern. Because filtering is conjunctive (exclusion
    is monotone in the context), the surviving set is minimal: removing
    any one pair restores at least one feasible pattern.
    """
    result = feasible_patterns(kb, ctx)
    if not result.is_empty():
        raise DiagnosisPreconditionError(
            "conflict diagnosis requires an empty feasible set"
        )
    pairs = list(ctx.items())
    kept = list(pairs)
    for pair in reversed(pairs):
        trial = [p for p in kept if p != pair]
        if feasible_patterns(kb, dict(trial)).is_empty():
            kept = trial

    conflict_ctx = dict(kept)
    involved = _involved_filters(kb, conflict_ctx)
    empty_result = feasible_patterns(kb, {})
    unconditional = _involved_filters(kb, {}) if empty_result.is_empty() else ()
    messages = {}
    for filter_id in involved:
        for filt in kb.filter_conditions:
            if filt.id == filter_id:
                messages[filter_id] = filt.message
    return ConflictDiagnosis(tuple(kept), messages, tuple(unconditional))


def _involved_filters(kb: KnowledgeBase, ctx: Mapping[str, str]) -> tuple[str, ...]:
    result = feasible_patterns(kb, ctx)
    involved = set()
    for broken in result.exclusions.values():
        involved.update(broken)
    return tuple(f.id for f in kb.filter_conditions if f.id in involved)
