"""Static quality checks on a knowledge base.

Context domains are small, so the linter works by exhaustive
enumeration of the total context assignments (capped at 10^6): it finds
patterns that can never be feasible, filters that can never fire or
never exclude, and properties nothing refers to. Only contexts that
satisfy the contextual constraints count as reachable.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .errors import InvalidKnowledgeBaseError, PatrecError
from .model import KnowledgeBase, eval_condition, referenced_properties, validate

__all__ = ["LintWarning", "lint_kb", "MAX_CONTEXT_SPACE"]

MAX_CONTEXT_SPACE = 1_000_000


@dataclass(frozen=True)
class LintWarning:
    code: str  # dead-pattern | vacuous-guard | vacuous-requirement | unreferenced-property
    subject: str
    message: str

    def __str__(self) -> str:
        return f"[{self.code}] {self.subject}: {self.message}"


def lint_kb(kb: KnowledgeBase) -> list[LintWarning]:
    """All warnings for a valid knowledge base, in a deterministic order."""
    report = validate(kb)
    if not report.ok:
        raise InvalidKnowledgeBaseError(
            f"lint requires a valid knowledge base: {report.violations[0]}", report.violations
        )
    context_props = kb.context_properties()
    space = 1
    for prop in context_props:
        space *= len(prop.domain)
    if space > MAX_CONTEXT_SPACE:
        raise PatrecError(
            f"context space has {space} total assignments; exhaustive linting is capped at {MAX_CONTEXT_SPACE}"
        )

    def total_contexts():
        names = [p.id for p in context_props]
        for combo in itertools.product(*(p.domain for p in context_props)):
            ctx = dict(zip(names, combo))
            if all(eval_condition(c.expr, ctx) is not False for c in kb.contextual_constraints):
                yield ctx

    warnings: list[LintWarning] = []

    # Pattern side of each filter is context-independent: precompute who violates what.
    violates = {
        filt.id: frozenset(
            p.id for p in kb.patterns if eval_condition(filt.requirement, p.values) is False
        )
        for filt in kb.filter_conditions
    }

    guard_ever_true = {filt.id: False for filt in kb.filter_conditions}
    alive = set()
    for ctx in total_contexts():
        active = [f for f in kb.filter_conditions if eval_condition(f.guard, ctx) is True]
        for filt in active:
            guard_ever_true[filt.id] = True
        for pattern in kb.patterns:
            if pattern.id in alive:
                continue
            if not any(pattern.id in violates[f.id] for f in active):
                alive.add(pattern.id)

    for pattern in kb.patterns:
        if pattern.id not in alive:
            warnings.append(
                LintWarning(
                    "dead-pattern",
                    pattern.id,
                    "infeasible under every valid total context",
                )
            )
    for filt in kb.filter_conditions:
        if not guard_ever_true[filt.id]:
            warnings.append(
                LintWarning("vacuous-guard", filt.id, "the guard holds in no valid total context")
            )
        if not violates[filt.id]:
            warnings.append(
                LintWarning(
                    "vacuous-requirement",
                    filt.id,
                    "every pattern satisfies the requirement; the filter never excludes anything",
                )
            )

    referenced_ctx: set[str] = set()
    for filt in kb.filter_conditions:
        referenced_ctx |= referenced_properties(filt.guard)
    for constraint in kb.contextual_constraints:
        referenced_ctx |= referenced_properties(constraint.expr)
    for rule in kb.weight_rules:
        referenced_ctx |= referenced_properties(rule.guard)
    referenced_pat: set[str] = set()
    for filt in kb.filter_conditions:
        referenced_pat |= referenced_properties(filt.requirement)
    referenced_pat |= {c.source_property for c in kb.criteria}

    for prop in context_props:
        if prop.id not in referenced_ctx:
            warnings.append(
                LintWarning(
                    "unreferenced-property",
                    prop.id,
                    "context property is referenced by no filter guard, constraint, or weight rule",
                )
            )
    for prop in kb.pattern_properties():
        if prop.id not in referenced_pat:
            warnings.append(
                LintWarning(
                    "unreferenced-property",
                    prop.id,
                    "pattern property is referenced by no filter requirement or criterion",
                )
            )
    return warnings
