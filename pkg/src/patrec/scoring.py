"""Context-weighted additive scoring of feasible patterns.

Criterion weights start from the knowledge base's base vector, are
shifted by every weight rule whose guard holds in the context, clamped
at zero and normalized to sum 1. A pattern's utility per criterion is
the linear ordinal rank of its source property value (inverted for
criteria where lower is better). The recommendation score is the
weighted sum of utilities, so every score decomposes into auditable
per-criterion contributions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Optional

from .errors import (
    DegenerateWeightsError,
    EmptyFeasibleSetError,
    IncompleteContextError,
    UnknownReferenceError,
)
from .model import (
    Criterion,
    KnowledgeBase,
    PatternDefinition,
    Polarity,
    eval_condition,
    referenced_properties,
)
from .solver import FeasibilityResult, feasible_patterns

__all__ = [
    "WeightVector",
    "Contribution",
    "ScoredPattern",
    "Explanation",
    "resolve_weights",
    "utility",
    "score",
    "rank",
    "explain",
    "build_recommendation_payload",
    "payload_json_bytes",
    "render_explanation",
]


@dataclass(frozen=True)
class WeightVector:
    """Normalized criterion weights plus the rules that shaped them."""

    weights: Mapping[str, float]  # criterion id -> weight in [0, 1], sums to 1
    fired_rules: tuple[str, ...]


@dataclass(frozen=True)
class Contribution:
    weight: float
    utility: float
    product: float


@dataclass(frozen=True)
class ScoredPattern:
    pattern_id: str
    score: float
    contributions: Mapping[str, Contribution]


@dataclass(frozen=True)
class Explanation:
    """Structured reasoning for one ranking: who scored what and why, who fell out and why."""

    context: Mapping[str, str]
    weights: WeightVector
    ranked: tuple[ScoredPattern, ...]
    descriptions: Mapping[str, str]
    exclusions: tuple[tuple[str, tuple[tuple[str, str], ...]], ...]  # (pattern, ((filter, message), ...))


def resolve_weights(kb: KnowledgeBase, ctx: Mapping[str, str]) -> WeightVector:
    """Fold the active weight rules into the base vector and normalize.

    Every context property referenced by any rule guard must be
    assigned, so rule activation is never ambiguous. Addition commutes,
    so rule order cannot matter. If clamping drives every entry to
    zero there is nothing meaningful to normalize and the weights are
    reported degenerate.
    """
    needed = set()
    for rule in kb.weight_rules:
        needed |= referenced_properties(rule.guard)
    missing = sorted(p for p in needed if p not in ctx)
    if missing:
        raise IncompleteContextError(
            f"weight resolution needs answers for: {', '.join(missing)}"
        )
    raw = {c.id: float(kb.base_weights[c.id]) for c in kb.criteria}
    magnitude = max(raw.values(), default=0.0)
    fired: list[str] = []
    for rule in kb.weight_rules:
        if eval_condition(rule.guard, ctx) is True:
            fired.append(rule.id)
            for criterion_id, delta in rule.deltas.items():
                raw[criterion_id] += delta
                magnitude = max(magnitude, abs(delta))
    # Snap float residue at the clamp boundary to zero (relative 1e-9), so
    # uniformly rescaling every base weight and delta cannot leave a stray
    # epsilon weight behind and perturb the ranking.
    epsilon = 1e-9 * max(magnitude, 1e-300)
    clamped = {cid: 0.0 if value <= epsilon else value for cid, value in raw.items()}
    total = sum(clamped.values())
    if total <= 0.0:
        raise DegenerateWeightsError("all criterion weights clamp to zero under this context")
    return WeightVector({cid: value / total for cid, value in clamped.items()}, tuple(fired))


def utility(kb: KnowledgeBase, pattern: PatternDefinition, criterion: Criterion) -> float:
    """Linear ordinal utility of the pattern's value for one criterion.

    Rank r in a domain of n values maps to r/(n-1); inverse-polarity
    criteria flip the scale so the lowest rank yields utility 1.
    """
    prop = kb.property_decl(criterion.source_property)
    if prop is None:
        raise UnknownReferenceError(f"criterion '{criterion.id}' has no declared source property")
    value = pattern.values.get(prop.id)
    if value is None:
        raise UnknownReferenceError(
            f"pattern '{pattern.id}' has no value for '{prop.id}'"
        )
    rank_ = prop.rank(value)
    span = len(prop.domain) - 1
    if criterion.polarity is Polarity.DIRECT:
        return rank_ / span
    return (span - rank_) / span


def score(
    kb: KnowledgeBase,
    pattern: PatternDefinition,
    ctx: Mapping[str, str],
    weights: Optional[WeightVector] = None,
) -> ScoredPattern:
    """Weighted sum of criterion utilities with the full contribution breakdown."""
    vector = weights if weights is not None else resolve_weights(kb, ctx)
    contributions: dict[str, Contribution] = {}
    total = 0.0
    for criterion in kb.criteria:
        w = vector.weights[criterion.id]
        u = utility(kb, pattern, criterion)
        product = w * u
        contributions[criterion.id] = Contribution(w, u, product)
        total += product
    return ScoredPattern(pattern.id, total, contributions)


def rank(kb: KnowledgeBase, ctx: Mapping[str, str]) -> list[ScoredPattern]:
    """Scored feasible patterns, best first; ties keep declaration order."""
    result = feasible_patterns(kb, ctx)
    if result.is_empty():
        raise EmptyFeasibleSetError("no pattern is feasible under this context")
    vector = resolve_weights(kb, ctx)
    scored = [score(kb, kb.pattern(pid), ctx, vector) for pid in result.feasible]
    scored.sort(key=lambda sp: -sp.score)  # stable: declaration order breaks ties
    return scored


def explain(
    kb: KnowledgeBase,
    ctx: Mapping[str, str],
    feasibility: FeasibilityResult,
    ranked: list[ScoredPattern],
) -> Explanation:
    """Bundle ranking, weight provenance and exclusion audit for presentation."""
    vector = resolve_weights(kb, ctx)
    descriptions = {sp.pattern_id: kb.pattern(sp.pattern_id).description for sp in ranked}
    filter_messages = {f.id: f.message for f in kb.filter_conditions}
    exclusions = tuple(
        (
            pattern.id,
            tuple((fid, filter_messages[fid]) for fid in feasibility.exclusions[pattern.id]),
        )
        for pattern in kb.patterns
        if pattern.id in feasibility.exclusions
    )
    ordered_ctx = {p.id: ctx[p.id] for p in kb.context_properties() if p.id in ctx}
    return Explanation(ordered_ctx, vector, tuple(ranked), descriptions, exclusions)


def build_recommendation_payload(kb: KnowledgeBase, ctx: Mapping[str, str]) -> dict:
    """The one JSON-shaped recommendation structure used by CLI and service alike.

    Key order is canonical (context keys follow declaration order) so
    equal inputs serialize to identical bytes regardless of answer
    order.
    """
    feasibility = feasible_patterns(kb, ctx)
    ranked = rank(kb, ctx)
    explanation = explain(kb, ctx, feasibility, ranked)
    return explanation_to_dict(kb, explanation)


def explanation_to_dict(kb: KnowledgeBase, explanation: Explanation) -> dict:
    return {
        "kb": kb.id,
        "context": dict(explanation.context),
        "weights": {cid: explanation.weights.weights[cid] for cid in (c.id for c in kb.criteria)},
        "fired_rules": list(explanation.weights.fired_rules),
        "recommendations": [
            {
                "rank": position,
                "pattern": sp.pattern_id,
                "score": sp.score,
                "contributions": {
                    cid: {
                        "weight": contribution.weight,
                        "utility": contribution.utility,
                        "product": contribution.product,
                    }
                    for cid, contribution in sp.contributions.items()
                },
                "description": explanation.descriptions.get(sp.pattern_id, ""),
            }
            for position, sp in enumerate(explanation.ranked, start=1)
        ],
        "exclusions": [
            {
                "pattern": pattern_id,
                "violated": [{"filter": fid, "message": message} for fid, message in reasons],
            }
            for pattern_id, reasons in explanation.exclusions
        ],
    }


def payload_json_bytes(payload: dict) -> bytes:
    """Canonical JSON encoding of a recommendation payload.

    CLI and HTTP service both emit exactly these bytes, which is what
    makes recorded payloads comparable byte-for-byte across transports
    and replays.
    """
    return json.dumps(
        payload, ensure_ascii=False, allow_nan=False, indent=None, separators=(",", ":")
    ).encode("utf-8")


def render_explanation(payload: dict) -> str:
    """Human-readable rendering of a recommendation payload."""
    lines: list[str] = []
    weights = ", ".join(f"{cid}={value:.4f}" for cid, value in payload["weights"].items())
    lines.append(f"weights: {weights}")
    if payload["fired_rules"]:
        lines.append(f"adjusted by: {', '.join(payload['fired_rules'])}")
    lines.append("")
    for entry in payload["recommendations"]:
        lines.append(f"{entry['rank']}. {entry['pattern']}  score {entry['score']:.4f}")
        for cid, contribution in entry["contributions"].items():
            lines.append(
                f"     {cid}: weight {contribution['weight']:.4f} x utility "
                f"{contribution['utility']:.4f} = {contribution['product']:.4f}"
            )
        if entry["description"]:
            lines.append(f"     {entry['description']}")
    if payload["exclusions"]:
        lines.append("")
        lines.append("excluded:")
        for exclusion in payload["exclusions"]:
            for reason in exclusion["violated"]:
                lines.append(f"  {exclusion['pattern']}: [{reason['filter']}] {reason['message']}")
    return "\n".join(lines)
