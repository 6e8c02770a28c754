#!/usr/bin/env python3
"""Check (and, if needed, re-search) the calibrated weight deltas in kbs/authn.kb.

The expectation suite in rcs/ is the oracle: every rule there must hold
for the shipped knowledge base. This script

  1. verifies the currently frozen weights against every context in the
     suite and prints one line per expectation;
  2. with --search, grid-searches delta candidates (step 0.1 inside
     [-1, 1]) for the rules named on the command line until the whole
     suite passes, keeping all other weights fixed.

Usage:
    python3 scripts/calibrate_weights.py
    python3 scripts/calibrate_weights.py --search usability-critical
"""

from __future__ import annotations

import argparse
import itertools
import sys
from dataclasses import replace
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from patrec.cli import load_expectations  # noqa: E402
from patrec.dsl import parse_context, parse_kb  # noqa: E402
from patrec.model import KnowledgeBase, WeightRule  # noqa: E402
from patrec.scoring import rank  # noqa: E402
from patrec.solver import feasible_patterns  # noqa: E402

GRID = [round(x * 0.1, 1) for x in range(-10, 11)]


def load_suite(kb: KnowledgeBase):
    contexts = {}
    for path in sorted((ROOT / "rcs").glob("*.ctx")):
        contexts[path.stem] = parse_context(path.read_text(), kb, str(path))
    expectations = load_expectations(ROOT / "rcs" / "expectations.cfg")
    return contexts, expectations


def check(kb: KnowledgeBase, contexts, expectations, verbose: bool = False) -> list[str]:
    failures: list[str] = []
    tops: dict[str, str] = {}
    for name, ctx in contexts.items():
        feasibility = feasible_patterns(kb, ctx)
        ranked = rank(kb, ctx) if feasibility.feasible else []
        tops[name] = ranked[0].pattern_id if ranked else ""
        for rule in expectations.get(name, []):
            ok = rule.holds(feasibility, ranked)
            if verbose:
                print(f"  {'PASS' if ok else 'FAIL'}  {name}: {rule}")
            if not ok:
                failures.append(f"{name}: {rule}")
    for rule in expectations.get("*", []):
        ok = rule.holds_globally(tops)
        if verbose:
            print(f"  {'PASS' if ok else 'FAIL'}  *: {rule}")
        if not ok:
            failures.append(f"*: {rule}")
    return failures


def search(kb: KnowledgeBase, contexts, expectations, rule_ids: list[str]) -> None:
    rules = {r.id: r for r in kb.weight_rules}
    unknown = [rid for rid in rule_ids if rid not in rules]
    if unknown:
        sys.exit(f"unknown weight rule(s): {', '.join(unknown)}")
    slots = [(rid, cid) for rid in rule_ids for cid in rules[rid].deltas]
    print(f"searching {len(slots)} delta slot(s) over {len(GRID)} grid points each ...")
    for combo in itertools.product(GRID, repeat=len(slots)):
        per_rule: dict[str, dict[str, float]] = {rid: dict(rules[rid].deltas) for rid in rule_ids}
        for (rid, cid), value in zip(slots, combo):
            per_rule[rid][cid] = value
        candidate = replace(
            kb,
            weight_rules=tuple(
                WeightRule(r.id, r.guard, per_rule.get(r.id, r.deltas)) for r in kb.weight_rules
            ),
        )
        if not check(candidate, contexts, expectations):
            assignments = ", ".join(f"{rid}.{cid}={v}" for (rid, cid), v in zip(slots, combo))
            print(f"PASSING CONFIGURATION: {assignments}")
            return
    print("no passing configuration in the searched grid")


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--search", nargs="*", metavar="RULE_ID", help="grid-search these rules' deltas")
    args = parser.parse_args()

    kb = parse_kb((ROOT / "kbs" / "authn.kb").read_text(), "kbs/authn.kb")
    contexts, expectations = load_suite(kb)

    print(f"checking frozen weights of '{kb.id}' against {len(contexts)} contexts:")
    failures = check(kb, contexts, expectations, verbose=True)
    if not failures:
        print("all expectations hold; frozen weights are calibrated.")
        return 0
    print(f"{len(failures)} expectation(s) fail.")
    if args.search:
        search(kb, contexts, expectations, args.search)
    else:
        print("re-run with --search <rule-id>... to grid-search replacement deltas")
    return 1


if __name__ == "__main__":
    raise SystemExit(main())
