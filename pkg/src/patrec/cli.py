"""Command-line front end.

Commands:
    recommend  rank the patterns of a knowledge base for a context file
    evaluate   check a suite of context files against an expectations manifest
    lint       static checks on a knowledge base
    wizard     interactive elicitation on a terminal
    serve      run the HTTP service

Exit codes: 0 ok; 1 lint findings or expectation failures; 2 input
errors; 3 empty feasible set.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass
from pathlib import Path

from .assistant import AssistantConfig, build_assistant, ask
from .catalog import KBCatalog, load_kb_file
from .dsl import ParseError, parse_context
from .errors import PatrecError
from .lint import lint_kb
from .scoring import build_recommendation_payload, payload_json_bytes, render_explanation
from .session import SessionState, start_session
from .solver import diagnose_conflict, feasible_patterns, check_context

__all__ = ["main", "ExpectationRule", "load_expectations"]

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_INPUT = 2
EXIT_INFEASIBLE = 3


# ---------------------------------------------------------------------------
# Expectation manifests (used by `evaluate` and the calibration script)
# ---------------------------------------------------------------------------

_RULE_KINDS = ("top_set", "top_one_of", "excluded", "never_top")


@dataclass(frozen=True)
class ExpectationRule:
    kind: str
    patterns: tuple[str, ...]

    def __str__(self) -> str:
        return f"{self.kind} = {', '.join(self.patterns)}"

    def holds(self, feasibility, ranked) -> bool:
        ranked_ids = [sp.pattern_id for sp in ranked]
        if self.kind == "top_set":
            return set(ranked_ids[: len(self.patterns)]) == set(self.patterns)
        if self.kind == "top_one_of":
            return bool(ranked_ids) and ranked_ids[0] in self.patterns
        if self.kind == "excluded":
            return all(p in feasibility.exclusions for p in self.patterns)
        if self.kind == "never_top":
            return not ranked_ids or ranked_ids[0] not in self.patterns
        raise ValueError(f"unknown expectation kind '{self.kind}'")

    def holds_globally(self, tops: dict[str, str]) -> bool:
        if self.kind != "never_top":
            raise ValueError("only never_top rules apply across contexts")
        return all(top not in self.patterns for top in tops.values())


def load_expectations(path: Path | str) -> dict[str, list[ExpectationRule]]:
    """Parse an expectations manifest (INI: one section per context, `[*]` global)."""
    path = Path(path)
    if not path.is_file():
        raise PatrecError(f"expectations manifest '{path}' not found")
    parser = configparser.ConfigParser()
    try:
        parser.read_string(path.read_text(encoding="utf-8"), source=str(path))
    except configparser.Error as exc:
        raise PatrecError(f"bad expectations manifest: {exc}")
    expectations: dict[str, list[ExpectationRule]] = {}
    for section in parser.sections():
        rules: list[ExpectationRule] = []
        for key, raw in parser.items(section):
            if key not in _RULE_KINDS:
                raise PatrecError(f"{path}: unknown expectation rule '{key}' in [{section}]")
            patterns = tuple(p.strip() for p in raw.split(",") if p.strip())
            if not patterns:
                raise PatrecError(f"{path}: rule '{key}' in [{section}] lists no patterns")
            rules.append(ExpectationRule(key, patterns))
        expectations[section] = rules
    return expectations


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _load_kb(path: str):
    return load_kb_file(Path(path))


def cmd_recommend(args, out, err) -> int:
    kb = _load_kb(args.kb_file)
    ctx = parse_context(Path(args.ctx_file).read_text(encoding="utf-8"), kb, args.ctx_file)
    violated = check_context(kb, ctx)
    if violated:
        print(f"context violates contextual constraints: {', '.join(violated)}", file=err)
        return EXIT_INPUT
    feasibility = feasible_patterns(kb, ctx)
    if feasibility.is_empty():
        diagnosis = diagnose_conflict(kb, ctx)
        print("no pattern is feasible under this context.", file=err)
        if diagnosis.conflict:
            pairs = ", ".join(f"{p} = {v}" for p, v in diagnosis.conflict)
            print(f"minimal conflicting answers: {pairs}", file=err)
        for filter_id in diagnosis.filter_messages:
            print(f"  [{filter_id}] {diagnosis.filter_messages[filter_id]}", file=err)
        for filter_id in diagnosis.unconditional:
            print(f"  [{filter_id}] excludes patterns regardless of any answer", file=err)
        return EXIT_INFEASIBLE
    payload = build_recommendation_payload(kb, ctx)
    if args.json:
        out.write(payload_json_bytes(payload).decode("utf-8") + "\n")
    else:
        print(render_explanation(payload), file=out)
    return EXIT_OK


def cmd_evaluate(args, out, err) -> int:
    kb = _load_kb(args.kb_file)
    suite = Path(args.suite_dir)
    if not suite.is_dir():
        print(f"suite directory '{suite}' not found", file=err)
        return EXIT_INPUT
    ctx_files = sorted(suite.glob("*.ctx"))
    if not ctx_files:
        print(f"suite directory '{suite}' contains no .ctx files", file=err)
        return EXIT_INPUT
    expectations = load_expectations(suite / "expectations.cfg")
    contexts = {
        path.stem: parse_context(path.read_text(encoding="utf-8"), kb, str(path))
        for path in ctx_files
    }
    unknown = [name for name in expectations if name != "*" and name not in contexts]
    if unknown:
        print(f"expectations reference unknown contexts: {', '.join(unknown)}", file=err)
        return EXIT_INPUT

    from .scoring import rank
    from .errors import EmptyFeasibleSetError

    failures = 0
    tops: dict[str, str] = {}
    for name, ctx in contexts.items():
        feasibility = feasible_patterns(kb, ctx)
        try:
            ranked = rank(kb, ctx)
        except EmptyFeasibleSetError:
            ranked = []
        tops[name] = ranked[0].pattern_id if ranked else ""
        for rule in expectations.get(name, []):
            ok = rule.holds(feasibility, ranked)
            failures += 0 if ok else 1
            print(f"{'PASS' if ok else 'FAIL'}  {name}: {rule}", file=out)
    for rule in expectations.get("*", []):
        ok = rule.holds_globally(tops)
        failures += 0 if ok else 1
        print(f"{'PASS' if ok else 'FAIL'}  *: {rule}", file=out)
    print(f"{'all expectations hold' if not failures else f'{failures} expectation(s) failed'}", file=out)
    return EXIT_OK if not failures else EXIT_FINDINGS


def cmd_lint(args, out, err) -> int:
    kb = _load_kb(args.kb_file)
    warnings = lint_kb(kb)
    for warning in warnings:
        print(str(warning), file=out)
    if warnings:
        print(f"{len(warnings)} warning(s)", file=out)
        return EXIT_FINDINGS
    print("no warnings", file=out)
    return EXIT_OK


def cmd_serve(args, out, err) -> int:
    import uvicorn

    from .service import ServiceConfig, create_app

    try:
        host, _, port_text = args.listen.rpartition(":")
        port = int(port_text)
    except ValueError:
        print(f"bad --listen value '{args.listen}' (expected host:port)", file=err)
        return EXIT_INPUT
    config = ServiceConfig(
        kb_dir=args.kb_dir,
        store_dir=args.store_dir,
        assistant=_assistant_config(args),
    )
    app = create_app(config)
    print(f"serving knowledge bases from {args.kb_dir} on {host or '127.0.0.1'}:{port}", file=out)
    uvicorn.run(app, host=host or "127.0.0.1", port=port, log_level="warning")
    return EXIT_OK


def _assistant_config(args) -> AssistantConfig:
    base = AssistantConfig.from_env()
    backend = getattr(args, "assistant_backend", None) or base.backend
    endpoint = getattr(args, "assistant_endpoint", None) or base.endpoint
    timeout = getattr(args, "assistant_timeout", None) or base.timeout_seconds
    return AssistantConfig(backend=backend, endpoint=endpoint, timeout_seconds=float(timeout), api_key=base.api_key)


# ---------------------------------------------------------------------------
# Wizard
# ---------------------------------------------------------------------------

_WIZARD_HELP = (
    "answer with an option number or value; '? <question>' asks the assistant, "
    "'back' retracts the previous answer, 'quit' exits"
)


def cmd_wizard(args, out, err, stdin=None) -> int:
    stdin = stdin if stdin is not None else sys.stdin
    catalog = KBCatalog.from_file(args.kb_file)
    kb = catalog.load_file(args.kb_file)
    assistant = build_assistant(_assistant_config(args))

    def read_line(prompt: str):
        out.write(prompt)
        out.flush()
        line = stdin.readline()
        if line == "":
            return None
        return line.strip()

    requirement = read_line("Security requirement: ")
    if requirement is None:
        return EXIT_OK
    session = start_session(requirement, kb.id, catalog)
    print(f"({_WIZARD_HELP})", file=out)

    while True:
        state = session.state
        if state is SessionState.ELICITING:
            question = session.next_question()
            if question is None:
                continue
            print(f"\n[{session.stage.value}] {question.text}", file=out)
            for index, option in enumerate(question.options, start=1):
                preview = question.impact_preview[option]
                note = "invalid combination" if preview is None else f"{preview} patterns remain"
                print(f"  {index}. {option}  ({note})", file=out)
            raw = read_line("> ")
            if raw is None or raw == "quit":
                print("bye.", file=out)
                return EXIT_OK
            if raw.startswith("?"):
                text = raw[1:].strip()
                exchange = ask(session, text, assistant)
                cited = f" [{', '.join(exchange.cited_elements)}]" if exchange.cited_elements else ""
                print(f"assistant: {exchange.answer}{cited}", file=out)
                continue
            if raw == "back":
                log = session.answer_log
                if not log:
                    print("nothing to retract yet.", file=out)
                    continue
                last = log[-1]["property"]
                session.retract(last)
                print(f"retracted '{last}'.", file=out)
                continue
            if raw.isdigit() and 1 <= int(raw) <= len(question.options):
                value = question.options[int(raw) - 1]
            else:
                value = raw
            try:
                outcome = session.answer(question.property_id, value)
            except PatrecError as exc:
                print(f"error: {exc}", file=out)
                continue
            if outcome.conflict is not None:
                continue  # conflict banner printed in the CONFLICTED branch
            print(f"{outcome.feasible_count} patterns remain feasible.", file=out)
        elif state is SessionState.CONFLICTED:
            diagnosis = session.conflict
            print("\nno pattern is feasible with these answers:", file=out)
            for prop, value in diagnosis.conflict:
                print(f"  {prop} = {value}", file=out)
            for filter_id, message in diagnosis.filter_messages.items():
                print(f"  [{filter_id}] {message}", file=out)
            raw = read_line("retract which property? ")
            if raw is None or raw == "quit":
                return EXIT_OK
            try:
                session.retract(raw)
                print(f"retracted '{raw}'.", file=out)
            except PatrecError as exc:
                print(f"error: {exc}", file=out)
        elif state is SessionState.RECOMMENDING:
            payload = session.recommendations()
            print("\nrecommendations:", file=out)
            print(render_explanation(payload), file=out)
        elif state is SessionState.AWAITING_SELECTION:
            raw = read_line("\nselect a pattern id (or 'done'): ")
            if raw is None or raw in ("done", "quit"):
                print("bye.", file=out)
                return EXIT_OK
            try:
                session.select_pattern(raw)
            except PatrecError as exc:
                print(f"error: {exc}", file=out)
                continue
            if session.state is SessionState.ELICITING:
                print(f"\ncontinuing with design refinements of '{session.selected_sp}'.", file=out)
                inherited = [e for e in session.answer_log if e["source"] == "inherited"]
                for entry in inherited:
                    print(
                        f"  inherited {entry['property']} = {entry['value']} (retract with 'back' if wrong)",
                        file=out,
                    )
        else:  # DONE
            chosen = session.selected_sdp or session.selected_sp
            print(f"\nfinished: selected '{chosen}'.", file=out)
            return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patrec", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_rec = sub.add_parser("recommend", help="rank patterns for a context file")
    p_rec.add_argument("kb_file")
    p_rec.add_argument("ctx_file")
    p_rec.add_argument("--json", action="store_true", help="emit the recommendation payload as JSON")
    p_rec.set_defaults(func=cmd_recommend)

    p_eval = sub.add_parser("evaluate", help="check a context suite against expectations")
    p_eval.add_argument("kb_file")
    p_eval.add_argument("suite_dir")
    p_eval.set_defaults(func=cmd_evaluate)

    p_lint = sub.add_parser("lint", help="static checks on a knowledge base")
    p_lint.add_argument("kb_file")
    p_lint.set_defaults(func=cmd_lint)

    p_wiz = sub.add_parser("wizard", help="interactive recommendation session")
    p_wiz.add_argument("kb_file")
    p_wiz.add_argument("--assistant-backend", choices=("stub", "external"))
    p_wiz.add_argument("--assistant-endpoint")
    p_wiz.add_argument("--assistant-timeout", type=float)
    p_wiz.set_defaults(func=cmd_wizard)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--kb-dir", required=True)
    p_serve.add_argument("--store-dir", required=True)
    p_serve.add_argument("--listen", default="127.0.0.1:8000")
    p_serve.add_argument("--assistant-backend", choices=("stub", "external"))
    p_serve.add_argument("--assistant-endpoint")
    p_serve.add_argument("--assistant-timeout", type=float)
    p_serve.set_defaults(func=cmd_serve)

    return parser


def main(argv=None, stdin=None, stdout=None, stderr=None) -> int:
    out = stdout if stdout is not None else sys.stdout
    err = stderr if stderr is not None else sys.stderr
    args = build_parser().parse_args(argv)
    try:
        if args.func is cmd_wizard:
            return cmd_wizard(args, out, err, stdin=stdin)
        return args.func(args, out, err)
    except ParseError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INPUT
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INPUT
    except PatrecError as exc:
        print(f"error: {exc}", file=err)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
