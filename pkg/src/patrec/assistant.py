"""Free-text questions during elicitation, answered by a pluggable backend.

The default backend is a deterministic offline stub: it keyword-matches
the question against the active knowledge base (property descriptions,
pattern descriptions, filter and constraint messages) and answers with
the best match's text, citing the matched element. Filters that are
active under the current answers get a bonus so "why is X excluded?"
style questions surface the responsible rule.

An external HTTP backend can be configured instead; it receives the
question, a serialization of the active knowledge base, and the current
context, and must return `{"answer": "..."}`. Any failure falls back to
the stub, so callers always get an answer.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass
from typing import Optional

import httpx

from .errors import ConfigError, SessionStateError
from .model import KnowledgeBase, eval_condition

__all__ = ["AssistantExchange", "AssistantConfig", "StubAssistant", "ExternalAssistant", "build_assistant", "ask"]

NO_MATCH_ANSWER = "no knowledge-base match"

_STOPWORDS = {
    "a", "an", "and", "are", "be", "can", "do", "does", "for", "how", "i", "in",
    "is", "it", "mean", "means", "of", "or", "the", "this", "to", "was", "we",
    "what", "when", "which", "why", "will", "with", "would",
}

# Filters whose guard already holds get a head start; questions asked mid-way
# through elicitation usually concern the rules that just excluded something.
_ACTIVE_FILTER_BONUS = 2


@dataclass(frozen=True)
class AssistantExchange:
    question: str
    answer: str
    source: str  # "stub" | "external"
    cited_elements: tuple[str, ...]

    def to_dict(self) -> dict:
        return {
            "question": self.question,
            "answer": self.answer,
            "source": self.source,
            "cited_elements": list(self.cited_elements),
        }


@dataclass(frozen=True)
class AssistantConfig:
    backend: str = "stub"  # "stub" | "external"
    endpoint: Optional[str] = None
    timeout_seconds: float = 10.0
    api_key: Optional[str] = None

    @classmethod
    def from_env(cls, env=None) -> "AssistantConfig":
        env = os.environ if env is None else env
        backend = env.get("PATREC_ASSISTANT_BACKEND", "stub")
        if backend not in ("stub", "external"):
            raise ConfigError(f"unknown assistant backend '{backend}'")
        return cls(
            backend=backend,
            endpoint=env.get("PATREC_ASSISTANT_ENDPOINT"),
            timeout_seconds=float(env.get("PATREC_ASSISTANT_TIMEOUT", "10")),
            api_key=env.get("PATREC_ASSISTANT_API_KEY"),
        )


def _tokens(text: str) -> set[str]:
    return {w for w in re.findall(r"[a-z0-9]+", text.lower()) if w not in _STOPWORDS}


class StubAssistant:
    """Deterministic, offline keyword matcher over the knowledge base."""

    def reply(self, kb: KnowledgeBase, ctx: dict, question: str) -> tuple[str, tuple[str, ...], str]:
        question_tokens = _tokens(question)
        best_score = 0
        best: Optional[tuple[str, str]] = None  # (element id, answer text)
        for element_id, text, bonus in self._candidates(kb, ctx):
            score = len(question_tokens & _tokens(f"{element_id} {text}")) + bonus
            if score > best_score and text:
                best_score = score
                best = (element_id, text)
        if best is None or not question_tokens:
            return NO_MATCH_ANSWER, (), "stub"
        return best[1], (best[0],), "stub"

    def _candidates(self, kb: KnowledgeBase, ctx: dict):
        for prop in kb.property_decls:
            yield prop.id, prop.description or (prop.question_text or ""), 0
        for pattern in kb.patterns:
            yield pattern.id, pattern.description, 0
        for filt in kb.filter_conditions:
            bonus = _ACTIVE_FILTER_BONUS if eval_condition(filt.guard, ctx) is True else 0
            yield filt.id, filt.message, bonus
        for constraint in kb.contextual_constraints:
            yield constraint.id, constraint.message, 0


class ExternalAssistant:
    """Thin HTTP client; request/response contract is JSON in, JSON out."""

    def __init__(self, config: AssistantConfig, client: Optional[httpx.Client] = None):
        if not config.endpoint:
            raise ConfigError("external assistant backend needs an endpoint")
        self.config = config
        self.client = client
        self.fallback = StubAssistant()

    def reply(self, kb: KnowledgeBase, ctx: dict, question: str) -> tuple[str, tuple[str, ...], str]:
        from .dsl import serialize_kb

        payload = {"question": question, "kb_excerpt": serialize_kb(kb), "context": dict(ctx)}
        headers = {}
        if self.config.api_key:
            headers["Authorization"] = f"Bearer {self.config.api_key}"
        try:
            if self.client is not None:
                response = self.client.post(
                    self.config.endpoint, json=payload, headers=headers,
                    timeout=self.config.timeout_seconds,
                )
            else:
                response = httpx.post(
                    self.config.endpoint, json=payload, headers=headers,
                    timeout=self.config.timeout_seconds,
                )
            response.raise_for_status()
            answer = response.json()["answer"]
            if not isinstance(answer, str):
                raise ValueError("answer is not a string")
            return answer, (), "external"
        except Exception:
            return self.fallback.reply(kb, ctx, question)


def build_assistant(config: Optional[AssistantConfig] = None):
    config = config or AssistantConfig()
    if config.backend == "external":
        return ExternalAssistant(config)
    return StubAssistant()


def ask(session, question: str, backend=None) -> AssistantExchange:
    """Answer a free-text question against the session's active knowledge base.

    Only valid while the session is eliciting. The exchange is appended
    to the session transcript; backend failures never surface because
    the stub is the guaranteed fallback.
    """
    from .session import SessionState

    if session.state is not SessionState.ELICITING:
        raise SessionStateError("the assistant is available while eliciting answers")
    backend = backend or StubAssistant()
    answer, cited, source = backend.reply(session.active_kb, session.context, question)
    exchange = AssistantExchange(question, answer, source, cited)
    session.record_exchange(exchange)
    return exchange
