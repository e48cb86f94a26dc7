"""Provider adapters: a deterministic mock and a generic HTTP chat backend.

The mock provider exists so the whole service is exercisable end to end
with no network and fully reproducible outputs; its question and verdict
behavior is a documented function of the bundle alone.
"""

from __future__ import annotations

import json
import os
import re

import httpx

from .engine import (
    SUBMISSION_BEGIN,
    SUBMISSION_END,
    PromptBundle,
    ProviderPort,
    ProviderUnavailable,
)

#: Sentences this long (in words) are deemed substantial enough to quote.
SIGNIFICANT_SENTENCE_WORDS = 12

#: Answers this long (in words) count as developed answers in the mock verdict.
DEVELOPED_ANSWER_WORDS = 30

_BUDGET_RE = re.compile(r"Ask a total of (\d+)(?:-(\d+))? questions")
_SENTENCE_SPLIT_RE = re.compile(r"(?<=[.!?])\s+")
_SUBMISSION_RE = re.compile(
    re.escape(SUBMISSION_BEGIN) + r"\n(.*)\n" + re.escape(SUBMISSION_END), re.DOTALL
)


def significant_sentences(text: str) -> list[str]:
    """Document-order sentences of at least SIGNIFICANT_SENTENCE_WORDS words.

    Falls back to the whole text as a single item so short submissions
    still yield something quotable.
    """
    sentences = [s.strip() for s in _SENTENCE_SPLIT_RE.split(text) if s.strip()]
    long_enough = [s for s in sentences if len(s.split()) >= SIGNIFICANT_SENTENCE_WORDS]
    if long_enough:
        return long_enough
    collapsed = " ".join(text.split())
    return [collapsed] if collapsed else ["(empty submission)"]


class MockProvider(ProviderPort):
    """Deterministic examiner double.

    Question k quotes the k-th significant sentence of the submission
    (wrapping when exhausted) inside a fixed interrogative template.  Once
    the candidate has answered as many questions as the budget allows (the
    budget is read back out of the system prompt), it emits a verdict whose
    confidence score is ``min(100, 40 + 10 * developed_answers)`` where a
    developed answer has at least DEVELOPED_ANSWER_WORDS words.
    """

    provider_id = "mock"
    model = "scripted-examiner-1"

    def complete(self, bundle: PromptBundle) -> str:
        m = _BUDGET_RE.search(bundle.system_prompt)
        if m is None:
            raise ValueError("mock provider needs the questions-total clause in the system prompt")
        max_questions = int(m.group(2) or m.group(1))

        answers = [c for role, c in bundle.conversation[1:] if role == "candidate"]
        if len(answers) >= max_questions:
            return self._verdict(answers)

        submission = self._submission_text(bundle)
        asked = sum(1 for role, _ in bundle.conversation if role == "examiner")
        sentences = significant_sentences(submission)
        quoted = sentences[asked % len(sentences)]
        # Braces could read as a JSON object downstream; neutralize them.
        quoted = " ".join(quoted.split()).replace("{", "(").replace("}", ")")
        return (
            f'In your submission you write: "{quoted}" Why did you choose to put it '
            "this way, and how does that choice support the argument you are making "
            "at that point in the text?"
        )

    @staticmethod
    def _submission_text(bundle: PromptBundle) -> str:
        first = bundle.conversation[0][1]
        m = _SUBMISSION_RE.search(first)
        return m.group(1) if m else first

    @staticmethod
    def _verdict(answers: list[str]) -> str:
        developed = sum(1 for a in answers if len(a.split()) >= DEVELOPED_ANSWER_WORDS)
        score = min(100, 40 + 10 * developed)
        assessment = (
            f"The candidate answered {len(answers)} examiner questions about the submitted "
            f"work. {developed} of those answers ran to {DEVELOPED_ANSWER_WORDS} words or "
            "more and engaged substantively with the passages quoted to them; the remainder "
            "were brief. Judged on depth, coherence, and accuracy across the whole exchange, "
            "the record above is consistent with the stated confidence that the candidate "
            "is the author of the submitted work."
        )
        return json.dumps(
            {"assessment": assessment, "confidence_score": score}, ensure_ascii=False
        )


def mock_complete(bundle: PromptBundle) -> str:
    """Module-level convenience over MockProvider."""
    return MockProvider().complete(bundle)


class LiveProvider(ProviderPort):
    """Minimal chat-completion HTTP adapter.

    Endpoint and credential come from the environment so secrets never pass
    through configuration files or transcripts.  The request body is
    ``{"model": ..., "messages": [{"role", "content"}, ...]}``; the response
    may be either ``{"content": "..."}`` or the common
    ``{"choices": [{"message": {"content": "..."}}]}`` shape.
    """

    provider_id = "live"

    _ROLE_MAP = {"examiner": "assistant", "candidate": "user", "system": "system"}

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: str | None = None,
        timeout: float = 60.0,
        temperature: float | None = None,
    ):
        self.endpoint = endpoint
        self.model = model
        self._api_key = api_key
        self._timeout = timeout
        self._temperature = temperature

    @classmethod
    def from_env(cls, env=os.environ) -> "LiveProvider":
        endpoint = env.get("VIVA_PROVIDER_ENDPOINT")
        if not endpoint:
            raise ProviderUnavailable("VIVA_PROVIDER_ENDPOINT is not set")
        temperature = env.get("VIVA_PROVIDER_TEMPERATURE")
        return cls(
            endpoint=endpoint,
            model=env.get("VIVA_PROVIDER_MODEL", "default"),
            api_key=env.get("VIVA_PROVIDER_API_KEY"),
            timeout=float(env.get("VIVA_PROVIDER_TIMEOUT", "60")),
            temperature=float(temperature) if temperature else None,
        )

    def complete(self, bundle: PromptBundle) -> str:
        messages = [{"role": "system", "content": bundle.system_prompt}]
        messages += [
            {"role": self._ROLE_MAP[role], "content": content}
            for role, content in bundle.conversation
        ]
        payload: dict = {"model": self.model, "messages": messages}
        if self._temperature is not None:
            payload["temperature"] = self._temperature
        headers = {"Authorization": f"Bearer {self._api_key}"} if self._api_key else {}
        try:
            response = httpx.post(
                self.endpoint, json=payload, headers=headers, timeout=self._timeout
            )
            response.raise_for_status()
            data = response.json()
        except (httpx.HTTPError, json.JSONDecodeError) as exc:
            raise ProviderUnavailable(str(exc)) from exc
        if isinstance(data, dict):
            if isinstance(data.get("content"), str):
                return data["content"]
            choices = data.get("choices")
            if isinstance(choices, list) and choices:
                message = choices[0].get("message", {})
                if isinstance(message.get("content"), str):
                    return message["content"]
        raise ProviderUnavailable("unrecognized provider response shape")


def get_provider(provider_id: str) -> ProviderPort:
    """Resolve a config provider id to an adapter instance."""
    if provider_id == "mock":
        return MockProvider()
    if provider_id == "live":
        return LiveProvider.from_env()
    raise ValueError(f"unknown provider id {provider_id!r}")


def configured_provider_factory(
    endpoint: str | None = None,
    model: str | None = None,
    temperature: float | None = None,
    env=os.environ,
):
    """Provider factory honoring file-configured live settings.

    The endpoint/model/temperature may come from a config file; the API key
    is environment-only so it never lands in configuration on disk.
    """

    def factory(provider_id: str) -> ProviderPort:
        if provider_id == "live" and endpoint:
            return LiveProvider(
                endpoint=endpoint,
                model=model or env.get("VIVA_PROVIDER_MODEL", "default"),
                api_key=env.get("VIVA_PROVIDER_API_KEY"),
                temperature=temperature,
            )
        return get_provider(provider_id)

    return factory
