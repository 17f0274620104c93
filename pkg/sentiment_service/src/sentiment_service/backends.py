"""Scoring backends and the lazy model registry.

Two model names are served, ``finbert`` and ``bert-base``, each resolved to
a backend at first use:

- **transformers** — a pretrained sequence-classification checkpoint
  (defaults: ProsusAI/finbert and textattack/bert-base-uncased-SST-2),
  CPU inference. Checkpoint names are configurable via environment.
- **lexicon** — a deterministic, dependency-free financial word-list
  scorer. Used as the automatic fallback when checkpoints cannot be
  loaded (air-gapped hosts), or forced via configuration.

Environment knobs:

    SENTIMENT_SERVICE_BACKEND              auto | transformers | lexicon (default auto)
    SENTIMENT_SERVICE_FINBERT_CHECKPOINT   default ProsusAI/finbert
    SENTIMENT_SERVICE_BERT_BASE_CHECKPOINT default textattack/bert-base-uncased-SST-2
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass

log = logging.getLogger("sentiment_service")

MODELS = ("finbert", "bert-base")
MAX_TOKENS = 512

_DEFAULT_CHECKPOINTS = {
    "finbert": "ProsusAI/finbert",
    "bert-base": "textattack/bert-base-uncased-SST-2",
}
_CHECKPOINT_ENV = {
    "finbert": "SENTIMENT_SERVICE_FINBERT_CHECKPOINT",
    "bert-base": "SENTIMENT_SERVICE_BERT_BASE_CHECKPOINT",
}


class ModelUnavailable(Exception):
    """The requested model cannot be loaded on this host."""


@dataclass(frozen=True)
class ScoredText:
    positive: float
    negative: float
    neutral: float
    truncated: bool


# --- lexicon backend ---------------------------------------------------------

POSITIVE_WORDS = frozenset(
    """
    beat beats exceeded exceeds surpass surpassed soar soared soaring surge
    surged rally rallied record gain gains gained profit profits profitable
    upgrade upgraded outperform outperforms growth grow grows strong stronger
    strongest bullish win wins won raise raises raised boost boosts boosted
    jump jumped rebound rebounded breakthrough momentum upbeat optimistic
    dividend buyback expansion innovative
    """.split()
)

NEGATIVE_WORDS = frozenset(
    """
    miss missed misses fall falls fell drop drops dropped decline declined
    declines plunge plunged slump slumped probe probes investigation lawsuit
    downgrade downgraded cut cuts weak weaker weakest loss losses bearish
    recall recalls outage layoff layoffs bankruptcy fraud warning warn warns
    shortfall crash crashed tumble tumbled underperform disappointing
    pessimistic scandal fine fined
    """.split()
)

NEGATIONS = frozenset("not no never hardly without barely".split())

_TOKEN_RE = re.compile(r"[a-z]+(?:[-'][a-z]+)*")


class LexiconScorer:
    """Deterministic word-list scorer; hit counts become probabilities."""

    backend = "lexicon"

    def __init__(self, hit_weight: float = 2.0):
        self.hit_weight = hit_weight

    def _score_one(self, text: str) -> ScoredText:
        tokens = _TOKEN_RE.findall(text.lower())
        truncated = len(tokens) > MAX_TOKENS
        tokens = tokens[:MAX_TOKENS]
        pos_hits = 0
        neg_hits = 0
        for i, token in enumerate(tokens):
            negated = i > 0 and tokens[i - 1] in NEGATIONS
            if token in POSITIVE_WORDS:
                if negated:
                    neg_hits += 1
                else:
                    pos_hits += 1
            elif token in NEGATIVE_WORDS:
                if negated:
                    pos_hits += 1
                else:
                    neg_hits += 1
        raw_pos = 1.0 + self.hit_weight * pos_hits
        raw_neg = 1.0 + self.hit_weight * neg_hits
        raw_neu = 1.5
        total = raw_pos + raw_neg + raw_neu
        return ScoredText(
            positive=raw_pos / total,
            negative=raw_neg / total,
            neutral=raw_neu / total,
            truncated=truncated,
        )

    def score(self, texts) -> list[ScoredText]:
        return [self._score_one(t) for t in texts]


# --- transformers backend ------------------------------------------------------


class TransformersScorer:
    """Pretrained sequence-classification checkpoint on CPU."""

    backend = "transformers"

    def __init__(self, checkpoint: str):
        try:
            import torch
            from transformers import AutoModelForSequenceClassification, AutoTokenizer
        except ImportError as exc:
            raise ModelUnavailable(f"transformers/torch not installed: {exc}") from exc
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(checkpoint)
            self.model = AutoModelForSequenceClassification.from_pretrained(checkpoint)
        except Exception as exc:
            raise ModelUnavailable(f"cannot load checkpoint {checkpoint!r}: {exc}") from exc
        self.model.eval()
        self._torch = torch
        self.checkpoint = checkpoint
        self._label_map = self._map_labels(self.model.config.id2label)

    @staticmethod
    def _map_labels(id2label) -> dict:
        """Map class indices to positive/negative/neutral by label name,
        falling back to the SST two-class convention (0=neg, 1=pos)."""
        mapping = {}
        for idx, label in id2label.items():
            name = str(label).lower()
            if "pos" in name:
                mapping["positive"] = int(idx)
            elif "neg" in name:
                mapping["negative"] = int(idx)
            elif "neu" in name:
                mapping["neutral"] = int(idx)
        if "positive" not in mapping and len(id2label) == 2:
            mapping = {"negative": 0, "positive": 1}
        if "positive" not in mapping or "negative" not in mapping:
            raise ModelUnavailable(f"cannot interpret labels {dict(id2label)!r}")
        return mapping

    def score(self, texts) -> list[ScoredText]:
        torch = self._torch
        texts = list(texts)
        lengths = [len(self.tokenizer(t, truncation=False)["input_ids"]) for t in texts]
        enc = self.tokenizer(
            texts, truncation=True, max_length=MAX_TOKENS, padding=True, return_tensors="pt"
        )
        with torch.no_grad():
            logits = self.model(**enc).logits
            probs = torch.softmax(logits, dim=-1).cpu().numpy()
        out = []
        m = self._label_map
        for row, n_tokens in zip(probs, lengths):
            pos = float(row[m["positive"]])
            neg = float(row[m["negative"]])
            neu = float(row[m["neutral"]]) if "neutral" in m else max(0.0, 1.0 - pos - neg)
            out.append(
                ScoredText(positive=pos, negative=neg, neutral=neu, truncated=n_tokens > MAX_TOKENS)
            )
        return out


# --- registry -------------------------------------------------------------------


class ModelRegistry:
    """Lazy, cached scorer lookup: models load on first request."""

    def __init__(self, env=None):
        self.env = dict(os.environ if env is None else env)
        self._scorers: dict[str, object] = {}

    def checkpoint_for(self, model: str) -> str:
        return self.env.get(_CHECKPOINT_ENV[model], _DEFAULT_CHECKPOINTS[model])

    def _build(self, model: str):
        mode = self.env.get("SENTIMENT_SERVICE_BACKEND", "auto")
        # the two lexicon variants weight hits differently so the model
        # names stay distinguishable offline
        weight = 2.0 if model == "finbert" else 1.5
        if mode == "lexicon":
            return LexiconScorer(hit_weight=weight)
        if mode == "transformers":
            return TransformersScorer(self.checkpoint_for(model))
        try:
            return TransformersScorer(self.checkpoint_for(model))
        except ModelUnavailable as exc:
            log.warning("%s: %s; falling back to the lexicon backend", model, exc)
            return LexiconScorer(hit_weight=weight)

    def get(self, model: str):
        if model not in MODELS:
            raise KeyError(model)
        if model not in self._scorers:
            self._scorers[model] = self._build(model)
        return self._scorers[model]

    def loaded(self) -> list[str]:
        return sorted(self._scorers)

    def backends(self) -> dict:
        return {name: scorer.backend for name, scorer in sorted(self._scorers.items())}
