"""Scorer backends: the deterministic toy model and the transformers path.

A scorer turns a fixed text into per-token evidence under teacher forcing:
realized-token logprob, next-token distribution entropy, a candidate pool
with probabilities, and one attention row per token (max-pooled over layers
and heads).  Model ids select the backend:

    toy:<variant>      word-level deterministic model, no downloads
    toy-sub:<variant>  same, but splits words in half (incompatible
                       tokenization, for the proxy fallback path)
    anything else      a local transformers causal LM (weights must already
                       be on disk; nothing is downloaded)

Two toy scorers with the same variant produce identical evidence; different
variants differ everywhere.  All toy randomness is SHA-256-derived, so
bundles are byte-stable across runs and platforms.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass

import numpy as np

from .errors import ModelError
from .semantics import digest_floats
from .textproc import segment_words, tokenize_subwords, tokenize_words

_POOL_EXTRA = 3  # toy pool size is topk + this, so appends actually happen
_FILLERS = ("time", "year", "city", "name", "work", "part", "place", "group")
_LAYERS = 2
_HEADS = 2


@dataclass
class TokenEvidence:
    text: str
    char_start: int
    char_end: int
    logprob: float
    entropy_nats: float
    pool: list[tuple[str, float]]  # candidate surfaces with probabilities
    realized_index: int  # position of the realized token inside pool
    attention_row: np.ndarray


class ToyScorer:
    """Deterministic stand-in for a causal LM.

    Per-token statistics are hashes of (variant, preceding context, token),
    which is exactly the teacher-forcing dependency structure: same text
    prefix and same token → same numbers, regardless of what follows.
    """

    def __init__(self, variant: str, topk: int, subword: bool = False):
        if topk < 1:
            raise ModelError(f"topk must be ≥ 1, got {topk}")
        self.variant = variant
        self.topk = topk
        self.subword = subword

    def _vocab(self, text: str) -> list[str]:
        seen = sorted({w.core.lower() for w in segment_words(text) if w.core})
        return seen + list(_FILLERS)

    def _pool(
        self, context: str, realized: str, vocab: list[str]
    ) -> tuple[list[tuple[str, float]], int]:
        size = self.topk + _POOL_EXTRA
        surfaces = [realized]
        if realized[:1].isdigit():
            digits = re.sub(r"\D", "", realized) or "0"
            bump = 1 + int(
                digest_floats("bump", self.variant, realized, n=1)[0] * 40
            )
            surfaces.append(str(int(digits) + bump))  # a contradicting number
        picks = digest_floats("cand", self.variant, context, realized, n=size)
        for u in picks:
            if len(surfaces) == size:
                break
            cand = vocab[int(u * len(vocab))]
            if cand not in surfaces:
                surfaces.append(cand)
        for j in range(size - len(surfaces)):
            surfaces.append(f"filler{j}")
        weights = digest_floats("prob", self.variant, context, realized, n=size)
        weights = weights**2 + 1e-4
        probs = weights / weights.sum()
        order = np.argsort(-probs, kind="stable")
        pool = [(surfaces[int(j)], float(probs[int(j)])) for j in order]
        realized_index = int(np.nonzero(order == 0)[0][0])
        return pool, realized_index

    def run(self, text: str) -> list[TokenEvidence]:
        tokens = tokenize_subwords(text) if self.subword else tokenize_words(text)
        vocab = self._vocab(text)
        out: list[TokenEvidence] = []
        for i, tok in enumerate(tokens):
            context = text[: tok.char_start][-80:]
            pool, realized_index = self._pool(context, tok.text, vocab)
            probs = [p for _, p in pool]
            logprob = float(np.log(probs[realized_index]))
            entropy = float(-np.sum(np.asarray(probs) * np.log(probs)))
            seed = int.from_bytes(
                hashlib.sha256(
                    f"att\x1f{self.variant}\x1f{text[:32]}\x1f{i}".encode("utf-8")
                ).digest()[:8],
                "little",
            )
            rng = np.random.default_rng(seed)
            att = rng.random((_LAYERS, _HEADS, i)).max(axis=(0, 1)) if i else np.zeros(0)
            out.append(
                TokenEvidence(
                    text=tok.text,
                    char_start=tok.char_start,
                    char_end=tok.char_end,
                    logprob=logprob,
                    entropy_nats=entropy,
                    pool=pool,
                    realized_index=realized_index,
                    attention_row=att,
                )
            )
        return out


class TransformersScorer:  # pragma: no cover - needs local model weights
    """Teacher forcing through a local transformers causal LM on CPU/GPU.

    Long documents: attention is O(T²) memory with eager attention (needed
    to get attention maps out); split oversized datasets or run doc by doc
    if the process is killed.
    """

    def __init__(self, model_id: str, topk: int):
        self.model_id = model_id
        self.topk = topk
        try:
            import torch
            from transformers import AutoModelForCausalLM, AutoTokenizer
        except ImportError as exc:
            raise ModelError(
                "transformers and torch are required for real models "
                "(pip install 'halluscore-extractor[models]')"
            ) from exc
        self._torch = torch
        try:
            self.tokenizer = AutoTokenizer.from_pretrained(
                model_id, local_files_only=True
            )
            self.model = AutoModelForCausalLM.from_pretrained(
                model_id, local_files_only=True, attn_implementation="eager"
            )
        except Exception as exc:
            raise ModelError(
                f"cannot load model {model_id!r} from local files: {exc}"
            ) from exc
        self.model.eval()

    def run(self, text: str) -> list[TokenEvidence]:
        torch = self._torch
        enc = self.tokenizer(
            text, return_offsets_mapping=True, return_tensors="pt"
        )
        input_ids = enc["input_ids"]
        offsets = enc["offset_mapping"][0].tolist()
        if not self.tokenizer("x")["input_ids"][:-1]:  # no BOS prepended
            bos = self.tokenizer.bos_token_id or self.tokenizer.eos_token_id
            if bos is None:
                raise ModelError(
                    f"{self.model_id}: tokenizer has no BOS/EOS to anchor "
                    "teacher forcing"
                )
            input_ids = torch.cat(
                [torch.tensor([[bos]]), input_ids], dim=1
            )
            offsets = [(0, 0)] + offsets
        with torch.no_grad():
            result = self.model(input_ids, output_attentions=True)
        logprobs = torch.log_softmax(result.logits[0], dim=-1)
        probs = logprobs.exp()
        entropies = -(probs * logprobs).sum(dim=-1)
        # (layers, heads, T, T) → max-pool over layers and heads
        att = torch.stack([a[0] for a in result.attentions]).amax(dim=(0, 1))

        text_positions = [
            j for j, (a, b) in enumerate(offsets) if b > a
        ]
        out: list[TokenEvidence] = []
        for row_index, j in enumerate(text_positions):
            a, b = offsets[j]
            while a < b and text[a].isspace():  # BPE folds the space in
                a += 1
            token_id = int(input_ids[0, j])
            surface = text[a:b]
            if j == 0:
                evidence = TokenEvidence(
                    surface, a, b, 0.0, 0.0, [(surface, 1.0)], 0, np.zeros(0)
                )
            else:
                dist = logprobs[j - 1]
                top = torch.topk(dist, k=min(self.topk, dist.shape[-1]))
                pool = [
                    (
                        self.tokenizer.decode([int(i)]).strip() or self.tokenizer.decode([int(i)]),
                        float(dist[int(i)].exp()),
                    )
                    for i in top.indices
                ]
                realized_index = next(
                    (k for k, i in enumerate(top.indices) if int(i) == token_id),
                    None,
                )
                if realized_index is None:
                    pool.append((surface, float(dist[token_id].exp())))
                    realized_index = len(pool) - 1
                evidence = TokenEvidence(
                    text=surface,
                    char_start=a,
                    char_end=b,
                    logprob=float(dist[token_id]),
                    entropy_nats=float(entropies[j - 1]),
                    pool=pool,
                    realized_index=realized_index,
                    attention_row=att[j, text_positions[:row_index]]
                    .to(torch.float32)
                    .numpy(),
                )
            out.append(evidence)
        return out


def get_scorer(model_id: str, topk: int):
    if model_id.startswith("toy:"):
        return ToyScorer(model_id[len("toy:") :], topk)
    if model_id.startswith("toy-sub:"):
        return ToyScorer(model_id[len("toy-sub:") :], topk, subword=True)
    return TransformersScorer(model_id, topk)
