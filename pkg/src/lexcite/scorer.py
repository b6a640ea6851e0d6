"""Shared matching function between a fact embedding and the section set.

Section embeddings are contextualized in statute order by a bidirectional
LSTM, attention-pooled into one set vector, concatenated with the fact
embedding and mapped through a sigmoid classifier to per-section scores.
One parameter set serves all three score types (attribute, structural,
alignment); only the embeddings fed in differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Tensor


@dataclass
class ScoreTriple:
    """Per-fact score vectors in (0, 1); structural is None at inference."""

    attribute: Tensor
    alignment: Tensor
    structural: Tensor | None = None

    def combined(self, lambda_a: float, lambda_l: float) -> np.ndarray:
        return lambda_a * self.attribute.data + lambda_l * self.alignment.data


class MatchScorer:
    def __init__(self, rng: np.random.Generator, n_sections: int, d_prime: int, d_s: int,
                 dynamic_context: bool = True):
        self.n_sections = n_sections
        self.d_prime = d_prime
        self.d_s = d_s
        self.dynamic_context = dynamic_context

        self.seq = nn.BiLSTM(rng, d_prime, d_prime, "scorer.seq")
        self.seq_proj = nn.glorot_init(rng, (2 * d_prime, d_prime))
        self.seq_proj_b = nn.zeros_init((d_prime,))
        self.att_m = nn.glorot_init(rng, (d_prime, d_s))
        self.att_b = nn.zeros_init((d_s,))
        if dynamic_context:
            self.att_ctx = nn.glorot_init(rng, (d_prime, d_s))
        else:
            self.att_ctx = nn.uniform_init(rng, (d_s,))
        self.classifier_w = nn.glorot_init(rng, (2 * d_prime, n_sections))
        self.classifier_b = nn.zeros_init((n_sections,))

    def parameters(self) -> dict[str, Tensor]:
        params = {
            "scorer.seq_proj": self.seq_proj,
            "scorer.seq_proj_b": self.seq_proj_b,
            "scorer.att_m": self.att_m,
            "scorer.att_b": self.att_b,
            "scorer.att_ctx": self.att_ctx,
            "scorer.classifier_w": self.classifier_w,
            "scorer.classifier_b": self.classifier_b,
        }
        params.update(self.seq.params)
        return params

    # -- pipeline stages ---------------------------------------------------------

    def contextualize_sections(self, section_embeddings: Tensor) -> Tensor:
        """(n_sets, n_sections, d') -> same shape, sequence-contextualized.

        The input order must be the hierarchy file order; the recurrence
        exploits that statutes have a defined sequential order.
        """
        n_sets, n_sec, _ = section_embeddings.shape
        states = self.seq(section_embeddings)  # (n_sets, n_sec, 2d')
        flat = ad.reshape(states, (n_sets * n_sec, 2 * self.d_prime))
        proj = ad.add(ad.matmul(flat, self.seq_proj), self.seq_proj_b)
        return ad.reshape(proj, (n_sets, n_sec, self.d_prime))

    def pool_sections(self, contextualized: Tensor, context: Tensor):
        """Attention-pool contextualized sections (n_sec, d').

        `context` is the static learned vector (d_s,) or a per-fact dynamic
        context (batch, d_s). Returns (pooled (batch, d'), gamma (batch, n_sec)).
        """
        n_sec, d = contextualized.shape
        u = ad.tanh(ad.add(ad.matmul(contextualized, self.att_m), self.att_b))  # (n_sec, d_s)
        if context.ndim == 1:
            scores = ad.reshape(ad.matmul(u, ad.reshape(context, (self.d_s, 1))), (1, n_sec))
        else:
            scores = ad.matmul(context, u.transpose())  # (batch, n_sec)
        gamma = ad.softmax(scores, axis=1)
        pooled = ad.matmul(gamma, contextualized)
        return pooled, gamma

    def score(self, h_f: Tensor, h_set: Tensor) -> Tensor:
        """sigmoid(W [h_f || h_set] + b) -> (batch, n_sections) in (0, 1)."""
        if h_set.shape[0] == 1 and h_f.shape[0] > 1:
            h_set = ad.mul(h_set, np.ones((h_f.shape[0], 1)))
        cat = ad.concat([h_f, h_set], axis=1)
        return ad.sigmoid(ad.add(ad.matmul(cat, self.classifier_w), self.classifier_b))

    def fact_context(self, h_f: Tensor) -> Tensor:
        """Dynamic pooling context from fact embeddings, or the static one."""
        if self.dynamic_context:
            return ad.matmul(h_f, self.att_ctx)
        return self.att_ctx

    def match(self, h_f: Tensor, section_set: Tensor, context: Tensor) -> Tensor:
        """Full scoring chain for one (fact batch, section set) pairing."""
        ctx_sections = self.contextualize_sections(
            ad.reshape(section_set, (1,) + section_set.shape))[0]
        pooled, _ = self.pool_sections(ctx_sections, context)
        return self.score(h_f, pooled)

    def score_triple(self, h_f_attr: Tensor, h_s_attr: Tensor, h_s_struct: Tensor,
                     h_f_struct: Tensor | None = None) -> ScoreTriple:
        """Attribute, alignment and (training only) structural scores.

        Each application of the scorer derives its pooling context from the
        fact embedding it scores with: the attribute and alignment scores
        share the attribute-derived context, the structural score uses the
        structural fact embedding (so its gradients stay on the graph side).
        """
        context = self.fact_context(h_f_attr)
        both = ad.stack([h_s_attr, h_s_struct], axis=0)
        contextualized = self.contextualize_sections(both)
        pooled_attr, _ = self.pool_sections(contextualized[0], context)
        pooled_struct, _ = self.pool_sections(contextualized[1], context)
        triple = ScoreTriple(
            attribute=self.score(h_f_attr, pooled_attr),
            alignment=self.score(h_f_attr, pooled_struct),
        )
        if h_f_struct is not None:
            struct_context = self.fact_context(h_f_struct)
            pooled_for_struct, _ = self.pool_sections(contextualized[1], struct_context)
            triple.structural = self.score(h_f_struct, pooled_for_struct)
        return triple


def dynamic_contexts(h_attr: Tensor, t_p: dict[str, Tensor], t_a: Tensor, t_s: Tensor):
    """Generate the three dynamic context families from attribute embeddings:
    per-schema intra contexts, the inter context and the pooling context."""
    a_p = {sid: ad.matmul(h_attr, tp) for sid, tp in t_p.items()}
    q_a = ad.matmul(h_attr, t_a)
    w_s = ad.matmul(h_attr, t_s)
    return a_p, q_a, w_s
