"""Structural node embeddings from the citation network.

Pipeline per node: sample metapath instances per schema, fold each instance
into one vector with the relational-rotation recurrence, attention-pool the
instances of each schema (intra), then attention-combine the schemas (inter).
Attention context vectors are either learned parameters or generated
dynamically from the node's text embedding.

A lookup-table variant (:class:`LookupEncoder`) replaces the whole pipeline
for the embedding-ablation configuration.
"""

from __future__ import annotations

import numpy as np

from . import autodiff as ad
from . import nn
from .autodiff import Parameter, Tensor
from .graph import NODE_TYPES, RELATIONS, HeteroGraph, MetapathInstance, MetapathSchema

LEAKY_SLOPE = 0.01


class MetapathEncoder:
    def __init__(self, rng: np.random.Generator, graph: HeteroGraph,
                 schemas: list[MetapathSchema], d_node: int, d_prime: int, d_m: int,
                 dynamic_context: bool = True):
        self.schemas = {s.id: s for s in schemas}
        self.sides = {"S": [s for s in schemas if s.side == "section"],
                      "F": [s for s in schemas if s.side == "fact"]}
        self.d_node = d_node
        self.d_prime = d_prime
        self.d_m = d_m
        self.dynamic_context = dynamic_context

        self.node_embed = {t: nn.uniform_init(rng, (graph.n_nodes(t), d_node))
                           for t in NODE_TYPES}
        self.node_proj = {t: nn.glorot_init(rng, (d_node, d_prime)) for t in NODE_TYPES}
        self.relation_vecs = nn.uniform_init(rng, (len(RELATIONS), d_prime))
        self.rel_index = {r: i for i, r in enumerate(RELATIONS)}

        self.schema_ctx: dict[str, Parameter] = {}
        self.summary_m: dict[str, Parameter] = {}
        self.summary_b: dict[str, Parameter] = {}
        self.side_ctx: dict[str, Parameter] = {}
        for s in schemas:
            shape = (d_prime, 2 * d_prime) if dynamic_context else (2 * d_prime,)
            init = nn.glorot_init if dynamic_context else nn.uniform_init
            self.schema_ctx[s.id] = init(rng, shape)
        for t in ("S", "F"):
            self.summary_m[t] = nn.glorot_init(rng, (d_prime, d_m))
            self.summary_b[t] = nn.zeros_init((d_m,))
            shape = (d_prime, d_m) if dynamic_context else (d_m,)
            init = nn.glorot_init if dynamic_context else nn.uniform_init
            self.side_ctx[t] = init(rng, shape)

    def parameters(self) -> dict[str, Tensor]:
        params: dict[str, Tensor] = {"structural.relations": self.relation_vecs}
        for t in NODE_TYPES:
            params[f"structural.embed.{t}"] = self.node_embed[t]
            params[f"structural.proj.{t}"] = self.node_proj[t]
        for sid, p in self.schema_ctx.items():
            params[f"structural.schema_ctx.{sid}"] = p
        for t in ("S", "F"):
            params[f"structural.summary_m.{t}"] = self.summary_m[t]
            params[f"structural.summary_b.{t}"] = self.summary_b[t]
            params[f"structural.side_ctx.{t}"] = self.side_ctx[t]
        return params

    # -- node features ----------------------------------------------------------

    def feature_table(self, node_type: str) -> Tensor:
        """Transformed per-node features for one type: X_t projected to d'."""
        return ad.matmul(self.node_embed[node_type], self.node_proj[node_type])

    def node_feature(self, graph: HeteroGraph, v: str) -> Tensor:
        """h' for one node; unknown ids raise (inductive-hygiene gate)."""
        g = graph.global_index(v)
        t = graph.node_type[g]
        return self.feature_table(t)[graph.type_index[g]]

    def encode_node(self, graph: HeteroGraph, v: str, k: int, seed: int,
                    attr_embedding: Tensor | None = None) -> Tensor:
        """Single-node convenience over encode(); batch scope is just v."""
        attr = None
        if attr_embedding is not None:
            attr = ad.reshape(attr_embedding, (1, self.d_prime))
        return self.encode(graph, [v], k, seed, attr_embeddings=attr)[0]

    # -- batched encoding ---------------------------------------------------------

    def encode(self, graph: HeteroGraph, node_ids: list[str], k: int, seed: int,
               attr_embeddings: Tensor | None = None, return_weights: bool = False,
               exclude_target_revisit: bool = False):
        """Encode nodes of one type into (n, d') structural embeddings."""
        if not node_ids:
            raise ValueError("empty node batch")
        gidx = np.array([graph.global_index(v) for v in node_ids])
        node_type = graph.node_type[gidx[0]]
        if any(graph.node_type[g] != node_type for g in gidx):
            raise ValueError("encode() expects nodes of a single type")
        if self.dynamic_context and attr_embeddings is None:
            raise ValueError("dynamic context requires attribute embeddings")
        schemas = self.sides[node_type]
        n = len(node_ids)
        type_local = np.array(graph.type_index)

        tables = {t: self.feature_table(t) for t in NODE_TYPES}
        target_feats = ad.embedding(tables[node_type], type_local[gidx])

        per_schema: list[Tensor] = []
        weights: dict[str, np.ndarray] = {}
        for schema in schemas:
            walks = [graph._sample_walks_idx(int(g), schema, k, seed, exclude_target_revisit)
                     for g in gidx]
            with_idx = np.array([i for i, w in enumerate(walks) if w], dtype=int)
            if len(with_idx) == 0:
                per_schema.append(Tensor(np.zeros((n, self.d_prime))))
                continue
            arr = np.array([walks[i] for i in with_idx])  # (n_w, k, M+1) instance order
            m_len = schema.length

            feats = []
            for pos in range(m_len + 1):
                pos_type = schema.node_types[m_len - pos]
                feats.append(ad.embedding(tables[pos_type], type_local[arr[:, :, pos]]))
            q = feats[0]
            for i in range(1, m_len + 1):
                r = self.relation_vecs[self.rel_index[schema.relations[i - 1]]]
                q = ad.add(feats[i], ad.mul(q, r))
            h_inst = ad.mul(q, 1.0 / (m_len + 1))

            h_v = ad.embedding(tables[node_type], type_local[gidx[with_idx]])
            ctx = self.schema_ctx[schema.id]
            if self.dynamic_context:
                a_full = ad.matmul(attr_embeddings, ctx)[with_idx]
                a1 = a_full[:, : self.d_prime]
                a2 = ad.reshape(a_full[:, self.d_prime :], (len(with_idx), 1, self.d_prime))
            else:
                a1 = ctx[: self.d_prime]
                a2 = ad.reshape(ctx[self.d_prime :], (1, 1, self.d_prime))
            scores = ad.add(ad.tsum(ad.mul(a1, h_v), axis=-1, keepdims=True).reshape((len(with_idx), 1)),
                            ad.tsum(ad.mul(a2, h_inst), axis=2))
            alpha = ad.softmax(ad.leaky_relu(scores, LEAKY_SLOPE), axis=1)
            pooled = ad.relu(ad.tsum(ad.mul(ad.reshape(alpha, alpha.shape + (1,)), h_inst), axis=1))
            per_schema.append(ad.scatter_rows(pooled, with_idx, n))
            if return_weights:
                weights[f"alpha.{schema.id}"] = alpha.data

        out, beta = self._inter_aggregate(per_schema, node_type, attr_embeddings)
        if return_weights:
            weights["beta"] = beta
            return out, weights
        return out

    def _inter_aggregate(self, per_schema: list[Tensor], node_type: str,
                         attr_embeddings: Tensor | None):
        n = per_schema[0].shape[0]
        m = self.summary_m[node_type]
        b = self.summary_b[node_type]
        summaries = [ad.tmean(ad.tanh(ad.add(ad.matmul(h, m), b)), axis=0) for h in per_schema]
        ctx = self.side_ctx[node_type]
        if self.dynamic_context:
            q = ad.matmul(attr_embeddings, ctx)  # (n, d_m)
            scores = ad.stack([ad.tsum(ad.mul(q, s), axis=1) for s in summaries], axis=1)
        else:
            scores = ad.reshape(ad.stack([ad.tsum(ad.mul(ctx, s)) for s in summaries]),
                                (1, len(summaries)))
        beta = ad.softmax(scores, axis=1)
        out = Tensor(np.zeros((n, self.d_prime)))
        for j, h in enumerate(per_schema):
            out = ad.add(out, ad.mul(ad.reshape(beta[:, j], (beta.shape[0], 1)), h))
        return out, np.broadcast_to(beta.data, (n, len(per_schema)))


class LookupEncoder:
    """Trainable per-node embedding table standing in for the metapath
    pipeline (the embedding-table ablation)."""

    def __init__(self, rng: np.random.Generator, graph: HeteroGraph, d_prime: int):
        self.d_prime = d_prime
        self.tables = {t: nn.uniform_init(rng, (graph.n_nodes(t), d_prime)) for t in ("S", "F")}

    def parameters(self) -> dict[str, Tensor]:
        return {f"lookup.{t}": p for t, p in self.tables.items()}

    def encode(self, graph: HeteroGraph, node_ids: list[str], k: int = 0, seed: int = 0,
               attr_embeddings: Tensor | None = None, return_weights: bool = False,
               exclude_target_revisit: bool = False):
        gidx = [graph.global_index(v) for v in node_ids]
        node_type = graph.node_type[gidx[0]]
        local = np.array([graph.type_index[g] for g in gidx])
        out = ad.embedding(self.tables[node_type], local)
        if return_weights:
            return out, {}
        return out


# -- single-node reference operations (the batched encoder must agree) --------


def encode_instance(instance: MetapathInstance, features: dict[str, Tensor],
                    relation_vectors: dict[str, Tensor], schema: MetapathSchema) -> Tensor:
    """Relational rotation over one instance: q_i = h_i + q_{i-1} * r_i,
    output q_M / (M + 1)."""
    nodes = instance.nodes
    q = features[nodes[0]]
    for i in range(1, len(nodes)):
        r = relation_vectors[schema.relations[i - 1]]
        q = ad.add(features[nodes[i]], ad.mul(q, r))
    return ad.mul(q, 1.0 / len(nodes))


def intra_aggregate(instance_encodings: list[Tensor], h_v: Tensor, a_p: Tensor,
                    slope: float = LEAKY_SLOPE):
    """Attention-pool instance encodings for one node; empty -> zero vector."""
    d = h_v.shape[0]
    if not instance_encodings:
        return Tensor(np.zeros(d)), np.zeros(0)
    stacked = ad.stack(instance_encodings, axis=0)
    scores = ad.add(ad.tsum(ad.mul(a_p[:d], h_v)),
                    ad.tsum(ad.mul(a_p[d:], stacked), axis=1))
    alpha = ad.softmax(ad.leaky_relu(scores, slope), axis=0)
    pooled = ad.relu(ad.tsum(ad.mul(ad.reshape(alpha, (len(instance_encodings), 1)), stacked), axis=0))
    return pooled, alpha.data


def inter_aggregate(per_schema: list[Tensor], m: Tensor, b: Tensor, q: Tensor):
    """Combine one node's per-schema vectors; q may be static (d_m,) or a
    per-node dynamic context of the same shape."""
    summaries = [ad.tanh(ad.add(ad.matmul(ad.reshape(h, (1, h.shape[0])), m), b)) for h in per_schema]
    scores = ad.stack([ad.tsum(ad.mul(q, ad.reshape(s, (s.shape[1],)))) for s in summaries])
    beta = ad.softmax(scores, axis=0)
    out = Tensor(np.zeros(per_schema[0].shape[0]))
    for j, h in enumerate(per_schema):
        out = ad.add(out, ad.mul(beta[j], h))
    return out, beta.data
