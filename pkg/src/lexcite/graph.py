"""Heterogeneous legal citation network and metapath machinery.

Node types: A (act), C (chapter), T (topic), S (section), F (fact).
Relations:  ct (fact cites section), ctb (its reverse), inc (hierarchy level
            includes the next), po (its reverse).

The graph is immutable once built. Metapath instances are stored in target-
last order: ``nodes[-1]`` is the node being encoded and ``nodes[0]`` its
metapath neighbour.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

NODE_TYPES = ("A", "C", "T", "S", "F")
RELATIONS = ("ct", "ctb", "inc", "po")
INVERSE_RELATION = {"ct": "ctb", "ctb": "ct", "inc": "po", "po": "inc"}

# Legal (source type, relation, destination type) steps.
LEGAL_STEPS = {
    ("F", "ct", "S"), ("S", "ctb", "F"),
    ("A", "inc", "C"), ("C", "inc", "T"), ("T", "inc", "S"),
    ("C", "po", "A"), ("T", "po", "C"), ("S", "po", "T"),
}

GRAPH_FORMAT_VERSION = 1


class GraphError(ValueError):
    pass


class UnknownNodeError(KeyError):
    """Raised when a node id absent from the graph is queried; this is the
    inductive-hygiene gate (test facts are never graph nodes)."""


@dataclass(frozen=True)
class MetapathSchema:
    """A declared node-type/relation sequence, written outward from the
    target node: node_types[0] is the target's type."""

    id: str
    node_types: tuple[str, ...]
    relations: tuple[str, ...]
    side: str  # "section" or "fact"

    def __post_init__(self):
        if len(self.node_types) != len(self.relations) + 1:
            raise GraphError(f"schema {self.id}: need one more node type than relations")
        if self.node_types[0] != self.node_types[-1]:
            raise GraphError(f"schema {self.id}: first and last node types must match")
        for a, r, b in zip(self.node_types, self.relations, self.node_types[1:]):
            if (a, r, b) not in LEGAL_STEPS:
                raise GraphError(f"schema {self.id}: illegal step {a}-{r}-{b}")

    @property
    def length(self) -> int:
        return len(self.relations)

    def seed_tag(self) -> int:
        return zlib.crc32(self.id.encode())


@dataclass(frozen=True)
class MetapathInstance:
    """Concrete node path conforming to a schema; nodes[-1] is the target."""

    nodes: tuple[str, ...]
    schema_id: str


def _schema(spec: str, side: str) -> MetapathSchema:
    parts = spec.split("-")
    return MetapathSchema(id=spec, node_types=tuple(parts[0::2]),
                          relations=tuple(parts[1::2]), side=side)


def default_schemas() -> list[MetapathSchema]:
    """The 4 section-side and 4 fact-side metapath schemas."""
    section = [
        "S-ctb-F-ct-S",
        "S-po-T-inc-S",
        "S-po-T-po-C-inc-T-inc-S",
        "S-po-T-po-C-po-A-inc-C-inc-T-inc-S",
    ]
    fact = [
        "F-ct-S-ctb-F",
        "F-ct-S-po-T-inc-S-ctb-F",
        "F-ct-S-po-T-po-C-inc-T-inc-S-ctb-F",
        "F-ct-S-po-T-po-C-po-A-inc-C-inc-T-inc-S-ctb-F",
    ]
    return [_schema(s, "section") for s in section] + [_schema(s, "fact") for s in fact]


class HeteroGraph:
    """Typed nodes + typed adjacency, with an optional access recorder.

    When ``recorder`` is set to a list, every node whose neighbourhood is
    queried gets appended to it; evaluation code uses this to prove that no
    out-of-training fact is ever touched.
    """

    def __init__(self, nodes_by_type: dict[str, list[str]], edges: dict[str, list[tuple[str, str]]]):
        self.node_ids: list[str] = []
        self.node_type: list[str] = []
        self.type_index: list[int] = []
        self.nodes_of_type: dict[str, list[int]] = {t: [] for t in NODE_TYPES}
        self._index: dict[str, int] = {}
        for t in NODE_TYPES:
            for nid in nodes_by_type.get(t, []):
                if nid in self._index:
                    raise GraphError(f"duplicate node id {nid!r}")
                g = len(self.node_ids)
                self._index[nid] = g
                self.node_ids.append(nid)
                self.node_type.append(t)
                self.type_index.append(len(self.nodes_of_type[t]))
                self.nodes_of_type[t].append(g)

        n = len(self.node_ids)
        adj: dict[str, list[list[int]]] = {r: [[] for _ in range(n)] for r in RELATIONS}
        for rel, pairs in edges.items():
            if rel not in RELATIONS:
                raise GraphError(f"unknown relation {rel!r}")
            for u, v in pairs:
                ui, vi = self._require(u), self._require(v)
                step = (self.node_type[ui], rel, self.node_type[vi])
                if step not in LEGAL_STEPS:
                    raise GraphError(f"illegal edge {u}-{rel}-{v} ({step[0]}-{rel}-{step[2]})")
                adj[rel][ui].append(vi)
        self._adj: dict[str, tuple[tuple[int, ...], ...]] = {
            rel: tuple(tuple(sorted(nbrs)) for nbrs in lists) for rel, lists in adj.items()
        }
        self._adj_sets = {rel: tuple(frozenset(nbrs) for nbrs in lists)
                          for rel, lists in self._adj.items()}
        self._validate_symmetry()
        self._viable_cache: dict[str, list[np.ndarray]] = {}
        self._walk_cache: dict = {}
        self._walk_cache_seed: int | None = None
        self.recorder: list[str] | None = None

    # -- construction checks ---------------------------------------------------

    def _require(self, node_id: str) -> int:
        try:
            return self._index[node_id]
        except KeyError:
            raise UnknownNodeError(node_id) from None

    def _validate_symmetry(self):
        for rel, inv in (("ct", "ctb"), ("inc", "po")):
            fwd = {(u, v) for u, nbrs in enumerate(self._adj[rel]) for v in nbrs}
            bwd = {(v, u) for u, nbrs in enumerate(self._adj[inv]) for v in nbrs}
            if fwd != bwd:
                raise GraphError(f"edge sets {rel}/{inv} are not mutual reverses")

    # -- queries ---------------------------------------------------------------

    def __contains__(self, node_id: str) -> bool:
        return node_id in self._index

    def global_index(self, node_id: str) -> int:
        return self._require(node_id)

    def phi(self, node_id: str) -> str:
        return self.node_type[self._require(node_id)]

    def neighbors(self, node_id: str, relation: str) -> tuple[str, ...]:
        g = self._require(node_id)
        if self.recorder is not None:
            self.recorder.append(node_id)
        return tuple(self.node_ids[v] for v in self._adj[relation][g])

    def _neighbors_idx(self, g: int, relation: str) -> tuple[int, ...]:
        if self.recorder is not None:
            self.recorder.append(self.node_ids[g])
        return self._adj[relation][g]

    def has_edge(self, u: str, v: str, relation: str) -> bool:
        return self._require(v) in self._adj_sets[relation][self._require(u)]

    def n_nodes(self, node_type: str | None = None) -> int:
        if node_type is None:
            return len(self.node_ids)
        return len(self.nodes_of_type[node_type])

    def n_edges(self, relation: str) -> int:
        return sum(len(nbrs) for nbrs in self._adj[relation])

    def type_ids(self, node_type: str) -> list[str]:
        return [self.node_ids[g] for g in self.nodes_of_type[node_type]]

    def stats(self) -> dict:
        return {
            "nodes": {t: self.n_nodes(t) for t in NODE_TYPES},
            "edges": {r: self.n_edges(r) for r in RELATIONS},
        }

    # -- metapath machinery ------------------------------------------------------

    def conforms(self, instance: MetapathInstance, schema: MetapathSchema) -> bool:
        """Type- and relation-check an instance against a schema."""
        if len(instance.nodes) != schema.length + 1:
            return False
        walk = tuple(reversed(instance.nodes))  # target-first order
        for node, want in zip(walk, schema.node_types):
            if node not in self or self.phi(node) != want:
                return False
        for u, rel, v in zip(walk, schema.relations, walk[1:]):
            if not self.has_edge(u, v, rel):
                return False
        return True

    def enumerate_instances(self, v: str, schema: MetapathSchema) -> list[MetapathInstance]:
        """Exhaustive depth-first expansion of every instance ending at v.

        Exponential in schema length; intended as a test oracle and for
        desk-scale graphs only.
        """
        g = self._require(v)
        if self.node_type[g] != schema.node_types[0]:
            raise GraphError(
                f"node {v!r} has type {self.node_type[g]}, schema starts at {schema.node_types[0]}")
        walks = [[g]]
        for rel in schema.relations:
            walks = [w + [nbr] for w in walks for nbr in self._neighbors_idx(w[-1], rel)]
        return [
            MetapathInstance(nodes=tuple(self.node_ids[i] for i in reversed(w)),
                             schema_id=schema.id)
            for w in walks
        ]

    def _viable(self, schema: MetapathSchema) -> list[np.ndarray]:
        """viable[j][g] is True iff the walk can be completed from node g at
        walk position j.  Computed once per schema and cached."""
        if schema.id in self._viable_cache:
            return self._viable_cache[schema.id]
        n = len(self.node_ids)
        types = np.array(self.node_type)
        viable = [np.zeros(n, dtype=bool) for _ in range(schema.length + 1)]
        viable[-1] = types == schema.node_types[-1]
        for j in range(schema.length - 1, -1, -1):
            rel = schema.relations[j]
            nxt = viable[j + 1]
            here = viable[j]
            for g in np.flatnonzero(types == schema.node_types[j]):
                here[g] = any(nxt[nbr] for nbr in self._adj[rel][g])
        self._viable_cache[schema.id] = viable
        return viable

    def sample_instances(self, v: str, schema: MetapathSchema, k: int, seed: int,
                         exclude_target_revisit: bool = False) -> list[MetapathInstance]:
        """Sample k instances with replacement via random typed walks.

        Each step picks uniformly among typed neighbours that can still
        complete the walk, so a draw never dead-ends: the result has exactly
        k instances whenever at least one exists, else it is empty. The RNG
        is derived from (seed, node, schema), which makes each node's draw
        independent of whatever else is being encoded.
        """
        g = self._require(v)
        walks = self._sample_walks_idx(g, schema, k, seed, exclude_target_revisit)
        return [MetapathInstance(nodes=tuple(self.node_ids[i] for i in w), schema_id=schema.id)
                for w in walks]

    def _sample_walks_idx(self, g: int, schema: MetapathSchema, k: int, seed: int,
                          exclude_target_revisit: bool = False) -> list[tuple[int, ...]]:
        """Integer fast path behind sample_instances; walks come back already
        reversed into neighbour-first instance order.

        Draws are pure functions of (graph, seed, node, schema), so they are
        memoized per seed: re-encoding the same nodes (finite-difference
        loops, repeated inference) skips the walk simulation.
        """
        if k < 1:
            raise ValueError("k must be >= 1")
        if self.node_type[g] != schema.node_types[0]:
            raise GraphError(
                f"node {self.node_ids[g]!r} has type {self.node_type[g]}, "
                f"schema starts at {schema.node_types[0]}")
        if self._walk_cache_seed != seed:
            self._walk_cache_seed = seed
            self._walk_cache = {}
        key = (g, schema.id, k, exclude_target_revisit)
        out = self._walk_cache.get(key)
        if out is None:
            viable = self._viable(schema)
            out = []
            if viable[0][g]:
                rng = np.random.default_rng(
                    np.random.SeedSequence([seed & 0xFFFFFFFF, g, schema.seed_tag()]))
                for _ in range(k):
                    walk = self._draw_walk(g, schema, viable, rng, exclude_target_revisit)
                    if walk is not None:
                        out.append(tuple(reversed(walk)))
            self._walk_cache[key] = out
        if self.recorder is not None:
            # every node a walk passes through counts as a structure query
            self.recorder.append(self.node_ids[g])
            for walk in out:
                self.recorder.extend(self.node_ids[i] for i in walk)
        return out

    def _draw_walk(self, g: int, schema: MetapathSchema, viable, rng,
                   exclude_target_revisit: bool, max_retries: int = 50):
        for _ in range(max_retries):
            walk = [g]
            ok = True
            for j, rel in enumerate(schema.relations):
                nxt = viable[j + 1]
                cands = [nbr for nbr in self._adj[rel][walk[-1]] if nxt[nbr]]
                if exclude_target_revisit and j < schema.length - 1:
                    cands = [c for c in cands if c != g]
                if not cands:
                    ok = False
                    break
                walk.append(cands[int(rng.integers(len(cands)))])
            if ok:
                return walk
            if not exclude_target_revisit:
                raise GraphError("viability-filtered walk dead-ended (graph bug)")
        return None

    # -- serialization -----------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format_version": GRAPH_FORMAT_VERSION,
            "nodes": {t: self.type_ids(t) for t in NODE_TYPES},
            "edges": {
                rel: [[self.node_ids[u], self.node_ids[vv]]
                      for u, nbrs in enumerate(self._adj[rel]) for vv in nbrs]
                for rel in RELATIONS
            },
        }

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")

    @classmethod
    def from_json(cls, doc: dict) -> "HeteroGraph":
        if doc.get("format_version") != GRAPH_FORMAT_VERSION:
            raise GraphError(f"unsupported graph format version {doc.get('format_version')!r}")
        return cls(doc["nodes"], {rel: [tuple(p) for p in pairs]
                                  for rel, pairs in doc["edges"].items()})

    @classmethod
    def load(cls, path) -> "HeteroGraph":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


def build_citation_graph(train_facts, hierarchy) -> HeteroGraph:
    """Construct the network from training facts and the statute hierarchy.

    Test facts must never be passed here: fact nodes and their citation edges
    become model-visible structure.
    """
    nodes = {
        "A": [hierarchy.act_id],
        "C": list(hierarchy.chapters),
        "T": list(hierarchy.topics),
        "S": list(hierarchy.section_ids),
        "F": [d.id for d in train_facts],
    }
    inc = [(hierarchy.parent[c], c) for c in hierarchy.chapters]
    inc += [(hierarchy.parent[t], t) for t in hierarchy.topics]
    inc += [(hierarchy.parent[s], s) for s in hierarchy.section_ids]
    ct = []
    for doc in train_facts:
        unknown = doc.labels - set(hierarchy.section_index)
        if unknown:
            raise GraphError(f"fact {doc.id!r} cites unknown sections {sorted(unknown)}")
        ct.extend((doc.id, s) for s in sorted(doc.labels, key=hierarchy.section_index.get))
    edges = {
        "inc": inc,
        "po": [(b, a) for a, b in inc],
        "ct": ct,
        "ctb": [(b, a) for a, b in ct],
    }
    return HeteroGraph(nodes, edges)
