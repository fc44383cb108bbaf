"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
import logging
import math
from collections import deque
from collections.abc import Iterable, Mapping, Sequence

import numpy as np

from lib.core.core_graph import KnowledgeGraph, NodeId, NodeKind
from lib.core.core_schemas_errors import InvalidPersonalizationError


logger = logging.getLogger(__name__)

WALK_STEPS_PER_NODE = 100


def validate_personalization(personalization: Mapping[NodeId, float], order: Sequence[NodeId]) -> np.ndarray:
    """Return the personalization as a probability vector over `order`.

    Raises:
        InvalidPersonalizationError: If it is empty, names a node outside
            `order`, has a negative or non-finite weight, or sums to zero.
    """
    if not personalization:
        error_message = "Personalization is empty"
        raise InvalidPersonalizationError(error_message)

    position = {node_id: index for index, node_id in enumerate(order)}
    vector = np.zeros(len(order), dtype=np.float64)
    for node_id, weight in personalization.items():
        if node_id not in position:
            error_message = f"Personalization names node '{node_id}' outside the graph"
            raise InvalidPersonalizationError(error_message)
        if not math.isfinite(weight) or weight < 0:
            error_message = f"Personalization weight of '{node_id}' is {weight}"
            raise InvalidPersonalizationError(error_message)
        vector[position[node_id]] += weight

    total = vector.sum()
    if total <= 0:
        error_message = "Personalization sums to zero"
        raise InvalidPersonalizationError(error_message)
    return vector / total


def personalized_pagerank(
    graph: KnowledgeGraph,
    personalization: Mapping[NodeId, float],
    damping: float = 0.9,
    tolerance: float = 1e-8,
    max_iter: int = 100,
    node_ids: Sequence[NodeId] | None = None,
    kinds: Iterable[NodeKind] | None = None,
) -> dict[NodeId, float]:
    """Personalized PageRank over the undirected, unit-weight view of the graph.

    Iterates x <- d * (M x + dangling(x) * p) + (1 - d) * p from x = p, where M
    is the column-stochastic adjacency and dangling(x) the mass on nodes
    without neighbors, until the L1 change drops below the tolerance or
    max_iter is reached.

    Args:
        graph: Graph.
        personalization: Non-negative node weights; normalized internally.
        damping: Damping factor d.
        tolerance: L1 convergence threshold.
        max_iter: Iteration cap.
        node_ids: Restrict the walk to the subgraph induced by these nodes.
        kinds: Restrict the walk to nodes of these kinds.

    Returns:
        Score of every node of the (sub)graph; scores sum to 1.

    Raises:
        InvalidPersonalizationError: See validate_personalization.
    """
    order, adjacency = graph.to_undirected_adjacency(list(node_ids) if node_ids is not None else None, kinds)
    p = validate_personalization(personalization, order)

    degree = np.asarray(adjacency.sum(axis=0)).ravel()
    dangling = degree == 0
    inverse = np.zeros_like(degree)
    inverse[~dangling] = 1.0 / degree[~dangling]

    x = p.copy()
    change = math.inf
    for iteration in range(1, max_iter + 1):
        spread = adjacency @ (x * inverse)
        updated = damping * (spread + x[dangling].sum() * p) + (1.0 - damping) * p
        change = float(np.abs(updated - x).sum())
        x = updated
        if change < tolerance:
            logger.debug("PageRank converged after %d iterations", iteration)
            break
    else:
        logger.warning("PageRank did not converge within %d iterations (last L1 change %.3g)", max_iter, change)

    x = x / x.sum()
    return {node_id: float(score) for node_id, score in zip(order, x, strict=True)}


def reachable_nodes(
    graph: KnowledgeGraph, seeds: Sequence[NodeId], kinds: Iterable[NodeKind] | None = None
) -> list[NodeId]:
    """Return the nodes connected to any seed, in breadth-first order, moving only through nodes of `kinds`."""
    kinds = None if kinds is None else frozenset(kinds)
    seen = dict.fromkeys(seeds)
    queue = deque(seen)
    while queue:
        node = queue.popleft()
        for neighbor in graph.neighbors(node, kinds):
            if neighbor not in seen:
                seen[neighbor] = None
                queue.append(neighbor)
    return list(seen)


def rwr_sample(
    graph: KnowledgeGraph,
    seeds: Sequence[NodeId],
    sampling_area: int,
    restart: float,
    rng: np.random.Generator,
    kinds: Iterable[NodeKind] | None = None,
) -> list[NodeId]:
    """Sample a neighborhood of the seeds by random walk with restart.

    When the seeds' components fit in the sampling area they are returned
    whole. Otherwise a walker starts from a random seed; at each step it jumps
    back to a random seed with probability `restart` (or when stuck), else
    moves to a random neighbor. The walk stops once sampling_area distinct
    nodes are collected or after 100 * sampling_area steps.

    Args:
        graph: Graph.
        seeds: Seed nodes, all kept in the sample.
        sampling_area: Node budget.
        restart: Restart probability.
        rng: Random generator.
        kinds: Node kinds the walker may step on; seeds are always kept.

    Returns:
        Sampled node ids, seeds first, then in discovery order.
    """
    seeds = list(dict.fromkeys(seeds))
    if not seeds:
        return []

    kinds = None if kinds is None else frozenset(kinds)
    reachable = reachable_nodes(graph, seeds, kinds)
    if len(reachable) <= sampling_area:
        return reachable

    sample = dict.fromkeys(seeds)
    current = seeds[int(rng.integers(len(seeds)))]
    for _ in range(WALK_STEPS_PER_NODE * sampling_area):
        if len(sample) >= sampling_area:
            break
        neighbors = graph.neighbors(current, kinds)
        if not neighbors or rng.random() < restart:
            current = seeds[int(rng.integers(len(seeds)))]
            continue
        current = neighbors[int(rng.integers(len(neighbors)))]
        sample.setdefault(current, None)

    return list(sample)
