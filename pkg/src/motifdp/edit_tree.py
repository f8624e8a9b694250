"""Edit-tree representation of the distance recursion.

Every cell value D(i,j,k) is determined by the sequence of edit operations the
arg-max selected along the way, so cells whose selected operation sequences
coincide can share one tree node and one accumulator evaluation. Children are
created lazily; at creation time a child must rank within the n_priority best
scores among its extant siblings or it is discarded, and the cells that would
have mapped to it drop out of the forecast. Nodes past depth d_max are never
created, and suffix lengths k > d_max are skipped entirely.

Pruning is decided when a node is first needed: a later, better candidate
never evicts an earlier sibling, and a previously discarded child stays
discarded (its rank can only degrade as siblings accumulate).
"""

from __future__ import annotations

import numpy as np

from .model import NeuralOps, forecast
from .modules import ConfigError, ParamStore

__all__ = [
    "EditTreeNode",
    "EditTree",
    "prune_rank",
    "tree_forward",
    "tree_stats",
    "check_value_recursion",
]


class EditTreeNode:
    __slots__ = ("uid", "parent", "edge", "value", "score", "depth",
                 "children", "pruned", "cand_cache")

    def __init__(self, uid, parent, edge, value, score, depth):
        self.uid = uid
        self.parent = parent
        self.edge = edge  # ("sub", a, b) with a <= b, or ("del", s)
        self.value = value
        self.score = score
        self.depth = depth
        self.children: dict = {}
        self.pruned: set = set()
        self.cand_cache: dict = {}


class EditTree:
    """Rooted tree of edit operations; the root carries the start distance."""

    def __init__(self, root: EditTreeNode, n_priority, d_max):
        self.root = root
        self.nodes = [root]
        self.n_priority = n_priority
        self.d_max = d_max
        self.n_cells = 0


def prune_rank(parent: EditTreeNode, candidate_score: float,
               n_priority: int | None) -> bool:
    """Keep iff the candidate's descending rank among the extant siblings plus
    itself is within n_priority; equal scores rank the earlier sibling first.
    """
    if n_priority is None:
        return True
    rank = 1
    for child in parent.children.values():
        if child.score >= candidate_score:
            rank += 1
    return rank <= n_priority


def _sub_edge(a, b):
    return ("sub", a, b) if a <= b else ("sub", b, a)


def tree_forward(seq, params: ParamStore, lstm_outputs=None,
                 include_final: bool = False):
    """Run the recursion through the shared tree.

    Returns (tree, cell_map, forecast_context). cell_map sends each live
    (i,j,k) to its node; cells whose winning candidate was discarded (by rank
    or depth) are absent and are skipped by the forecast.
    """
    cfg = params.cfg
    if cfg.soft_select:
        raise ConfigError("soft selection is dense-only: mixed cells depend on "
                          "every transition, so no single operation path exists")
    n = len(seq)
    if n < 1:
        raise ValueError("sequence must be nonempty")
    ops = NeuralOps(params)
    n_priority = cfg.n_priority
    d_max = cfg.d_max
    km = n
    if cfg.k_max is not None:
        km = min(km, cfg.k_max)
    if d_max is not None:
        km = min(km, d_max)

    root = EditTreeNode(0, None, None, ops.d0, 0.0, 0)
    tree = EditTree(root, n_priority, d_max)
    cells: dict[tuple, EditTreeNode] = {}

    def candidate(parent: EditTreeNode, edge, cost_tensor):
        existing = parent.children.get(edge)
        if existing is not None:
            return existing.value, existing.score, existing
        cached = parent.cand_cache.get(edge)
        if cached is None:
            value = ops.accumulate(parent.value, cost_tensor)
            cached = (value, ops.select_score(value.data))
            parent.cand_cache[edge] = cached
        return cached[0], cached[1], None

    def settle(key, parent: EditTreeNode, edge, value, score, node):
        """Map the cell to the winning node, creating it if permitted."""
        if node is not None:
            cells[key] = node
            return
        if edge in parent.pruned:
            return
        if d_max is not None and parent.depth + 1 > d_max:
            return
        if not prune_rank(parent, score, n_priority):
            parent.pruned.add(edge)
            return
        node = EditTreeNode(len(tree.nodes), parent, edge, value, score,
                            parent.depth + 1)
        parent.children[edge] = node
        tree.nodes.append(node)
        cells[key] = node

    for i in range(1, n + 1):
        si = seq[i - 1]
        del_i_edge = ("del", si)
        for k in range(1, min(i, km) + 1):
            if k == 1:
                for j in range(1, i + 1):
                    edge = _sub_edge(si, seq[j - 1])
                    value, score, node = candidate(root, edge, ops.subst(si, seq[j - 1]))
                    settle((i, j, 1), root, edge, value, score, node)
                continue
            for j in range(1, i + 1):
                sj = seq[j - 1]
                found = []
                src = cells.get((i - 1, j, k - 1)) if j <= i - 1 else None
                if src is not None:
                    found.append(("down", src, del_i_edge, ops.delete(si)))
                if j >= 2:
                    src = cells.get((i - 1, j - 1, k - 1))
                    if src is not None:
                        found.append(("diag", src, _sub_edge(si, sj), ops.subst(si, sj)))
                    src = cells.get((i, j - 1, k))
                    if src is not None:
                        found.append(("right", src, ("del", sj), ops.delete(sj)))
                if not found:
                    continue  # all sources pruned away; the cell dies too
                best = None
                for tag, parent, edge, cost_tensor in found:
                    value, score, node = candidate(parent, edge, cost_tensor)
                    if best is None or score > best[3]:
                        best = (parent, edge, value, score, node)
                settle((i, j, k), best[0], best[1], best[2], best[3], best[4])

    tree.n_cells = len(cells)
    cell_values = {key: node.value for key, node in cells.items()}
    fc = forecast(seq, cell_values, params, lstm_outputs, include_final)
    return tree, cells, fc


def tree_stats(tree: EditTree) -> dict:
    """Size and sharing metrics for one built tree."""
    per_depth: dict[int, int] = {}
    for node in tree.nodes:
        per_depth[node.depth] = per_depth.get(node.depth, 0) + 1
    max_depth = max(per_depth)
    fanout = {}
    for d in range(max_depth):
        if per_depth.get(d):
            fanout[d] = per_depth.get(d + 1, 0) / per_depth[d]
    non_root = len(tree.nodes) - 1
    return {
        "node_count": len(tree.nodes),
        "max_depth": max_depth,
        "shared_cell_ratio": tree.n_cells / non_root if non_root else 0.0,
        "per_depth_counts": [per_depth.get(d, 0) for d in range(max_depth + 1)],
        "per_depth_fanout": fanout,
    }


def fanout_bound(alphabet_size: int, d_max: int) -> float:
    """Worst-case node count: substitutions on unordered distinct pairs plus
    identity substitutions plus deletions, geometrically over the depth."""
    f = alphabet_size * (alphabet_size - 1) // 2 + 2 * alphabet_size
    return sum(float(f) ** d for d in range(d_max + 1))


def check_value_recursion(tree: EditTree, params: ParamStore) -> bool:
    """Recompute each child's value from its parent and edge; must match
    bitwise (shared evaluation is a pure function of the path)."""
    ops = NeuralOps(params)
    for node in tree.nodes:
        if node.parent is None:
            continue
        kind = node.edge[0]
        cost = (ops.delete(node.edge[1]) if kind == "del"
                else ops.subst(node.edge[1], node.edge[2]))
        again = ops.accumulate(node.parent.value, cost)
        if not np.array_equal(again.data, node.value.data):
            return False
    return True
