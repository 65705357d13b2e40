"""Rooted partition trees over the mode set {0, ..., d-1}.

The tree indexes ranks and transfer tensors of the tree-based format.  Nodes
are stored in a flat list in breadth-first order (root first), each node being
a sorted tuple of modes; children are ordered by their smallest contained
mode, which fixes a deterministic traversal order.
"""

import json


class DimensionTree:
    """Partition tree: the root is the full mode set, the children of every
    internal node partition it, internal nodes have at least two children, and
    leaves are singletons.
    """

    def __init__(self, nodes, parent):
        nodes = [tuple(sorted(int(m) for m in n)) for n in nodes]
        parent = [int(p) for p in parent]
        if len(nodes) != len(parent):
            raise ValueError("nodes and parent lists must have equal length")
        self.nodes, self.parent = self._canonical(nodes, parent)
        self.children = [[] for _ in self.nodes]
        for i, p in enumerate(self.parent):
            if p >= 0:
                self.children[p].append(i)
        for ch in self.children:
            ch.sort(key=lambda i: self.nodes[i][0])
        self._validate()

    @staticmethod
    def _canonical(nodes, parent):
        # Reindex breadth-first from the root, children by smallest mode.
        roots = [i for i, p in enumerate(parent) if p < 0]
        if len(roots) != 1:
            raise ValueError("tree must have exactly one root")
        children = {i: [] for i in range(len(nodes))}
        for i, p in enumerate(parent):
            if p >= 0:
                children[p].append(i)
        order = []
        queue = [roots[0]]
        while queue:
            i = queue.pop(0)
            order.append(i)
            queue.extend(sorted(children[i], key=lambda j: nodes[j][0]))
        pos = {old: new for new, old in enumerate(order)}
        new_nodes = [nodes[i] for i in order]
        new_parent = [parent[i] if parent[i] < 0 else pos[parent[i]] for i in order]
        return new_nodes, new_parent

    def _validate(self):
        d = self.order
        if d < 2:
            raise ValueError("dimension tree requires at least two modes")
        if self.nodes[0] != tuple(range(d)):
            raise ValueError("root must be the full mode set {0..d-1}")
        for i, modes in enumerate(self.nodes):
            ch = self.children[i]
            if not ch:
                if len(modes) != 1:
                    raise ValueError(f"leaf node {modes} is not a singleton")
                continue
            if len(ch) < 2:
                raise ValueError(f"internal node {modes} must have >= 2 children")
            merged = sorted(m for j in ch for m in self.nodes[j])
            if tuple(merged) != modes:
                raise ValueError(f"children of {modes} do not partition it")
            sizes = sum(len(self.nodes[j]) for j in ch)
            if sizes != len(set(merged)):
                raise ValueError(f"children of {modes} overlap")

    # -- constructors -----------------------------------------------------

    @classmethod
    def balanced(cls, d):
        """Binary tree splitting contiguous mode ranges at their midpoints."""
        nodes, parent = [], []

        def build(lo, hi, par):
            idx = len(nodes)
            nodes.append(tuple(range(lo, hi)))
            parent.append(par)
            if hi - lo > 1:
                mid = (lo + hi + 1) // 2
                build(lo, mid, idx)
                build(mid, hi, idx)

        build(0, int(d), -1)
        return cls(nodes, parent)

    @classmethod
    def linear(cls, d):
        """Degenerate binary tree {{k}, {k, ..., d-1}} underlying the TT format."""
        d = int(d)
        nodes, parent = [], []

        def build(k, par):
            idx = len(nodes)
            nodes.append(tuple(range(k, d)))
            parent.append(par)
            if d - k > 1:
                nodes.append((k,))
                parent.append(idx)
                build(k + 1, idx)

        build(0, -1)
        return cls(nodes, parent)

    # -- queries -----------------------------------------------------------

    @property
    def order(self):
        return len(self.nodes[0])

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def root(self):
        return 0

    def is_leaf(self, i):
        return not self.children[i]

    def leaves(self):
        return [i for i in range(self.n_nodes) if self.is_leaf(i)]

    def internal_nodes(self):
        return [i for i in range(self.n_nodes) if not self.is_leaf(i)]

    def level(self, i):
        lvl = 0
        while self.parent[i] >= 0:
            i = self.parent[i]
            lvl += 1
        return lvl

    def max_level(self):
        return max(self.level(i) for i in range(self.n_nodes))

    def leaf_index(self, mode):
        for i in self.leaves():
            if self.nodes[i] == (mode,):
                return i
        raise KeyError(f"no leaf for mode {mode}")

    def __eq__(self, other):
        return (
            isinstance(other, DimensionTree)
            and self.nodes == other.nodes
            and self.parent == other.parent
        )

    def __repr__(self):
        sets = ["{" + ",".join(map(str, n)) + "}" for n in self.nodes]
        return f"DimensionTree({', '.join(sets)})"

    # -- serialization -----------------------------------------------------

    def to_dict(self):
        return {"nodes": [list(n) for n in self.nodes], "parent": list(self.parent)}

    @classmethod
    def from_dict(cls, d):
        return cls(d["nodes"], d["parent"])

    def to_json(self):
        return json.dumps(self.to_dict())
