"""Exhaustive reachability analysis for models with a finite configuration space.

Nodes are configurations reachable from a root by single rule applications;
edges are labelled with the rule applied. Strongly connected components are
found with an iterative Tarjan search; a component is terminal when no edge
leaves it. A run of a Markovian derivation mode on a finite graph eventually
enters a terminal component and keeps visiting all of its nodes, which is
what :func:`fairness_report` checks on a finite trajectory.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

from .engine.compiled import CompiledModel, activations, compile_model
from .engine.core import Trajectory
from .model import Configuration, GcpsModel

DEFAULT_MAX_NODES = 1_000_000


class StateSpaceTooLarge(RuntimeError):
    pass


class TrajectoryOutsideGraph(RuntimeError):
    pass


@dataclass(eq=False)
class StateGraph:
    compiled: CompiledModel
    nodes: list[tuple[int, ...]]
    edges: list[tuple[int, int, int]]
    root: int = 0
    index: dict[tuple[int, ...], int] = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self.index:
            self.index = {v: n for n, v in enumerate(self.nodes)}
        adj: list[list[int]] = [[] for _ in self.nodes]
        for a, b, _ in self.edges:
            if not adj[a] or adj[a][-1] != b:
                adj[a].append(b)
        self.adjacency = [sorted(set(x)) for x in adj]

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    def configuration(self, node: int) -> Configuration:
        return self.compiled.to_configuration(self.nodes[node])

    def node_of(self, u: Configuration) -> int:
        return self.index[tuple(self.compiled.to_vector(u).tolist())]

    def cell_counts(self, node: int) -> tuple[int, ...]:
        return tuple(int(x) for x in self.compiled.cell_totals(np.array(self.nodes[node]))[1:])

    def halting_nodes(self) -> list[int]:
        return [n for n, succ in enumerate(self.adjacency) if not succ]

    def rules_between(self, a: int, b: int) -> list[int]:
        return [r for x, y, r in self.edges if x == a and y == b]


def _may_grow(cm: CompiledModel) -> bool:
    return bool((cm.delta.sum(axis=1) > 0).any())


def build_state_graph(m: GcpsModel, u0: Configuration | None = None,
                      max_nodes: int | None = DEFAULT_MAX_NODES) -> StateGraph:
    """Breadth-first closure of the successor relation from ``u0``.

    ``max_nodes=None`` disables the cap, which is refused for models with a
    rule that increases the number of tracked objects.
    """
    cm = compile_model(m)
    if max_nodes is None and _may_grow(cm):
        raise StateSpaceTooLarge("model can import objects from the environment without "
                                 "bound; pass an explicit max_nodes")
    u0 = m.initial if u0 is None else u0
    root = tuple(cm.to_vector(u0).tolist())
    src = cm.src.tolist()
    delta = cm.delta.tolist()
    nodes = [root]
    index = {root: 0}
    edges: list[tuple[int, int, int]] = []
    queue = deque([0])
    while queue:
        a = queue.popleft()
        vec = nodes[a]
        for r in range(cm.n_rules):
            if activations(src[r][0], src[r][1], vec) <= 0:
                continue
            nxt = tuple(x + d for x, d in zip(vec, delta[r]))
            b = index.get(nxt)
            if b is None:
                if max_nodes is not None and len(nodes) >= max_nodes:
                    raise StateSpaceTooLarge(f"state graph exceeds {max_nodes} nodes")
                b = index[nxt] = len(nodes)
                nodes.append(nxt)
                queue.append(b)
            edges.append((a, b, r))
    return StateGraph(cm, nodes, edges, 0, index)


@dataclass(eq=False)
class SccReport:
    components: list[list[int]]
    component_of: list[int]
    terminal: list[bool]
    condensation_edges: set[tuple[int, int]]

    def terminal_components(self) -> list[int]:
        return [c for c, t in enumerate(self.terminal) if t]


def strongly_connected_components(adjacency: list[list[int]]) -> list[list[int]]:
    """Tarjan's algorithm without recursion; components come out in reverse topological order."""
    n = len(adjacency)
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    comps: list[list[int]] = []
    counter = 0
    for start in range(n):
        if index[start] >= 0:
            continue
        work = [(start, 0)]
        index[start] = low[start] = counter
        counter += 1
        stack.append(start)
        on_stack[start] = True
        while work:
            v, pos = work[-1]
            succ = adjacency[v]
            if pos < len(succ):
                work[-1] = (v, pos + 1)
                w = succ[pos]
                if index[w] < 0:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                if low[v] < low[parent]:
                    low[parent] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(sorted(comp))
    return comps


def terminal_sccs(g: StateGraph) -> SccReport:
    comps = strongly_connected_components(g.adjacency)
    comp_of = [0] * g.n_nodes
    for c, members in enumerate(comps):
        for v in members:
            comp_of[v] = c
    cond = {(comp_of[a], comp_of[b]) for a, succ in enumerate(g.adjacency) for b in succ
            if comp_of[a] != comp_of[b]}
    leaving = {a for a, _ in cond}
    return SccReport(comps, comp_of, [c not in leaving for c in range(len(comps))], cond)


@dataclass(frozen=True)
class FairnessReport:
    passed: bool
    message: str
    entry_step: int | None = None
    component: int | None = None
    visits: dict[int, int] = field(default_factory=dict)


def fairness_report(g: StateGraph, scc: SccReport, t: Trajectory, k_min: int) -> FairnessReport:
    """Finite-run surrogate of fairness.

    Passes when the trajectory enters a terminal component at some recorded
    step ``N`` and, from ``N`` on, visits each of its nodes at least ``k_min``
    times. Only recorded rows are inspected.
    """
    if k_min < 1:
        raise ValueError("k_min must be >= 1")
    path = []
    for row, vec in enumerate(t.states.tolist()):
        node = g.index.get(tuple(vec))
        if node is None:
            raise TrajectoryOutsideGraph(f"trajectory row {row} is not a node of the state graph")
        path.append(node)
    entry = next((n for n, v in enumerate(path) if scc.terminal[scc.component_of[v]]), None)
    if entry is None:
        return FairnessReport(False, "no terminal SCC entered")
    comp = scc.component_of[path[entry]]
    counts = Counter(path[entry:])
    visits = {v: counts.get(v, 0) for v in scc.components[comp]}
    short = [v for v, k in visits.items() if k < k_min]
    if short:
        return FairnessReport(False, f"{len(short)} terminal-SCC states visited fewer than "
                                     f"{k_min} times", entry, comp, visits)
    return FairnessReport(True, "every terminal-SCC state visited at least "
                                f"{k_min} times", entry, comp, visits)


def generated_set(m: GcpsModel, u0: Configuration | None = None,
                  max_nodes: int | None = DEFAULT_MAX_NODES) -> set[int]:
    """Sizes of the output cell over all reachable halting configurations."""
    g = build_state_graph(m, u0, max_nodes)
    return {g.cell_counts(v)[m.output_cell - 1] for v in g.halting_nodes()}


def _label(g: StateGraph, v: int) -> str:
    cells = ",".join(str(x) for x in g.cell_counts(v))
    env = int(g.compiled.cell_totals(np.array(g.nodes[v]))[0])
    return f"({cells})" + (f" env={env}" if env else "")


def to_dot(g: StateGraph, scc: SccReport | None = None) -> str:
    """State graph in DOT; nodes of terminal SCCs are filled and grouped in clusters."""
    scc = scc or terminal_sccs(g)
    out = ["digraph state_graph {", '  node [shape=box, fontname="monospace"];']
    for c, members in enumerate(scc.components):
        terminal = scc.terminal[c]
        if terminal or len(members) > 1:
            style = "terminal" if terminal else "transient"
            out.append(f"  subgraph cluster_{c} {{")
            out.append(f'    label="SCC {c} ({style})";')
            if terminal:
                out.append('    style=filled; color="lightgrey";')
        for v in members:
            attrs = f'label="{_label(g, v)}"'
            if terminal:
                attrs += ', style=filled, fillcolor="lightblue", peripheries=2'
            if v == g.root:
                attrs += ", penwidth=2"
            out.append(f"    n{v} [{attrs}];")
        if terminal or len(members) > 1:
            out.append("  }")
    grouped: dict[tuple[int, int], list[int]] = {}
    for a, b, r in g.edges:
        grouped.setdefault((a, b), []).append(r)
    for (a, b), rules in grouped.items():
        out.append(f'  n{a} -> n{b} [label="{",".join(map(str, rules))}"];')
    out.append("}")
    return "\n".join(out) + "\n"


def condensation_to_dot(g: StateGraph, scc: SccReport | None = None) -> str:
    scc = scc or terminal_sccs(g)
    out = ["digraph condensation {", "  node [shape=ellipse];"]
    for c, members in enumerate(scc.components):
        attrs = f'label="SCC {c}: {len(members)} node(s)"'
        if scc.terminal[c]:
            attrs += ', style=filled, fillcolor="lightblue", peripheries=2'
        out.append(f"  c{c} [{attrs}];")
    for a, b in sorted(scc.condensation_edges):
        out.append(f"  c{a} -> c{b};")
    out.append("}")
    return "\n".join(out) + "\n"
