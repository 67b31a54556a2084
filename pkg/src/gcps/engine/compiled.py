"""Flat integer representation of a model used by the simulation kernels.

A *species* is an ``(object, cell)`` pair whose count is tracked. Environmental
objects in cell 0 are not species: as a rule source they stand for an
unbounded supply (index ``-1``), as a destination they vanish into it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ..model import ENVIRONMENT, Configuration, GcpsModel, ModelError, require_valid

UNBOUNDED = -1


@dataclass(frozen=True, eq=False)
class CompiledModel:
    model: GcpsModel
    species: tuple[tuple[str, int], ...]
    src: np.ndarray        # (R, 2) species index of each source slot, or UNBOUNDED
    dst: np.ndarray        # (R, 2) species index of each destination slot, or UNBOUNDED
    consts: np.ndarray     # (R,)
    delta: np.ndarray      # (R, S) net change in species counts
    dep_ptr: np.ndarray    # CSR: rules whose weight may change after rule r fires
    dep_idx: np.ndarray
    klass: np.ndarray      # (R,) id of the net-change class of each rule
    n_classes: int
    cls_ptr: np.ndarray    # CSR: rules of each class, in index order
    cls_idx: np.ndarray
    cell_map: np.ndarray   # (S, n_cells + 1) 0/1 matrix species -> cell, column 0 = env_finite

    @property
    def n_rules(self) -> int:
        return len(self.consts)

    @property
    def n_species(self) -> int:
        return len(self.species)

    def to_vector(self, u: Configuration) -> np.ndarray:
        if u.n_cells != self.model.n_cells:
            raise ModelError(f"configuration has {u.n_cells} cells, model has "
                             f"{self.model.n_cells}")
        pos = {sp: n for n, sp in enumerate(self.species)}
        vec = np.zeros(self.n_species, dtype=np.int64)
        for obj, n in u.env_finite:
            if (obj, ENVIRONMENT) not in pos:
                raise ModelError(f"environmental object {obj!r} cannot be counted in cell 0")
            vec[pos[obj, ENVIRONMENT]] = n
        for q, cell in enumerate(u.cells, start=1):
            for obj, n in cell:
                if (obj, q) not in pos:
                    raise ModelError(f"object {obj!r} not in alphabet")
                vec[pos[obj, q]] = n
        return vec

    def to_configuration(self, vec) -> Configuration:
        cells: list[dict[str, int]] = [{} for _ in range(self.model.n_cells)]
        env: dict[str, int] = {}
        for (obj, q), n in zip(self.species, vec):
            if n:
                (env if q == ENVIRONMENT else cells[q - 1])[obj] = int(n)
        return Configuration.from_counts(cells, env)

    def cell_totals(self, states: np.ndarray) -> np.ndarray:
        """Per-cell sizes; column 0 is the finite environment, columns 1..n the cells."""
        return np.asarray(states, dtype=np.int64) @ self.cell_map

    def weights(self, vec) -> tuple[np.ndarray, np.ndarray]:
        """Activation counts ``h_r`` and propensities ``c_r h_r`` at species vector ``vec``."""
        h = np.empty(self.n_rules)
        for r in range(self.n_rules):
            h[r] = activations(self.src[r, 0], self.src[r, 1], vec)
        return h, h * self.consts


def activations(s0: int, s1: int, vec) -> float:
    """Number of distinct source combinations for a rule with source species ``s0, s1``."""
    if s0 == s1:
        if s0 < 0:
            return 1.0
        n = float(vec[s0])
        return n * (n - 1.0)
    first = 1.0 if s0 < 0 else float(vec[s0])
    second = 1.0 if s1 < 0 else float(vec[s1])
    return first * second


def _csr(lists: list[list[int]]) -> tuple[np.ndarray, np.ndarray]:
    ptr = np.zeros(len(lists) + 1, dtype=np.int64)
    ptr[1:] = np.cumsum([len(x) for x in lists])
    idx = np.array([v for x in lists for v in x], dtype=np.int64)
    return ptr, idx


@lru_cache(maxsize=64)
def compile_model(m: GcpsModel) -> CompiledModel:
    require_valid(m)
    species = [(obj, q) for q in range(1, m.n_cells + 1) for obj in m.alphabet]
    species += [(obj, ENVIRONMENT) for obj in m.alphabet if obj not in m.env_objects]
    pos = {sp: n for n, sp in enumerate(species)}

    def slot(obj: str, cell: int) -> int:
        if cell == ENVIRONMENT and obj in m.env_objects:
            return UNBOUNDED
        return pos[obj, cell]

    n_rules = len(m.rules)
    src = np.full((n_rules, 2), UNBOUNDED, dtype=np.int64)
    dst = np.full((n_rules, 2), UNBOUNDED, dtype=np.int64)
    delta = np.zeros((n_rules, len(species)), dtype=np.int64)
    for r, rule in enumerate(m.rules):
        for s, (obj, frm, to) in enumerate(((rule.a, rule.i, rule.k), (rule.b, rule.j, rule.l))):
            src[r, s] = slot(obj, frm)
            dst[r, s] = slot(obj, to)
            if src[r, s] >= 0:
                delta[r, src[r, s]] -= 1
            if dst[r, s] >= 0:
                delta[r, dst[r, s]] += 1

    readers: dict[int, list[int]] = {}
    for r in range(n_rules):
        for s in set(src[r].tolist()) - {UNBOUNDED}:
            readers.setdefault(s, []).append(r)
    deps = []
    for r in range(n_rules):
        touched = np.flatnonzero(delta[r]).tolist()
        deps.append(sorted({rr for s in touched for rr in readers.get(s, ())}))
    dep_ptr, dep_idx = _csr(deps)

    class_of: dict[bytes, int] = {}
    klass = np.zeros(n_rules, dtype=np.int64)
    for r in range(n_rules):
        klass[r] = class_of.setdefault(delta[r].tobytes(), len(class_of))
    members: list[list[int]] = [[] for _ in class_of]
    for r in range(n_rules):
        members[klass[r]].append(r)
    cls_ptr, cls_idx = _csr(members)

    cell_map = np.zeros((len(species), m.n_cells + 1), dtype=np.int64)
    for n, (_, q) in enumerate(species):
        cell_map[n, q] = 1

    consts = np.array([r.constant for r in m.rules], dtype=np.float64)
    return CompiledModel(m, tuple(species), src, dst, consts, delta, dep_ptr, dep_idx,
                         klass, len(class_of), cls_ptr, cls_idx, cell_map)
