"""Core data types for generalized communicating P systems and population protocols.

A GCPS of degree ``n`` has cells ``1..n`` plus the environment, cell ``0``.
Objects listed in ``env_objects`` exist in the environment in unbounded supply,
so their count there is never tracked; any other object that ends up in cell 0
is counted in :attr:`Configuration.env_finite`.

Rules are pairwise moves ``(a, i)(b, j) -> (a, k)(b, l)``: object ``a`` leaves
cell ``i`` for cell ``k`` while ``b`` leaves ``j`` for ``l``.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

TOKEN = "tok"
ENVIRONMENT = 0
INT64_MAX = 2**63 - 1
IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_\-]*")


class ModelError(ValueError):
    """Raised when a model or configuration is malformed or an operation is not defined for it."""


class RuleNotApplicable(ModelError):
    pass


Multiset = tuple[tuple[str, int], ...]


def _freeze(counts: Mapping[str, int] | Iterable[tuple[str, int]]) -> Multiset:
    items = counts.items() if isinstance(counts, Mapping) else counts
    merged: Counter[str] = Counter()
    for obj, n in items:
        n = int(n)
        if n < 0:
            raise ModelError(f"negative count {n} for object {obj!r}")
        merged[obj] += n
    return tuple(sorted((o, n) for o, n in merged.items() if n > 0))


@dataclass(frozen=True)
class Rule:
    """Communication rule ``(a, i)(b, j) -> (a, k)(b, l)`` with a stochastic constant."""

    a: str
    i: int
    k: int
    b: str
    j: int
    l: int  # noqa: E741
    constant: float = 1.0
    label: str | None = None

    @classmethod
    def tokens(cls, i: int, j: int, k: int, l: int, constant: float = 1.0,  # noqa: E741
               label: str | None = None) -> Rule:
        """One-symbol rule ``(tok, i)(tok, j) -> (tok, k)(tok, l)``."""
        return cls(TOKEN, i, k, TOKEN, j, l, float(constant), label)

    @property
    def sources(self) -> tuple[tuple[str, int], tuple[str, int]]:
        return (self.a, self.i), (self.b, self.j)

    @property
    def targets(self) -> tuple[tuple[str, int], tuple[str, int]]:
        return (self.a, self.k), (self.b, self.l)

    def touches_environment(self) -> bool:
        return ENVIRONMENT in (self.i, self.j, self.k, self.l)

    def __str__(self) -> str:
        head = f"{self.label}: " if self.label else ""
        return (f"{head}({self.a},{self.i})({self.b},{self.j}) -> "
                f"({self.a},{self.k})({self.b},{self.l}) @ {self.constant!r}")


@dataclass(frozen=True)
class Configuration:
    """Immutable configuration ``(z_0, z_1, ..., z_n)``.

    ``env_finite`` is ``z_0``: only objects outside the environmental set are
    stored there. ``cells[q - 1]`` is the multiset of cell ``q``.
    """

    cells: tuple[Multiset, ...]
    env_finite: Multiset = ()

    @classmethod
    def from_counts(cls, cells: Sequence[Mapping[str, int]],
                    env_finite: Mapping[str, int] | None = None) -> Configuration:
        return cls(tuple(_freeze(c) for c in cells), _freeze(env_finite or {}))

    @classmethod
    def tokens(cls, counts: Sequence[int], env_finite: int = 0) -> Configuration:
        """One-symbol configuration with ``counts[q - 1]`` tokens in cell ``q``."""
        return cls.from_counts([{TOKEN: int(n)} for n in counts],
                               {TOKEN: int(env_finite)} if env_finite else None)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def count(self, obj: str, cell: int) -> int:
        ms = self.env_finite if cell == ENVIRONMENT else self.cells[cell - 1]
        return dict(ms).get(obj, 0)

    def cell_size(self, cell: int) -> int:
        ms = self.env_finite if cell == ENVIRONMENT else self.cells[cell - 1]
        return sum(n for _, n in ms)

    def token_counts(self) -> tuple[int, ...]:
        """Sizes of cells ``1..n``."""
        return tuple(self.cell_size(q) for q in range(1, self.n_cells + 1))

    def total(self) -> int:
        """Number of objects in cells ``1..n`` (environment excluded)."""
        return sum(self.token_counts())

    def as_dicts(self) -> tuple[dict[str, int], list[dict[str, int]]]:
        return dict(self.env_finite), [dict(c) for c in self.cells]

    def __str__(self) -> str:
        return "(" + ",".join(str(n) for n in self.token_counts()) + ")"


@dataclass(frozen=True)
class GcpsModel:
    """A GCPS ``(O, E, w_1..w_n, R, h)`` plus optional naming metadata.

    ``initial`` holds ``w_1..w_n`` as a :class:`Configuration` whose
    environment part is empty. ``cell_labels`` maps cell indices to names
    used by the text format; semantics only ever use the indices.
    """

    alphabet: tuple[str, ...]
    env_objects: frozenset[str]
    n_cells: int
    initial: Configuration
    rules: tuple[Rule, ...]
    output_cell: int = 1
    name: str | None = None
    description: str | None = None
    cell_labels: tuple[tuple[int, str], ...] = ()

    @classmethod
    def one_symbol(cls, n_cells: int, rules: Iterable[Rule], initial: Sequence[int] | None = None,
                   output_cell: int = 1, **meta) -> GcpsModel:
        """Model over the single object ``tok``, which is also environmental."""
        counts = list(initial) if initial is not None else [0] * n_cells
        return cls((TOKEN,), frozenset({TOKEN}), n_cells, Configuration.tokens(counts),
                   tuple(rules), output_cell, **meta)

    @property
    def is_one_symbol(self) -> bool:
        return len(self.alphabet) == 1

    def label_of(self, cell: int) -> str | None:
        return dict(self.cell_labels).get(cell)

    def with_initial(self, initial: Configuration) -> GcpsModel:
        return GcpsModel(self.alphabet, self.env_objects, self.n_cells, initial, self.rules,
                         self.output_cell, self.name, self.description, self.cell_labels)

    def initial_configuration(self) -> Configuration:
        return self.initial


@dataclass(frozen=True)
class Violation:
    rule: int | None
    reason: str

    def __str__(self) -> str:
        where = f"rule {self.rule}: " if self.rule is not None else ""
        return where + self.reason


def validate_model(m: GcpsModel) -> list[Violation]:
    """Return every structural violation of ``m``; an empty list means valid."""
    out: list[Violation] = []
    alphabet = set(m.alphabet)
    if not alphabet:
        out.append(Violation(None, "alphabet is empty"))
    if len(alphabet) != len(m.alphabet):
        out.append(Violation(None, "alphabet has duplicate objects"))
    stray = sorted(set(m.env_objects) - alphabet)
    if stray:
        out.append(Violation(None, f"environmental objects {stray} not in alphabet"))
    if m.n_cells < 1:
        out.append(Violation(None, f"degree must be >= 1, got {m.n_cells}"))
    if not 1 <= m.output_cell <= m.n_cells:
        out.append(Violation(None, f"output cell {m.output_cell} outside 1..{m.n_cells}"))
    if m.initial.n_cells != m.n_cells:
        out.append(Violation(None, f"initial configuration has {m.initial.n_cells} cells, "
                                   f"model has {m.n_cells}"))
    if m.initial.env_finite:
        out.append(Violation(None, "initial environment must be empty"))
    for q, cell in enumerate(m.initial.cells, start=1):
        for obj, _ in cell:
            if obj not in alphabet:
                out.append(Violation(None, f"initial object {obj!r} in cell {q} not in alphabet"))

    for idx, r in enumerate(m.rules):
        for obj in (r.a, r.b):
            if obj not in alphabet:
                out.append(Violation(idx, f"object {obj!r} not in alphabet"))
        for name, c in (("i", r.i), ("j", r.j), ("k", r.k), ("l", r.l)):
            if not 0 <= c <= m.n_cells:
                out.append(Violation(idx, f"cell index {name}={c} outside 0..{m.n_cells}"))
        if r.i == ENVIRONMENT and r.j == ENVIRONMENT and r.a in m.env_objects \
                and r.b in m.env_objects:
            out.append(Violation(idx, "condition 4: both objects taken from the environment "
                                      "are environmental (a or b must lie outside E)"))
        if not (math.isfinite(r.constant) and r.constant >= 0):
            out.append(Violation(idx, f"stochastic constant must be finite and >= 0, "
                                      f"got {r.constant}"))
    return out


def require_valid(m: GcpsModel) -> GcpsModel:
    problems = validate_model(m)
    if problems:
        raise ModelError("invalid model: " + "; ".join(str(p) for p in problems))
    return m


def _check_dims(m: GcpsModel, u: Configuration) -> None:
    if u.n_cells != m.n_cells:
        raise ModelError(f"configuration has {u.n_cells} cells, model has {m.n_cells}")


def _available(m: GcpsModel, u: Configuration, obj: str, cell: int) -> int | None:
    """Copies of ``obj`` available in ``cell``; ``None`` stands for unbounded supply."""
    if cell == ENVIRONMENT and obj in m.env_objects:
        return None
    return u.count(obj, cell)


def is_applicable(m: GcpsModel, u: Configuration, r: int) -> bool:
    rule = m.rules[r]
    first = _available(m, u, rule.a, rule.i)
    second = _available(m, u, rule.b, rule.j)
    if (rule.a, rule.i) == (rule.b, rule.j):
        return first is None or first >= 2
    return (first is None or first >= 1) and (second is None or second >= 1)


def applicable_rules(m: GcpsModel, u: Configuration) -> list[int]:
    """Indices of the rules that can fire once in ``u``."""
    _check_dims(m, u)
    return [r for r in range(len(m.rules)) if is_applicable(m, u, r)]


def apply_rule(m: GcpsModel, u: Configuration, r: int) -> Configuration:
    """Fire rule ``r`` once and return the resulting configuration."""
    _check_dims(m, u)
    if not 0 <= r < len(m.rules):
        raise ModelError(f"no rule with index {r}")
    if not is_applicable(m, u, r):
        raise RuleNotApplicable(f"rule {r} ({m.rules[r]}) is not applicable in {u}")
    env, cells = u.as_dicts()
    rule = m.rules[r]

    def bump(obj: str, cell: int, delta: int) -> None:
        if cell == ENVIRONMENT:
            if obj in m.env_objects:
                return
            target = env
        else:
            target = cells[cell - 1]
        n = target.get(obj, 0) + delta
        if n < 0:
            raise AssertionError(f"negative count for {obj!r} in cell {cell}")
        if n > INT64_MAX:
            raise OverflowError(f"count of {obj!r} in cell {cell} exceeds 64 bits")
        target[obj] = n

    for obj, src, dst in ((rule.a, rule.i, rule.k), (rule.b, rule.j, rule.l)):
        bump(obj, src, -1)
        bump(obj, dst, +1)
    return Configuration.from_counts(cells, env)


@dataclass(frozen=True)
class Transition:
    q1: str
    q2: str
    q1p: str
    q2p: str
    rate: float = 1.0

    @property
    def quadruple(self) -> tuple[str, str, str, str]:
        return self.q1, self.q2, self.q1p, self.q2p


@dataclass(frozen=True)
class PopulationProtocol:
    """Protocol ``(Q, Sigma, iota, omega, delta)`` with per-transition rates."""

    states: tuple[str, ...]
    inputs: tuple[str, ...]
    init_map: Mapping[str, str] = field(hash=False)
    output_map: Mapping[str, int] = field(hash=False)
    delta: tuple[Transition, ...] = ()

    def __post_init__(self) -> None:
        q = set(self.states)
        if len(q) != len(self.states):
            raise ModelError("duplicate protocol states")
        for t in self.delta:
            for s in t.quadruple:
                if s not in q:
                    raise ModelError(f"transition {t.quadruple} uses unknown state {s!r}")
            if not (math.isfinite(t.rate) and t.rate >= 0):
                raise ModelError(f"transition {t.quadruple} has invalid rate {t.rate}")
        for sym in self.inputs:
            if self.init_map.get(sym) not in q:
                raise ModelError(f"init_map is not total on inputs (symbol {sym!r})")
        for s in self.states:
            if self.output_map.get(s) not in (0, 1):
                raise ModelError(f"output_map is not total on states (state {s!r})")


def pp_to_gcps(p: PopulationProtocol, population: Mapping[str, int] | Iterable[str]
               ) -> tuple[GcpsModel, Configuration]:
    """Translate a protocol and an input population into a one-symbol GCPS.

    State ``p.states[q - 1]`` becomes cell ``q``; each transition becomes the
    rule ``(tok, q1)(tok, q2) -> (tok, q1')(tok, q2')`` carrying its rate.
    """
    counts = Counter(population) if not isinstance(population, Mapping) else Counter(
        {s: int(n) for s, n in population.items()})
    for sym, n in counts.items():
        if sym not in p.inputs:
            raise ModelError(f"input symbol {sym!r} not in protocol inputs")
        if n < 0:
            raise ModelError(f"negative input count for {sym!r}")
    if sum(counts.values()) < 2:
        raise ModelError("a population needs at least 2 agents")
    cell_of = {s: q for q, s in enumerate(p.states, start=1)}
    agents = [0] * len(p.states)
    for sym, n in counts.items():
        agents[cell_of[p.init_map[sym]] - 1] += n
    rules = [Rule.tokens(cell_of[t.q1], cell_of[t.q2], cell_of[t.q1p], cell_of[t.q2p], t.rate)
             for t in p.delta]
    labels = ()
    if all(IDENT.fullmatch(s) for s in p.states):
        labels = tuple((cell_of[s], s) for s in p.states)
    model = GcpsModel.one_symbol(len(p.states), rules, agents, output_cell=1,
                                 cell_labels=labels)
    return model, model.initial


def gcps_to_pp(m: GcpsModel) -> PopulationProtocol:
    """Translate an environment-free one-symbol GCPS into a protocol.

    States are the cell labels when every cell has one, else ``"1".."n"``.
    The input alphabet equals the state set with the identity as ``iota``,
    and ``omega`` is the constant 1; neither is recoverable from a GCPS.
    """
    if not m.is_one_symbol:
        raise ModelError("only one-symbol models translate to population protocols")
    for idx, r in enumerate(m.rules):
        if r.touches_environment():
            raise ModelError(f"rule {idx} involves the environment: "
                             "environment rule not expressible in PP")
    labels = dict(m.cell_labels)
    if all(q in labels for q in range(1, m.n_cells + 1)):
        names = [labels[q] for q in range(1, m.n_cells + 1)]
    else:
        names = [str(q) for q in range(1, m.n_cells + 1)]
    delta = tuple(Transition(names[r.i - 1], names[r.j - 1], names[r.k - 1], names[r.l - 1],
                             r.constant) for r in m.rules)
    return PopulationProtocol(tuple(names), tuple(names), {s: s for s in names},
                              {s: 1 for s in names}, delta)
