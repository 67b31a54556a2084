"""Derivation modes: single steps and full runs with trajectory recording."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ..model import Configuration, GcpsModel, apply_rule, applicable_rules
from . import _pykernel as K
from .compiled import CompiledModel, activations, compile_model
from .kernel import get_kernel

DEFAULT_SEED = 20120518
REFRESH_EVENTS = 1 << 16
MAX_UNIFORMS_PER_CHUNK = 1 << 20


class Halted(Exception):
    """Raised by single-step functions when no transition is possible."""


class Mode(enum.Enum):
    SEQUENTIAL = "seq"
    MAXIMALLY_PARALLEL = "maxpar"
    FS_EQUIPROBABLE = "equi"
    FS_CONCENTRATION_DIRECT = "ssa"
    FS_CONCENTRATION_FIRST_REACTION = "ssa-fr"

    @property
    def continuous_time(self) -> bool:
        return self in (Mode.FS_CONCENTRATION_DIRECT, Mode.FS_CONCENTRATION_FIRST_REACTION)


_KERNEL_MODE = {
    Mode.SEQUENTIAL: K.SEQUENTIAL,
    Mode.FS_EQUIPROBABLE: K.EQUIPROBABLE,
    Mode.FS_CONCENTRATION_DIRECT: K.SSA_DIRECT,
    Mode.FS_CONCENTRATION_FIRST_REACTION: K.SSA_FIRST_REACTION,
}


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for ``seed``; every stochastic routine draws from one of these."""
    return np.random.Generator(np.random.PCG64(seed))


def derive_seed(master_seed: int, index: int) -> int:
    """Independent 64-bit seed for run ``index`` of an ensemble."""
    ss = np.random.SeedSequence(master_seed, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class RunSpec:
    """How to run a model.

    Exactly one stop condition must be given. ``record`` is ``"all"``,
    ``"final"`` or a positive stride ``k`` (every k-th event; the last event
    is always kept).
    """

    mode: Mode = Mode.FS_CONCENTRATION_DIRECT
    max_steps: int | None = None
    max_time: float | None = None
    until_halt: bool = False
    seed: int = DEFAULT_SEED
    record: str | int = "all"

    def __post_init__(self) -> None:
        given = sum([self.max_steps is not None, self.max_time is not None, bool(self.until_halt)])
        if given != 1:
            raise ValueError("exactly one stop condition (max_steps, max_time, until_halt) "
                             f"is required, got {given}")
        if self.max_steps is not None and self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.max_time is not None and not self.max_time >= 0:
            raise ValueError("max_time must be >= 0")
        if not (self.record in ("all", "final") or (isinstance(self.record, int)
                                                    and self.record >= 1)):
            raise ValueError(f"bad record policy {self.record!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    @property
    def stride(self) -> int:
        if self.record == "all":
            return 1
        if self.record == "final":
            return 0
        return int(self.record)


@dataclass(eq=False)
class Trajectory:
    """Recorded run. Row 0 is the initial configuration (rule ``-1``).

    ``states`` holds species counts (see :attr:`species`); use
    :meth:`cell_counts` for per-cell sizes. For maximally parallel runs
    ``fired`` lists the rule multiset applied at each recorded event.
    """

    model: GcpsModel
    species: tuple[tuple[str, int], ...]
    times: np.ndarray
    rules: np.ndarray
    states: np.ndarray
    halted: bool
    mode: Mode
    seed: int
    steps: int
    stop_reason: str
    fired: list[tuple[int, ...]] | None = None
    _compiled: CompiledModel | None = field(default=None, repr=False)

    def __len__(self) -> int:
        return len(self.times)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Trajectory):
            return NotImplemented
        return (self.model == other.model and self.mode == other.mode
                and self.seed == other.seed and self.halted == other.halted
                and self.steps == other.steps and self.fired == other.fired
                and np.array_equal(self.times, other.times)
                and np.array_equal(self.rules, other.rules)
                and np.array_equal(self.states, other.states))

    @property
    def initial(self) -> Configuration:
        return self.configuration(0)

    @property
    def final(self) -> Configuration:
        return self.configuration(len(self) - 1)

    @property
    def compiled(self) -> CompiledModel:
        if self._compiled is None:
            self._compiled = compile_model(self.model)
        return self._compiled

    def configuration(self, row: int) -> Configuration:
        return self.compiled.to_configuration(self.states[row])

    def cell_counts(self) -> np.ndarray:
        """``(rows, n_cells)`` array of cell sizes."""
        return self.compiled.cell_totals(self.states)[:, 1:]

    def env_finite_totals(self) -> np.ndarray:
        return self.compiled.cell_totals(self.states)[:, 0]

    def events(self) -> list[tuple[float, int, tuple[int, ...]]]:
        cells = self.cell_counts()
        return [(float(self.times[e]), int(self.rules[e]), tuple(int(x) for x in cells[e]))
                for e in range(1, len(self))]

    def write_csv(self, fh) -> None:
        n = self.model.n_cells
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["time", "rule"] + [f"cell_{q}" for q in range(1, n + 1)]
                        + ["envfin_total"])
        totals = self.compiled.cell_totals(self.states)
        continuous = self.mode.continuous_time
        for e in range(len(self)):
            time = repr(float(self.times[e])) if continuous else str(int(self.times[e]))
            if e == 0:
                rule = "-"
            elif self.fired is not None:
                rule = "+".join(str(r) for r in self.fired[e - 1]) or "-"
            else:
                rule = str(int(self.rules[e]))
            writer.writerow([time, rule] + [str(int(x)) for x in totals[e, 1:]]
                            + [str(int(totals[e, 0]))])

    def to_csv(self) -> str:
        buf = io.StringIO()
        self.write_csv(buf)
        return buf.getvalue()


def _vector_and_model(m: GcpsModel, u: Configuration) -> tuple[CompiledModel, np.ndarray]:
    cm = compile_model(m)
    return cm, cm.to_vector(u)


def propensity(m: GcpsModel, u: Configuration, r: int) -> float:
    """``c_r * h_r`` where ``h_r`` counts the distinct source combinations of rule ``r``."""
    cm, vec = _vector_and_model(m, u)
    return float(m.rules[r].constant * activations(cm.src[r, 0], cm.src[r, 1], vec))


def propensities(m: GcpsModel, u: Configuration) -> np.ndarray:
    cm, vec = _vector_and_model(m, u)
    return cm.weights(vec)[1]


def successors(m: GcpsModel, u: Configuration) -> set[Configuration]:
    return {apply_rule(m, u, r) for r in applicable_rules(m, u)}


def _successor_groups(m: GcpsModel, u: Configuration) -> dict[Configuration, list[int]]:
    groups: dict[Configuration, list[int]] = {}
    for r in applicable_rules(m, u):
        groups.setdefault(apply_rule(m, u, r), []).append(r)
    return groups


def step_equiprobable(m: GcpsModel, u: Configuration, rng: np.random.Generator
                      ) -> tuple[Configuration, int]:
    """Move to a uniformly chosen distinct successor of ``u``.

    The reported rule is drawn uniformly among the rules leading there.
    """
    groups = _successor_groups(m, u)
    if not groups:
        raise Halted(f"no successor of {u}")
    targets = list(groups)
    v = targets[int(rng.integers(len(targets)))]
    rules = groups[v]
    return v, rules[int(rng.integers(len(rules)))]


def step_gillespie_direct(m: GcpsModel, u: Configuration, rng: np.random.Generator
                          ) -> tuple[float, int]:
    a = propensities(m, u)
    a0 = float(a.sum())
    if a0 <= 0.0:
        raise Halted(f"total propensity is zero at {u}")
    u1, u2 = rng.random(2)
    tau = -math.log(1.0 - u1) / a0
    r = int(np.searchsorted(np.cumsum(a), u2 * a0, side="right"))
    positive = np.flatnonzero(a > 0)
    return tau, min(r, int(positive[-1]))


def step_gillespie_first_reaction(m: GcpsModel, u: Configuration, rng: np.random.Generator
                                  ) -> tuple[float, int]:
    a = propensities(m, u)
    active = np.flatnonzero(a > 0)
    if active.size == 0:
        raise Halted(f"total propensity is zero at {u}")
    taus = -np.log1p(-rng.random(active.size)) / a[active]
    best = int(np.argmin(taus))
    return float(taus[best]), int(active[best])


def _maxpar_multiset(cm: CompiledModel, counts: list[int], rng: np.random.Generator
                     ) -> tuple[list[int], list[int]]:
    remaining = list(counts)
    produced = [0] * len(counts)
    fired: list[int] = []
    src = cm.src.tolist()
    dst = cm.dst.tolist()
    rules = range(cm.n_rules)
    while True:
        app = [r for r in rules if activations(src[r][0], src[r][1], remaining) > 0]
        if not app:
            break
        r = app[int(rng.integers(len(app)))]
        for s in src[r]:
            if s >= 0:
                remaining[s] -= 1
        for d in dst[r]:
            if d >= 0:
                produced[d] += 1
        fired.append(r)
    return [x + y for x, y in zip(remaining, produced)], fired


def step_maximally_parallel(m: GcpsModel, u: Configuration, rng: np.random.Generator
                            ) -> Configuration:
    """Apply a non-extensible multiset of rules built by uniform greedy saturation."""
    return step_maximally_parallel_detailed(m, u, rng)[0]


def step_maximally_parallel_detailed(m: GcpsModel, u: Configuration, rng: np.random.Generator
                                     ) -> tuple[Configuration, tuple[int, ...]]:
    cm, vec = _vector_and_model(m, u)
    new, fired = _maxpar_multiset(cm, vec.tolist(), rng)
    if not fired:
        raise Halted(f"no applicable rule at {u}")
    return cm.to_configuration(new), tuple(sorted(fired))


def is_halting(m: GcpsModel, u: Configuration, mode: Mode = Mode.SEQUENTIAL) -> bool:
    """No transition possible; SSA modes also halt when every applicable rule has rate 0."""
    if mode.continuous_time:
        return not bool((propensities(m, u) > 0).any())
    return not applicable_rules(m, u)


def run(m: GcpsModel, u0: Configuration | None = None, spec: RunSpec | None = None,
        backend: str | None = None) -> Trajectory:
    """Run ``m`` from ``u0`` (default: the model's initial configuration).

    Deterministic for a given ``(m, u0, spec)``; the kernel backend does not
    affect the result.
    """
    spec = spec or RunSpec(until_halt=True)
    u0 = m.initial if u0 is None else u0
    cm, counts = _vector_and_model(m, u0)
    rng = make_rng(spec.seed)
    if spec.mode is Mode.MAXIMALLY_PARALLEL:
        return _run_maxpar(cm, counts, spec, rng)

    kmode = _KERNEL_MODE[spec.mode]
    ssa = spec.mode.continuous_time
    limit = math.inf
    if spec.max_steps is not None:
        limit = spec.max_steps
    elif spec.max_time is not None and not ssa:
        limit = math.floor(spec.max_time)
    t_max = spec.max_time if (ssa and spec.max_time is not None) else math.inf
    stride = spec.stride
    k = K.draws_per_step(kmode, cm.n_rules)
    chunk_cap = max(1, min(REFRESH_EVENTS, MAX_UNIFORMS_PER_CHUNK // k))
    run_chunk = get_kernel(backend)

    times = [np.zeros(1)]
    rules = [np.full(1, -1, dtype=np.int64)]
    states = [counts.copy()[None, :]]
    done = 0
    t = 0.0
    last_rule = -1
    status = K.RUNNING
    while done < limit:
        n = int(min(chunk_cap, limit - done))
        uniforms = rng.random(n * k)
        cap = n // stride + 1 if stride else 0
        out_t = np.empty(cap)
        out_r = np.empty(cap, dtype=np.int64)
        out_s = np.empty((cap, cm.n_species), dtype=np.int64)
        steps, n_rec, t_new, status, lr = run_chunk(
            kmode, counts, cm.src, cm.dst, cm.consts, cm.dep_ptr, cm.dep_idx, cm.klass,
            cm.n_classes, cm.cls_ptr, cm.cls_idx, uniforms, n, done, t, t_max, stride,
            out_t, out_r, out_s)
        if steps:
            last_rule = lr
            t = t_new
        done += steps
        if n_rec:
            times.append(out_t[:n_rec])
            rules.append(out_r[:n_rec])
            states.append(out_s[:n_rec])
        if status == K.OVERFLOW:
            raise OverflowError("a species count would exceed the 64-bit range")
        if status != K.RUNNING:
            break

    if done and (stride == 0 or done % stride):
        times.append(np.array([t]))
        rules.append(np.array([last_rule], dtype=np.int64))
        states.append(counts.copy()[None, :])

    if status == K.HALTED:
        reason = "halted"
    elif status == K.TIME_LIMIT or (spec.max_time is not None):
        reason = "max_time"
    else:
        reason = "max_steps"
    halted = status == K.HALTED or is_halting(m, cm.to_configuration(counts), spec.mode)
    return Trajectory(m, cm.species, np.concatenate(times), np.concatenate(rules),
                      np.concatenate(states), halted, spec.mode, int(spec.seed), done, reason,
                      _compiled=cm)


def _run_maxpar(cm: CompiledModel, counts: np.ndarray, spec: RunSpec,
                rng: np.random.Generator) -> Trajectory:
    limit = math.inf
    if spec.max_steps is not None:
        limit = spec.max_steps
    elif spec.max_time is not None:
        limit = math.floor(spec.max_time)
    stride = spec.stride
    cur = counts.tolist()
    rows = [(0, -1, tuple(cur), ())]
    done = 0
    halted = False
    last: tuple | None = None
    while done < limit:
        new, fired = _maxpar_multiset(cm, cur, rng)
        if not fired:
            halted = True
            break
        cur = new
        done += 1
        last = (done, -1, tuple(cur), tuple(sorted(fired)))
        if stride and done % stride == 0:
            rows.append(last)
    if last is not None and rows[-1] is not last:
        rows.append(last)
    if not halted:
        halted = not any(activations(s0, s1, cur) > 0 for s0, s1 in cm.src.tolist())
    reason = "halted" if halted and done < limit else (
        "max_time" if spec.max_time is not None else "max_steps")
    return Trajectory(cm.model, cm.species, np.array([float(r[0]) for r in rows]),
                      np.array([r[1] for r in rows], dtype=np.int64),
                      np.array([r[2] for r in rows], dtype=np.int64).reshape(len(rows), -1),
                      halted, spec.mode, int(spec.seed), done, reason,
                      fired=[r[3] for r in rows[1:]], _compiled=cm)


def mode_from_name(name: str) -> Mode:
    try:
        return Mode(name)
    except ValueError:
        raise ValueError(f"unknown mode {name!r}; expected one of "
                         f"{[m.value for m in Mode]}") from None


__all__: Sequence[str] = (
    "DEFAULT_SEED", "Halted", "Mode", "RunSpec", "Trajectory", "derive_seed", "is_halting",
    "make_rng", "mode_from_name", "propensities", "propensity", "run", "step_equiprobable",
    "step_gillespie_direct", "step_gillespie_first_reaction", "step_maximally_parallel",
    "step_maximally_parallel_detailed", "successors",
)
