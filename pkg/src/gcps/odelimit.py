"""Mass-action ODE limits of one-symbol GCPS and the reverse construction.

Variables ``Y_1..Y_N`` are expected token counts of cells ``1..N``. A system
is stored in coefficient form::

    dY_i/dt = sum_{j,k} a[i,j,k] Y_j Y_k - sum_j (b[i,j] + b[j,i]) Y_i Y_j
              + sum_j lin[i,j] Y_j

with 1-based indices. ``a`` and ``b`` describe pairwise rules between cells;
``lin`` collects first-order terms produced by rules that draw one token
from the unbounded environment.
"""

from __future__ import annotations

import math
import warnings
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .model import ENVIRONMENT, GcpsModel, ModelError, Rule

REL_TOL = 1e-12


class IntegrationError(RuntimeError):
    def __init__(self, message: str, last_time: float, partial: OdeTrajectory | None = None):
        super().__init__(f"{message} (last valid time {last_time!r})")
        self.last_time = last_time
        self.partial = partial


class NonConvergence(RuntimeError):
    def __init__(self, message: str, point: np.ndarray):
        super().__init__(message)
        self.point = point


def _clean(coeffs: Mapping, width: int) -> dict:
    out = {}
    for key, value in coeffs.items():
        key = tuple(int(x) for x in key)
        if len(key) != width:
            raise ValueError(f"coefficient key {key} should have {width} indices")
        value = float(value)
        if value != 0.0:
            out[key] = value
    return dict(sorted(out.items()))


@dataclass(frozen=True)
class OdeSystem:
    n_vars: int
    a_coeffs: Mapping[tuple[int, int, int], float] = field(default_factory=dict)
    b_coeffs: Mapping[tuple[int, int], float] = field(default_factory=dict)
    linear_terms: Mapping[tuple[int, int], float] = field(default_factory=dict)
    provenance: Mapping[tuple, tuple[int, ...]] = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "a_coeffs", _clean(self.a_coeffs, 3))
        object.__setattr__(self, "b_coeffs", _clean(self.b_coeffs, 2))
        object.__setattr__(self, "linear_terms", _clean(self.linear_terms, 2))
        for key in [*self.a_coeffs, *self.b_coeffs, *self.linear_terms]:
            if not all(1 <= x <= self.n_vars for x in key):
                raise ValueError(f"index {key} outside 1..{self.n_vars}")

    @property
    def is_population_form(self) -> bool:
        """No environment terms and all quadratic coefficients non-negative."""
        return (not self.linear_terms and all(v >= 0 for v in self.a_coeffs.values())
                and all(v >= 0 for v in self.b_coeffs.values()))

    def polynomial(self) -> dict[int, dict[tuple, float]]:
        """Net right-hand sides as monomial maps.

        Keys are sorted index pairs ``(j, k)`` for ``Y_j Y_k`` and ``(j,)`` for
        linear terms; zero coefficients are dropped.
        """
        poly: dict[int, dict[tuple, float]] = {i: defaultdict(float)
                                                for i in range(1, self.n_vars + 1)}
        for (i, j, k), v in self.a_coeffs.items():
            poly[i][tuple(sorted((j, k)))] += v
        for (j, k), v in self.b_coeffs.items():
            mono = tuple(sorted((j, k)))
            poly[j][mono] -= v
            poly[k][mono] -= v
        for (i, j), v in self.linear_terms.items():
            poly[i][(j,)] += v
        return {i: {m: c for m, c in sorted(terms.items()) if c != 0.0}
                for i, terms in poly.items()}

    def _matrices(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n_vars
        quad = np.zeros((n, n * n))
        lin = np.zeros((n, n))
        for (i, j, k), v in self.a_coeffs.items():
            quad[i - 1, (j - 1) * n + (k - 1)] += v
        for (j, k), v in self.b_coeffs.items():
            quad[j - 1, (j - 1) * n + (k - 1)] -= v
            quad[k - 1, (j - 1) * n + (k - 1)] -= v
        for (i, j), v in self.linear_terms.items():
            lin[i - 1, j - 1] += v
        return quad, lin

    def vector_field(self):
        """Return ``f(y) -> dy/dt`` for 0-based arrays ``y`` of length ``n_vars``."""
        quad, lin = self._matrices()

        def f(y: np.ndarray) -> np.ndarray:
            return quad @ np.outer(y, y).ravel() + lin @ y

        return f

    def rhs(self, y) -> np.ndarray:
        return self.vector_field()(np.asarray(y, dtype=float))


def derive_odes(m: GcpsModel) -> OdeSystem:
    """Mass-action limit of a one-symbol model.

    Each rule ``(tok,j)(tok,k) -> (tok,i1)(tok,i2)`` between cells contributes
    ``b[j,k] += c`` and ``a[i1,j,k] += c``, ``a[i2,j,k] += c``; the
    same-cell count ``Y(Y-1)`` becomes ``Y^2``. A rule drawing one token from
    the unbounded environment fires at rate ``c Y_s`` for its other source
    ``s`` and adds the resulting net change of each cell as a linear term.
    """
    if not m.is_one_symbol:
        raise ModelError("ODE derivation supports one-symbol models only")
    tok = m.alphabet[0]
    unbounded = tok in m.env_objects
    a: dict = defaultdict(float)
    b: dict = defaultdict(float)
    lin: dict = defaultdict(float)
    prov: dict = defaultdict(list)
    for idx, r in enumerate(m.rules):
        c = r.constant
        if not r.touches_environment():
            b[r.i, r.j] += c
            a[r.k, r.i, r.j] += c
            a[r.l, r.i, r.j] += c
            prov["b", r.i, r.j].append(idx)
            continue
        if not unbounded:
            raise ModelError(f"rule {idx} moves a finitely-supplied token through the "
                             "environment; no ODE limit is defined for it")
        sources = [q for q in (r.i, r.j) if q != ENVIRONMENT]
        if len(sources) != 1:
            raise ModelError(f"rule {idx} takes both tokens from the environment")
        s = sources[0]
        net: dict[int, int] = defaultdict(int)
        for frm, to in ((r.i, r.k), (r.j, r.l)):
            net[frm] -= 1
            net[to] += 1
        for q, d in net.items():
            if q != ENVIRONMENT and d:
                lin[q, s] += c * d
                prov["lin", q, s].append(idx)
    return OdeSystem(m.n_cells, a, b, lin, {k: tuple(v) for k, v in prov.items()})


@dataclass(frozen=True)
class OdeValidation:
    valid: bool
    conserves_total: bool
    violations: tuple[str, ...]
    total_derivative: Mapping[tuple[int, int], float]

    def __bool__(self) -> bool:
        return self.valid


def _close(x: float, y: float) -> bool:
    return math.isclose(x, y, rel_tol=REL_TOL, abs_tol=0.0)


def validate_population_ode(s: OdeSystem) -> OdeValidation:
    """Check the conditions under which ``s`` is realised by an environment-free GCPS.

    Condition 1: all ``a`` and ``b`` are non-negative. Condition 2: for each
    ``(j, k)`` with ``b[j,k] != 0`` either one ``i0`` has ``a[i0,j,k] = 2 b[j,k]``
    or two distinct ``i1, i2`` have ``a = b[j,k]``, with every other
    ``a[i,j,k]`` zero. Gains for a pair without a matching ``b`` are reported
    as well since no rule could produce them. The coefficient sum of
    ``sum_i dY_i/dt`` is returned in ``total_derivative``.
    """
    problems: list[str] = []
    if s.linear_terms:
        problems.append("environment (linear) terms present; not a population system")
    for key, v in s.a_coeffs.items():
        if v < 0:
            problems.append(f"condition 1: a^{key[0]}_{key[1]},{key[2]} = {v} < 0")
    for key, v in s.b_coeffs.items():
        if v < 0:
            problems.append(f"condition 1: b_{key[0]},{key[1]} = {v} < 0")

    gains: dict[tuple[int, int], dict[int, float]] = defaultdict(dict)
    for (i, j, k), v in s.a_coeffs.items():
        gains[j, k][i] = v
    for (j, k), bv in s.b_coeffs.items():
        g = gains.get((j, k), {})
        ok = (len(g) == 1 and _close(next(iter(g.values())), 2 * bv)) or \
             (len(g) == 2 and all(_close(v, bv) for v in g.values()))
        if not ok:
            problems.append(f"condition 2: gains {dict(sorted(g.items()))} for pair ({j},{k}) "
                            f"do not match b_{j},{k} = {bv}")
    for (j, k), g in gains.items():
        if (j, k) not in s.b_coeffs:
            problems.append(f"condition 2: gains for pair ({j},{k}) without b_{j},{k}")

    total: dict[tuple[int, int], float] = defaultdict(float)
    for (i, j, k), v in s.a_coeffs.items():
        total[tuple(sorted((j, k)))] += v
    for (j, k), v in s.b_coeffs.items():
        total[tuple(sorted((j, k)))] -= 2 * v
    scale = max([abs(v) for v in s.a_coeffs.values()] + [1.0])
    residual = {key: v for key, v in sorted(total.items()) if abs(v) > REL_TOL * scale}
    conserves = not residual and not s.linear_terms
    return OdeValidation(not problems, conserves, tuple(problems), residual)


def odes_to_gcps(s: OdeSystem, initial=None) -> GcpsModel:
    """Environment-free one-symbol model whose mass-action limit is ``s``.

    Each nonzero ``b[j,k]`` yields ``(tok,j)(tok,k) -> (tok,i0)(tok,i0)`` or
    ``-> (tok,i1)(tok,i2)`` (``i1 < i2``) with constant ``b[j,k]``.
    """
    check = validate_population_ode(s)
    if not check.valid:
        raise ModelError("system is not realisable by a population GCPS: "
                         + "; ".join(check.violations))
    gains: dict[tuple[int, int], list[int]] = defaultdict(list)
    for (i, j, k) in s.a_coeffs:
        gains[j, k].append(i)
    rules = []
    for (j, k), bv in s.b_coeffs.items():
        targets = sorted(gains[j, k])
        i1, i2 = (targets[0], targets[0]) if len(targets) == 1 else targets
        rules.append(Rule.tokens(j, k, i1, i2, bv))
    return GcpsModel.one_symbol(s.n_vars, rules, initial)


@dataclass(frozen=True, eq=False)
class OdeTrajectory:
    times: np.ndarray
    values: np.ndarray       # (len(times), n_vars)
    clipped: bool = False

    def to_csv(self) -> str:
        n = self.values.shape[1]
        lines = [",".join(["time"] + [f"Y_{i}" for i in range(1, n + 1)])]
        for t, row in zip(self.times, self.values):
            lines.append(",".join([repr(float(t))] + [repr(float(v)) for v in row]))
        return "\n".join(lines) + "\n"


def _rk4_step(f, y: np.ndarray, h: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _grid(dt: float, t_end: float) -> np.ndarray:
    if not dt > 0:
        raise ValueError("dt must be positive")
    if not t_end >= 0:
        raise ValueError("t_end must be non-negative")
    n = max(0, math.ceil(t_end / dt - 1e-9))
    times = np.minimum(np.arange(n + 1) * dt, t_end)
    if n:
        times[-1] = t_end
    return times


def integrate(s: OdeSystem, y0, dt: float, t_end: float) -> OdeTrajectory:
    """Classical fixed-step RK4 on the grid ``0, dt, 2dt, ..., t_end``.

    Negative components are clipped to zero after a step and flagged in
    ``OdeTrajectory.clipped``. Non-finite values abort with
    :class:`IntegrationError`.
    """
    y = np.asarray(y0, dtype=float).copy()
    if y.shape != (s.n_vars,):
        raise ValueError(f"y0 must have {s.n_vars} components")
    if (y < 0).any():
        raise ValueError("initial values must be non-negative")
    f = s.vector_field()
    times = _grid(dt, t_end)
    values = np.empty((len(times), s.n_vars))
    values[0] = y
    clipped = False
    for n in range(1, len(times)):
        with np.errstate(over="ignore", invalid="ignore"):
            y = _rk4_step(f, y, times[n] - times[n - 1])
        if not np.isfinite(y).all():
            raise IntegrationError("solution became non-finite", float(times[n - 1]),
                                   OdeTrajectory(times[:n], values[:n], clipped))
        if (y < 0).any():
            y = np.maximum(y, 0.0)
            clipped = True
        values[n] = y
    if clipped:
        warnings.warn("negative excursions clipped to zero during integration", RuntimeWarning,
                      stacklevel=2)
    return OdeTrajectory(times, values, clipped)


def _stiffness_scale(f, y: np.ndarray) -> float:
    n = len(y)
    jac = np.empty((n, n))
    f0 = f(y)
    for j in range(n):
        h = 1e-6 * max(1.0, abs(y[j]))
        e = y.copy()
        e[j] += h
        jac[:, j] = (f(e) - f0) / h
    return float(np.abs(jac).sum(axis=1).max()) if n else 0.0


def find_fixed_point(s: OdeSystem, y0, tol: float = 1e-9, dt: float | None = None,
                     max_time: float | None = None, max_steps: int = 1_000_000) -> np.ndarray:
    """Integrate from ``y0`` until ``max_i |dY_i/dt| / (1 + |Y_i|) < tol``.

    ``dt`` defaults to a tenth of the inverse Jacobian row-sum norm at ``y0``.
    Raises :class:`NonConvergence` when ``max_time`` (or ``max_steps``) runs out.
    """
    y = np.asarray(y0, dtype=float).copy()
    if (y < 0).any():
        raise ValueError("initial values must be non-negative")
    f = s.vector_field()

    def residual(v: np.ndarray) -> float:
        return float(np.max(np.abs(f(v)) / (1.0 + np.abs(v)))) if len(v) else 0.0

    if residual(y) < tol:
        return y
    if dt is None:
        dt = 0.1 / max(_stiffness_scale(f, y), 1e-12)
    steps = max_steps if max_time is None else min(max_steps, math.ceil(max_time / dt))
    for _ in range(steps):
        with np.errstate(over="ignore", invalid="ignore"):
            y = _rk4_step(f, y, dt)
        if not np.isfinite(y).all():
            raise NonConvergence("solution became non-finite", y)
        y = np.maximum(y, 0.0)
        if residual(y) < tol:
            return y
    raise NonConvergence(f"no fixed point within t={steps * dt!r} (residual {residual(y):.3g})", y)


def lotka_volterra(c1: float, c2: float, c3: float) -> OdeSystem:
    """``dY1/dt = (c1 - c2 Y2) Y1``, ``dY2/dt = (c2 Y1 - c3) Y2`` in coefficient form."""
    return OdeSystem(2, a_coeffs={(2, 1, 2): 2 * c2}, b_coeffs={(1, 2): c2},
                     linear_terms={(1, 1): c1, (2, 2): -c3})
