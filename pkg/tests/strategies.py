"""Generators shared by the property and acceptance tests."""

import random

from hypothesis import strategies as st

from gcps.model import Configuration, GcpsModel, Rule
from gcps.odelimit import OdeSystem

RATES = [0.25, 0.5, 1.0, 1.5, 2.0, 3.0]


def random_population_ode(rnd: random.Random, max_n: int = 6) -> OdeSystem:
    """A random system of the realisable quadratic form, built from its coefficients."""
    n = rnd.randint(1, max_n)
    pairs = [(j, k) for j in range(1, n + 1) for k in range(1, n + 1)]
    a, b = {}, {}
    for j, k in rnd.sample(pairs, rnd.randint(0, len(pairs))):
        c = rnd.choice(RATES)
        b[j, k] = c
        i1, i2 = rnd.randint(1, n), rnd.randint(1, n)
        if i1 == i2:
            a[i1, j, k] = 2 * c
        else:
            a[i1, j, k] = a[i2, j, k] = c
    return OdeSystem(n, a, b)


def random_closed_model(rnd: random.Random, max_cells: int = 5, max_rules: int = 8,
                        max_tokens: int = 40) -> GcpsModel:
    """Random one-symbol model whose rules never touch the environment."""
    n = rnd.randint(1, max_cells)
    rules = [Rule.tokens(*(rnd.randint(1, n) for _ in range(4)), rnd.choice(RATES))
             for _ in range(rnd.randint(0, max_rules))]
    counts = [rnd.randint(0, max_tokens // n) for _ in range(n)]
    return GcpsModel.one_symbol(n, rules, counts)


@st.composite
def population_odes(draw, max_n: int = 6):
    return random_population_ode(random.Random(draw(st.integers(0, 2**32))), max_n)


@st.composite
def closed_models(draw, max_cells: int = 5, max_rules: int = 8, max_tokens: int = 40):
    return random_closed_model(random.Random(draw(st.integers(0, 2**32))), max_cells,
                               max_rules, max_tokens)


@st.composite
def open_models(draw, max_cells: int = 4, max_rules: int = 6):
    """One-symbol models that may exchange tokens with the environment."""
    n = draw(st.integers(1, max_cells))
    cell = st.integers(0, n)
    rules = []
    for _ in range(draw(st.integers(0, max_rules))):
        i, j = draw(cell), draw(cell)
        if i == 0 and j == 0:
            j = draw(st.integers(1, n))
        rules.append(Rule.tokens(i, j, draw(cell), draw(cell), draw(st.sampled_from(RATES))))
    counts = draw(st.lists(st.integers(0, 12), min_size=n, max_size=n))
    return GcpsModel.one_symbol(n, rules, counts)


def configurations(n_cells: int, max_count: int = 12):
    return st.lists(st.integers(0, max_count), min_size=n_cells, max_size=n_cells).map(
        Configuration.tokens)
