"""Type spaces, scenarios and profile enumeration.

Users draw types i.i.d. from a common finite set, and every quantity we
compute is symmetric in users that share a type.  Profiles are therefore
enumerated as multisets (a count per type value) weighted by their
multinomial probability; the full ``m**n`` vector enumeration is kept as an
oracle for small ``n``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Iterator, Sequence

import numpy as np

PROB_TOL = 1e-12
SYMMETRY_TOL = 1e-12


class DegenerateTypeSet(ValueError):
    """Raised when an operation needs at least two distinct types."""


@dataclass(frozen=True)
class TypeSpace:
    """Ordered finite type set with an i.i.d. prior."""

    values: tuple[float, ...]
    probs: tuple[float, ...]

    def __post_init__(self):
        values = tuple(float(v) for v in self.values)
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "probs", probs)
        if len(values) < 1:
            raise ValueError("type set must contain at least one value")
        if len(values) != len(probs):
            raise ValueError("values and probs must have the same length")
        if any(v <= 0 for v in values):
            raise ValueError("type values must be positive")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("type values must be strictly increasing")
        if any(p < 0 for p in probs):
            raise ValueError("probabilities must be nonnegative")
        if abs(sum(probs) - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {sum(probs)!r}, not 1")

    @classmethod
    def uniform(cls, values: Sequence[float]) -> "TypeSpace":
        m = len(values)
        return cls(tuple(values), tuple([1.0 / m] * m))

    @property
    def m(self) -> int:
        return len(self.values)

    @property
    def tau(self) -> np.ndarray:
        return np.asarray(self.values)

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.probs)

    def index(self, value: float) -> int:
        """Index of a type value; exact match required."""
        for k, v in enumerate(self.values):
            if v == value:
                return k
        raise KeyError(f"unknown type value {value!r}")


@dataclass(frozen=True)
class Scenario:
    n: int
    type_space: TypeSpace
    mu: float = 5.0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one user")
        if not self.mu > 0:
            raise ValueError("service rate mu must be positive")
        object.__setattr__(self, "mu", float(self.mu))

    @property
    def m(self) -> int:
        return self.type_space.m

    @property
    def tau(self) -> np.ndarray:
        return self.type_space.tau

    @cached_property
    def profiles(self) -> "ProfileTable":
        return ProfileTable.build(self)


@dataclass(frozen=True)
class TypeProfile:
    """A type profile in multiset form: ``counts[k]`` users have type k."""

    counts: tuple[int, ...]

    @classmethod
    def from_vector(cls, types: Sequence[int], m: int) -> "TypeProfile":
        counts = [0] * m
        for t in types:
            counts[t] += 1
        return cls(tuple(counts))

    def vector(self) -> tuple[int, ...]:
        """Canonical vector form: users sorted by type index."""
        return tuple(k for k, c in enumerate(self.counts) for _ in range(c))

    @property
    def n(self) -> int:
        return sum(self.counts)


def multinomial_weight(counts: Sequence[int], probs: Sequence[float]) -> float:
    coef = math.factorial(sum(counts))
    for c in counts:
        coef //= math.factorial(c)
    w = float(coef)
    for c, p in zip(counts, probs):
        if c:
            w *= p**c
    return w


def _compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    # Same order as combinations_with_replacement over type indices.
    for combo in itertools.combinations_with_replacement(range(parts), total):
        counts = [0] * parts
        for k in combo:
            counts[k] += 1
        yield tuple(counts)


def enumerate_profiles(scenario: Scenario) -> Iterator[tuple[TypeProfile, float]]:
    """All type-profile multisets with their prior probability."""
    probs = scenario.type_space.probs
    for counts in _compositions(scenario.n, scenario.m):
        yield TypeProfile(counts), multinomial_weight(counts, probs)


def conditional_profiles(
    scenario: Scenario, own_type: float
) -> Iterator[tuple[TypeProfile, float]]:
    """Distribution of the other ``n-1`` users' types given one user's type.

    Under an i.i.d. prior this does not depend on ``own_type``; the argument
    is still validated.
    """
    scenario.type_space.index(own_type)
    probs = scenario.type_space.probs
    for counts in _compositions(scenario.n - 1, scenario.m):
        yield TypeProfile(counts), multinomial_weight(counts, probs)


def enumerate_vectors(scenario: Scenario) -> Iterator[tuple[tuple[int, ...], float]]:
    """Brute-force enumeration of every type vector; only sensible for small n."""
    probs = scenario.type_space.probs
    for vec in itertools.product(range(scenario.m), repeat=scenario.n):
        w = 1.0
        for k in vec:
            w *= probs[k]
        yield vec, w


def bin_size(type_space: TypeSpace) -> float:
    """Largest gap between consecutive type values."""
    if type_space.m < 2:
        raise DegenerateTypeSet("bin size undefined for a single type")
    v = type_space.values
    return max(b - a for a, b in zip(v, v[1:]))


@dataclass(frozen=True)
class ProfileTable:
    """Index arrays over multiset profiles used by every vectorised evaluator.

    ``counts[k]`` is the k-th multiset and ``weight[k]`` its probability.
    For a representative user, ``own_index[l, c]`` is the multiset obtained by
    adding one user of type ``l`` to the others' multiset ``c``, and
    ``cond_weight[c]`` is the probability of ``c``.
    """

    counts: np.ndarray
    weight: np.ndarray
    others: np.ndarray
    cond_weight: np.ndarray
    own_index: np.ndarray

    @classmethod
    def build(cls, scenario: Scenario) -> "ProfileTable":
        m, n = scenario.m, scenario.n
        probs = scenario.type_space.probs
        full = list(_compositions(n, m))
        lookup = {c: k for k, c in enumerate(full)}
        others = list(_compositions(n - 1, m))
        own_index = np.empty((m, len(others)), dtype=np.intp)
        for l in range(m):
            for c, oc in enumerate(others):
                k = list(oc)
                k[l] += 1
                own_index[l, c] = lookup[tuple(k)]
        return cls(
            counts=np.array(full, dtype=np.int64).reshape(len(full), m),
            weight=np.array([multinomial_weight(c, probs) for c in full]),
            others=np.array(others, dtype=np.int64).reshape(len(others), m),
            cond_weight=np.array([multinomial_weight(c, probs) for c in others]),
            own_index=own_index,
        )

    def lookup(self, counts: Sequence[int]) -> int:
        hits = np.flatnonzero((self.counts == np.asarray(counts)).all(axis=1))
        if hits.size == 0:
            raise KeyError(f"no profile with counts {tuple(counts)}")
        return int(hits[0])


@dataclass(frozen=True)
class ActionRule:
    """Symmetric map from type profiles to rates.

    ``rates[k, l]`` is the rate of every type-``l`` user in multiset ``k``;
    entries for types absent from ``k`` are unused and kept at 0.
    """

    scenario: Scenario
    rates: np.ndarray = field(repr=False)

    def __post_init__(self):
        rates = np.array(self.rates, dtype=float)
        table = self.scenario.profiles
        if rates.shape != table.counts.shape:
            raise ValueError(f"rates must have shape {table.counts.shape}")
        rates = np.where(table.counts > 0, rates, 0.0)
        if np.any(rates < 0) or np.any(rates > self.scenario.mu):
            raise ValueError("rates must lie in [0, mu]")
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)

    @classmethod
    def from_function(
        cls, scenario: Scenario, fn: Callable[[np.ndarray], np.ndarray]
    ) -> "ActionRule":
        """Tabulate ``fn`` (type vector -> rate vector) and reject asymmetry."""
        table = scenario.profiles
        tau = scenario.tau
        rates = np.zeros(table.counts.shape)
        for k, counts in enumerate(table.counts):
            vec = np.array(TypeProfile(tuple(int(c) for c in counts)).vector())
            d = np.asarray(fn(tau[vec]), dtype=float)
            d_rev = np.asarray(fn(tau[vec[::-1]]), dtype=float)[::-1]
            if np.max(np.abs(d - d_rev), initial=0.0) > SYMMETRY_TOL * max(1.0, scenario.mu):
                raise ValueError("action rule is not permutation symmetric")
            for l in range(scenario.m):
                mask = vec == l
                if mask.any():
                    vals = d[mask]
                    if np.ptp(vals) > SYMMETRY_TOL * max(1.0, scenario.mu):
                        raise ValueError("users with equal types get unequal actions")
                    rates[k, l] = vals[0]
        return cls(scenario, rates)

    @classmethod
    def constant(cls, scenario: Scenario, rate: float) -> "ActionRule":
        return cls(scenario, np.full(scenario.profiles.counts.shape, float(rate)))

    def load(self) -> np.ndarray:
        """Aggregate user load for every multiset."""
        return np.sum(self.scenario.profiles.counts * self.rates, axis=1)

    def action_vector(self, counts: Sequence[int]) -> np.ndarray:
        k = self.scenario.profiles.lookup(counts)
        vec = TypeProfile(tuple(counts)).vector()
        return self.rates[k, list(vec)]

    def __call__(self, types: Sequence[int]) -> np.ndarray:
        """Rates for an explicit vector of type indices."""
        types = list(types)
        counts = TypeProfile.from_vector(types, self.scenario.m).counts
        k = self.scenario.profiles.lookup(counts)
        return self.rates[k, types]


def expected_user_value(
    scenario: Scenario, own_type: float, rule: ActionRule, utility=None
) -> float:
    """Expected utility of a user of ``own_type`` when everyone follows ``rule``."""
    from .flow import FlowUtility

    utility = utility or FlowUtility(scenario.mu)
    l = scenario.type_space.index(own_type)
    table = scenario.profiles
    idx = table.own_index[l]
    own = rule.rates[idx, l]
    load = rule.load()[idx]
    vals = utility.user_from_load(own, load, own_type)
    return float(np.dot(table.cond_weight, vals))


def expected_manager_value(scenario: Scenario, rule: ActionRule, utility=None) -> float:
    """Prior-weighted manager utility of ``rule`` with no intervention."""
    from .flow import FlowUtility

    utility = utility or FlowUtility(scenario.mu)
    table = scenario.profiles
    vals = utility.manager_table(table.counts, rule.rates, scenario.tau)
    return float(np.dot(table.weight, vals))
