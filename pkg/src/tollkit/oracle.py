"""Exhaustive ground truth on small instances.

Exact social-cost minimisation, pure Nash enumeration under perceived
(taxed) costs, the per-instance price of anarchy, and the smoothness
certificate that links a designed tax profile, a fractional relaxation
solution, and an efficiency factor ``rho``:

    sum_i sum_k y_{i,k} * [Cbar_i(a) - Cbar_i(a'_{i,k}, a_{-i})]
        >= SC(a) - rho * SC(a_opt)          for every profile a,

where ``Cbar`` is the perceived cost under the taxes. When the certificate
holds, every pure Nash equilibrium (where the left side is non-positive)
costs at most ``rho`` times the optimum, and the same bound extends in
expectation to any distribution over profiles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterator, Optional

from .errors import GameValidationError, TooLarge
from .game import Allocation, GameInstance, TaxProfile
from .relaxation import FractionalProfile, check_feasible

DEFAULT_ENUMERATION_CAP = 10_000_000

# A deviation counts as improving only past this relative threshold; exact
# float comparisons would make equilibrium sets depend on rounding noise.
IMPROVEMENT_THRESHOLD = 1e-12


def _enumeration_size(instance: GameInstance, cap: int) -> int:
    size = 1
    for i in range(instance.num_players):
        size *= instance.num_strategies(i)
        if size > cap:
            raise TooLarge(size, cap)
    return size


def _iter_profiles(instance: GameInstance) -> Iterator[tuple[int, ...]]:
    return itertools.product(*(range(instance.num_strategies(i))
                               for i in range(instance.num_players)))


def _perceived_tables(instance: GameInstance,
                      taxes: Optional[TaxProfile]) -> list[list[float]]:
    n = instance.num_players
    tables = instance.ell_tables(n)
    if taxes is not None:
        if taxes.num_resources != instance.num_resources:
            raise GameValidationError(
                f"tax profile covers {taxes.num_resources} resources, "
                f"instance has {instance.num_resources}")
        if taxes.n_cap < n:
            raise GameValidationError(
                f"tax tables cover loads up to {taxes.n_cap}, need {n}")
        tables = [[cost + taxes.tau[r][x] for x, cost in enumerate(row)]
                  for r, row in enumerate(tables)]
    return tables


def _loads_of(instance: GameInstance, choices: tuple[int, ...]) -> list[int]:
    loads = [0] * instance.num_resources
    for i, k in enumerate(choices):
        for r in instance.strategies[i][k]:
            loads[r] += 1
    return loads


def brute_force_min_sc(instance: GameInstance,
                       cap: int = DEFAULT_ENUMERATION_CAP) -> tuple[Allocation, float]:
    """Exact social-cost minimiser; ties go to the first profile in
    lexicographic choice order."""
    _enumeration_size(instance, cap)
    sc_tables = instance.ell_tables(instance.num_players)
    best_choices = None
    best_cost = math.inf
    for choices in _iter_profiles(instance):
        loads = _loads_of(instance, choices)
        cost = sum(x * sc_tables[r][x] for r, x in enumerate(loads) if x)
        if cost < best_cost:
            best_cost = cost
            best_choices = choices
    return Allocation(best_choices), best_cost


def _is_pure_nash(instance: GameInstance, tables: list[list[float]],
                  choices: tuple[int, ...], loads: list[int]) -> bool:
    for i, k in enumerate(choices):
        current_set = instance.strategies[i][k]
        current = sum(tables[r][loads[r]] for r in current_set)
        threshold = current - IMPROVEMENT_THRESHOLD * max(1.0, abs(current))
        members = set(current_set)
        for alt, alt_set in enumerate(instance.strategies[i]):
            if alt == k:
                continue
            deviated = sum(tables[r][loads[r] + (0 if r in members else 1)]
                           for r in alt_set)
            if deviated < threshold:
                return False
    return True


def enumerate_pure_nash(instance: GameInstance, taxes: Optional[TaxProfile] = None,
                        cap: int = DEFAULT_ENUMERATION_CAP) -> list[Allocation]:
    """All profiles with no strictly improving unilateral deviation under
    the perceived costs. Nonempty for every valid instance: the dynamics
    descend a potential, so a minimiser of it is always an equilibrium."""
    _enumeration_size(instance, cap)
    tables = _perceived_tables(instance, taxes)
    out = []
    for choices in _iter_profiles(instance):
        loads = _loads_of(instance, choices)
        if _is_pure_nash(instance, tables, choices, loads):
            out.append(Allocation(choices))
    return out


@dataclass(frozen=True)
class PoaReport:
    """Exact per-instance price of anarchy with witnesses."""

    min_cost: float
    min_witness: Allocation
    worst_ne_cost: float
    worst_ne_witness: Allocation
    poa: float
    num_pure_ne: int
    enumerated_profiles: int

    def to_json(self) -> dict:
        return {
            "min_cost": self.min_cost,
            "min_witness": list(self.min_witness.choices),
            "worst_ne_cost": self.worst_ne_cost,
            "worst_ne_witness": list(self.worst_ne_witness.choices),
            "poa": self.poa,
            "num_pure_ne": self.num_pure_ne,
            "enumerated_profiles": self.enumerated_profiles,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PoaReport":
        return cls(
            min_cost=float(data["min_cost"]),
            min_witness=Allocation.of(data["min_witness"]),
            worst_ne_cost=float(data["worst_ne_cost"]),
            worst_ne_witness=Allocation.of(data["worst_ne_witness"]),
            poa=float(data["poa"]),
            num_pure_ne=int(data["num_pure_ne"]),
            enumerated_profiles=int(data["enumerated_profiles"]),
        )


def empirical_poa(instance: GameInstance, taxes: Optional[TaxProfile] = None,
                  cap: int = DEFAULT_ENUMERATION_CAP) -> PoaReport:
    """Worst equilibrium social cost over the exact minimum.

    Equilibria are detected under the perceived (taxed) costs but their
    social cost is always the untaxed system cost.
    """
    size = _enumeration_size(instance, cap)
    sc_tables = instance.ell_tables(instance.num_players)
    tables = _perceived_tables(instance, taxes)
    best_choices = None
    best_cost = math.inf
    worst_ne = None
    worst_ne_cost = -math.inf
    num_ne = 0
    for choices in _iter_profiles(instance):
        loads = _loads_of(instance, choices)
        cost = sum(x * sc_tables[r][x] for r, x in enumerate(loads) if x)
        if cost < best_cost:
            best_cost = cost
            best_choices = choices
        if _is_pure_nash(instance, tables, choices, loads):
            num_ne += 1
            if cost > worst_ne_cost:
                worst_ne_cost = cost
                worst_ne = choices
    if worst_ne is None:
        raise GameValidationError("no pure equilibrium found; instance invalid")
    return PoaReport(
        min_cost=best_cost, min_witness=Allocation(best_choices),
        worst_ne_cost=worst_ne_cost, worst_ne_witness=Allocation(worst_ne),
        poa=worst_ne_cost / best_cost, num_pure_ne=num_ne,
        enumerated_profiles=size)


@dataclass(frozen=True)
class SmoothnessResult:
    passed: bool
    worst_margin: float
    witness: Allocation

    def to_json(self) -> dict:
        return {"passed": self.passed, "worst_margin": self.worst_margin,
                "witness": list(self.witness.choices)}

    @classmethod
    def from_json(cls, data: dict) -> "SmoothnessResult":
        return cls(passed=bool(data["passed"]),
                   worst_margin=float(data["worst_margin"]),
                   witness=Allocation.of(data["witness"]))


def check_smoothness(instance: GameInstance, taxes: TaxProfile,
                     profile: FractionalProfile, rho: float,
                     cap: int = DEFAULT_ENUMERATION_CAP,
                     tol: float = 1e-7) -> SmoothnessResult:
    """Verify the smoothness certificate on every pure profile.

    The margin of a profile is the left side minus the right side of the
    certificate inequality; the check passes when every margin stays above
    ``-tol * max(1, SC(a))``. Returns the smallest margin and its witness.
    """
    _enumeration_size(instance, cap)
    check_feasible(instance, profile)
    sc_tables = instance.ell_tables(instance.num_players)
    perceived = _perceived_tables(instance, taxes)
    _, min_cost = brute_force_min_sc(instance, cap)
    bound = rho * min_cost

    worst_margin = math.inf
    witness = None
    passed = True
    strategies = instance.strategies
    for choices in _iter_profiles(instance):
        loads = _loads_of(instance, choices)
        sc = sum(x * sc_tables[r][x] for r, x in enumerate(loads) if x)
        lhs = 0.0
        for i, k in enumerate(choices):
            members = set(strategies[i][k])
            own = sum(perceived[r][loads[r]] for r in strategies[i][k])
            mixed = 0.0
            for alt, w in enumerate(profile.weights[i]):
                if w:
                    mixed += w * sum(
                        perceived[r][loads[r] + (0 if r in members else 1)]
                        for r in strategies[i][alt])
            lhs += own - mixed
        margin = lhs - (sc - bound)
        if margin < worst_margin:
            worst_margin = margin
            witness = choices
        if margin < -tol * max(1.0, sc):
            passed = False
    return SmoothnessResult(passed=passed, worst_margin=worst_margin,
                            witness=Allocation(witness))
