"""Atomic congestion games with congestion-dependent taxes.

Players pick subsets of resources. Each resource charges every one of its
users a cost that depends only on how many players selected it; per-resource
costs are non-negative combinations of shared generator functions ("bases"),
each positive, non-decreasing, and semi-convex (``x * b(x)`` convex on the
integers). Taxes are per-resource surcharges ``tau_r(x)`` that enter the
players' perceived costs but never the system cost.

All types are immutable after construction and all operations are pure, so
they can be evaluated from concurrent workers without coordination.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from .errors import GameValidationError

# Slack for float tables in monotonicity / convexity validation.
_VALIDATION_SLACK = 1e-12


def _as_float_tuple(values: Iterable[float]) -> tuple[float, ...]:
    return tuple(float(x) for x in values)


@dataclass(frozen=True)
class BasisFunction:
    """One admissible resource-cost generator ``b``, with ``b(0) = 0``.

    kind ``"monomial"``: ``b(x) = x ** degree`` for ``x >= 1``, any real
    degree ``>= 0``.

    kind ``"table"``: ``b(x) = values[x - 1]`` for ``1 <= x <= len(values)``.
    Beyond the table, ``b`` continues linearly with its last first
    difference (constant for a single-entry table). The linear continuation
    keeps ``b`` non-decreasing and ``x * b(x)`` convex, and reproduces
    affine generators exactly, e.g. ``values=[2, 3]`` is ``b(x) = x + 1``
    on all integers.
    """

    kind: str
    degree: float = 0.0
    values: tuple[float, ...] = ()

    @classmethod
    def monomial(cls, degree: float) -> "BasisFunction":
        return cls(kind="monomial", degree=float(degree))

    @classmethod
    def table(cls, values: Iterable[float]) -> "BasisFunction":
        return cls(kind="table", values=_as_float_tuple(values))

    def __post_init__(self):
        if self.kind == "monomial":
            if not math.isfinite(self.degree) or self.degree < 0:
                raise GameValidationError(
                    f"monomial degree must be a finite real >= 0, got {self.degree}")
        elif self.kind == "table":
            vals = self.values
            if not vals:
                raise GameValidationError("table basis needs at least one value")
            for i, v in enumerate(vals):
                if not math.isfinite(v) or v <= 0:
                    raise GameValidationError(
                        f"table value at x={i + 1} must be finite and > 0, got {v}")
            for i in range(len(vals) - 1):
                if vals[i + 1] < vals[i] - _VALIDATION_SLACK * max(1.0, abs(vals[i])):
                    raise GameValidationError(
                        f"table must be non-decreasing; violated between x={i + 1} and x={i + 2}")
            # Semi-convexity: c(x) = x * b(x) must have non-decreasing first
            # differences, with c(0) = 0 anchoring the first one.
            c = [0.0] + [(i + 1) * v for i, v in enumerate(vals)]
            for x in range(1, len(c) - 1):
                lo = c[x] - c[x - 1]
                hi = c[x + 1] - c[x]
                if hi < lo - _VALIDATION_SLACK * max(1.0, abs(c[x])):
                    raise GameValidationError(
                        f"table violates semi-convexity of x*b(x) at x={x}")
        else:
            raise GameValidationError(f"unknown basis kind {self.kind!r}")

    @property
    def _tail_slope(self) -> float:
        vals = self.values
        if len(vals) >= 2:
            return vals[-1] - vals[-2]
        return 0.0

    def b(self, x: int) -> float:
        """Generator value at an integer load, with ``b(0) = 0``."""
        if x <= 0:
            return 0.0
        if self.kind == "monomial":
            return float(x) ** self.degree
        vals = self.values
        if x <= len(vals):
            return vals[x - 1]
        return vals[-1] + (x - len(vals)) * self._tail_slope

    def c(self, x: int) -> float:
        """Per-resource total cost ``x * b(x)`` produced by ``x`` users."""
        if x <= 0:
            return 0.0
        return x * self.b(x)

    def b_real(self, t: float) -> float:
        """Evaluation at real arguments.

        Monomials extend naturally; tables are interpolated linearly through
        ``(0, 0)`` and the integer knots, then continue with the tail slope.
        Used by scale-invariant factor computations that need off-grid loads.
        """
        if t <= 0.0:
            return 0.0
        if self.kind == "monomial":
            return t ** self.degree
        vals = self.values
        if t <= 1.0:
            return t * vals[0]
        if t >= len(vals):
            return vals[-1] + (t - len(vals)) * self._tail_slope
        lo = int(math.floor(t))
        frac = t - lo
        return vals[lo - 1] + frac * (vals[lo] - vals[lo - 1])

    def cost_table(self, n: int) -> list[float]:
        """``[c(0), c(1), ..., c(n)]``."""
        return [self.c(x) for x in range(n + 1)]

    def to_json(self) -> dict:
        if self.kind == "monomial":
            return {"kind": "monomial", "degree": self.degree}
        return {"kind": "table", "values": list(self.values)}

    @classmethod
    def from_json(cls, data: dict) -> "BasisFunction":
        kind = data.get("kind")
        if kind == "monomial":
            return cls.monomial(data["degree"])
        if kind == "table":
            return cls.table(data["values"])
        raise GameValidationError(f"unknown basis kind {kind!r}")


@dataclass(frozen=True)
class GameInstance:
    """A congestion game: bases, per-resource coefficients, strategy sets.

    ``coefficients[r][j]`` weights basis ``j`` on resource ``r``; the cost of
    resource ``r`` under load ``x`` is ``sum_j coefficients[r][j] * b_j(x)``.
    ``strategies[i]`` lists player ``i``'s pure strategies, each a sorted
    tuple of distinct 0-based resource indices.
    """

    basis: tuple[BasisFunction, ...]
    coefficients: tuple[tuple[float, ...], ...]
    strategies: tuple[tuple[tuple[int, ...], ...], ...]

    def __post_init__(self):
        if not self.basis:
            raise GameValidationError("at least one basis function required")
        if not self.coefficients:
            raise GameValidationError("at least one resource required")
        if not self.strategies:
            raise GameValidationError("at least one player required")
        m = len(self.basis)
        for r, coeffs in enumerate(self.coefficients):
            if len(coeffs) != m:
                raise GameValidationError(
                    f"resource {r}: expected {m} coefficients, got {len(coeffs)}")
            if any(not math.isfinite(a) or a < 0 for a in coeffs):
                raise GameValidationError(
                    f"resource {r}: coefficients must be finite and >= 0")
            if not any(a > 0 for a in coeffs):
                raise GameValidationError(
                    f"resource {r}: coefficients must not all be zero")
        num_r = len(self.coefficients)
        for i, strats in enumerate(self.strategies):
            if not strats:
                raise GameValidationError(f"player {i}: empty strategy set")
            seen = set()
            for k, strat in enumerate(strats):
                if not strat:
                    raise GameValidationError(
                        f"player {i} strategy {k}: strategies must be nonempty")
                if any(r < 0 or r >= num_r for r in strat):
                    raise GameValidationError(
                        f"player {i} strategy {k}: resource index out of range [0, {num_r})")
                if len(set(strat)) != len(strat) or tuple(strat) != tuple(sorted(strat)):
                    raise GameValidationError(
                        f"player {i} strategy {k}: must be sorted and duplicate-free")
                if strat in seen:
                    raise GameValidationError(
                        f"player {i} strategy {k}: duplicate strategy")
                seen.add(strat)

    @classmethod
    def build(cls, basis: Sequence[BasisFunction],
              coefficients: Sequence[Sequence[float]],
              strategies: Sequence[Sequence[Iterable[int]]]) -> "GameInstance":
        """Normalising constructor: sorts strategies and coerces to tuples."""
        return cls(
            basis=tuple(basis),
            coefficients=tuple(_as_float_tuple(c) for c in coefficients),
            strategies=tuple(
                tuple(tuple(sorted(int(r) for r in strat)) for strat in player)
                for player in strategies),
        )

    @property
    def num_players(self) -> int:
        return len(self.strategies)

    @property
    def num_resources(self) -> int:
        return len(self.coefficients)

    @property
    def num_basis(self) -> int:
        return len(self.basis)

    def num_strategies(self, player: int) -> int:
        return len(self.strategies[player])

    def ell(self, resource: int, x: int) -> float:
        """Untaxed cost of ``resource`` under integer load ``x``."""
        coeffs = self.coefficients[resource]
        return sum(a * b.b(x) for a, b in zip(coeffs, self.basis) if a)

    def ell_tables(self, n: int) -> list[list[float]]:
        """Per-resource cost tables for loads ``0..n``."""
        b_tables = [[b.b(x) for x in range(n + 1)] for b in self.basis]
        out = []
        for coeffs in self.coefficients:
            out.append([sum(a * bt[x] for a, bt in zip(coeffs, b_tables) if a)
                        for x in range(n + 1)])
        return out

    def validate_allocation(self, allocation: "Allocation") -> None:
        if len(allocation.choices) != self.num_players:
            raise GameValidationError(
                f"allocation has {len(allocation.choices)} choices for "
                f"{self.num_players} players")
        for i, k in enumerate(allocation.choices):
            if k < 0 or k >= self.num_strategies(i):
                raise GameValidationError(
                    f"player {i}: strategy index {k} out of range "
                    f"[0, {self.num_strategies(i)})")

    def loads(self, allocation: "Allocation") -> list[int]:
        """Number of users per resource under ``allocation``."""
        self.validate_allocation(allocation)
        loads = [0] * self.num_resources
        for i, k in enumerate(allocation.choices):
            for r in self.strategies[i][k]:
                loads[r] += 1
        return loads

    def to_json(self) -> dict:
        return {
            "basis": [b.to_json() for b in self.basis],
            "resources": [{"coeffs": list(c)} for c in self.coefficients],
            "players": [{"strategies": [list(s) for s in strats]}
                        for strats in self.strategies],
        }

    @classmethod
    def from_json(cls, data: dict) -> "GameInstance":
        try:
            basis = [BasisFunction.from_json(b) for b in data["basis"]]
            coefficients = [r["coeffs"] for r in data["resources"]]
            strategies = [p["strategies"] for p in data["players"]]
        except (KeyError, TypeError) as exc:
            raise GameValidationError(f"malformed instance JSON: {exc}") from exc
        return cls.build(basis, coefficients, strategies)

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "GameInstance":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class Allocation:
    """A pure strategy profile: one strategy index per player."""

    choices: tuple[int, ...]

    @classmethod
    def of(cls, choices: Iterable[int]) -> "Allocation":
        return cls(tuple(int(k) for k in choices))


@dataclass(frozen=True)
class TaxProfile:
    """Per-resource congestion-dependent taxes on loads ``0..n_cap``.

    ``tau[r][x]`` is the surcharge on resource ``r`` at load ``x`` and
    ``ell_bar[r][x]`` the modified (perceived) cost; ``v[r]`` is the design
    parameter the tables were generated from. Taxes are non-negative and
    modified costs non-decreasing up to float rounding; ``audit_taxes``
    checks both with explicit tolerances.
    """

    v: tuple[float, ...]
    tau: tuple[tuple[float, ...], ...]
    ell_bar: tuple[tuple[float, ...], ...]
    n_cap: int

    def __post_init__(self):
        if not (len(self.v) == len(self.tau) == len(self.ell_bar)):
            raise GameValidationError("tax profile field lengths disagree")
        for r, (t, e) in enumerate(zip(self.tau, self.ell_bar)):
            if len(t) != self.n_cap + 1 or len(e) != self.n_cap + 1:
                raise GameValidationError(
                    f"resource {r}: tax tables must cover loads 0..{self.n_cap}")

    @property
    def num_resources(self) -> int:
        return len(self.v)

    def to_json(self) -> dict:
        return {
            "resources": [
                {"v": v, "tau": list(t), "ell_bar": list(e)}
                for v, t, e in zip(self.v, self.tau, self.ell_bar)
            ],
            "n_cap": self.n_cap,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TaxProfile":
        res = data["resources"]
        return cls(
            v=tuple(float(r["v"]) for r in res),
            tau=tuple(_as_float_tuple(r["tau"]) for r in res),
            ell_bar=tuple(_as_float_tuple(r["ell_bar"]) for r in res),
            n_cap=int(data["n_cap"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "TaxProfile":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _check_taxes(instance: GameInstance, taxes: Optional[TaxProfile]) -> None:
    if taxes is not None and taxes.num_resources != instance.num_resources:
        raise GameValidationError(
            f"tax profile covers {taxes.num_resources} resources, "
            f"instance has {instance.num_resources}")


def social_cost(instance: GameInstance, allocation: Allocation) -> float:
    """System cost ``sum_r load_r * ell_r(load_r)``.

    Taxes never enter this value: they reshape incentives, not the cost the
    system actually pays.
    """
    loads = instance.loads(allocation)
    return sum(x * instance.ell(r, x) for r, x in enumerate(loads) if x)


def player_cost(instance: GameInstance, taxes: Optional[TaxProfile],
                allocation: Allocation, player: int) -> float:
    """Perceived cost of ``player``: selected resources' cost plus tax."""
    if player < 0 or player >= instance.num_players:
        raise GameValidationError(f"player index {player} out of range")
    _check_taxes(instance, taxes)
    loads = instance.loads(allocation)
    total = 0.0
    for r in instance.strategies[player][allocation.choices[player]]:
        x = loads[r]
        total += instance.ell(r, x)
        if taxes is not None:
            total += taxes.tau[r][x]
    return total


def rosenthal_potential(instance: GameInstance, taxes: Optional[TaxProfile],
                        allocation: Allocation) -> float:
    """Potential ``sum_r sum_{u=1}^{load_r} ell_bar_r(u)``.

    Any unilateral deviation changes this by exactly the deviator's
    perceived-cost change, which is what makes best-response dynamics
    terminate.
    """
    _check_taxes(instance, taxes)
    loads = instance.loads(allocation)
    total = 0.0
    for r, x in enumerate(loads):
        for u in range(1, x + 1):
            total += instance.ell(r, u)
            if taxes is not None:
                total += taxes.tau[r][u]
    return total
