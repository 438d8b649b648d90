"""Parameterised congestion taxes built from the Poisson load kernel.

For a generator ``b`` and parameter ``v >= 0`` the modified cost generator
``f(x, v)`` is, for integer ``x >= 1`` and ``v > 0``,

    f(x, v) = ((x-1)! / v^x) * sum_{i=0}^{x-1} (p(v) - i*b(i)) * v^i / i!

with boundaries ``f(0, v) = 0`` and ``f(x, 0) = b(x)``, where ``p`` is the
load kernel of ``b``. The family satisfies, for every ``x >= 0``,

    x*b(x) - x*f(x, v) + v*f(x+1, v) = p(v)

which pins the whole table once ``f(1, v) = p(v)/v`` is known, and also
implies ``f`` non-decreasing in ``x`` and ``f(x, v) >= b(x)``, i.e.
non-negative taxes ``tau(x) = f(x, v) - b(x)``.

The explicit factorial sum is ill-conditioned whenever ``v^x / (x-1)!`` is
small: the summands then cancel to a result many orders below their own
magnitude. Evaluation therefore runs on the recursion instead, forwards
(stable while ``x <= v``) and backwards from a far seed (stable while
``x > v``, each step contracting errors by ``v/x``); see
``modified_cost_table``. The factorial sum is kept as a cross-check for
well-conditioned arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import GameValidationError, InvalidParams, KernelOverflow
from .game import BasisFunction, GameInstance, TaxProfile
from .kernel import DEFAULT_KERNEL_CONFIG, KernelConfig, poisson_kernel

# Below this parameter the tables collapse to the v -> 0 limit f(x, 0) = b(x),
# avoiding the v^x denominators.
V_FLOOR = 1e-8


def modified_cost_table(basis: BasisFunction, v: float, x_cap: int,
                        cfg: KernelConfig = DEFAULT_KERNEL_CONFIG) -> list[float]:
    """``[f(0, v), ..., f(x_cap, v)]`` for one generator.

    Forward recursion ``f(x+1) = (p - x*b(x) + x*f(x)) / v`` seeds from
    ``f(1) = p/v`` and is used while ``x <= v`` (it adds only non-negative
    terms and contracts rounding by ``x/v``). Loads beyond that come from
    the backward form ``f(x) = b(x) + (v*f(x+1) - p) / x`` started at a seed
    ``f(X0) ~ b(X0)`` far enough above ``x_cap`` that the per-step error
    factor ``v/x < 1`` has wiped the seed out.
    """
    if x_cap < 0:
        raise InvalidParams(f"x_cap must be >= 0, got {x_cap}")
    if not math.isfinite(v) or v < 0:
        raise InvalidParams(f"tax parameter must be finite and >= 0, got {v}")
    if v < V_FLOOR:
        return [basis.b(x) if x else 0.0 for x in range(x_cap + 1)]

    p = poisson_kernel(basis, v, cfg)
    f = [0.0] * (x_cap + 1)
    x_forward = min(x_cap, max(1, int(math.floor(v))))
    if x_cap >= 1:
        f[1] = p / v
        for x in range(1, x_forward):
            f[x + 1] = (p - x * basis.b(x) + x * f[x]) / v

    if x_cap > x_forward:
        margin = 40 + math.ceil(9.0 * math.sqrt(max(v, 1.0)))
        x0 = x_cap + margin
        g = basis.b(x0)
        for x in range(x0 - 1, x_forward, -1):
            g = basis.b(x) + (v * g - p) / x
            if x <= x_cap:
                f[x] = g

    for x, value in enumerate(f):
        if not math.isfinite(value):
            raise KernelOverflow(
                f"modified cost overflowed at x={x}, v={v}", x=x, v=v)
    return f


def modified_cost(basis: BasisFunction, x: int, v: float,
                  cfg: KernelConfig = DEFAULT_KERNEL_CONFIG) -> float:
    """Single value ``f(x, v)``."""
    if x < 0:
        raise InvalidParams(f"load must be >= 0, got {x}")
    return modified_cost_table(basis, v, x, cfg)[x]


def _modified_cost_direct(basis: BasisFunction, x: int, v: float, p: float) -> float:
    """Literal factorial-sum form of ``f(x, v)``.

    Only meaningful where the sum is well conditioned (roughly ``v`` not far
    below ``x``); retained as an independent cross-check of the recursion.
    """
    if x == 0:
        return 0.0
    acc = 0.0
    coef = 1.0 / v  # (x-1)! / (i! * v^(x-i)) at i = x-1
    for i in range(x - 1, -1, -1):
        acc += (p - basis.c(i)) * coef
        coef *= i / v
    return acc


def build_tax_profile(instance: GameInstance, v,
                      cfg: KernelConfig = DEFAULT_KERNEL_CONFIG) -> TaxProfile:
    """Tax tables ``tau_r(x) = sum_j alpha_j^r * (f_j(x, v_r) - b_j(x))``.

    Tables cover loads ``0..N`` for ``N`` players; behaviour beyond ``N`` is
    never exercised by a valid profile. Deterministic: identical inputs give
    bit-identical tables.
    """
    v = [float(x) for x in v]
    if len(v) != instance.num_resources:
        raise InvalidParams(
            f"expected {instance.num_resources} tax parameters, got {len(v)}")
    n = instance.num_players
    f_cache: dict[tuple[int, float], list[float]] = {}
    tau_rows = []
    ell_bar_rows = []
    for r, coeffs in enumerate(instance.coefficients):
        tau = [0.0] * (n + 1)
        ell_bar = [0.0] * (n + 1)
        for j, alpha in enumerate(coeffs):
            if alpha == 0.0:
                continue
            key = (j, v[r])
            if key not in f_cache:
                try:
                    f_cache[key] = modified_cost_table(instance.basis[j], v[r], n, cfg)
                except KernelOverflow as exc:
                    raise KernelOverflow(
                        f"resource {r}: {exc}", x=exc.x, v=exc.v, resource=r) from exc
            f_table = f_cache[key]
            b = instance.basis[j]
            for x in range(n + 1):
                tau[x] += alpha * (f_table[x] - b.b(x))
                ell_bar[x] += alpha * f_table[x]
        tau_rows.append(tuple(tau))
        ell_bar_rows.append(tuple(ell_bar))
    return TaxProfile(v=tuple(v), tau=tuple(tau_rows),
                      ell_bar=tuple(ell_bar_rows), n_cap=n)


@dataclass(frozen=True)
class ResourceAudit:
    resource: int
    max_residual: float
    min_monotonicity_gap: float
    min_tax: float


@dataclass(frozen=True)
class TaxAudit:
    """Per-resource check of the three properties the efficiency bound needs.

    ``max_residual`` is the worst defect of the recursion
    ``x*b(x) - x*f(x,v) + v*f(x+1,v) = p(v)`` over ``x = 0..N-1`` and all
    bases with positive weight, scaled by ``max(1, p(v))``;
    ``min_monotonicity_gap`` the smallest ``f(x+1) - f(x)``; ``min_tax`` the
    smallest table entry. ``passed`` holds iff residuals stay within ``tol``
    and the two minima above ``-tol``.
    """

    resources: tuple[ResourceAudit, ...]
    passed: bool
    tol: float

    def to_json(self) -> dict:
        return {
            "resources": [
                {"resource": a.resource, "max_residual": a.max_residual,
                 "min_monotonicity_gap": a.min_monotonicity_gap,
                 "min_tax": a.min_tax}
                for a in self.resources
            ],
            "passed": self.passed,
            "tol": self.tol,
        }

    @classmethod
    def from_json(cls, data: dict) -> "TaxAudit":
        return cls(
            resources=tuple(
                ResourceAudit(resource=int(a["resource"]),
                              max_residual=float(a["max_residual"]),
                              min_monotonicity_gap=float(a["min_monotonicity_gap"]),
                              min_tax=float(a["min_tax"]))
                for a in data["resources"]),
            passed=bool(data["passed"]),
            tol=float(data["tol"]),
        )


def audit_taxes(instance: GameInstance, taxes: TaxProfile, tol: float = 1e-7,
                cfg: KernelConfig = DEFAULT_KERNEL_CONFIG) -> TaxAudit:
    """Recompute and check recursion, monotonicity, and tax sign.

    Failures are reported in the audit record, never raised.
    """
    if taxes.num_resources != instance.num_resources:
        raise GameValidationError(
            f"tax profile covers {taxes.num_resources} resources, "
            f"instance has {instance.num_resources}")
    n = taxes.n_cap
    audits = []
    passed = True
    for r, coeffs in enumerate(instance.coefficients):
        v = taxes.v[r]
        max_residual = 0.0
        min_gap = math.inf
        for j, alpha in enumerate(coeffs):
            if alpha == 0.0:
                continue
            b = instance.basis[j]
            p = poisson_kernel(b, v, cfg) if v >= V_FLOOR else 0.0
            f = modified_cost_table(b, v, n, cfg)
            scale = max(1.0, p)
            for x in range(n):
                residual = abs(x * b.b(x) - x * f[x] + v * f[x + 1] - p) / scale
                max_residual = max(max_residual, residual)
                min_gap = min(min_gap, f[x + 1] - f[x])
        min_tax = min(taxes.tau[r])
        audits.append(ResourceAudit(resource=r, max_residual=max_residual,
                                    min_monotonicity_gap=min_gap, min_tax=min_tax))
        if max_residual > tol or min_gap < -tol or min_tax < -tol:
            passed = False
    return TaxAudit(resources=tuple(audits), passed=passed, tol=tol)
