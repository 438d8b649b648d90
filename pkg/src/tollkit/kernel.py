"""Poisson load kernels and efficiency factors for cost generators.

The central quantity is the load kernel

    p(v) = E_{P ~ Poi(v)}[P * b(P)] = exp(-v) * sum_{i>=0} i*b(i) * v^i / i!

of a generator ``b``. Its ratio against the deterministic cost ``x * b(x)``
over integer ``x`` gives the efficiency factor ``rho_b``; the analogous
ratio with a scaled unit-rate Poisson over real ``x`` gives the rounding
factor ``mu_b >= rho_b``. For the monomial ``b(x) = x**d`` the factor equals
the fractional Bell number ``exp(-1) * sum_i i**(d+1) / i!``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import InvalidParams, KernelNonConvergent, KernelOverflow, UnsupportedBasis
from .game import BasisFunction

_RENORM_LIMIT = 1e200
_RENORM_FACTOR = 1e-200
_LOG_RENORM = -math.log(_RENORM_FACTOR)


@dataclass(frozen=True)
class KernelConfig:
    """Truncation control for the kernel series.

    ``tol_tail`` is the relative size at which a decreasing tail is cut;
    ``i_max`` caps the number of terms, and hitting it raises
    ``KernelNonConvergent``.
    """

    tol_tail: float = 1e-14
    i_max: int = 10_000

    def __post_init__(self):
        if not (0.0 < self.tol_tail < 1.0):
            raise InvalidParams(f"tol_tail must be in (0, 1), got {self.tol_tail}")
        if self.i_max < 64:
            raise InvalidParams(f"i_max must be >= 64, got {self.i_max}")


DEFAULT_KERNEL_CONFIG = KernelConfig()


def _poisson_series(coef: Callable[[int], float], v: float, cfg: KernelConfig,
                    min_terms: int = 0) -> float:
    """``exp(-v) * sum_{i>=0} coef(i) * v^i / i!`` for non-negative ``coef``.

    Truncates once the running term falls below ``tol_tail * (sum + 1)``
    while the terms are decreasing and the Poisson weight peak (``i ~ v``)
    is past; ``min_terms`` postpones truncation across any table range where
    ``coef`` may still jump. Accumulation is rescaled on the fly so weights
    like ``v^i / i!`` never overflow before the closing ``exp(-v)``.
    """
    if v < 0 or not math.isfinite(v):
        raise InvalidParams(f"kernel parameter must be finite and >= 0, got {v}")
    if v == 0.0:
        return float(coef(0))
    total = float(coef(0))
    w = 1.0
    shift = 0.0
    prev = math.inf
    converged = False
    i = 0
    while i < cfg.i_max:
        i += 1
        w *= v / i
        if w > _RENORM_LIMIT or total > _RENORM_LIMIT:
            w *= _RENORM_FACTOR
            total *= _RENORM_FACTOR
            prev *= _RENORM_FACTOR
            shift += _LOG_RENORM
        term = coef(i) * w
        if not math.isfinite(term):
            raise KernelOverflow(
                f"kernel term overflowed at i={i}, v={v}", x=i, v=v)
        total += term
        if i >= min_terms and i > v and term <= prev \
                and term <= cfg.tol_tail * (total + 1.0):
            converged = True
            break
        prev = term
    if not converged:
        raise KernelNonConvergent(
            f"series did not settle within {cfg.i_max} terms at v={v}",
            v=v, terms=cfg.i_max)
    if total <= 0.0:
        return 0.0
    return math.exp(shift - v + math.log(total))


def _min_terms(basis: BasisFunction) -> int:
    """Terms to force before truncation: past any table knots."""
    if basis.kind == "table":
        return len(basis.values) + 1
    return 0


def poisson_kernel(basis: BasisFunction, v: float,
                   cfg: KernelConfig = DEFAULT_KERNEL_CONFIG) -> float:
    """Load kernel ``p(v) = E_{P ~ Poi(v)}[P * b(P)]``; ``p(0) = 0``."""
    return _poisson_series(basis.c, v, cfg, min_terms=_min_terms(basis))


def poisson_kernel_derivative(basis: BasisFunction, v: float,
                              cfg: KernelConfig = DEFAULT_KERNEL_CONFIG) -> float:
    """Derivative ``p'(v) = exp(-v) * sum_i (v^i / i!) * (c(i+1) - c(i))``.

    The forward differences of the convex ``c(x) = x * b(x)`` are
    non-negative and non-decreasing, so the same truncation rule applies;
    convexity of ``p`` itself follows from these differences increasing.
    """
    def delta_c(i: int) -> float:
        return basis.c(i + 1) - basis.c(i)

    return _poisson_series(delta_c, v, cfg, min_terms=_min_terms(basis))


@dataclass(frozen=True)
class RhoReport:
    """Result of the efficiency-factor scan.

    ``value`` is the largest sampled ratio ``p(x) / (x * b(x))`` (``inf``
    when the kernel diverged), ``argmax`` the integer load attaining it,
    ``x_max`` the requested scan bound, and ``samples`` the per-``x`` ratios
    actually evaluated, starting at ``x = 1``.
    """

    value: float
    argmax: Optional[int]
    x_max: int
    samples: tuple[float, ...]
    infinite: bool

    def to_json(self) -> dict:
        return {
            "rho": None if self.infinite else self.value,
            "argmax": self.argmax,
            "x_max": self.x_max,
            "samples": list(self.samples),
            "infinite": self.infinite,
        }

    @classmethod
    def from_json(cls, data: dict) -> "RhoReport":
        infinite = bool(data["infinite"])
        return cls(
            value=math.inf if infinite else float(data["rho"]),
            argmax=None if data["argmax"] is None else int(data["argmax"]),
            x_max=int(data["x_max"]),
            samples=tuple(float(s) for s in data["samples"]),
            infinite=infinite,
        )


def rho_factor(basis: BasisFunction, x_max: int = 1000,
               cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
               stall: int = 50) -> RhoReport:
    """Scan ``sup_x p(x) / (x * b(x))`` over integer loads ``1..x_max``.

    The scan stops early once ``stall`` consecutive loads fail to improve
    the maximum; for semi-convex generators the ratio stabilises, so the
    finite scan is a faithful stand-in for the supremum at desk scale. A
    non-convergent kernel at any load is reported as an infinite factor,
    not raised.
    """
    if x_max < 1:
        raise InvalidParams(f"x_max must be >= 1, got {x_max}")
    samples: list[float] = []
    best = -math.inf
    argmax: Optional[int] = None
    since_best = 0
    infinite = False
    for x in range(1, x_max + 1):
        try:
            p = poisson_kernel(basis, float(x), cfg)
        except KernelNonConvergent:
            infinite = True
            break
        ratio = p / basis.c(x)
        samples.append(ratio)
        if ratio > best:
            best = ratio
            argmax = x
            since_best = 0
        else:
            since_best += 1
            if since_best >= stall:
                break
    if infinite:
        return RhoReport(value=math.inf, argmax=None, x_max=x_max,
                         samples=tuple(samples), infinite=True)
    return RhoReport(value=best, argmax=argmax, x_max=x_max,
                     samples=tuple(samples), infinite=False)


def bell_fractional(degree: float) -> float:
    """Fractional Bell number ``exp(-1) * sum_{i>=0} i**(degree+1) / i!``.

    Equals the ``(degree+1)``'st Bell number for integer degrees and the
    efficiency factor of the monomial generator ``b(x) = x**degree``.
    """
    if not math.isfinite(degree) or degree < 0:
        raise InvalidParams(f"degree must be a finite real >= 0, got {degree}")
    exponent = degree + 1.0
    cfg = KernelConfig(tol_tail=1e-14, i_max=1_000_000)
    return _poisson_series(lambda i: float(i) ** exponent if i else 0.0, 1.0, cfg)


def _stirling_row(n: int) -> list[float]:
    """Stirling partition numbers ``S(n, 0..n)``."""
    row = [1.0]
    for m in range(1, n + 1):
        new = [0.0] * (m + 1)
        for k in range(1, m + 1):
            new[k] = k * (row[k] if k < m else 0.0) + row[k - 1]
        row = new
    return row


def kernel_evaluators(basis: BasisFunction,
                      cfg: KernelConfig = DEFAULT_KERNEL_CONFIG):
    """Fast ``(p, p')`` evaluator pair for one basis.

    Integer-degree monomials admit the closed moment polynomial
    ``E_{Poi(v)}[P^(d+1)] = sum_i S(d+1, i) v^i`` with Stirling partition
    coefficients, exact up to rounding; everything else falls back to the
    truncated series. The pair agrees with ``poisson_kernel`` and its
    derivative to machine precision and exists so that inner solver loops
    do not pay the series cost per evaluation.
    """
    if (basis.kind == "monomial" and float(basis.degree).is_integer()
            and basis.degree <= 120):
        n = int(basis.degree) + 1
        coeffs = _stirling_row(n)

        def p(v: float) -> float:
            acc = 0.0
            for i in range(n, 0, -1):
                acc = acc * v + coeffs[i]
            return acc * v

        def dp(v: float) -> float:
            acc = 0.0
            for i in range(n, 0, -1):
                acc = acc * v + i * coeffs[i]
            return acc

        return p, dp
    return (lambda v: poisson_kernel(basis, v, cfg),
            lambda v: poisson_kernel_derivative(basis, v, cfg))


# Unit-rate Poisson weights exp(-1)/i!; 1/i! underflows past i ~ 170, far
# below any tail that could matter at double precision.
_POI1_COUNTS = np.arange(171)
_POI1_WEIGHTS = np.exp(-1.0 - np.cumsum(np.concatenate(
    ([0.0], np.log(np.arange(1, 171, dtype=float))))))


def _b_real_vec(basis: BasisFunction, t: np.ndarray) -> np.ndarray:
    if basis.kind == "monomial":
        out = np.zeros_like(t)
        pos = t > 0
        out[pos] = t[pos] ** basis.degree
        return out
    vals = np.asarray(basis.values)
    knots_x = np.arange(len(vals) + 1, dtype=float)
    knots_y = np.concatenate(([0.0], vals))
    out = np.interp(t, knots_x, knots_y)
    tail = t > len(vals)
    if np.any(tail):
        out[tail] = vals[-1] + (t[tail] - len(vals)) * basis._tail_slope
    return out


def mu_factor(basis: BasisFunction, cfg: KernelConfig = DEFAULT_KERNEL_CONFIG,
              monomial_like: bool = False, grid_low: float = 1e-3,
              grid_high: float = 1e3, grid_points: int = 2048) -> float:
    """Rounding factor ``mu = sup_{x>0} E_{P~Poi(1)}[(xP) b(xP)] / (x b(x))``.

    Needs ``b`` at non-integer arguments, so plain table bases are rejected;
    pass ``monomial_like=True`` to evaluate a table through its piecewise
    linear real extension. The supremum is located on a log-spaced grid and
    refined by golden section; when it sits on the upper grid edge the grid
    is extended (the supremum of ratios like ``(2x+1)/(x+1)`` is only
    approached as ``x`` grows), capped at ``x = 1e15``.
    """
    if basis.kind == "table" and not monomial_like:
        raise UnsupportedBasis(
            "mu requires real-argument evaluation; pass monomial_like=True "
            "to use the table's piecewise linear extension")

    def ratio(x: float) -> float:
        args = x * _POI1_COUNTS.astype(float)
        expectation = float(np.sum(_POI1_WEIGHTS * args * _b_real_vec(basis, args)))
        return expectation / (x * basis.b_real(x))

    low, high = grid_low, grid_high
    best_x, best = None, -math.inf
    while True:
        grid = np.geomspace(low, high, grid_points)
        values = [ratio(float(x)) for x in grid]
        idx = int(np.argmax(values))
        if values[idx] > best:
            best, best_x = values[idx], float(grid[idx])
        at_top = idx == len(grid) - 1
        if at_top and high < 1e15:
            low, high = high, min(high * 1e3, 1e15)
            grid_points = 256
            continue
        if at_top:
            return best
        lo = float(grid[max(idx - 1, 0)])
        hi = float(grid[min(idx + 1, len(grid) - 1)])
        break

    # Golden-section refinement on log x.
    a, b = math.log(lo), math.log(hi)
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = ratio(math.exp(c)), ratio(math.exp(d))
    for _ in range(80):
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = ratio(math.exp(c))
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = ratio(math.exp(d))
    return max(best, fc, fd)


def binomial_expectation(c_values, h: int, k: int) -> float:
    """Exact finite sum ``E_{X ~ Bin(h, k/h)}[c(X)]`` over a cost table.

    ``c_values`` must cover ``0..h``. The degenerate ``h == k`` case is the
    point mass at ``h``. Falls back to log-space terms when the binomial
    coefficients leave the double range.
    """
    if not (isinstance(h, int) and isinstance(k, int)):
        raise InvalidParams("h and k must be integers")
    if not h >= k >= 1:
        raise InvalidParams(f"need h >= k >= 1, got h={h}, k={k}")
    if len(c_values) < h + 1:
        raise InvalidParams(f"cost table must cover 0..{h}")
    if h == k:
        return float(c_values[h])
    p = k / h
    q = 1.0 - p
    try:
        return sum(float(math.comb(h, x)) * p ** x * q ** (h - x) * float(c_values[x])
                   for x in range(h + 1))
    except OverflowError:
        log_p, log_q = math.log(p), math.log(q)
        total = 0.0
        for x in range(h + 1):
            log_w = (math.lgamma(h + 1) - math.lgamma(x + 1) - math.lgamma(h - x + 1)
                     + x * log_p + (h - x) * log_q)
            total += math.exp(log_w) * float(c_values[x])
        return total
