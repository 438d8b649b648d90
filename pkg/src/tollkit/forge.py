"""Instance generators: random games, partitioning systems, and the
label-cover reduction.

A partitioning system over a ground set of ``n`` elements consists of
``beta`` collections ("rows") of ``h`` blocks each, every block holding
exactly ``k*n/h`` elements and every element lying in exactly ``k`` blocks
of each row. Selecting a whole row therefore costs exactly ``c(k) * n``
under any cost ``c`` with ``c(0) = 0`` (property P1), while a transversal
that picks one block from each of ``h`` distinct rows should cost at least
``(E_{Bin(h, k/h)}[c] - eta) * n`` (property P2). Systems are built by
balanced random assignment and re-drawn until P2 verifies.

The reduction turns a bi-regular label-cover instance into a congestion
game: one player per left vertex, a fresh copy of one partitioning system
per right vertex, and one strategy per left label that collects, for every
neighbouring right vertex, the block indexed by the constraint image of the
label (row) and the player's position in that vertex's neighbour list
(column). A labeling that strongly satisfies every right vertex selects
whole rows everywhere and realises the system cost ``n * |R| * c(k)``.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox

from .errors import ConstructionFailed, InfeasibleParams, InvalidParams
from .game import BasisFunction, GameInstance
from .kernel import binomial_expectation

P2_EXHAUSTIVE_LIMIT = 1_000_000
P2_DEFAULT_SAMPLES = 100_000
_CONSTRUCTION_RETRIES = 100


def _rng(seed: int) -> Generator:
    return Generator(Philox(key=seed))


@dataclass(frozen=True)
class PartitioningSystem:
    """A verified partitioning system plus its verification report.

    ``blocks[j][i]`` is the ``i``-th block of row ``j`` as a sorted tuple of
    0-based elements. ``p2_margin`` is the worst observed slack of P2 (cost
    minus threshold); in ``"sampled"`` mode it is a bound over the sampled
    transversals only, never a claim about all of them.
    """

    n: int
    beta: int
    h: int
    k: int
    eta: float
    blocks: tuple[tuple[tuple[int, ...], ...], ...]
    p1_passed: bool
    p2_margin: float
    p2_mode: str
    p2_choices_checked: int
    n_required: float

    def to_json(self) -> dict:
        return {
            "n": self.n, "beta": self.beta, "h": self.h, "k": self.k,
            "eta": self.eta,
            "blocks": [[list(b) for b in row] for row in self.blocks],
            "p1_passed": self.p1_passed,
            "p2_margin": self.p2_margin,
            "p2_mode": self.p2_mode,
            "p2_choices_checked": self.p2_choices_checked,
            "n_required": self.n_required,
        }

    @classmethod
    def from_json(cls, data: dict) -> "PartitioningSystem":
        return cls(
            n=int(data["n"]), beta=int(data["beta"]), h=int(data["h"]),
            k=int(data["k"]), eta=float(data["eta"]),
            blocks=tuple(tuple(tuple(int(e) for e in b) for b in row)
                         for row in data["blocks"]),
            p1_passed=bool(data["p1_passed"]),
            p2_margin=float(data["p2_margin"]),
            p2_mode=str(data["p2_mode"]),
            p2_choices_checked=int(data["p2_choices_checked"]),
            n_required=float(data["n_required"]),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "PartitioningSystem":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def _balanced_row(n: int, h: int, k: int, rng: Generator) -> list[list[int]]:
    """``h`` blocks of ``k*n/h`` elements, each element in exactly ``k``.

    Samples a random balanced assignment: shuffle ``k*n/h`` copies of each
    block id, chunk them ``k`` per element, then repair duplicate blocks
    within a chunk by conflict-reducing swaps (swaps preserve the exact
    block counts).
    """
    if k == h:
        return [list(range(n)) for _ in range(h)]
    per_block = k * n // h
    slots = np.repeat(np.arange(h), per_block)
    rng.shuffle(slots)
    chunks = slots.reshape(n, k)

    def conflicts(chunk) -> int:
        return k - len(set(chunk.tolist()))

    bad = [e for e in range(n) if conflicts(chunks[e])]
    attempts = 0
    limit = 50 * n * k + 1000
    while bad:
        attempts += 1
        if attempts > limit:
            raise ConstructionFailed(
                "balanced assignment repair did not settle", attempts=attempts)
        e = bad[int(rng.integers(len(bad)))]
        e2 = int(rng.integers(n))
        if e2 == e:
            continue
        j1 = int(rng.integers(k))
        j2 = int(rng.integers(k))
        before = conflicts(chunks[e]) + conflicts(chunks[e2])
        chunks[e, j1], chunks[e2, j2] = chunks[e2, j2], chunks[e, j1]
        after = conflicts(chunks[e]) + conflicts(chunks[e2])
        if after > before:
            chunks[e, j1], chunks[e2, j2] = chunks[e2, j2], chunks[e, j1]
            continue
        bad = [x for x in bad if conflicts(chunks[x])]
        if conflicts(chunks[e2]) and e2 not in bad:
            bad.append(e2)

    blocks: list[list[int]] = [[] for _ in range(h)]
    for e in range(n):
        for block in chunks[e]:
            blocks[int(block)].append(e)
    return blocks


def transversal_cost(system: PartitioningSystem, rows, picks,
                     c_table) -> float:
    """Cost of the transversal picking ``picks[j]`` from each row in ``rows``.

    ``rows`` must name ``h`` distinct rows and ``picks`` one block index per
    row; anything else (e.g. a whole row, or repeated rows) is not a valid
    transversal and is rejected.
    """
    rows = list(rows)
    picks = list(picks)
    if len(rows) != system.h or len(set(rows)) != system.h:
        raise InvalidParams(
            f"a transversal picks from exactly {system.h} distinct rows")
    if len(picks) != system.h:
        raise InvalidParams("one block index per selected row required")
    if any(j < 0 or j >= system.beta for j in rows):
        raise InvalidParams("row index out of range")
    if any(i < 0 or i >= system.h for i in picks):
        raise InvalidParams("block index out of range")
    counts = [0] * system.n
    for j, i in zip(rows, picks):
        for e in system.blocks[j][i]:
            counts[e] += 1
    return sum(c_table[cnt] for cnt in counts)


def _verify_p2(blocks, n: int, beta: int, h: int, k: int, eta: float,
               c_table, mode: str, samples: int, seed: int) -> tuple[float, str, int]:
    threshold = (binomial_expectation(c_table, h, k) - eta) * n
    membership = np.zeros((beta, h, n), dtype=np.int8)
    for j in range(beta):
        for i in range(h):
            membership[j, i, list(blocks[j][i])] = 1
    c_arr = np.asarray(c_table[:h + 1], dtype=float)

    total_choices = math.comb(beta, h) * h ** h
    if mode == "auto":
        mode = "exhaustive" if total_choices <= P2_EXHAUSTIVE_LIMIT else "sampled"
    worst = math.inf
    checked = 0
    if mode == "exhaustive":
        for rows in itertools.combinations(range(beta), h):
            for picks in itertools.product(range(h), repeat=h):
                counts = membership[rows, picks, :].sum(axis=0)
                cost = float(c_arr[counts].sum())
                worst = min(worst, cost - threshold)
                checked += 1
    elif mode == "sampled":
        rng = _rng(seed)
        for _ in range(samples):
            rows = rng.choice(beta, size=h, replace=False)
            picks = rng.integers(h, size=h)
            counts = membership[rows, picks, :].sum(axis=0)
            cost = float(c_arr[counts].sum())
            worst = min(worst, cost - threshold)
            checked += 1
    else:
        raise InvalidParams(f"unknown verification mode {mode!r}")
    return worst, mode, checked


def required_ground_set(c_k: float, beta: int, h: int, eta: float) -> float:
    """Ground-set size above which random construction succeeds w.h.p."""
    return c_k ** 2 / (2.0 * eta ** 2) * (math.log(10.0) + beta * math.log(h + 1.0))


def build_partitioning_system(n: int, beta: int, h: int, k: int, eta: float,
                              basis: BasisFunction, seed: int = 0,
                              mode: str = "auto",
                              samples: int = P2_DEFAULT_SAMPLES) -> PartitioningSystem:
    """Randomised construction with verification, retried up to 100 times.

    P1 holds exactly by construction and is re-checked in integer
    arithmetic. P2 is checked over all transversals when there are at most
    ``10**6`` of them (or ``mode="exhaustive"`` forces it), else over
    ``samples`` seeded draws. The cost is ``c(x) = x * basis.b(x)``. The
    probabilistically sufficient ground-set size is reported alongside, but
    any ``n`` with ``k*n/h`` integral is attempted: at desk scale a failure
    after all retries is informative, and raised as ``ConstructionFailed``
    with the worst margin seen.
    """
    if not (beta >= h >= k >= 1):
        raise InvalidParams(f"need beta >= h >= k >= 1, got ({beta}, {h}, {k})")
    if (k * n) % h != 0 or n <= 0:
        raise InvalidParams(f"k*n/h must be a positive integer, got k={k}, n={n}, h={h}")
    if not (0.0 < eta < 1.0):
        raise InvalidParams(f"eta must be in (0, 1), got {eta}")
    c_table = basis.cost_table(h)
    n_required = required_ground_set(basis.c(k), beta, h, eta)

    worst_overall = -math.inf
    for attempt in range(_CONSTRUCTION_RETRIES):
        rng = _rng(seed + attempt)
        blocks = tuple(
            tuple(tuple(sorted(b)) for b in _balanced_row(n, h, k, rng))
            for _ in range(beta))

        p1 = True
        for row in blocks:
            counts = [0] * n
            for block in row:
                if len(block) != k * n // h:
                    p1 = False
                for e in block:
                    counts[e] += 1
            if any(cnt != k for cnt in counts):
                p1 = False
        if not p1:
            continue

        margin, used_mode, checked = _verify_p2(
            blocks, n, beta, h, k, eta, c_table, mode, samples, seed + attempt)
        worst_overall = max(worst_overall, margin)
        if margin >= 0.0:
            return PartitioningSystem(
                n=n, beta=beta, h=h, k=k, eta=eta, blocks=blocks,
                p1_passed=True, p2_margin=margin, p2_mode=used_mode,
                p2_choices_checked=checked, n_required=n_required)
    raise ConstructionFailed(
        f"no verified system in {_CONSTRUCTION_RETRIES} attempts "
        f"(worst transversal margin {worst_overall:g}; "
        f"guaranteed only for n >= {n_required:.0f})",
        worst_margin=worst_overall, attempts=_CONSTRUCTION_RETRIES)


@dataclass(frozen=True)
class LabelCoverInstance:
    """Bi-regular label cover: ``pi[(v, u)]`` maps left labels to right
    labels for the edge ``(v, u)``; every right vertex has degree ``h``."""

    num_left: int
    num_right: int
    edges: tuple[tuple[int, int], ...]
    h: int
    alpha: int
    beta: int
    pi: dict[tuple[int, int], tuple[int, ...]]

    def __post_init__(self):
        degrees = [0] * self.num_right
        seen = set()
        for v, u in self.edges:
            if not (0 <= v < self.num_left and 0 <= u < self.num_right):
                raise InvalidParams(f"edge ({v}, {u}) out of range")
            if (v, u) in seen:
                raise InvalidParams(f"duplicate edge ({v}, {u})")
            seen.add((v, u))
            degrees[u] += 1
        if any(d != self.h for d in degrees):
            raise InvalidParams(
                f"every right vertex needs degree exactly {self.h}, got {degrees}")
        for e in self.edges:
            table = self.pi.get(e)
            if table is None or len(table) != self.alpha:
                raise InvalidParams(
                    f"edge {e}: constraint map must cover all {self.alpha} left labels")
            if any(not (0 <= j < self.beta) for j in table):
                raise InvalidParams(f"edge {e}: constraint image out of range")

    def neighbours(self, right: int) -> list[int]:
        return sorted(v for v, u in self.edges if u == right)

    def to_json(self) -> dict:
        return {
            "left": self.num_left, "right": self.num_right,
            "edges": [list(e) for e in self.edges],
            "h": self.h, "alpha": self.alpha, "beta": self.beta,
            "pi": {f"{v},{u}": list(t) for (v, u), t in sorted(self.pi.items())},
        }

    @classmethod
    def from_json(cls, data: dict) -> "LabelCoverInstance":
        pi = {}
        for key, table in data["pi"].items():
            v, u = key.split(",")
            pi[(int(v), int(u))] = tuple(int(x) for x in table)
        return cls(
            num_left=int(data["left"]), num_right=int(data["right"]),
            edges=tuple((int(v), int(u)) for v, u in data["edges"]),
            h=int(data["h"]), alpha=int(data["alpha"]), beta=int(data["beta"]),
            pi=pi,
        )

    @classmethod
    def load(cls, path) -> "LabelCoverInstance":
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
            fh.write("\n")


def reduce_label_cover(lc: LabelCoverInstance, ps_params: dict,
                       basis: BasisFunction, seed: int = 0
                       ) -> tuple[GameInstance, PartitioningSystem]:
    """Build the congestion game of a label-cover instance.

    ``ps_params`` carries ``n``, ``k``, ``eta`` and optionally ``beta`` (at
    least the label-cover right alphabet; defaults to it) and ``mode`` for
    the verification; the number of blocks per row is pinned to the
    label-cover degree ``h``. One system is constructed and copied onto
    every right vertex with disjoint resources ``u * n + e``. Player ``v``'s
    strategy for left label ``l`` takes, for each neighbouring right vertex
    ``u``, the block in row ``pi[(v,u)][l]`` and column ``rank of v among
    u's neighbours``. The mapping from label profiles to allocations is the
    identity on indices: strategy ``l`` of player ``v`` is label ``l``.
    """
    beta_ps = int(ps_params.get("beta", lc.beta))
    if beta_ps < lc.beta:
        raise InvalidParams(
            f"partitioning rows ({beta_ps}) must cover the right alphabet ({lc.beta})")
    system = build_partitioning_system(
        n=int(ps_params["n"]), beta=beta_ps, h=lc.h, k=int(ps_params["k"]),
        eta=float(ps_params["eta"]), basis=basis, seed=seed,
        mode=str(ps_params.get("mode", "auto")),
        samples=int(ps_params.get("samples", P2_DEFAULT_SAMPLES)))

    n = system.n
    slots = {}
    for u in range(lc.num_right):
        for rank, v in enumerate(lc.neighbours(u)):
            slots[(v, u)] = rank

    strategies = []
    for v in range(lc.num_left):
        edges_v = [(v, u) for (vv, u) in lc.edges if vv == v]
        player_strategies = []
        seen = set()
        for label in range(lc.alpha):
            resources = []
            for (_, u) in edges_v:
                row = lc.pi[(v, u)][label]
                block = system.blocks[row][slots[(v, u)]]
                resources.extend(u * n + e for e in block)
            strat = tuple(sorted(resources))
            if strat in seen:
                raise InvalidParams(
                    f"left vertex {v}: labels map to identical strategies; "
                    "strategy sets must stay distinct")
            seen.add(strat)
            player_strategies.append(strat)
        strategies.append(tuple(player_strategies))

    num_resources = lc.num_right * n
    instance = GameInstance(
        basis=(basis,),
        coefficients=tuple((1.0,) for _ in range(num_resources)),
        strategies=tuple(strategies))
    return instance, system


def random_instance(num_players: int, num_resources: int, basis,
                    strategy_count_range: tuple[int, int] = (1, 3),
                    strategy_size_range: tuple[int, int] = (1, 2),
                    coeff_range: tuple[float, float] = (0.5, 2.0),
                    seed: int = 0) -> GameInstance:
    """Seeded random game; strategies are distinct and every resource is
    referenced by at least one strategy."""
    if num_players < 1 or num_resources < 1:
        raise InvalidParams("need at least one player and one resource")
    basis = tuple(basis)
    if not basis:
        raise InvalidParams("need at least one basis function")
    lo_cnt, hi_cnt = strategy_count_range
    lo_sz, hi_sz = strategy_size_range
    if lo_cnt < 1 or hi_cnt < lo_cnt or lo_sz < 1 or hi_sz < lo_sz:
        raise InvalidParams("strategy ranges must be nonempty and >= 1")
    lo_sz = min(lo_sz, num_resources)
    hi_sz = min(hi_sz, num_resources)
    available = sum(math.comb(num_resources, s) for s in range(lo_sz, hi_sz + 1))
    if hi_cnt > available:
        raise InfeasibleParams(
            f"cannot pick {hi_cnt} distinct strategies of sizes "
            f"{lo_sz}..{hi_sz} from {num_resources} resources")
    lo_c, hi_c = coeff_range
    if not (0.0 <= lo_c <= hi_c) or hi_c <= 0:
        raise InvalidParams("coefficient range must satisfy 0 <= lo <= hi, hi > 0")

    rng = _rng(seed)
    for _ in range(1000):
        strategies = []
        for _i in range(num_players):
            count = int(rng.integers(lo_cnt, hi_cnt + 1))
            chosen: set[tuple[int, ...]] = set()
            while len(chosen) < count:
                size = int(rng.integers(lo_sz, hi_sz + 1))
                strat = tuple(sorted(rng.choice(num_resources, size=size,
                                                replace=False).tolist()))
                chosen.add(strat)
            strategies.append(tuple(sorted(chosen)))
        referenced = {r for player in strategies for strat in player for r in strat}
        if len(referenced) == num_resources:
            break
    else:
        raise InfeasibleParams(
            "could not cover every resource with the requested strategy shape")

    coefficients = []
    for _r in range(num_resources):
        coeffs = [float(rng.uniform(lo_c, hi_c)) for _ in basis]
        if not any(a > 1e-12 for a in coeffs):
            coeffs[int(rng.integers(len(coeffs)))] = (lo_c + hi_c) / 2.0
        coefficients.append(tuple(coeffs))

    return GameInstance(basis=basis, coefficients=tuple(coefficients),
                        strategies=tuple(strategies))
