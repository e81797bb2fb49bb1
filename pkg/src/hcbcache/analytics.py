"""
Closed-form subpacketization, DoF and gap computations, plus memory planners.

All counts are exact Python integers and all ratios are :class:`Fraction`.
Floating point appears only in the Stirling-type bound diagnostics.

Notation used below (``p`` is a :class:`~hcbcache.placement.DerivedParams`):

* ``delta_hcb`` -- packets per requested subfile in the hypercube scheme,
* ``delta_nma`` -- packets per requested subfile in the baseline one-shot
  scheme built on unstructured (all-subsets) placement, abbreviated NMA,
* ``f_hcb``, ``f_nma`` -- packets per file (subfiles per file times the above),
* ``G = f_hcb / f_nma`` -- multiplicative subpacketization gap.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from math import comb, factorial
from typing import Iterable, Optional, Sequence, TextIO

from .placement import (DerivedParams, InvalidConfigError, NetworkConfig, Violation,
                        check_config, validate_config)

log = logging.getLogger(__name__)


# --------------------------------------------------------------------------
# counting identities
# --------------------------------------------------------------------------

def delta_hcb(p: DerivedParams) -> int:
    d, delta, t = p.D_R, p.delta, p.t_R
    return (comb(d - 2, delta - 1) * comb(d - 1, delta) ** (t - 1)
            * factorial(delta) ** t // delta * factorial(t - 1))


def delta_nma(p: DerivedParams) -> int:
    return comb(p.K_R - p.t_R - 1, p.t_T - 1) * factorial(p.t_T - 1) * factorial(p.t_R)


def step_count(p: DerivedParams) -> int:
    """Communication steps: ``D_T^t_T * C(D_R, delta+1)^t_R * |circular perms|``."""
    dd = p.delta + 1
    return (p.D_T ** p.t_T * comb(p.D_R, dd) ** p.t_R
            * factorial(dd) ** p.t_R * factorial(p.t_R - 1) // dd)


def total_packets(p: DerivedParams) -> int:
    """Packets delivered to all receivers, closed form in ``D_R, delta, t_R``."""
    d = p.D_R
    return (p.K_R * p.D_T ** p.t_T * factorial(d - 1) * factorial(d) ** (p.t_R - 1)
            * factorial(p.t_R - 1) // factorial(d - p.delta - 1) ** p.t_R)


def receiver_need(p: DerivedParams) -> int:
    """Packets one receiver is missing: uncached subfiles times ``delta_hcb``."""
    return p.D_T ** p.t_T * p.D_R ** (p.t_R - 1) * (p.D_R - 1) * delta_hcb(p)


def receiver_delivered(p: DerivedParams) -> int:
    """Packets one receiver is the target of, counted over the step structure."""
    dd = p.delta + 1
    return (p.D_T ** p.t_T * comb(p.D_R - 1, p.delta) * comb(p.D_R, dd) ** (p.t_R - 1)
            * factorial(dd) ** p.t_R * factorial(p.t_R - 1) // dd)


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SubpacketizationReport:
    delta_hcb: int
    delta_nma: int
    f_hcb: int
    f_nma: int
    G: Fraction
    steps: int
    packets_total: int
    dof: Fraction


def subpacketization(p: DerivedParams) -> SubpacketizationReport:
    d_h, d_n = delta_hcb(p), delta_nma(p)
    f_h = p.subfiles_per_file * d_h
    f_n = comb(p.K_T, p.t_T) * comb(p.K_R, p.t_R) * d_n
    steps = step_count(p)
    packets = total_packets(p)
    return SubpacketizationReport(
        delta_hcb=d_h, delta_nma=d_n, f_hcb=f_h, f_nma=f_n, G=Fraction(f_h, f_n),
        steps=steps, packets_total=packets, dof=Fraction(packets, steps))


def lambda_sequence(d: int, t: int, delta: int) -> tuple[Fraction, ...]:
    """Factors ``lambda_0..lambda_{t-1}`` whose product is ``delta_nma/delta_hcb``.

    ``lambda_k = prod_{i=k*delta}^{(k+1)*delta-1} ((d-1)t - i) / prod_{i<delta} (d-1-i)``.
    """
    den = math.prod(d - 1 - i for i in range(delta))
    return tuple(
        Fraction(math.prod((d - 1) * t - i for i in range(k * delta, (k + 1) * delta)), den)
        for k in range(t))


def _ratio_pow(num: float, den: float, exp: float) -> float:
    # (num/den)**exp with the 0/0-style limit (x/0)**0 == 1 at d == delta + 1
    if exp == 0:
        return 1.0
    return (num / den) ** exp


def bound_constants(d: int, delta: int) -> dict:
    """Constants of both forms of the Stirling bound on ``G(d, t, delta)``.

    ``c0_closed``/``c1_closed`` are the constants of the compact closed form;
    ``c0``..``c4`` are those of the step-by-step derivation, whose bound
    prefactor is ``c0 * e^2 / c1`` with base ``c4``.
    """
    e = math.e
    fall = factorial(d - 1) / factorial(d - delta - 1)
    lead = factorial(d - 2) / factorial(d - delta - 1)
    root = math.sqrt((d - 1) / delta)
    c0_closed = lead * e ** 6 / (root * fall * (2 * math.pi / (d - 1)) ** 1.5)
    c1_closed = (fall * (e / (d - 1)) ** delta * (d / (d - 1)) ** (-(delta + 1) * (d - 1))
                 * _ratio_pow(d - 1, d - delta - 1, -(d - delta - 1)))
    c0 = lead / (root * (2 * math.pi / (d - 1)) ** 1.5 * e ** -4)
    c1 = fall
    c2 = (d / (d - 1)) ** ((d - 1) * (delta + 1))
    c3 = _ratio_pow(d - 1, d - delta - 1, d - delta - 1)
    c4 = c1 * e ** delta / (c2 * c3 * (d - 1) ** delta)
    return dict(c0_closed=c0_closed, c1_closed=c1_closed, c0=c0, c1=c1, c2=c2, c3=c3, c4=c4)


def closed_form_bound(d: int, t: int, delta: int) -> float:
    c = bound_constants(d, delta)
    return c["c0_closed"] * (c["c1_closed"] / t) ** t / t ** ((delta - 1) * t - 1)


def stepwise_bound(d: int, t: int, delta: int) -> float:
    c = bound_constants(d, delta)
    return c["c0"] * math.e ** 2 / c["c1"] * (c["c4"] / t) ** t / t ** ((delta - 1) * t - 1)


@dataclass(frozen=True)
class GapBoundReport:
    G: Fraction
    ratio_nma_hcb: Fraction
    lambdas: tuple[Fraction, ...]
    symmetric: bool
    closed_form_bound: Optional[float] = None
    stepwise_bound: Optional[float] = None
    c4: Optional[float] = None
    flags: dict = field(default_factory=dict)

    @property
    def lambda_min(self) -> Fraction:
        return min(self.lambdas)


def gap_analysis(p: DerivedParams) -> GapBoundReport:
    """Gap ``G``, the lambda factorisation and (for ``D_T == D_R``) the bounds.

    Bound comparisons are reported in ``flags`` and never asserted; the
    derivation only claims them for ``t >= c4``.
    """
    rep = subpacketization(p)
    lams = lambda_sequence(p.D_R, p.t_R, p.delta)
    flags = {
        "G_le_1": rep.G <= 1,
        "G_lt_1": rep.G < 1,
        "lambda_decreasing": all(a > b for a, b in zip(lams, lams[1:])),
        "lambda_last_ge_1": lams[-1] >= 1,
        "lambda_product_matches": math.prod(lams) == Fraction(rep.delta_nma, rep.delta_hcb),
    }
    symmetric = p.D_T == p.D_R
    if not symmetric:
        return GapBoundReport(rep.G, Fraction(rep.delta_nma, rep.delta_hcb), lams,
                              False, flags=flags)
    d, t, delta = p.D_R, p.t_R, p.delta
    cf, sw = closed_form_bound(d, t, delta), stepwise_bound(d, t, delta)
    c4 = bound_constants(d, delta)["c4"]
    g = float(rep.G)
    flags.update(G_le_closed_form_bound=g <= cf, G_le_stepwise_bound=g <= sw,
                 bound_regime=t >= c4)
    return GapBoundReport(rep.G, Fraction(rep.delta_nma, rep.delta_hcb), lams, True,
                          cf, sw, c4, flags)


# --------------------------------------------------------------------------
# symmetric grid helper and sweep CSV
# --------------------------------------------------------------------------

def grid_config(d: int, t: int, delta: int) -> NetworkConfig:
    """Config with ``D_T = D_R = d``, ``t_R = t``, ``t_T = delta*t`` (``N = d``, ``M = 1``)."""
    return NetworkConfig(K_T=delta * d * t, K_R=d * t, M_T=1, M_R=1, N=d)


def G_of(d: int, t: int, delta: int) -> Fraction:
    return subpacketization(validate_config(grid_config(d, t, delta))).G


SWEEP_COLUMNS = ("K_T", "K_R", "M_T", "M_R", "N", "t_T", "t_R", "delta", "D_T", "D_R",
                 "delta_hcb", "delta_nma", "f_hcb", "f_nma", "G", "steps", "dof",
                 "lambda_min", "bound_closed_form", "bound_stepwise")


def sweep_row(p: DerivedParams) -> dict:
    rep = subpacketization(p)
    gap = gap_analysis(p)
    c = p.config
    return {
        "K_T": c.K_T, "K_R": c.K_R, "M_T": str(c.M_T), "M_R": str(c.M_R), "N": c.N,
        "t_T": p.t_T, "t_R": p.t_R, "delta": p.delta, "D_T": p.D_T, "D_R": p.D_R,
        "delta_hcb": rep.delta_hcb, "delta_nma": rep.delta_nma,
        "f_hcb": rep.f_hcb, "f_nma": rep.f_nma, "G": str(rep.G),
        "steps": rep.steps, "dof": str(rep.dof), "lambda_min": str(gap.lambda_min),
        "bound_closed_form": "" if gap.closed_form_bound is None else repr(gap.closed_form_bound),
        "bound_stepwise": "" if gap.stepwise_bound is None else repr(gap.stepwise_bound),
    }


def sweep(configs: Iterable[NetworkConfig]) -> list[dict]:
    """Sweep rows for every valid config; invalid ones are logged and skipped."""
    rows = []
    for cfg in configs:
        try:
            p = validate_config(cfg)
        except InvalidConfigError as exc:
            log.warning("skipping %s: %s", cfg, exc)
            continue
        rows.append(sweep_row(p))
    return rows


def grid_sweep(ds: Sequence[int], ts: Sequence[int], deltas: Sequence[int]) -> list[dict]:
    return sweep(grid_config(d, t, dl) for dl in deltas for d in ds for t in ts)


def write_sweep_csv(rows: Iterable[dict], fp: TextIO) -> None:
    w = csv.DictWriter(fp, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow(r)


# --------------------------------------------------------------------------
# memory sharing and memory capping
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SharePartition:
    """One memory/file partition of a memory-sharing plan.

    ``weight`` is the file fraction; ``tx_memory``/``rx_memory`` are the
    fractions of each transmitter/receiver memory assigned to the partition.
    ``scheme`` is ``"hypercube"`` when the partition runs this package's
    scheme, ``"shared-link"`` for the shared-link coded caching partition
    and ``"external"`` when receivers cache nothing in it.
    """

    weight: Fraction
    tx_memory: Fraction
    rx_memory: Fraction
    t_T: int
    t_R: int
    scheme: str
    params: Optional[DerivedParams]
    subpacketization: Optional[int]

    @property
    def dof(self) -> int:
        return self.t_T + self.t_R

    @property
    def delta(self) -> Optional[Fraction]:
        return Fraction(self.t_T, self.t_R) if self.t_R else None


@dataclass(frozen=True)
class MemorySharePlan:
    case: str
    partitions: tuple[SharePartition, ...]

    @property
    def p(self) -> Fraction:
        return self.partitions[0].weight

    @property
    def dof(self) -> Fraction:
        return sum((q.weight * q.dof for q in self.partitions), Fraction(0))

    @property
    def subpacketization(self) -> Optional[int]:
        fs = [q.subpacketization for q in self.partitions]
        return None if any(f is None for f in fs) else sum(fs)


def _corners(t_T: Fraction, t_R: Fraction) -> list[tuple[Fraction, int, int]]:
    """Integer (t_T', t_R') points and weights whose weighted mean is (t_T, t_R)."""
    a, b = math.floor(t_T), math.floor(t_R)
    x, y = t_T - a, t_R - b
    if x >= y:
        pts = [(1 - x, a, b), (x - y, a + 1, b), (y, a + 1, b + 1)]
    else:
        pts = [(1 - y, a, b), (y - x, a, b + 1), (x, a + 1, b + 1)]
    return [(w, tt, tr) for w, tt, tr in pts if w > 0]


def _split_delta(t_T: int, t_R: int) -> tuple[str, list[tuple[Fraction, int]]]:
    """Two (weight, t_T') partitions with integral delta, same ``t_R``."""
    delta = Fraction(t_T, t_R)
    if delta < 1:
        case, lo, hi = "case-1", 1, t_R
    else:
        case, lo, hi = "case-2", math.floor(delta) * t_R, math.ceil(delta) * t_R
    p = Fraction(hi - t_T, hi - lo)
    return case, [(w, tt) for w, tt in ((p, lo), (1 - p, hi)) if w > 0]


def _partition(cfg: NetworkConfig, weight: Fraction, t_T: int, t_R: int,
               kind: Optional[str] = None) -> SharePartition:
    tx_mem = weight * t_T / cfg.t_T
    rx_mem = weight * t_R / cfg.t_R
    params = None
    f = None
    if t_R == 0:
        scheme = "external"
    elif kind == "shared-link":
        scheme = kind
    else:
        scheme = "hypercube"
        sub = NetworkConfig(cfg.K_T, cfg.K_R, Fraction(t_T * cfg.N, cfg.K_T),
                            Fraction(t_R * cfg.N, cfg.K_R), cfg.N)
        if not check_config(sub):
            params = validate_config(sub)
            f = subpacketization(params).f_hcb
    return SharePartition(weight, tx_mem, rx_mem, t_T, t_R, scheme, params, f)


def plan_memory_sharing(cfg: NetworkConfig) -> MemorySharePlan:
    """Split memories and files so every partition has integral parameters.

    * integral ``t_T, t_R`` and ``delta``: a single partition;
    * integral ``t`` values, fractional ``delta < 1``: a shared-link partition
      with ``t_T' = 1`` plus a ``delta = 1`` partition;
    * integral ``t`` values, ``q < delta < q+1``: partitions with
      ``t_T' = q*t_R`` and ``t_T'' = (q+1)*t_R``;
    * fractional ``t_T`` or ``t_R``: split over the integer lattice points of
      the enclosing cell (two or three partitions), each then refined as
      above when its own ``delta`` is fractional.

    The combined DoF equals ``t_T + t_R`` exactly.
    """
    t_T, t_R = cfg.t_T, cfg.t_R
    if t_T < 1:
        raise InvalidConfigError([Violation.LIBRARY_NOT_COVERED])
    if t_T.denominator == 1 and t_R.denominator == 1:
        if Fraction(t_T, t_R).denominator == 1:
            return MemorySharePlan("integral", (_partition(cfg, Fraction(1), int(t_T), int(t_R)),))
        case, parts = _split_delta(int(t_T), int(t_R))
        out = []
        for w, tt in parts:
            kind = "shared-link" if case == "case-1" and tt == 1 else None
            out.append(_partition(cfg, w, tt, int(t_R), kind))
        return MemorySharePlan(case, tuple(out))
    out = []
    for w, tt, tr in _corners(t_T, t_R):
        if tr == 0 or Fraction(tt, tr).denominator == 1:
            out.append(_partition(cfg, w, tt, tr))
            continue
        case, parts = _split_delta(tt, tr)
        for w2, tt2 in parts:
            kind = "shared-link" if case == "case-1" and tt2 == 1 else None
            out.append(_partition(cfg, w * w2, tt2, tr, kind))
    return MemorySharePlan("non-integer-t", tuple(out))


@dataclass(frozen=True)
class MemoryCap:
    """Result of :func:`cap_excess_memory`.

    ``params`` is set when the capped config is valid for the scheme; when no
    integral capped config exists, ``config`` holds the first candidate (with
    rational memories) and ``plan`` its memory-sharing plan.
    """

    config: NetworkConfig
    changed: bool
    params: Optional[DerivedParams] = None
    plan: Optional[MemorySharePlan] = None


def cap_excess_memory(cfg: NetworkConfig) -> MemoryCap:
    """Shrink memories so that ``t_T' + t_R' = K_R`` when ``t_T + t_R > K_R``.

    Candidates ``(t_T', t_R')`` on ``t_T' + t_R' = K_R`` with ``t_T' <= t_T``
    and ``t_R' <= t_R`` are tried with receiver memory reduced first (largest
    ``t_T'`` first); the first one passing validation wins.
    """
    if cfg.t_T + cfg.t_R <= cfg.K_R:
        params = None if check_config(cfg) else validate_config(cfg)
        return MemoryCap(cfg, False, params)
    hi = min(math.floor(cfg.t_T), cfg.K_R - 1)
    candidates = []
    for tt in range(hi, 0, -1):
        tr = cfg.K_R - tt
        if tr > cfg.t_R:
            break
        candidates.append(NetworkConfig(cfg.K_T, cfg.K_R, Fraction(tt * cfg.N, cfg.K_T),
                                        Fraction(tr * cfg.N, cfg.K_R), cfg.N))
    for cand in candidates:
        if not check_config(cand):
            return MemoryCap(cand, True, validate_config(cand))
    if candidates:
        fallback = candidates[0]
    else:
        # t_T' must absorb a fractional part; keep M_T and shrink only M_R
        fallback = NetworkConfig(cfg.K_T, cfg.K_R, cfg.M_T,
                                 (cfg.K_R - cfg.t_T) * cfg.N / cfg.K_R, cfg.N)
    plan = plan_memory_sharing(fallback) if fallback.M_R > 0 else None
    return MemoryCap(fallback, True, None, plan)
