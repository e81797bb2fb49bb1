"""
One-shot linear zero-forcing over a flat-fading MIMO channel.

For the packet at offset ``l`` of a step, the transmitters ``T(l)`` choose a
beamforming vector ``alpha`` that delivers unit gain to the target receiver
and nulls the packet at the ``t_T - 1`` receivers in ``pi_ddot``::

    H[[target, *pi_ddot]][:, T(l)] @ alpha = e_0

The remaining ``t_R`` receivers of the step hold the packet in cache and
subtract it.  Everything is vectorised across steps: a batch of ``B`` steps
gives ``B * L`` square systems solved in one call.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from typing import Optional, TextIO

import numpy as np

from .combinatorics import InvalidInputError
from .placement import DerivedParams

log = logging.getLogger(__name__)

DEFAULT_COND_THRESHOLD = 1e8
DEFAULT_TOLERANCE = 1e-9
DEFAULT_CHUNK = 8192


class SingularChannelError(RuntimeError):
    """A zero-forcing system is (numerically) singular."""

    def __init__(self, step: int, offset: int, condition: float):
        self.step, self.offset, self.condition = step, offset, condition
        super().__init__(f"step {step}, packet {offset}: zero-forcing system has "
                         f"condition number {condition:.3g}")


@dataclass(frozen=True)
class ChannelMatrix:
    """``h[r, k]`` is the gain from transmitter ``k`` to receiver ``r``."""

    h: np.ndarray
    seed: Optional[int] = None
    model: str = "gaussian"

    @property
    def shape(self):
        return self.h.shape


def sample_channel(p: DerivedParams, seed: int, model: str = "gaussian") -> ChannelMatrix:
    """Draw a ``K_R x K_T`` channel.

    ``gaussian`` gives i.i.d. CN(0, 1) entries.  ``rank-one`` is a degenerate
    outer product used to exercise singular-system handling.
    """
    rng = np.random.default_rng(seed)

    def cn(*shape):
        return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)

    if model == "gaussian":
        h = cn(p.K_R, p.K_T)
    elif model == "rank-one":
        h = np.outer(cn(p.K_R), cn(p.K_T))
    else:
        raise InvalidInputError(f"unknown channel model {model!r}")
    return ChannelMatrix(h, seed, model)


def _channel_array(H) -> np.ndarray:
    return H.h if isinstance(H, ChannelMatrix) else np.asarray(H)


def _zf_rows(order: np.ndarray, t_R: int) -> np.ndarray:
    """Receivers constrained by the precoder: target then ``pi_ddot``."""
    return np.concatenate([order[..., :1], order[..., t_R + 1:]], axis=-1)


@dataclass(frozen=True)
class PrecoderSet:
    """Precoders for a batch of steps.

    Attributes
    ----------
    tx : (B, L, t_T) int array
        Transmitters serving each packet.
    alpha : (B, L, t_T) complex array
        Beamforming coefficients aligned with ``tx``.
    condition : (B, L) float array
        Condition number of each zero-forcing system.
    """

    tx: np.ndarray
    alpha: np.ndarray
    condition: np.ndarray


def solve_precoders(table: dict, H, t_R: int,
                    cond_threshold: float = DEFAULT_COND_THRESHOLD,
                    step_ids: Optional[np.ndarray] = None) -> PrecoderSet:
    """Solve every zero-forcing system of a packet table (see ``Schedule.packet_table``)."""
    h = _channel_array(H)
    tx, order = table["tx"], table["order"]
    rows = _zf_rows(order, t_R)                                   # (B, L, t_T)
    A = h[rows[..., :, None], tx[..., None, :]]                   # (B, L, t_T, t_T)
    cond = np.linalg.cond(A)
    bad = ~(cond < cond_threshold)
    if bad.any():
        b, l = np.argwhere(bad)[0]
        sid = int(step_ids[b]) if step_ids is not None else int(b)
        raise SingularChannelError(sid, int(l), float(cond[b, l]))
    rhs = np.zeros(A.shape[:-1] + (1,), dtype=complex)
    rhs[..., 0, 0] = 1.0
    alpha = np.linalg.solve(A, rhs)[..., 0]
    return PrecoderSet(tx, alpha, cond)


def solve_step_precoders(step, H, p: DerivedParams,
                         cond_threshold: float = DEFAULT_COND_THRESHOLD) -> PrecoderSet:
    """Precoders for a single :class:`~hcbcache.scheduler.DeliveryStep`."""
    tx = np.array([[pk.subfile.tx_set for pk in step.packets]], dtype=np.int64)
    order = np.array([[pk.order for pk in step.packets]], dtype=np.int64)
    return solve_precoders(dict(tx=tx, order=order), H, p.t_R, cond_threshold,
                           np.array([step.index]))


@dataclass(frozen=True)
class StepSimReport:
    """Outcome of simulating a batch of steps.

    ``residual[b, k]`` is ``|decoded - sent|`` for the receiver at position
    ``k`` of step ``b``; ``leak[b, l, k]`` is the magnitude of packet ``l`` at
    receiver ``k`` where it must be nulled (zero elsewhere).
    """

    residual: np.ndarray
    leak: np.ndarray
    condition: np.ndarray
    threshold: float
    step_ids: np.ndarray = field(default=None)

    @property
    def max_residual(self) -> float:
        return float(self.residual.max(initial=0.0))

    @property
    def max_leak(self) -> float:
        return float(self.leak.max(initial=0.0))

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.threshold

    @property
    def decoded(self) -> np.ndarray:
        return self.residual <= self.threshold


def simulate_table(table: dict, H, t_R: int, precoders: PrecoderSet,
                   noise_variance: float = 0.0, seed: Optional[int] = None,
                   tolerance: float = DEFAULT_TOLERANCE,
                   step_ids: Optional[np.ndarray] = None) -> StepSimReport:
    """Transmit one symbol per packet and let every receiver decode.

    Each receiver takes its received sample, removes the contributions of the
    packets it caches (it knows their symbols and the effective gains) and
    reads the remainder as its desired symbol.
    """
    h = _channel_array(H)
    rng = np.random.default_rng(seed)
    order = table["order"]
    B, L = order.shape[:2]
    K_T = h.shape[1]
    pi = order[:, 0, :]                                           # receivers, step order
    sym = np.exp(2j * np.pi * rng.random((B, L)))

    # transmit vectors s[b, k] = sum_l alpha[b, l, i] * sym[b, l] on tx[b, l, i]
    s = np.zeros((B, K_T), dtype=complex)
    bidx = np.broadcast_to(np.arange(B)[:, None, None], precoders.tx.shape)
    np.add.at(s, (bidx, precoders.tx), precoders.alpha * sym[:, :, None])
    y = np.einsum("bkt,bt->bk", h[pi], s)                          # (B, L)
    if noise_variance > 0:
        y = y + np.sqrt(noise_variance / 2) * (rng.standard_normal(y.shape)
                                               + 1j * rng.standard_normal(y.shape))

    # effective gain E[b, l, k] of packet l at receiver pi[b, k]
    hp = h[pi[:, None, :, None], precoders.tx[:, :, None, :]]     # (B, L, L, t_T)
    E = np.einsum("blkt,blt->blk", hp, precoders.alpha)
    off = (np.arange(L)[None, :] - np.arange(L)[:, None]) % L     # off[l, k] = (k - l) mod L
    desired = off == 0
    cached = (off >= 1) & (off <= t_R)
    nulled = off > t_R
    interference = np.where(cached[None], E * sym[:, :, None], 0).sum(axis=1)
    decoded = y - interference
    wanted = sym @ desired.astype(int)
    residual = np.abs(decoded - wanted)
    leak = np.where(nulled[None], np.abs(E), 0.0)
    threshold = tolerance + 6.0 * np.sqrt(noise_variance)
    return StepSimReport(residual, leak, precoders.condition, threshold, step_ids)


def simulate_step(step, H, p: DerivedParams, precoders: Optional[PrecoderSet] = None,
                  noise_variance: float = 0.0, seed: Optional[int] = None,
                  tolerance: float = DEFAULT_TOLERANCE) -> StepSimReport:
    tx = np.array([[pk.subfile.tx_set for pk in step.packets]], dtype=np.int64)
    order = np.array([[pk.order for pk in step.packets]], dtype=np.int64)
    table = dict(tx=tx, order=order)
    if precoders is None:
        precoders = solve_precoders(table, H, p.t_R, step_ids=np.array([step.index]))
    return simulate_table(table, H, p.t_R, precoders, noise_variance, seed, tolerance,
                          np.array([step.index]))


@dataclass(frozen=True)
class DecodabilityReport:
    ok: bool
    steps: int
    packets: int
    decoded_packets: int
    max_residual: float
    max_leak: float
    max_condition: float
    threshold: float
    failures: tuple[tuple[int, int], ...]
    step_ids: np.ndarray = field(repr=False, default=None)
    step_residual: np.ndarray = field(repr=False, default=None)
    step_ok: np.ndarray = field(repr=False, default=None)

    def summary(self) -> dict:
        keys = ("ok", "steps", "packets", "decoded_packets", "max_residual", "max_leak",
                "max_condition", "threshold")
        out = {k: getattr(self, k) for k in keys}
        out["failures"] = [list(f) for f in self.failures]
        return out


def verify_schedule_decodable(schedule, H, tolerance: float = DEFAULT_TOLERANCE,
                              cond_threshold: float = DEFAULT_COND_THRESHOLD,
                              noise_variance: float = 0.0, seed: Optional[int] = None,
                              chunk: int = DEFAULT_CHUNK,
                              max_failures: int = 100) -> DecodabilityReport:
    """Simulate every step and check each receiver recovers its packet.

    Raises :class:`SingularChannelError` if any zero-forcing system is
    ill-conditioned.  ``failures`` lists ``(step, receiver)`` pairs that did
    not decode (capped at ``max_failures``).
    """
    p = schedule.params
    rng = np.random.default_rng(seed)
    S, L = len(schedule), p.step_size
    worst_res = worst_leak = worst_cond = 0.0
    n_ok = 0
    failures = []
    step_res = np.zeros(S)
    step_ok = np.zeros(S, dtype=bool)
    threshold = tolerance + 6.0 * np.sqrt(noise_variance)
    for start in range(0, S, chunk):
        sl = slice(start, min(S, start + chunk))
        table = schedule.packet_table(sl)
        ids = schedule.step_ids[sl]
        pre = solve_precoders(table, H, p.t_R, cond_threshold, ids)
        rep = simulate_table(table, H, p.t_R, pre, noise_variance,
                             int(rng.integers(2 ** 63)), tolerance, ids)
        worst_res = max(worst_res, rep.max_residual)
        worst_leak = max(worst_leak, rep.max_leak)
        worst_cond = max(worst_cond, float(pre.condition.max()))
        ok = rep.decoded
        n_ok += int(ok.sum())
        step_res[sl] = rep.residual.max(axis=1)
        step_ok[sl] = ok.all(axis=1) & (rep.leak.max(axis=(1, 2)) <= threshold)
        if len(failures) < max_failures:
            for b, k in np.argwhere(~ok)[:max_failures - len(failures)]:
                failures.append((int(ids[b]), int(table["order"][b, 0, k])))
    total = S * L
    return DecodabilityReport(
        ok=n_ok == total and worst_leak <= threshold, steps=S, packets=total,
        decoded_packets=n_ok, max_residual=worst_res, max_leak=worst_leak,
        max_condition=worst_cond, threshold=threshold, failures=tuple(failures),
        step_ids=np.asarray(schedule.step_ids), step_residual=step_res, step_ok=step_ok)


STEP_COLUMNS = ("step", "max_residual", "ok")


def write_step_csv(r: DecodabilityReport, fp: TextIO) -> None:
    """Per-step pass/fail with the worst receiver residual of the step."""
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(STEP_COLUMNS)
    for sid, res, ok in zip(r.step_ids, r.step_residual, r.step_ok):
        w.writerow([int(sid), repr(float(res)), int(ok)])


REPORT_COLUMNS = ("seed", "steps", "packets", "decoded_packets", "max_residual",
                  "max_leak", "max_condition", "threshold", "ok")


def write_report_csv(rows: list[tuple[int, DecodabilityReport]], fp: TextIO) -> None:
    """One line per ``(seed, report)``; floats in ``repr`` form."""
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for seed, r in rows:
        w.writerow([seed, r.steps, r.packets, r.decoded_packets, repr(r.max_residual),
                    repr(r.max_leak), repr(r.max_condition), repr(r.threshold), int(r.ok)])
