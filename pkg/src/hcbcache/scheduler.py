"""
Delivery-phase construction: packet splitting, shift maps, step grouping and
exact-cover verification.

A *step* is fixed by a base transmitter tuple ``T`` (one transmitter per
transmitter dimension), a receiver family ``R`` (``delta+1`` receivers from
every receiver dimension) and a canonical circular hypercube permutation
``pi`` of the ``L = t_T + t_R`` receivers of ``R``.  Packet ``l`` of the step
is the rotation of ``pi`` that starts at offset ``l``::

    target  = pi(l)
    pi_dot  = pi[l+1 .. l+t_R]          (receivers that cancel it from cache)
    pi_ddot = pi[l+t_R+1 .. l+L-1]      (receivers it is zero-forced at)
    tx_set  = T(l)                      (shifted base tuple)

with 0-based wrap-around slicing.  The demanded side is enumerated
independently, subfile by subfile, from hypercube permutations pinned at the
requesting receiver; :func:`verify_exact_cover` compares the two.

Schedules are stored as integer arrays; :class:`DeliveryStep` and
:class:`PacketId` objects are built on access.
"""

from __future__ import annotations

import enum
import itertools
import json
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, Optional, Sequence, TextIO

import numpy as np

from . import analytics
from .combinatorics import (DimensionPartition, InvalidInputError, cyclic_slice,
                            enumerate_circular_hypercube_permutations,
                            iter_hypercube_permutations, k_subsets)
from .placement import DerivedParams, SubfileId, rx_dimensions, tx_dimensions


# --------------------------------------------------------------------------
# demands
# --------------------------------------------------------------------------

def check_demand(d: Sequence[int], p: DerivedParams) -> tuple[int, ...]:
    d = tuple(int(x) for x in d)
    if len(d) != p.K_R:
        raise InvalidInputError(f"demand has length {len(d)}, expected K_R={p.K_R}")
    if any(not 0 <= x < p.N for x in d):
        raise InvalidInputError(f"demanded file indices must lie in 0..{p.N - 1}")
    return d


def distinct_demand(p: DerivedParams) -> tuple[int, ...]:
    """``d_j = j mod N``."""
    return tuple(j % p.N for j in range(p.K_R))


def random_demand(p: DerivedParams, seed: int) -> tuple[int, ...]:
    rng = np.random.default_rng(seed)
    return tuple(int(x) for x in rng.integers(0, p.N, size=p.K_R))


# --------------------------------------------------------------------------
# value types
# --------------------------------------------------------------------------

class ReceiverRole(enum.Enum):
    DESIRED = 0
    CACHE_CANCEL = 1
    ZERO_FORCED = 2


@dataclass(frozen=True, order=True)
class PacketId:
    """Packet ``W_{file, T, pi_dot, pi_ddot}`` destined to ``target``."""

    subfile: SubfileId
    pi_dot: tuple[int, ...]
    pi_ddot: tuple[int, ...]
    target: int

    @property
    def order(self) -> tuple[int, ...]:
        """The full receiver ordering ``[target, pi_dot..., pi_ddot...]``."""
        return (self.target,) + self.pi_dot + self.pi_ddot

    def key(self) -> tuple:
        return (self.subfile.file,) + self.subfile.tx_set + self.order


@dataclass(frozen=True)
class DeliveryStep:
    index: int
    base_tx: tuple[int, ...]
    rx_family: tuple[tuple[int, ...], ...]
    pi: tuple[int, ...]
    packets: tuple[PacketId, ...]

    @property
    def receivers(self) -> tuple[int, ...]:
        return self.pi

    @property
    def active_tx(self) -> tuple[int, ...]:
        return tuple(sorted({i for pk in self.packets for i in pk.subfile.tx_set}))


# --------------------------------------------------------------------------
# shift maps and roles
# --------------------------------------------------------------------------

def shift_mask(t_T: int, t_R: int) -> np.ndarray:
    """Boolean ``(L, t_T)`` array: which transmitter dimensions advance at offset ``l``."""
    L = t_T + t_R
    mask = np.zeros((L, t_T), dtype=bool)
    for l in range(1, L):
        if l <= t_T:
            mask[l, :l] = True
        else:
            mask[l, l - t_T:] = True
    return mask


def shift_tx(base: Sequence[int], l: int, p: DerivedParams) -> tuple[int, ...]:
    """``T(l)``: advance the within-dimension index of selected dimensions by one."""
    L = p.step_size
    if not 0 <= l < L:
        raise InvalidInputError(f"offset {l} outside 0..{L - 1}")
    if len(base) != p.t_T or any(tau // p.D_T != i for i, tau in enumerate(base)):
        raise InvalidInputError("base must hold one transmitter per dimension, in order")
    mask = shift_mask(p.t_T, p.t_R)[l]
    return tuple(i * p.D_T + (tau - i * p.D_T + int(m)) % p.D_T
                 for i, (tau, m) in enumerate(zip(base, mask)))


def role_of_offset(k: int, l: int, t_T: int, t_R: int) -> ReceiverRole:
    """Role of the receiver at position ``k`` for the packet at offset ``l``."""
    off = (k - l) % (t_T + t_R)
    if off == 0:
        return ReceiverRole.DESIRED
    if off <= t_R:
        return ReceiverRole.CACHE_CANCEL
    return ReceiverRole.ZERO_FORCED


def role_matrix(t_T: int, t_R: int) -> np.ndarray:
    """``roles[k, l]`` as :class:`ReceiverRole` values (int codes)."""
    L = t_T + t_R
    return np.array([[role_of_offset(k, l, t_T, t_R).value for l in range(L)]
                     for k in range(L)], dtype=np.int8)


def packet_role(step: DeliveryStep, l: int, r: int) -> ReceiverRole:
    if r not in step.pi:
        raise InvalidInputError(f"receiver {r} does not take part in step {step.index}")
    t_R = len(step.packets[l].pi_dot)
    t_T = len(step.pi) - t_R
    return role_of_offset(step.pi.index(r), l, t_T, t_R)


# --------------------------------------------------------------------------
# demanded side: subfiles and their packet splitting
# --------------------------------------------------------------------------

def _rx_sets(p: DerivedParams) -> list[tuple[int, ...]]:
    return list(itertools.product(*rx_dimensions(p).groups))


def _tx_sets(p: DerivedParams) -> list[tuple[int, ...]]:
    return list(itertools.product(*tx_dimensions(p).groups))


def demanded_subfiles(j: int, d: Sequence[int], p: DerivedParams) -> list[SubfileId]:
    """Subfiles of file ``d[j]`` not cached by receiver ``j``."""
    d = check_demand(d, p)
    return [SubfileId(d[j], T, R) for T in _tx_sets(p) for R in _rx_sets(p) if j not in R]


@lru_cache(maxsize=4096)
def _splitting_orders(p: DerivedParams, j: int, rx_set: tuple[int, ...]) -> tuple[tuple[int, ...], ...]:
    """Receiver orderings ``pi`` labelling the packets of subfile ``(., ., rx_set)`` for ``j``.

    ``pi`` is a hypercube permutation of ``Q^U`` for a family ``Q`` of
    ``delta+1``-subsets (one per receiver dimension) with ``pi(0) = j``,
    ``pi(t_R)`` the member of ``rx_set`` in ``j``'s dimension and
    ``{pi(1..t_R-1)}`` the remaining members of ``rx_set``.
    """
    groups = rx_dimensions(p).groups
    kj = j // p.D_R
    r = next(x for x in rx_set if x // p.D_R == kj)
    others = set(rx_set) - {r}
    choices = []
    for k, g in enumerate(groups):
        if k == kj:
            rest = [x for x in g if x not in (j, r)]
            choices.append([tuple(sorted((j, r) + c))
                            for c in itertools.combinations(rest, p.delta - 1)])
        else:
            rk = rx_set[k]
            rest = [x for x in g if x != rk]
            choices.append([tuple(sorted((rk,) + c))
                            for c in itertools.combinations(rest, p.delta)])
    out = []
    for Q in itertools.product(*choices):
        part = DimensionPartition(Q)
        for pi in iter_hypercube_permutations(part, prefix=(j,)):
            if pi[p.t_R] == r and set(pi[1:p.t_R]) == others:
                out.append(pi)
    return tuple(sorted(out))


def _check_subfile(j: int, subfile: SubfileId, p: DerivedParams):
    if not 0 <= j < p.K_R:
        raise InvalidInputError(f"receiver {j} out of range")
    R = subfile.rx_set
    if len(R) != p.t_R or any(r // p.D_R != k for k, r in enumerate(R)):
        raise InvalidInputError("rx_set must hold one receiver per receiver dimension")
    if j in R:
        raise InvalidInputError(f"receiver {j} already caches {subfile}")


def enumerate_subfile_packets(j: int, subfile: SubfileId, p: DerivedParams) -> list[PacketId]:
    """Split a subfile requested by ``j`` into its ``delta_hcb`` packets."""
    _check_subfile(j, subfile, p)
    t_R = p.t_R
    return [PacketId(subfile, pi[1:t_R + 1], pi[t_R + 1:], j)
            for pi in _splitting_orders(p, j, subfile.rx_set)]


@lru_cache(maxsize=64)
def _demanded_orders(p: DerivedParams, j: int) -> np.ndarray:
    orders = [pi for R in _rx_sets(p) if j not in R for pi in _splitting_orders(p, j, R)]
    arr = np.array(orders, dtype=np.int64).reshape(len(orders), p.step_size)
    arr.setflags(write=False)
    return arr


def demanded_rows(d: Sequence[int], p: DerivedParams) -> np.ndarray:
    """Every demanded packet as a row ``[file, tx_set..., order...]``."""
    d = check_demand(d, p)
    bases = np.array(_tx_sets(p), dtype=np.int64).reshape(-1, p.t_T)
    blocks = []
    for j in range(p.K_R):
        orders = _demanded_orders(p, j)
        n_o = len(orders)
        file_col = np.full((len(bases) * n_o, 1), d[j], dtype=np.int64)
        blocks.append(np.hstack([file_col, np.repeat(bases, n_o, axis=0),
                                 np.tile(orders, (len(bases), 1))]))
    return np.vstack(blocks)


# --------------------------------------------------------------------------
# schedule
# --------------------------------------------------------------------------

@lru_cache(maxsize=8)
def _skeleton(p: DerivedParams):
    bases = _tx_sets(p)
    fams, pis = [], []
    choices = [k_subsets(g, p.delta + 1) for g in rx_dimensions(p).groups]
    for fam in itertools.product(*choices):
        for pi in enumerate_circular_hypercube_permutations(DimensionPartition(fam),
                                                            max_points=None):
            fams.append(fam)
            pis.append(pi)
    n_f = len(pis)
    base_tx = np.repeat(np.array(bases, dtype=np.int64).reshape(-1, p.t_T), n_f, axis=0)
    family = np.tile(np.array(fams, dtype=np.int64), (len(bases), 1, 1))
    pi = np.tile(np.array(pis, dtype=np.int64), (len(bases), 1))
    for a in (base_tx, family, pi):
        a.setflags(write=False)
    return base_tx, family, pi


@dataclass(frozen=True)
class Schedule:
    """Steps in lexicographic ``(T, R, pi)`` order, stored as arrays.

    Attributes
    ----------
    base_tx : (S, t_T) int array
    family : (S, t_R, delta+1) int array
    pi : (S, L) int array
    """

    params: DerivedParams
    demand: tuple[int, ...]
    base_tx: np.ndarray
    family: np.ndarray
    pi: np.ndarray
    step_ids: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.step_ids is None:
            object.__setattr__(self, "step_ids", np.arange(len(self.pi)))

    def __len__(self) -> int:
        return len(self.pi)

    def __getitem__(self, i: int) -> DeliveryStep:
        p = self.params
        tx, orders = self._packet_arrays(slice(i, i + 1))
        t_R = p.t_R
        packets = []
        for l in range(p.step_size):
            o = tuple(int(x) for x in orders[0, l])
            T = tuple(int(x) for x in tx[0, l])
            sub = SubfileId(self.demand[o[0]], T, tuple(sorted(o[1:t_R + 1])))
            packets.append(PacketId(sub, o[1:t_R + 1], o[t_R + 1:], o[0]))
        return DeliveryStep(
            index=int(self.step_ids[i]),
            base_tx=tuple(int(x) for x in self.base_tx[i]),
            rx_family=tuple(tuple(int(x) for x in g) for g in self.family[i]),
            pi=tuple(int(x) for x in self.pi[i]),
            packets=tuple(packets))

    def __iter__(self) -> Iterator[DeliveryStep]:
        for i in range(len(self)):
            yield self[i]

    def select(self, idx) -> "Schedule":
        """Sub-schedule with the given step positions (keeps original step ids)."""
        idx = np.asarray(idx)
        return Schedule(self.params, self.demand, self.base_tx[idx], self.family[idx],
                        self.pi[idx], self.step_ids[idx])

    def _packet_arrays(self, sl=slice(None)):
        p = self.params
        L = p.step_size
        rot = (np.arange(L)[:, None] + np.arange(L)[None, :]) % L
        orders = self.pi[sl][:, rot]                       # (S, L, L)
        base = self.base_tx[sl]
        dim0 = np.arange(p.t_T) * p.D_T
        mask = shift_mask(p.t_T, p.t_R).astype(np.int64)   # (L, t_T)
        tx = dim0 + (base[:, None, :] - dim0 + mask[None]) % p.D_T
        return tx, orders

    def packet_table(self, sl=slice(None)) -> dict:
        """Arrays describing every packet: ``tx`` (S, L, t_T), ``order`` (S, L, L),
        ``target`` and ``file`` (S, L)."""
        tx, orders = self._packet_arrays(sl)
        target = orders[:, :, 0]
        files = np.asarray(self.demand, dtype=np.int64)[target]
        return dict(tx=tx, order=orders, target=target, file=files)

    def rows(self) -> np.ndarray:
        """Every scheduled packet as a row ``[file, tx_set..., order...]``."""
        t = self.packet_table()
        S, L = t["target"].shape
        return np.concatenate([t["file"][:, :, None], t["tx"], t["order"]],
                              axis=2).reshape(S * L, -1)

    @property
    def total_packets(self) -> int:
        return len(self) * self.params.step_size


def build_schedule(d: Sequence[int], p: DerivedParams) -> Schedule:
    d = check_demand(d, p)
    base_tx, family, pi = _skeleton(p)
    return Schedule(p, d, base_tx, family, pi)


def write_schedule(s: Schedule, fp: TextIO) -> None:
    """JSON Lines, one record per step (keys sorted, compact separators)."""
    for step in s:
        rec = {
            "step": step.index,
            "base_tx": list(step.base_tx),
            "rx_family": [list(g) for g in step.rx_family],
            "pi": list(step.pi),
            "packets": [{"offset": l, "file": pk.subfile.file,
                         "tx_set": list(pk.subfile.tx_set), "pi_dot": list(pk.pi_dot),
                         "pi_ddot": list(pk.pi_ddot), "target": pk.target}
                        for l, pk in enumerate(step.packets)],
        }
        fp.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")


# --------------------------------------------------------------------------
# exact-cover verification
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class CoverageReport:
    ok: bool
    total_scheduled: int
    expected_total: int
    per_receiver: tuple[int, ...]
    expected_per_receiver: int
    receiver_need: int
    missing: tuple[PacketId, ...]
    duplicated: tuple[PacketId, ...]
    extraneous: tuple[PacketId, ...]

    def summary(self) -> dict:
        return {
            "ok": self.ok, "total_scheduled": self.total_scheduled,
            "expected_total": self.expected_total,
            "per_receiver": list(self.per_receiver),
            "expected_per_receiver": self.expected_per_receiver,
            "receiver_need": self.receiver_need,
            "missing": [list(pk.key()) for pk in self.missing],
            "duplicated": [list(pk.key()) for pk in self.duplicated],
            "extraneous": [list(pk.key()) for pk in self.extraneous],
        }


def _row_ids(a: np.ndarray, b: np.ndarray, radix: int):
    """Integer ids for the rows of ``a`` and ``b`` such that equal rows share an id."""
    cols = a.shape[1]
    if radix ** cols < 2 ** 62:
        w = np.array([radix ** c for c in range(cols)], dtype=np.int64)
        keys = np.concatenate([a @ w, b @ w])
        _, inv = np.unique(keys, return_inverse=True)
    else:
        _, inv = np.unique(np.vstack([a, b]), axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    return inv[:len(a)], inv[len(a):]


def _row_to_packet(row, p: DerivedParams) -> PacketId:
    row = tuple(int(x) for x in row)
    f, T, o = row[0], row[1:1 + p.t_T], row[1 + p.t_T:]
    return PacketId(SubfileId(f, T, tuple(sorted(o[1:p.t_R + 1]))),
                    o[1:p.t_R + 1], o[p.t_R + 1:], o[0])


def verify_exact_cover(s: Schedule, d: Sequence[int], p: DerivedParams) -> CoverageReport:
    """Check that the schedule delivers every demanded packet exactly once.

    Also checks the closed-form totals: the scheduled packet count, and for
    every receiver the number of packets it is the target of, which must
    match both the per-receiver step count and the per-receiver need.
    """
    d = check_demand(d, p)
    sched = s.rows()
    want = demanded_rows(d, p)
    radix = max(p.N, p.K_T, p.K_R) + 1
    sid, wid = _row_ids(sched, want, radix)
    n_ids = int(max(sid.max(initial=-1), wid.max(initial=-1))) + 1
    s_cnt = np.bincount(sid, minlength=n_ids)
    w_cnt = np.bincount(wid, minlength=n_ids)

    def pick(ids_mask, rows, ids):
        hit = ids_mask[ids]
        _, first = np.unique(ids[hit], return_index=True)
        return tuple(_row_to_packet(r, p) for r in rows[hit][first])

    missing = pick((w_cnt > 0) & (s_cnt == 0), want, wid)
    duplicated = pick(s_cnt > 1, sched, sid)
    extraneous = pick((s_cnt > 0) & (w_cnt == 0), sched, sid)
    per_rx = np.bincount(sched[:, 1 + p.t_T], minlength=p.K_R)
    expected_total = analytics.total_packets(p)
    expected_rx = analytics.receiver_delivered(p)
    need = analytics.receiver_need(p)
    ok = (not missing and not duplicated and not extraneous
          and int(w_cnt.max(initial=0)) <= 1
          and len(sched) == expected_total
          and expected_rx == need
          and all(int(c) == expected_rx for c in per_rx))
    return CoverageReport(ok, len(sched), expected_total, tuple(int(c) for c in per_rx),
                          expected_rx, need, missing, duplicated, extraneous)
