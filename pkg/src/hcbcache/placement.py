"""
Parameter validation, hypercube file splitting and cache manifests.

Every file is split into ``D_T**t_T * D_R**t_R`` subfiles, one per pair
(transmitter set, receiver set) where each set takes exactly one node from
every dimension of its hypercube.  A node caches every subfile whose set
contains it.  Memory accounting is done in exact rational arithmetic with the
file size ``F`` kept symbolic: sizes are expressed as multiples of ``F``.
"""

from __future__ import annotations

import csv
import enum
import io
import itertools
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, TextIO, Union

from .combinatorics import DimensionPartition, InvalidInputError

Number = Union[int, Fraction]


class Violation(enum.Enum):
    """Named reasons a network configuration is outside the scheme's regime."""

    NON_POSITIVE = "all of K_T, K_R, M_T, M_R, N must be positive"
    LIBRARY_NOT_COVERED = "K_T*M_T < N: transmitters cannot hold the library"
    NON_INTEGER_T_T = "t_T = K_T*M_T/N is not an integer"
    NON_INTEGER_T_R = "t_R = K_R*M_R/N is not an integer"
    NON_INTEGER_D_T = "D_T = N/M_T is not an integer"
    NON_INTEGER_D_R = "D_R = N/M_R is not an integer"
    NON_INTEGER_DELTA = "delta = t_T/t_R is not an integer"
    D_R_TOO_SMALL = "D_R < delta + 1"
    DOF_EXCEEDS_K_R = "t_T + t_R > K_R"


class InvalidConfigError(ValueError):
    """A configuration failed validation; ``violations`` lists every failure."""

    def __init__(self, violations):
        self.violations = list(violations)
        msg = "; ".join(f"{v.name}: {v.value}" for v in self.violations)
        super().__init__(msg)


@dataclass(frozen=True)
class NetworkConfig:
    """System parameters.  Memories may be rational (memory-sharing partitions)."""

    K_T: int
    K_R: int
    M_T: Number
    M_R: Number
    N: int

    def __post_init__(self):
        for name in ("M_T", "M_R"):
            object.__setattr__(self, name, _rational(getattr(self, name)))

    @property
    def t_T(self) -> Fraction:
        return Fraction(self.K_T) * self.M_T / self.N

    @property
    def t_R(self) -> Fraction:
        return Fraction(self.K_R) * self.M_R / self.N


def _rational(x) -> Fraction:
    if isinstance(x, float):
        if not x.is_integer():
            raise InvalidInputError(f"memory size {x!r} must be given exactly (int or Fraction)")
        x = int(x)
    return Fraction(x)


@dataclass(frozen=True)
class DerivedParams:
    """Integral caching parameters of a validated configuration."""

    config: NetworkConfig
    t_T: int
    t_R: int
    D_T: int
    D_R: int
    delta: int

    @property
    def step_size(self) -> int:
        return self.t_T + self.t_R

    @property
    def K_T(self) -> int:
        return self.config.K_T

    @property
    def K_R(self) -> int:
        return self.config.K_R

    @property
    def N(self) -> int:
        return self.config.N

    @property
    def subfiles_per_file(self) -> int:
        return self.D_T ** self.t_T * self.D_R ** self.t_R


def check_config(cfg: NetworkConfig) -> list[Violation]:
    """Every violated constraint, in a fixed order (empty when valid)."""
    if min(cfg.K_T, cfg.K_R, cfg.N) <= 0 or cfg.M_T <= 0 or cfg.M_R <= 0:
        return [Violation.NON_POSITIVE]
    out = []
    t_T, t_R = cfg.t_T, cfg.t_R
    D_T, D_R = Fraction(cfg.N) / cfg.M_T, Fraction(cfg.N) / cfg.M_R
    if cfg.K_T * cfg.M_T < cfg.N:
        out.append(Violation.LIBRARY_NOT_COVERED)
    if t_T.denominator != 1:
        out.append(Violation.NON_INTEGER_T_T)
    if t_R.denominator != 1:
        out.append(Violation.NON_INTEGER_T_R)
    if D_T.denominator != 1:
        out.append(Violation.NON_INTEGER_D_T)
    if D_R.denominator != 1:
        out.append(Violation.NON_INTEGER_D_R)
    delta = t_T / t_R
    if delta.denominator != 1:
        out.append(Violation.NON_INTEGER_DELTA)
    if D_R < delta + 1:
        out.append(Violation.D_R_TOO_SMALL)
    if t_T + t_R > cfg.K_R:
        out.append(Violation.DOF_EXCEEDS_K_R)
    return out


def validate_config(cfg: NetworkConfig) -> DerivedParams:
    """Derive ``t_T, t_R, D_T, D_R, delta`` or raise :class:`InvalidConfigError`."""
    violations = check_config(cfg)
    if violations:
        raise InvalidConfigError(violations)
    t_T, t_R = int(cfg.t_T), int(cfg.t_R)
    return DerivedParams(config=cfg, t_T=t_T, t_R=t_R,
                         D_T=int(cfg.N / cfg.M_T), D_R=int(cfg.N / cfg.M_R),
                         delta=t_T // t_R)


def tx_dimensions(p: DerivedParams) -> DimensionPartition:
    return DimensionPartition.standard(p.D_T, p.t_T)


def rx_dimensions(p: DerivedParams) -> DimensionPartition:
    return DimensionPartition.standard(p.D_R, p.t_R)


@dataclass(frozen=True, order=True)
class SubfileId:
    """Subfile ``W_{file, tx_set, rx_set}``; both sets stored sorted."""

    file: int
    tx_set: tuple[int, ...]
    rx_set: tuple[int, ...]

    def label(self) -> str:
        """Compact label such as ``A_02,12`` (files lettered when N <= 26)."""
        name = chr(ord("A") + self.file) if self.file < 26 else f"W{self.file}"
        sep = "" if max(self.tx_set + self.rx_set) < 10 else "."
        return (f"{name}_{sep.join(map(str, self.tx_set))},"
                f"{sep.join(map(str, self.rx_set))}")


def _set_product(part: DimensionPartition) -> list[tuple[int, ...]]:
    # groups are sorted and ordered by dimension, so the product is already sorted
    return list(itertools.product(*part.groups))


def split_files(p: DerivedParams) -> list[SubfileId]:
    """All subfiles of all files: file-major, then tx_set, then rx_set."""
    tx_sets = _set_product(tx_dimensions(p))
    rx_sets = _set_product(rx_dimensions(p))
    return [SubfileId(n, T, R) for n in range(p.N) for T in tx_sets for R in rx_sets]


@dataclass(frozen=True)
class CacheManifest:
    """Subfiles held by one transmitter (``kind='tx'``) or receiver (``kind='rx'``)."""

    kind: str
    index: int
    subfiles: tuple[SubfileId, ...]

    def __contains__(self, s: SubfileId) -> bool:
        return s in self._lookup

    @property
    def _lookup(self) -> frozenset:
        cached = self.__dict__.get("_lookup_cache")
        if cached is None:
            cached = frozenset(self.subfiles)
            object.__setattr__(self, "_lookup_cache", cached)
        return cached


def cache_manifest(p: DerivedParams, kind: str, index: int) -> CacheManifest:
    if kind == "tx":
        if not 0 <= index < p.K_T:
            raise InvalidInputError(f"transmitter {index} out of range 0..{p.K_T - 1}")
        held = [s for s in split_files(p) if index in s.tx_set]
    elif kind == "rx":
        if not 0 <= index < p.K_R:
            raise InvalidInputError(f"receiver {index} out of range 0..{p.K_R - 1}")
        held = [s for s in split_files(p) if index in s.rx_set]
    else:
        raise InvalidInputError(f"owner kind must be 'tx' or 'rx', got {kind!r}")
    return CacheManifest(kind, index, tuple(held))


def verify_memory_budget(p: DerivedParams, m: CacheManifest) -> bool:
    """Exact check that the manifest fills the owner's memory, in units of ``F``."""
    used = len(m.subfiles) * Fraction(1, p.subfiles_per_file)
    budget = p.config.M_T if m.kind == "tx" else p.config.M_R
    return used == budget


MANIFEST_COLUMNS = ("file", "tx_set", "rx_set")


def write_manifest(m: CacheManifest, fp: TextIO) -> None:
    """CSV export: a ``# owner=<kind> index=<i>`` line, header, one row per subfile.

    Sets are written as space-separated node indices.
    """
    fp.write(f"# owner={m.kind} index={m.index}\n")
    w = csv.writer(fp, lineterminator="\n")
    w.writerow(MANIFEST_COLUMNS)
    for s in m.subfiles:
        w.writerow([s.file, " ".join(map(str, s.tx_set)), " ".join(map(str, s.rx_set))])


def read_manifest(fp: Union[TextIO, Iterable[str]]) -> CacheManifest:
    lines = iter(fp)
    head = next(lines).strip()
    fields = dict(tok.split("=") for tok in head.lstrip("# ").split())
    rows = list(csv.reader(lines))
    if tuple(rows[0]) != MANIFEST_COLUMNS:
        raise InvalidInputError("manifest header mismatch")
    subfiles = tuple(
        SubfileId(int(f), tuple(map(int, tx.split())), tuple(map(int, rx.split())))
        for f, tx, rx in rows[1:])
    return CacheManifest(fields["owner"], int(fields["index"]), subfiles)


def manifest_text(m: CacheManifest) -> str:
    buf = io.StringIO()
    write_manifest(m, buf)
    return buf.getvalue()
