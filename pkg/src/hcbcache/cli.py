"""
Command-line entry point.

Usage::

    hcbcache analyze  --config run.toml [--out DIR]
    hcbcache schedule --config run.toml [--out DIR]
    hcbcache simulate --config run.toml [--out DIR] [--seed S] [--noise V] [--tol T]
    hcbcache sweep    --grid "d=3,4;t=1-8;delta=1,2" [--out DIR]

The config file is TOML::

    demand = "distinct"            # or "uniform-random(7)" or [0, 1, 2, 3]

    [network]
    K_T = 4
    K_R = 4
    M_T = 2                        # integer or a fraction string such as "3/2"
    M_R = 2
    N = 4

    [channel]
    seed = 0                       # default 0
    model = "gaussian"             # or "rank-one" (degenerate, for testing)
    retries = 3                    # resample attempts after a singular draw
    noise_variance = 0.0

    [tolerances]
    residual = 1e-9
    condition = 1e8

    [sweep]
    grid = "d=3,4,5;t=1-8;delta=1,2"

Exit status: 0 success, 2 unreadable config or arguments, 3 coverage
failure, 4 decoding failure, 5 singular channel after all retries, and
``10 + i`` for a configuration rejected with violation ``i`` (the first
violation, in :class:`~hcbcache.placement.Violation` order).
"""

from __future__ import annotations

import argparse
import io
import json
import logging
import os
import re
import sys
import tempfile
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence, Union

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import analytics, phy, placement, scheduler
from .placement import InvalidConfigError, NetworkConfig, Violation

log = logging.getLogger("hcbcache")

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_COVERAGE = 3
EXIT_DECODE = 4
EXIT_SINGULAR = 5
EXIT_VIOLATION_BASE = 10

VIOLATION_EXIT = {v: EXIT_VIOLATION_BASE + i for i, v in enumerate(Violation)}

ROUTABLE = {Violation.NON_INTEGER_T_T, Violation.NON_INTEGER_T_R, Violation.NON_INTEGER_DELTA,
            Violation.NON_INTEGER_D_T, Violation.NON_INTEGER_D_R}


class ConfigParseError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    network: NetworkConfig
    demand: Union[str, tuple[int, ...]] = "distinct"
    channel_seed: int = 0
    channel_model: str = "gaussian"
    channel_retries: int = 3
    noise_variance: float = 0.0
    tolerance: float = phy.DEFAULT_TOLERANCE
    cond_threshold: float = phy.DEFAULT_COND_THRESHOLD
    grid: Optional[str] = None


_RANDOM_DEMAND = re.compile(r"^uniform-random\((\d+)\)$")


def _memory(x) -> Fraction:
    if isinstance(x, bool):
        raise ConfigParseError("memory sizes must be numbers")
    if isinstance(x, (int, float)):
        if isinstance(x, float) and not x.is_integer():
            raise ConfigParseError(f"memory {x!r}: give fractional memories as strings like '3/2'")
        return Fraction(int(x))
    try:
        return Fraction(str(x))
    except (ValueError, ZeroDivisionError):
        raise ConfigParseError(f"memory {x!r} is not a number") from None


def parse_config(text: str) -> RunConfig:
    """Parse TOML text into a :class:`RunConfig` (raises :class:`ConfigParseError`)."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigParseError(f"invalid TOML: {exc}") from None
    net = raw.get("network")
    if not isinstance(net, dict):
        raise ConfigParseError("missing [network] section")
    missing = [k for k in ("K_T", "K_R", "M_T", "M_R", "N") if k not in net]
    if missing:
        raise ConfigParseError(f"[network] is missing {', '.join(missing)}")
    for k in ("K_T", "K_R", "N"):
        if not isinstance(net[k], int) or isinstance(net[k], bool):
            raise ConfigParseError(f"{k} must be an integer")
    network = NetworkConfig(net["K_T"], net["K_R"], _memory(net["M_T"]), _memory(net["M_R"]),
                            net["N"])

    demand = raw.get("demand", "distinct")
    if isinstance(demand, list):
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in demand):
            raise ConfigParseError("demand vector must hold integers")
        if len(demand) != network.K_R:
            raise ConfigParseError(f"demand has length {len(demand)}, expected K_R={network.K_R}")
        if any(not 0 <= x < network.N for x in demand):
            raise ConfigParseError(f"demanded file indices must lie in 0..{network.N - 1}")
        demand = tuple(demand)
    elif demand != "distinct" and not (isinstance(demand, str) and _RANDOM_DEMAND.match(demand)):
        raise ConfigParseError(f"unknown demand {demand!r}")

    ch = raw.get("channel", {})
    tol = raw.get("tolerances", {})
    try:
        rc = RunConfig(
            network=network, demand=demand,
            channel_seed=int(ch.get("seed", 0)),
            channel_model=str(ch.get("model", "gaussian")),
            channel_retries=int(ch.get("retries", 3)),
            noise_variance=float(ch.get("noise_variance", 0.0)),
            tolerance=float(tol.get("residual", phy.DEFAULT_TOLERANCE)),
            cond_threshold=float(tol.get("condition", phy.DEFAULT_COND_THRESHOLD)),
            grid=raw.get("sweep", {}).get("grid"))
    except (TypeError, ValueError) as exc:
        raise ConfigParseError(str(exc)) from None
    if rc.channel_model not in ("gaussian", "rank-one"):
        raise ConfigParseError(f"unknown channel model {rc.channel_model!r}")
    if rc.channel_retries < 0 or rc.noise_variance < 0:
        raise ConfigParseError("retries and noise_variance must be nonnegative")
    return rc


def load_config(path: str) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc}") from None
    return parse_config(text)


def resolve_demand(rc: RunConfig, p: placement.DerivedParams) -> tuple[int, ...]:
    if isinstance(rc.demand, tuple):
        return rc.demand
    if rc.demand == "distinct":
        return scheduler.distinct_demand(p)
    return scheduler.random_demand(p, int(_RANDOM_DEMAND.match(rc.demand).group(1)))


def parse_grid(spec: str) -> dict[str, list[int]]:
    """``"d=3,4;t=1-8;delta=1,2"`` -> ``{"d": [3, 4], "t": [1..8], "delta": [1, 2]}``.

    An empty spec, or any key with no values, gives an empty grid.
    """
    out = {"d": [], "t": [], "delta": []}
    spec = spec.strip()
    if not spec:
        return out
    for part in spec.split(";"):
        if not part.strip():
            continue
        key, _, vals = part.partition("=")
        key = key.strip()
        if key not in out:
            raise ConfigParseError(f"unknown grid key {key!r} (expected d, t, delta)")
        items = []
        for tok in filter(None, (v.strip() for v in vals.split(","))):
            m = re.fullmatch(r"(\d+)(?:-(\d+))?", tok)
            if not m:
                raise ConfigParseError(f"bad grid value {tok!r}")
            lo = int(m.group(1))
            hi = int(m.group(2)) if m.group(2) else lo
            items.extend(range(lo, hi + 1))
        out[key] = sorted(set(items))
    return out


# --------------------------------------------------------------------------
# output helpers
# --------------------------------------------------------------------------

def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=str) + "\n"


def _emit(out: Optional[str], name: str, text: str) -> Optional[Path]:
    if out is None:
        return None
    path = Path(out) / name
    write_atomic(path, text)
    return path


def _violation_exit(exc: InvalidConfigError) -> int:
    print(f"error: invalid configuration", file=sys.stderr)
    for v in exc.violations:
        print(f"  {v.name}: {v.value}", file=sys.stderr)
    return VIOLATION_EXIT[exc.violations[0]]


def _validate(rc: RunConfig) -> placement.DerivedParams:
    return placement.validate_config(rc.network)


# --------------------------------------------------------------------------
# subcommands
# --------------------------------------------------------------------------

def _analysis_record(p: placement.DerivedParams) -> dict:
    rep = analytics.subpacketization(p)
    gap = analytics.gap_analysis(p)
    return {
        "t_T": p.t_T, "t_R": p.t_R, "D_T": p.D_T, "D_R": p.D_R, "delta": p.delta,
        "subfiles_per_file": p.subfiles_per_file,
        "delta_hcb": rep.delta_hcb, "delta_nma": rep.delta_nma,
        "F_HCB": rep.f_hcb, "F_NMA": rep.f_nma, "G": str(rep.G),
        "steps": rep.steps, "packets": rep.packets_total, "DoF": str(rep.dof),
        "lambdas": [str(x) for x in gap.lambdas],
        "bound_closed_form": gap.closed_form_bound, "bound_stepwise": gap.stepwise_bound,
        "flags": gap.flags,
    }


def _print_analysis(rec: dict, indent: str = "") -> None:
    print(f"{indent}t_T={rec['t_T']} t_R={rec['t_R']} D_T={rec['D_T']} D_R={rec['D_R']} "
          f"delta={rec['delta']}")
    print(f"{indent}F_HCB={rec['F_HCB']} F_NMA={rec['F_NMA']} G={rec['G']} DoF={rec['DoF']}")
    print(f"{indent}delta_hcb={rec['delta_hcb']} delta_nma={rec['delta_nma']} "
          f"steps={rec['steps']} packets={rec['packets']}")


def _plan_record(plan: analytics.MemorySharePlan) -> dict:
    return {
        "case": plan.case, "p": str(plan.p), "DoF": str(plan.dof),
        "subpacketization": plan.subpacketization,
        "partitions": [{
            "weight": str(q.weight), "tx_memory": str(q.tx_memory),
            "rx_memory": str(q.rx_memory), "t_T": q.t_T, "t_R": q.t_R,
            "scheme": q.scheme, "valid": q.params is not None,
            "F": q.subpacketization,
        } for q in plan.partitions],
    }


def _print_plan(rec: dict) -> None:
    print(f"memory-sharing plan ({rec['case']}): p={rec['p']} DoF={rec['DoF']}")
    for q in rec["partitions"]:
        print(f"  weight={q['weight']} t_T={q['t_T']} t_R={q['t_R']} scheme={q['scheme']} "
              f"F={q['F']}")


def cmd_analyze(args) -> int:
    rc = load_config(args.config)
    cfg = rc.network
    violations = placement.check_config(cfg)
    record: dict = {"config": {"K_T": cfg.K_T, "K_R": cfg.K_R, "M_T": str(cfg.M_T),
                               "M_R": str(cfg.M_R), "N": cfg.N},
                    "violations": [v.name for v in violations]}
    if not violations:
        record["mode"] = "direct"
        record["analysis"] = _analysis_record(placement.validate_config(cfg))
        _print_analysis(record["analysis"])
    elif violations[0] in (Violation.NON_POSITIVE, Violation.LIBRARY_NOT_COVERED):
        return _violation_exit(InvalidConfigError(violations))
    elif Violation.DOF_EXCEEDS_K_R in violations:
        cap = analytics.cap_excess_memory(cfg)
        c = cap.config
        record["mode"] = "memory-cap"
        record["capped_config"] = {"M_T": str(c.M_T), "M_R": str(c.M_R)}
        print(f"t_T + t_R exceeds K_R; memories capped to M_T={c.M_T} M_R={c.M_R}")
        if cap.params is not None:
            record["analysis"] = _analysis_record(cap.params)
            _print_analysis(record["analysis"], "  ")
        elif cap.plan is not None:
            record["plan"] = _plan_record(cap.plan)
            _print_plan(record["plan"])
        else:
            return _violation_exit(InvalidConfigError(violations))
    elif set(violations) <= ROUTABLE and (
            Violation.NON_INTEGER_T_T in violations or Violation.NON_INTEGER_T_R in violations
            or Violation.NON_INTEGER_DELTA in violations):
        record["mode"] = "memory-sharing"
        record["plan"] = _plan_record(analytics.plan_memory_sharing(cfg))
        _print_plan(record["plan"])
    else:
        return _violation_exit(InvalidConfigError(violations))
    _emit(args.out, "analyze.json", _json(record))
    if args.out and "analysis" in record:
        p = cap.params if record["mode"] == "memory-cap" else placement.validate_config(cfg)
        buf = io.StringIO()
        analytics.write_sweep_csv([analytics.sweep_row(p)], buf)
        _emit(args.out, "analyze.csv", buf.getvalue())
    return EXIT_OK


def cmd_schedule(args) -> int:
    rc = load_config(args.config)
    try:
        p = _validate(rc)
    except InvalidConfigError as exc:
        return _violation_exit(exc)
    d = resolve_demand(rc, p)
    s = scheduler.build_schedule(d, p)
    cov = scheduler.verify_exact_cover(s, d, p)
    print(f"steps={len(s)} packets={s.total_packets} DoF={s.total_packets // len(s)} "
          f"coverage={'pass' if cov.ok else 'FAIL'}")
    if args.out:
        buf = io.StringIO()
        scheduler.write_schedule(s, buf)
        _emit(args.out, "schedule.jsonl", buf.getvalue())
    report = _emit(args.out, "coverage.json", _json({"demand": list(d), **cov.summary()}))
    if not cov.ok:
        where = f" (report: {report})" if report else ""
        print(f"error: coverage verification failed{where}", file=sys.stderr)
        return EXIT_COVERAGE
    return EXIT_OK


def cmd_simulate(args) -> int:
    rc = load_config(args.config)
    try:
        p = _validate(rc)
    except InvalidConfigError as exc:
        return _violation_exit(exc)
    seed = rc.channel_seed if args.seed is None else args.seed
    noise = rc.noise_variance if args.noise is None else args.noise
    tol = rc.tolerance if args.tol is None else args.tol
    if noise < 0:
        print("error: noise variance must be nonnegative", file=sys.stderr)
        return EXIT_PARSE
    d = resolve_demand(rc, p)
    s = scheduler.build_schedule(d, p)

    rep = None
    attempt_seed = seed
    for attempt in range(rc.channel_retries + 1):
        attempt_seed = seed + attempt
        H = phy.sample_channel(p, attempt_seed, rc.channel_model)
        try:
            rep = phy.verify_schedule_decodable(s, H, tol, rc.cond_threshold, 0.0, attempt_seed)
            break
        except phy.SingularChannelError as exc:
            log.warning("channel seed %d singular: %s", attempt_seed, exc)
            print(f"channel seed {attempt_seed}: {exc}; resampling", file=sys.stderr)
    if rep is None:
        print(f"error: no well-conditioned channel after {rc.channel_retries + 1} draw(s)",
              file=sys.stderr)
        return EXIT_SINGULAR

    rows = [(attempt_seed, rep)]
    print(f"channel_seed={attempt_seed} steps={rep.steps} "
          f"steps_passed={int(rep.step_ok.sum())}/{rep.steps}")
    print(f"worst_residual={rep.max_residual:.3e} worst_zf_leak={rep.max_leak:.3e} "
          f"worst_condition={rep.max_condition:.3e}")
    summary = {"demand": list(d), "channel_seed": attempt_seed, "noiseless": rep.summary()}
    if noise > 0:
        noisy = phy.verify_schedule_decodable(s, H, tol, rc.cond_threshold, noise,
                                              attempt_seed + 1)
        summary["noisy"] = {"noise_variance": noise, **noisy.summary()}
        print(f"noisy (variance {noise:g}): decoded {noisy.decoded_packets}/{noisy.packets} "
              f"worst_residual={noisy.max_residual:.3e}")
    if args.out:
        buf = io.StringIO()
        phy.write_report_csv(rows, buf)
        _emit(args.out, "simulate.csv", buf.getvalue())
        buf = io.StringIO()
        phy.write_step_csv(rep, buf)
        _emit(args.out, "steps.csv", buf.getvalue())
        _emit(args.out, "simulate.json", _json(summary))
    print("all steps pass" if rep.ok else "decoding FAILED")
    return EXIT_OK if rep.ok else EXIT_DECODE


def cmd_sweep(args) -> int:
    spec = args.grid
    if spec is None and args.config:
        spec = load_config(args.config).grid
    if spec is None:
        raise ConfigParseError("sweep needs --grid or a [sweep] grid entry in --config")
    g = parse_grid(spec)
    rows = analytics.grid_sweep(g["d"], g["t"], g["delta"])
    buf = io.StringIO()
    analytics.write_sweep_csv(rows, buf)
    if args.out:
        path = _emit(args.out, "sweep.csv", buf.getvalue())
        print(f"{len(rows)} rows written to {path}")
    else:
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "schedule": cmd_schedule,
            "simulate": cmd_simulate, "sweep": cmd_sweep}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hcbcache",
                                 description="Hypercube cache placement and delivery toolkit")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name != "sweep", help="TOML run config")
        sp.add_argument("--out", help="output directory")
        if name == "simulate":
            sp.add_argument("--seed", type=int, help="channel seed (overrides config)")
            sp.add_argument("--noise", type=float, help="noise variance for the noisy run")
            sp.add_argument("--tol", type=float, help="residual tolerance")
        if name == "sweep":
            sp.add_argument("--grid", help='e.g. "d=3,4;t=1-8;delta=1,2"')
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
