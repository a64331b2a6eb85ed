"""Command-line front end.

Subcommands: ``analytic`` (closed forms), ``simulate`` (replication batches
with optional queue-size sweep and CSV dump), ``oracle`` (exact phase-type
chain), ``verify`` (the acceptance suite).

Exit codes: 0 success / all criteria pass, 1 verification failure, 2 usage
or configuration error, 3 resource or capacity error.  The env var
``BUSYLOSS_SEED`` overrides the default master seed (42); an explicit
``--seed`` flag beats both.  All numeric output carries 12 significant
digits, and identical inputs produce byte-identical output regardless of
worker count.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import dataclass
from typing import Optional

from . import analytic, ctmc, distributions, stats, verify
from .analytic import MarkovSpec
from .distributions import ServiceDistribution, as_phase_type
from .errors import BusylossError, CapacityError, ConfigError
from .simulator import SystemSpec, collect_batch, iter_replications

DEFAULT_SEED = 42
_SWEEP_SALT = 4


def _default_seed() -> int:
    env = os.environ.get("BUSYLOSS_SEED")
    if env is None:
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError as exc:
        raise ConfigError(f"BUSYLOSS_SEED must be an integer, got {env!r}") from exc


def _round12(obj):
    """Limit every float in a JSON-ready structure to 12 significant digits."""
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, float):
        return float(f"{obj:.12g}")
    if isinstance(obj, dict):
        return {k: _round12(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round12(v) for v in obj]
    if isinstance(obj, (int, str)) or obj is None:
        return obj
    if hasattr(obj, "item"):  # numpy scalar
        return _round12(obj.item())
    return obj


def _emit_json(payload: dict, path: Optional[str] = None) -> None:
    text = json.dumps(_round12(payload), indent=2) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


@dataclass
class ExperimentConfig:
    system: SystemSpec
    replications: int
    master_seed: int
    confidence: float
    sweep: Optional[list[int]]
    workers: int
    csv_path: Optional[str]
    json_path: Optional[str]

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError(f"replications must be >= 1, got {self.replications}")
        if self.replications < 2:
            raise ConfigError("confidence intervals need at least 2 replications")
        if not (0.0 < self.confidence < 1.0):
            raise ConfigError(f"confidence must lie in (0,1), got {self.confidence}")
        if self.sweep is not None:
            if len(set(self.sweep)) != len(self.sweep) or any(n < 0 for n in self.sweep):
                raise ConfigError("sweep values must be distinct integers >= 0")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1, got {self.workers}")


def _load_config(args) -> ExperimentConfig:
    raw: dict = {}
    if args.config:
        try:
            with open(args.config) as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
    system_raw = dict(raw.get("system", {}))
    lam = args.lam if args.lam is not None else system_raw.get("arrival_rate")
    servers = args.m if args.m is not None else system_raw.get("servers")
    waiting = args.n if args.n is not None else system_raw.get("waiting_places")
    if args.service is not None:
        service: ServiceDistribution = distributions.parse_spec_string(args.service)
    elif "service" in system_raw:
        service = distributions.from_config(system_raw["service"])
    else:
        raise ConfigError("no service distribution given (flag --service or config)")
    if lam is None or servers is None or waiting is None:
        raise ConfigError("arrival rate, servers, and waiting places are all required")
    system = SystemSpec(float(lam), service, int(servers), int(waiting))

    seed = args.seed
    if seed is None:
        seed = raw.get("master_seed", _default_seed())
    sweep = args.sweep
    if sweep is None:
        sweep = raw.get("sweep")
    if sweep is not None:
        sweep = [int(v) for v in sweep]
    output = raw.get("output", {})
    csv_path = args.csv if args.csv else (output.get("path") if output.get("format") == "csv" else None)
    json_path = args.json if args.json else (output.get("path") if output.get("format") == "json" else None)
    return ExperimentConfig(
        system=system,
        replications=args.replications if args.replications is not None else int(raw.get("replications", 1000)),
        master_seed=int(seed),
        confidence=args.confidence if args.confidence is not None else float(raw.get("confidence", 0.99)),
        sweep=sweep,
        workers=args.workers if args.workers is not None else int(raw.get("workers", 1)),
        csv_path=csv_path,
        json_path=json_path,
    )


def _estimate_payload(est: stats.Estimate) -> dict:
    return {
        "mean": est.mean,
        "variance": est.variance,
        "half_width": est.half_width,
        "confidence": est.confidence,
        "count": est.count,
    }


def _simulate_point(system: SystemSpec, cfg: ExperimentConfig, salt: tuple[int, ...]):
    summary = collect_batch(
        system, cfg.replications, cfg.master_seed, salt=salt, workers=cfg.workers
    )
    point = {
        "n": system.waiting_places,
        "records": summary.count,
        "losses": _estimate_payload(stats.mean_ci(summary.losses, cfg.confidence)),
        "duration": _estimate_payload(stats.mean_ci(summary.durations, cfg.confidence)),
        "time_in_state_m_minus_1": _estimate_payload(
            stats.mean_ci(summary.state_time_m1, cfg.confidence)
        ),
        "orbital_periods": int(summary.orbital_losses.size),
    }
    if summary.orbital_losses.size >= 2:
        point["orbital_losses_per_period"] = _estimate_payload(
            stats.mean_ci(summary.orbital_losses, cfg.confidence)
        )
    return point, stats.mean_ci(summary.losses, cfg.confidence)


def _write_csv(cfg: ExperimentConfig, sweeps: list[int]) -> None:
    max_cap = cfg.system.servers + max(sweeps)
    header = (
        ["n", "record", "duration", "losses", "served", "orbital_count", "queueing_period_count"]
        + [f"f_{j}" for j in range(1, max_cap + 2)]
        + [f"b_{j}" for j in range(0, max_cap + 1)]
    )
    with open(cfg.csv_path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for n in sweeps:
            system = SystemSpec(
                cfg.system.arrival_rate, cfg.system.service, cfg.system.servers, n
            )
            salt = (_SWEEP_SALT, n) if len(sweeps) > 1 else (_SWEEP_SALT, n)
            cap = system.capacity
            for i, rec in enumerate(
                iter_replications(system, cfg.replications, cfg.master_seed, salt)
            ):
                cells = [
                    str(n),
                    str(i),
                    f"{rec.duration:.12g}",
                    str(rec.losses),
                    str(rec.served),
                    str(rec.orbital_count),
                    str(rec.queueing_period_count),
                ]
                crossings = rec.level_crossings[1 : cap + 2] + [0] * (max_cap - cap)
                cells += [str(v) for v in crossings]
                times = rec.time_in_state + [0.0] * (max_cap - cap)
                cells += [f"{v:.12g}" for v in times]
                fh.write(",".join(cells) + "\n")


def cmd_analytic(args) -> int:
    spec = MarkovSpec(args.lam, args.mu, args.m, args.n)
    _emit_json(analytic.summary(spec))
    return 0


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    sweeps = cfg.sweep if cfg.sweep is not None else [cfg.system.waiting_places]
    points = []
    loss_estimates = []
    for n in sweeps:
        system = SystemSpec(cfg.system.arrival_rate, cfg.system.service, cfg.system.servers, n)
        point, loss_est = _simulate_point(system, cfg, salt=(_SWEEP_SALT, n))
        points.append(point)
        loss_estimates.append(loss_est)
    payload = {
        "system": {
            "arrival_rate": cfg.system.arrival_rate,
            "service": distributions.to_config(cfg.system.service),
            "servers": cfg.system.servers,
            "waiting_places": sweeps if cfg.sweep is not None else sweeps[0],
        },
        "replications": cfg.replications,
        "master_seed": cfg.master_seed,
        "confidence": cfg.confidence,
        "points": points,
    }
    if len(loss_estimates) >= 2:
        payload["losses_consistent_across_sweep"] = stats.consistent_across(loss_estimates)
    if cfg.csv_path:
        _write_csv(cfg, sweeps)
    _emit_json(payload, cfg.json_path)
    if cfg.json_path:
        _emit_json(payload)  # keep stdout informative when writing to a file
    return 0


def cmd_oracle(args) -> int:
    service = distributions.parse_spec_string(args.service)
    phase = as_phase_type(service)
    payload = ctmc.oracle_summary(args.lam, phase, args.m, args.n, max_states=args.max_states)
    payload["service"] = distributions.to_config(service)
    _emit_json(payload)
    return 0


def cmd_verify(args) -> int:
    mode = "full" if args.full else "quick"
    seed = args.seed if args.seed is not None else _default_seed()
    result = verify.run_suite(mode=mode, master_seed=seed, workers=args.workers or 1)
    sys.stdout.write(result.report())
    if args.json:
        _emit_json(result.to_payload(), args.json)
    return 0 if result.all_passed else 1


def _positive_float(text: str) -> float:
    value = float(text)
    if not (value > 0.0 and math.isfinite(value)):
        raise argparse.ArgumentTypeError(f"must be a positive number, got {text}")
    return value


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="busyloss",
        description="Busy-period loss analysis for M/GI/m/n queues.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_analytic = sub.add_parser("analytic", help="closed-form M/M/m/n quantities")
    p_analytic.add_argument("--lambda", dest="lam", type=_positive_float, required=True)
    p_analytic.add_argument("--mu", type=_positive_float, required=True)
    p_analytic.add_argument("--m", type=int, required=True)
    p_analytic.add_argument("--n", type=int, required=True)
    p_analytic.set_defaults(func=cmd_analytic)

    p_sim = sub.add_parser("simulate", help="busy-period replication batches")
    p_sim.add_argument("--config", help="JSON experiment config; flags override")
    p_sim.add_argument("--lambda", dest="lam", type=_positive_float)
    p_sim.add_argument("--service", help="e.g. exp:1.0, det:1.0, erlang:3,3.0, hyperexp:0.9,1.8,0.2")
    p_sim.add_argument("--m", type=int)
    p_sim.add_argument("--n", type=int)
    p_sim.add_argument("--replications", type=int)
    p_sim.add_argument("--seed", type=int)
    p_sim.add_argument("--confidence", type=float)
    p_sim.add_argument("--sweep", type=_int_list, help="comma-separated waiting-place counts")
    p_sim.add_argument("--workers", type=int)
    p_sim.add_argument("--csv", help="write one row per busy period to this path")
    p_sim.add_argument("--json", help="write the aggregate JSON to this path")
    p_sim.set_defaults(func=cmd_simulate)

    p_oracle = sub.add_parser("oracle", help="exact phase-type busy-period chain")
    p_oracle.add_argument("--lambda", dest="lam", type=_positive_float, required=True)
    p_oracle.add_argument("--service", required=True)
    p_oracle.add_argument("--m", type=int, required=True)
    p_oracle.add_argument("--n", type=int, required=True)
    p_oracle.add_argument("--max-states", type=int, default=ctmc.DEFAULT_MAX_STATES)
    p_oracle.set_defaults(func=cmd_oracle)

    p_verify = sub.add_parser("verify", help="run the verification suite")
    mode = p_verify.add_mutually_exclusive_group()
    mode.add_argument("--quick", action="store_true", default=True)
    mode.add_argument("--full", action="store_true")
    p_verify.add_argument("--seed", type=int)
    p_verify.add_argument("--workers", type=int, default=1)
    p_verify.add_argument("--json", help="write the machine-readable report here")
    p_verify.set_defaults(func=cmd_verify)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CapacityError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (BusylossError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
