"""Command-line front end.

Every run needs an explicit seed; there is no wall-clock default.
Replica i always draws from derive_stream(seed, i), so the worker
count changes scheduling only and outputs are byte-identical for any
value of --workers.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from dataclasses import dataclass

from . import __version__, oracle
from .core import LEAK_KINDS, ModelSpec, PotentialList
from .coupling import CONVENTIONS, write_outcomes
from .engine import StopCondition, derive_stream, simulate, write_event_log
from . import experiments as ex

EXPERIMENTS = (
    "simulate",
    "extinction",
    "occupancy",
    "ladder",
    "coupling",
    "aux-occupancy",
    "cn",
    "oracle",
)

_UNSET = object()


class CliError(Exception):
    """Validation failure; rendered as a single diagnostic line."""


class _Parser(argparse.ArgumentParser):
    # exit code 1 for bad flags, not argparse's default 2
    def error(self, message):
        raise CliError(message)


@dataclass
class RunConfig:
    """Fully merged and validated run description."""

    experiment: str
    n: int | None = None
    leak_kind: str = "reset"
    base: float = math.e
    master_seed: int | None = None
    replicas: int = 1
    init: object = "ladder"
    horizon: float | None = None
    jump_budget: int | None = None
    convention: str = "marginal_preserving"
    t: float | None = None
    burn_in: float | None = None
    run_time: float | None = None
    cap: int = 20
    spread: int = 3
    out: str | None = None
    format: str = "json"
    workers: int = 1
    log: str | None = None
    check: str | None = None
    acceptance: bool = False

    def spec(self) -> ModelSpec:
        if self.n is None:
            raise CliError("config key 'n' is required")
        return ModelSpec(self.n, self.leak_kind, self.base)

    def echo(self) -> dict:
        """Provenance echo embedded in every output.

        workers is deliberately absent: it affects scheduling only and
        outputs must be byte-identical across worker counts.
        """
        out = {
            "experiment": self.experiment,
            "n": self.n,
            "model": self.leak_kind,
            "base": self.base,
            "seed": self.master_seed,
            "replicas": self.replicas,
            "init": self.init if isinstance(self.init, str) else list(self.init),
            "horizon": self.horizon,
            "jump_budget": self.jump_budget,
        }
        if self.experiment == "coupling":
            out["convention"] = self.convention
            out["spread"] = self.spread
        if self.experiment == "occupancy":
            out["t"] = self.t
        if self.experiment == "aux-occupancy":
            out["burn_in"] = self.burn_in
            out["run_time"] = self.run_time
        if self.experiment == "oracle":
            out["cap"] = self.cap
        return out


# config-file key -> RunConfig attribute
_CONFIG_KEYS = {
    "experiment": "experiment",
    "n": "n",
    "model": "leak_kind",
    "base": "base",
    "seed": "master_seed",
    "replicas": "replicas",
    "init": "init",
    "horizon": "horizon",
    "jump_budget": "jump_budget",
    "convention": "convention",
    "t": "t",
    "burn_in": "burn_in",
    "run_time": "run_time",
    "cap": "cap",
    "spread": "spread",
    "out": "out",
    "format": "format",
    "workers": "workers",
}


def _parse_init(raw) -> object:
    if isinstance(raw, str):
        if raw in ("ladder", "s0", "s0_random"):
            return "s0" if raw == "s0_random" else raw
        if raw.startswith("explicit:"):
            try:
                values = tuple(int(x) for x in raw[len("explicit:"):].split(","))
            except ValueError:
                raise CliError(f"cannot parse explicit init {raw!r}") from None
            return _check_explicit(values)
        raise CliError(f"init must be ladder, s0, or explicit:v1,v2,... (got {raw!r})")
    if isinstance(raw, (list, tuple)):
        return _check_explicit(tuple(int(x) for x in raw))
    raise CliError(f"init must be a token or a list (got {raw!r})")


def _check_explicit(values: tuple[int, ...]) -> tuple[int, ...]:
    try:
        PotentialList(values)
    except ValueError as err:
        raise CliError(f"init: {err} (states need non-negative entries with min 0)") from None
    return values


def load_config(path: str) -> RunConfig:
    """Read a config JSON file into a RunConfig (CLI flags override)."""
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as err:
        raise CliError(f"cannot read config {path}: {err}") from None
    except json.JSONDecodeError as err:
        raise CliError(f"config {path} is not valid JSON: {err}") from None
    if not isinstance(raw, dict):
        raise CliError(f"config {path}: top level must be an object")
    unknown = sorted(set(raw) - set(_CONFIG_KEYS))
    if unknown:
        raise CliError(f"config {path}: unknown key {unknown[0]!r}")
    cfg = RunConfig(experiment=raw.get("experiment", "simulate"))
    for key, attr in _CONFIG_KEYS.items():
        if key in raw and raw[key] is not None:
            value = raw[key]
            if key == "init":
                value = _parse_init(value)
            setattr(cfg, attr, value)
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    if cfg.experiment not in EXPERIMENTS:
        raise CliError(f"config key 'experiment' must be one of {EXPERIMENTS}")
    if cfg.leak_kind not in LEAK_KINDS:
        raise CliError(f"config key 'model' must be one of {LEAK_KINDS}")
    if cfg.experiment != "oracle" and cfg.master_seed is None:
        raise CliError("config key 'seed' is required; runs without a seed are not reproducible")
    if cfg.replicas < 1:
        raise CliError("config key 'replicas' must be >= 1")
    if cfg.workers < 1:
        raise CliError("config key 'workers' must be >= 1")
    if cfg.format not in ("csv", "json"):
        raise CliError("config key 'format' must be csv or json")
    if cfg.convention not in CONVENTIONS:
        raise CliError(f"config key 'convention' must be one of {CONVENTIONS}")
    if not isinstance(cfg.init, str):
        _check_explicit(tuple(cfg.init))


def build_parser() -> _Parser:
    top = _Parser(prog="spikeleak", description=__doc__)
    top.add_argument("--version", action="version", version=f"spikeleak {__version__}")
    sub = top.add_subparsers(dest="experiment", metavar="command")

    def common(p, seed_required=True):
        p.add_argument("--config", help="JSON config file; flags given here override it")
        p.add_argument("--n", type=int, default=None)
        p.add_argument("--model", choices=LEAK_KINDS, default=None, dest="model")
        p.add_argument("--base", type=float, default=None)
        p.add_argument("--seed", type=int, default=None,
                       help="master seed (required; replica i uses derive_stream(seed, i))")
        p.add_argument("--out", default=None, help="output file (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--check", default=None, metavar="CRITERION",
                       help="compare the headline result against the pinned expectation; exit 2 on mismatch")

    p = sub.add_parser("simulate", help="run one trajectory")
    common(p)
    p.add_argument("--init", default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--jump-budget", type=int, default=None, dest="jump_budget")
    p.add_argument("--log", default=None, help="write the event log CSV here")

    p = sub.add_parser("extinction", help="ensemble of trapping times")
    common(p)
    p.add_argument("--init", default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--horizon", type=float, default=None)
    p.add_argument("--jump-budget", type=int, default=None, dest="jump_budget")
    p.add_argument("--acceptance", action="store_true", default=None,
                   help="fail loudly if any replica is censored")

    p = sub.add_parser("occupancy", help="P(state in W at t | alive at t)")
    common(p)
    p.add_argument("--init", default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--t", type=float, default=None)

    p = sub.add_parser("ladder", help="first hit of the full ladder")
    common(p)
    p.add_argument("--init", default=None)
    p.add_argument("--replicas", type=int, default=None)

    p = sub.add_parser("coupling", help="coalescence race over plateau pairs")
    common(p)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--convention", choices=CONVENTIONS, default=None)
    p.add_argument("--spread", type=int, default=None)
    p.add_argument("--jump-budget", type=int, default=None, dest="jump_budget")

    p = sub.add_parser("aux-occupancy", help="time-average W occupation of the no-trap dynamics")
    common(p)
    p.add_argument("--init", default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--burn", type=float, default=None, dest="burn_in")
    p.add_argument("--run", type=float, default=None, dest="run_time")

    p = sub.add_parser("cn", help="trapping-scale quantile from an extinction ensemble")
    common(p)
    p.add_argument("--init", default=None)
    p.add_argument("--replicas", type=int, default=None)
    p.add_argument("--jump-budget", type=int, default=None, dest="jump_budget")

    p = sub.add_parser("oracle", help="exact small-n answers (linear solve)")
    common(p, seed_required=False)
    p.add_argument("--cap", type=int, default=None)

    return top


def _merge(args) -> RunConfig:
    if args.experiment is None:
        raise CliError("a command is required (see --help)")
    if getattr(args, "config", None):
        cfg = load_config(args.config)
        cfg.experiment = args.experiment
    else:
        cfg = RunConfig(experiment=args.experiment)
    overrides = {
        "n": "n",
        "model": "leak_kind",
        "base": "base",
        "seed": "master_seed",
        "replicas": "replicas",
        "init": "init",
        "horizon": "horizon",
        "jump_budget": "jump_budget",
        "convention": "convention",
        "t": "t",
        "burn_in": "burn_in",
        "run_time": "run_time",
        "cap": "cap",
        "spread": "spread",
        "out": "out",
        "format": "format",
        "workers": "workers",
        "log": "log",
        "check": "check",
        "acceptance": "acceptance",
    }
    for arg_name, attr in overrides.items():
        value = getattr(args, arg_name, None)
        if value is not None:
            if arg_name == "init":
                value = _parse_init(value)
            setattr(cfg, attr, value)
    _validate(cfg)
    return cfg


def _payload_head(cfg: RunConfig) -> dict:
    return {
        "schema": ex.JSON_SCHEMA_VERSION,
        "tool": {"name": "spikeleak", "version": __version__},
        "seed_rule": ex.SEED_RULE,
        "config": cfg.echo(),
    }


def _emit_json(cfg: RunConfig, payload: dict) -> None:
    if cfg.out:
        ex.write_json(cfg.out, payload)
    else:
        json.dump(payload, sys.stdout, indent=2)
        sys.stdout.write("\n")


def _emit_records_csv(cfg: RunConfig, fields, rows) -> None:
    def render(x):
        if isinstance(x, float):
            return "" if math.isnan(x) else format(x, ".17g")
        if x is None:
            return ""
        if isinstance(x, bool):
            return str(int(x))
        return str(x)

    target = open(cfg.out, "w", newline="") if cfg.out else sys.stdout
    try:
        w = csv.writer(target)
        w.writerow(fields)
        for row in rows:
            w.writerow([render(x) for x in row])
    finally:
        if cfg.out:
            target.close()


_CHECKED_HEADLINE = {
    "extinction": lambda rep: rep.aggregates.get("mean"),
    "occupancy": lambda rep: rep.estimate,
    "ladder": lambda rep: rep.fraction_by_t_prime,
    "coupling": lambda rep: rep.p_coalesce_first,
    "aux-occupancy": lambda rep: rep.mean,
}


def _run_check(cfg: RunConfig, observed: float) -> int:
    if observed is None:
        print(f"check {cfg.check}: no headline value produced", file=sys.stderr)
        return 2
    try:
        entry = ex.expectation(cfg.check)
    except KeyError as err:
        raise CliError(str(err)) from None
    ok = ex.check_expectation(cfg.check, observed)
    line = (
        f"check {cfg.check}: observed {observed!r} against "
        f"{entry.get('kind', 'interval')} {entry['value']!r}"
    )
    if ok:
        print(line + " -> ok")
        return 0
    print(line + " -> MISMATCH", file=sys.stderr)
    return 2


def parse_and_run(argv) -> int:
    args = build_parser().parse_args(argv)
    cfg = _merge(args)
    run = {
        "simulate": _cmd_simulate,
        "extinction": _cmd_extinction,
        "occupancy": _cmd_occupancy,
        "ladder": _cmd_ladder,
        "coupling": _cmd_coupling,
        "aux-occupancy": _cmd_aux,
        "cn": _cmd_cn,
        "oracle": _cmd_oracle,
    }[cfg.experiment]
    rep = run(cfg)
    if cfg.check:
        getter = _CHECKED_HEADLINE.get(cfg.experiment)
        observed = getter(rep) if getter else None
        if cfg.experiment == "cn":
            observed = rep.value
        return _run_check(cfg, observed)
    return 0


def _cmd_simulate(cfg: RunConfig):
    spec = cfg.spec()
    gen = derive_stream(cfg.master_seed, 0).generator()
    if isinstance(cfg.init, str):
        u0 = ex._resolve_init(cfg.init, spec.n, gen)
    else:
        u0 = PotentialList(cfg.init)
    stop = StopCondition(absorbed=True, horizon=cfg.horizon, budget=cfg.jump_budget)
    summary = simulate(u0, spec, stop, gen, record=("S3", "W", "L"),
                       log_events=cfg.log is not None, track_w_time=True)
    if cfg.log:
        write_event_log(cfg.log, summary)
    payload = _payload_head(cfg)
    payload["summary"] = {
        "stop_reason": summary.stop_reason,
        "tau": summary.tau,
        "jumps": summary.jumps,
        "z_spike": summary.z_spike,
        "z_leak": summary.z_leak,
        "hit_times": summary.hit_times,
        "final_state": list(summary.final_state.potentials),
        "w_occupation": summary.w_occupation,
    }
    _emit_json(cfg, payload)
    return summary


def _cmd_extinction(cfg: RunConfig):
    rep = ex.extinction_ensemble(
        cfg.spec(), cfg.init, cfg.replicas, cfg.master_seed,
        jump_budget=cfg.jump_budget, horizon=cfg.horizon,
        workers=cfg.workers, acceptance=bool(cfg.acceptance),
    )
    if cfg.format == "csv":
        rows = [[r.replica, r.tau, r.jumps, r.z_spike, r.z_leak, r.stop_reason]
                for r in rep.records]
        _emit_records_csv(cfg, ["replica", "tau", "jumps", "z_spike", "z_leak", "stop_reason"], rows)
    else:
        payload = _payload_head(cfg)
        payload.update({k: v for k, v in rep.payload().items() if k not in payload})
        _emit_json(cfg, payload)
    return rep


def _report_cmd(cfg: RunConfig, rep):
    payload = _payload_head(cfg)
    body = rep.payload()
    payload["record_fields"] = body["record_fields"]
    payload["records"] = body["records"]
    payload["aggregates"] = body["aggregates"]
    if cfg.format == "csv":
        _emit_records_csv(cfg, body["record_fields"], body["records"])
    else:
        _emit_json(cfg, payload)
    return rep


def _cmd_occupancy(cfg: RunConfig):
    if cfg.t is None:
        raise CliError("occupancy needs --t")
    rep = ex.occupancy(cfg.spec(), cfg.t, cfg.replicas, cfg.master_seed,
                       init=cfg.init, workers=cfg.workers)
    return _report_cmd(cfg, rep)


def _cmd_ladder(cfg: RunConfig):
    rep = ex.ladder_hitting(cfg.spec(), cfg.replicas, cfg.master_seed,
                            init=cfg.init, workers=cfg.workers)
    return _report_cmd(cfg, rep)


def _cmd_coupling(cfg: RunConfig):
    rep = ex.coupling_stats(
        cfg.spec(), cfg.convention, cfg.replicas, cfg.master_seed,
        spread=cfg.spread, jump_budget=cfg.jump_budget or 10**7,
        workers=cfg.workers,
    )
    if cfg.format == "csv":
        if not cfg.out:
            raise CliError("coupling csv output needs --out")
        write_outcomes(cfg.out, rep.outcomes)
        return rep
    payload = _payload_head(cfg)
    body = rep.payload()
    payload["record_fields"] = body["record_fields"]
    payload["records"] = body["records"]
    payload["aggregates"] = body["aggregates"]
    _emit_json(cfg, payload)
    return rep


def _cmd_aux(cfg: RunConfig):
    if cfg.burn_in is None or cfg.run_time is None:
        raise CliError("aux-occupancy needs --burn and --run")
    rep = ex.aux_occupancy(cfg.spec(), cfg.burn_in, cfg.run_time,
                           replicas=cfg.replicas, master_seed=cfg.master_seed,
                           init=cfg.init, workers=cfg.workers)
    return _report_cmd(cfg, rep)


def _cmd_cn(cfg: RunConfig):
    rep = ex.extinction_ensemble(
        cfg.spec(), cfg.init, cfg.replicas, cfg.master_seed,
        jump_budget=cfg.jump_budget, workers=cfg.workers, acceptance=True,
    )
    q = ex.estimate_c(rep.taus)
    payload = _payload_head(cfg)
    payload["estimate"] = {
        "c": q.value,
        "lo99": q.lo99,
        "ci99": list(q.ci99),
        "p": q.p,
        "resamples": q.resamples,
        "samples": len(rep.records),
    }
    _emit_json(cfg, payload)
    return q


def _cmd_oracle(cfg: RunConfig):
    spec = cfg.spec()
    if spec.n > 3:
        raise CliError("the exact oracle is limited to n in {2, 3}")
    body = oracle.report(spec.n, cfg.cap, spec)
    payload = _payload_head(cfg)
    payload["oracle"] = body
    _emit_json(cfg, payload)
    return body


def main(argv=None) -> int:
    try:
        return parse_and_run(sys.argv[1:] if argv is None else argv)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
