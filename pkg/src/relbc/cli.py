"""Command-line entry point.

Subcommands: ``simulate`` (Monte Carlo reliability runs), ``bind-oracle``
(exact binding search), ``chsh`` (restricted-game value and ceiling),
``bounds`` (binding-ceiling tables), ``verify-transcript`` (replay an
exported transcript).  Machine-readable JSON/CSV is the primary output;
``--pretty`` renders the same data as text tables.

Exit codes: 0 success, 1 validation error, 2 enumeration-budget refusal.
All randomness flows from the ``--seed`` argument through named substreams
(per trial, per station, per node), so repeated runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Optional, Sequence

from . import adversary, analysis, games, tree as tt
from .field import Field
from .protocol import KIND_FQ, KIND_SINGLE, KIND_TREE, KINDS, Transcript, verify_fq, verify_tree
from .sim import ResourceGuardError

OUT_DIR_ENV = "RELBC_OUT_DIR"


class ConfigError(ValueError):
    """Invalid experiment configuration; message names the bad field."""


@dataclass
class ExperimentConfig:
    protocol: str
    k: int
    q: int
    p: float
    m: int
    n_stations: int
    prune_lag: int
    seed: Optional[int]
    trials: int
    engine: str = "fast"
    jobs: int = 1
    out_csv: Optional[str] = None
    out_json: Optional[str] = None

    def validate(self) -> None:
        errs = []
        if self.protocol not in KINDS:
            errs.append(f"protocol: must be one of {KINDS}, got {self.protocol!r}")
        if self.k < 1:
            errs.append(f"k: must be >= 1, got {self.k}")
        try:
            Field(self.q)
        except ValueError as exc:
            errs.append(f"q: {exc}")
        if not 0.0 <= self.p <= 1.0:
            errs.append(f"p: must be in [0,1], got {self.p}")
        if self.m < 1:
            errs.append(f"m: must be >= 1, got {self.m}")
        if self.protocol == KIND_TREE and self.n_stations < 3:
            errs.append(f"n_stations: tree protocol needs >= 3, got {self.n_stations}")
        if self.prune_lag < 1:
            errs.append(f"N: pruning lag must be >= 1, got {self.prune_lag}")
        if self.seed is None:
            errs.append("seed: required for simulation (reproducibility contract)")
        if self.trials < 1:
            errs.append(f"trials: must be >= 1, got {self.trials}")
        if self.engine not in ("fast", "events"):
            errs.append(f"engine: must be 'fast' or 'events', got {self.engine!r}")
        if self.jobs < 1:
            errs.append(f"jobs: must be >= 1, got {self.jobs}")
        if errs:
            raise ConfigError("; ".join(errs))

    @classmethod
    def from_args(cls, args: argparse.Namespace) -> "ExperimentConfig":
        doc = {}
        if args.config:
            try:
                doc = json.loads(Path(args.config).read_text())
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"config: {exc}") from exc
            if not isinstance(doc, dict):
                raise ConfigError("config: top level must be a JSON object")
        def pick(name, default):
            cli_val = getattr(args, name.replace("-", "_"), None)
            if cli_val is not None:
                return cli_val
            return doc.get(name, default)
        cfg = cls(
            protocol=pick("protocol", KIND_TREE),
            k=pick("k", 10),
            q=pick("q", 97),
            p=pick("p", 0.0),
            m=pick("m", 1),
            n_stations=pick("n_stations", 3),
            prune_lag=pick("N", 2),
            seed=pick("seed", None),
            trials=pick("trials", 1000),
            engine=pick("engine", "fast"),
            jobs=pick("jobs", 1),
            out_csv=pick("out_csv", None),
            out_json=pick("out_json", None),
        )
        cfg.validate()
        return cfg


def _out_path(path: str) -> Path:
    base = os.environ.get(OUT_DIR_ENV)
    p = Path(path)
    if base and not p.is_absolute():
        return Path(base) / p
    return p


def _emit(text: str, path: Optional[str]) -> None:
    if path:
        target = _out_path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)
    else:
        print(text, end="" if text.endswith("\n") else "\n")


def _pretty_table(rows: list[dict]) -> str:
    if not rows:
        return "(empty)\n"
    cols = list(rows[0])
    widths = {
        c: max(len(c), *(len(_fmt(r.get(c))) for r in rows)) for c in cols
    }
    lines = ["  ".join(c.ljust(widths[c]) for c in cols)]
    lines.append("  ".join("-" * widths[c] for c in cols))
    for r in rows:
        lines.append("  ".join(_fmt(r.get(c)).ljust(widths[c]) for c in cols))
    return "\n".join(lines) + "\n"


def _fmt(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return "" if v is None else str(v)


# ---------------------------------------------------------------------------
# Subcommands


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.from_args(args)
    rep = analysis.monte_carlo_reliability(
        cfg.protocol,
        cfg.k,
        cfg.p,
        cfg.m,
        cfg.trials,
        cfg.seed,
        n_stations=cfg.n_stations,
        engine=cfg.engine,
        q_modulus=cfg.q,
        prune_lag=cfg.prune_lag,
    )
    comm_samples = min(cfg.trials, args.comm_samples)
    comm_mean = analysis.measure_comm_bits(
        cfg.protocol, cfg.k, cfg.q, cfg.p, cfg.m, cfg.seed, comm_samples,
        n_stations=cfg.n_stations, prune_lag=cfg.prune_lag,
    )
    row = analysis.report_row(rep, cfg.q, cfg.prune_lag, comm_mean)
    if args.transcript_out:
        from .sim import LossModel, run_protocol
        res = run_protocol(
            cfg.protocol, cfg.k, Field(cfg.q), d=args.commit_bit,
            seed=cfg.seed, trial=0, loss=LossModel(p=cfg.p, m=cfg.m),
            n_stations=cfg.n_stations, prune_lag=cfg.prune_lag,
        )
        _emit(res.transcript.to_json() + "\n", args.transcript_out)
    if cfg.out_csv:
        _emit(analysis.rows_to_csv([row]), cfg.out_csv)
    if args.pretty:
        _emit(_pretty_table([row]), None)
    else:
        _emit(rep.to_json() + "\n", cfg.out_json)
    return 0


def cmd_bind_oracle(args: argparse.Namespace) -> int:
    field = Field(args.q)
    report = adversary.brute_force_binding(
        args.protocol, args.k, field, reduced=not args.unreduced, budget=args.budget
    )
    if args.pretty:
        _emit(_pretty_table([json.loads(report.to_json())]), None)
    else:
        _emit(report.to_json() + "\n", args.out)
    return 0


def _parse_y_dist(text: str, q: int) -> tuple[Fraction, ...]:
    try:
        entries = tuple(Fraction(t.strip()) for t in text.split(","))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"y-dist: {exc}") from exc
    if len(entries) != q:
        raise ConfigError(f"y-dist: need {q} entries, got {len(entries)}")
    return entries


def cmd_chsh(args: argparse.Namespace) -> int:
    field = Field(args.q)
    support = (
        tuple(int(t) for t in args.support.split(","))
        if args.support
        else tuple(range(args.q))
    )
    if args.y_dist:
        spec = games.GameSpec(field, support, _parse_y_dist(args.y_dist, args.q))
    else:
        spec = games.GameSpec.uniform(field, support)
    value = games.chsh_value(spec, budget=args.budget)
    out = value.to_json(spec)
    if args.pretty:
        doc = json.loads(out)
        _emit(
            f"q={doc['q']}  |S|={len(doc['S'])}  p={doc['p']}\n"
            f"value = {doc['value']} ({doc['value_float']:.6g})\n"
            f"bound = {doc['bound']:.6g}   gap = {doc['gap']:.6g}\n",
            None,
        )
    else:
        _emit(out + "\n", args.out)
    return 0


def cmd_bounds(args: argparse.Namespace) -> int:
    ks = [int(t) for t in args.k.split(",")]
    qs = [int(t) for t in args.q.split(",")]
    ns = [int(t) for t in args.n.split(",")]
    rows = analysis.bound_table(ks, qs, ns)
    if args.invert_epsilon is not None:
        for k in ks:
            rows.append(
                {
                    "k": k,
                    "target_epsilon": args.invert_epsilon,
                    "min_q": analysis.invert_binding_bound(k, args.invert_epsilon),
                }
            )
    if args.pretty:
        _emit(_pretty_table(rows), None)
    else:
        _emit(json.dumps(rows, indent=2) + "\n", args.out)
    return 0


def cmd_verify_transcript(args: argparse.Namespace) -> int:
    try:
        text = Path(args.transcript).read_text()
        tr = Transcript.from_json(text)
    except (OSError, KeyError, json.JSONDecodeError) as exc:
        raise ConfigError(f"transcript: {exc}") from exc
    field = Field(tr.q)
    if tr.kind == KIND_TREE:
        coloring = tt.make_coloring(tr.k, tr.n_stations)
        verdict = verify_tree(tr, tr.liveness(), coloring, field)
    elif tr.kind in (KIND_SINGLE, KIND_FQ):
        reveal = tr.reveals.get(str(tr.k))
        if reveal is None:
            raise ConfigError("transcript: no reveal message present")
        verdict = verify_fq(tr, reveal.d, reveal.claim, field)
    else:
        raise ConfigError(f"transcript: unknown protocol kind {tr.kind!r}")
    _emit(
        json.dumps(
            {
                "outcome": verdict.outcome,
                "revealed": verdict.revealed,
                "reason": verdict.reason,
            },
            indent=2,
        )
        + "\n",
        args.out,
    )
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="relbc",
        description="Relativistic bit-commitment laboratory: simulators, "
        "exact cheating oracles and bound tables.",
    )
    sub = parser.add_subparsers(dest="command")

    sim = sub.add_parser("simulate", help="Monte Carlo reliability runs")
    sim.add_argument("--config", help="JSON config file; flags override it")
    sim.add_argument("--protocol", choices=KINDS)
    sim.add_argument("--k", type=int)
    sim.add_argument("--q", type=int)
    sim.add_argument("--p", type=float)
    sim.add_argument("--m", type=int)
    sim.add_argument("--n-stations", type=int, dest="n_stations")
    sim.add_argument("--N", type=int, dest="N", help="pruning information lag")
    sim.add_argument("--seed", type=int)
    sim.add_argument("--trials", type=int)
    sim.add_argument("--engine", choices=("fast", "events"))
    sim.add_argument("--jobs", type=int, help="trial parallelism (results are order-canonical)")
    sim.add_argument("--out-csv", dest="out_csv")
    sim.add_argument("--out-json", dest="out_json")
    sim.add_argument("--transcript-out", help="also export one replayable transcript")
    sim.add_argument("--commit-bit", type=int, default=0, choices=(0, 1))
    sim.add_argument("--comm-samples", type=int, default=16,
                     help="event-driven runs used for the measured cost column")
    sim.add_argument("--pretty", action="store_true")
    sim.set_defaults(func=cmd_simulate)

    bo = sub.add_parser("bind-oracle", help="exact sum-binding search")
    bo.add_argument("--protocol", choices=KINDS, required=True)
    bo.add_argument("--k", type=int, default=2)
    bo.add_argument("--q", type=int, required=True)
    bo.add_argument("--unreduced", action="store_true",
                    help="tree search without the fallback-branch reduction")
    bo.add_argument("--budget", type=int, default=adversary.DEFAULT_BUDGET)
    bo.add_argument("--out")
    bo.add_argument("--pretty", action="store_true")
    bo.set_defaults(func=cmd_bind_oracle)

    ch = sub.add_parser("chsh", help="restricted-game classical value")
    ch.add_argument("--q", type=int, required=True)
    ch.add_argument("--support", help="comma-separated residues for the first input")
    ch.add_argument("--uniform", action="store_true",
                    help="uniform second-input distribution (the default)")
    ch.add_argument("--y-dist", dest="y_dist",
                    help="comma-separated rationals, one per residue")
    ch.add_argument("--budget", type=int, default=games.DEFAULT_BUDGET)
    ch.add_argument("--out")
    ch.add_argument("--pretty", action="store_true")
    ch.set_defaults(func=cmd_chsh)

    bd = sub.add_parser("bounds", help="binding-ceiling tables")
    bd.add_argument("--k", default="2", help="comma-separated list")
    bd.add_argument("--q", default="97", help="comma-separated list")
    bd.add_argument("--n", default="3", help="comma-separated station counts")
    bd.add_argument("--invert-epsilon", type=float,
                    help="also report the minimal modulus hitting this target")
    bd.add_argument("--out")
    bd.add_argument("--pretty", action="store_true")
    bd.set_defaults(func=cmd_bounds)

    vt = sub.add_parser("verify-transcript", help="replay an exported transcript")
    vt.add_argument("transcript")
    vt.add_argument("--out")
    vt.set_defaults(func=cmd_verify_transcript)

    return parser


def dispatch(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return 1
    try:
        return args.func(args)
    except ResourceGuardError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return 2
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
