"""Command-line front end.

Exit codes: 0 success, 1 a check failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .auction import DEFAULT_INCREMENT, normalized_balance, run_vcg
from .detection import DetectorConfig, PdMatrix, pd_from_snr, roc_curve
from .fixtures import check_worked_example, example_inputs
from .game import CharacteristicFunction, characteristic_function, members
from .properties import run_property_suite
from .report import (comparison_table, format_comparison, format_matrix, summarize,
                     write_cumulative_csv, write_json, write_scatter_csv, write_slots_csv)
from .simulator import MODELS, ScenarioConfig, run_models
from .solutions import SOLUTIONS, core_contains, normalize_100, solve

EXIT_OK, EXIT_CHECK_FAILED, EXIT_INVALID = 0, 1, 2


class InvalidInput(Exception):
    pass


def _load_json(path: str) -> dict:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc


def _emit_json(obj, out: str | None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _table_stream(out: str | None):
    # keep stdout clean for JSON when no output file is given
    return sys.stdout if out else sys.stderr


def _write_csv(rows, header, out: str | None) -> None:
    fh = open(out, "w", newline="") if out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    finally:
        if out:
            fh.close()


def coalition_label(s: int) -> str:
    return "{" + ",".join(str(i + 1) for i in members(s)) + "}"


def cmd_roc(args) -> int:
    cfg = DetectorConfig(p_fa=args.p_fa)
    rows = []
    for snr in args.snr:
        for pfa, pd in roc_curve(cfg, snr, args.points):
            rows.append([f"{snr:g}", f"{pfa:.10g}", f"{pd:.10g}"])
    _write_csv(rows, ["snr_db", "p_fa", "p_d"], args.out)
    return EXIT_OK


def cmd_pdmap(args) -> int:
    if args.step <= 0 or args.high < args.low:
        raise InvalidInput("need step > 0 and high >= low")
    cfg = DetectorConfig(p_fa=args.p_fa)
    grid = np.arange(args.low, args.high + args.step / 2, args.step)
    rows = [[f"{s:.6g}", f"{pd_from_snr(cfg, float(s)):.10g}"] for s in grid]
    _write_csv(rows, ["snr_db", "p_d"], args.out)
    return EXIT_OK


def _game_from_doc(doc: dict) -> CharacteristicFunction:
    try:
        pd = PdMatrix(doc["pd_matrix"], doc["sensed"])
        return characteristic_function(pd, doc["decisions"], pd.sensed)
    except KeyError as exc:
        raise InvalidInput(f"missing key {exc} (need pd_matrix, sensed, decisions)") from exc


def cmd_game(args) -> int:
    v = _game_from_doc(_load_json(args.input))
    _emit_json(v.to_dict(), args.out)
    stream = _table_stream(args.out)
    print(f"{'Coalition':<14}{'Worth':>10}", file=stream)
    for s in sorted(range(1, v.grand + 1), key=lambda s: (bin(s).count("1"), members(s))):
        print(f"{coalition_label(s):<14}{v(s):>10.4f}", file=stream)
    return EXIT_OK


def cmd_solve(args) -> int:
    try:
        v = CharacteristicFunction.from_dict(_load_json(args.input))
    except (ValueError, TypeError) as exc:
        raise InvalidInput(str(exc)) from exc
    doc = {}
    rows = []
    for name in SOLUTIONS:
        x = solve(v, name)
        norm = normalize_100(np.clip(x.values, 0.0, None))
        core = core_contains(v, x)
        doc[name] = {"raw": x.tolist(), "normalized": norm.tolist(), "in_core": core.contains,
                     "worst_coalition": core.worst_coalition}
        rows.append(norm.values)
    _emit_json(doc, args.out)
    stream = _table_stream(args.out)
    table = np.array(rows).T
    print(format_matrix(table, [f"SU{i + 1}" for i in range(v.n_players)],
                        ["Shapley", "Tau", "Nucleolus"], "Payoff"), file=stream)
    print("In core: " + ", ".join(f"{k}={doc[k]['in_core']}" for k in SOLUTIONS), file=stream)
    return EXIT_OK


def cmd_auction(args) -> int:
    doc = _load_json(args.input)
    try:
        bids = doc["bids"]
        idle = doc["idle_channels"]
        caps = doc["capacity_estimates"]
    except KeyError as exc:
        raise InvalidInput(f"missing key {exc}") from exc
    wallets = doc.get("wallets")
    increment = args.increment if args.increment is not None else doc.get("increment",
                                                                          DEFAULT_INCREMENT)
    outcome = run_vcg(bids, idle, caps, increment, wallets=wallets)
    result = outcome.to_dict()
    norm = normalized_balance(outcome.balances)
    result["normalized_balances"] = norm.tolist() if norm is not None else None
    result["wallets"] = list(wallets) if wallets is not None else list(bids)
    _emit_json(result, args.out)

    stream = _table_stream(args.out)
    n = len(bids)
    cols = [f"SU{i + 1}" for i in range(n)]
    print(f"{'':<22}" + "".join(f"{c:>10}" for c in cols), file=stream)

    def row(label, values):
        cells = "".join(f"{'-':>10}" if x is None else
                        (f"{x:>10.4f}" if isinstance(x, float) else f"{x:>10}") for x in values)
        print(f"{label:<22}" + cells, file=stream)

    row("Wallet", [float(w) for w in result["wallets"]])
    current = [float(b) for b in bids]
    for r in outcome.rounds:
        row("Bids", current)
        row("Price paid", [r.price if i == r.winner else None for i in range(n)])
        row("Channel allocated", [f"#{r.channel + 1}" if i == r.winner else None for i in range(n)])
        row("Rate (Mbps)", [float(caps[r.winner][r.channel]) if i == r.winner else None
                            for i in range(n)])
        current = list(r.bids_after)
    row("Balance", [float(b) for b in outcome.balances])
    if norm is not None:
        row("Norm. balance", norm.tolist())
    return EXIT_OK


def _scenario(args, model: str) -> ScenarioConfig:
    data = {}
    if args.config:
        doc = _load_json(args.config)
        data = dict(doc.get("config", doc))
    overrides = {"n_slots": args.slots, "n_sus": args.sus, "n_channels": args.channels,
                 "seed": args.seed, "solution": args.solution, "increment": args.increment}
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if "n_sus" in overrides or "n_channels" in overrides:
        # stored prefs are tied to the old dimensions
        data.pop("sensing_prefs", None)
    data.update(overrides)
    data["model"] = model
    try:
        return ScenarioConfig.from_dict(data)
    except (TypeError, ValueError) as exc:
        raise InvalidInput(str(exc)) from exc


def _manifest(command: str, cfg: ScenarioConfig, artifacts: list[str]) -> dict:
    return {"command": command, "config": cfg.to_dict(), "seed": cfg.seed,
            "artifacts": artifacts, "version": __version__,
            "timestamp": datetime.now(timezone.utc).isoformat()}


def cmd_simulate(args) -> int:
    model = args.model
    if model is None and args.config:
        model = _load_json(args.config).get("config", {}).get("model")
    cfg = _scenario(args, model or "cgjsja")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    result = run_models(cfg, (cfg.model,))[cfg.model]
    write_slots_csv(result, out / "slots.csv")
    write_scatter_csv(result, out / "scatter.csv")
    summary = summarize(result)
    summary["config"] = cfg.to_dict()
    write_json(summary, out / "summary.json")
    write_json(_manifest("simulate", cfg, ["slots.csv", "scatter.csv", "summary.json"]),
               out / "manifest.json")
    print(f"{result.model}: cumulative sum rate {summary['cumulative_sum_rate_mbps']:.2f} Mbps "
          f"over {cfg.n_slots} slots; outputs in {out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _scenario(args, "cgjsja")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    results = run_models(cfg, MODELS)
    summaries = {m: summarize(r) for m, r in results.items()}
    table = comparison_table(summaries)
    write_cumulative_csv(results, out / "cumulative.csv")
    write_json({"config": cfg.to_dict(), "models": summaries, "table": table},
               out / "comparison.json")
    (out / "comparison.txt").write_text(format_comparison(table) + "\n")
    write_json(_manifest("compare", cfg, ["cumulative.csv", "comparison.json", "comparison.txt"]),
               out / "manifest.json")
    print(format_comparison(table))
    return EXIT_OK


def cmd_fixture(args) -> int:
    if args.write_inputs:
        out = Path(args.write_inputs)
        out.mkdir(parents=True, exist_ok=True)
        for name, doc in example_inputs().items():
            (out / name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    overrides = {}
    for su, ch, value in args.set_pd or []:
        overrides[(int(su) - 1, int(ch) - 1)] = float(value)
    try:
        results = check_worked_example(args.tolerance, overrides, gated=not args.no_gating)
    except (ValueError, IndexError) as exc:
        raise InvalidInput(str(exc)) from exc
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_CHECK_FAILED


def cmd_properties(args) -> int:
    if args.instances < 1:
        raise InvalidInput("--instances must be at least 1")
    report = run_property_suite(args.instances, args.seed, (args.min_sus, args.max_sus),
                                (1, args.max_channels), gated=not args.no_gating,
                                solutions=not args.game_only, grid_checks=args.grid_checks)
    for line in report.lines():
        print(line)
    for ce in report.counterexamples:
        print("counterexample:", json.dumps(ce))
    return EXIT_OK if report.ok else EXIT_CHECK_FAILED


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="coopsense", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("roc", help="ROC curves as CSV (snr_db,p_fa,p_d)")
    s.add_argument("--snr", type=float, nargs="+", default=[-25.0, -20.0, -15.0, -10.0, -5.0])
    s.add_argument("--points", type=int, default=99)
    s.add_argument("--p-fa", type=float, default=0.05)
    s.add_argument("--out")
    s.set_defaults(func=cmd_roc)

    s = sub.add_parser("pdmap", help="detection probability over an SNR grid (snr_db,p_d)")
    s.add_argument("--low", type=float, default=-25.0)
    s.add_argument("--high", type=float, default=-5.0)
    s.add_argument("--step", type=float, default=0.5)
    s.add_argument("--p-fa", type=float, default=0.05)
    s.add_argument("--out")
    s.set_defaults(func=cmd_pdmap)

    s = sub.add_parser("game", help="characteristic function from {pd_matrix, sensed, decisions}")
    s.add_argument("input")
    s.add_argument("--out")
    s.set_defaults(func=cmd_game)

    s = sub.add_parser("solve", help="Shapley, tau and nucleolus of a game JSON")
    s.add_argument("input")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("auction", help="sequential channel auction trace")
    s.add_argument("input")
    s.add_argument("--increment", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_auction)

    for name, func in (("simulate", cmd_simulate), ("compare", cmd_compare)):
        s = sub.add_parser(name, help="multi-slot simulation" if name == "simulate"
                           else "all five models on matched draws")
        if name == "simulate":
            s.add_argument("--model", choices=MODELS)
        s.add_argument("--slots", type=int)
        s.add_argument("--sus", type=int)
        s.add_argument("--channels", type=int)
        s.add_argument("--seed", type=int)
        s.add_argument("--solution", choices=SOLUTIONS)
        s.add_argument("--increment", type=float)
        s.add_argument("--config", help="JSON config or a previous run's manifest.json")
        s.add_argument("--out", required=True)
        s.set_defaults(func=func)

    s = sub.add_parser("fixture-paper-example", help="replay the 3x3 worked example")
    s.add_argument("--tolerance", type=float, help="override every per-check tolerance")
    s.add_argument("--set-pd", nargs=3, action="append", metavar=("SU", "CH", "P"),
                   help="replace one detection probability (1-based indices)")
    s.add_argument("--no-gating", action="store_true",
                   help="evaluate the worth formula without the agreement gate")
    s.add_argument("--write-inputs", metavar="DIR",
                   help="also write the example's game and auction input JSON to DIR")
    s.set_defaults(func=cmd_fixture)

    s = sub.add_parser("properties", help="randomised game and solution property checks")
    s.add_argument("--instances", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--min-sus", type=int, default=2)
    s.add_argument("--max-sus", type=int, default=6)
    s.add_argument("--max-channels", type=int, default=8)
    s.add_argument("--grid-checks", type=int, default=0,
                   help="3-player instances also checked against the grid-search nucleolus")
    s.add_argument("--game-only", action="store_true")
    s.add_argument("--no-gating", action="store_true")
    s.set_defaults(func=cmd_properties)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
