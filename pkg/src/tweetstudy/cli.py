"""``tweetstudy`` command line: one subcommand per pipeline stage."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import eventstudy, ingest, miner, pipeline, report, stats, strategy, synthetic, trader


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.stem + suffix)


def cmd_ingest(a) -> int:
    store = ingest.ingest_dirs(a.candles, a.tweets, a.symbols)
    ingest.save_store(store, a.out)
    gaps = {s: ingest.scan_gaps(store.series[s]).missing_bars for s in sorted(store.series)}
    print(f"{len(store.series)} symbols, {sum(map(len, store.series.values()))} candles, "
          f"{len(store.tweets)} tweets, {sum(gaps.values())} missing bars -> {a.out}")
    return 0


def cmd_featurize(a) -> int:
    store = ingest.load_store(a.store)
    vocab, bins = pipeline.featurize_store(store, a.lexicon, a.stopwords, a.min_count)
    print(f"{len(store.tweets)} tweets featurized; vocabulary {len(vocab)} words; "
          f"{len(bins)} binned variables")
    return 0


def cmd_align(a) -> int:
    store = ingest.load_store(a.store)
    panel, drops = eventstudy.build_panel(store.tweets, store.series, store.symbols)
    out = Path(a.out)
    eventstudy.write_panel(panel, out)
    _sidecar(out, "_drops.json").write_text(json.dumps(drops.as_dict(), indent=2, sort_keys=True) + "\n")
    print(f"{len(panel)} windows; dropped {dict(sorted(drops.counts.items()))}")
    return 0


def cmd_mine(a) -> int:
    store = ingest.load_store(a.store)
    vocab, bins = pipeline.read_features(a.store)
    panel = eventstudy.read_panel(a.panel)
    found = miner.enumerate_conditions(panel, store.tweets, a.max_arity, a.min_support, vocab, bins)
    miner.write_stats(found, a.out)
    print(f"{len(found)} conditions with support >= {a.min_support} -> {a.out}")
    return 0


def cmd_ttest(a) -> int:
    panel = eventstudy.read_panel(a.panel)
    mat = stats.ttest_matrix(panel)
    table, long = stats.write_matrix(mat, a.out)
    print(f"n = {mat.n}; wrote {table} and {long}")
    return 0


def cmd_select(a) -> int:
    found = miner.read_stats(a.stats)
    plans = strategy.select_beneficial(found, a.spread, a.er_mode)
    strategy.emit_datasheet(plans, a.out)
    print(f"{len(plans)} of {len(found)} conditions selected -> {a.out}")
    return 0


def cmd_backtest(a) -> int:
    store = ingest.load_store(a.store)
    _, bins = pipeline.read_features(a.features or a.store)
    sheet = strategy.read_datasheet(a.sheet)
    res = trader.backtest(sheet, store, bins, trader.FeeSchedule(a.fee), a.spend, a.initial)
    out = Path(a.out)
    res.log.write(out)
    _sidecar(out, "_summary.json").write_text(json.dumps(res.summary, indent=2, sort_keys=True) + "\n")
    s = res.summary
    print(f"{s['trades']} trades, net pnl {s['net_pnl_btc']:.8f} BTC "
          f"(gross {s['gross_pnl_btc']:.8f}, fees {s['fees_btc']:.8f})")
    return 0


def cmd_run(a) -> int:
    sheet = strategy.read_datasheet(a.sheet)
    bins = pipeline.read_features(a.store)[1] if a.store else None
    scenario = trader.load_scenario(a.mock_scenario)
    live = trader.run_scenario(scenario, sheet, bins)
    if a.out:
        live.log.write(a.out)
    summary = trader.summarize(live.log, live.config.initial_btc, live.wallet)
    summary["requests"] = len(live.requests)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_report(a) -> int:
    panel = eventstudy.read_panel(a.panel) if a.panel else None
    matrix = Path(a.matrix).read_text() if a.matrix else None
    if matrix is None and panel is not None and len(panel):
        matrix = stats.ttest_matrix(panel)
    found = miner.read_stats(a.stats) if a.stats else None
    drops = None
    if a.panel and _sidecar(Path(a.panel), "_drops.json").exists():
        drops = json.loads(_sidecar(Path(a.panel), "_drops.json").read_text())
    summary = None
    if a.log:
        p = _sidecar(Path(a.log), "_summary.json")
        summary = json.loads(p.read_text()) if p.exists() else {"log": str(a.log)}
    written = report.render(a.out, panel, matrix, found, drops, summary)
    print("\n".join(str(p) for p in written))
    return 0


def cmd_synth(a) -> int:
    c = synthetic.generate(
        a.out, seed=a.seed, drift_scale=a.scale, n_symbols=a.symbols_count,
        n_bars=a.bars, n_tweets=a.tweets_count)
    print(f"{c.n_candles} candles, {c.n_tweets} tweets ({len(c.planted_ids)} planted) -> {c.root}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tweetstudy", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse candle and tweet files into a store")
    p.add_argument("--candles", required=True, help="directory of <SYMBOL>.csv files")
    p.add_argument("--tweets", required=True, help="directory of *.jsonl files")
    p.add_argument("--symbols", help="screen_name,symbol CSV (default: TWEETS/symbols.csv)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("featurize", help="sentiment, tokens, vocabulary and bins")
    p.add_argument("--store", required=True)
    p.add_argument("--lexicon")
    p.add_argument("--stopwords")
    p.add_argument("--min-count", type=int, default=50)
    p.set_defaults(func=cmd_featurize)

    p = sub.add_parser("align", help="build the event-window panel")
    p.add_argument("--store", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_align)

    p = sub.add_parser("mine", help="enumerate conditions and their statistics")
    p.add_argument("--panel", required=True)
    p.add_argument("--store", required=True)
    p.add_argument("--max-arity", type=int, default=2)
    p.add_argument("--min-support", type=int, default=50)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mine)

    p = sub.add_parser("ttest", help="period-by-period paired t-test matrix")
    p.add_argument("--panel", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ttest)

    p = sub.add_parser("select", help="choose beneficial conditions into a datasheet")
    p.add_argument("--stats", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--spread", type=float, default=strategy.MIN_SPREAD)
    p.add_argument("--er-mode", choices=("all", "at-sell"), default="all")
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("backtest", help="replay the store against a datasheet")
    p.add_argument("--store", required=True)
    p.add_argument("--sheet", required=True)
    p.add_argument("--fee", type=float, default=trader.TAKER_FEE)
    p.add_argument("--spend", type=float, default=0.5)
    p.add_argument("--initial", type=float, default=1.0)
    p.add_argument("--features", help="store whose bin schemes the datasheet was mined with "
                                      "(default: --store)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("run", help="live loop against mock clients")
    p.add_argument("--sheet", required=True)
    p.add_argument("--mock-scenario", required=True)
    p.add_argument("--store", help="featurized store whose bins the datasheet uses")
    p.add_argument("--out", help="trade log path")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="render tables and plot-ready files")
    p.add_argument("--panel")
    p.add_argument("--stats")
    p.add_argument("--matrix")
    p.add_argument("--log")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="write a synthetic corpus with a planted word signal")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0, help="drift multiplier (1 = +0.6%%)")
    p.add_argument("--symbols-count", type=int, default=20)
    p.add_argument("--bars", type=int, default=10_040)
    p.add_argument("--tweets-count", type=int, default=5_000)
    p.set_defaults(func=cmd_synth)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ingest.IngestError, FileNotFoundError, ValueError) as e:
        print(f"tweetstudy {args.command}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
