"""End-to-end wiring used by the command line and by full-pipeline runs.

Stage outputs are plain files, so every stage can also be run on its own:

    store/    candles/*.csv, tweets.jsonl, symbols.csv, features.json
    panel.csv
    stats/    conditions.csv, stats.csv
    matrix.txt (+ matrix_long.csv)
    datasheet.csv
    trades.csv (+ trades_summary.json)
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from . import eventstudy, miner, stats, strategy, trader
from .ingest import Store, load_store, write_tweets
from .miner import BinScheme, fit_bin_schemes
from .textlab import build_vocabulary, featurize_tweets, load_lexicon, load_stoplist

FEATURES_FILE = "features.json"


def featurize_store(store: Store, lexicon_path=None, stoplist_path=None,
                    min_count: int = 50) -> tuple[dict[str, int], dict[str, BinScheme]]:
    """Score sentiment, tokenize, build the vocabulary and fit global bins.
    Writes the results back into the store directory when it has one."""
    lexicon = load_lexicon(lexicon_path)
    stop = load_stoplist(stoplist_path)
    featurize_tweets(store.tweets, lexicon, stop)
    vocab = build_vocabulary((t.tokens for t in store.tweets), min_count, stop)
    bins = fit_bin_schemes(store.tweets)
    if store.root is not None:
        write_tweets(store.tweets, store.root / "tweets.jsonl")
        write_features(store.root, vocab, bins, min_count)
    return vocab, bins


def write_features(root, vocab: dict[str, int], bins: dict[str, BinScheme], min_count: int) -> None:
    doc = {"min_count": min_count, "vocabulary": vocab,
           "bins": [bins[k].to_dict() for k in sorted(bins)]}
    (Path(root) / FEATURES_FILE).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def read_features(root) -> tuple[dict[str, int], dict[str, BinScheme]]:
    path = Path(root) / FEATURES_FILE
    if not path.exists():
        raise FileNotFoundError(f"{path} missing; run featurize first")
    doc = json.loads(path.read_text())
    bins = {b["variable"]: BinScheme(b["variable"], b["min"], b["max"], b["k"]) for b in doc["bins"]}
    return doc["vocabulary"], bins


@dataclass
class PipelineResult:
    panel: eventstudy.EventPanel
    drops: eventstudy.DropReport
    stats: list[miner.ConditionStats]
    matrix: stats.PeriodMatrix
    datasheet: list[strategy.TradePlan]
    backtest: trader.BacktestResult


def run_all(store_dir, out_dir, max_arity: int = 2, min_support: int = 50,
            min_spread: float = strategy.MIN_SPREAD, er_mode: str = "all",
            taker_rate: float = trader.TAKER_FEE, spend_rate: float = 0.5,
            min_count: int = 50) -> PipelineResult:
    """featurize -> align -> mine -> ttest -> select -> backtest, writing every
    intermediate file under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    store = load_store(store_dir)
    vocab, bins = featurize_store(store, min_count=min_count)
    panel, drops = eventstudy.build_panel(store.tweets, store.series, store.symbols)
    eventstudy.write_panel(panel, out / "panel.csv")
    (out / "panel_drops.json").write_text(json.dumps(drops.as_dict(), indent=2, sort_keys=True) + "\n")
    cond_stats = miner.enumerate_conditions(panel, store.tweets, max_arity, min_support, vocab, bins)
    miner.write_stats(cond_stats, out / "stats")
    mat = stats.ttest_matrix(panel)
    stats.write_matrix(mat, out / "matrix.txt")
    sheet = strategy.select_beneficial(cond_stats, min_spread, er_mode)
    strategy.emit_datasheet(sheet, out / "datasheet.csv")
    bt = trader.backtest(sheet, store, bins, trader.FeeSchedule(taker_rate), spend_rate)
    bt.log.write(out / "trades.csv")
    (out / "trades_summary.json").write_text(json.dumps(bt.summary, indent=2, sort_keys=True) + "\n")
    return PipelineResult(panel, drops, cond_stats, mat, sheet, bt)
