"""Generate a synthetic corpus with one planted word, run the whole pipeline
and show what it finds.

    python3 demos/synthetic_walkthrough.py --out /tmp/walk
"""
import argparse
import json
from pathlib import Path

from tweetstudy import pipeline, synthetic
from tweetstudy.ingest import ingest_dirs, save_store
from tweetstudy.stats import ttest_matrix


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="walkthrough_out")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--scale", type=float, default=1.0, help="multiplier on the planted drift")
    args = ap.parse_args()
    out = Path(args.out)

    corpus = synthetic.generate(out / "raw", seed=args.seed, drift_scale=args.scale)
    print(f"corpus: {corpus.n_candles} candles, {corpus.n_tweets} tweets, "
          f"{len(corpus.planted_ids)} carry '{synthetic.PLANTED_WORD}'")
    save_store(ingest_dirs(out / "raw" / "candles", out / "raw" / "tweets"), out / "store")

    res = pipeline.run_all(out / "store", out / "results")
    print(f"panel: {len(res.panel)} windows, dropped {res.drops.as_dict()}")
    print(f"mined {len(res.stats)} conditions, {len(res.datasheet)} selected for trading")

    planted = set(corpus.planted_ids)
    cohort = res.panel.subset(t for t in res.panel.tweet_ids if t in planted)
    m = ttest_matrix(cohort)
    print("planted cohort, p-value of t2 against every other minute:")
    print("  " + " ".join(f"t{j}:{m.pvalue(2, j):.0e}" for j in range(1, 16) if j != 2))

    for rank, plan in enumerate(res.datasheet[:5], 1):
        print(f"  #{rank} {plan.condition_id} n={plan.n} buy t{plan.buy_offset} "
              f"sell t{plan.sell_offset} spread {plan.expected_spread:.4f}")
    word = [p for p in res.datasheet
            if [q.value for q in p.predicates] == [synthetic.PLANTED_WORD]]
    if word:
        rank = res.datasheet.index(word[0]) + 1
        print(f"planted word is datasheet entry #{rank}")

    s = res.backtest.summary
    print(json.dumps({k: s[k] for k in ("trades", "net_pnl_btc", "fees_btc", "hit_rate",
                                        "rejections")}, indent=2))
    print(f"files under {out / 'results'}")


if __name__ == "__main__":
    main()
