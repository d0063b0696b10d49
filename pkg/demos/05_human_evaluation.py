"""Blind pairwise human evaluation, end to end in memory.

Items show two candidates in seeded-random A/B order; the hidden mapping
never reaches annotators.  Five-point judgments collapse to win/tie/win,
win rates exclude ties, and a two-sided exact binomial test compares the
non-tie wins against a fair coin.  To annotate in a browser instead:

    refinelab human-eval build <run_dir> --cell <cell> --seed 7 --out s.json
    refinelab human-eval serve s.json --ui-dir frontend/dist

    python demos/05_human_evaluation.py
"""

import random

from refinelab.human_eval import (
    build_pairwise_session,
    record_judgment,
    summarize_pairwise,
)


def main() -> None:
    chunk = " ".join(f"word{i}" for i in range(250))
    pairs = [
        (chunk, f"initial candidate {i}", f"refined candidate {i}", lp)
        for i, lp in enumerate(["en-de"] * 25 + ["en-es"] * 25)
    ]
    session = build_pairwise_session(pairs, seed=7)
    a_sides = [item.a_is for item in session.items]
    print(f"{len(session.items)} items; candidate A is the refined text in "
          f"{a_sides.count('refined')} of them (hidden from annotators)")

    # A simulated annotator who prefers the refined side for fluency 90 %
    # of the time, is lukewarm on accuracy, and ties often on style.
    rng = random.Random(11)
    for item in session.items:
        pro_refined = "a_much_better" if item.a_is == "refined" else "b_much_better"
        pro_initial = "a_slightly_better" if item.a_is == "initial" else "b_slightly_better"
        record_judgment(
            session, item.item_id, "fluency",
            pro_refined if rng.random() < 0.9 else "tie",
        )
        roll = rng.random()
        record_judgment(
            session, item.item_id, "accuracy",
            pro_refined if roll < 0.45 else (pro_initial if roll < 0.65 else "tie"),
        )
        record_judgment(
            session, item.item_id, "style_term",
            pro_refined if rng.random() < 0.7 else "tie",
        )

    print(f"\n{'dimension':<12} {'init%':>6} {'tie%':>6} {'refined%':>9} "
          f"{'win%*':>7}  p-value")
    for dim, s in summarize_pairwise(session).items():
        win = "-" if s.win_rate_no_ties is None else f"{s.win_rate_no_ties:.1f}"
        p = "-" if s.p_value is None else f"{s.p_value:.2e}"
        print(f"{dim:<12} {s.pct_initial:>6.1f} {s.pct_tie:>6.1f} "
              f"{s.pct_refined:>9.1f} {win:>7}  {p}")
    print("(* win rate excludes ties)")

    fluency = summarize_pairwise(session)["fluency"]
    print("\nper-pair refined wins:", {
        lp: f"{wins}/{total}" for lp, (wins, total) in fluency.per_lp_wins.items()
    })


if __name__ == "__main__":
    main()
