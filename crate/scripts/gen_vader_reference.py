#!/usr/bin/env python3
"""Freeze reference VADER scores for the parity fixture.

Usage: pip install vaderSentiment==3.3.2
       python3 scripts/gen_vader_reference.py \
           crates/core/tests/fixtures/vader_sentences.txt \
           > crates/core/tests/fixtures/vader_reference.jsonl

Scores are written at full precision (the reference rounds its public
output; the rounding is disabled here) alongside the rounded compound.
"""
import json
import sys

import vaderSentiment.vaderSentiment as vs

analyzer = vs.SentimentIntensityAnalyzer()


def full_precision(text):
    saved = vs.__dict__.get("round")
    vs.round = lambda x, n=None: x
    try:
        return analyzer.polarity_scores(text)
    finally:
        if saved is None:
            del vs.round
        else:
            vs.round = saved


def main(path):
    with open(path, encoding="utf-8") as f:
        lines = [line.rstrip("\n") for line in f if line.strip()]
    for text in lines:
        full = full_precision(text)
        rounded = analyzer.polarity_scores(text)
        rec = {
            "text": text,
            "compound": full["compound"],
            "pos": full["pos"],
            "neu": full["neu"],
            "neg": full["neg"],
            "compound_rounded": rounded["compound"],
        }
        print(json.dumps(rec, ensure_ascii=False))


if __name__ == "__main__":
    main(sys.argv[1])
