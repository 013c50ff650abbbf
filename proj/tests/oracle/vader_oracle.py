#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
# Copyright 2026 The stancelab Authors
"""Pins reference compound scores for tests/fixtures/vader_pinned.tsv.

Requires the vaderSentiment package (3.3.2). Rounding inside the reference
scorer is disabled so the fixture keeps full precision.

    python3 tests/oracle/vader_oracle.py > tests/fixtures/vader_pinned.tsv
"""

import pathlib
import sys

import vaderSentiment.vaderSentiment as reference

reference.round = lambda x, ndigits=None: x

ROOT = pathlib.Path(__file__).resolve().parents[2]

SENTENCES = [
    "School uniforms are a good idea.",
    "School uniforms are a GOOD idea!",
    "School uniforms are a very good idea!!!",
    "School uniforms are not a good idea.",
    "School uniforms are not a bad idea.",
    "Vaping is extremely dangerous for teenagers.",
    "Vaping isn't dangerous at all.",
    "The policy is kind of helpful.",
    "The policy is sort of unfair, but it works.",
    "The plan is terrible, but the goals are excellent.",
    "The plan is excellent, but the goals are terrible.",
    "This is the least useful argument I have heard.",
    "At least the program is free.",
    "Net neutrality protects a free and open internet.",
    "Without net neutrality, providers could block content.",
    "Tuition should be free for everyone?",
    "Is tuition really worth it??",
    "Is tuition really worth it????",
    "Milk is full of nutrients like calcium.",
    "Milk is not healthy for adults.",
    "Never so happy to see a law passed.",
    "This law is never good for workers.",
    "There is no doubt that uniforms help.",
    "No, uniforms do not help at all.",
    "The results were the bomb.",
    "That argument is the shit.",
    "The proposal is okay.",
    "The proposal is barely acceptable.",
    "The students are incredibly happy and deeply grateful.",
    "The students are SO ANGRY about the uniforms.",
    "I hate this rule.",
    "I don't hate this rule.",
    "I really don't love this rule at all.",
    "Prices will cut the cutting edge of research.",
    "Nobody wins when schools fail.",
    "The evidence is neither good nor bad.",
    "Smoking kills, and vaping harms lungs.",
    "The benefits outweigh the risks.",
    "This is a dangerous and harmful trend.",
    "Teachers support the new dress code.",
    "Uniforms reduce bullying and improve focus.",
    "Free tuition creates opportunity for poor families.",
    "The tax is unfair to students without jobs.",
    "The proposal was hardly a success.",
    "It is a truly wonderful and effective approach!",
    "Uniforms cost money.",
    "The debate continues.",
    "Parents worry, but children adapt quickly.",
    "Regulation is a threat to innovation, not a solution.",
    "Such a fantastic, amazing, brilliant idea!!",
]


def label(score: float) -> str:
    if score >= 0.05:
        return "positive"
    if score <= -0.05:
        return "negative"
    return "neutral"


def main() -> int:
    analyzer = reference.SentimentIntensityAnalyzer(
        lexicon_file=str(ROOT / "data" / "vader_lexicon.txt"))
    assert len(SENTENCES) == 50
    for s in SENTENCES:
        compound = analyzer.polarity_scores(s)["compound"]
        sys.stdout.write(f"{s}\t{compound!r}\t{label(compound)}\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
