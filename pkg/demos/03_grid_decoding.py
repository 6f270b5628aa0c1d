"""From B/I/O tags and a pairwise sentiment map to triplets.

Run:  python demos/03_grid_decoding.py
"""

import numpy as np

from aste.data import Sentence, Span, Triplet
from aste.parser import (
    REL_INDEX,
    REL_LABELS,
    build_gold,
    decode_bio,
    decode_grid,
    gold_tag_strings,
    relation_map_from_labels,
)

TOKENS = ["the", "battery", "life", "is", "very", "poor"]
GOLD = Triplet(Span(1, 2), Span(5, 5), "NEG")


def show_map(labels):
    short = {0: ".", 1: "+", 2: "-", 3: "~"}  # NONE, POS, NEG, NEU
    print("      " + " ".join(f"{t[:4]:>4}" for t in TOKENS))
    for token, row in zip(TOKENS, labels):
        print(f"{token[:5]:>5} " + " ".join(f"{short[int(v)]:>4}" for v in row))


def main():
    sentence = Sentence(tokens=TOKENS, triplets=[GOLD])
    aspect_targets, opinion_targets, relations = build_gold(sentence)

    print("sentence:", " ".join(TOKENS))
    print("gold triplet: (battery life, poor, NEG)")
    print("\naspect tags: ", gold_tag_strings(aspect_targets))
    print("opinion tags:", gold_tag_strings(opinion_targets))
    print("\nsentiment relation map ('.'=NONE '+'=POS '-'=NEG '~'=NEU),")
    print("labelled in both directions:")
    show_map(relations)

    aspects = decode_bio(gold_tag_strings(aspect_targets))
    opinions = decode_bio(gold_tag_strings(opinion_targets))
    print("\ndecoded aspect spans: ", [(s.start, s.end) for s in aspects])
    print("decoded opinion spans:", [(s.start, s.end) for s in opinions])

    decoded = decode_grid(aspects, opinions, relation_map_from_labels(relations))
    print("decoded triplets:", decoded)
    assert decoded == {GOLD}

    print("\n== error tolerance from the bidirectional vote ==")
    corrupted = relations.copy()
    corrupted[1, 5] = REL_INDEX["NONE"]  # one of the four indexed cells goes wrong
    print("cell (battery -> poor) corrupted to NONE; votes are now")
    votes = [corrupted[i, 5] for i in (1, 2)] + [corrupted[5, i] for i in (1, 2)]
    print("  ", [REL_LABELS[int(v)] for v in votes])
    decoded = decode_grid(aspects, opinions, relation_map_from_labels(corrupted))
    print("decoded triplets:", decoded)
    assert decoded == {GOLD}
    print("majority still lands on NEG: 2 * |aspect| * |opinion| = 4 cells vote.")

    print("\n== relaxed B/I/O decoding ==")
    for tags in (["O", "B", "I", "O"], ["O", "I", "I"], ["B", "B"]):
        spans = [(s.start, s.end) for s in decode_bio(tags)]
        print(f"  {tags} -> {spans}")
    print("a stray I opens a span instead of being dropped.")


if __name__ == "__main__":
    main()
