#!/usr/bin/env python3
# SPDX-License-Identifier: Apache-2.0
"""Generate the bundled synthetic newswire-style corpus (data/sample_corpus.jsonl).

Documents are sampled from a small topic model: each class prefers two of
eight word groups, and a share of every document comes from background
newswire words. Output is deterministic for a given --seed.
"""
import argparse
import json
import random

TOPICS = {
    "mining": "gold copper mine mining silver zinc minerals metal mines ton ounces ore "
              "nickel lead smelter tonnes exploration drilling deposit reserves",
    "metals": "aluminium platinum palladium steel iron alloy refinery bullion ingot "
              "futures comex smelting scrap foundry cobalt tin molybdenum",
    "grain": "wheat corn grain harvest bushels crop farmers soybeans acreage barley "
             "sorghum planting elevator export usda subsidy maize rice",
    "livestock": "cattle hogs beef pork dairy milk feed herd slaughter poultry meat "
                 "ranchers livestock pasture veterinary hides",
    "crude": "oil crude barrels opec petroleum refinery pipeline drilling offshore gasoline "
             "fuel production output saudi energy brent",
    "gas": "gas natural lng pipeline utility heating propane methane terminal wells "
           "reservoir exploration shale field compression",
    "money": "dollar yen currency exchange rates bank central intervention monetary "
             "reserves treasury bonds interest inflation deficit",
    "trade": "trade tariffs imports exports surplus deficit negotiations agreement "
             "quota sanctions partners customs goods protectionism",
}

CLASS_TOPICS = {
    "mining": ("mining", "metals"),
    "grain": ("grain", "livestock"),
    "crude": ("crude", "gas"),
    "money-fx": ("money", "trade"),
}

BACKGROUND = ("said reuter the of to in and for on it its will was company year "
              "would from market pct mln billion percent new officials week "
              "month analysts government sources report last also")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=20150617)
    parser.add_argument("--docs", type=int, default=200)
    parser.add_argument("--test-fraction", type=float, default=0.25)
    parser.add_argument("--out", default="data/sample_corpus.jsonl")
    args = parser.parse_args()

    rng = random.Random(args.seed)
    topic_names = list(TOPICS)
    topic_words = {t: TOPICS[t].split() for t in topic_names}
    background = BACKGROUND.split()
    classes = list(CLASS_TOPICS)

    with open(args.out, "w", encoding="utf-8") as out:
        for i in range(args.docs):
            label = classes[i % len(classes)]
            preferred = CLASS_TOPICS[label]
            weights = [rng.gammavariate(4.0 if t in preferred else 0.3, 1.0) for t in topic_names]
            total = sum(weights)
            mixture = [w / total for w in weights]
            length = rng.randint(120, 220)
            tokens = []
            for _ in range(length):
                if rng.random() < 0.3:
                    tokens.append(rng.choice(background))
                    continue
                topic = rng.choices(topic_names, weights=mixture)[0]
                words = topic_words[topic]
                # Zipf-like preference for the head of each word list.
                rank = min(int(rng.paretovariate(1.2)) - 1, len(words) - 1)
                tokens.append(words[rank] if rng.random() < 0.6 else rng.choice(words))
            split = "test" if (i // len(classes)) % round(1 / args.test_fraction) == 0 else "train"
            record = {"id": f"doc{i:04d}", "label": label, "text": " ".join(tokens), "split": split}
            out.write(json.dumps(record) + "\n")


if __name__ == "__main__":
    main()
