"""Writes the synthetic benchmark: corpus.jsonl, queries.tsv, labels.txt, vectors.txt.

Each query names a fictional entity. Entity words have vectors that point at
a wrong label for most queries, so classifying the raw text does poorly; the
articles that mention the entity carry categories whose words point at the
right label.
"""

import json
import random
from pathlib import Path

OUT = Path(__file__).resolve().parent
DIM = 16
rng = random.Random(20240607)

LABELS = ["politics & government", "sports", "business & finance", "technology"]
AXIS = {"politics": 0, "government": 0, "sports": 1, "business": 2, "finance": 2, "technology": 3}

TOPIC_WORDS = [
    ["elections", "parliament", "senators", "politicians", "ministers", "parties", "legislation", "campaigns"],
    ["football", "tennis", "athletes", "olympics", "cricket", "clubs", "players", "championships"],
    ["banks", "companies", "investment", "markets", "retail", "economics", "corporations", "trade"],
    ["software", "computing", "internet", "electronics", "programming", "robotics", "semiconductors", "hardware"],
]
PLACES = ["norland", "varesia", "ostmark", "caldera", "brimholt", "tessaly"]
NEUTRAL = ["people", "established", "organizations", "history", "century", "living", "births", "members", "founders", "alumni"]
CATEGORY_TEMPLATES = [
    "{w} in {p}",
    "{W} of {p}",
    "{p} {w}",
    "People associated with {w}",
    "{W} established in the {c} century",
    "Members of {p} {w}",
]
FILLER = (
    "the report described a long career with several notable events and a number of "
    "public appearances over many years across the region while observers followed "
    "closely and local newspapers printed regular coverage of each season"
).split()

SYLLABLES = ["zor", "vath", "kel", "mira", "tosk", "quel", "dar", "ven", "lo", "rix", "ban", "thu", "sel", "mor", "gan", "pri", "oda", "wex", "ful", "ni"]


def name(i):
    a = SYLLABLES[i % len(SYLLABLES)] + SYLLABLES[(3 * i + 7) % len(SYLLABLES)]
    b = SYLLABLES[(5 * i + 2) % len(SYLLABLES)] + SYLLABLES[(7 * i + 11) % len(SYLLABLES)] + "ek"
    return a.capitalize(), b.capitalize()


def noise(scale):
    return [rng.gauss(0.0, scale) for _ in range(DIM)]


def axis_vec(axis, strength, scale):
    v = noise(scale)
    v[axis] += strength
    return v


vectors = {}
for word, axis in AXIS.items():
    v = axis_vec(axis, 1.0, 0.05)
    vectors[word] = v
for t, words in enumerate(TOPIC_WORDS):
    for w in words:
        vectors[w] = axis_vec(t, 1.0, 0.25)
for w in PLACES + NEUTRAL:
    v = noise(0.4)
    for a in range(4):
        v[a] *= 0.2
    vectors[w] = v

# 20 queries, 5 per label; the first token of each entity gets a misleading vector
queries = []
entities = []
for i in range(20):
    gold = i % 4
    first, last = name(i)
    decoy = gold if i in (3, 10, 17) else (gold + 1 + i % 3) % 4
    vectors[first.lower()] = axis_vec(decoy, 1.0, 0.3)
    vectors[last.lower()] = noise(0.3)
    entities.append((first, last, gold))
    queries.append((f"{first} {last}", LABELS[gold]))


def category(topic):
    tpl = rng.choice(CATEGORY_TEMPLATES)
    w = rng.choice(TOPIC_WORDS[topic])
    return tpl.format(w=w, W=w.capitalize(), p=rng.choice(PLACES).capitalize(), c=rng.choice(["19th", "20th"]))


def content(mentions):
    words = []
    for m in mentions:
        words.extend(m.split())
        words.extend(rng.sample(FILLER, 24))
    return " ".join(words)


docs = []
# two articles per entity, in the entity's own topic
for i, (first, last, gold) in enumerate(entities):
    for j in range(2):
        mentions = [f"{first} {last}"] if j == 0 else [first]
        cats = [category(gold) for _ in range(rng.randint(2, 4))]
        if j == 1:
            cats.append(rng.choice(NEUTRAL).capitalize() + " of " + rng.choice(PLACES).capitalize())
        docs.append((f"{first} {last}", content(mentions), cats))

# ten more articles: some mention an entity in passing under another topic
for n in range(10):
    first, last, gold = entities[(n * 7) % 20]
    topic = (gold + 2) % 4
    mentions = [last] if n % 2 == 0 else ["the", "committee"]
    cats = [category(topic) for _ in range(rng.randint(1, 3))]
    docs.append((f"Article {n}", content(mentions), cats))

rng.shuffle(docs)
with open(OUT / "corpus.jsonl", "w") as f:
    for i, (title, text, cats) in enumerate(docs):
        rec = {"id": f"syn-{i:03d}", "title": title, "text": text, "categories": cats}
        f.write(json.dumps(rec) + "\n")

with open(OUT / "queries.tsv", "w") as f:
    f.write("# implicit queries: entity mentions only\n")
    for text, gold in queries:
        f.write(f"{text}\t{gold}\n")

with open(OUT / "labels.txt", "w") as f:
    f.write("\n".join(LABELS) + "\n")

with open(OUT / "vectors.txt", "w") as f:
    f.write(f"{len(vectors)} {DIM}\n")
    for w in sorted(vectors):
        f.write(w + " " + " ".join(f"{x:.6f}" for x in vectors[w]) + "\n")
