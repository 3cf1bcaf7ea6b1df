"""Independent reference for the synthetic benchmark; writes expected.json.

Implements BM25 retrieval, category-keyword counting and both static
classifiers from scratch, sharing nothing with the Rust code except the
stopword list, which is read from its source file.
"""

import json
import math
import re
from collections import Counter
from pathlib import Path

import numpy as np

HERE = Path(__file__).resolve().parent
SRC = HERE.parent.parent / "src" / "stopwords.rs"
block = SRC.read_text().split("pub const ENGLISH")[1].split("];")[0]
STOP = set(re.findall(r'"([^"]+)"', block))

K1, B = 1.2, 0.75


def words(text):
    return [w for w in re.split(r"[^0-9A-Za-z]+", text) if w]


def analyze(text):
    return [w for w in (t.lower() for t in words(text)) if w not in STOP]


docs = [json.loads(l) for l in open(HERE / "corpus.jsonl")]
docs = [d for d in docs if len(d["text"].split()) >= 20 and d["categories"]]
docs.sort(key=lambda d: d["id"])
toks = [analyze(d["text"]) for d in docs]
N = len(docs)
avgdl = sum(map(len, toks)) / N
df = Counter(t for ts in toks for t in set(ts))
tfs = [Counter(ts) for ts in toks]


def search(query, k):
    q = Counter(analyze(query))
    scored = []
    for i, tf in enumerate(tfs):
        s = 0.0
        for term, qtf in q.items():
            if tf[term]:
                idf = math.log(1 + (N - df[term] + 0.5) / (df[term] + 0.5))
                s += qtf * idf * tf[term] * (K1 + 1) / (tf[term] + K1 * (1 - B + B * len(toks[i]) / avgdl))
        if s > 0:
            scored.append((-s, docs[i]["id"], i))
    scored.sort()
    return [docs[i] for _, _, i in scored[:k]]


vecs = {}
with open(HERE / "vectors.txt") as f:
    next(f)
    for line in f:
        p = line.split()
        vecs[p[0]] = np.array([np.float32(x) for x in p[1:]], dtype=np.float64)


def lookup(w):
    return vecs.get(w, vecs.get(w.lower()))


def cos(a, b):
    return float(a @ b) / (math.sqrt(float(a @ a)) * math.sqrt(float(b @ b)))


labels = [l.strip() for l in open(HERE / "labels.txt") if l.strip()]
label_vecs = []
for l in labels:
    ws = [w for w in l.split() if w != "&"]
    label_vecs.append(np.mean([lookup(w) for w in ws], axis=0))


def argmax(scores):
    best = 0
    for i, s in enumerate(scores):
        if s > scores[best]:
            best = i
    return labels[best]


def keywords(cats):
    c = Counter()
    for cat in cats:
        for w in words(cat):
            w = w.lower()
            if len(w) >= 2 and w not in STOP:
                c[w] += 1
    return sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))


def baseline_avg(text):
    vs = [lookup(w) for w in words(text) if lookup(w) is not None]
    m = np.mean(vs, axis=0)
    return argmax([cos(m, y) for y in label_vecs])


def qzero(text, k):
    cats = [c.strip() for d in search(text, k) for c in d["categories"] if c.strip()]
    if not cats:
        return baseline_avg(text), cats, [], True
    kws = keywords(cats)
    scores = [sum(w * cos(lookup(kw), y) for kw, w in kws if lookup(kw) is not None) for y in label_vecs]
    return argmax(scores), cats, kws, False


queries = []
for line in open(HERE / "queries.tsv"):
    if line.startswith("#") or not line.strip():
        continue
    text, gold = line.rstrip("\n").rsplit("\t", 1)
    queries.append((text, gold))

out = {"n": len(queries), "baseline": [], "qzero": [], "explain": [], "sweep": {}}
for text, gold in queries:
    out["baseline"].append(baseline_avg(text))
    pred, cats, kws, fell_back = qzero(text, 50)
    out["qzero"].append(pred)
    out["explain"].append({"query": text, "categories": cats[:50], "keywords": kws[:10]})
acc = lambda preds: sum(p == g for p, (_, g) in zip(preds, queries)) / len(queries)
out["baseline_accuracy"] = acc(out["baseline"])
out["qzero_accuracy"] = acc(out["qzero"])
for k in [5, 10, 25, 50, 100]:
    out["sweep"][str(k)] = acc([qzero(t, k)[0] for t, _ in queries])

with open(HERE / "expected.json", "w") as f:
    json.dump(out, f, indent=1)
    f.write("\n")
print("baseline", out["baseline_accuracy"], "qzero", out["qzero_accuracy"], "sweep", out["sweep"])
