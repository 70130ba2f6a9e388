"""Independent TF-IDF similarity oracle used to freeze golden test values.

Tokens: lowercase, maximal runs of Unicode letters/digits.
idf(t) = ln((1 + N) / (1 + df(t))) + 1, tf = raw count, vectors L2-normalized,
similarity = sqrt(clamp(cosine, 0, 1)).
"""
import math
import json
import re
import sys
from collections import Counter

POOLS = {
    "identical": ["the cat sat", "the cat sat"],
    "disjoint": ["alpha beta", "gamma delta"],
    "quarter_cosine": ["a b c d", "a e f g", "b c d e f g"],
    "case_and_punctuation": ["Hello, World!", "hello world"],
    "partial_overlap": [
        "how many apples does tom have",
        "how many oranges does sue have",
        "what is the integral of x",
    ],
    "repeated_terms": ["ab ab cd", "ab cd cd", "ef"],
    "unicode": ["Café crème", "café au lait", "tea"],
}


def tokenize(text):
    return re.findall(r"[^\W_]+", text.lower())


def similarity(docs):
    toks = [Counter(tokenize(d)) for d in docs]
    n = len(docs)
    df = Counter(t for c in toks for t in c)
    idf = {t: math.log((1 + n) / (1 + df[t])) + 1 for t in df}
    vecs = []
    for c in toks:
        v = {t: cnt * idf[t] for t, cnt in c.items()}
        norm = math.sqrt(sum(x * x for x in v.values()))
        vecs.append({t: x / norm for t, x in v.items()})
    out = [[0.0] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            dot = sum(vecs[i][t] * vecs[j].get(t, 0.0) for t in vecs[i])
            out[i][j] = 1.0 if i == j else math.sqrt(min(max(dot, 0.0), 1.0))
    return out


if __name__ == "__main__":
    if "--json" in sys.argv:
        cases = []
        for name, docs in POOLS.items():
            m = similarity(docs)
            pairs = [[i, j, m[i][j]] for i in range(len(docs)) for j in range(i + 1, len(docs))]
            cases.append({"name": name, "texts": docs, "pairs": pairs})
        json.dump(cases, sys.stdout, indent=1, ensure_ascii=False)
        print()
        sys.exit(0)
    for name, docs in POOLS.items():
        m = similarity(docs)
        for i in range(len(docs)):
            for j in range(i + 1, len(docs)):
                print(f"{name} {i} {j} {m[i][j]!r}")
    sys.exit(0)
