#!/usr/bin/env python3
"""Builds the checked-in embedding corpus for the benchmark fixtures.

The vectors come from a deterministic hashed bag-of-phrases featurizer, not a
neural encoder: fixture tests need stable bytes with no network access, and
vectors whose pairwise geometry still tracks description overlap. Tokens and
token bigrams are signed-hashed into 768 buckets and the result is
l2-normalized, so descriptions sharing vocabulary land near each other.
Values are rounded to f32 before serialization to match the corpus wire
format exactly.

Usage: tools/make_fixture_embeddings.py <descriptions.jsonl> <embeddings.jsonl>
"""
import hashlib
import json
import math
import re
import struct
import sys

DIM = 768


def phrases(text):
    tokens = re.findall(r"[a-z0-9]+", text.lower())
    return tokens + [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]


def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def embed(text):
    v = [0.0] * DIM
    for phrase in phrases(text):
        digest = hashlib.sha256(phrase.encode()).digest()
        idx = int.from_bytes(digest[:4], "little") % DIM
        sign = 1.0 if digest[4] & 1 else -1.0
        v[idx] += sign
    norm = math.sqrt(sum(x * x for x in v)) or 1.0
    return [f32(x / norm) for x in v]


def main():
    if len(sys.argv) != 3:
        sys.exit(f"usage: {sys.argv[0]} <descriptions.jsonl> <embeddings.jsonl>")
    with open(sys.argv[1]) as f:
        records = [json.loads(line) for line in f if line.strip()]
    with open(sys.argv[2], "w") as f:
        for r in records:
            row = {"name": r["name"], "kind": r["kind"], "vector": embed(r["description"])}
            f.write(json.dumps(row, separators=(",", ":")) + "\n")
    print(f"wrote {len(records)} embedding records to {sys.argv[2]}")


if __name__ == "__main__":
    main()
