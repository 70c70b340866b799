"""Independent reference implementations used to check the library.

Everything here is written the slow, obvious way (explicit loops, full DP
matrices, heap-based top-k) and deliberately shares no code with the
package, so the two routes can disagree when one of them is wrong.
"""

from __future__ import annotations

import heapq
import math
import re

import numpy as np


def oracle_ngrams(tokens, n):
    grams = {}
    for i in range(len(tokens) - n + 1):
        g = tuple(tokens[i : i + n])
        grams[g] = grams.get(g, 0) + 1
    return grams


def oracle_bleu(candidate, references, max_n=4, epsilon=1e-9):
    """Sentence BLEU-1..max_n, clipped precisions + brevity penalty."""
    if len(candidate) == 0:
        return [0.0] * max_n
    # effective reference length: closest, ties resolved to the shorter
    best = None
    for ref in references:
        key = (abs(len(ref) - len(candidate)), len(ref))
        if best is None or key < best:
            best = key
    r = best[1]
    c = len(candidate)
    bp = math.exp(1.0 - r / c) if c <= r else 1.0
    precisions = []
    for n in range(1, max_n + 1):
        cand = oracle_ngrams(candidate, n)
        total = sum(cand.values())
        if total == 0:
            precisions.append(epsilon)
            continue
        clipped = 0
        for gram, count in cand.items():
            allowed = 0
            for ref in references:
                rc = oracle_ngrams(ref, n).get(gram, 0)
                if rc > allowed:
                    allowed = rc
            clipped += min(count, allowed)
        precisions.append(clipped / total if clipped > 0 else epsilon)
    out = []
    for k in range(1, max_n + 1):
        geo = math.exp(sum(math.log(p) for p in precisions[:k]) / k)
        out.append(min(bp * geo, 1.0))
    return out


def oracle_corpus_bleu(pairs, max_n=4, epsilon=1e-9):
    clipped = [0] * max_n
    totals = [0] * max_n
    c_len = 0
    r_len = 0
    for candidate, references in pairs:
        if len(candidate) == 0:
            continue
        c_len += len(candidate)
        best = None
        for ref in references:
            key = (abs(len(ref) - len(candidate)), len(ref))
            if best is None or key < best:
                best = key
        r_len += best[1]
        for n in range(1, max_n + 1):
            cand = oracle_ngrams(candidate, n)
            totals[n - 1] += sum(cand.values())
            for gram, count in cand.items():
                allowed = 0
                for ref in references:
                    rc = oracle_ngrams(ref, n).get(gram, 0)
                    if rc > allowed:
                        allowed = rc
                clipped[n - 1] += min(count, allowed)
    if c_len == 0:
        return [0.0] * max_n
    bp = math.exp(1.0 - r_len / c_len) if c_len <= r_len else 1.0
    precisions = []
    for n in range(1, max_n + 1):
        if totals[n - 1] > 0 and clipped[n - 1] > 0:
            precisions.append(clipped[n - 1] / totals[n - 1])
        else:
            precisions.append(epsilon)
    out = []
    for k in range(1, max_n + 1):
        geo = math.exp(sum(math.log(p) for p in precisions[:k]) / k)
        out.append(min(bp * geo, 1.0))
    return out


def oracle_lcs(a, b):
    """Full-matrix LCS dynamic program."""
    n, m = len(a), len(b)
    dp = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            if a[i - 1] == b[j - 1]:
                dp[i][j] = dp[i - 1][j - 1] + 1
            else:
                dp[i][j] = max(dp[i - 1][j], dp[i][j - 1])
    return dp[n][m]


def oracle_rouge_n(candidate, reference, n):
    cand = oracle_ngrams(candidate, n)
    ref = oracle_ngrams(reference, n)
    cand_total = sum(cand.values())
    ref_total = sum(ref.values())
    if cand_total == 0 or ref_total == 0:
        return 0.0
    matched = 0
    for gram, count in cand.items():
        matched += min(count, ref.get(gram, 0))
    p = matched / cand_total
    r = matched / ref_total
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def oracle_rouge_l(candidate, reference):
    if len(candidate) == 0 or len(reference) == 0:
        return 0.0
    lcs = oracle_lcs(candidate, reference)
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def oracle_sim(cand_tokens, ref_tokens, embedder):
    """Greedy matching F1 from the full pairwise cosine matrix, via loops."""
    if not cand_tokens and not ref_tokens:
        return 1.0
    if not cand_tokens or not ref_tokens:
        return 0.0
    matrix = []
    for ct in cand_tokens:
        cv = embedder.embed_token(ct)
        row = []
        for rt in ref_tokens:
            rv = embedder.embed_token(rt)
            row.append(float(sum(float(a) * float(b) for a, b in zip(cv, rv))))
        matrix.append(row)
    precision = sum(max(row) for row in matrix) / len(cand_tokens)
    recall = sum(max(matrix[i][j] for i in range(len(cand_tokens))) for j in range(len(ref_tokens))) / len(ref_tokens)
    precision = max(0.0, precision)
    recall = max(0.0, recall)
    if precision + recall == 0:
        return 0.0
    return min(1.0, 2 * precision * recall / (precision + recall))


def oracle_top_k(ids, matrix, query, k):
    """Exhaustive scan top-k by (score desc, id asc) using a heap."""
    q = np.asarray(query, dtype=np.float64)
    norm = math.sqrt(float(q @ q))
    if norm > 0:
        q = q / norm
    scores = matrix.astype(np.float64) @ q
    entries = [(-float(scores[i]), ids[i]) for i in range(len(ids))]
    best = heapq.nsmallest(k, entries)
    return [(pid, -neg) for neg, pid in best]


def oracle_whole_word_match(pattern, text):
    return re.search(pattern, text) is not None
