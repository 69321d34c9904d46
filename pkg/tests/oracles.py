"""Independent reference implementations used to cross-check the package.

Everything here is deliberately written via a different route than the
library code: pair-by-pair brute force for the clustering indices,
numerical integration for the chi-square survival function, SVD for PCA,
and exhaustive assignment enumeration for k-means. Slow and simple wins.
"""

import itertools
import math

import numpy as np
from scipy import integrate


# ---------------------------------------------------------------------------
# pair-counting clustering indices


def pair_counts(labels_a, labels_b) -> tuple:
    """(tp, fp, fn, tn) over all item pairs.

    tp: same cluster in both; fp: same in a only; fn: same in b only;
    tn: different in both.
    """
    tp = fp = fn = tn = 0
    n = len(labels_a)
    for i in range(n):
        for j in range(i + 1, n):
            same_a = labels_a[i] == labels_a[j]
            same_b = labels_b[i] == labels_b[j]
            if same_a and same_b:
                tp += 1
            elif same_a:
                fp += 1
            elif same_b:
                fn += 1
            else:
                tn += 1
    return tp, fp, fn, tn


def ari_oracle(labels_a, labels_b) -> float:
    a, b, c, d = pair_counts(labels_a, labels_b)
    denominator = (a + b) * (b + d) + (a + c) * (c + d)
    if denominator == 0:
        return 1.0
    return 2.0 * (a * d - b * c) / denominator


def nmi_oracle(labels_a, labels_b) -> float:
    n = len(labels_a)
    joint: dict = {}
    count_a: dict = {}
    count_b: dict = {}
    for x, y in zip(labels_a, labels_b):
        joint[(x, y)] = joint.get((x, y), 0) + 1
        count_a[x] = count_a.get(x, 0) + 1
        count_b[y] = count_b.get(y, 0) + 1
    h_a = -sum((c / n) * math.log(c / n) for c in count_a.values())
    h_b = -sum((c / n) * math.log(c / n) for c in count_b.values())
    mean_h = (h_a + h_b) / 2.0
    if mean_h == 0.0:
        # both partitions are single clusters, hence identical
        return 1.0
    mi = 0.0
    for (x, y), c in joint.items():
        p_xy = c / n
        mi += p_xy * math.log(p_xy / ((count_a[x] / n) * (count_b[y] / n)))
    return mi / mean_h


def fmi_oracle(labels_a, labels_b) -> float:
    tp, fp, fn, _ = pair_counts(labels_a, labels_b)
    denominator = math.sqrt((tp + fp) * (tp + fn))
    if denominator == 0.0:
        return 0.0
    return tp / denominator


def all_partitions(n: int):
    """Every set partition of range(n) as a restricted-growth label tuple."""

    def extend(prefix, max_label):
        if len(prefix) == n:
            yield tuple(prefix)
            return
        for label in range(max_label + 2):
            prefix.append(label)
            yield from extend(prefix, max(max_label, label))
            prefix.pop()

    yield from extend([0], 0)


# ---------------------------------------------------------------------------
# chi-square survival by numerical integration


def chi2_pdf(x: float, df: int) -> float:
    if x < 0:
        return 0.0
    half = df / 2.0
    if x == 0.0:
        return 0.0 if df != 2 else 0.5
    log_pdf = (half - 1.0) * math.log(x) - x / 2.0 - half * math.log(2.0) - math.lgamma(half)
    return math.exp(log_pdf)


def chi2_sf_quad(x: float, df: int) -> float:
    if x <= 0:
        return 1.0
    cdf, _ = integrate.quad(chi2_pdf, 0.0, x, args=(df,), limit=200)
    return max(0.0, min(1.0, 1.0 - cdf))


# ---------------------------------------------------------------------------
# chi-square statistic recomputed from first principles


def chi2_stat_oracle(table, correction: float = 0.0) -> tuple:
    """(statistic, df) for an r x c observed-count table."""
    rows = len(table)
    cols = len(table[0])
    row_totals = [sum(table[i]) for i in range(rows)]
    col_totals = [sum(table[i][j] for i in range(rows)) for j in range(cols)]
    grand = sum(row_totals)
    stat = 0.0
    for i in range(rows):
        for j in range(cols):
            expected = row_totals[i] * col_totals[j] / grand
            deviation = max(abs(table[i][j] - expected) - correction, 0.0)
            stat += deviation * deviation / expected
    return stat, (rows - 1) * (cols - 1)


# ---------------------------------------------------------------------------
# PCA via SVD


def pca_svd_oracle(X: np.ndarray) -> tuple:
    """(full variance-ratio spectrum, top-2 components) of mean-centered X."""
    centered = X - X.mean(axis=0)
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    variances = (singular ** 2) / (X.shape[0] - 1)
    total = variances.sum()
    ratios = variances / total if total > 0 else np.zeros_like(variances)
    return ratios, vt[:2]


# ---------------------------------------------------------------------------
# exact k-means by assignment enumeration


def kmeans_global_optimum(X: np.ndarray, k: int) -> float:
    """Global minimum inertia over every surjective assignment (tiny inputs)."""
    n = X.shape[0]
    best = math.inf
    for assignment in itertools.product(range(k), repeat=n):
        if len(set(assignment)) != k:
            continue
        inertia = 0.0
        for label in range(k):
            members = X[[i for i in range(n) if assignment[i] == label]]
            centroid = members.mean(axis=0)
            inertia += float(((members - centroid) ** 2).sum())
        if inertia < best:
            best = inertia
    return best
