"""Independent brute-force oracles shared by the test modules."""

import itertools
import math

import numpy as np


def all_subsets(n):
    for code in range(2 ** n):
        yield [i for i in range(n) if code >> i & 1]


def brute_cut_norm(a):
    """Unpruned double enumeration of row and column subsets, normalised by n^2."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    best, arg = -1.0, None
    for rows in all_subsets(n):
        for cols in all_subsets(n):
            val = abs(float(a[np.ix_(rows, cols)].sum())) if rows and cols else 0.0
            if val > best:
                best, arg = val, (rows, cols)
    rows, cols = arg
    if not rows or not cols:
        return 0.0
    # exact re-evaluation of the maximiser
    return abs(math.fsum(a[i, j] for i in rows for j in cols)) / n ** 2


def brute_cut_norm_table(a):
    """Same unpruned double enumeration, with all ``2^n x 2^n`` block sums in one product."""
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    ind = np.array([[code >> i & 1 for i in range(n)] for code in range(2 ** n)], dtype=float)
    sums = np.abs(ind @ a @ ind.T)
    r, c = np.unravel_index(int(np.argmax(sums)), sums.shape)
    rows, cols = np.flatnonzero(ind[r]), np.flatnonzero(ind[c])
    if rows.size == 0 or cols.size == 0:
        return 0.0
    return abs(math.fsum(a[i, j] for i in rows for j in cols)) / n ** 2


def brute_inf_to_one(a):
    a = np.asarray(a, dtype=float)
    n = a.shape[0]
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=n)))
    return float(np.max(signs @ a @ signs.T)) / n ** 2


def geodesic(a, b):
    d = abs(a - b) % (2 * math.pi)
    return min(d, 2 * math.pi - d)


def brute_wasserstein(a, b, power):
    """Minimum over all bijections of the mean geodesic cost to ``power``."""
    best = math.inf
    for perm in itertools.permutations(range(len(b))):
        cost = sum(geodesic(a[i], b[j]) ** power for i, j in enumerate(perm)) / len(a)
        best = min(best, cost)
    return best ** (1.0 / power)


def random_symmetric(rng, n, low=0.0, high=1.0):
    a = rng.uniform(low, high, size=(n, n))
    a = np.triu(a, 1)
    return a + a.T
