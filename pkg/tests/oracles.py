"""Independent reference computations shared by the tests."""
import itertools

import numpy as np


def parity_sort(seq):
    seq = list(seq)
    sign = 1
    for i in range(len(seq)):
        for j in range(len(seq) - 1 - i):
            if seq[j] > seq[j + 1]:
                seq[j], seq[j + 1] = seq[j + 1], seq[j]
                sign = -sign
    return sign, tuple(seq)


def gram_rank_oracle(forms_at_p, n):
    """Rank of [eta(e_I, e_J)] built from per-degree coefficient dicts at a point."""
    basis = [I for k in range(n + 1) for I in itertools.combinations(range(n), k)]
    G = np.zeros((len(basis), len(basis)))
    for a, I in enumerate(basis):
        for b, J in enumerate(basis):
            if set(I) & set(J) or len(I) + len(J) > n:
                continue
            s, K = parity_sort(I + J)
            G[a, b] = s * forms_at_p[len(K)].get(K, 0.0)
    return np.linalg.matrix_rank(G)


def forms_at(eta, p):
    return [{I: float(f(p)) for I, f in w.coeffs.items()} for w in eta.forms]
