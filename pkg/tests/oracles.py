"""Brute-force oracles shared by the test modules."""
import itertools

import numpy as np


def _partitions(end, w):
    for mask in itertools.product((0, 1), repeat=end - 1):
        part = [0] + [k + 1 for k, b in enumerate(mask) if b] + [end]
        if max(b - a for a, b in zip(part, part[1:])) <= w:
            yield part


def _left_sums(P, part):
    out, s = [], 0.0
    for a, b in zip(part, part[1:]):
        s += P[a, b]
        out.append(s)
    return out


def brute_force(vals, phi, mesh_cap=None):
    """Largest left-to-right partition sum and the lexicographically smallest
    partition among those attaining the optimum at every one of their nodes."""
    n = vals.size - 1
    i, j = np.triu_indices(n + 1, 1)
    P = np.zeros((n + 1, n + 1))
    P[i, j] = phi(np.abs(vals[j] - vals[i]))
    w = n if mesh_cap is None else int(np.floor(mesh_cap * n * (1 + 1e-12)))
    prefix = [0.0] + [max(_left_sums(P, q)[-1] for q in _partitions(e, w)) for e in range(1, n + 1)]
    arg = None
    for part in _partitions(n, w):
        sums = _left_sums(P, part)
        if all(s == prefix[e] for s, e in zip(sums, part[1:])) and (arg is None or part < arg):
            arg = part
    return prefix[n], arg
