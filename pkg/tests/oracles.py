"""Independent reference computations shared by the unit and acceptance suites."""

from collections import Counter

import numpy as np

from acm.learner import candidate_ks


def counter_vote(labels):
    """Independent vote: max count, then smallest position of first occurrence."""
    counts = Counter(labels)
    top = max(counts.values())
    tied = [lab for lab in counts if counts[lab] == top]
    return min(tied, key=labels.index)


def paired_arc_fixture(pairs=300, dim=8, gap=0.02, eps=1e-4):
    """Pairs of near-identical points on a great circle; pair j has label j % 2.

    Each point's nearest other point is its twin (same label); the next
    nearest ones belong to neighbouring pairs with the other label.
    """
    angles = []
    for j in range(pairs):
        angles += [j * gap, j * gap + eps]
    angles = np.array(angles)
    v = np.zeros((len(angles), dim), np.float32)
    v[:, 0] = np.cos(angles)
    v[:, 1] = np.sin(angles)
    labels = np.repeat(np.arange(pairs) % 2, 2)
    return v, labels


def noisy_two_clusters(n=700, dim=8, flip=0.25, seed=0):
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 2, n)
    centres = np.eye(dim)[:2]
    x = centres[labels] + rng.standard_normal((n, dim)) * 0.35
    x /= np.linalg.norm(x, axis=1, keepdims=True)
    noisy = np.where(rng.random(n) < flip, 1 - labels, labels)
    return x.astype(np.float32), noisy


def recount_accuracy(data, labels, window, k_max):
    """Exhaustive leave-one-out recount with float64 distances and Counter votes."""
    ks = candidate_ks(k_max)
    correct = dict.fromkeys(ks, 0)
    x = data.astype(np.float64)
    for i in window:
        d = 0.5 * ((x - x[i]) ** 2).sum(axis=1)
        order = [j for j in np.lexsort((np.arange(len(x)), d)) if j != i][:k_max]
        ranked = [int(labels[j]) for j in order]
        for k in ks:
            correct[k] += counter_vote(ranked[:k]) == labels[i]
    return {k: c / len(window) for k, c in correct.items()}


def oracle_choice(acc):
    best = max(acc.values())
    return min(k for k, a in acc.items() if a == best)


def loo_1nn_accuracy(x, y, chunk=2000):
    """Exact leave-one-out 1-NN accuracy by dense float64 inner products."""
    x = np.asarray(x, np.float64)
    y = np.asarray(y)
    correct = 0
    for lo in range(0, len(x), chunk):
        s = x[lo:lo + chunk] @ x.T
        s[np.arange(len(s)), np.arange(lo, lo + len(s))] = -np.inf
        correct += int((y[np.argmax(s, axis=1)] == y[lo:lo + chunk]).sum())
    return correct / len(x)
