"""Dense-matrix PageRank written independently of the sparse implementation.

Builds the full Google matrix G = d * (S + dangling fix) + (1 - d) * v 1^T
explicitly and iterates x <- G x from the uniform vector with the same
stopping rule (L1 change below epsilon). ``exact`` solves the linear system
(I - d S') x = (1 - d) v directly.
"""
import numpy as np


def google_matrix(nodes, edges, damping, teleport=None):
    n = len(nodes)
    index = {v: i for i, v in enumerate(nodes)}
    adj = np.zeros((n, n))
    for a, b in edges:
        adj[index[b], index[a]] = 1.0
    outdeg = adj.sum(axis=0)
    S = np.where(outdeg > 0, adj / np.where(outdeg > 0, outdeg, 1), 1.0 / n)
    v = np.full(n, 1.0 / n) if teleport is None else np.asarray(teleport, float)
    return damping * S + (1 - damping) * np.outer(v, np.ones(n)), S, v


def power(nodes, edges, damping=0.85, epsilon=1e-8, max_iter=100):
    nodes = sorted(nodes)
    G, _, _ = google_matrix(nodes, edges, damping)
    x = np.full(len(nodes), 1.0 / len(nodes))
    for _ in range(max_iter):
        new = G @ x
        done = np.abs(new - x).sum() < epsilon
        x = new
        if done:
            break
    return dict(zip(nodes, x))


def exact(nodes, edges, damping=0.85):
    nodes = sorted(nodes)
    _, S, v = google_matrix(nodes, edges, damping)
    n = len(nodes)
    x = np.linalg.solve(np.eye(n) - damping * S, (1 - damping) * v)
    return dict(zip(nodes, x / x.sum()))
