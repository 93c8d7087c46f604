"""Global least squares for cluster log heights from pairwise ratios."""

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from ._robust import irls


def constraint_components(n_nodes, edges):
    """Connected-component label per node of the constraint graph."""
    if n_nodes == 0:
        return np.zeros(0, dtype=int)
    if len(edges) == 0:
        return np.arange(n_nodes)
    i, j = np.asarray(edges).T
    graph = coo_matrix((np.ones(len(i)), (i, j)), shape=(n_nodes, n_nodes))
    _, labels = connected_components(graph, directed=False)
    return labels


def solve_log_heights(observations, init, huber_delta=None, anchor_weights=None):
    """Cluster log heights best explaining the pairwise log ratios.

    Minimizes ``sum w * (logH_i - logH_j - log_ratio)**2``.  Ratios fix the
    heights only up to one additive constant per connected component of
    the cluster graph; that constant is chosen so the (weighted) mean log
    height of each component equals its mean under ``init``.  Clusters
    that appear in no observation keep their ``init`` value.

    Parameters
    ----------
    observations : list of RatioObservation
    init : dict
        Cluster key -> initial log height (log meters).  Every cluster
        referenced by an observation must be present.
    huber_delta : float, optional
        Huber threshold on log-ratio residuals; enables IRLS.
    anchor_weights : dict, optional
        Cluster key -> non-negative weight for the gauge mean (default 1).

    Returns
    -------
    dict
        Cluster key -> log height, same keys as ``init``.
    """
    keys = list(init)
    index = {k: n for n, k in enumerate(keys)}
    x0 = np.array([init[k] for k in keys], dtype=float)
    obs = [o for o in observations if o.cluster_i != o.cluster_j]
    if not obs:
        return dict(init)

    rows_i = np.array([index[o.cluster_i] for o in obs])
    rows_j = np.array([index[o.cluster_j] for o in obs])
    rhs = np.array([o.log_ratio for o in obs])
    base_w = np.array([o.weight for o in obs], dtype=float)
    n = len(keys)
    labels = constraint_components(n, np.column_stack([rows_i, rows_j]))
    aw = np.ones(n) if anchor_weights is None else np.array(
        [anchor_weights.get(k, 1.0) for k in keys], dtype=float)

    D = np.zeros((len(obs), n))
    D[np.arange(len(obs)), rows_i] = 1.0
    D[np.arange(len(obs)), rows_j] = -1.0

    # one gauge row per component, appended as hard constraints via KKT
    comps = np.unique(labels)
    G = np.zeros((len(comps), n))
    g = np.zeros(len(comps))
    for c_row, c in enumerate(comps):
        members = labels == c
        w = aw * members
        if w.sum() <= 0:
            w = members.astype(float)
        w = w / w.sum()
        G[c_row] = w
        g[c_row] = w @ x0

    def solve(irls_w):
        w = base_w if irls_w is None else base_w * irls_w
        N = D.T @ (D * w[:, None])
        r = D.T @ (w * rhs)
        kkt = np.block([[N, G.T], [G, np.zeros((len(comps), len(comps)))]])
        sol, *_ = np.linalg.lstsq(kkt, np.concatenate([r, g]), rcond=None)
        return sol[:n]

    def residual_fn(x):
        return D @ x - rhs

    x = irls(solve, residual_fn, huber_delta)
    return {k: float(v) for k, v in zip(keys, x)}
