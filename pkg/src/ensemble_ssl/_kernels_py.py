"""Pure-numpy masked mean-pool kernels (fallback for ``_kernels``)."""
import numpy as np


def pool_forward(emb, ids):
    n, length = ids.shape
    pooled = np.zeros((n, emb.shape[1]), dtype=np.float64)
    mask = ids != 0
    # sequential over positions so the summation order matches the compiled loop
    for pos in range(length):
        rows = mask[:, pos]
        if rows.any():
            pooled[rows] += emb[ids[rows, pos]]
    counts = mask.sum(axis=1)
    inv_counts = np.zeros(n, dtype=np.float64)
    nz = counts > 0
    inv_counts[nz] = 1.0 / counts[nz].astype(np.float64)
    pooled *= inv_counts[:, None]
    return pooled, inv_counts


def pool_backward(d_pooled, ids, inv_counts, grad_emb):
    scaled = d_pooled * inv_counts[:, None]
    mask = ids != 0
    rows, cols = np.nonzero(mask)
    # np.add.at applies row-major and unbuffered: same order as the compiled loop
    np.add.at(grad_emb, ids[rows, cols], scaled[rows])
