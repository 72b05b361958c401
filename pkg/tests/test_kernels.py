import numpy as np
import pytest

from ensemble_ssl import _kernels_py, kernels

IMPLS = kernels.implementations()


def _case(rng, n=7, length=9, vocab=13, dim=5):
    emb = rng.normal(size=(vocab, dim))
    emb[0] = 0.0
    ids = rng.integers(0, vocab, size=(n, length))
    ids[0] = 0  # an all-PAD row
    return emb, ids


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_forward_is_masked_mean(name, rng):
    emb, ids = _case(rng)
    pooled, inv = kernels.pool_forward(emb, ids, impl=IMPLS[name])
    for b in range(len(ids)):
        toks = ids[b][ids[b] != 0]
        expected = emb[toks].mean(axis=0) if len(toks) else np.zeros(emb.shape[1])
        np.testing.assert_allclose(pooled[b], expected, atol=1e-14)
    assert inv[0] == 0.0


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_backward_is_adjoint_of_forward(name, rng):
    # <d, P(E)> == <P^T(d), E> for the linear pooling map P
    emb, ids = _case(rng)
    pooled, inv = kernels.pool_forward(emb, ids, impl=IMPLS[name])
    d = rng.normal(size=pooled.shape)
    g = np.zeros_like(emb)
    kernels.pool_backward(d, ids, inv, g, impl=IMPLS[name])
    assert np.isclose(np.sum(d * pooled), np.sum(g * emb), rtol=1e-12)


@pytest.mark.skipif("cython" not in IMPLS, reason="compiled extension not built")
def test_backends_bit_identical(rng):
    for _ in range(20):
        emb, ids = _case(rng, n=int(rng.integers(1, 30)), length=int(rng.integers(1, 20)))
        a, ia = kernels.pool_forward(emb, ids, impl=IMPLS["cython"])
        b, ib = kernels.pool_forward(emb, ids, impl=_kernels_py)
        assert np.array_equal(a, b) and np.array_equal(ia, ib)
        d = rng.normal(size=a.shape)
        ga, gb = np.zeros_like(emb), np.zeros_like(emb)
        kernels.pool_backward(d, ids, ia, ga, impl=IMPLS["cython"])
        kernels.pool_backward(d, ids, ib, gb, impl=_kernels_py)
        assert np.array_equal(ga, gb)


def test_backend_reported():
    assert kernels.BACKEND in IMPLS


def test_use_switches_backend():
    before = kernels.BACKEND
    try:
        kernels.use("python")
        assert kernels.BACKEND == "python"
        with pytest.raises(ValueError):
            kernels.use("fortran")
    finally:
        kernels.use(before)
