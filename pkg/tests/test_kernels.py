"""The compiled kernels and their pure-Python twins must agree."""

import os
import subprocess
import sys

import numpy as np
import pytest

from graphreg import _backend, _pykernels

from .conftest import random_graph

compiled = pytest.mark.skipif(not _backend.compiled_available(), reason="compiled extension not built")


@compiled
@pytest.mark.parametrize("metric", ["l1", "squared-l2", "cross-entropy", "cross-entropy-symmetric"])
def test_edge_distance_parity(rng, metric):
    H = rng.normal(size=(30, 5))
    a, b = rng.integers(30, size=80), rng.integers(30, size=80)
    coef = rng.uniform(0, 2, size=80)
    code = _pykernels.METRIC_CODES[metric]
    v1, g1 = _backend.edge_distance(H, a, b, coef, code)
    v2, g2 = _backend.edge_distance(H, a, b, coef, code, impl=_pykernels)
    assert v1 == pytest.approx(v2, rel=1e-12)
    np.testing.assert_allclose(g1, g2, rtol=1e-11, atol=1e-13)


@compiled
def test_jacobi_sweep_parity(rng):
    g = random_graph(rng, 40, 0.1, weighted=True)
    A = g.adjacency
    prev = rng.dirichlet(np.ones(3), size=40)
    num = rng.uniform(size=(40, 3))
    den = rng.uniform(size=40)
    den[5] = 0.0
    out1, out2 = np.empty_like(prev), np.empty_like(prev)
    c1 = _backend.jacobi_sweep(A.indptr, A.indices, A.data, prev, num, den, 2.0, out1)
    c2 = _backend.jacobi_sweep(A.indptr, A.indices, A.data, prev, num, den, 2.0, out2, impl=_pykernels)
    np.testing.assert_allclose(out1, out2, rtol=1e-13, atol=1e-15)
    assert c1 == pytest.approx(c2, rel=1e-12)


@compiled
@pytest.mark.parametrize("batch_size", [1, 2, 5, 100])
def test_neighborhood_order_parity(rng, batch_size):
    g = random_graph(rng, 50, 0.08)
    perm = rng.permutation(g.n_edges)
    o1, b1 = _backend.neighborhood_order(g.n_nodes, g.edges_u, g.edges_v, perm, batch_size)
    o2, b2 = _backend.neighborhood_order(g.n_nodes, g.edges_u, g.edges_v, perm, batch_size, impl=_pykernels)
    np.testing.assert_array_equal(o1, o2)
    np.testing.assert_array_equal(b1, b2)


def test_jacobi_zero_denominator_keeps_previous(kernel_impl):
    indptr = np.array([0, 0, 0])
    indices = np.zeros(0, dtype=np.int32)
    prev = np.array([[0.3, 0.7], [0.5, 0.5]])
    out = np.empty_like(prev)
    _backend.jacobi_sweep(indptr, indices, np.zeros(0), prev, np.zeros((2, 2)), np.zeros(2), 1.0, out,
                          impl=kernel_impl)
    np.testing.assert_array_equal(out, prev)


def test_env_var_forces_python_fallback():
    code = "from graphreg import _backend; print(_backend.BACKEND)"
    env = dict(os.environ, GRAPHREG_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
