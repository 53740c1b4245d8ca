"""Cross-backend agreement: the numba kernels and the numpy fallbacks
must produce identical bits for the hash-keyed draws and the cascade
outcomes."""

import numpy as np
import pytest

from keynode import _cascade_kernels as ck
from keynode import rng
from keynode.backend import HAVE_NUMBA, USE_NUMBA, backend_name

from conftest import random_digraph

needs_numba = pytest.mark.skipif(not HAVE_NUMBA, reason="numba not installed")


def test_backend_name_reports_active_path():
    assert backend_name() == ("numba" if USE_NUMBA else "numpy")


def test_mix64_python_vs_numpy_vectorised():
    gen = np.random.Generator(np.random.PCG64(0))
    raw = gen.integers(0, 2**64, size=500, dtype=np.uint64)
    seed = 0x0123456789ABCDEF
    vec = rng.arc_uniform_array(seed, raw.astype(np.int64) % (2**62))
    for i, a in enumerate(raw.astype(np.int64) % (2**62)):
        assert rng.arc_uniform(seed, int(a)) == vec[i]


@needs_numba
def test_arc_draw_njit_matches_python():
    gen = np.random.Generator(np.random.PCG64(1))
    for _ in range(200):
        seed = int(gen.integers(0, 2**63))
        arc = int(gen.integers(0, 2**40))
        py = ck.arc_draw_py(seed, arc)
        jit = ck._arc_uniform(np.uint64(seed), np.uint64(arc), np.uint64(ck._ARC_SALT_IC))
        assert py == jit


@needs_numba
def test_run_seed_njit_matches_python():
    for master, node, t, r in [(0, 0, 0, 0), (7, 3, 1, 99), (2**61, 4096, 2, 12345)]:
        assert ck._run_seed(
            np.uint64(master), np.uint64(node), np.uint64(t), np.uint64(r)
        ) == rng.derive_seed(master, node, t, r)


@needs_numba
@pytest.mark.parametrize("seed", range(3))
def test_cascade_outcomes_identical_across_backends(seed):
    g = random_digraph(40, 0.08, seed=seed)
    gen = np.random.Generator(np.random.PCG64(seed + 100))
    for _ in range(25):
        node = int(gen.integers(0, g.n))
        p = float(gen.random())
        run_seed = int(gen.integers(0, 2**63))
        a = ck._ic_single_njit(g.out_indptr, g.out_indices, node, p, run_seed)
        b = ck._ic_single_numpy(g.out_indptr, g.out_indices, node, p, run_seed)
        assert tuple(int(x) for x in a) == tuple(int(x) for x in b)


@needs_numba
@pytest.mark.parametrize("seed", range(3))
def test_sir_outcomes_identical_across_backends(seed):
    g = random_digraph(40, 0.08, seed=seed)
    gen = np.random.Generator(np.random.PCG64(seed + 200))
    for _ in range(25):
        node = int(gen.integers(0, g.n))
        beta = float(gen.random())
        run_seed = int(gen.integers(0, 2**63))
        a = ck._sir_single_njit(g.out_indptr, g.out_indices, node, beta, run_seed)
        b = ck._sir_single_numpy(g.out_indptr, g.out_indices, node, beta, run_seed)
        assert tuple(int(x) for x in a) == tuple(int(x) for x in b)


@needs_numba
def test_batch_sums_identical_across_backends():
    g = random_digraph(25, 0.1, seed=5)
    nodes = np.arange(g.n, dtype=np.int32)
    t_idx = np.zeros(g.n, np.int32)
    p = np.full(g.n, 0.3)
    a = ck._ic_batch_njit(g.out_indptr, g.out_indices, nodes, t_idx, p, 20, 42)
    b = ck._ic_batch_numpy(g.out_indptr, g.out_indices, nodes, t_idx, p, 20, 42)
    for x, y in zip(a, b):
        assert np.array_equal(x, y)
