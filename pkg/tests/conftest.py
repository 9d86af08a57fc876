"""Shared fixtures and independent oracles for the test suite.

The oracles deliberately avoid the library's own code paths: the smallest
eigenvalue comes from a shifted power iteration, minimum energies from
exhaustive enumeration over all labelings, and cut capacities from direct
enumeration of node partitions.
"""
import itertools

import numpy as np
import pytest

from lfseg.energy import BoundaryTerm, SegGraph
from lfseg.lightfield import Mask, ScalarMap


def oracle_smallest_eig(mat: np.ndarray):
    """Smallest eigenvalue of a symmetric PSD matrix, via its characteristic
    polynomial.

    Coefficients come from Newton's identities on power-sum traces and the
    roots from the polynomial companion solve, so no step shares code with
    the library's cyclic-Jacobi path.
    """
    a = np.asarray(mat, dtype=np.float64)
    n = a.shape[0]
    powers = [np.eye(n)]
    for _ in range(n):
        powers.append(powers[-1] @ a)
    p = [float(np.trace(powers[k])) for k in range(n + 1)]
    e = [1.0]
    for k in range(1, n + 1):
        acc = 0.0
        for i in range(1, k + 1):
            acc += (-1) ** (i - 1) * e[k - i] * p[i]
        e.append(acc / k)
    coeffs = [(-1) ** k * e[k] for k in range(n + 1)]
    roots = np.roots(coeffs)
    real = roots.real[np.abs(roots.imag) < 1e-6 * max(1.0, np.abs(roots).max())]
    lam = float(real.min())
    return max(lam, 0.0), None


def enumerate_min_energy(r0: np.ndarray, r1: np.ndarray, bh: np.ndarray, bv: np.ndarray, alpha: float):
    """Exhaustive minimum of the labeling energy over all 2^(H*W) labelings."""
    h, w = r0.shape
    n = h * w
    labels = np.arange(2**n, dtype=np.uint32)
    bits = ((labels[:, None] >> np.arange(n)[None, :]) & 1).astype(np.float64)
    unary = bits @ (r1.ravel() - r0.ravel()) + r0.sum()
    pair = np.zeros(2**n)
    for y in range(h):
        for x in range(w - 1):
            i, j = y * w + x, y * w + x + 1
            pair += bh[y, x] * (bits[:, i] != bits[:, j])
    for y in range(h - 1):
        for x in range(w):
            i, j = y * w + x, (y + 1) * w + x
            pair += bv[y, x] * (bits[:, i] != bits[:, j])
    total = unary + alpha * pair
    best = int(np.argmin(total))
    lab = bits[best].reshape(h, w).astype(np.uint8)
    return float(total[best]), lab


def enumerate_min_cut(num_nodes: int, source: int, sink: int, arcs):
    """Minimum cut capacity by enumerating every source-side node subset.

    ``arcs`` is a list of (u, v, cap) directed arcs.
    """
    others = [v for v in range(num_nodes) if v not in (source, sink)]
    best = np.inf
    best_side = None
    for picks in itertools.product((False, True), repeat=len(others)):
        side = {source} | {v for v, p in zip(others, picks) if p}
        cut = sum(c for u, v, c in arcs if u in side and v not in side)
        if cut < best:
            best = cut
            best_side = side
    return best, best_side


def random_seggraph(rng: np.random.Generator, h: int, w: int, hi: float = 10.0):
    r0 = ScalarMap(rng.uniform(0, hi, (h, w)))
    r1 = ScalarMap(rng.uniform(0, hi, (h, w)))
    bterm = BoundaryTerm(horizontal=rng.uniform(0, hi, (h, w - 1)), vertical=rng.uniform(0, hi, (h - 1, w)))
    graph = SegGraph(cap_src=r0.data.copy(), cap_snk=r1.data.copy(),
                     ncap_h=bterm.horizontal, ncap_v=bterm.vertical)
    return r0, r1, bterm, graph


@pytest.fixture(scope="session")
def exact_scene():
    """Stock disk-plus-occluder scene with exact flows, shared across tests."""
    from lfseg.synth import example_scene_spec, generate

    return generate(example_scene_spec(width=128, height=128, seed=0))


def checkerboard(h: int, w: int) -> Mask:
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    return Mask(((yy + xx) % 2).astype(np.uint8))
