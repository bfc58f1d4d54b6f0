"""Random commuting shift families shared by several test modules."""
import numpy as np
import scipy.sparse as sp

from polyshift import (
    ShiftFamily,
    build_circulant,
    build_path,
    build_random_geometric,
    cartesian_product,
    circulant_generator_shift,
    laplacian,
    sym_normalized_laplacian,
    validate_shift,
)


def _affine_laplacian(G, rng, normalized=True):
    L = sym_normalized_laplacian(G) if normalized else laplacian(G)
    a, b = rng.uniform(-1, 1), rng.uniform(0.5, 1.5)
    return (a * sp.identity(G.n) + b * L).tocsr()


def product_family(rng, n1, n2, factor="path"):
    """``{A (x) I, I (x) B}`` on ``G1 x G2`` with affine Laplacian factors."""
    if factor == "path":
        G1, G2 = build_path(n1), build_path(n2)
    else:
        G1 = build_random_geometric(n1, 0.6, seed=int(rng.integers(1 << 30)))
        G2 = build_random_geometric(n2, 0.6, seed=int(rng.integers(1 << 30)))
    G = cartesian_product(G1, G2)
    A = _affine_laplacian(G1, rng, normalized=False)
    B = _affine_laplacian(G2, rng, normalized=False)
    S1 = validate_shift(sp.kron(A, sp.identity(n2), format="csr"), G, "A(x)I")
    S2 = validate_shift(sp.kron(sp.identity(n1), B, format="csr"), G, "I(x)B")
    return ShiftFamily([S1, S2]), G


def rgg_family(rng, n, d):
    """``S_k = a_k I + b_k L_sym`` on one random geometric graph."""
    G = build_random_geometric(n, min(1.0, 2.2 * np.sqrt(np.log(n) / n)),
                               seed=int(rng.integers(1 << 30)))
    L = sym_normalized_laplacian(G)
    shifts = []
    for k in range(d):
        a, b = rng.uniform(-1, 1), rng.uniform(0.3, 1.5)
        shifts.append(validate_shift((a * sp.identity(n) + b * L).tocsr(), G, f"S{k}"))
    return ShiftFamily(shifts), G


def circulant_family(rng, N, d):
    while True:
        Q = sorted(rng.choice(np.arange(1, (N - 1) // 2 + 1), size=d, replace=False).tolist())
        G = build_circulant(N, Q)
        if G.is_connected:
            break
    return ShiftFamily([circulant_generator_shift(N, q, graph=G) for q in Q]), G


def random_family(rng, n_max=200, d_max=3):
    """One of the three family kinds above, with at most ``d_max`` shifts."""
    kind = rng.integers(3)
    d = int(rng.integers(1, d_max + 1))
    if kind == 0:
        return rgg_family(rng, int(rng.integers(10, n_max + 1)), d)
    if kind == 1:
        return circulant_family(rng, int(rng.integers(2 * d + 3, n_max + 1)), d)
    n1 = int(rng.integers(2, 15))
    n2 = int(rng.integers(2, max(3, n_max // n1)))
    return product_family(rng, n1, n2, factor="path" if rng.random() < 0.5 else "rgg")[0:2]
