"""Multivariate polynomial filters of commuting shifts.

A filter ``h(S_1, ..., S_d) = sum_l h_l S_1^{l_1} ... S_d^{l_d}`` is stored
as a dense coefficient tensor of shape ``(L_1+1, ..., L_d+1)``; its C-order
flattening is the lexicographic ordering of multi-indices.  :func:`apply`
evaluates the filter on a signal with only shift-vector products, by
Horner reductions one dimension at a time.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from math import comb
from typing import Sequence

import numpy as np
from numpy.polynomial import Chebyshev, Polynomial

from .errors import DegreeCapError, DenseCapError, DimensionMismatchError
from .shifts import DENSE_CAP, Shift, ShiftFamily, to_dense

log = logging.getLogger(__name__)

CHEB_MONOMIAL_CAP = 30

__all__ = [
    "PolyCoeffs",
    "ChebCoeffs",
    "OpCounter",
    "apply_single",
    "apply",
    "materialize",
    "eval_scalar",
    "cheb_eval",
    "cheb_to_monomial",
    "apply_cheb",
    "load_filter",
    "dump_filter",
    "filter_from_dict",
    "filter_to_dict",
]


class PolyCoeffs:
    """Coefficient tensor ``h[l_1, ..., l_d]`` of a polynomial in ``d`` variables."""

    def __init__(self, coeffs):
        c = np.array(coeffs, dtype=float)
        if c.ndim == 0:
            c = c.reshape(1)
        self.coeffs = c

    @classmethod
    def from_flat(cls, degrees: Sequence[int], flat) -> "PolyCoeffs":
        shape = tuple(int(L) + 1 for L in degrees)
        flat = np.asarray(flat, dtype=float)
        if flat.size != int(np.prod(shape)):
            raise DimensionMismatchError(
                f"{flat.size} coefficients given for degrees {tuple(degrees)}")
        return cls(flat.reshape(shape))

    @classmethod
    def monomial(cls, index: Sequence[int], value: float = 1.0) -> "PolyCoeffs":
        c = np.zeros(tuple(int(i) + 1 for i in index))
        c[tuple(index)] = value
        return cls(c)

    @property
    def d(self) -> int:
        return self.coeffs.ndim

    @property
    def degrees(self) -> tuple:
        return tuple(s - 1 for s in self.coeffs.shape)

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.ravel()

    @property
    def total_degree(self) -> int:
        nz = np.argwhere(self.coeffs != 0)
        return int(nz.sum(axis=1).max()) if nz.size else 0

    def __call__(self, t):
        return eval_scalar(self, t)

    def __repr__(self):
        return f"PolyCoeffs(degrees={self.degrees})"


@dataclass
class ChebCoeffs:
    """Shifted Chebyshev coefficients ``c_k``, ``|k| <= K``, on a box.

    ``coeffs`` is a dense ``(K+1)^d`` tensor with zeros outside the simplex
    ``k_1 + ... + k_d <= K``.  The basis is
    ``prod_i T_{k_i}((2 t_i - mu_i - nu_i) / (nu_i - mu_i))``.
    """

    K: int
    box: np.ndarray
    coeffs: np.ndarray

    def __post_init__(self):
        self.box = np.atleast_2d(np.asarray(self.box, dtype=float))
        if self.box.shape[1] != 2 or np.any(self.box[:, 0] >= self.box[:, 1]):
            raise ValueError("box must be a list of (mu, nu) with mu < nu")
        c = np.asarray(self.coeffs, dtype=float)
        d = self.box.shape[0]
        if c.shape != (self.K + 1,) * d:
            raise DimensionMismatchError(f"coefficient tensor shape {c.shape} for K={self.K}, d={d}")
        c = c * simplex_mask(self.K, d)
        self.coeffs = c

    @property
    def d(self) -> int:
        return self.box.shape[0]

    @property
    def n_coeffs(self) -> int:
        return comb(self.K + self.d, self.d)

    @classmethod
    def constant(cls, value: float, box) -> "ChebCoeffs":
        box = np.atleast_2d(box)
        c = np.zeros((1,) * box.shape[0])
        c.flat[0] = value
        return cls(0, box, c)

    def truncate(self, K: int) -> "ChebCoeffs":
        """Partial sum of degree ``K <= self.K``."""
        sl = (slice(0, K + 1),) * self.d
        return ChebCoeffs(K, self.box, self.coeffs[sl])

    def __call__(self, t):
        return cheb_eval(self, t)


def simplex_mask(K: int, d: int) -> np.ndarray:
    grids = np.indices((K + 1,) * d)
    return (grids.sum(axis=0) <= K).astype(float)


class OpCounter(dict):
    """Tallies ``shift_applies`` and scalar ``multiplies`` of a filter evaluation."""

    def __init__(self):
        super().__init__(shift_applies=0, multiplies=0)

    def shift(self, S, ncols):
        self["shift_applies"] += ncols
        self["multiplies"] += _nnz(S) * ncols

    def scale(self, n):
        self["multiplies"] += int(n)


def _nnz(S):
    if hasattr(S, "nnz"):
        return int(S.nnz)
    return int(np.count_nonzero(S))


def _operators(F) -> list:
    if isinstance(F, ShiftFamily):
        return [S.matrix for S in F.shifts]
    if isinstance(F, Shift):
        return [F.matrix]
    if hasattr(F, "shape") and len(getattr(F, "shape")) == 2:
        return [F]
    return [S.matrix if isinstance(S, Shift) else S for S in F]


def _matvec(S, z):
    out = S @ z
    return np.asarray(out)


def apply_single(h, S, x, counter: OpCounter | None = None):
    """Horner evaluation ``z <- h_{L-n-1} x + S z`` from ``z = h_L x``.

    ``h`` is ``(h_0, ..., h_L)``; uses exactly ``L`` products with ``S``.
    ``x`` may carry extra trailing columns.
    """
    h = np.asarray(h.coeffs if isinstance(h, PolyCoeffs) else h, dtype=float).ravel()
    S = _operators(S)[0] if isinstance(S, (Shift, ShiftFamily)) else S
    x = np.asarray(x)
    if x.shape[0] != S.shape[0]:
        raise DimensionMismatchError(f"signal length {x.shape[0]} vs shift size {S.shape[0]}")
    L = h.size - 1
    z = h[L] * x
    for n in range(L):
        z = h[L - n - 1] * x + _matvec(S, z)
    if counter is not None:
        ncols = int(np.prod(x.shape[1:]))
        counter.scale((L + 1) * x.size)
        counter.shift(S, L * ncols)
    return z


def _horner_columns(S, U, counter):
    """``sum_l S^l U[:, :, l]`` for a block ``U`` of shape (N, P, L+1)."""
    L = U.shape[2] - 1
    z = U[:, :, L]
    for n in range(L):
        z = U[:, :, L - n - 1] + _matvec(S, z)
    if counter is not None:
        counter.shift(S, L * U.shape[1])
    return z


def apply(h: PolyCoeffs, F, x, counter: OpCounter | None = None) -> np.ndarray:
    """Evaluate ``h(S_1, ..., S_d) x`` by nested Horner reductions.

    The columns of ``U_{d-1}`` are univariate filters in ``S_d`` applied to
    ``x`` (one per multi-index ``(l_1, ..., l_{d-1})``).  Each reduction
    ``U_{m+1} -> U_m`` is a Horner pass in ``S_{m+1}`` whose coefficients are
    the columns of ``U_{m+1}`` grouped by their last index.  The final pass
    over ``S_1`` yields the output.
    """
    if not isinstance(h, PolyCoeffs):
        h = PolyCoeffs(h)
    ops = _operators(F)
    d = h.d
    if len(ops) != d:
        raise DimensionMismatchError(f"filter has {d} variables but family has {len(ops)} shifts")
    x = np.asarray(x)
    N = ops[0].shape[0]
    if x.ndim != 1 or x.shape[0] != N:
        raise DimensionMismatchError(f"signal of shape {x.shape} for shifts of size {N}")
    if d == 1:
        return apply_single(h.coeffs, ops[0], x, counter)
    C = h.coeffs
    shape = C.shape
    # U_{d-1}: column p holds sum_l C[p, l] S_d^l x
    P = int(np.prod(shape[:-1]))
    coef = C.reshape(P, shape[-1])
    Ld = shape[-1] - 1
    U = x[:, None] * coef[None, :, Ld]
    for n in range(Ld):
        U = x[:, None] * coef[None, :, Ld - n - 1] + _matvec(ops[-1], U)
    if counter is not None:
        counter.scale(N * coef.size)
        counter.shift(ops[-1], Ld * P)
    for m in range(d - 2, -1, -1):
        P //= shape[m]
        U = _horner_columns(ops[m], U.reshape(N, P, shape[m]), counter)
    return U.reshape(N)


def materialize(h: PolyCoeffs, F, cap: int = DENSE_CAP) -> np.ndarray:
    """Dense ``sum_l h_l S_1^{l_1} ... S_d^{l_d}`` from explicit matrix powers."""
    if not isinstance(h, PolyCoeffs):
        h = PolyCoeffs(h)
    ops = _operators(F)
    if len(ops) != h.d:
        raise DimensionMismatchError(f"filter has {h.d} variables but family has {len(ops)} shifts")
    N = ops[0].shape[0]
    if N > cap:
        raise DenseCapError(f"n={N} exceeds dense cap {cap}")
    mats = [to_dense(S) for S in ops]
    powers = []
    for S, L in zip(mats, h.degrees):
        pw = [np.eye(N)]
        for _ in range(L):
            pw.append(pw[-1] @ S)
        powers.append(pw)
    H = np.zeros((N, N))
    for idx in np.argwhere(h.coeffs != 0):
        term = powers[0][idx[0]]
        for k in range(1, h.d):
            term = term @ powers[k][idx[k]]
        H += h.coeffs[tuple(idx)] * term
    return H


def _points(t, d):
    """Points as an ``(n, d)`` array plus whether a single point was given."""
    t = np.asarray(t)
    if t.ndim == 1 and t.shape[0] == d:
        return t.reshape(1, d), True
    if t.ndim != 2 or t.shape[1] != d:
        raise DimensionMismatchError(f"points of shape {t.shape} for a {d}-variate polynomial")
    return t, False


def eval_scalar(h: PolyCoeffs, t):
    """``sum_l h_l t^l`` by nested Horner, vectorized over points.

    ``t`` is a point in ``R^d`` (or ``C^d``), an array of points ``(n, d)``,
    or for ``d = 1`` any array of scalars.
    """
    if not isinstance(h, PolyCoeffs):
        h = PolyCoeffs(h)
    d = h.d
    if d == 1:
        t = np.asarray(t)
        c = h.coeffs
        r = np.full(t.shape, c[-1], dtype=np.result_type(t, float))
        for a in c[-2::-1]:
            r = a + t * r
        return r
    pts, single = _points(t, d)
    V = np.broadcast_to(h.coeffs, (pts.shape[0],) + h.coeffs.shape)
    for k in range(d - 1, -1, -1):
        tk = pts[:, k].reshape((-1,) + (1,) * k)
        r = V[..., -1]
        for j in range(V.shape[-1] - 2, -1, -1):
            r = V[..., j] + tk * r
        V = r
    return V[0] if single else V


def _cheb_table(u, K):
    """``T_0(u) .. T_K(u)`` by the three-term recurrence, stacked on the last axis."""
    T = np.empty(u.shape + (K + 1,), dtype=np.result_type(u, float))
    T[..., 0] = 1.0
    if K >= 1:
        T[..., 1] = u
    for k in range(2, K + 1):
        T[..., k] = 2 * u * T[..., k - 1] - T[..., k - 2]
    return T


def _affine(box_row):
    mu, nu = box_row
    return 2.0 / (nu - mu), -(mu + nu) / (nu - mu)


def cheb_eval(c: ChebCoeffs, t):
    """Direct evaluation of a Chebyshev expansion from recurrence tables."""
    d = c.d
    if d == 1:
        t = np.asarray(t)
        a, b = _affine(c.box[0])
        T = _cheb_table(a * t + b, c.K)
        return T @ c.coeffs
    pts, single = _points(t, d)
    V = np.broadcast_to(c.coeffs, (pts.shape[0],) + c.coeffs.shape)
    for k in range(d - 1, -1, -1):
        a, b = _affine(c.box[k])
        T = _cheb_table(a * pts[:, k] + b, c.K)
        V = np.einsum("n...j,nj->n...", V, T)
    return V[0] if single else V


def _axis_change_matrix(K, box_row):
    """Row ``k`` holds the monomial coefficients of ``T_k`` mapped from ``box_row``."""
    M = np.zeros((K + 1, K + 1))
    for k in range(K + 1):
        p = Chebyshev.basis(k, domain=list(box_row)).convert(kind=Polynomial).coef
        M[k, : p.size] = p
    return M


def cheb_to_monomial(c: ChebCoeffs) -> PolyCoeffs:
    """Exact change of basis from shifted Chebyshev to monomials."""
    if c.K > CHEB_MONOMIAL_CAP:
        raise DegreeCapError(f"K={c.K} exceeds the conditioning cap {CHEB_MONOMIAL_CAP}")
    H = c.coeffs
    for k in range(c.d):
        M = _axis_change_matrix(c.K, c.box[k])
        H = np.moveaxis(np.tensordot(H, M, axes=([k], [0])), -1, k)
    return PolyCoeffs(H)


def _clenshaw(S, A, mu, nu, counter):
    """``sum_k T_k(X) A[:, :, k]`` with ``X = (2S - (mu+nu) I)/(nu - mu)``."""
    a, b = 2.0 / (nu - mu), -(mu + nu) / (nu - mu)
    K = A.shape[2] - 1

    def X(z):
        return a * _matvec(S, z) + b * z

    if K == 0:
        return A[:, :, 0].copy()
    b1 = A[:, :, K]
    b2 = np.zeros_like(b1)
    for k in range(K - 1, 0, -1):
        b1, b2 = A[:, :, k] + 2 * X(b1) - b2, b1
    out = A[:, :, 0] + X(b1) - b2
    if counter is not None:
        counter.shift(S, K * A.shape[1])
        counter.scale(2 * K * A.shape[0] * A.shape[1])
    return out


def _check_box(c: ChebCoeffs, F):
    spec = getattr(F, "_spectrum", None)
    if spec is None:
        return
    bb = spec.bounding_box()
    tol = 1e-9 * (1 + np.abs(c.box).max())
    if np.any(bb[:, 0] < c.box[:, 0] - tol) or np.any(bb[:, 1] > c.box[:, 1] + tol):
        log.warning("joint spectrum box %s is not contained in the Chebyshev box %s",
                    bb.tolist(), c.box.tolist())


def apply_cheb(c: ChebCoeffs, F, x, *, path: str = "recurrence",
               counter: OpCounter | None = None) -> np.ndarray:
    """Evaluate ``g_K(S_1, ..., S_d) x`` for a shifted Chebyshev expansion.

    ``path='recurrence'`` runs a Clenshaw recurrence per dimension with
    vector-valued coefficients (same nesting as :func:`apply`);
    ``path='monomial'`` converts the basis and calls :func:`apply`.
    """
    ops = _operators(F)
    if len(ops) != c.d:
        raise DimensionMismatchError(f"expansion has {c.d} variables but family has {len(ops)} shifts")
    if isinstance(F, ShiftFamily):
        _check_box(c, F)
    if path == "monomial":
        return apply(cheb_to_monomial(c), ops, x, counter)
    if path != "recurrence":
        raise ValueError("path must be 'recurrence' or 'monomial'")
    x = np.asarray(x)
    N = ops[0].shape[0]
    if x.ndim != 1 or x.shape[0] != N:
        raise DimensionMismatchError(f"signal of shape {x.shape} for shifts of size {N}")
    C = c.coeffs
    K1 = c.K + 1
    P = K1 ** (c.d - 1)
    A = x[:, None, None] * C.reshape(P, K1)[None, :, :]
    if counter is not None:
        counter.scale(x.size * C.size)
    U = _clenshaw(ops[-1], A, *c.box[-1], counter)
    for m in range(c.d - 2, -1, -1):
        P //= K1
        U = _clenshaw(ops[m], U.reshape(N, P, K1), *c.box[m], counter)
    return U.reshape(N)


def filter_to_dict(f) -> dict:
    if isinstance(f, PolyCoeffs):
        return {"degrees": list(f.degrees), "coeffs": f.flat.tolist()}
    if isinstance(f, ChebCoeffs):
        coeffs = {",".join(map(str, k)): float(f.coeffs[tuple(k)])
                  for k in np.argwhere(simplex_mask(f.K, f.d) > 0)}
        return {"cheb": {"K": f.K, "box": f.box.tolist(), "coeffs": coeffs}}
    raise TypeError(f"cannot serialize {type(f).__name__}")


def filter_from_dict(obj: dict):
    if "cheb" in obj:
        ch = obj["cheb"]
        K = int(ch["K"])
        box = np.atleast_2d(np.asarray(ch["box"], dtype=float))
        C = np.zeros((K + 1,) * box.shape[0])
        for key, val in ch["coeffs"].items():
            idx = tuple(int(s) for s in str(key).split(","))
            if len(idx) != box.shape[0] or sum(idx) > K:
                raise ValueError(f"Chebyshev index {key!r} invalid for K={K}, d={box.shape[0]}")
            C[idx] = float(val)
        return ChebCoeffs(K, box, C)
    if "degrees" in obj and "coeffs" in obj:
        return PolyCoeffs.from_flat(obj["degrees"], obj["coeffs"])
    raise ValueError("filter spec needs 'degrees'+'coeffs' or 'cheb'")


def load_filter(path):
    with open(path, encoding="utf-8") as fh:
        return filter_from_dict(json.load(fh))


def dump_filter(f, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(filter_to_dict(f), fh, indent=2)
        fh.write("\n")
