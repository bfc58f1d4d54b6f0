"""Graph shifts, commuting families and their joint spectrum.

A shift is a sparse operator whose nonzero entries only join a vertex to
itself or to an adjacent vertex.  Families of commuting shifts can be
simultaneously triangularized (diagonalized, when symmetric) by a single
unitary ``U``; the matched diagonal entries form the joint spectrum.
"""
from __future__ import annotations

import csv
import logging
import threading
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .errors import (
    DenseCapError,
    DimensionMismatchError,
    InvalidGeneratorError,
    NonCommutingError,
    NonDistinctSpectrumError,
    TriangularizationError,
    WidthViolationError,
)
from .graphs import Graph, build_circulant, geodesic_width, sym_normalized_laplacian

log = logging.getLogger(__name__)

DENSE_CAP = 2048
COMMUTE_RTOL = 1e-10
RECON_RTOL = 1e-8
GAP_TOL = 1e-6

__all__ = [
    "KronOperator",
    "Shift",
    "ShiftFamily",
    "JointSpectrum",
    "DistanceBounds",
    "validate_shift",
    "commutator_norms",
    "circulant_generator_shift",
    "circulant_spectrum",
    "kron_lift",
    "kron_spectrum",
    "compute_joint_spectrum",
    "jacobi_joint_diagonalize",
    "recover_spectral_multiplier",
    "dist_to_polynomial_set",
    "to_dense",
]


def to_dense(A) -> np.ndarray:
    if isinstance(A, np.ndarray):
        return A
    if hasattr(A, "toarray"):
        return A.toarray()
    return np.asarray(A)


class KronOperator:
    """``A (x) I_m`` (``side='left'``) or ``I_m (x) A`` (``side='right'``).

    Vectors are indexed ``outer * q + inner`` with ``q`` the size of the
    right factor, so a length-``p*q`` vector reshapes to a ``(p, q)`` array
    in C order.  Applying never forms the Kronecker product.
    """

    def __init__(self, A, side: str, other_size: int):
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        A = sp.csr_matrix(A) if sp.issparse(A) else np.asarray(A, dtype=float)
        if A.shape[0] != A.shape[1]:
            raise DimensionMismatchError("Kronecker factor must be square")
        self.A = A
        self.side = side
        self.other_size = int(other_size)
        k = A.shape[0]
        self.shape = (k * self.other_size, k * self.other_size)
        self.dtype = np.dtype(float)

    @property
    def factor_shape(self):
        k = self.A.shape[0]
        return (k, self.other_size) if self.side == "left" else (self.other_size, k)

    def __matmul__(self, x):
        x = np.asarray(x)
        if x.shape[0] != self.shape[0]:
            raise DimensionMismatchError(
                f"operator of size {self.shape[0]} applied to vector of length {x.shape[0]}")
        p, q = self.factor_shape
        tail = x.shape[1:]
        X = x.reshape((p, q) + tail)
        if self.side == "left":
            Y = (self.A @ X.reshape(p, -1)).reshape((p, q) + tail)
        else:
            # I (x) A acts on the inner index
            Xt = np.moveaxis(X, 1, 0).reshape(q, -1)
            Y = np.moveaxis((self.A @ Xt).reshape((q, p) + tail), 0, 1)
        return np.ascontiguousarray(Y).reshape(x.shape)

    def dot(self, x):
        return self @ x

    @property
    def nnz(self) -> int:
        a = self.A.nnz if sp.issparse(self.A) else np.count_nonzero(self.A)
        return int(a * self.other_size)

    @property
    def T(self):
        return KronOperator(self.A.T, self.side, self.other_size)

    def trace(self) -> float:
        return float(self.A.diagonal().sum()) * self.other_size

    def diagonal(self):
        d = np.asarray(self.A.diagonal()).ravel()
        I = np.ones(self.other_size)
        return np.kron(d, I) if self.side == "left" else np.kron(I, d)

    def tocsr(self) -> sp.csr_matrix:
        I = sp.identity(self.other_size, format="csr")
        A = sp.csr_matrix(self.A)
        M = sp.kron(A, I) if self.side == "left" else sp.kron(I, A)
        M = M.tocsr()
        M.sort_indices()
        return M

    def toarray(self) -> np.ndarray:
        return self.tocsr().toarray()

    def __repr__(self):
        tag = "A(x)I" if self.side == "left" else "I(x)A"
        return f"<KronOperator {tag} factor={self.A.shape[0]} other={self.other_size}>"


@dataclass(frozen=True, eq=False)
class Shift:
    """A validated graph shift: sparse (or Kronecker-structured) operator + host graph."""

    matrix: object
    graph: Graph | None = None
    name: str = ""

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def shape(self):
        return self.matrix.shape

    @property
    def is_structured(self) -> bool:
        return isinstance(self.matrix, KronOperator)

    def __matmul__(self, x):
        return self.matrix @ x

    def tocsr(self) -> sp.csr_matrix:
        if isinstance(self.matrix, np.ndarray):
            return sp.csr_matrix(self.matrix)
        return sp.csr_matrix(self.matrix.tocsr())

    def toarray(self) -> np.ndarray:
        return to_dense(self.matrix)

    @property
    def nnz(self) -> int:
        m = self.matrix
        return int(m.nnz) if hasattr(m, "nnz") else int(np.count_nonzero(m))

    def trace(self) -> float:
        m = self.matrix
        if isinstance(m, KronOperator):
            return m.trace()
        return float(m.diagonal().sum())

    def is_symmetric(self, rtol: float = 1e-12) -> bool:
        if isinstance(self.matrix, KronOperator):
            A = self.matrix.A
        else:
            A = self.matrix
        diff = A - A.T
        dn = sp.linalg.norm(diff) if sp.issparse(diff) else np.linalg.norm(diff)
        an = sp.linalg.norm(A) if sp.issparse(A) else np.linalg.norm(A)
        return bool(dn <= rtol * max(an, 1.0))

    def frobenius(self) -> float:
        m = self.matrix
        if isinstance(m, KronOperator):
            A = m.A
            a = sp.linalg.norm(A) if sp.issparse(A) else np.linalg.norm(A)
            return float(a * np.sqrt(m.other_size))
        return float(sp.linalg.norm(m) if sp.issparse(m) else np.linalg.norm(m))

    def __repr__(self):
        return f"<Shift {self.name or ''} n={self.n} structured={self.is_structured}>"


def validate_shift(S, G: Graph, name: str = "") -> Shift:
    """Wrap ``S`` as a :class:`Shift` on ``G`` after checking width <= 1."""
    if isinstance(S, Shift):
        S = S.matrix
    if S.shape != (G.n, G.n):
        raise DimensionMismatchError(f"shift shape {S.shape} vs graph order {G.n}")
    if isinstance(S, KronOperator):
        M = S.tocsr()
    elif sp.issparse(S):
        M = sp.csr_matrix(S)
    else:
        M = sp.csr_matrix(np.asarray(S, dtype=float))
    width, entry = geodesic_width(M, G, return_entry=True)
    if width > 1:
        raise WidthViolationError(entry[0], entry[1], width)
    if not isinstance(S, KronOperator):
        M.sort_indices()
        S = M
    return Shift(S, G, name)


def _as_operator(S):
    return S.matrix if isinstance(S, Shift) else S


def _sparse(S):
    m = _as_operator(S)
    if isinstance(m, KronOperator):
        return m.tocsr()
    return sp.csr_matrix(m)


def _fro(A) -> float:
    return float(sp.linalg.norm(A)) if sp.issparse(A) else float(np.linalg.norm(A))


def commutator_norms(shifts: Sequence) -> np.ndarray:
    """Frobenius norms ``||S_k S_k' - S_k' S_k||_F`` for all pairs.

    Returns a symmetric ``d x d`` array (zero diagonal); ``.max()`` gives the
    largest pairwise commutator.
    """
    mats = [_sparse(S) for S in shifts]
    n = {m.shape for m in mats}
    if len(n) > 1:
        raise DimensionMismatchError(f"shifts have differing shapes {sorted(n)}")
    d = len(mats)
    out = np.zeros((d, d))
    for a in range(d):
        for b in range(a + 1, d):
            C = mats[a] @ mats[b] - mats[b] @ mats[a]
            out[a, b] = out[b, a] = _fro(C)
    return out


class JointSpectrum:
    """Joint spectrum ``lam`` (N x d) with optional unitary ``transform``.

    ``transform`` is ``U`` such that ``U @ S_k @ U^H`` is diagonal
    (symmetric families) or upper triangular, with ``lam[:, k]`` its diagonal.
    """

    def __init__(self, lam, transform=None, distinct=None, *, kind: str = "computed"):
        lam = np.asarray(lam)
        if lam.ndim == 1:
            lam = lam[:, None]
        if np.iscomplexobj(lam) and np.abs(lam.imag).max(initial=0.0) == 0.0:
            lam = lam.real
        self.lam = lam
        self.transform = transform
        self.kind = kind
        self._distinct = distinct

    @property
    def n(self) -> int:
        return self.lam.shape[0]

    @property
    def d(self) -> int:
        return self.lam.shape[1]

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.lam)

    @property
    def distinct(self) -> bool:
        if self._distinct is None:
            self._distinct = spectrum_is_distinct(self.lam)
        return self._distinct

    def bounding_box(self) -> np.ndarray:
        lam = self.lam.real
        return np.column_stack([lam.min(0), lam.max(0)])

    def select(self, columns) -> "JointSpectrum":
        return JointSpectrum(self.lam[:, list(columns)], self.transform, None, kind=self.kind)

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["i"] + [f"lambda_{k + 1}" for k in range(self.d)])
            for i, row in enumerate(self.lam):
                w.writerow([i] + [repr(complex(v)) if np.iscomplexobj(row) else repr(float(v))
                                  for v in row])

    def __repr__(self):
        return f"<JointSpectrum N={self.n} d={self.d} kind={self.kind}>"


def spectrum_is_distinct(lam, rtol: float = 1e-8) -> bool:
    """Rows pairwise distinct: two rows coincide if their sup-norm gap < rtol*(1+max|lam|)."""
    lam = np.asarray(lam)
    if lam.ndim == 1:
        lam = lam[:, None]
    pts = np.hstack([lam.real, lam.imag]) if np.iscomplexobj(lam) else lam
    tol = rtol * (1.0 + np.abs(lam).max(initial=0.0))
    pairs = cKDTree(pts).query_pairs(tol, p=np.inf)
    return len(pairs) == 0


def _dedupe_rows(lam, tol):
    """Representative rows after merging points closer than ``tol`` (sup norm)."""
    lam = np.asarray(lam)
    if lam.shape[0] == 0:
        return lam
    pts = np.hstack([lam.real, lam.imag]) if np.iscomplexobj(lam) else lam
    tree = cKDTree(pts)
    pairs = tree.query_pairs(tol, p=np.inf, output_type="ndarray")
    if pairs.size == 0:
        return lam
    from scipy.sparse.csgraph import connected_components

    n = lam.shape[0]
    A = sp.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(A, directed=False)
    _, first = np.unique(labels, return_index=True)
    return lam[np.sort(first)]


class ShiftFamily:
    """Ordered commuting shifts ``S_1..S_d`` on one host graph.

    The joint spectrum is computed on first request and cached; a
    precomputed (e.g. analytic) spectrum can be attached instead.
    """

    def __init__(self, shifts: Sequence, *, spectrum: JointSpectrum | None = None,
                 check: bool = True, rtol: float = COMMUTE_RTOL):
        self.shifts = tuple(S if isinstance(S, Shift) else Shift(S) for S in shifts)
        if not self.shifts:
            raise ValueError("empty shift family")
        sizes = {S.n for S in self.shifts}
        if len(sizes) != 1:
            raise DimensionMismatchError(f"shifts have differing sizes {sorted(sizes)}")
        self._spectrum = spectrum
        self._lock = threading.Lock()
        self.rtol = rtol
        if check:
            self.check_commuting()

    def __len__(self):
        return len(self.shifts)

    def __getitem__(self, k):
        return self.shifts[k]

    def __iter__(self):
        return iter(self.shifts)

    @property
    def d(self) -> int:
        return len(self.shifts)

    @property
    def n(self) -> int:
        return self.shifts[0].n

    @property
    def graph(self) -> Graph | None:
        gs = [S.graph for S in self.shifts if S.graph is not None]
        return gs[0] if gs else None

    @property
    def symmetric(self) -> bool:
        return all(S.is_symmetric() for S in self.shifts)

    @property
    def structured(self) -> bool:
        return any(S.is_structured for S in self.shifts)

    def commutator_norms(self) -> np.ndarray:
        return commutator_norms(self.shifts)

    def check_commuting(self) -> float:
        """Raise :class:`NonCommutingError` unless all pairs commute to ``rtol``."""
        if self.d == 1:
            return 0.0
        C = self.commutator_norms()
        fro = np.array([S.frobenius() for S in self.shifts])
        scale = np.outer(fro, fro)
        bad = C > self.rtol * np.maximum(scale, 1e-300)
        if bad.any():
            a, b = np.argwhere(bad)[0]
            raise NonCommutingError(
                f"||[S_{a + 1}, S_{b + 1}]||_F = {C[a, b]:.3e} exceeds "
                f"{self.rtol:g} * {scale[a, b]:.3e}")
        return float(C.max())

    def spectrum(self, **kwargs) -> JointSpectrum:
        if self._spectrum is None:
            with self._lock:
                if self._spectrum is None:
                    self._spectrum = compute_joint_spectrum(self, **kwargs)
        return self._spectrum

    def with_spectrum(self, spectrum: JointSpectrum) -> "ShiftFamily":
        if spectrum.n != self.n or spectrum.d != self.d:
            raise DimensionMismatchError("spectrum does not match family size")
        fam = ShiftFamily(self.shifts, spectrum=spectrum, check=False, rtol=self.rtol)
        return fam

    def dense(self, cap: int = DENSE_CAP):
        if self.n > cap:
            raise DenseCapError(f"n={self.n} exceeds dense cap {cap}")
        return [S.toarray() for S in self.shifts]

    def __repr__(self):
        return f"<ShiftFamily d={self.d} n={self.n}>"


def _bmatrix(N, q):
    """Sparse cyclic shift ``B^q`` with ``B(i, j) = 1`` iff ``i - j = -1 mod N``."""
    i = np.arange(N)
    return sp.csr_matrix((np.ones(N), (i, (i + q) % N)), shape=(N, N))


def circulant_generator_shift(N: int, q: int, graph: Graph | None = None) -> Shift:
    """Normalized Laplacian of C(N, {q}), built as ``I - (B^q + B^-q)/2``.

    ``graph`` defaults to C(N, {q}); pass the larger circulant graph to use
    the shift as one member of a family on C(N, Q).
    """
    if not 1 <= q < N / 2:
        raise InvalidGeneratorError(f"generator {q} outside 1 <= q < N/2")
    S = (sp.identity(N, format="csr") - 0.5 * (_bmatrix(N, q) + _bmatrix(N, -q))).tocsr()
    S.sort_indices()
    G = graph if graph is not None else build_circulant(N, [q])
    return validate_shift(S, G, name=f"Lsym(C({N},{{{q}}}))")


def circulant_spectrum(N: int, Q, *, per_generator: bool = False,
                       with_transform: bool = False) -> JointSpectrum:
    """Analytic spectrum of normalized Laplacians on circulant graphs.

    With ``per_generator=False`` returns the (d=1) spectrum of
    ``Lsym(C(N, Q))``: ``1 - mean_q cos(2 pi q f / N)``.  With
    ``per_generator=True`` returns the joint spectrum of the family
    ``{Lsym(C(N, {q}))}_q``.  Rows are ordered by frequency ``f``; the DFT
    matrix is the (complex) diagonalizing transform.
    """
    Q = list(Q)
    f = np.arange(N)
    cols = np.column_stack([1.0 - np.cos(2 * np.pi * q * f / N) for q in Q])
    lam = cols if per_generator else cols.mean(axis=1, keepdims=True)
    U = None
    if with_transform:
        if N > DENSE_CAP:
            raise DenseCapError(f"N={N} exceeds dense cap {DENSE_CAP}")
        U = np.exp(-2j * np.pi * np.outer(f, f) / N) / np.sqrt(N)
    return JointSpectrum(lam, U, kind="circulant-analytic")


def kron_lift(L, side: str, other_size: int, graph: Graph | None = None,
              factor_graph: Graph | None = None, name: str = "") -> Shift:
    """Lift ``L`` to ``L (x) I`` (``side='left'``) or ``I (x) L`` without materializing.

    If ``factor_graph`` is given the factor is checked to be a shift on it;
    the lift is then a shift on the corresponding Cartesian product.
    """
    L = _as_operator(L)
    if factor_graph is not None:
        validate_shift(L, factor_graph)
    op = KronOperator(L, side, other_size)
    if graph is not None and graph.n != op.shape[0]:
        raise DimensionMismatchError("product graph order does not match lifted operator")
    return Shift(op, graph, name or ("L(x)I" if side == "left" else "I(x)L"))


def kron_spectrum(left: JointSpectrum, right: JointSpectrum,
                  with_transform: bool = False) -> JointSpectrum:
    """Joint spectrum of ``{A_k (x) I} U {I (x) B_l}`` from factor spectra.

    Row ``a * right.n + b`` is ``(left.lam[a], right.lam[b])``.
    """
    p, q = left.n, right.n
    lam = np.hstack([np.repeat(left.lam, q, axis=0), np.tile(right.lam, (p, 1))])
    U = None
    if with_transform and left.transform is not None and right.transform is not None:
        if p * q > DENSE_CAP:
            raise DenseCapError(f"N={p * q} exceeds dense cap {DENSE_CAP}")
        U = np.kron(left.transform, right.transform)
    return JointSpectrum(lam, U, kind="kron")


def jacobi_joint_diagonalize(mats, *, tol: float = 1e-13, max_sweeps: int = 100):
    """Orthogonal joint diagonalization of real symmetric matrices by Jacobi sweeps.

    Returns ``V`` whose columns approximately diagonalize every input
    (Cardoso-Souloumiac Givens updates).
    """
    A = np.stack([np.array(M, dtype=float) for M in mats])
    n = A.shape[1]
    V = np.eye(n)
    for _ in range(max_sweeps):
        rotated = False
        for p in range(n - 1):
            for q in range(p + 1, n):
                g = np.stack([A[:, p, p] - A[:, q, q], A[:, p, q] + A[:, q, p]])
                G = g @ g.T
                ton = G[0, 0] - G[1, 1]
                toff = G[0, 1] + G[1, 0]
                theta = 0.5 * np.arctan2(toff, ton + np.hypot(ton, toff))
                c, s = np.cos(theta), np.sin(theta)
                if abs(s) > tol:
                    rotated = True
                    Ap, Aq = A[:, :, p].copy(), A[:, :, q].copy()
                    A[:, :, p], A[:, :, q] = c * Ap + s * Aq, c * Aq - s * Ap
                    Ap, Aq = A[:, p, :].copy(), A[:, q, :].copy()
                    A[:, p, :], A[:, q, :] = c * Ap + s * Aq, c * Aq - s * Ap
                    Vp, Vq = V[:, p].copy(), V[:, q].copy()
                    V[:, p], V[:, q] = c * Vp + s * Vq, c * Vq - s * Vp
        if not rotated:
            break
    return V


def _offdiag_ok(mats, V, fro):
    worst = 0.0
    for M, f in zip(mats, fro):
        D = V.T @ M @ V
        off = np.linalg.norm(D - np.diag(np.diag(D)))
        worst = max(worst, off / max(f, 1e-300))
    return worst


def compute_joint_spectrum(family, *, rng=None, max_tries: int = 10,
                           cap: int = DENSE_CAP, rtol: float = RECON_RTOL) -> JointSpectrum:
    """Joint spectrum of a commuting family via a random linear combination.

    Symmetric case: ``T = sum_k c_k S_k`` with Gaussian ``c``; the eigenbasis
    of ``T`` diagonalizes every ``S_k`` when the combination separates the
    joint eigenvalues.  Retried with fresh ``c`` on near-degenerate ``T`` or
    a failed residual check, then falls back to Jacobi sweeps.  General
    case: complex Schur form of ``T``, checked for joint triangularity.
    """
    if not isinstance(family, ShiftFamily):
        family = ShiftFamily(family)
    family.check_commuting()
    if family.n > cap:
        raise DenseCapError(f"n={family.n} exceeds dense cap {cap}; use an analytic spectrum")
    rng = np.random.default_rng(rng if rng is not None else 0)
    mats = family.dense(cap)
    fro = [np.linalg.norm(M) for M in mats]
    if family.symmetric:
        mats = [(M + M.T) / 2 for M in mats]
        V = None
        for attempt in range(max_tries):
            c = rng.standard_normal(len(mats))
            T = sum(ck * M for ck, M in zip(c, mats))
            w, W = np.linalg.eigh(T)
            scale = max(np.abs(w).max(initial=0.0), 1.0)
            gaps = np.diff(w)
            # exact degeneracies are harmless; only near-collisions mix eigenvectors
            near = (gaps > 1e-12 * scale) & (gaps < GAP_TOL * scale)
            if near.any():
                log.debug("attempt %d: near-degenerate combination, retrying", attempt)
                continue
            if _offdiag_ok(mats, W, fro) <= rtol:
                V = W
                break
        if V is None:
            log.info("random-combination diagonalization failed; using Jacobi sweeps")
            V = jacobi_joint_diagonalize(mats)
        resid = _offdiag_ok(mats, V, fro)
        if resid > rtol:
            raise TriangularizationError(f"joint diagonalization residual {resid:.3e}")
        U = V.T
        lam = np.column_stack([np.einsum("ij,jk,ik->i", U, M, U) for M in mats])
        return JointSpectrum(lam, U, kind="symmetric")
    # general commuting family: simultaneous Schur triangularization
    for attempt in range(max_tries):
        c = rng.standard_normal(len(mats))
        T = sum(ck * M for ck, M in zip(c, mats))
        Tt, Z = sla.schur(T.astype(complex), output="complex")
        U = Z.conj().T
        hats = [U @ M @ Z for M in mats]
        worst = max(np.linalg.norm(np.tril(Hh, -1)) / max(f, 1e-300) for Hh, f in zip(hats, fro))
        if worst <= rtol:
            lam = np.column_stack([np.diag(Hh) for Hh in hats])
            return JointSpectrum(lam, U, kind="schur")
    raise TriangularizationError(f"Schur triangularization residual {worst:.3e} exceeds {rtol:g}")


def _family_and_spectrum(family):
    if not isinstance(family, ShiftFamily):
        family = ShiftFamily(family)
    spec = family.spectrum()
    if spec.transform is None:
        raise ValueError("joint spectrum has no transform; compute it densely")
    return family, spec


def recover_spectral_multiplier(H, family, *, rtol: float = 1e-8) -> np.ndarray:
    """Per-point values ``h_i`` with ``H = U^H diag(h) U``.

    ``H`` must commute with every shift and the joint spectrum must be
    distinct; the reconstruction is certified to ``rtol`` in Frobenius norm.
    """
    family, spec = _family_and_spectrum(family)
    H = to_dense(H)
    hn = max(np.linalg.norm(H), 1e-300)
    for k, S in enumerate(family.dense()):
        c = np.linalg.norm(H @ S - S @ H)
        if c > rtol * hn * max(np.linalg.norm(S), 1.0):
            raise NonCommutingError(f"||[H, S_{k + 1}]||_F = {c:.3e}")
    if not spec.distinct:
        raise NonDistinctSpectrumError("joint spectrum has repeated points")
    U = spec.transform
    Hh = U @ H @ U.conj().T
    vals = np.diag(Hh).copy()
    recon = U.conj().T @ np.diag(vals) @ U
    err = np.linalg.norm(H - recon)
    if err > rtol * hn:
        raise TriangularizationError(f"multiplier reconstruction error {err:.3e}")
    if np.iscomplexobj(vals) and np.abs(vals.imag).max() <= rtol * hn:
        vals = vals.real
    return vals


class DistanceBounds(NamedTuple):
    exact: float
    lower: float
    upper: float


def dist_to_polynomial_set(H, family) -> DistanceBounds:
    """Frobenius distance from ``H`` to polynomials of the shifts, with commutator bounds.

    ``exact`` is the off-diagonal mass of ``U H U^H``; ``lower`` is
    ``max_k ||[H,S_k]|| / (2 ||S_k||)`` and ``upper`` is
    ``sqrt(sum_k ||[H,S_k]||^2) / min_{i != j} |lam_i - lam_j|``.
    """
    family, spec = _family_and_spectrum(family)
    if not family.symmetric:
        raise ValueError("distance bounds require a symmetric (unitarily diagonalizable) family")
    if not spec.distinct:
        raise NonDistinctSpectrumError("joint spectrum has repeated points")
    H = to_dense(H)
    U = spec.transform
    Hh = U @ H @ U.conj().T
    exact = float(np.sqrt(max(np.linalg.norm(Hh) ** 2 - np.sum(np.abs(np.diag(Hh)) ** 2), 0.0)))
    comms, lows = [], []
    for S in family.dense():
        c = np.linalg.norm(H @ S - S @ H)
        comms.append(c)
        lows.append(c / (2 * np.linalg.norm(S)))
    lam = spec.lam
    from scipy.spatial.distance import pdist

    pts = np.hstack([lam.real, lam.imag]) if np.iscomplexobj(lam) else lam
    gap = pdist(pts).min() if spec.n > 1 else np.inf
    upper = float(np.sqrt(np.sum(np.square(comms))) / gap)
    return DistanceBounds(exact, float(max(lows)), upper)


def lsym_shift(G: Graph) -> Shift:
    """Normalized Laplacian of ``G`` as a validated shift."""
    return validate_shift(sym_normalized_laplacian(G), G, name="Lsym")
