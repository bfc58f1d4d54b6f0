"""Inverse filtering: solve ``H x = b`` for a polynomial filter ``H``.

Every solver is an instance of the iteration

    z = G e,   e <- e - H z,   x <- x + z,      e = b, x = 0 initially,

with ``G`` an approximation of ``H^{-1}`` that is itself cheap to apply
(a scaled identity, a polynomial of the shifts, or a Chebyshev expansion).
Convergence is exponential with rate ``rho(I - HG)``.
"""
from __future__ import annotations

import csv
import logging
import time
import warnings
from dataclasses import dataclass, field
from itertools import product
from typing import Callable, NamedTuple

import numpy as np
import scipy.fft
import scipy.sparse.linalg as spla
from scipy.optimize import linprog

from .errors import (
    DimensionMismatchError,
    InsufficientSamplesError,
    NotPositiveDefiniteError,
    PreconditionError,
    RepeatedRootError,
    SingularFilterError,
    StabilityError,
)
from .polyfilter import (
    ChebCoeffs,
    PolyCoeffs,
    apply,
    apply_cheb,
    apply_single,
    cheb_eval,
    cheb_to_monomial,
    eval_scalar,
    filter_to_dict,
    simplex_mask,
)
from .shifts import JointSpectrum, Shift, ShiftFamily

log = logging.getLogger(__name__)

DIVERGENCE_FACTOR = 10.0
DEDUPE_TOL = 1e-10

__all__ = [
    "Approximant",
    "SolveTrace",
    "RateFit",
    "iterative_approx",
    "spectral_contraction",
    "interpolation_inverse",
    "optimal_poly",
    "chebyshev_coeffs",
    "cheb_sup_error",
    "iopa_solve",
    "icpa_solve",
    "gd0_step",
    "gd0_solve",
    "partial_fractions",
    "arma_solve",
    "fit_rate",
    "spectral_norm",
]


# ---------------------------------------------------------------- approximants


@dataclass
class Approximant:
    """An inverse approximant ``G = g(S_1, ..., S_d)``.

    ``kind`` is ``'scaled-identity'`` (``value`` is gamma), ``'polynomial'``
    (:class:`PolyCoeffs`), ``'chebyshev'`` (:class:`ChebCoeffs`) or
    ``'multiplier'`` (per-spectrum-point values).
    """

    kind: str
    value: object
    tag: str = "custom"
    meta: dict = field(default_factory=dict)

    def values(self, lam) -> np.ndarray:
        """``g`` evaluated at joint-spectrum points ``lam`` (N x d)."""
        lam = _lam(lam)
        if self.kind == "scaled-identity":
            return np.full(lam.shape[0], float(self.value))
        if self.kind == "polynomial":
            return _eval_rows(self.value, lam)
        if self.kind == "chebyshev":
            return cheb_eval(self.value, lam[:, 0] if self.value.d == 1 else lam)
        if self.kind == "multiplier":
            v = np.asarray(self.value)
            if v.shape[0] != lam.shape[0]:
                raise DimensionMismatchError("multiplier length differs from spectrum size")
            return v
        raise ValueError(f"unknown approximant kind {self.kind!r}")

    def operator(self, F) -> Callable[[np.ndarray], np.ndarray]:
        """``x -> G x`` on the shift family ``F``."""
        if self.kind == "scaled-identity":
            g = float(self.value)
            return lambda x: g * x
        if self.kind == "polynomial":
            return lambda x: apply(self.value, F, x)
        if self.kind == "chebyshev":
            return lambda x: apply_cheb(self.value, F, x)
        if self.kind == "multiplier":
            spec = F.spectrum()
            U = spec.transform
            v = np.asarray(self.value)
            if U is None:
                raise ValueError("multiplier approximant needs a spectrum transform")

            def G(x):
                y = U.conj().T @ (v * (U @ x))
                return y.real if np.isrealobj(x) else y

            return G
        raise ValueError(f"unknown approximant kind {self.kind!r}")

    def to_dict(self) -> dict:
        if self.kind == "scaled-identity":
            return {"degrees": [0], "coeffs": [float(self.value)]}
        if self.kind in ("polynomial", "chebyshev"):
            return filter_to_dict(self.value)
        raise TypeError("multiplier approximants have no filter-spec form")


def _lam(lam) -> np.ndarray:
    if isinstance(lam, JointSpectrum):
        lam = lam.lam
    lam = np.asarray(lam)
    return lam[:, None] if lam.ndim == 1 else lam


def _eval_rows(h: PolyCoeffs, lam) -> np.ndarray:
    lam = _lam(lam)
    if h.d != lam.shape[1]:
        raise DimensionMismatchError(f"{h.d}-variate filter on {lam.shape[1]}-dimensional spectrum")
    return eval_scalar(h, lam[:, 0]) if h.d == 1 else eval_scalar(h, lam)


def _as_poly(h) -> PolyCoeffs:
    return h if isinstance(h, PolyCoeffs) else PolyCoeffs(h)


# ---------------------------------------------------------------- traces


@dataclass
class SolveTrace:
    """Per-iteration record of an inverse-filtering run (index ``m = 0..M``)."""

    method: str
    residuals: np.ndarray
    rel_errors: np.ndarray | None = None
    wallclock_us: np.ndarray | None = None
    iterates: list | None = None
    x: np.ndarray | None = None
    converged: bool = False
    diverged: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1

    @property
    def rel_residuals(self) -> np.ndarray:
        return self.residuals / max(self.residuals[0], 1e-300)

    def iterations_to(self, tol: float = 1e-3) -> int | None:
        """First ``m`` with relative error (else relative residual) <= tol."""
        E = self.rel_errors if self.rel_errors is not None else self.rel_residuals
        hit = np.flatnonzero(E <= tol)
        return int(hit[0]) if hit.size else None

    @property
    def rate(self) -> float:
        return fit_rate(self).rate

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["m", "residual", "rel_error", "wallclock_us"])
            for m, r in enumerate(self.residuals):
                e = "" if self.rel_errors is None else repr(float(self.rel_errors[m]))
                t = "" if self.wallclock_us is None else f"{self.wallclock_us[m]:.1f}"
                w.writerow([m, repr(float(r)), e, t])


def _is_diverging(res, bnorm, tol):
    """Blow-up past ``10 ||b||`` or a sustained rise well above fp noise."""
    r = np.asarray(res)
    if r[-1] > DIVERGENCE_FACTOR * bnorm or not np.isfinite(r[-1]):
        return True
    if r.size >= 4:
        tail = r[-4:]
        floor = max(tol, 1e-8) * bnorm
        rising = np.all(np.diff(tail) > 0)
        return bool(rising and tail[-1] > floor and tail[-1] > r.min() * (1 + 1e-9))
    return False


def iterative_approx(H_apply, G_apply, b, M: int, tol: float = 0.0, *,
                     x_true=None, keep_iterates: bool = False,
                     method: str = "custom") -> SolveTrace:
    """Run ``z = G e; e -= H z; x += z`` from ``e = b, x = 0`` for ``M`` steps.

    Stops early once ``||e|| / ||b|| <= tol``.  ``diverged`` is set when the
    residual exceeds ``10 ||b||`` or keeps rising above noise level.
    """
    b = np.asarray(b)
    e = b.copy()
    x = np.zeros_like(b)
    bnorm = float(np.linalg.norm(b))
    res = [bnorm]
    xnorm = float(np.linalg.norm(x_true)) if x_true is not None else None
    errs = [1.0 if x_true is not None and xnorm > 0 else 0.0] if x_true is not None else None
    clock = [0.0]
    iters = [x.copy()] if keep_iterates else None
    t0 = time.perf_counter()
    diverged = False
    for m in range(1, M + 1):
        z = G_apply(e)
        e = e - H_apply(z)
        x = x + z
        res.append(float(np.linalg.norm(e)))
        clock.append((time.perf_counter() - t0) * 1e6)
        if x_true is not None:
            errs.append(float(np.linalg.norm(x - x_true)) / max(xnorm, 1e-300))
        if keep_iterates:
            iters.append(x.copy())
        if tol > 0 and res[-1] <= tol * bnorm:
            break
        if _is_diverging(res, bnorm, tol):
            diverged = True
            if res[-1] > DIVERGENCE_FACTOR * bnorm or not np.isfinite(res[-1]):
                break
    converged = bnorm == 0 or res[-1] <= max(tol, 0.0) * bnorm if tol > 0 else False
    return SolveTrace(method, np.array(res), None if errs is None else np.array(errs),
                      np.array(clock), iters, x, converged=bool(converged),
                      diverged=diverged)


# ---------------------------------------------------------------- diagnostics


def spectral_contraction(h, g: Approximant, spectrum) -> float:
    """``sup_i |1 - h(lam_i) g(lam_i)|`` over the joint spectrum."""
    lam = _lam(spectrum)
    hv = _eval_rows(_as_poly(h), lam)
    return float(np.max(np.abs(1.0 - hv * g.values(lam))))


def interpolation_inverse(h, spectrum, rtol: float = 1e-12) -> Approximant:
    """Spectral multiplier ``1/h(lam_i)``; exact inverse on a distinct spectrum."""
    lam = _lam(spectrum)
    hv = _eval_rows(_as_poly(h), lam)
    small = np.abs(hv) <= rtol * max(1.0, np.abs(hv).max())
    if small.any():
        pts = lam[small]
        raise SingularFilterError(
            f"filter vanishes at {small.sum()} spectrum point(s), e.g. {pts[0].tolist()}", pts)
    return Approximant("multiplier", 1.0 / hv, tag="interp")


def _distinct_real_points(spectrum, tol=DEDUPE_TOL):
    lam = _lam(spectrum)
    if np.iscomplexobj(lam):
        if np.abs(lam.imag).max() > tol:
            raise PreconditionError("optimal polynomial fit needs a real spectrum")
        lam = lam.real
    from .shifts import _dedupe_rows

    return _dedupe_rows(lam, tol)


def _total_degree_exponents(L: int, d: int) -> np.ndarray:
    return np.array([k for k in product(range(L + 1), repeat=d) if sum(k) <= L], dtype=int)


def _scaled_basis(lam, exps):
    """Chebyshev basis on the bounding box, for a well-conditioned LP."""
    lo, hi = lam.min(0), lam.max(0)
    hi = np.where(hi > lo, hi, lo + 1.0)
    u = (2 * lam - lo - hi) / (hi - lo)
    K = int(exps.max()) if exps.size else 0
    T = np.stack([np.cos(k * np.arccos(np.clip(u, -1, 1))) for k in range(K + 1)], axis=-1)
    cols = np.ones((lam.shape[0], len(exps)))
    for j, k in enumerate(exps):
        for i, ki in enumerate(k):
            cols[:, j] *= T[:, i, ki]
    return cols, np.column_stack([lo, hi])


def _basis_to_cheb(coef, exps, box, L, d):
    C = np.zeros((L + 1,) * d)
    for c, k in zip(coef, exps):
        C[tuple(k)] = c
    return ChebCoeffs(L, box, C)


def _minimax_lp(A):
    """``min s`` s.t. ``|1 - A c| <= s``; returns (c, s)."""
    n, p = A.shape
    one = np.ones((n, 1))
    A_ub = np.block([[A, -one], [-A, -one]])
    b_ub = np.concatenate([np.ones(n), -np.ones(n)])
    cost = np.zeros(p + 1)
    cost[-1] = 1.0
    r = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * (p + 1), method="highs")
    if r.status != 0:
        raise RuntimeError(f"linear program failed: {r.message}")
    return r.x[:p], r.x[-1]


def _polish(A, c, s):
    """Re-solve the equioscillation system on the active set."""
    r = 1.0 - A @ c
    active = np.flatnonzero(np.abs(r) >= s - 1e-9 * max(1.0, s))
    if active.size < A.shape[1] + 1:
        return c, s
    sig = np.sign(r[active])
    M = np.column_stack([A[active], sig])
    sol, *_ = np.linalg.lstsq(M, np.ones(active.size), rcond=None)
    c2 = sol[:-1]
    s2 = np.max(np.abs(1.0 - A @ c2))
    return (c2, s2) if s2 <= s + 1e-12 else (c, s)


def optimal_poly(h, spectrum, L: int, *, basis: str = "monomial"):
    """Minimax fit ``g`` of total degree ``L`` with ``g h ~ 1`` on the spectrum.

    Solves ``min s`` subject to ``-(s - 1) <= h(lam_i) g(lam_i) <= s + 1`` as
    a linear program over the coefficients of ``g``.  Returns
    ``(g, a_L)`` where ``a_L = max_i |1 - g(lam_i) h(lam_i)|`` is recomputed
    from the returned coefficients.

    The LP is posed in a Chebyshev basis on the spectrum's bounding box.
    ``basis='monomial'`` converts the result to :class:`PolyCoeffs`, which
    loses accuracy for high degrees (roughly ``L > 15``);
    ``basis='chebyshev'`` returns the :class:`ChebCoeffs` unconverted.
    """
    if basis not in ("monomial", "chebyshev"):
        raise ValueError("basis must be 'monomial' or 'chebyshev'")
    h = _as_poly(h)
    lam = _distinct_real_points(spectrum)
    d = lam.shape[1]
    if h.d != d:
        raise DimensionMismatchError(f"{h.d}-variate filter on {d}-dimensional spectrum")
    hv = _eval_rows(h, lam)
    if np.any(hv == 0):
        raise SingularFilterError("filter vanishes on the spectrum", lam[hv == 0])
    if L == 0:
        # closed form: midpoint of the range of h
        lo, hi = hv.min(), hv.max()
        c = np.array([0.0 if lo * hi <= 0 else 2.0 / (lo + hi)])
        exps = np.zeros((1, d), dtype=int)
        box = np.column_stack([lam.min(0), np.maximum(lam.max(0), lam.min(0) + 1.0)])
    else:
        exps = _total_degree_exponents(L, d)
        B, box = _scaled_basis(lam, exps)
        A = hv[:, None] * B
        c, s = _minimax_lp(A)
        c, s = _polish(A, c, s)
    g = _basis_to_cheb(c, exps, box, L, d)
    if basis == "monomial":
        g = PolyCoeffs(np.reshape(c, (1,) * d)) if L == 0 else cheb_to_monomial(g)
        gv = _eval_rows(g, lam)
    else:
        gv = cheb_eval(g, lam[:, 0] if d == 1 else lam)
    aL = float(np.max(np.abs(1.0 - hv * gv)))
    return g, aL


def _cos_transform(F, K):
    """``sum_j F[j...] prod_i cos(k_i theta_{j_i})`` for all ``k <= K`` per axis."""
    # type-II DCT: y_k = 2 sum_j x_j cos(pi k (2j+1) / (2q))
    Y = scipy.fft.dctn(F, type=2) / 2 ** F.ndim
    return Y[(slice(0, K + 1),) * F.ndim]


def _cheb_coeffs_q(h, d, K, box, q):
    theta = (np.arange(q) + 0.5) * np.pi / q
    axes = [0.5 * (mu + nu) + 0.5 * (nu - mu) * np.cos(theta) for mu, nu in box]
    if d == 1:
        hv = eval_scalar(h, axes[0])
    else:
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        hv = eval_scalar(h, grid).reshape((q,) * d)
    if np.any(hv == 0) or not np.all(np.isfinite(1.0 / hv)):
        raise SingularFilterError("filter vanishes on a quadrature node", None)
    C = _cos_transform(1.0 / hv, K)
    zeros = sum((np.indices(C.shape)[i] == 0) for i in range(d))
    return C * 2.0 ** (d - zeros) / q ** d


def chebyshev_coeffs(h, d: int | None = None, K: int = 0, box=None, q: int | None = None,
                     *, check: bool = True, max_q: int | None = None) -> ChebCoeffs:
    """Shifted Chebyshev coefficients of ``1/h`` on ``box`` by midpoint quadrature in angle.

    ``q`` nodes per axis (default ``max(64, 4(K+1))``).  With ``check`` the
    node count is doubled until no kept coefficient moves by more than
    ``1e-10``.
    """
    h = _as_poly(h)
    d = h.d if d is None else d
    if h.d != d:
        raise DimensionMismatchError(f"{h.d}-variate filter with d={d}")
    box = np.array([[0.0, 2.0]] * d) if box is None else np.atleast_2d(np.asarray(box, float))
    if box.shape != (d, 2):
        raise DimensionMismatchError(f"box of shape {box.shape} for d={d}")
    q = max(64, 4 * (K + 1)) if q is None else int(q)
    if max_q is None:
        max_q = 8192 if d == 1 else (1024 if d == 2 else 128)
    C = _cheb_coeffs_q(h, d, K, box, q)
    if check:
        while 2 * q <= max_q:
            C2 = _cheb_coeffs_q(h, d, K, box, 2 * q)
            delta = np.max(np.abs(C2 - C) * simplex_mask(K, d))
            C, q = C2, 2 * q
            if delta <= 1e-10:
                break
        else:
            log.warning("Chebyshev quadrature not converged to 1e-10 at q=%d", q)
    out = ChebCoeffs(K, box, C)
    return out


def _sup_grid(box, n):
    axes = [np.linspace(mu, nu, n) for mu, nu in box]
    if len(axes) == 1:
        return axes[0]
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(axes))


def cheb_sup_error(h, c: ChebCoeffs, n: int | None = None) -> float:
    """``max |1 - h(t) g_K(t)|`` over a uniform grid on the Chebyshev box.

    A grid estimate of the supremum: 2001 points for ``d = 1``, ``201`` per
    axis for ``d = 2``, ``41`` per axis beyond.
    """
    h = _as_poly(h)
    if n is None:
        n = {1: 2001, 2: 201}.get(c.d, 41)
    t = _sup_grid(c.box, n)
    return float(np.max(np.abs(1.0 - eval_scalar(h, t) * cheb_eval(c, t))))


# ---------------------------------------------------------------- solvers


def _family(F) -> ShiftFamily:
    if isinstance(F, ShiftFamily):
        return F
    if isinstance(F, Shift) or hasattr(F, "shape"):
        return ShiftFamily([F])
    return ShiftFamily(F)


def iopa_solve(h, F, b, L: int, M: int, tol: float = 0.0, *, x_true=None,
               spectrum=None, g=None, keep_iterates: bool = False) -> SolveTrace:
    """Iterative optimal-polynomial approximation of ``h(S)^{-1} b``.

    ``g`` may pass a precomputed ``(PolyCoeffs, a_L)`` pair from
    :func:`optimal_poly` to skip the LP.
    """
    h = _as_poly(h)
    F = _family(F)
    if g is None:
        spectrum = F.spectrum() if spectrum is None else spectrum
        g, aL = optimal_poly(h, spectrum, L)
    else:
        g, aL = g
    if aL >= 1:
        warnings.warn(f"a_{L} = {aL:.4f} >= 1; iteration may not converge", RuntimeWarning)
    tr = iterative_approx(lambda z: apply(h, F, z), lambda e: apply(g, F, e), b, M, tol,
                          x_true=x_true, keep_iterates=keep_iterates, method=f"IOPA{L}")
    tr.meta.update(a_L=aL, approximant=Approximant("polynomial", g, f"iopa-{L}"))
    if aL >= 1:
        tr.diverged = True
    return tr


def icpa_solve(h, F, b, K: int, M: int, tol: float = 0.0, *, x_true=None, box=None,
               q: int | None = None, c=None, keep_iterates: bool = False) -> SolveTrace:
    """Iterative Chebyshev approximation of ``h(S)^{-1} b`` (default box ``[0, 2]^d``).

    ``c`` may pass a precomputed ``(ChebCoeffs, b_K)`` pair.
    """
    h = _as_poly(h)
    F = _family(F)
    if c is None:
        c = chebyshev_coeffs(h, h.d, K, box, q)
        bK = cheb_sup_error(h, c)
    else:
        c, bK = c
    if bK >= 1:
        warnings.warn(f"b_{K} = {bK:.4f} >= 1; iteration may not converge", RuntimeWarning)
    tr = iterative_approx(lambda z: apply(h, F, z), lambda e: apply_cheb(c, F, e), b, M, tol,
                          x_true=x_true, keep_iterates=keep_iterates, method=f"ICPA{K}")
    tr.meta.update(b_K=bK, approximant=Approximant("chebyshev", c, f"icpa-{K}"))
    # the grid sup is a bound; flag divergence only when the spectrum confirms it
    if F._spectrum is not None:
        rho = spectral_contraction(h, Approximant("chebyshev", c), F._spectrum)
        tr.meta["contraction"] = rho
        if rho >= 1:
            tr.diverged = True
    return tr


def gd0_step(h, spectrum) -> float:
    """Optimal step ``2 / (alpha_1 + alpha_2)`` from the extreme values of ``h`` on the spectrum."""
    hv = _eval_rows(_as_poly(h), spectrum)
    if np.iscomplexobj(hv):
        raise PreconditionError("step-size rule needs a real spectrum")
    a1, a2 = hv.min(), hv.max()
    if a1 <= 0:
        raise NotPositiveDefiniteError(f"min h on spectrum is {a1:.3e}")
    return 2.0 / (a1 + a2)


def gd0_solve(H_apply, b, gamma: float, M: int, tol: float = 0.0, *, x_true=None,
              keep_iterates: bool = False) -> SolveTrace:
    """Gradient descent ``x <- x - gamma (H x - b)`` from ``x = 0``."""
    if gamma <= 0:
        raise PreconditionError("step size must be positive")
    b = np.asarray(b)
    x = np.zeros_like(b)
    e = b.copy()
    bnorm = float(np.linalg.norm(b))
    res, clock = [bnorm], [0.0]
    xnorm = float(np.linalg.norm(x_true)) if x_true is not None else None
    errs = [1.0] if x_true is not None else None
    iters = [x.copy()] if keep_iterates else None
    t0 = time.perf_counter()
    diverged = False
    for m in range(1, M + 1):
        x = x + gamma * e
        e = b - H_apply(x)
        res.append(float(np.linalg.norm(e)))
        clock.append((time.perf_counter() - t0) * 1e6)
        if x_true is not None:
            errs.append(float(np.linalg.norm(x - x_true)) / max(xnorm, 1e-300))
        if keep_iterates:
            iters.append(x.copy())
        if tol > 0 and res[-1] <= tol * bnorm:
            break
        if _is_diverging(res, bnorm, tol):
            diverged = True
            if res[-1] > DIVERGENCE_FACTOR * bnorm or not np.isfinite(res[-1]):
                break
    converged = tol > 0 and res[-1] <= tol * bnorm
    return SolveTrace("GD0", np.array(res), None if errs is None else np.array(errs),
                      np.array(clock), iters, x, converged=bool(converged),
                      diverged=diverged, meta={"gamma": gamma})


def partial_fractions(h, S_norm: float | None = None, *, gap_tol: float = 1e-8):
    """Split ``1/h(t) = sum_k a_k / (1 - b_k t)`` for ``h`` with simple nonzero roots.

    Terms are ordered by decreasing real part of the root ``1/b_k``.  With
    ``S_norm`` the stability condition ``|b_k| S_norm < 1`` is enforced.
    """
    c = np.trim_zeros(np.asarray(_as_poly(h).coeffs, dtype=float).ravel(), "b")
    if c.size == 0:
        raise SingularFilterError("zero polynomial", None)
    if c.size == 1:
        return [(1.0 / c[0], 0.0)]
    roots = np.roots(c[::-1])
    scale = max(1.0, np.abs(roots).max())
    if np.any(np.abs(roots) <= 1e-14 * scale):
        raise SingularFilterError("h(0) = 0; no expansion in 1/(1 - b t)", np.array([0.0]))
    if roots.size > 1:
        gaps = np.abs(roots[:, None] - roots[None, :])
        np.fill_diagonal(gaps, np.inf)
        if gaps.min() < gap_tol * scale:
            raise RepeatedRootError(f"repeated root near {roots[np.argmin(gaps.min(1))]}")
    roots = roots[np.lexsort((roots.imag, -roots.real))]
    deriv = np.polynomial.polynomial.polyder(c)
    dh = np.polynomial.polynomial.polyval(roots, deriv)
    a = -1.0 / (roots * dh)
    b = 1.0 / roots
    if np.all(np.abs(roots.imag) == 0):
        a, b = a.real, b.real
    t = np.linspace(-0.5, 0.5, 17) * np.abs(roots).min()
    approx = sum(ak / (1 - bk * t) for ak, bk in zip(a, b))
    exact = 1.0 / np.polynomial.polynomial.polyval(t, c)
    err = np.max(np.abs(approx - exact)) / np.max(np.abs(exact))
    if err > 1e-10:
        raise RepeatedRootError(f"partial-fraction reconstruction error {err:.2e}")
    terms = list(zip(a.tolist(), b.tolist()))
    if S_norm is not None:
        worst = max(abs(bk) for _, bk in terms) * S_norm
        if worst >= 1:
            raise StabilityError(f"max |b_k| * ||S||_2 = {worst:.4f} >= 1")
    return terms


def spectral_norm(S) -> float:
    """``||S||_2``; dense below 600 vertices, Lanczos/SVD iterations above."""
    op = S.matrix if isinstance(S, Shift) else S
    n = op.shape[0]
    sym = isinstance(S, Shift) and S.is_symmetric()
    if n <= 600:
        A = op.toarray() if hasattr(op, "toarray") else np.asarray(op)
        return float(np.linalg.norm(A, 2))
    lin = spla.LinearOperator(op.shape, matvec=lambda v: op @ v, rmatvec=lambda v: op.T @ v,
                              dtype=float)
    if sym:
        w = spla.eigsh(lin, k=1, which="LM", return_eigenvectors=False, tol=1e-10)
        return float(np.abs(w).max())
    s = spla.svds(lin, k=1, return_singular_vectors=False, tol=1e-10)
    return float(s.max())


def arma_solve(h, S, b, M: int, tol: float = 0.0, *, x_true=None, S_norm=None,
               keep_iterates: bool = False) -> SolveTrace:
    """Parallel first-order recursions ``x_k <- b_k S x_k + b`` combined as ``sum a_k x_k``."""
    h = _as_poly(h)
    if h.d != 1:
        raise PreconditionError("the partial-fraction solver needs a univariate filter")
    op = S.matrix if isinstance(S, Shift) else S
    if S_norm is None:
        S_norm = spectral_norm(S)
    terms = partial_fractions(h, S_norm)
    b = np.asarray(b)
    dtype = complex if any(isinstance(t, complex) for ab in terms for t in ab) else float
    xs = [np.zeros(b.shape, dtype=dtype) for _ in terms]
    x = np.zeros_like(b)
    bnorm = float(np.linalg.norm(b))
    res, clock = [bnorm], [0.0]
    xnorm = float(np.linalg.norm(x_true)) if x_true is not None else None
    errs = [1.0] if x_true is not None else None
    iters = [x.copy()] if keep_iterates else None
    t0 = time.perf_counter()
    diverged = False
    for m in range(1, M + 1):
        xs = [bk * (op @ xk) + b for (_, bk), xk in zip(terms, xs)]
        acc = sum(ak * xk for (ak, _), xk in zip(terms, xs))
        x = np.real(acc) if dtype is complex else acc
        e = b - apply_single(h.coeffs, op, x)
        res.append(float(np.linalg.norm(e)))
        clock.append((time.perf_counter() - t0) * 1e6)
        if x_true is not None:
            errs.append(float(np.linalg.norm(x - x_true)) / max(xnorm, 1e-300))
        if keep_iterates:
            iters.append(x.copy())
        if tol > 0 and res[-1] <= tol * bnorm:
            break
        if _is_diverging(res, bnorm, tol):
            diverged = True
            break
    converged = tol > 0 and res[-1] <= tol * bnorm
    return SolveTrace("ARMA", np.array(res), None if errs is None else np.array(errs),
                      np.array(clock), iters, x, converged=bool(converged), diverged=diverged,
                      meta={"terms": terms, "S_norm": S_norm,
                            "rate_bound": max(abs(bk) for _, bk in terms) * S_norm})


# ---------------------------------------------------------------- rates


class RateFit(NamedTuple):
    rate: float
    intercept: float
    n_samples: int
    convergent: bool


def fit_rate(trace, floor: float = 1e-12, min_samples: int = 4) -> RateFit:
    """Least-squares fit ``log E(m) ~ log C + m log r`` over ``m >= 1``.

    Uses the longest prefix with ``E(m) > floor``.  ``E`` is the relative
    error when known, else the relative residual.  Accepts a
    :class:`SolveTrace` or an array ``E(0), E(1), ...``.
    """
    if isinstance(trace, SolveTrace):
        E = trace.rel_errors if trace.rel_errors is not None else trace.rel_residuals
    else:
        E = np.asarray(trace, dtype=float)
    E = E[1:]
    above = E > floor
    n = int(np.argmin(above)) if not above.all() else E.size
    if n < min_samples:
        raise InsufficientSamplesError(f"only {n} error samples above {floor:g}")
    m = np.arange(1, n + 1)
    slope, icpt = np.polyfit(m, np.log(E[:n]), 1)
    rate = float(np.exp(slope))
    return RateFit(rate, float(np.exp(icpt)), n, bool(rate < 1 - 1e-3))
