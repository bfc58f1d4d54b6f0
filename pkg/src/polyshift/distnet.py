"""Round-synchronous simulation of vertex agents running the filtering algorithms.

Each agent stores only its own rows of the shifts over ``N_i + {i}`` and
its local signal entries.  One *round* is a barrier: every agent sends one
value per column to each graph neighbour, then updates from its own value
and the messages it received.  Reads always come from the previous round's
snapshot, so execution order inside a round cannot change the result.
"""
from __future__ import annotations

import csv
import json
import logging
import time
from dataclasses import dataclass, field
from itertools import product

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatchError, DisconnectedGraphError, StructuredShiftError
from .graphs import Graph
from .inverse import SolveTrace, _is_diverging, DIVERGENCE_FACTOR
from .polyfilter import ChebCoeffs, PolyCoeffs, cheb_to_monomial
from .shifts import KronOperator, Shift, ShiftFamily

log = logging.getLogger(__name__)

MATERIALIZE_CAP = 4096

__all__ = ["VertexAgent", "CommStats", "Network", "sim_filter", "sim_inverse"]


@dataclass
class VertexAgent:
    """Local view of vertex ``id``.

    ``slots`` lists ``id`` followed by its neighbours in increasing order;
    ``rows[k, s]`` is ``S_k(id, slots[s])``.  ``store`` holds local scalars
    (signal entries and working columns).
    """

    id: int
    slots: np.ndarray
    rows: np.ndarray
    store: dict = field(default_factory=dict)

    @property
    def neighbors(self) -> np.ndarray:
        return self.slots[1:]

    def local_shift(self, k: int, own, inbox: dict):
        """``(S_k z)(id)`` from the own value and the neighbour messages, in slot order."""
        w = self.rows[k]
        acc = w[0] * own
        for s, j in enumerate(self.slots[1:], start=1):
            acc = acc + w[s] * inbox[j]
        return acc


class CommStats:
    """Message and arithmetic counters of a simulation run."""

    def __init__(self, n: int, log_messages: bool = False):
        self.n = n
        self.round_messages: list[int] = []
        self.round_payload: list[int] = []
        self.sent = np.zeros(n, dtype=np.int64)
        self.received = np.zeros(n, dtype=np.int64)
        self.flops = 0
        self.log_messages = log_messages
        self.log: list[tuple] = []
        self.nonedge_messages = 0

    @property
    def rounds(self) -> int:
        return len(self.round_messages)

    @property
    def total_messages(self) -> int:
        return int(sum(self.round_messages))

    def record(self, src, dst, payload: int):
        r = self.rounds
        self.round_messages.append(int(src.size))
        self.round_payload.append(int(payload))
        np.add.at(self.sent, src, 1)
        np.add.at(self.received, dst, 1)
        if self.log_messages:
            self.log.extend(zip([r] * src.size, src.tolist(), dst.tolist(), [payload] * src.size))

    def merge(self, other: "CommStats"):
        base = self.rounds
        self.round_messages += other.round_messages
        self.round_payload += other.round_payload
        self.sent += other.sent
        self.received += other.received
        self.flops += other.flops
        self.nonedge_messages += other.nonedge_messages
        if self.log_messages:
            self.log.extend((r + base, s, d, p) for r, s, d, p in other.log)

    def summary(self) -> dict:
        return {
            "rounds": self.rounds,
            "messages": self.total_messages,
            "max_messages_per_vertex": int(self.sent.max(initial=0)),
            "mean_messages_per_vertex": float(self.sent.mean()) if self.n else 0.0,
            "flops": int(self.flops),
            "nonedge_messages": int(self.nonedge_messages),
        }

    def to_csv(self, path) -> None:
        if not self.log_messages:
            raise ValueError("message log was not recorded; pass log_messages=True")
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["round", "src", "dst", "payload_size"])
            w.writerows(self.log)

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def _explicit(S, cap):
    m = S.matrix if isinstance(S, Shift) else S
    if isinstance(m, KronOperator):
        if m.shape[0] > cap:
            raise StructuredShiftError(
                f"Kronecker shift of size {m.shape[0]} exceeds materialization cap {cap}")
        log.info("materializing Kronecker shift of size %d for simulation", m.shape[0])
        return m.tocsr()
    return sp.csr_matrix(m)


class Network:
    """Vertex agents on ``graph`` holding local rows of the shifts ``F``."""

    def __init__(self, F, graph: Graph | None = None, *, engine: str = "vectorized",
                 log_messages: bool = False, cap: int = MATERIALIZE_CAP):
        if isinstance(F, ShiftFamily):
            shifts = list(F.shifts)
        elif isinstance(F, Shift):
            shifts = [F]
        else:
            shifts = list(F)
        graph = graph or next((S.graph for S in shifts if isinstance(S, Shift) and S.graph), None)
        if graph is None:
            raise ValueError("the simulator needs the host graph")
        if not graph.is_connected:
            raise DisconnectedGraphError("simulation requires a connected graph")
        if engine not in ("vectorized", "loop"):
            raise ValueError("engine must be 'vectorized' or 'loop'")
        self.graph = graph
        self.engine = engine
        self.log_messages = log_messages
        n = graph.n
        mats = [_explicit(S, cap) for S in shifts]
        if any(M.shape != (n, n) for M in mats):
            raise DimensionMismatchError("shift size differs from graph order")
        self.d = len(mats)
        # slot pattern per vertex: self first, then neighbours ascending
        A = graph.adj
        self.indptr = np.concatenate([[0], np.cumsum(np.diff(A.indptr) + 1)])
        slot_idx = np.empty(self.indptr[-1], dtype=np.int64)
        for i in range(n):
            nb = A.indices[A.indptr[i]:A.indptr[i + 1]]
            slot_idx[self.indptr[i]] = i
            slot_idx[self.indptr[i] + 1:self.indptr[i + 1]] = nb
        self.slot_idx = slot_idx
        owner = np.repeat(np.arange(n), np.diff(self.indptr))
        self.weights = np.zeros((self.d, slot_idx.size))
        for k, M in enumerate(mats):
            M = M.tocsr()
            # every nonzero must sit in a slot (width <= 1)
            pattern = sp.csr_matrix((np.ones(slot_idx.size), (owner, slot_idx)), shape=(n, n))
            outside = M - M.multiply(pattern)
            outside.eliminate_zeros()
            if outside.nnz:
                i, j = outside.nonzero()
                from .errors import WidthViolationError

                raise WidthViolationError(i[0], j[0], 2)
            self.weights[k] = np.asarray(M[owner, slot_idx]).ravel()
        self.agents = [VertexAgent(i, slot_idx[self.indptr[i]:self.indptr[i + 1]],
                                   self.weights[:, self.indptr[i]:self.indptr[i + 1]])
                       for i in range(n)]
        # directed messages: every vertex sends to each neighbour
        self.msg_dst = np.repeat(np.arange(n), np.diff(A.indptr))
        self.msg_src = A.indices.astype(np.int64)
        self.is_self = slot_idx == owner
        self.nnz = [int(np.count_nonzero(w)) for w in self.weights]
        self.stats = CommStats(n, log_messages)

    @property
    def n(self) -> int:
        return self.graph.n

    def reset_stats(self):
        self.stats = CommStats(self.n, self.log_messages)

    def _deliver(self, payload: int):
        src, dst = self.msg_src, self.msg_dst
        ok = self.graph.has_edge(src, dst)
        bad = int(np.size(ok) - np.count_nonzero(ok))
        self.stats.nonedge_messages += bad
        assert bad == 0, "message sent between non-adjacent vertices"
        self.stats.record(src, dst, payload)

    def shift_round(self, k: int, z: np.ndarray, order=None) -> np.ndarray:
        """One exchange round followed by the local sum ``(S_k z)(i)`` at every agent."""
        snapshot = np.array(z, copy=True)
        self._deliver(1)
        self.stats.flops += self.nnz[k]
        if self.engine == "vectorized":
            # slot-ordered products, summed per agent left to right
            vals = self.weights[k] * snapshot[self.slot_idx]
            out = np.empty_like(snapshot)
            widths = np.diff(self.indptr)
            acc = vals[self.indptr[:-1]].copy()
            for s in range(1, widths.max(initial=1)):
                has = widths > s
                acc[has] += vals[self.indptr[:-1][has] + s]
            out[:] = acc
            return out
        out = np.empty_like(snapshot)
        agents = self.agents if order is None else [self.agents[i] for i in order]
        for a in agents:
            inbox = {j: snapshot[j] for j in a.neighbors}
            out[a.id] = a.local_shift(k, snapshot[a.id], inbox)
        return out

    def horner(self, k: int, coeffs, order=None) -> np.ndarray:
        """Single-shift Horner with (local) vector coefficients: ``z <- c_l + S_k z`` from ``z = c_L``."""
        L = len(coeffs) - 1
        z = np.array(coeffs[L], dtype=float, copy=True)
        for n in range(L):
            z = coeffs[L - n - 1] + self.shift_round(k, z, order)
        return z

    def filter(self, h: PolyCoeffs, x, order=None) -> np.ndarray:
        """Multi-shift Horner: columns of ``U_{d-1}`` one by one, then the reductions."""
        if not isinstance(h, PolyCoeffs):
            h = PolyCoeffs(h)
        if h.d != self.d:
            raise DimensionMismatchError(f"filter has {h.d} variables, network has {self.d} shifts")
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise DimensionMismatchError(f"signal of shape {x.shape} for {self.n} vertices")
        C = h.coeffs
        shape = C.shape
        outer = shape[:-1]
        U = {}
        for p in product(*[range(s) for s in outer]):
            col = [C[p + (l,)] * x for l in range(shape[-1])]
            self.stats.flops += self.n * shape[-1]
            U[p] = self.horner(self.d - 1, col, order)
        for m in range(self.d - 2, -1, -1):
            V = {}
            for p in product(*[range(s) for s in shape[:m]]):
                col = [U[p + (l,)] for l in range(shape[m])]
                V[p] = self.horner(m, col, order)
            U = V
        return U[()]


def sim_filter(h: PolyCoeffs, F, x, *, graph: Graph | None = None, engine: str = "vectorized",
               log_messages: bool = False, order=None):
    """Distributed evaluation of ``h(S_1, ..., S_d) x``; returns ``(y, CommStats)``."""
    net = Network(F, graph, engine=engine, log_messages=log_messages)
    y = net.filter(h, x, order)
    return y, net.stats


def sim_inverse(method: str, h: PolyCoeffs, g, F, b, M: int, *, x_true=None,
                graph: Graph | None = None, engine: str = "vectorized",
                log_messages: bool = False, tol: float = 0.0):
    """Distributed IOPA/ICPA: ``z = G e``, ``e -= H z``, ``x += z`` with local updates.

    ``g`` is the approximant as :class:`PolyCoeffs` (IOPA) or
    :class:`ChebCoeffs` (ICPA, converted to monomials).  Returns
    ``(x, SolveTrace, CommStats)``.
    """
    method = method.upper()
    if method not in ("IOPA", "ICPA"):
        raise ValueError("method must be 'IOPA' or 'ICPA'")
    if isinstance(g, ChebCoeffs):
        g = cheb_to_monomial(g)
    if not isinstance(h, PolyCoeffs):
        h = PolyCoeffs(h)
    if not isinstance(g, PolyCoeffs):
        g = PolyCoeffs(g)
    net = Network(F, graph, engine=engine, log_messages=log_messages)
    b = np.asarray(b, dtype=float)
    e = b.copy()
    x = np.zeros_like(b)
    bnorm = float(np.linalg.norm(b))
    res, clock = [bnorm], [0.0]
    xnorm = float(np.linalg.norm(x_true)) if x_true is not None else None
    errs = [1.0] if x_true is not None else None
    t0 = time.perf_counter()
    diverged = False
    for m in range(1, M + 1):
        z = net.filter(g, e)
        e = e - net.filter(h, z)
        x = x + z
        net.stats.flops += 2 * net.n
        res.append(float(np.linalg.norm(e)))
        clock.append((time.perf_counter() - t0) * 1e6)
        if x_true is not None:
            errs.append(float(np.linalg.norm(x - x_true)) / max(xnorm, 1e-300))
        if tol > 0 and res[-1] <= tol * bnorm:
            break
        if _is_diverging(res, bnorm, tol):
            diverged = True
            if res[-1] > DIVERGENCE_FACTOR * bnorm:
                break
    trace = SolveTrace(f"{method}-distributed", np.array(res),
                       None if errs is None else np.array(errs), np.array(clock), None, x,
                       converged=bool(tol > 0 and res[-1] <= tol * bnorm), diverged=diverged)
    return x, trace, net.stats
