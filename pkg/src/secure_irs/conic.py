"""Backend-agnostic cone programs.

A :class:`ConicProblem` is ``minimize c^T x + c0`` subject to a list of
blocks ``A_i x + b_i in K_i`` with ``K_i`` one of

* ``zero``        -- the origin,
* ``nonneg``      -- the nonnegative orthant,
* ``soc``         -- {(t, u): ||u|| <= t},
* ``psd``         -- symmetric PSD matrices of order d, stored as the
                     column-major vec of the full d x d matrix.

Complex Hermitian blocks are embedded as ``[[Re B, -Im B], [Im B, Re B]]``
before they reach this layer (see :func:`embed_hermitian`), so the backend
only needs real cones. :class:`Model` is a small affine-expression builder
that emits these blocks.
"""
from __future__ import annotations

import io
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

CONES = ("zero", "nonneg", "soc", "psd")


@dataclass(frozen=True)
class ConeBlock:
    cone: str
    A: np.ndarray  # dense or scipy sparse
    b: np.ndarray
    tag: str
    order: int = 0  # PSD matrix order

    @property
    def rows(self) -> int:
        return self.A.shape[0]


@dataclass(frozen=True)
class ConicProblem:
    n: int
    c: np.ndarray
    blocks: tuple
    c0: float = 0.0
    names: tuple = ()

    def __post_init__(self):
        if self.c.shape != (self.n,):
            raise ValueError("objective length does not match variable count")
        for blk in self.blocks:
            if blk.cone not in CONES:
                raise ValueError(f"unknown cone {blk.cone}")
            if blk.A.shape[1] != self.n or blk.A.shape[0] != blk.b.shape[0]:
                raise ValueError(f"inconsistent dimensions in block {blk.tag!r}")
            if blk.cone == "psd" and blk.rows != blk.order ** 2:
                raise ValueError(f"PSD block {blk.tag!r} is not d*d")
            if blk.cone == "soc" and blk.rows < 1:
                raise ValueError("empty SOC block")
            if not blk.tag:
                raise ValueError("every constraint needs a provenance tag")

    def listing(self) -> str:
        """Human-readable summary, one line per constraint block."""
        lines = [f"variables: {self.n}"]
        for i, blk in enumerate(self.blocks):
            size = f"psd({blk.order})" if blk.cone == "psd" else f"{blk.cone}({blk.rows})"
            lines.append(f"[{i:3d}] {size:<12s} {blk.tag}")
        return "\n".join(lines)


@dataclass
class ConicSolution:
    status: str
    x: Optional[np.ndarray]
    objective: float
    max_residual: float
    solve_time: float
    raw_status: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


@dataclass
class FeasibilityReport:
    residuals: List[float]
    tags: List[str]

    @property
    def max(self) -> float:
        return max(self.residuals, default=0.0)

    def worst(self):
        if not self.residuals:
            return None, 0.0
        i = int(np.argmax(self.residuals))
        return self.tags[i], self.residuals[i]


# --------------------------------------------------------------------------
# residuals


def _block_residual(blk: ConeBlock, x: np.ndarray) -> float:
    y = blk.A @ x + blk.b
    if not np.all(np.isfinite(y)):
        return float("inf")
    if blk.cone == "zero":
        return float(np.max(np.abs(y), initial=0.0))
    if blk.cone == "nonneg":
        return float(max(0.0, -np.min(y, initial=0.0)))
    if blk.cone == "soc":
        return float(max(0.0, np.linalg.norm(y[1:]) - y[0]))
    S = y.reshape(blk.order, blk.order, order="F")
    S = 0.5 * (S + S.T)
    return float(max(0.0, -np.linalg.eigvalsh(S)[0]))


def check_feasibility(problem: ConicProblem, x: np.ndarray, tol: float = 1e-8
                      ) -> FeasibilityReport:
    """Per-block cone residuals at ``x``; PSD residual is ``max(0, -lambda_min)``."""
    x = np.asarray(x, dtype=float)
    res = [_block_residual(b, x) for b in problem.blocks]
    return FeasibilityReport(res, [b.tag for b in problem.blocks])


# --------------------------------------------------------------------------
# backend


def _svec_rows(d: int):
    # column-major upper triangle, matching the backend's PSD triangle cone
    rows, cols = [], []
    for j in range(d):
        for i in range(j + 1):
            rows.append(i)
            cols.append(j)
    rows = np.array(rows)
    cols = np.array(cols)
    scale = np.where(rows == cols, 1.0, np.sqrt(2.0))
    full_idx = rows + cols * d
    full_idx_t = cols + rows * d
    return full_idx, full_idx_t, scale


_SVEC_CACHE = {}


def _dense(A) -> np.ndarray:
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


def _to_svec(A, b: np.ndarray, d: int):
    if d not in _SVEC_CACHE:
        _SVEC_CACHE[d] = _svec_rows(d)
    idx, idx_t, scale = _SVEC_CACHE[d]
    A = _dense(A)
    # symmetrize so that non-symmetric input is read as its symmetric part
    A_s = 0.5 * (A[idx] + A[idx_t])
    b_s = 0.5 * (b[idx] + b[idx_t])
    return scale[:, None] * A_s, scale * b_s


_STATUS = {
    "Solved": "optimal",
    "AlmostSolved": "optimal",
    "PrimalInfeasible": "infeasible",
    "AlmostPrimalInfeasible": "infeasible",
    "DualInfeasible": "unbounded",
    "AlmostDualInfeasible": "unbounded",
}


def solve(problem: ConicProblem, tol: float = 1e-8, max_iter: int = 200,
          verbose: bool = False) -> ConicSolution:
    """Solve with the interior-point backend and verify the returned point."""
    import clarabel

    finite = np.all(np.isfinite(problem.c)) and all(
        np.all(np.isfinite(_dense(blk.A))) and np.all(np.isfinite(blk.b))
        for blk in problem.blocks)
    if not finite:
        return ConicSolution("numerical_failure", None, np.nan, np.inf, 0.0, "nonfinite data")
    A_rows, b_rows, cones = [], [], []
    for blk in problem.blocks:
        if blk.cone == "psd":
            A_s, b_s = _to_svec(blk.A, blk.b, blk.order)
            A_rows.append(A_s)
            b_rows.append(b_s)
            cones.append(clarabel.PSDTriangleConeT(blk.order))
            continue
        A_rows.append(_dense(blk.A))
        b_rows.append(blk.b)
        if blk.cone == "zero":
            cones.append(clarabel.ZeroConeT(blk.rows))
        elif blk.cone == "nonneg":
            cones.append(clarabel.NonnegativeConeT(blk.rows))
        else:
            cones.append(clarabel.SecondOrderConeT(blk.rows))
    # backend form: s = b - A x in K, with our y = A x + b in K
    A = sp.csc_matrix(-np.vstack(A_rows)) if A_rows else sp.csc_matrix((0, problem.n))
    b = np.concatenate(b_rows) if b_rows else np.zeros(0)
    P = sp.csc_matrix((problem.n, problem.n))

    settings = clarabel.DefaultSettings()
    settings.verbose = verbose
    settings.max_iter = max_iter
    settings.tol_gap_abs = tol
    settings.tol_gap_rel = tol
    settings.tol_feas = tol
    settings.tol_ktratio = 1e-6
    settings.presolve_enable = False

    t0 = time.perf_counter()
    try:
        sol = clarabel.DefaultSolver(P, problem.c, A, b, cones, settings).solve()
    except BaseException as exc:  # the backend surfaces panics as generic errors
        return ConicSolution("numerical_failure", None, np.nan, np.inf,
                             time.perf_counter() - t0, repr(exc))
    elapsed = time.perf_counter() - t0
    raw = str(sol.status)
    status = _STATUS.get(raw, "numerical_failure")
    x = np.asarray(sol.x, dtype=float) if status == "optimal" else None
    resid = np.inf
    obj = np.nan
    if x is not None:
        resid = check_feasibility(problem, x).max
        obj = float(problem.c @ x + problem.c0)
        if raw.startswith("Almost") and resid > 1e3 * tol:
            status = "numerical_failure"
    return ConicSolution(status, x, obj, resid, elapsed, raw)


# --------------------------------------------------------------------------
# debug dump


def dump_problem(problem: ConicProblem, stream=None) -> str:
    """Write a plain-text sparse listing of the problem.

    Layout::

        CONIC 1
        VARS <n>
        CONES <count>
        <cone> <rows> <order> <tag>        (one line per block)
        OBJ <nnz> <c0>
        <col> <value>                      (nonzeros of c)
        BLOCK <index> <nnz>
        <row> <col> <value>                (nonzeros of A_i)
        CONST <index> <nnz>
        <row> <value>                      (nonzeros of b_i)
    """
    out = stream if stream is not None else io.StringIO()
    out.write("CONIC 1\n")
    out.write(f"VARS {problem.n}\n")
    out.write(f"CONES {len(problem.blocks)}\n")
    for blk in problem.blocks:
        out.write(f"{blk.cone} {blk.rows} {blk.order} {blk.tag.replace(' ', '_')}\n")
    nz = np.flatnonzero(problem.c)
    out.write(f"OBJ {nz.size} {float(problem.c0)!r}\n")
    for j in nz:
        out.write(f"{j} {float(problem.c[j])!r}\n")
    for i, blk in enumerate(problem.blocks):
        coo = sp.coo_matrix(blk.A)
        out.write(f"BLOCK {i} {coo.nnz}\n")
        for r, cidx, v in zip(coo.row, coo.col, coo.data):
            out.write(f"{r} {cidx} {float(v)!r}\n")
        nzb = np.flatnonzero(blk.b)
        out.write(f"CONST {i} {nzb.size}\n")
        for r in nzb:
            out.write(f"{r} {float(blk.b[r])!r}\n")
    if stream is None:
        return out.getvalue()
    return ""


# --------------------------------------------------------------------------
# affine expressions


class Affine:
    """Complex-valued affine map of the real decision vector.

    ``value(x) = coef @ x + const`` with ``coef`` of shape ``shape + (n,)``.
    Coefficient arrays are padded lazily as variables are added.
    """

    __array_priority__ = 100
    __array_ufunc__ = None  # make numpy defer to the reflected operators

    def __init__(self, coef: np.ndarray, const: np.ndarray):
        self.coef = np.asarray(coef, dtype=complex)
        self.const = np.asarray(const, dtype=complex)

    # -- shape helpers
    @property
    def shape(self):
        return self.const.shape

    @property
    def n(self):
        return self.coef.shape[-1]

    def _pad(self, n):
        if self.n == n:
            return self.coef
        out = np.zeros(self.coef.shape[:-1] + (n,), dtype=complex)
        out[..., :self.n] = self.coef
        return out

    @staticmethod
    def lift(other, n, shape=None):
        if isinstance(other, Affine):
            return other._pad(max(n, other.n)), other.const
        const = np.asarray(other, dtype=complex)
        if shape is not None:
            const = np.broadcast_to(const, shape)
        return np.zeros(const.shape + (n,), dtype=complex), const

    @staticmethod
    def constant(value, n=0):
        value = np.asarray(value, dtype=complex)
        return Affine(np.zeros(value.shape + (n,), dtype=complex), value)

    # -- arithmetic
    def __add__(self, other):
        n = max(self.n, other.n if isinstance(other, Affine) else 0)
        c2, k2 = Affine.lift(other, n)
        c1 = self._pad(n)
        shape = np.broadcast_shapes(self.shape, np.shape(k2))
        return Affine(np.broadcast_to(c1, shape + (n,)) + np.broadcast_to(c2, shape + (n,)),
                      self.const + k2)

    __radd__ = __add__

    def __neg__(self):
        return Affine(-self.coef, -self.const)

    def __sub__(self, other):
        return self + (-other if isinstance(other, Affine) else -np.asarray(other))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        s = np.asarray(scalar)
        if isinstance(scalar, Affine):
            raise TypeError("product of two affine expressions is not affine")
        return Affine(self.coef * s[..., None], self.const * s)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self * (1.0 / np.asarray(scalar))

    def __matmul__(self, M):
        M = np.asarray(M)
        if self.coef.ndim == 2:  # vector
            return Affine(np.einsum("in,i...->...n", self.coef, M), self.const @ M)
        if M.ndim == 1:
            return Affine(np.einsum("ijn,j->in", self.coef, M), self.const @ M)
        return Affine(np.einsum("ijn,jk->ikn", self.coef, M), self.const @ M)

    def __rmatmul__(self, M):
        M = np.asarray(M)
        if self.coef.ndim == 2:
            return Affine(np.einsum("ki,in->kn", M, self.coef), M @ self.const)
        return Affine(np.einsum("ki,ijn->kjn", M, self.coef), M @ self.const)

    def __getitem__(self, idx):
        idx = idx if isinstance(idx, tuple) else (idx,)
        return Affine(self.coef[idx + (Ellipsis,)] if Ellipsis not in idx else self.coef[idx],
                      self.const[idx])

    @property
    def real(self):
        return Affine(self.coef.real, self.const.real)

    @property
    def imag(self):
        return Affine(self.coef.imag, self.const.imag)

    def conj(self):
        return Affine(self.coef.conj(), self.const.conj())

    @property
    def T(self):
        if self.coef.ndim == 2:
            return self
        return Affine(np.swapaxes(self.coef, 0, 1), self.const.T)

    @property
    def H(self):
        return self.conj().T

    def reshape(self, *shape):
        return Affine(self.coef.reshape(*shape, self.n), self.const.reshape(*shape))

    def sum(self):
        axes = tuple(range(self.coef.ndim - 1))
        return Affine(self.coef.sum(axis=axes), self.const.sum())

    def dot(self, vec):
        """Bilinear (non-conjugating) contraction with a constant vector."""
        vec = np.asarray(vec)
        return Affine(np.einsum("in,i->n", self.coef, vec), self.const @ vec)

    def outer(self, vec):
        """``self vec^T`` for a vector expression and constant vector."""
        vec = np.asarray(vec)
        return Affine(np.einsum("in,j->ijn", self.coef, vec), np.outer(self.const, vec))

    def value(self, x):
        x = np.asarray(x)
        n = self.n
        xx = x[:n] if x.shape[0] >= n else np.pad(x, (0, n - x.shape[0]))
        return self.coef @ xx + self.const


def stack(items: Sequence, axis: int = 0) -> Affine:
    n = max(i.n for i in items if isinstance(i, Affine))
    coefs, consts = [], []
    for it in items:
        c, k = Affine.lift(it, n)
        coefs.append(c)
        consts.append(k)
    return Affine(np.stack(coefs, axis=axis), np.stack(consts, axis=axis))


def block(rows: Sequence[Sequence]) -> Affine:
    """Assemble a block matrix from Affine/constant 2-D pieces."""
    n = 0
    for row in rows:
        for it in row:
            if isinstance(it, Affine):
                n = max(n, it.n)
    coef_rows, const_rows = [], []
    for row in rows:
        cs, ks = [], []
        for it in row:
            c, k = Affine.lift(it, n)
            if k.ndim != 2:
                raise ValueError("block pieces must be 2-D")
            cs.append(c)
            ks.append(k)
        coef_rows.append(np.concatenate(cs, axis=1))
        const_rows.append(np.concatenate(ks, axis=1))
    return Affine(np.concatenate(coef_rows, axis=0), np.concatenate(const_rows, axis=0))


def embed_hermitian(B: Affine) -> Affine:
    """Real symmetric embedding ``[[Re B, -Im B], [Im B, Re B]]``.

    For Hermitian B the embedding is PSD iff B is, and its eigenvalues are
    those of B, each repeated twice.
    """
    Re, Im = B.real, B.imag
    return block([[Re, -Im], [Im, Re]])


def embed_hermitian_array(B: np.ndarray) -> np.ndarray:
    return np.block([[B.real, -B.imag], [B.imag, B.real]])


class Model:
    """Incremental builder for a :class:`ConicProblem`."""

    def __init__(self):
        self.n = 0
        self._names: List[str] = []
        self._blocks: List[ConeBlock] = []
        self._objective: Optional[Affine] = None
        self._sense = 1.0
        self.var_slices = {}

    def _alloc(self, name, size):
        start = self.n
        self.n += size
        self._names.extend(f"{name}[{i}]" for i in range(size))
        self.var_slices[name] = slice(start, self.n)
        return start

    def real_var(self, name: str, shape=()) -> Affine:
        shape = tuple(np.atleast_1d(shape)) if shape != () else ()
        size = int(np.prod(shape)) if shape else 1
        start = self._alloc(name, size)
        coef = np.zeros((size, self.n), dtype=complex)
        coef[np.arange(size), start + np.arange(size)] = 1.0
        return Affine(coef.reshape(shape + (self.n,)), np.zeros(shape, dtype=complex))

    def complex_var(self, name: str, shape) -> Affine:
        shape = tuple(np.atleast_1d(shape))
        size = int(np.prod(shape))
        start = self._alloc(name, 2 * size)
        coef = np.zeros((size, self.n), dtype=complex)
        coef[np.arange(size), start + np.arange(size)] = 1.0
        coef[np.arange(size), start + size + np.arange(size)] = 1j
        return Affine(coef.reshape(shape + (self.n,)), np.zeros(shape, dtype=complex))

    # -- constraints
    def _real_rows(self, expr: Affine):
        coef = expr._pad(self.n)
        if np.max(np.abs(coef.imag), initial=0) > 1e-12 or \
                np.max(np.abs(expr.const.imag), initial=0) > 1e-12:
            raise ValueError("constraint expression must be real")
        A = coef.real.reshape(-1, self.n)
        return A, expr.const.real.reshape(-1)

    def _add(self, cone, expr, tag, order=0):
        if not isinstance(expr, Affine):
            expr = Affine.constant(expr, self.n)
        A, b = self._real_rows(expr)
        self._blocks.append(ConeBlock(cone, A.copy(), b.copy(), tag, order))

    def add_zero(self, expr, tag: str):
        self._add("zero", expr, tag)

    def add_nonneg(self, expr, tag: str):
        """``expr >= 0`` elementwise."""
        self._add("nonneg", expr, tag)

    def add_soc(self, t, u, tag: str):
        """``||u|| <= t``; complex ``u`` is split into real and imaginary parts."""
        t = t if isinstance(t, Affine) else Affine.constant(t, self.n)
        u = u if isinstance(u, Affine) else Affine.constant(u, self.n)
        u = u.reshape(-1)
        if np.abs(u.coef.imag).max(initial=0) > 0 or np.abs(u.const.imag).max(initial=0) > 0:
            u = _concat([u.real, u.imag])
        self._add("soc", _concat([t.real.reshape(1), u.real]), tag)

    def add_rsoc(self, x, y, u, tag: str):
        """``||u||^2 <= x y`` with ``x, y >= 0``."""
        u = u if isinstance(u, Affine) else Affine.constant(u, self.n)
        u = u.reshape(-1)
        if np.abs(u.coef.imag).max(initial=0) > 0 or np.abs(u.const.imag).max(initial=0) > 0:
            u = _concat([u.real, u.imag])
        x = x if isinstance(x, Affine) else Affine.constant(x, self.n)
        y = y if isinstance(y, Affine) else Affine.constant(y, self.n)
        self._add("soc", _concat([(x + y).real.reshape(1), (x - y).real.reshape(1),
                                  2 * u.real]), tag)

    def add_psd(self, H: Affine, tag: str, hermitian: bool = True):
        """Hermitian ``H >= 0`` through the real embedding (or real symmetric H)."""
        if hermitian and (np.abs(H.coef.imag).max(initial=0) > 0
                          or np.abs(H.const.imag).max(initial=0) > 0):
            H = embed_hermitian(H)
        d = H.shape[0]
        self._add("psd", _vec_f(H.real), tag, order=d)

    # -- objective
    def minimize(self, expr):
        self._objective = expr
        self._sense = 1.0

    def maximize(self, expr):
        self._objective = expr
        self._sense = -1.0

    def build(self) -> ConicProblem:
        c = np.zeros(self.n)
        c0 = 0.0
        if self._objective is not None:
            obj = self._objective.reshape(1)[0] if self._objective.shape else self._objective
            c = self._sense * obj._pad(self.n).real.reshape(self.n)
            c0 = float(self._sense * obj.const.real)
        blocks = []
        for blk in self._blocks:
            if blk.A.shape[1] < self.n:
                A = np.zeros((blk.A.shape[0], self.n))
                A[:, :blk.A.shape[1]] = blk.A
                blk = ConeBlock(blk.cone, A, blk.b, blk.tag, blk.order)
            blocks.append(blk)
        return ConicProblem(self.n, c, tuple(blocks), c0, tuple(self._names))

    def solve(self, tol: float = 1e-8, **kwargs) -> ConicSolution:
        sol = solve(self.build(), tol=tol, **kwargs)
        if sol.x is not None and self._sense < 0:
            sol.objective = -sol.objective
        return sol


def _concat(items: Sequence[Affine]) -> Affine:
    n = max(i.n for i in items)
    return Affine(np.concatenate([i._pad(n).reshape(-1, n) for i in items], axis=0),
                  np.concatenate([i.const.reshape(-1) for i in items]))


def _vec_f(H: Affine) -> Affine:
    # column-major vec of a square expression
    d = H.shape[0]
    coef = np.swapaxes(H.coef, 0, 1).reshape(d * d, H.n)
    return Affine(coef, H.const.T.reshape(-1))
