"""Sparse conic programming by operator splitting (ADMM).

Problems have the standard form

    minimize    c' x
    subject to  A x + s = b,    s in K,

where K is a Cartesian product of a zero cone (equality rows), second-order
cones (t, u) with ||u|| <= t, and cones of positive semidefinite matrices in
scaled-vector (svec) form. Each iteration solves one quasi-definite KKT
system (factorized once per rho setting) and projects onto the shifted set
{z : b - z in K}; over-relaxation and per-block step sizes follow the usual
operator-splitting recipe for quadratic programs, extended here with cone
projections. Termination requires the cone residuals of the primal iterate
and the relative duality gap against the dual iterate to fall below the
configured tolerances, so a "converged" result is a checkable certificate,
not a fixed-point heuristic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray
from scipy.sparse.linalg import splu

from .errors import InputError, NumericalFailure

_SQRT2 = float(np.sqrt(2.0))

# -- scaled symmetric vectorization -------------------------------------------

_SVEC_CACHE: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def _svec_cache(n: int):
    if n not in _SVEC_CACHE:
        iu = np.triu_indices(n)
        scale = np.where(iu[0] == iu[1], 1.0, _SQRT2)
        _SVEC_CACHE[n] = (iu[0], iu[1], scale)
    return _SVEC_CACHE[n]


def svec(m: NDArray[np.float64]) -> NDArray[np.float64]:
    """Upper triangle row-major, off-diagonals scaled by sqrt(2).

    The scaling makes the vectorization an isometry: svec(P)'svec(Q) equals
    trace(P'Q) for symmetric P, Q.
    """
    n = m.shape[0]
    ii, jj, scale = _svec_cache(n)
    return m[ii, jj] * scale


def smat(v: NDArray[np.float64], n: int) -> NDArray[np.float64]:
    """Inverse of svec."""
    ii, jj, scale = _svec_cache(n)
    m = np.zeros((n, n))
    vals = v / scale
    m[ii, jj] = vals
    m[jj, ii] = vals
    return m


def svec_index(i: int, j: int, n: int) -> int:
    """Position of entry (i, j), i <= j, in the svec coordinate order."""
    if i > j:
        i, j = j, i
    return i * n - i * (i - 1) // 2 + (j - i)


# -- problem container ---------------------------------------------------------


@dataclass
class ConicProblem:
    """min c'x s.t. Ax + s = b with s in zero^m_zero x SOC(soc_dims) x PSD.

    psd_dims lists matrix side lengths; their svec blocks occupy the final
    rows of A in order. row_groups associates human-readable labels with
    row ranges for the debug listing.
    """

    c: NDArray[np.float64]
    A: sp.csc_matrix
    b: NDArray[np.float64]
    m_zero: int
    soc_dims: list[int]
    psd_dims: list[int]
    row_groups: list[tuple[str, int, int]] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        self.c = np.asarray(self.c, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        self.A = sp.csc_matrix(self.A)
        m = self.m_zero + sum(self.soc_dims) + sum(svec_dim(d) for d in self.psd_dims)
        if self.A.shape != (m, self.c.size) or self.b.shape != (m,):
            raise InputError(
                f"inconsistent dimensions: A {self.A.shape}, b {self.b.shape}, "
                f"cones total {m}, variables {self.c.size}"
            )
        if any(d < 1 for d in self.soc_dims) or any(d < 1 for d in self.psd_dims):
            raise InputError("cone dimensions must be >= 1")

    @property
    def n_vars(self) -> int:
        return self.c.size

    @property
    def n_rows(self) -> int:
        return self.b.size

    def to_debug_text(self) -> str:
        """Deterministic plain-text listing for cross-checking with other solvers."""
        lines = [
            "conic problem",
            f"variables {self.n_vars}",
            f"rows {self.n_rows}",
            f"zero_cone {self.m_zero}",
            f"soc_cones {len(self.soc_dims)} dims {' '.join(map(str, self.soc_dims))}",
            f"psd_cones {len(self.psd_dims)} dims {' '.join(map(str, self.psd_dims))}",
            "row_groups",
        ]
        for label, start, length in self.row_groups:
            lines.append(f"  {label} rows {start} {length}")
        coo = self.A.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines.append(f"objective nnz {np.count_nonzero(self.c)}")
        for idx in np.flatnonzero(self.c):
            lines.append(f"c {idx} {self.c[idx]:.17g}")
        lines.append(f"matrix nnz {coo.nnz}")
        for k in order:
            lines.append(f"A {coo.row[k]} {coo.col[k]} {coo.data[k]:.17g}")
        lines.append(f"rhs nnz {np.count_nonzero(self.b)}")
        for idx in np.flatnonzero(self.b):
            lines.append(f"b {idx} {self.b[idx]:.17g}")
        return "\n".join(lines) + "\n"


@dataclass
class SolverSettings:
    """Operator-splitting knobs; the defaults suit desk-scale problems."""

    feas_tol: float = 1e-7
    gap_tol: float = 1e-6
    max_iters: int = 50_000
    sigma: float = 1e-6
    alpha: float = 1.6
    rho: float = 0.1
    rho_eq_scale: float = 1e3
    adaptive_rho: bool = True
    check_every: int = 25
    infeas_tol: float = 1e-10
    accel_memory: int = 10


@dataclass
class ConicSolution:
    """Primal/dual iterates with residuals measured on the returned point."""

    x: NDArray[np.float64]
    y: NDArray[np.float64]
    objective: float
    dual_objective: float
    iterations: int
    converged: bool
    status: str
    residuals: dict[str, float]
    stats: dict[str, int] = field(default_factory=dict)


# -- cone projections ----------------------------------------------------------


def _project_socs(v: NDArray[np.float64], dims: list[int]) -> NDArray[np.float64]:
    out = np.empty_like(v)
    pos = 0
    i = 0
    while i < len(dims):
        # vectorize runs of equal-dimension cones (the common case here)
        j = i
        while j < len(dims) and dims[j] == dims[i]:
            j += 1
        d = dims[i]
        count = j - i
        block = v[pos : pos + count * d].reshape(count, d)
        t = block[:, 0]
        u = block[:, 1:]
        nu = np.linalg.norm(u, axis=1)
        res = np.empty_like(block)
        inside = nu <= t
        zero = nu <= -t
        res[inside] = block[inside]
        res[zero] = 0.0
        mid = ~inside & ~zero
        if np.any(mid):
            coef = 0.5 * (t[mid] + nu[mid])
            res[mid, 0] = coef
            res[mid, 1:] = u[mid] * (coef / nu[mid])[:, None]
        out[pos : pos + count * d] = res.reshape(-1)
        pos += count * d
        i = j
    return out


def _smat_batch(seg: NDArray[np.float64], n: int) -> NDArray[np.float64]:
    """Rows of svec vectors -> stack of symmetric matrices."""
    ii, jj, scale = _svec_cache(n)
    mats = np.zeros((seg.shape[0], n, n))
    vals = seg / scale
    mats[:, ii, jj] = vals
    mats[:, jj, ii] = vals
    return mats


def _project_psd(v: NDArray[np.float64], dims: list[int]) -> NDArray[np.float64]:
    out = np.empty_like(v)
    pos = 0
    i = 0
    while i < len(dims):
        # batch runs of equal side length into one stacked eigendecomposition
        j = i
        while j < len(dims) and dims[j] == dims[i]:
            j += 1
        n = dims[i]
        ln = svec_dim(n)
        count = j - i
        seg = v[pos : pos + count * ln].reshape(count, ln)
        ii, jj, scale = _svec_cache(n)
        mats = _smat_batch(seg, n)
        # a Cholesky pass costs a fraction of an eigendecomposition and
        # succeeds exactly when every block already lies in the cone, which
        # is the common case once the iterates settle
        try:
            np.linalg.cholesky(mats)
            out[pos : pos + count * ln] = seg.reshape(-1)
            pos += count * ln
            i = j
            continue
        except np.linalg.LinAlgError:
            pass
        w, q = np.linalg.eigh(mats)
        res = seg.copy()
        fix = w[:, 0] < 0.0
        if np.any(fix):
            wc = np.where(w[fix] > 0.0, w[fix], 0.0)
            m2 = (q[fix] * wc[:, None, :]) @ np.transpose(q[fix], (0, 2, 1))
            res[fix] = m2[:, ii, jj] * scale
        out[pos : pos + count * ln] = res.reshape(-1)
        pos += count * ln
        i = j
    return out


def _project_cone(v: NDArray[np.float64], prob: ConicProblem) -> NDArray[np.float64]:
    """Projection onto K = zero x SOC x PSD."""
    mz = prob.m_zero
    ms = sum(prob.soc_dims)
    out = np.empty_like(v)
    out[:mz] = 0.0
    out[mz : mz + ms] = _project_socs(v[mz : mz + ms], prob.soc_dims)
    out[mz + ms :] = _project_psd(v[mz + ms :], prob.psd_dims)
    return out


def _project_dual_cone(v: NDArray[np.float64], prob: ConicProblem) -> NDArray[np.float64]:
    """Projection onto K* = free x SOC x PSD (SOC and PSD are self-dual)."""
    mz = prob.m_zero
    ms = sum(prob.soc_dims)
    out = np.empty_like(v)
    out[:mz] = v[:mz]
    out[mz : mz + ms] = _project_socs(v[mz : mz + ms], prob.soc_dims)
    out[mz + ms :] = _project_psd(v[mz + ms :], prob.psd_dims)
    return out


def cone_residuals(prob: ConicProblem, x: NDArray[np.float64]) -> dict[str, float]:
    """Violation of each cone family by the slack b - Ax of a candidate x."""
    s = prob.b - prob.A @ x
    mz = prob.m_zero
    ms = sum(prob.soc_dims)
    eq = float(np.abs(s[:mz]).max()) if mz else 0.0
    soc = 0.0
    pos = mz
    for d in prob.soc_dims:
        blk = s[pos : pos + d]
        soc = max(soc, float(np.linalg.norm(blk[1:]) - blk[0]))
        pos += d
    soc = max(soc, 0.0)
    psd = 0.0
    pos = mz + ms
    i = 0
    dims = prob.psd_dims
    while i < len(dims):
        j = i
        while j < len(dims) and dims[j] == dims[i]:
            j += 1
        n = dims[i]
        ln = svec_dim(n)
        count = j - i
        seg = s[pos : pos + count * ln].reshape(count, ln)
        w = np.linalg.eigvalsh(_smat_batch(seg, n))
        psd = max(psd, float(max(0.0, -float(w[:, 0].min()))))
        pos += count * ln
        i = j
    return {"equality": eq, "soc": soc, "psd": psd}


# -- solver --------------------------------------------------------------------


def _row_block_starts(prob: ConicProblem) -> NDArray[np.int64]:
    """Start index of every row block that must be scaled uniformly.

    Equality rows scale independently; each SOC or PSD block shares one
    scalar so that scaling maps the cone onto itself.
    """
    starts = list(range(prob.m_zero))
    pos = prob.m_zero
    for d in prob.soc_dims:
        starts.append(pos)
        pos += d
    for n in prob.psd_dims:
        starts.append(pos)
        pos += svec_dim(n)
    return np.asarray(starts, dtype=np.int64)


def _equilibrate(
    prob: ConicProblem, n_passes: int = 10
) -> tuple[sp.csc_matrix, NDArray[np.float64], NDArray[np.float64]]:
    """Ruiz scaling A -> E A D with block-uniform row factors.

    Returns the scaled matrix and the accumulated row/column factors
    (e, d). Iteratively dividing rows and columns by the square root of
    their max-norms drives all of them toward 1, which conditions the
    operator-splitting iteration much better than raw problem data.
    """
    a = prob.A.copy()
    m, n = a.shape
    starts = _row_block_starts(prob)
    lengths = np.diff(np.append(starts, m))
    e = np.ones(m)
    d = np.ones(n)
    for _ in range(n_passes):
        row_max = np.asarray(abs(a).max(axis=1).todense()).ravel()
        blk = np.maximum.reduceat(row_max, starts) if m else row_max
        blk = np.where(blk > 0.0, blk, 1.0)
        e_new = 1.0 / np.sqrt(np.repeat(blk, lengths))
        col_max = np.asarray(abs(a).max(axis=0).todense()).ravel()
        col_max = np.where(col_max > 0.0, col_max, 1.0)
        d_new = 1.0 / np.sqrt(col_max)
        a = sp.diags(e_new) @ a @ sp.diags(d_new)
        e *= e_new
        d *= d_new
    return a.tocsc(), e, d


def _factorize(A: sp.csc_matrix, sigma: float, rho_vec: NDArray[np.float64]):
    n = A.shape[1]
    m = A.shape[0]
    kkt = sp.bmat(
        [
            [sigma * sp.identity(n), A.T],
            [A, -sp.diags(1.0 / rho_vec)],
        ],
        format="csc",
    )
    # the KKT matrix is quasi-definite, so an LDL'-style symmetric ordering
    # without partial pivoting is stable and produces far less fill-in than
    # the unsymmetric default
    return splu(
        kkt,
        permc_spec="MMD_AT_PLUS_A",
        diag_pivot_thresh=0.0,
        options=dict(SymmetricMode=True),
    )


def solve_conic(
    prob: ConicProblem,
    settings: SolverSettings | None = None,
    warm_start: tuple[NDArray[np.float64], NDArray[np.float64] | None] | None = None,
) -> ConicSolution:
    """Run the operator-splitting loop until the tolerances or max_iters hit.

    warm_start, when given, is an (x0, y0) pair in the original (unscaled)
    problem coordinates; y0 may be None for a primal-only start. A good x0
    (for instance a feasible point from a problem-specific heuristic, or
    the solution of a looser solve being refined) can cut the iteration
    count substantially; since the problem is convex it never changes what
    the loop converges to.

    Raises NumericalFailure if iterates become non-finite. Infeasible
    problems are reported via status "primal_infeasible" /
    "dual_infeasible" with converged=False when a certificate direction is
    detected.
    """
    st = settings or SolverSettings()
    n = prob.n_vars
    m = prob.n_rows

    # Ruiz equilibration plus objective scaling; the loop runs on the
    # scaled data, every reported quantity is mapped back to the original
    A, e_row, d_col = _equilibrate(prob)
    b = prob.b * e_row
    c_scaled = prob.c * d_col
    cost_scale = max(1.0, float(np.linalg.norm(c_scaled, np.inf)))
    c = c_scaled / cost_scale

    rho_bar = st.rho
    rho_vec = np.full(m, rho_bar)
    rho_vec[: prob.m_zero] *= st.rho_eq_scale
    lu = _factorize(A, st.sigma, rho_vec)

    def sweep(x0, u0):
        """One full splitting sweep from the state (x, u), u = z + y/rho.

        Splitting u through the cone projection recovers the unique pair
        z = b - proj_K(b - u), y = rho (u - z); running the x/z updates
        then produces the next state. Keeping u as the iterate (instead of
        the pair) means any linear combination of states still decodes to
        a valid primal/dual pair, which is what makes acceleration safe.
        """
        z0 = b - _project_cone(b - u0, prob)
        y0 = rho_vec * (u0 - z0)
        rhs = np.concatenate([st.sigma * x0 - c, 2.0 * z0 - u0])
        sol = lu.solve(rhs)
        if not np.all(np.isfinite(sol)):
            raise NumericalFailure("non-finite KKT solution")
        x_t = sol[:n]
        nu = sol[n:]
        z_t = z0 + (nu - y0) / rho_vec
        x1 = st.alpha * x_t + (1.0 - st.alpha) * x0
        u1 = st.alpha * z_t + (1.0 - st.alpha) * z0 + y0 / rho_vec
        return x1, u1, z0, y0

    x = np.zeros(n)
    y_prev = np.zeros(m)
    x_prev = np.zeros(n)
    if warm_start is not None:
        x0_u, y0_u = warm_start
        if np.shape(x0_u) != (n,):
            raise InputError(f"warm start x0 must have shape ({n},)")
        x_ws = np.asarray(x0_u, dtype=np.float64) / d_col
        if y0_u is None:
            y_ws = np.zeros(m)
        else:
            if np.shape(y0_u) != (m,):
                raise InputError(f"warm start y0 must have shape ({m},)")
            y_ws = np.asarray(y0_u, dtype=np.float64) / (e_row * cost_scale)
        z_ws = _project_cone(b - A @ x_ws, prob)
        v = np.concatenate([x_ws, z_ws + y_ws / rho_vec])
    else:
        v = np.zeros(n + m)

    status = "max_iters"
    converged = False
    it = 0
    res: dict[str, float] = {}
    stats = {"rho_updates": 0, "accel_resets": 0}
    c_norm = float(np.linalg.norm(prob.c, np.inf))

    def unscale(x_s: NDArray[np.float64], y_s: NDArray[np.float64]):
        return d_col * x_s, e_row * y_s * cost_scale

    # Anderson acceleration state (type-II, differenced form). The history
    # holds successive differences of iterates and of fixed-point residuals;
    # the accelerated candidate extrapolates through them. The operator is
    # averaged, so the plain step never increases the fixed-point residual;
    # a candidate whose residual grows is rejected at the next sweep in
    # favor of the stored plain successor. Termination is still measured on
    # decoded primal/dual pairs, so a poor candidate can only cost
    # iterations, never produce a false certificate.
    mem = max(0, int(st.accel_memory))
    dv_hist: list[NDArray[np.float64]] = []
    df_hist: list[NDArray[np.float64]] = []
    v_prev_fp: NDArray[np.float64] | None = None
    f_prev: NDArray[np.float64] | None = None
    pending: tuple[NDArray[np.float64], float] | None = None

    def accel_reset() -> None:
        nonlocal v_prev_fp, f_prev, pending
        dv_hist.clear()
        df_hist.clear()
        v_prev_fp = None
        f_prev = None
        pending = None
        stats["accel_resets"] += 1

    for it in range(1, st.max_iters + 1):
        x, u1, z, y = sweep(v[:n], v[n:])
        tv = np.concatenate([x, u1])
        if mem == 0:
            v = tv
        else:
            f = tv - v
            rn = float(np.linalg.norm(f))
            if pending is not None:
                fallback, rn_base = pending
                if rn > 1.1 * rn_base:
                    # the accelerated candidate regressed; resume from the
                    # plain successor recorded when it was built
                    accel_reset()
                    v = fallback
                    continue
                pending = None
            if v_prev_fp is not None:
                dv_hist.append(v - v_prev_fp)
                df_hist.append(f - f_prev)
                if len(df_hist) > mem:
                    dv_hist.pop(0)
                    df_hist.pop(0)
            v_prev_fp = v
            f_prev = f
            if df_hist:
                df_mat = np.stack(df_hist, axis=1)
                dv_mat = np.stack(dv_hist, axis=1)
                gram = df_mat.T @ df_mat
                # Tikhonov term keeps the combination finite when the
                # history directions become nearly collinear
                gram[np.diag_indices_from(gram)] += 1e-12 * max(
                    1.0, float(np.trace(gram))
                )
                try:
                    gamma = np.linalg.solve(gram, df_mat.T @ f)
                    v = tv - (dv_mat + df_mat) @ gamma
                    pending = (tv, rn)
                except np.linalg.LinAlgError:
                    v = tv
            else:
                v = tv

        if it % st.check_every != 0 and it != st.max_iters:
            continue
        # decode the pair from the sweep output for all checks
        z = b - _project_cone(b - u1, prob)
        y = rho_vec * (u1 - z)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise NumericalFailure(f"non-finite iterate at iteration {it}")

        x_u, y_u = unscale(x, y)
        res = cone_residuals(prob, x_u)
        obj = float(prob.c @ x_u)
        dual_obj = float(-prob.b @ y_u)
        dual_res = float(np.linalg.norm(prob.c + prob.A.T @ y_u, np.inf))
        dual_rel = dual_res / max(1.0, c_norm)
        gap = abs(obj - dual_obj) / max(1.0, abs(obj), abs(dual_obj))
        res["dual"] = dual_res
        res["gap"] = gap
        if (
            max(res["equality"], res["soc"], res["psd"]) <= st.feas_tol
            and dual_rel <= st.gap_tol
            and gap <= st.gap_tol
        ):
            status = "optimal"
            converged = True
            break

        # infeasibility certificates from the iterate differences, mapped
        # back to the original problem before testing
        dy = e_row * (y - y_prev)
        dx = d_col * (x - x_prev)
        ndy = float(np.linalg.norm(dy, np.inf))
        if ndy > 0.0:
            dyn = dy / ndy
            in_dual = float(
                np.linalg.norm(dyn - _project_dual_cone(dyn, prob), np.inf)
            )
            if (
                float(np.linalg.norm(prob.A.T @ dyn, np.inf)) <= st.infeas_tol * 1e3
                and in_dual <= st.infeas_tol * 1e3
                and float(prob.b @ dyn) < -st.infeas_tol
            ):
                status = "primal_infeasible"
                break
        ndx = float(np.linalg.norm(dx, np.inf))
        if ndx > 0.0:
            dxn = dx / ndx
            Adx = prob.A @ dxn
            proj_gap = float(
                np.linalg.norm(Adx + _project_cone(-Adx, prob), np.inf)
            )
            if proj_gap <= st.infeas_tol * 1e3 and float(prob.c @ dxn) < -st.infeas_tol:
                status = "dual_infeasible"
                break
        y_prev = y.copy()
        x_prev = x.copy()

        if st.adaptive_rho:
            ax = A @ x
            prim_rel = float(np.linalg.norm(ax - z, np.inf)) / max(
                1e-12, float(np.linalg.norm(ax, np.inf)), float(np.linalg.norm(z, np.inf))
            )
            dual_scaled = float(np.linalg.norm(c + A.T @ y, np.inf))
            dual_rel_adm = dual_scaled / max(
                1e-12,
                float(np.linalg.norm(c, np.inf)),
                float(np.linalg.norm(A.T @ y, np.inf)),
            )
            ratio = np.sqrt(prim_rel / max(dual_rel_adm, 1e-16))
            import os as _os
            if _os.environ.get("TLSREG_DEBUG_RHO"):
                print(f"DBG it={it} prim={prim_rel:.2e} dual={dual_rel_adm:.2e} ratio={ratio:.2e} rho={rho_bar:.2e} gap={gap:.2e} dualres={dual_rel:.2e}", flush=True)
            if ratio > 5.0 or ratio < 0.2:
                rho_bar = float(np.clip(rho_bar * ratio, 1e-6, 1e6))
                rho_vec = np.full(m, rho_bar)
                rho_vec[: prob.m_zero] *= st.rho_eq_scale
                lu = _factorize(A, st.sigma, rho_vec)
                stats["rho_updates"] += 1
                # re-encode the state under the new step sizes; the fixed
                # point map changed, so the acceleration history is stale
                v = np.concatenate([x, z + y / rho_vec])
                if mem:
                    accel_reset()

    x_u, y_u = unscale(x, y)
    if not res:
        res = cone_residuals(prob, x_u)
        res["dual"] = float(np.linalg.norm(prob.c + prob.A.T @ y_u, np.inf))
        res["gap"] = abs(float(prob.c @ x_u) + float(prob.b @ y_u)) / max(
            1.0, abs(float(prob.c @ x_u)), abs(float(prob.b @ y_u))
        )
    return ConicSolution(
        x=x_u,
        y=y_u,
        objective=float(prob.c @ x_u),
        dual_objective=float(-prob.b @ y_u),
        iterations=it,
        converged=converged,
        status=status,
        residuals=res,
        stats=stats,
    )
