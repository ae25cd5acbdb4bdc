"""Truncated-least-squares rotation estimation with a certified relaxation.

The TLS rotation problem over K pairwise measurements,

    min_{R in O(3)}  sum_k min(||b_k - R a_k||^2 / beta_k^2, c_bar^2),

is rewritten with one "clone" R_k = theta_k * R per measurement, where
theta_k = +1 accepts measurement k and theta_k = -1 rejects it at cost
c_bar^2. Stacking X = [I3, R, R_1, ..., R_K] makes the objective linear in
Z = X'X, a PSD matrix of side 3(K+2): objective = trace(Qbar Z). Dropping
the rank-3 condition on Z yields a semidefinite program whose optimum
lower-bounds the TLS optimum; rounding its solution back to O(3) gives an
estimate together with a per-instance suboptimality bound, and a solution
of numerical rank 3 certifies that the relaxation was exact.

Block index map for Z (side n = 3(K+2)): rows/cols 0:3 belong to the
identity block I, 3:6 to R, and 3(k+2):3(k+3) to clone R_k.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from numpy.typing import NDArray

from .conic import (
    ConicProblem,
    ConicSolution,
    SolverSettings,
    _project_socs,
    smat,
    solve_conic,
    svec,
    svec_dim,
    svec_index,
)
from .errors import InputError, ProblemTooLarge
from .geometry import _freeze, as_points, as_positive_vector

# first standard basis vector; the per-clone scalar theta_k appears in the
# lifted matrix as e1' [Z]_{R R_k} e1
E1 = np.array([1.0, 0.0, 0.0])

_SQRT2 = float(np.sqrt(2.0))
_SQRT2_INV = 1.0 / _SQRT2

DEFAULT_K_CAP = 40


@dataclass(frozen=True)
class RotationProblem:
    """K scale-corrected measurement pairs with noise bounds.

    a_bar must already be multiplied by the scale estimate; b_bar is left
    untouched. beta_edge keeps the original per-pair bounds (the noise
    lives on b_bar, which is not rescaled).
    """

    a_bar: NDArray[np.float64]
    b_bar: NDArray[np.float64]
    beta_edge: NDArray[np.float64]
    c_bar_sq: float = 1.0

    def __post_init__(self) -> None:
        a = as_points(self.a_bar, "a_bar")
        b = as_points(self.b_bar, "b_bar")
        if a.shape != b.shape:
            raise InputError(f"a_bar/b_bar shape mismatch: {a.shape} vs {b.shape}")
        beta = as_positive_vector(self.beta_edge, a.shape[0], "beta_edge")
        if not np.isfinite(self.c_bar_sq) or self.c_bar_sq <= 0.0:
            raise InputError(f"c_bar_sq must be finite and > 0, got {self.c_bar_sq}")
        object.__setattr__(self, "a_bar", _freeze(a))
        object.__setattr__(self, "b_bar", _freeze(b))
        object.__setattr__(self, "beta_edge", _freeze(beta))

    @property
    def k(self) -> int:
        return self.a_bar.shape[0]

    @property
    def n_matrix(self) -> int:
        return 3 * (self.k + 2)


@dataclass(frozen=True)
class QbarMatrix:
    """Symmetric cost matrix of the lifted objective trace(Qbar Z)."""

    matrix: NDArray[np.float64]
    n_tims: int

    def __post_init__(self) -> None:
        m = self.matrix
        n = 3 * (self.n_tims + 2)
        if m.shape != (n, n):
            raise InputError(f"expected {n}x{n} matrix, got {m.shape}")
        if np.abs(m - m.T).max() > 1e-12:
            raise InputError("cost matrix must be symmetric to 1e-12")
        _freeze(m)


@dataclass(frozen=True)
class SdpSolution:
    """Relaxation output: lifted matrix, bounds, solve diagnostics."""

    Z: NDArray[np.float64]
    primal_objective: float
    residuals: dict[str, float]
    iterations: int
    converged: bool
    y: NDArray[np.float64] | None = None
    stats: dict[str, int] | None = None
    certified_lower: float | None = None


@dataclass(frozen=True)
class RotationCertificate:
    """Rounded estimate plus its per-instance optimality evidence.

    subopt_bound = f_rounded - f_sdp bounds the gap between the rounded
    estimate and the unknown TLS optimum. tight means the lifted solution
    had numerical rank 3 (stable_rank <= 3 + rank_tol) and its rotation
    block was already orthogonal, i.e. the relaxation solved the original
    problem. thetas[k] = +1 marks measurement k as accepted.
    """

    r_hat: NDArray[np.float64]
    thetas: NDArray[np.int64]
    det_r: float
    stable_rank: float
    f_rounded: float
    f_sdp: float
    subopt_bound: float
    tight: bool
    raw_block_orthogonality: float


def binary_cloning_objective(p: RotationProblem, r: NDArray[np.float64], thetas) -> float:
    """Cloned objective sum_k (1+t_k)/2 * ||b_k - R a_k||^2/beta_k^2 + (1-t_k)/2 * c_bar^2."""
    th = np.asarray(thetas, dtype=np.float64)
    if th.shape != (p.k,) or not np.all(np.abs(th) == 1.0):
        raise InputError("thetas must be a length-K vector of +1/-1")
    res = np.linalg.norm(p.b_bar - p.a_bar @ np.asarray(r).T, axis=1) ** 2
    res = res / p.beta_edge**2
    return float(np.sum(0.5 * (1.0 + th) * res + 0.5 * (1.0 - th) * p.c_bar_sq))


def assemble_qbar(p: RotationProblem) -> QbarMatrix:
    """Accumulate the per-measurement cost blocks into one symmetric matrix."""
    n = p.n_matrix
    q = np.zeros((n, n))
    eye = np.eye(3)
    cb2 = p.c_bar_sq
    for k in range(p.k):
        a = p.a_bar[k]
        b = p.b_bar[k]
        b2 = p.beta_edge[k] ** 2
        aa = float(a @ a)
        bb = float(b @ b)
        d_ii = (bb + aa + b2 * cb2) / (6.0 * b2)
        d_rrk = (bb + aa - b2 * cb2) / (12.0 * b2)
        cross = -np.outer(b, a) / (2.0 * b2)  # = -(a b' / (2 beta^2))'
        ko = 3 * (k + 2)
        q[0:3, 0:3] += d_ii * eye
        q[3:6, ko : ko + 3] += d_rrk * eye
        q[ko : ko + 3, 3:6] += d_rrk * eye
        q[0:3, 3:6] += cross
        q[0:3, ko : ko + 3] += cross
        q[3:6, 0:3] += cross.T
        q[ko : ko + 3, 0:3] += cross.T
    q = 0.5 * (q + q.T)
    return QbarMatrix(matrix=q, n_tims=p.k)


def build_sdp(p: RotationProblem, q: QbarMatrix, k_cap: int = DEFAULT_K_CAP) -> ConicProblem:
    """Emit the relaxed problem as an explicit conic program.

    Variable: x = svec(Z), Z of side 3(K+2). Constraints:
      (a) the three families of diagonal blocks [Z]_II, [Z]_RR, [Z]_{R_kR_k}
          all equal I3 (6 equality rows per block);
      (b) each [Z]_{R R_k} is a scalar multiple of I3 (8 rows per k: 6
          off-diagonal zeros plus 2 diagonal-equality rows);
      (c) for each k both operator-norm couplings
          ||[Z]_IR +/- [Z]_{IR_k}||_2 <= 1 +/- e1'[Z]_{R R_k}e1 (the lifted
          point of a rotation satisfies both with equality, since the
          spectral norm of (1 +/- theta_k) R is exactly |1 +/- theta_k|);
      (d) the redundant pairwise family over clone pairs (k, l):
          ||[Z]_{IR_k} +/- [Z]_{IR_l}||_2 <= 1 +/- e1'[Z]_{R_kR_l}e1;
      plus Z >= 0. Each operator-norm bound ||M||_2 <= t is emitted as the
    6x6 block [[t I3, M], [M', t I3]] >= 0, so (c) and (d) become small
    PSD cones. The Frobenius norm would give second-order cones instead,
    but it is strictly weaker here and loosens the relaxation badly.
    """
    kk = p.k
    if kk > k_cap:
        raise ProblemTooLarge(f"K = {kk} exceeds the configured cap {k_cap}")
    if q.n_tims != kk:
        raise InputError("cost matrix and problem disagree on K")
    n_mat = p.n_matrix
    nv = svec_dim(n_mat)

    rows_i: list[int] = []
    cols_i: list[int] = []
    vals: list[float] = []
    b_list: list[float] = []
    row_groups: list[tuple[str, int, int]] = []
    row = 0

    def add_entry(r: int, i: int, j: int, w: float) -> None:
        """Accumulate w * Z_ij into constraint row r."""
        scale = 1.0 if i == j else _SQRT2_INV
        rows_i.append(r)
        cols_i.append(svec_index(i, j, n_mat))
        vals.append(w * scale)

    def block_offset(idx: int) -> int:
        # idx 0 -> I, 1 -> R, k+2 -> clone k
        return 3 * idx

    # (a) identity diagonal blocks
    start = row
    for blk in range(kk + 2):
        o = block_offset(blk)
        for pp in range(3):
            for qq in range(pp, 3):
                add_entry(row, o + pp, o + qq, 1.0)
                b_list.append(1.0 if pp == qq else 0.0)
                row += 1
    row_groups.append(("identity_blocks", start, row - start))

    # (b) [Z]_{R R_k} = scalar * I3
    start = row
    for k in range(kk):
        ko = block_offset(k + 2)
        for pp in range(3):
            for qq in range(3):
                if pp != qq:
                    add_entry(row, 3 + pp, ko + qq, 1.0)
                    b_list.append(0.0)
                    row += 1
        for pp in range(2):
            add_entry(row, 3 + pp, ko + pp, 1.0)
            add_entry(row, 3 + pp + 1, ko + pp + 1, -1.0)
            b_list.append(0.0)
            row += 1
    row_groups.append(("clone_coupling", start, row - start))
    m_zero = row

    coupling_dims: list[int] = []

    def add_opnorm_cone(scalar_ij: tuple[int, int], left: int, right: int, sign: float) -> None:
        """PSD block certifying ||[Z]_{I,left} + sign*[Z]_{I,right}||_2 <= 1 + sign*Z[scalar_ij].

        Emits svec of the 6x6 matrix [[t I3, M], [M', t I3]] with
        t = 1 + sign*Z[scalar_ij] and M = [Z]_{I,left} + sign*[Z]_{I,right},
        which is PSD exactly when ||M||_2 <= t.
        """
        nonlocal row
        for pp in range(6):
            for qq in range(pp, 6):
                same_half = (pp < 3) == (qq < 3)
                if same_half:
                    if pp == qq:
                        add_entry(row, scalar_ij[0], scalar_ij[1], -sign)
                        b_list.append(1.0)
                    else:
                        b_list.append(0.0)
                else:
                    e = qq - 3
                    add_entry(row, pp, left + e, -_SQRT2)
                    add_entry(row, pp, right + e, -sign * _SQRT2)
                    b_list.append(0.0)
                row += 1
        coupling_dims.append(6)

    start = row
    for k in range(kk):
        ko = block_offset(k + 2)
        add_opnorm_cone((3, ko), 3, ko, +1.0)
        add_opnorm_cone((3, ko), 3, ko, -1.0)
    row_groups.append(("clone_cones", start, row - start))

    start = row
    for k in range(kk):
        for l in range(k + 1, kk):
            ko = block_offset(k + 2)
            lo = block_offset(l + 2)
            add_opnorm_cone((ko, lo), ko, lo, +1.0)
            add_opnorm_cone((ko, lo), ko, lo, -1.0)
    row_groups.append(("pairwise_cones", start, row - start))

    # PSD block: slack s = x itself
    start = row
    for i in range(nv):
        rows_i.append(row)
        cols_i.append(i)
        vals.append(-1.0)
        b_list.append(0.0)
        row += 1
    row_groups.append(("psd", start, row - start))

    a = sp.coo_matrix((vals, (rows_i, cols_i)), shape=(row, nv)).tocsc()
    return ConicProblem(
        c=svec(q.matrix),
        A=a,
        b=np.array(b_list),
        m_zero=m_zero,
        soc_dims=[],
        psd_dims=coupling_dims + [n_mat],
        row_groups=row_groups,
        meta={"n_matrix": n_mat, "n_tims": kk},
    )


def lift(r: NDArray[np.float64], thetas) -> NDArray[np.float64]:
    """Z = X'X for X = [I3, R, theta_1 R, ..., theta_K R]."""
    th = np.asarray(thetas, dtype=np.float64)
    x = np.hstack([np.eye(3), r] + [t * r for t in th])
    return x.T @ x


def certified_lower_bound(
    prob: ConicProblem, y: NDArray[np.float64]
) -> tuple[float, dict[str, float]]:
    """True relaxation lower bound from an approximate dual point.

    The approximate duals of the coupling cones are projected onto their
    (self-dual) cones, the stationarity condition then determines the dual
    slack of the full PSD block exactly, and any indefiniteness of that
    slack is repaired through the duals of the rows that pin the diagonal
    of Z, which can add an arbitrary nonnegative diagonal D to the slack
    at a price of trace(D). For each negative eigenpair (-lam, v) the
    diagonal D_v = lam * ||v||_1 * diag(|v|) dominates lam * v v' (by the
    Schur complement test: lam * v' D_v^{-1} v = 1), so the summed repair
    makes the slack feasible at a price of sum_i lam_i * ||v_i||_1^2,
    never worse than the uniform shift price of n * lam_max; whichever of
    the two repairs is cheaper is applied, followed by a uniform mop-up of
    any float-level residue. The price vanishes as the solve converges.
    """
    groups = {label: (start, length) for label, start, length in prob.row_groups}
    y_cert = np.array(y, dtype=np.float64)
    pos = prob.m_zero
    for d in prob.soc_dims:
        blk = y_cert[pos : pos + d]
        y_cert[pos : pos + d] = _project_socs(blk, [d])
        pos += d
    for dim in prob.psd_dims[:-1]:
        ln = svec_dim(dim)
        mat = smat(y_cert[pos : pos + ln], dim)
        w, q = np.linalg.eigh(mat)
        wc = np.where(w > 0.0, w, 0.0)
        y_cert[pos : pos + ln] = svec((q * wc) @ q.T)
        pos += ln
    psd_start, psd_len = groups["psd"]
    y_cert[psd_start : psd_start + psd_len] = 0.0

    # stationarity fixes the dual slack of the trailing PSD block
    slack = prob.c + prob.A.T @ y_cert
    n_mat = prob.meta["n_matrix"]
    s_mat = smat(slack, n_mat)
    w, vecs = np.linalg.eigh(s_mat)
    lam_min = float(w[0])
    price = 0.0
    if lam_min < 0.0:
        d_shift = np.full(n_mat, -lam_min)
        d_weighted = np.zeros(n_mat)
        for idx in np.flatnonzero(w < 0.0):
            v = vecs[:, idx]
            d_weighted += (-w[idx]) * float(np.sum(np.abs(v))) * np.abs(v)
        d = d_weighted if d_weighted.sum() < d_shift.sum() else d_shift
        lam_res = float(np.linalg.eigvalsh(s_mat + np.diag(d))[0])
        if lam_res < 0.0:
            d += -lam_res
        # diag entry i of Z is pinned by identity-block row blk*6 + (0,3,5)[p]
        ident_start, _ = groups["identity_blocks"]
        diag_rows = ident_start + 6 * (np.arange(n_mat) // 3) + np.array([0, 3, 5])[
            np.arange(n_mat) % 3
        ]
        y_cert[diag_rows] += d
        s_mat = s_mat + np.diag(d)
        price = float(d.sum())
    y_cert[psd_start : psd_start + psd_len] = svec(s_mat)
    bound = float(-(prob.b @ y_cert))
    return bound, {"repair_price": price, "slack_min_eig": lam_min}


def solve_sdp(
    prob: ConicProblem,
    settings: SolverSettings | None = None,
    initial_z: NDArray[np.float64] | None = None,
    initial_y: NDArray[np.float64] | None = None,
) -> SdpSolution:
    """Solve the emitted conic program and reshape the result to a matrix.

    initial_z warm-starts the solver at a given symmetric matrix, for
    instance the lifted point of a heuristic estimate or the Z of an
    earlier, looser solve being refined; initial_y optionally supplies the
    matching dual point. Warm starts change only the path taken, never the
    optimum of the (convex) relaxation.

    Besides the iterate, this derives a certified lower bound on the
    relaxation from the dual point, so downstream suboptimality gaps stay
    valid even when the solve stopped at a loose tolerance.
    """
    warm = None
    if initial_z is not None:
        n_mat = prob.meta["n_matrix"]
        z0 = np.asarray(initial_z, dtype=np.float64)
        if z0.shape != (n_mat, n_mat):
            raise InputError(f"initial_z must be {n_mat}x{n_mat}, got {z0.shape}")
        warm = (svec(0.5 * (z0 + z0.T)), initial_y)
    sol: ConicSolution = solve_conic(prob, settings, warm_start=warm)
    n_mat = prob.meta["n_matrix"]
    z = smat(sol.x, n_mat)
    bound, _ = certified_lower_bound(prob, sol.y)
    return SdpSolution(
        Z=z,
        primal_objective=sol.objective,
        residuals=sol.residuals,
        iterations=sol.iterations,
        converged=sol.converged,
        y=sol.y,
        stats=sol.stats,
        certified_lower=bound,
    )


def _project_o3(m: NDArray[np.float64], proper_only: bool) -> NDArray[np.float64]:
    """Nearest orthogonal matrix in Frobenius norm (det +1 if proper_only)."""
    u, _, vt = np.linalg.svd(m)
    r = u @ vt
    if proper_only and np.linalg.det(r) < 0.0:
        r = (u * np.array([1.0, 1.0, -1.0])) @ vt
    return r


def _weighted_procrustes(
    p: RotationProblem, accepted: NDArray[np.bool_], proper_only: bool
) -> NDArray[np.float64] | None:
    """Exact minimizer of sum_{accepted} ||b_k - R a_k||^2 / beta_k^2 over O(3)."""
    if not np.any(accepted):
        return None
    w = 1.0 / p.beta_edge[accepted] ** 2
    m = (w[:, None] * p.b_bar[accepted]).T @ p.a_bar[accepted]
    return _project_o3(m, proper_only)


def _coordinate_descent(
    p: RotationProblem,
    r_hat: NDArray[np.float64],
    thetas: NDArray[np.int64],
    f_current: float,
    proper_only: bool,
    max_rounds: int = 16,
) -> tuple[NDArray[np.float64], NDArray[np.int64], float]:
    """Alternate exact minimization in R (Procrustes on the accepted set)
    and in thetas (residual thresholding). Each iteration is a strict
    improvement of the cloned objective or a fixed point, and the theta
    space is finite, so this terminates."""
    for _ in range(max_rounds):
        r_new = _weighted_procrustes(p, thetas > 0, proper_only)
        if r_new is None:
            break
        resid_sq = np.sum((p.b_bar - p.a_bar @ r_new.T) ** 2, axis=1)
        th_new = np.where(resid_sq / p.beta_edge**2 <= p.c_bar_sq, 1, -1).astype(
            np.int64
        )
        f_new = binary_cloning_objective(p, r_new, th_new)
        if f_new >= f_current - 1e-15:
            if f_new < f_current:
                r_hat, thetas, f_current = r_new, th_new, f_new
            break
        r_hat, thetas, f_current = r_new, th_new, f_new
    return r_hat, thetas, f_current


def local_rotation_guess(
    p: RotationProblem, proper_only: bool = False
) -> tuple[NDArray[np.float64], NDArray[np.int64], float]:
    """Fast heuristic (r, thetas, objective) by coordinate descent from the
    all-accepted Procrustes fit.

    This is a local method with no optimality guarantee; its value is as a
    warm start for the relaxation (lift the pair and pass the matrix as
    initial_z) and as an upper bound on the TLS optimum.
    """
    r0 = _weighted_procrustes(p, np.ones(p.k, dtype=bool), proper_only)
    resid_sq = np.sum((p.b_bar - p.a_bar @ r0.T) ** 2, axis=1)
    th0 = np.where(resid_sq / p.beta_edge**2 <= p.c_bar_sq, 1, -1).astype(np.int64)
    f0 = binary_cloning_objective(p, r0, th0)
    return _coordinate_descent(p, r0, th0, f0, proper_only)


def round_and_certify(
    p: RotationProblem,
    sol: SdpSolution,
    rank_tol: float = 0.05,
    proper_only: bool = False,
) -> RotationCertificate:
    """Project the relaxation back to O(3) and bound its suboptimality.

    The base estimate is the SVD projection of the [Z]_IR block; thetas
    pick for each clone whichever of +/- r_hat is nearer its [Z]_{IR_k}
    block (ties resolve to +1). The pair is then polished by exact
    coordinate descent on the truncated objective: the accepted set fixes
    the optimal rotation in closed form (weighted orthogonal Procrustes),
    and the rotation fixes the optimal thetas by thresholding each
    residual at the truncation level. Every step lowers f_rounded, so the
    polish can only tighten the certificate; on a tight solution it is a
    no-op. proper_only restricts all projections to det +1.

    When the solution has numerical rank 3 the raw [Z]_IR block must
    already be orthogonal within 1e-6, otherwise the tight flag is
    withdrawn. f_sdp is the certified lower bound when the solve produced
    one, so subopt_bound = f_rounded - f_sdp is nonnegative up to roundoff
    no matter how early the solver stopped.
    """
    z = sol.Z
    eigs = np.linalg.eigvalsh(z)
    fro_sq = float(np.sum(eigs**2))
    spec_sq = float(np.max(np.abs(eigs)) ** 2)
    stable_rank = fro_sq / spec_sq if spec_sq > 0.0 else float("inf")

    block = z[0:3, 3:6]
    r_hat = _project_o3(block, proper_only)

    thetas = np.empty(p.k, dtype=np.int64)
    for k in range(p.k):
        ko = 3 * (k + 2)
        # nearest of +/- r_hat in Frobenius distance == sign of <r_hat, block>
        thetas[k] = 1 if float(np.sum(r_hat * z[0:3, ko : ko + 3])) >= 0.0 else -1
    f_rounded = binary_cloning_objective(p, r_hat, thetas)
    r_hat, thetas, f_rounded = _coordinate_descent(
        p, r_hat, thetas, f_rounded, proper_only
    )

    raw_orth = float(np.linalg.norm(block.T @ block - np.eye(3)))
    tight = bool(stable_rank <= 3.0 + rank_tol and raw_orth <= 1e-6)
    f_lower = sol.certified_lower if sol.certified_lower is not None else sol.primal_objective
    return RotationCertificate(
        r_hat=_freeze(r_hat),
        thetas=_freeze(thetas),
        det_r=float(np.round(np.linalg.det(r_hat))),
        stable_rank=stable_rank,
        f_rounded=f_rounded,
        f_sdp=f_lower,
        subopt_bound=f_rounded - f_lower,
        tight=tight,
        raw_block_orthogonality=raw_orth,
    )
