"""Per-symbol constructive-interference precoding.

For one symbol duration the design variable is the precoded transmit vector
x (the product of the precoding matrix and the symbol vector; the matrix
itself is never needed). Writing the noiseless receive sample of user k as

    h_k^T x = alpha_re[k] * Re{s_k} + j * alpha_im[k] * Im{s_k},

each of the 2K (user, axis) components is either *inner* (its scale factor
must equal the common margin t, or the sample would leave its decision
region) or *outer* (its scale factor may exceed t, pushing the sample deeper
into the region). The precoder maximizes t subject to those constraints and
||x||_2 <= 1.

Solution method: each scale factor is a fixed linear functional of the
stacked real vector w = [Re x; Im x]. For t > 0 the substitution w -> w / t
turns the problem into the strictly convex least-norm program

    minimize ||w||  s.t.  G_inner w = 1,  G_outer w >= 1,

whose solution gives t* = 1 / ||w*|| and x* = w* / ||w*||. The equality part
is eliminated exactly via an SVD (least-norm particular solution plus null
space basis) and the remaining inequality-constrained least-distance problem
is solved by the classic reduction to nonnegative least squares, which is an
exact active-set method. A weak-duality gap certificate is recovered from
fitted multipliers: for any multipliers nu >= 0 on the outer rows with total
mass normalized to one, ||G^T nu|| upper-bounds the optimal margin.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.optimize import nnls

from .channel import ChannelRealization
from .constellation import AxisClass, ComponentClass, ConstellationSpec, classify_component

_RE, _IM = "re", "im"


class SolverStatus(Enum):
    OPTIMAL = "optimal"
    MAX_ITER = "max_iter"
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances for the CI solve.

    ``tol`` bounds the certified duality gap relative to max(1, margin);
    ``feas_tol`` bounds the constraint residuals of the returned point.
    """

    tol: float = 1e-8
    feas_tol: float = 1e-7
    certify: bool = True


@dataclass(frozen=True)
class CiInstance:
    """One symbol duration's CI problem: channel, symbols, component split."""

    channel: ChannelRealization
    symbols: np.ndarray
    classes: tuple[ComponentClass, ...]
    inner_index_set: tuple[tuple[int, str], ...]
    outer_index_set: tuple[tuple[int, str], ...]


@dataclass
class SlpSolution:
    x: np.ndarray              # (N_T,) complex precoded vector, ||x|| = 1 at optimum
    margin: float              # common scale t of the inner components
    alpha_re: np.ndarray       # per-user real-axis scale factors
    alpha_im: np.ndarray       # per-user imaginary-axis scale factors
    status: SolverStatus
    residuals: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ResidualReport:
    """Constraint residuals of a candidate solution.

    ``ball`` is the violation of the transmit-power ball (zero inside it);
    ``norm_dev`` additionally reports the distance of ||x|| from the boundary,
    where every non-degenerate optimum lies.
    """

    coupling: float      # receive sample vs stored scale factors (C1)
    outer: float         # outer factors falling below the margin (C2)
    inner: float         # inner factors deviating from the margin (C3)
    ball: float          # max(||x||^2 - 1, 0)
    norm_dev: float      # | ||x|| - 1 |
    passed: bool


def _as_channel(channel) -> ChannelRealization:
    if isinstance(channel, ChannelRealization):
        return channel
    return ChannelRealization(np.asarray(channel, dtype=complex))


def build_instance(channel, symbols, spec: ConstellationSpec) -> CiInstance:
    """Split the 2K (user, axis) components of a symbol vector into inner/outer sets."""
    channel = _as_channel(channel)
    symbols = np.asarray(symbols, dtype=complex).reshape(-1)
    if symbols.size != channel.n_users:
        raise ValueError(
            f"expected {channel.n_users} symbols, got {symbols.size}"
        )
    classes = tuple(classify_component(spec, complex(s)) for s in symbols)
    inner, outer = [], []
    for k, cls in enumerate(classes):
        (outer if cls.real_class is AxisClass.OUTER else inner).append((k, _RE))
        (outer if cls.imag_class is AxisClass.OUTER else inner).append((k, _IM))
    return CiInstance(
        channel=channel,
        symbols=symbols,
        classes=classes,
        inner_index_set=tuple(inner),
        outer_index_set=tuple(outer),
    )


def _coupling_rows(H: np.ndarray, symbols: np.ndarray) -> np.ndarray:
    """Rows mapping w = [Re x; Im x] to the 2K per-axis scale factors.

    Row 2k is the real-axis factor of user k, row 2k+1 the imaginary-axis one.
    """
    if np.any(symbols.real == 0) or np.any(symbols.imag == 0):
        raise ValueError("symbols must have nonzero real and imaginary parts")
    n_users, n_tx = H.shape
    rows = np.empty((2 * n_users, 2 * n_tx))
    re_h, im_h = H.real, H.imag
    rows[0::2, :n_tx] = re_h / symbols.real[:, None]
    rows[0::2, n_tx:] = -im_h / symbols.real[:, None]
    rows[1::2, :n_tx] = im_h / symbols.imag[:, None]
    rows[1::2, n_tx:] = re_h / symbols.imag[:, None]
    return rows


def _row_ids(index_set) -> np.ndarray:
    return np.array([2 * k + (0 if axis == _RE else 1) for k, axis in index_set], dtype=int)


def _least_norm_with_nullspace(A: np.ndarray, b: np.ndarray):
    """Least-norm solution of A w = b plus an orthonormal null-space basis.

    Returns (w0, basis, consistent); ``consistent`` is False when the system
    has no solution (rank-deficient A with incompatible right-hand side).
    """
    U, s, Vt = np.linalg.svd(A, full_matrices=True)
    if s.size:
        rank = int(np.sum(s > max(A.shape) * np.finfo(float).eps * s[0]))
    else:
        rank = 0
    coords = (U[:, :rank].T @ b) / s[:rank]
    w0 = Vt[:rank].T @ coords
    basis = Vt[rank:].T
    consistent = np.linalg.norm(A @ w0 - b) <= 1e-9 * max(1.0, np.linalg.norm(b))
    return w0, basis, consistent


def _least_distance(G: np.ndarray, h: np.ndarray):
    """min ||v|| s.t. G v >= h via the nonnegative-least-squares reduction.

    Returns None when the constraint set is empty.
    """
    n = G.shape[1]
    E = np.vstack([G.T, h[None, :]])
    f = np.zeros(n + 1)
    f[-1] = 1.0
    u, _ = nnls(E, f, maxiter=10 * max(E.shape))
    r = E @ u - f
    if abs(r[-1]) < 1e-12:
        return None
    return -r[:-1] / r[-1]


def _zero_solution(instance: CiInstance, status: SolverStatus, residuals) -> SlpSolution:
    n_users = instance.channel.n_users
    return SlpSolution(
        x=np.zeros(instance.channel.n_antennas, dtype=complex),
        margin=0.0,
        alpha_re=np.zeros(n_users),
        alpha_im=np.zeros(n_users),
        status=status,
        residuals=residuals,
    )


def _certificate(rows, inner_ids, outer_ids, w, margin):
    """Weak-duality gap from multipliers fitted to w = A^T lam + C^T mu, mu >= 0."""
    A = rows[inner_ids]
    C = rows[outer_ids]
    d = rows.shape[1]
    lam = np.zeros(0)
    mu = np.zeros(0)
    if outer_ids.size:
        if inner_ids.size:
            # project the outer columns onto the orthogonal complement of span(A^T)
            P = np.eye(d) - np.linalg.pinv(A) @ A
        else:
            P = np.eye(d)
        mu, _ = nnls(P @ C.T, P @ w, maxiter=10 * max(d, outer_ids.size))
        rhs = w - C.T @ mu
    else:
        rhs = w
    if inner_ids.size:
        lam = np.linalg.lstsq(A.T, rhs, rcond=None)[0]
        fit = A.T @ lam + (C.T @ mu if outer_ids.size else 0.0)
    else:
        fit = C.T @ mu
    stationarity = float(np.linalg.norm(w - fit))
    mass = float(lam.sum() + mu.sum())
    if mass <= 0:
        return float("inf"), stationarity
    dual_value = float(np.linalg.norm(fit) / mass)
    return max(dual_value - margin, 0.0), stationarity


def compute_alphas(channel, x: np.ndarray, symbols):
    """Per-axis scale factors realized by a transmit vector x."""
    H = _as_channel(channel).H
    symbols = np.asarray(symbols, dtype=complex).reshape(-1)
    if np.any(symbols.real == 0) or np.any(symbols.imag == 0):
        raise ValueError("symbols must have nonzero real and imaginary parts")
    y = H @ np.asarray(x, dtype=complex)
    return y.real / symbols.real, y.imag / symbols.imag


def solve_ci_max(instance: CiInstance, opts: SolverOptions | None = None) -> SlpSolution:
    """Maximize the CI margin for one symbol duration.

    Always returns a solution: for full-row-rank channels the optimum has a
    strictly positive margin and unit transmit norm; on degenerate channels
    where no positive margin is achievable the zero vector (margin 0) is
    returned with OPTIMAL status, and power allocation will reject it.
    """
    opts = opts or SolverOptions()
    H = instance.channel.H
    rows = _coupling_rows(H, instance.symbols)
    inner_ids = _row_ids(instance.inner_index_set)
    outer_ids = _row_ids(instance.outer_index_set)
    if inner_ids.size + outer_ids.size != rows.shape[0]:
        raise ValueError("inner/outer sets must partition the 2K components")

    # Row scaling for conditioning; the scaled system keeps the same geometry.
    norms = np.linalg.norm(rows, axis=1)
    if np.any(norms == 0):
        return _zero_solution(instance, SolverStatus.OPTIMAL, {"degenerate": 1.0})
    scaled = rows / norms[:, None]
    rhs = 1.0 / norms

    d = rows.shape[1]
    if inner_ids.size:
        w0, basis, consistent = _least_norm_with_nullspace(scaled[inner_ids], rhs[inner_ids])
        if not consistent:
            return _zero_solution(instance, SolverStatus.OPTIMAL, {"degenerate": 1.0})
    else:
        w0, basis = np.zeros(d), np.eye(d)

    if outer_ids.size:
        slack = rhs[outer_ids] - scaled[outer_ids] @ w0
        if basis.shape[1] == 0:
            if np.max(slack) > 1e-9:
                return _zero_solution(instance, SolverStatus.OPTIMAL, {"degenerate": 1.0})
            w = w0
        else:
            try:
                v = _least_distance(scaled[outer_ids] @ basis, slack)
            except RuntimeError as exc:  # nnls iteration cap
                return _zero_solution(
                    instance, SolverStatus.MAX_ITER, {"nnls_error": str(exc)}
                )
            if v is None:
                return _zero_solution(instance, SolverStatus.OPTIMAL, {"degenerate": 1.0})
            w = w0 + basis @ v
    else:
        w = w0

    w_norm = float(np.linalg.norm(w))
    if w_norm <= 0:
        return _zero_solution(instance, SolverStatus.OPTIMAL, {"degenerate": 1.0})

    margin = 1.0 / w_norm
    stacked = w / w_norm
    n_tx = H.shape[1]
    x = stacked[:n_tx] + 1j * stacked[n_tx:]
    alpha_re, alpha_im = compute_alphas(instance.channel, x, instance.symbols)

    alphas = np.empty(rows.shape[0])
    alphas[0::2] = alpha_re
    alphas[1::2] = alpha_im
    inner_res = float(np.max(np.abs(alphas[inner_ids] - margin))) if inner_ids.size else 0.0
    outer_res = float(np.max(np.maximum(margin - alphas[outer_ids], 0.0))) if outer_ids.size else 0.0
    norm_dev = abs(float(np.linalg.norm(x)) - 1.0)
    residuals = {"inner": inner_res, "outer": outer_res, "norm_dev": norm_dev}

    status = SolverStatus.OPTIMAL
    scale = max(1.0, margin)
    if opts.certify:
        gap, stationarity = _certificate(rows, inner_ids, outer_ids, w, margin)
        residuals["duality_gap"] = gap
        residuals["stationarity"] = stationarity
        if gap > opts.tol * scale:
            status = SolverStatus.MAX_ITER
    if max(inner_res, outer_res, norm_dev) > opts.feas_tol * scale:
        status = SolverStatus.MAX_ITER

    return SlpSolution(
        x=x,
        margin=margin,
        alpha_re=alpha_re,
        alpha_im=alpha_im,
        status=status,
        residuals=residuals,
    )


def verify_solution(instance: CiInstance, sol: SlpSolution, tol: float = 1e-6) -> ResidualReport:
    """Check a solution's constraints against its *stored* scale factors.

    Uses the stored alphas (not ones recomputed from x) so that tampering
    with x shows up as a coupling violation.
    """
    H = instance.channel.H
    y = H @ sol.x
    target = sol.alpha_re * instance.symbols.real + 1j * sol.alpha_im * instance.symbols.imag
    coupling = float(np.max(np.abs(y - target))) if y.size else 0.0

    alphas = np.empty(2 * instance.channel.n_users)
    alphas[0::2] = sol.alpha_re
    alphas[1::2] = sol.alpha_im
    inner_ids = _row_ids(instance.inner_index_set)
    outer_ids = _row_ids(instance.outer_index_set)
    inner = float(np.max(np.abs(alphas[inner_ids] - sol.margin))) if inner_ids.size else 0.0
    outer = float(np.max(np.maximum(sol.margin - alphas[outer_ids], 0.0))) if outer_ids.size else 0.0

    x_norm = float(np.linalg.norm(sol.x))
    ball = max(x_norm**2 - 1.0, 0.0)
    norm_dev = abs(x_norm - 1.0)
    passed = max(coupling, inner, outer, ball) <= tol
    return ResidualReport(
        coupling=coupling,
        outer=outer,
        inner=inner,
        ball=ball,
        norm_dev=norm_dev,
        passed=passed,
    )
