"""History admissibility, splicing conditions, and probe construction.

The solution of the first segment is pinned down by the history's
derivative data at -tau (through the algebraic part) and by its value at
0 (through the differential part).  Admissibility asks that the history
endpoint is a consistent initial value; the splicing conditions ask that
the transition from history to solution is C^1 respectively C^2.  The
probe constructor inverts this logic: it builds a history whose
transition is smooth up to a requested order and then misses by a
prescribed vector, which turns the worst-case statements of the
classification into observable solver behavior.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .model import DdaeSystem, SplitCoefficients, solution_taylor
from .pencil import DEFAULT_POLICY, RankPolicy

FLAG_TOL = 1e-8


@dataclass(frozen=True)
class SplicingReport:
    """Residuals of the admissibility / splicing checks for one history.

    kappa_observed is the largest order (capped at nu+2) up to which the
    history derivatives at 0 agree with the solution's one-sided
    derivatives; -1 when even the values disagree.
    """

    admissible: bool
    admissible_residual: float
    smooth_c1: bool
    smooth_c1_residual: float
    smooth_c2: bool
    smooth_c2_residual: float
    kappa_observed: int


@dataclass(frozen=True)
class Index3Report:
    applicable: bool
    index_le_3: bool
    N_Ba2_zero: bool
    N2_Ba1_Bd2_zero: bool
    norm_N_Ba2: float
    norm_N2_Ba1_Bd2: float


def first_segment_q_derivs(sys: DdaeSystem, orders: int):
    """Derivatives of q = D phi(. - tau) + f at the left segment end."""
    phi_d = sys.phi.derivatives(-sys.tau, orders, side="right")
    f_d = sys.f.derivatives(0.0, orders, side="right")
    return phi_d @ sys.D.T + f_d


def _scale_of(*vecs):
    return 1.0 + max((float(np.linalg.norm(v)) for v in vecs), default=0.0)


def check_admissible(sys: DdaeSystem, split: SplitCoefficients):
    """Residual between phi(0) and its consistent projection.

    The history endpoint is consistent iff it equals
    A_con phi(0) + sum_{k=1}^{nu} C_k q^{(k-1)}(0) with
    q = D phi(. - tau) + f.
    """
    nu = split.nu
    q = first_segment_q_derivs(sys, max(nu, 1))
    phi0 = sys.phi.evaluate(0.0, side="left")
    xs, residual = solution_taylor(split, phi0, q, 0)
    scale = _scale_of(phi0, xs[0], *q)
    return residual <= FLAG_TOL * scale, residual


def check_smoothness_condition(sys: DdaeSystem, split: SplitCoefficients):
    """Residual of the C^1 transition condition at t = 0.

    phi'(0) must equal A_diff phi(0)
    + sum_{k=0}^{nu} (B_k phi^{(k)}(-tau) + C_k f^{(k)}(0)).
    """
    nu = split.nu
    phi_tau = sys.phi.derivatives(-sys.tau, nu, side="right")
    f0 = sys.f.derivatives(0.0, nu, side="right")
    rhs = split.A_diff @ sys.phi.evaluate(0.0, side="left")
    for k in range(nu + 1):
        rhs = rhs + split.B[k] @ phi_tau[k] + split.C[k] @ f0[k]
    lhs = sys.phi.evaluate(0.0, order=1, side="left")
    residual = float(np.linalg.norm(lhs - rhs))
    scale = _scale_of(lhs, rhs, *phi_tau, *f0)
    return residual <= FLAG_TOL * scale, residual


def check_second_splicing(sys: DdaeSystem, split: SplitCoefficients):
    """Residual of the C^2 transition condition at t = 0.

    phi''(0) must equal A_diff phi'(0)
    + sum_{k=0}^{nu} (B_k phi^{(k+1)}(-tau) + C_k f^{(k+1)}(0)).
    """
    nu = split.nu
    phi_tau = sys.phi.derivatives(-sys.tau, nu + 1, side="right")
    f0 = sys.f.derivatives(0.0, nu + 1, side="right")
    rhs = split.A_diff @ sys.phi.evaluate(0.0, order=1, side="left")
    for k in range(nu + 1):
        rhs = rhs + split.B[k] @ phi_tau[k + 1] + split.C[k] @ f0[k + 1]
    lhs = sys.phi.evaluate(0.0, order=2, side="left")
    residual = float(np.linalg.norm(lhs - rhs))
    scale = _scale_of(lhs, rhs, *phi_tau, *f0)
    return residual <= FLAG_TOL * scale, residual


def observed_kappa(sys: DdaeSystem, split: SplitCoefficients, cap=None):
    """Largest order up to which history and solution derivatives agree."""
    nu = split.nu
    cap = nu + 2 if cap is None else cap
    q = first_segment_q_derivs(sys, cap + max(nu, 1))
    phi0 = sys.phi.evaluate(0.0, side="left")
    xs, _ = solution_taylor(split, phi0, q, cap)
    kappa = -1
    for j in range(cap + 1):
        left = sys.phi.evaluate(0.0, order=j, side="left")
        scale = _scale_of(left, xs[j])
        if np.linalg.norm(left - xs[j]) <= FLAG_TOL * scale:
            kappa = j
        else:
            break
    return kappa


def splicing_report(sys: DdaeSystem, split: SplitCoefficients) -> SplicingReport:
    adm, adm_res = check_admissible(sys, split)
    c1, c1_res = check_smoothness_condition(sys, split)
    c2, c2_res = check_second_splicing(sys, split)
    return SplicingReport(
        admissible=adm,
        admissible_residual=adm_res,
        smooth_c1=c1,
        smooth_c1_residual=c1_res,
        smooth_c2=c2,
        smooth_c2_residual=c2_res,
        kappa_observed=observed_kappa(sys, split),
    )


def check_index3_uniqueness(
    split: SplitCoefficients, policy: RankPolicy = DEFAULT_POLICY
) -> Index3Report:
    """Sufficient conditions for global unique solvability up to index 3.

    When the index is at most 3, N B_a2 = 0 and N^2 B_a1 B_d2 = 0, every
    admissible history meeting both splicing conditions yields a unique
    solution on the whole horizon, so the solver may proceed past
    de-smoothing warnings.
    """
    N = split.qwf.N
    index_ok = split.nu <= 3
    M1 = N @ split.B_a2 if N.size and split.B_a2.size else np.zeros((0, 0))
    M2 = (
        N @ N @ split.B_a1 @ split.B_d2
        if N.size and split.B_a1.size and split.B_d2.size
        else np.zeros((0, 0))
    )
    n1 = float(np.linalg.norm(M1, 2)) if M1.size else 0.0
    n2 = float(np.linalg.norm(M2, 2)) if M2.size else 0.0
    scale1 = (np.linalg.norm(N, 2) if N.size else 0.0) * (
        np.linalg.norm(split.B_a2, 2) if split.B_a2.size else 0.0
    )
    scale2 = (np.linalg.norm(N, 2) ** 2 if N.size else 0.0) * (
        np.linalg.norm(split.B_a1, 2) if split.B_a1.size else 0.0
    ) * (np.linalg.norm(split.B_d2, 2) if split.B_d2.size else 0.0)
    z1 = n1 <= max(policy.abs_floor, policy.rel_tol * (1.0 + scale1))
    z2 = n2 <= max(policy.abs_floor, policy.rel_tol * (1.0 + scale2))
    return Index3Report(
        applicable=bool(index_ok and z1 and z2),
        index_le_3=bool(index_ok),
        N_Ba2_zero=bool(z1),
        N2_Ba1_Bd2_zero=bool(z2),
        norm_N_Ba2=n1,
        norm_N2_Ba1_Bd2=n2,
    )


def _hermite_two_point(vals_left, vals_right, length):
    """Polynomial (monomial coeffs in u = t - left end) with prescribed
    derivatives at both ends: p^{(j)}(0) = vals_left[j],
    p^{(j)}(length) = vals_right[j]."""
    K = vals_left.shape[0] - 1
    width = vals_left.shape[1]
    dtype = np.result_type(vals_left.dtype, vals_right.dtype, float)
    coeffs = np.zeros((2 * K + 2, width), dtype=dtype)
    fact = 1.0
    for k in range(K + 1):
        if k > 0:
            fact *= k
        coeffs[k] = vals_left[k] / fact
    A = np.zeros((K + 1, K + 1))
    rhs = np.array(vals_right, dtype=dtype)
    for j in range(K + 1):
        for k in range(j, K + 1):
            falling = 1.0
            for i in range(j):
                falling *= k - i
            rhs[j] = rhs[j] - falling * length ** (k - j) * coeffs[k]
        for col, k in enumerate(range(K + 1, 2 * K + 2)):
            falling = 1.0
            for i in range(j):
                falling *= k - i
            A[j, col] = falling * length ** (k - j)
    coeffs[K + 1 :] = np.linalg.solve(A, rhs)
    return coeffs


def construct_probe_history(
    split: SplitCoefficients,
    m: int,
    target,
    side: str = "slow",
    rng: np.random.Generator | None = None,
):
    """History whose transition to the solution first breaks at order m.

    Builds an analytic (single polynomial piece) history on [-tau, 0]
    such that the transformed history derivatives match the first
    segment's solution derivatives up to order m-1 on the chosen side
    and miss by exactly `target` at order m; the other side matches
    through order m.  Free derivative values are zero unless an rng is
    supplied.  Requires m >= 1 and m + index <= 10 (Hermite
    conditioning).
    """
    from .piecewise import PiecewisePolynomial

    if split.g is None or split.h is None:
        raise DimensionMismatch("split must carry transformed data functions")
    nu, n_d, n_a = split.nu, split.n_d, split.n_a
    if m < 1:
        raise ValueError("probe order m must be at least 1")
    if m + nu > 10:
        raise ValueError("m + index > 10: Hermite conditioning not acceptable")
    if side == "slow" and n_d == 0:
        raise DimensionMismatch("system has no differential part")
    if side == "fast" and n_a == 0:
        raise DimensionMismatch("system has no algebraic part")
    target = np.atleast_1d(np.asarray(target))
    want = n_d if side == "slow" else n_a
    if target.shape != (want,):
        raise DimensionMismatch(f"target must be a vector of length {want}")

    tau = -split.psi.start if split.psi is not None else None
    if tau is None:
        raise DimensionMismatch("split must carry transformed history domain")
    K = nu + m
    dtype = complex if (
        np.iscomplexobj(split.qwf.T) or np.iscomplexobj(target)
    ) else float
    if rng is None:
        psi_tau = np.zeros((K + 1, n_d), dtype=dtype)
        eta_tau = np.zeros((K + 1, n_a), dtype=dtype)
        psi0_free = np.zeros(n_d, dtype=dtype)
    else:
        psi_tau = rng.standard_normal((K + 1, n_d)).astype(dtype)
        eta_tau = rng.standard_normal((K + 1, n_a)).astype(dtype)
        psi0_free = rng.standard_normal(n_d).astype(dtype)

    g0 = split.g.derivatives(0.0, K, side="right")
    h0 = split.h.derivatives(0.0, K, side="right")
    N, J = split.qwf.N, split.qwf.J
    B_d1, B_d2 = split.B_d1, split.B_d2
    B_a1, B_a2 = split.B_a1, split.B_a2

    # fast-part solution derivatives at 0+, fixed by the data at -tau
    W = np.zeros((m + 1, n_a), dtype=dtype)
    for j in range(m + 1):
        acc = np.zeros(n_a, dtype=dtype)
        N_pow = np.eye(n_a, dtype=dtype)
        for k in range(nu):
            acc = acc + N_pow @ (
                B_a1 @ psi_tau[k + j] + B_a2 @ eta_tau[k + j] + h0[k + j]
            )
            N_pow = N_pow @ N
        W[j] = -acc

    def slow_step(j, psi0_j):
        return J @ psi0_j + B_d1 @ psi_tau[j] + B_d2 @ eta_tau[j] + g0[j]

    psi0 = np.zeros((K + 1, n_d), dtype=dtype)
    eta0 = np.zeros((K + 1, n_a), dtype=dtype)
    psi0[0] = psi0_free
    if side == "slow":
        eta0[: m + 1] = W
        for j in range(m - 1):
            psi0[j + 1] = slow_step(j, psi0[j])
        psi0[m] = slow_step(m - 1, psi0[m - 1]) + target
    else:
        for j in range(m):
            psi0[j + 1] = slow_step(j, psi0[j])
        eta0[:m] = W[:m]
        eta0[m] = W[m] + target

    vals_left = np.hstack([psi_tau, eta_tau])
    vals_right = np.hstack([psi0, eta0])
    coeffs = _hermite_two_point(vals_left, vals_right, tau)
    phi = PiecewisePolynomial.from_single(coeffs, -tau, 0.0)
    return phi.apply_matrix(split.qwf.T)
