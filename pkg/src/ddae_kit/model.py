"""Problem container and the derived coefficient matrices of the split system.

Given a regular pencil with decomposition S E T = blockdiag(I, N),
S A T = blockdiag(J, I), the delayed system

    E x'(t) = A x(t) + D x(t - tau) + f(t)

splits into a slow ODE part and a fast algebraic part.  This module owns
every matrix derived from that split (projector pair, the C_k chain, the
delay blocks) together with the transformed data functions, and provides
the pointwise machinery used by the history checks and the stepping
solver: Taylor data of a segment solution at an endpoint, computed by
exact recursion instead of numerical differentiation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DimensionMismatch
from .pencil import (
    DEFAULT_POLICY,
    MatrixPencil,
    QuasiWeierstrassForm,
    RankPolicy,
    check_regularity,
    compute_qwf,
    nilpotency_index,
)
from .piecewise import PiecewisePolynomial

_DOMAIN_RTOL = 1e-9


@dataclass(frozen=True, eq=False)
class DdaeSystem:
    """The delayed initial value problem on [0, M*tau].

    Fields:
        E, A, D: n x n coefficient matrices ((E, A) must be regular).
        tau: positive delay.
        horizon_intervals: number M of delay intervals to solve.
        f: inhomogeneity on [0, M*tau].
        phi: history function on [-tau, 0].
    """

    E: np.ndarray
    A: np.ndarray
    D: np.ndarray
    tau: float
    horizon_intervals: int
    f: PiecewisePolynomial
    phi: PiecewisePolynomial
    policy: RankPolicy = field(default=DEFAULT_POLICY)

    def __post_init__(self):
        pencil = MatrixPencil(self.E, self.A)
        object.__setattr__(self, "E", pencil.E)
        object.__setattr__(self, "A", pencil.A)
        D = np.atleast_2d(np.asarray(self.D))
        if D.shape != pencil.E.shape:
            raise DimensionMismatch("D must match the shape of E")
        D = np.array(D, dtype=complex if np.iscomplexobj(D) else float)
        D.setflags(write=False)
        object.__setattr__(self, "D", D)
        if not self.tau > 0:
            raise DimensionMismatch("tau must be positive")
        if self.horizon_intervals < 1:
            raise DimensionMismatch("horizon_intervals must be at least 1")
        verdict = check_regularity(pencil, self.policy)
        if not verdict.regular:
            from .errors import SingularPencil

            raise SingularPencil("the pencil (E, A) is singular")
        object.__setattr__(self, "_regularity", verdict)
        n = pencil.n
        if self.f.n != n or self.phi.n != n:
            raise DimensionMismatch("data functions must have value dimension n")
        tol = _DOMAIN_RTOL * max(1.0, self.horizon_intervals * self.tau)
        if abs(self.phi.start + self.tau) > tol or abs(self.phi.end) > tol:
            raise DimensionMismatch("phi must be defined exactly on [-tau, 0]")
        if (
            abs(self.f.start) > tol
            or abs(self.f.end - self.horizon_intervals * self.tau) > tol
        ):
            raise DimensionMismatch("f must be defined exactly on [0, M*tau]")

    @property
    def n(self):
        return self.E.shape[0]

    @property
    def pencil(self):
        return MatrixPencil(self.E, self.A)

    @property
    def regularity(self):
        return self._regularity

    @property
    def t_final(self):
        return self.horizon_intervals * self.tau

    @property
    def is_complex(self):
        return (
            np.iscomplexobj(self.E)
            or np.iscomplexobj(self.D)
            or self.f.is_complex
            or self.phi.is_complex
        )


@dataclass(frozen=True, eq=False)
class SplitCoefficients:
    """Everything derived from the quasi-Weierstrass split of one system.

    The C_k chain drives the inherent ODE x' = A_diff x + sum C_k q^{(k)};
    B_k = C_k D are its delayed counterparts.  The blocks of S D T couple
    slow and fast parts of the delayed argument; g, h, psi, eta are the
    transformed inhomogeneity and history ([g; h] = S f, [psi; eta] =
    T^{-1} phi, so that T [psi; eta] reproduces phi exactly).
    """

    qwf: QuasiWeierstrassForm
    E: np.ndarray
    A: np.ndarray
    D: np.ndarray
    A_diff: np.ndarray
    A_con: np.ndarray
    C: tuple
    B: tuple
    B_d: np.ndarray
    B_a: np.ndarray
    B_d1: np.ndarray
    B_d2: np.ndarray
    B_a1: np.ndarray
    B_a2: np.ndarray
    g: PiecewisePolynomial | None = None
    h: PiecewisePolynomial | None = None
    psi: PiecewisePolynomial | None = None
    eta: PiecewisePolynomial | None = None

    @property
    def n(self):
        return self.qwf.n

    @property
    def nu(self):
        return self.qwf.nu

    @property
    def n_d(self):
        return self.qwf.n_d

    @property
    def n_a(self):
        return self.qwf.n_a


def split_matrices(qwf: QuasiWeierstrassForm, E, A, D) -> SplitCoefficients:
    """Derived matrices of the split system (no data functions attached)."""
    n_d, n_a, nu = qwf.n_d, qwf.n_a, qwf.nu
    S, T, J, N = qwf.S, qwf.T, qwf.J, qwf.N
    n = n_d + n_a
    T_inv = np.linalg.inv(T)

    P_d = np.zeros((n, n), dtype=T.dtype)
    P_d[:n_d, :n_d] = np.eye(n_d)
    J_big = np.zeros((n, n), dtype=np.result_type(T.dtype, J.dtype))
    J_big[:n_d, :n_d] = J

    A_diff = T @ J_big @ T_inv
    A_con = T @ P_d @ T_inv

    C_list = [T @ P_d @ S]
    N_pow = np.eye(n_a, dtype=N.dtype)
    for _ in range(1, nu + 1):
        blk = np.zeros((n, n), dtype=np.result_type(T.dtype, N.dtype))
        blk[n_d:, n_d:] = N_pow
        C_list.append(-(T @ blk @ S))
        N_pow = N_pow @ N

    D = np.asarray(D)
    B_list = [Ck @ D for Ck in C_list]
    SD = S @ D
    SDT = SD @ T
    return SplitCoefficients(
        qwf=qwf,
        E=np.asarray(E),
        A=np.asarray(A),
        D=D,
        A_diff=A_diff,
        A_con=A_con,
        C=tuple(C_list),
        B=tuple(B_list),
        B_d=SD[:n_d, :],
        B_a=SD[n_d:, :],
        B_d1=SDT[:n_d, :n_d],
        B_d2=SDT[:n_d, n_d:],
        B_a1=SDT[n_d:, :n_d],
        B_a2=SDT[n_d:, n_d:],
    )


def build_split(
    sys: DdaeSystem,
    policy: RankPolicy | None = None,
    qwf: QuasiWeierstrassForm | None = None,
) -> SplitCoefficients:
    """Full split of a system, including transformed data functions.

    A precomputed decomposition may be passed in (useful when a specific
    choice of S, T should be pinned); otherwise it is computed from the
    Wong sequences under the given rank policy.
    """
    policy = policy or sys.policy
    if qwf is None:
        qwf = compute_qwf(sys.pencil, policy)
    core = split_matrices(qwf, sys.E, sys.A, sys.D)
    n_d = qwf.n_d
    Sf = sys.f.apply_matrix(qwf.S)
    Tinv_phi = sys.phi.apply_matrix(np.linalg.inv(qwf.T))
    return replace(
        core,
        g=Sf.components(range(n_d)),
        h=Sf.components(range(n_d, qwf.n)),
        psi=Tinv_phi.components(range(n_d)),
        eta=Tinv_phi.components(range(n_d, qwf.n)),
    )


def underlying_ode_rhs(split: SplitCoefficients, q: PiecewisePolynomial):
    """Forcing of the inherent ODE for a segment inhomogeneity q.

    Returns (A_diff, forcing) where forcing(t) = sum_k C_k q^{(k)}(t) as
    an exact piecewise polynomial; the segment solution then satisfies
    x' = A_diff x + forcing.
    """
    forcing = q.apply_matrix(split.C[0])
    for k in range(1, split.nu + 1):
        forcing = forcing + q.derivative(k).apply_matrix(split.C[k])
    return split.A_diff, forcing


def underlying_dde_coeffs(split: SplitCoefficients):
    """Coefficient chains (B_k, C_k) of the delayed inherent ODE."""
    return list(split.B), list(split.C)


def fast_subsystem_solution(N, q_f: PiecewisePolynomial, nu=None, policy=DEFAULT_POLICY):
    """Exact solution w = -sum_{k<nu} N^k q_f^{(k)} of N w' = w + q_f.

    q_f must be piecewise polynomial; the result is again piecewise
    polynomial with the same breakpoints.  Raises if N is not nilpotent.
    """
    N = np.atleast_2d(np.asarray(N)) if np.size(N) else np.zeros((0, 0))
    if nu is None:
        nilpotent, nu = nilpotency_index(N, policy)
        if not nilpotent:
            raise DimensionMismatch("fast subsystem requires a nilpotent N")
    m = N.shape[0]
    if m == 0:
        return PiecewisePolynomial.zero(0, q_f.start, q_f.end)
    w = q_f.apply_matrix(-np.eye(m, dtype=N.dtype))
    N_pow = np.array(N)
    for k in range(1, nu):
        w = w + q_f.derivative(k).apply_matrix(-N_pow)
        N_pow = N_pow @ N
    return w


def solution_taylor(split: SplitCoefficients, x_request, q_derivs, orders):
    """Taylor data of the segment solution at an endpoint.

    Arguments:
        x_request: requested state value at the endpoint (the attained
            value is its consistent projection).
        q_derivs: array (K+1, n) of inhomogeneity derivatives at the
            endpoint with K >= orders + nu.
        orders: highest solution derivative to produce.

    Returns (xs, residual) where xs has shape (orders+1, n) with
    xs[j] = x^{(j)} at the endpoint and residual is the consistency
    defect ||x_request - xs[0]||.
    """
    nu = split.nu
    q_derivs = np.asarray(q_derivs)
    if q_derivs.shape[0] < max(nu, orders + nu):
        raise DimensionMismatch(
            f"need {max(nu, orders + nu)} inhomogeneity derivatives, "
            f"got {q_derivs.shape[0]}"
        )
    x0 = split.A_con @ x_request
    for k in range(1, nu + 1):
        x0 = x0 + split.C[k] @ q_derivs[k - 1]
    residual = float(np.linalg.norm(x_request - x0))
    xs = [x0]
    for j in range(orders):
        nxt = split.A_diff @ xs[j]
        for k in range(nu + 1):
            nxt = nxt + split.C[k] @ q_derivs[k + j]
        xs.append(nxt)
    return np.stack(xs), residual


def solution_taylor_from_value(split: SplitCoefficients, x_value, q_derivs, orders):
    """Like solution_taylor but trusts x_value as the order-0 entry."""
    nu = split.nu
    q_derivs = np.asarray(q_derivs)
    if q_derivs.shape[0] < orders + nu:
        raise DimensionMismatch(
            f"need {orders + nu} inhomogeneity derivatives, got {q_derivs.shape[0]}"
        )
    xs = [np.asarray(x_value)]
    for j in range(orders):
        nxt = split.A_diff @ xs[j]
        for k in range(nu + 1):
            nxt = nxt + split.C[k] @ q_derivs[k + j]
        xs.append(nxt)
    return np.stack(xs)


def history_segment(sys: DdaeSystem) -> PiecewisePolynomial:
    """The history shifted to segment-local time: x0(t) = phi(t - tau)."""
    return sys.phi.shift(sys.tau)


def segment_window(pp: PiecewisePolynomial, i: int, tau: float) -> PiecewisePolynomial:
    """Restriction of a function on [0, M tau] to segment i in local time."""
    return pp.restrict((i - 1) * tau, i * tau).shift(-(i - 1) * tau)
