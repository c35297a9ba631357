"""Matrix pencil analysis: regularity, Wong sequences, quasi-Weierstrass form.

The decomposition splits a regular pencil (E, A) into a differential part
(dimension n_d, governed by a matrix J) and an algebraic part (dimension
n_a, governed by a nilpotent matrix N):

    S E T = blockdiag(I, N),    S A T = blockdiag(J, I).

Subspace computations use rank-revealing SVDs; all rank decisions go
through a single RankPolicy so that thresholds are tunable in one place.
Real input stays real: no complexification is ever required.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DecompositionFailure, DimensionMismatch, SingularPencil

RECONSTRUCTION_TOL = 1e-8


@dataclass(frozen=True)
class RankPolicy:
    """Thresholds for numerical rank decisions.

    A singular value sigma counts as nonzero iff
    sigma > max(abs_floor, rel_tol * sigma_max).
    """

    rel_tol: float = 1e-10
    abs_floor: float = 1e-14

    def __post_init__(self):
        if self.rel_tol < 0 or self.abs_floor < 0:
            raise ValueError("rank policy tolerances must be nonnegative")

    def threshold(self, sigma_max):
        return max(self.abs_floor, self.rel_tol * sigma_max)


DEFAULT_POLICY = RankPolicy()


@dataclass(frozen=True, eq=False)
class MatrixPencil:
    """Square matrix pencil (E, A) over the reals or complexes."""

    E: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        E = np.atleast_2d(np.asarray(self.E))
        A = np.atleast_2d(np.asarray(self.A))
        if E.ndim != 2 or E.shape[0] != E.shape[1]:
            raise DimensionMismatch("E must be square")
        if A.shape != E.shape:
            raise DimensionMismatch("A must match the shape of E")
        if E.shape[0] < 1:
            raise DimensionMismatch("pencil dimension must be at least 1")
        if np.iscomplexobj(E) or np.iscomplexobj(A):
            E = E.astype(complex)
            A = A.astype(complex)
        else:
            E = E.astype(float)
            A = A.astype(float)
        E.setflags(write=False)
        A.setflags(write=False)
        object.__setattr__(self, "E", E)
        object.__setattr__(self, "A", A)

    @property
    def n(self):
        return self.E.shape[0]

    @property
    def is_complex(self):
        return np.iscomplexobj(self.E)


@dataclass(frozen=True)
class RegularityVerdict:
    regular: bool
    witness: float | complex | None
    det_magnitude: float | None
    sample_points: tuple
    det_values: tuple

    def __bool__(self):
        return self.regular


@dataclass(frozen=True, eq=False)
class WongResult:
    V_star: np.ndarray
    W_star: np.ndarray
    rank_ambiguous: bool


@dataclass(frozen=True, eq=False)
class QuasiWeierstrassForm:
    """Decomposition data of a regular pencil.

    S E T = blockdiag(I_{n_d}, N) and S A T = blockdiag(J, I_{n_a}) hold
    within the reconstruction tolerance; N is nilpotent with index nu
    (nu = 0 exactly when n_a = 0).
    """

    S: np.ndarray
    T: np.ndarray
    J: np.ndarray
    N: np.ndarray
    n_d: int
    n_a: int
    nu: int
    rank_ambiguous: bool = field(default=False)

    def __post_init__(self):
        n = self.n_d + self.n_a
        shapes = {"S": (n, n), "T": (n, n), "J": (self.n_d, self.n_d),
                  "N": (self.n_a, self.n_a)}
        for name, shape in shapes.items():
            arr = np.asarray(getattr(self, name))
            try:
                arr = arr.reshape(shape)
            except ValueError as exc:
                raise DimensionMismatch(f"{name} must have shape {shape}") from exc
            arr = np.array(arr, dtype=complex if np.iscomplexobj(arr) else float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self):
        return self.n_d + self.n_a

    @property
    def T_inv(self):
        return np.linalg.inv(self.T)


def _orthonormal_range(M, policy, context=0.0):
    """Orthonormal basis of range(M) plus an ambiguity flag.

    Rank decisions are made relative to max(sigma_max, context), so a
    product that is numerically zero is not mistaken for a rank-one
    matrix of pure roundoff.
    """
    if M.shape[1] == 0:
        return M[:, :0], False
    U, s, _ = np.linalg.svd(M)
    if s.size == 0:
        return U[:, :0], False
    thr = policy.threshold(max(s[0], context))
    rank = int(np.sum(s > thr))
    ambiguous = bool(np.any((s > thr / 10) & (s < thr * 10)))
    return U[:, :rank], ambiguous


def _kernel(M, policy, context=0.0):
    """Orthonormal basis of ker(M) plus an ambiguity flag."""
    U, s, Vh = np.linalg.svd(M)
    if s.size == 0:
        return np.eye(M.shape[1], dtype=M.dtype), False
    thr = policy.threshold(max(s[0], context))
    rank = int(np.sum(s > thr))
    ambiguous = bool(np.any((s > thr / 10) & (s < thr * 10)))
    return Vh[rank:].conj().T, ambiguous


def _preimage(M, target_basis, policy):
    """Orthonormal basis of {x : M x in range(target_basis)}."""
    n = M.shape[0]
    Q = target_basis
    P_perp = np.eye(n, dtype=np.result_type(M.dtype, Q.dtype)) - Q @ Q.conj().T
    return _kernel(P_perp @ M, policy, context=np.linalg.norm(M, 2))


def check_regularity(pencil: MatrixPencil, policy: RankPolicy = DEFAULT_POLICY):
    """Test det(lambda E - A) != 0 at n+1 deterministic sample points.

    The sample points are lambda_j = j * s for j = 0..n with the scale
    s = (1 + ||A||) / (1 + ||E||).  Since det(lambda E - A) is a
    polynomial of degree at most n, a regular pencil passes at one of
    the n+1 points in exact arithmetic.  Nonsingularity of each sample
    matrix is decided by the rank policy (scale invariant); the reported
    determinant magnitude is informational.
    """
    E, A, n = pencil.E, pencil.A, pencil.n
    s = (1.0 + np.linalg.norm(A, 2)) / (1.0 + np.linalg.norm(E, 2))
    samples = []
    dets = []
    witness = None
    witness_det = None
    for j in range(n + 1):
        lam = j * s
        M = lam * E - A
        sig = np.linalg.svd(M, compute_uv=False)
        det_mag = float(np.abs(np.linalg.det(M)))
        samples.append(lam)
        dets.append(det_mag)
        if witness is None and sig[-1] > policy.threshold(sig[0] if sig[0] > 0 else 1.0):
            witness = lam
            witness_det = det_mag
    return RegularityVerdict(
        regular=witness is not None,
        witness=witness,
        det_magnitude=witness_det,
        sample_points=tuple(samples),
        det_values=tuple(dets),
    )


def wong_sequences(pencil: MatrixPencil, policy: RankPolicy = DEFAULT_POLICY):
    """Limits of the Wong subspace sequences of a regular pencil.

    V_0 = F^n,  V_{i+1} = preimage under A of (E V_i)   (decreasing),
    W_0 = {0},  W_{i+1} = preimage under E of (A W_i)   (increasing).

    Returns orthonormal bases of the limits; dim V* = n_d, dim W* = n_a
    and V* + W* spans F^n for regular pencils.
    """
    verdict = check_regularity(pencil, policy)
    if not verdict.regular:
        raise SingularPencil("pencil is singular; Wong sequences are not reliable")
    E, A, n = pencil.E, pencil.A, pencil.n
    ambiguous = False

    norm_E = np.linalg.norm(E, 2)
    norm_A = np.linalg.norm(A, 2)

    V = np.eye(n, dtype=E.dtype)
    for _ in range(n + 1):
        EV, amb1 = _orthonormal_range(E @ V, policy, context=norm_E)
        V_next, amb2 = _preimage(A, EV, policy)
        ambiguous = ambiguous or amb1 or amb2
        if V_next.shape[1] == V.shape[1]:
            V = V_next
            break
        V = V_next

    W = np.zeros((n, 0), dtype=E.dtype)
    for _ in range(n + 1):
        AW, amb1 = _orthonormal_range(A @ W, policy, context=norm_A)
        W_next, amb2 = _preimage(E, AW, policy)
        ambiguous = ambiguous or amb1 or amb2
        if W_next.shape[1] == W.shape[1]:
            W = W_next
            break
        W = W_next

    if V.shape[1] + W.shape[1] != n:
        raise DecompositionFailure(
            f"Wong subspace dimensions {V.shape[1]} + {W.shape[1]} != {n}; "
            "rank thresholds likely misjudged, consider tightening the policy"
        )
    return WongResult(V_star=V, W_star=W, rank_ambiguous=ambiguous)


def nilpotency_index(Nmat, policy: RankPolicy = DEFAULT_POLICY):
    """Smallest k with ||N^k|| below threshold, or (False, None).

    The threshold for declaring N^k numerically zero is
    rel_tol * (1 + ||N||^k), with ||.|| the spectral norm.  An m x m
    matrix is nilpotent iff N^m = 0, so at most m powers are formed;
    the empty 0 x 0 matrix has index 0.
    """
    N = np.atleast_2d(np.asarray(Nmat))
    if N.size == 0:
        return True, 0
    if N.shape[0] != N.shape[1]:
        raise DimensionMismatch("nilpotency test needs a square matrix")
    m = N.shape[0]
    norm_N = np.linalg.norm(N, 2)
    power = np.eye(m, dtype=N.dtype)
    for k in range(m + 1):
        if np.linalg.norm(power, 2) <= policy.rel_tol * (1.0 + norm_N**k):
            return True, k
        power = power @ N
    return False, None


def compute_qwf(pencil: MatrixPencil, policy: RankPolicy = DEFAULT_POLICY):
    """Quasi-Weierstrass decomposition of a regular pencil.

    With V*, W* the Wong limits, T = [V* W*] and S = [E V*, A W*]^{-1}
    give S E T = blockdiag(I, N) and S A T = blockdiag(J, I).  The
    off-diagonal blocks of both products are checked against the
    reconstruction tolerance and the nilpotency of N is verified.
    """
    wong = wong_sequences(pencil, policy)
    E, A, n = pencil.E, pencil.A, pencil.n
    V, W = wong.V_star, wong.W_star
    n_d = V.shape[1]
    n_a = W.shape[1]

    T = np.hstack([V, W])
    S_inv = np.hstack([E @ V, A @ W])
    sig = np.linalg.svd(S_inv, compute_uv=False)
    if sig.size == 0 or sig[-1] <= policy.threshold(sig[0]):
        raise DecompositionFailure(
            "[E V*, A W*] is numerically singular; rank thresholds likely "
            "misjudged, consider tightening the policy"
        )
    S = np.linalg.inv(S_inv)

    SET = S @ E @ T
    SAT = S @ A @ T
    scale = 1.0 + np.linalg.norm(E, 2) + np.linalg.norm(A, 2)
    tol = RECONSTRUCTION_TOL * scale
    defects = [
        SET[:n_d, n_d:], SET[n_d:, :n_d],
        SAT[:n_d, n_d:], SAT[n_d:, :n_d],
        SET[:n_d, :n_d] - np.eye(n_d), SAT[n_d:, n_d:] - np.eye(n_a),
    ]
    worst = max((np.linalg.norm(d, 2) for d in defects if d.size), default=0.0)
    if worst > tol:
        raise DecompositionFailure(
            f"block structure defect {worst:.3e} exceeds tolerance {tol:.3e}"
        )

    J = SAT[:n_d, :n_d]
    N = SET[n_d:, n_d:]
    if n_a == 0:
        nu = 0
    else:
        nilpotent, nu = nilpotency_index(N, policy)
        if not nilpotent:
            raise DecompositionFailure(
                "algebraic block N is not numerically nilpotent; "
                "rank thresholds likely misjudged"
            )
    return QuasiWeierstrassForm(
        S=S, T=T, J=J, N=N, n_d=n_d, n_a=n_a, nu=nu,
        rank_ambiguous=wong.rank_ambiguous,
    )
