"""Characteristic roots and the exponential-stability verdict.

Roots of det(lambda E - A - exp(-lambda tau) D) are located by Newton's
method seeded at the local minima of the determinant magnitude on a
rectangular grid.  The Newton step needs only the logarithmic derivative
trace(M^{-1} M'), which keeps the iteration well scaled even when the
determinant itself spans many orders of magnitude.

The stability verdict is gated by the propagation classification: for
de-smoothing systems a negative spectral abscissa does not imply
exponential stability, so the assessment refuses to conclude.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .classify import PropagationKind, classify_propagation
from .errors import DimensionMismatch
from .model import DdaeSystem, SplitCoefficients
from .pencil import DEFAULT_POLICY, RankPolicy

RESIDUAL_TOL = 1e-8
DEDUP_RADIUS = 1e-6
NEWTON_MAX_ITER = 80


class StabilityVerdict(enum.Enum):
    STABLE = "stable"
    UNSTABLE = "unstable"
    MARGINAL = "marginal"
    INCONCLUSIVE_DE_SMOOTHING = "inconclusive_de_smoothing"
    INCONCLUSIVE_BOX = "inconclusive_box"


@dataclass(frozen=True)
class SearchBox:
    re_min: float
    re_max: float
    im_max: float

    def __post_init__(self):
        if not (self.re_max > self.re_min and self.im_max > 0):
            raise DimensionMismatch("invalid search box")


@dataclass(eq=False)
class StabilityReport:
    """Root search outcome plus the classification gate (set by assess).

    alpha is the largest real part over the verified roots; box_limited
    flags a root within two grid cells of the right box edge, i.e. the
    search window may truncate the relevant root set.  Every reported
    root satisfies |det(lambda E - A - e^{-lambda tau} D)| <=
    1e-8 * max(1, ||M||)^n.
    """

    alpha: float | None
    rightmost_roots: list
    box: SearchBox
    grid: tuple
    box_limited: bool
    no_roots: bool
    gate: str | None = field(default=None)


def _char_factory(E, A, D, tau):
    E = np.asarray(E)
    A = np.asarray(A)
    D = np.asarray(D)
    n = E.shape[0]

    def value_and_logderiv(lam):
        M = lam * E - A - np.exp(-lam * tau) * D
        Mp = E + tau * np.exp(-lam * tau) * D
        det = complex(np.linalg.det(M))
        try:
            logderiv = complex(np.trace(np.linalg.solve(M, Mp)))
        except np.linalg.LinAlgError:
            logderiv = None
        return det, logderiv, M

    return value_and_logderiv, n


def char_function(sys: DdaeSystem, lam):
    """Characteristic value h(lambda) and its derivative dh/dlambda.

    Computed via a pivoted factorization; the derivative uses
    h' = h * trace(M^{-1} M') with M' = E + tau e^{-lambda tau} D.
    At an exactly singular M the value is 0 (a root) and the derivative
    is reported as None.
    """
    fn, _ = _char_factory(sys.E, sys.A, sys.D, sys.tau)
    det, logderiv, _ = fn(complex(lam))
    if logderiv is None:
        return det, None
    return det, det * logderiv


def default_box(E, A, D, tau):
    s = (1.0 + np.linalg.norm(A, 2) + np.linalg.norm(D, 2)) / (
        1.0 + np.linalg.norm(E, 2)
    )
    return SearchBox(re_min=-10.0 * s, re_max=5.0 * s, im_max=20.0 * np.pi / tau)


def _local_minima(mag):
    """Indices (i, j) whose magnitude is minimal within its 3x3 block."""
    g_re, g_im = mag.shape
    out = []
    for i in range(g_re):
        for j in range(g_im):
            m = mag[i, j]
            lo_i, hi_i = max(i - 1, 0), min(i + 2, g_re)
            lo_j, hi_j = max(j - 1, 0), min(j + 2, g_im)
            if m <= mag[lo_i:hi_i, lo_j:hi_j].min():
                out.append((i, j))
    return out


def spectral_abscissa_matrices(
    E, A, D, tau, box: SearchBox | None = None, grid=80
) -> StabilityReport:
    """Grid-seeded Newton root search for arbitrary coefficient matrices."""
    fn, n = _char_factory(E, A, D, tau)
    if box is None:
        box = default_box(E, A, D, tau)
    if np.isscalar(grid):
        grid = (int(grid), int(grid))
    g_re, g_im = grid
    real_data = not (
        np.iscomplexobj(np.asarray(E))
        or np.iscomplexobj(np.asarray(A))
        or np.iscomplexobj(np.asarray(D))
    )
    im_min = 0.0 if real_data else -box.im_max
    res = np.linspace(box.re_min, box.re_max, g_re)
    ims = np.linspace(im_min, box.im_max, g_im)
    cell_re = (box.re_max - box.re_min) / max(g_re - 1, 1)
    cell_im = (box.im_max - im_min) / max(g_im - 1, 1)

    mag = np.empty((g_re, g_im))
    for i, x in enumerate(res):
        for j, y in enumerate(ims):
            mag[i, j] = abs(fn(complex(x, y))[0])

    pad_re, pad_im = 2 * cell_re, 2 * cell_im
    candidates = []
    for i, j in _local_minima(mag):
        lam = complex(res[i], ims[j])
        for _ in range(NEWTON_MAX_ITER):
            det, logderiv, _ = fn(lam)
            if logderiv is None or det == 0.0:
                break
            if abs(logderiv) == 0.0 or not np.isfinite(abs(logderiv)):
                break
            step = 1.0 / logderiv
            lam = lam - step
            if abs(step) <= 1e-13 * (1.0 + abs(lam)):
                break
        if real_data and -pad_im <= lam.imag < 0.0:
            lam = lam.conjugate()
        if not (
            box.re_min - pad_re <= lam.real <= box.re_max + pad_re
            and im_min - pad_im <= lam.imag <= box.im_max + pad_im
        ):
            continue
        det, _, M = fn(lam)
        scale = max(1.0, float(np.linalg.norm(M, 2))) ** n
        if abs(det) <= RESIDUAL_TOL * scale:
            candidates.append((lam, abs(det)))

    candidates.sort(key=lambda c: (c[0].real, c[0].imag))
    roots = []
    for lam, r in candidates:
        if roots and abs(lam - roots[-1][0]) <= DEDUP_RADIUS * (1.0 + abs(lam)):
            if r < roots[-1][1]:
                roots[-1] = (lam, r)
            continue
        roots.append((lam, r))
    roots.sort(key=lambda c: (-c[0].real, c[0].imag))

    if not roots:
        return StabilityReport(
            alpha=None, rightmost_roots=[], box=box, grid=(g_re, g_im),
            box_limited=False, no_roots=True,
        )
    alpha = roots[0][0].real
    # only the right edge can hide a larger real part; vertical root
    # chains make top-edge proximity unavoidable for any delay system
    box_limited = any(lam.real >= box.re_max - 2 * cell_re for lam, _ in roots)
    return StabilityReport(
        alpha=alpha, rightmost_roots=roots, box=box, grid=(g_re, g_im),
        box_limited=box_limited, no_roots=False,
    )


def spectral_abscissa(sys: DdaeSystem, box: SearchBox | None = None, grid=80):
    """Spectral abscissa of the delayed pencil of a system."""
    return spectral_abscissa_matrices(sys.E, sys.A, sys.D, sys.tau, box, grid)


def assess_exponential_stability(
    sys: DdaeSystem,
    split: SplitCoefficients,
    report: StabilityReport,
    margin: float = 1e-6,
    policy: RankPolicy = DEFAULT_POLICY,
) -> StabilityVerdict:
    """Stability verdict gated by the propagation classification.

    De-smoothing systems are never judged by the abscissa alone.  An
    alpha above the margin is conclusive even in a truncated box (the
    verified root does not go away); a negative alpha is trusted only
    when the box was not limiting.  |alpha| <= margin reports marginal.
    """
    prop = classify_propagation(split, sys.horizon_intervals, policy)
    if prop.kind is PropagationKind.DE_SMOOTHING:
        report.gate = "not_applicable_de_smoothing"
        return StabilityVerdict.INCONCLUSIVE_DE_SMOOTHING
    report.gate = "applicable"
    if report.no_roots or report.alpha is None:
        return StabilityVerdict.INCONCLUSIVE_BOX
    if report.alpha > margin:
        return StabilityVerdict.UNSTABLE
    if report.box_limited:
        return StabilityVerdict.INCONCLUSIVE_BOX
    if report.alpha < -margin:
        return StabilityVerdict.STABLE
    return StabilityVerdict.MARGINAL
