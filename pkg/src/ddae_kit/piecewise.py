"""Vector-valued piecewise polynomials with exact differentiation.

Data functions (history and inhomogeneity) are represented as piecewise
polynomials in the monomial basis of the local variable ``t - start``.
All operations that the analysis needs (evaluation, differentiation,
matrix application, shifting, restriction, addition) are exact up to
floating point roundoff, so derivative information of any order is
available without numerical differentiation.
"""

from __future__ import annotations

import warnings

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DimensionMismatch, OutOfDomain

DEGREE_CAP = 64
DEGREE_WARN = 24

_BOUNDARY_RTOL = 1e-9


def _as_coeff_array(coeffs, n=None):
    """Normalize coefficient data to a 2-D array of shape (deg+1, n)."""
    c = np.asarray(coeffs)
    if c.ndim == 1:
        c = c[:, None]
    if c.ndim != 2 or c.shape[0] == 0:
        raise DimensionMismatch("piece needs a (deg+1, n) coefficient array")
    if n is not None and c.shape[1] != n:
        raise DimensionMismatch(
            f"coefficient vectors have dimension {c.shape[1]}, expected {n}"
        )
    if not np.iscomplexobj(c):
        c = c.astype(float, copy=True)
    else:
        c = c.astype(complex, copy=True)
    return c


def _shift_coeffs(c, delta):
    """Taylor shift: return coefficients of p(u + delta) given those of p(u)."""
    m = c.shape[0]
    out = c.copy()
    if delta == 0.0 or m == 1:
        return out
    for j in range(m - 1):
        for k in range(m - 2, j - 1, -1):
            out[k] = out[k] + delta * out[k + 1]
    return out


def _merge_breaks(lists, span):
    """Sorted union of breakpoint lists, collapsing near-duplicates."""
    tol = _BOUNDARY_RTOL * max(1.0, span)
    pts = sorted(t for lst in lists for t in lst)
    merged = []
    for t in pts:
        if not merged or t - merged[-1] > tol:
            merged.append(t)
    return merged


class PiecewisePolynomial:
    """Piecewise polynomial function from an interval into F^n.

    Attributes:
        pieces: tuple of (start, end, coeffs) with coeffs of shape
            (deg+1, n); coeffs[k] multiplies (t - start)**k.
        n: value dimension.
    """

    def __init__(self, pieces, n=None):
        norm_pieces = []
        for start, end, coeffs in pieces:
            start = float(start)
            end = float(end)
            if not end > start:
                raise DimensionMismatch(f"empty piece [{start}, {end}]")
            c = _as_coeff_array(coeffs, n)
            if n is None:
                n = c.shape[1]
            if c.shape[0] - 1 > DEGREE_CAP:
                raise DimensionMismatch(
                    f"piece degree {c.shape[0] - 1} exceeds cap {DEGREE_CAP}"
                )
            if c.shape[0] - 1 > DEGREE_WARN:
                warnings.warn(
                    f"piece degree {c.shape[0] - 1} above {DEGREE_WARN}; "
                    "monomial conditioning may degrade",
                    stacklevel=2,
                )
            c.setflags(write=False)
            norm_pieces.append((start, end, c))
        if not norm_pieces:
            raise DimensionMismatch("piecewise polynomial needs at least one piece")
        norm_pieces.sort(key=lambda p: p[0])
        span = norm_pieces[-1][1] - norm_pieces[0][0]
        for left, right in zip(norm_pieces, norm_pieces[1:]):
            if abs(left[1] - right[0]) > _BOUNDARY_RTOL * max(1.0, span):
                raise DimensionMismatch(
                    f"pieces not contiguous at t={left[1]} vs t={right[0]}"
                )
        self.pieces = tuple(norm_pieces)
        self.n = n

    # -- constructors -------------------------------------------------

    @classmethod
    def constant(cls, value, start, end):
        value = np.atleast_1d(np.asarray(value))
        return cls([(start, end, value[None, :])])

    @classmethod
    def zero(cls, n, start, end, complex_field=False):
        dtype = complex if complex_field else float
        return cls([(start, end, np.zeros((1, n), dtype=dtype))])

    @classmethod
    def from_single(cls, coeffs, start, end):
        return cls([(start, end, coeffs)])

    # -- basic queries ------------------------------------------------

    @property
    def start(self):
        return self.pieces[0][0]

    @property
    def end(self):
        return self.pieces[-1][1]

    @property
    def breakpoints(self):
        return [self.pieces[0][0]] + [p[1] for p in self.pieces]

    @property
    def max_degree(self):
        return max(p[2].shape[0] - 1 for p in self.pieces)

    @property
    def is_complex(self):
        return any(np.iscomplexobj(p[2]) for p in self.pieces)

    def _locate(self, t, side="right"):
        tol = _BOUNDARY_RTOL * max(1.0, self.end - self.start)
        if t < self.start - tol or t > self.end + tol:
            raise OutOfDomain(f"t={t} outside [{self.start}, {self.end}]")
        if side == "left":
            for k, (_, b, _) in enumerate(self.pieces):
                if t <= b + tol:
                    return k
            return len(self.pieces) - 1
        for k, (_, b, _) in enumerate(self.pieces):
            if t < b - tol:
                return k
        return len(self.pieces) - 1

    def evaluate(self, t, order=0, side="right"):
        """Evaluate the order-th derivative at time t.

        At interior knots the right limit is taken unless side="left".
        Differentiation is exact (coefficient shift and scale); orders
        above the local degree give the zero vector.
        """
        t = float(t)
        k = self._locate(t, side=side)
        a, _, c = self.pieces[k]
        if order:
            if order >= c.shape[0]:
                return np.zeros(self.n, dtype=c.dtype)
            c = P.polyder(c, m=order, axis=0)
        return P.polyval(t - a, c)

    def derivatives(self, t, orders, side="right"):
        """Stack of derivatives 0..orders at t, shape (orders+1, n)."""
        return np.stack(
            [self.evaluate(t, order=j, side=side) for j in range(orders + 1)]
        )

    def sup_bound(self):
        """Upper bound for sup_t max_j |f_j(t)| via coefficient sums."""
        best = 0.0
        for a, b, c in self.pieces:
            scale = (b - a) ** np.arange(c.shape[0])
            best = max(best, float(np.max(np.sum(np.abs(c) * scale[:, None], axis=0))))
        return best

    # -- calculus and algebra -------------------------------------------

    def derivative(self, order=1):
        pieces = []
        for a, b, c in self.pieces:
            if order >= c.shape[0]:
                d = np.zeros((1, self.n), dtype=c.dtype)
            else:
                d = P.polyder(c, m=order, axis=0)
            pieces.append((a, b, d))
        return PiecewisePolynomial(pieces, self.n)

    def apply_matrix(self, M):
        M = np.asarray(M)
        if M.shape[1] != self.n:
            raise DimensionMismatch("matrix columns must match value dimension")
        return PiecewisePolynomial(
            [(a, b, c @ M.T) for a, b, c in self.pieces], M.shape[0]
        )

    def __mul__(self, scalar):
        return PiecewisePolynomial(
            [(a, b, c * scalar) for a, b, c in self.pieces], self.n
        )

    __rmul__ = __mul__

    def shift(self, delta):
        """Time shift: returns s with s(t) = self(t - delta)."""
        return PiecewisePolynomial(
            [(a + delta, b + delta, c) for a, b, c in self.pieces], self.n
        )

    def restrict(self, a, b):
        """Exact restriction to the window [a, b] (a subset of the domain)."""
        span = max(1.0, self.end - self.start)
        tol = _BOUNDARY_RTOL * span
        if a < self.start - tol or b > self.end + tol:
            raise OutOfDomain(f"window [{a}, {b}] not contained in domain")
        pieces = []
        for pa, pb, c in self.pieces:
            lo = max(pa, a)
            hi = min(pb, b)
            if hi - lo <= tol:
                continue
            pieces.append((lo, hi, _shift_coeffs(np.array(c), lo - pa)))
        return PiecewisePolynomial(pieces, self.n)

    def _split_at(self, points):
        """Insert interior breakpoints (exact re-centering)."""
        tol = _BOUNDARY_RTOL * max(1.0, self.end - self.start)
        pieces = []
        for pa, pb, c in self.pieces:
            cuts = sorted(t for t in points if pa + tol < t < pb - tol)
            lo = pa
            for t in cuts:
                pieces.append((lo, t, _shift_coeffs(np.array(c), lo - pa)))
                lo = t
            pieces.append((lo, pb, _shift_coeffs(np.array(c), lo - pa)))
        return PiecewisePolynomial(pieces, self.n)

    def _aligned_with(self, other):
        span = self.end - self.start
        cuts = _merge_breaks([self.breakpoints, other.breakpoints], span)
        return self._split_at(cuts), other._split_at(cuts)

    def __add__(self, other):
        if not isinstance(other, PiecewisePolynomial):
            return NotImplemented
        if other.n != self.n:
            raise DimensionMismatch("value dimensions differ")
        tol = _BOUNDARY_RTOL * max(1.0, self.end - self.start)
        if abs(other.start - self.start) > tol or abs(other.end - self.end) > tol:
            raise OutOfDomain("can only add piecewise polynomials on the same domain")
        left, right = self._aligned_with(other)
        pieces = []
        for (a, b, ca), (_, _, cb) in zip(left.pieces, right.pieces):
            m = max(ca.shape[0], cb.shape[0])
            dtype = np.result_type(ca.dtype, cb.dtype)
            c = np.zeros((m, self.n), dtype=dtype)
            c[: ca.shape[0]] += ca
            c[: cb.shape[0]] += cb
            pieces.append((a, b, c))
        return PiecewisePolynomial(pieces, self.n)

    def __sub__(self, other):
        return self + (-1.0) * other

    def stack(self, other):
        """Concatenate value components: result(t) = [self(t); other(t)]."""
        tol = _BOUNDARY_RTOL * max(1.0, self.end - self.start)
        if abs(other.start - self.start) > tol or abs(other.end - self.end) > tol:
            raise OutOfDomain("can only stack piecewise polynomials on the same domain")
        left, right = self._aligned_with(other)
        pieces = []
        for (a, b, ca), (_, _, cb) in zip(left.pieces, right.pieces):
            m = max(ca.shape[0], cb.shape[0])
            dtype = np.result_type(ca.dtype, cb.dtype)
            c = np.zeros((m, self.n + other.n), dtype=dtype)
            c[: ca.shape[0], : self.n] = ca
            c[: cb.shape[0], self.n :] = cb
            pieces.append((a, b, c))
        return PiecewisePolynomial(pieces, self.n + other.n)

    def components(self, idx):
        """Project onto a subset of value components."""
        idx = list(idx)
        return PiecewisePolynomial(
            [(a, b, c[:, idx]) for a, b, c in self.pieces], len(idx)
        )

    def __repr__(self):
        return (
            f"PiecewisePolynomial(n={self.n}, pieces={len(self.pieces)}, "
            f"domain=[{self.start}, {self.end}], max_degree={self.max_degree})"
        )
