"""Hermite polynomials and coefficient-level chaos calculus.

All polynomials use the probabilists' normalization, orthogonal for the
standard Gaussian measure gamma with ||H_q||^2 = q!.
"""
import json
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_hermitenorm


class QuadratureWarning(UserWarning):
    """Raised when doubling the quadrature size changes the coefficients."""


@dataclass(frozen=True, eq=False)
class HermiteSeries:
    """Finite chaos expansion f = sum_q coeffs[q] H_q."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=float).ravel()
        if c.size == 0:
            raise ValueError("a series needs at least the degree-0 coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def Q(self):
        return self.coeffs.size - 1

    max_degree = Q

    def __call__(self, x):
        return hermite_series_eval(self.coeffs, x)

    def __eq__(self, other):
        return isinstance(other, HermiteSeries) and np.array_equal(self.coeffs, other.coeffs)

    def __hash__(self):
        return hash(self.coeffs.tobytes())

    def __repr__(self):
        return f"HermiteSeries({self.coeffs.tolist()})"

    def __add__(self, other):
        n = max(self.coeffs.size, other.coeffs.size)
        return HermiteSeries(_pad(self.coeffs, n) + _pad(other.coeffs, n))

    def padded(self, Q):
        """Same series with zeros appended (or truncated) to max degree Q."""
        return HermiteSeries(_pad(self.coeffs, Q + 1))

    def norm_sq(self):
        """L2(gamma) norm squared, sum_q q! c_q^2."""
        return math.fsum(math.factorial(q) * c * c for q, c in enumerate(self.coeffs))

    def norm(self):
        return math.sqrt(self.norm_sq())

    def to_dict(self):
        return {"max_degree": self.Q, "coeffs": self.coeffs.tolist()}

    @classmethod
    def from_dict(cls, d):
        coeffs = d["coeffs"]
        if "max_degree" in d and d["max_degree"] != len(coeffs) - 1:
            raise ValueError("max_degree does not match the coefficient count")
        return cls(coeffs)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


def _pad(c, n):
    out = np.zeros(n)
    k = min(n, c.size)
    out[:k] = c[:k]
    return out


def hermite_series(*coeffs):
    """Shorthand: hermite_series(0, 1, 0.5) is H_1 + 0.5 H_2."""
    return HermiteSeries(coeffs)


def monomial(q, scale=1.0):
    """The series scale * H_q."""
    c = np.zeros(q + 1)
    c[q] = scale
    return HermiteSeries(c)


def hermite_eval(q, x):
    """H_q(x) by the three-term recurrence H_{q+1} = x H_q - q H_{q-1}."""
    if q < 0:
        raise ValueError("degree must be nonnegative")
    return hermite_table(q, x)[q]


def hermite_table(Q, x):
    """Array with H_0(x), ..., H_Q(x) stacked along the first axis."""
    x = np.asarray(x, dtype=float)
    H = np.empty((Q + 1,) + x.shape)
    H[0] = 1.0
    if Q >= 1:
        H[1] = x
    for q in range(1, Q):
        H[q + 1] = x * H[q] - q * H[q - 1]
    return H


def hermite_series_eval(coeffs, x):
    """Evaluate sum_q coeffs[q] H_q(x) without storing the whole table."""
    x = np.asarray(x, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    out = np.full(x.shape, coeffs[0])
    if coeffs.size == 1:
        return out
    prev, cur = np.ones_like(x), x.copy()
    out = out + coeffs[1] * cur
    for q in range(1, coeffs.size - 1):
        prev, cur = cur, x * cur - q * prev
        if coeffs[q + 1] != 0.0:
            out = out + coeffs[q + 1] * cur
    return out


def gauss_nodes(n):
    """Gauss-Hermite nodes and weights normalized to the standard Gaussian."""
    x, w = roots_hermitenorm(n)
    return x, w / math.sqrt(2.0 * math.pi)


def _project(f, Q, n):
    x, w = gauss_nodes(n)
    fx = np.asarray(f(x), dtype=float)
    H = hermite_table(Q, x)
    fact = np.array([math.factorial(q) for q in range(Q + 1)], dtype=float)
    return H @ (w * fx) / fact


def extract_coefficients(f, Q, nodes=None, tol=1e-6, extrapolate=False):
    """Chaos coefficients c_q = E[f(Z) H_q(Z)] / q! for q <= Q.

    The projection is repeated with twice as many nodes. A QuadratureWarning
    is issued when the two disagree by more than tol (scaled by the largest
    coefficient). With extrapolate=True the (n, 2n) pair is combined as
    2 c(2n) - c(n), which cancels the 1/n error of integrands with a kink,
    and the check compares against the (2n, 4n) combination.
    """
    if nodes is None:
        nodes = max(4 * Q, 200)
    if nodes < Q + 1:
        raise ValueError(f"need at least Q+1 = {Q + 1} nodes, got {nodes}")
    c1 = _project(f, Q, nodes)
    c2 = _project(f, Q, 2 * nodes)
    if extrapolate:
        c4 = _project(f, Q, 4 * nodes)
        c1, c2 = 2 * c2 - c1, 2 * c4 - c2
    scale = max(1.0, np.abs(c2).max())
    gap = np.abs(c2 - c1).max()
    if gap > tol * scale:
        warnings.warn(f"quadrature not converged: node doubling changed coefficients by {gap:.3e}",
                      QuadratureWarning, stacklevel=2)
    return HermiteSeries(c1)


def hermite_rank(series, tol=None):
    """Smallest degree with a coefficient above tol.

    Degree 0 counts only when the constant term itself exceeds tol. The
    default tol is 1e-10 times the largest coefficient magnitude.
    """
    c = series.coeffs
    if tol is None:
        tol = 1e-10 * np.abs(c).max()
    big = np.flatnonzero(np.abs(c) > tol)
    if big.size == 0:
        raise ValueError("no rank: series vanishes within tolerance")
    return int(big[0])


def chaos_split(series, M):
    """Split into degrees <= M and degrees > M."""
    if M < 0:
        raise ValueError("cutoff must be nonnegative")
    c = series.coeffs
    low, high = c.copy(), c.copy()
    low[M + 1:] = 0.0
    high[:M + 1] = 0.0
    return HermiteSeries(low), HermiteSeries(high)


def truncate(series, M):
    """Projection onto chaoses of degree <= M."""
    return chaos_split(series, M)[0]


def hermite_shift(series, n):
    """Degree-lowering shift: output degree q - n carries input c_q."""
    if n < 1:
        raise ValueError("shift must be at least 1")
    c = series.coeffs
    if n > series.Q:
        return HermiteSeries(np.zeros(1))
    return HermiteSeries(c[n:])


def ou_semigroup(series, t):
    """Ornstein-Uhlenbeck semigroup: c_q -> exp(-q t) c_q."""
    if t < 0:
        raise ValueError("time must be nonnegative")
    q = np.arange(series.coeffs.size)
    return HermiteSeries(series.coeffs * np.exp(-q * t))


def number_operator_pow(series, r):
    """Power of the number operator on the centred part: c_q -> q^r c_q, c_0 -> 0."""
    c = series.coeffs.copy()
    q = np.arange(c.size, dtype=float)
    c[1:] *= q[1:] ** r
    c[0] = 0.0
    return HermiteSeries(c)


def derivative(series):
    """Derivative of the series: H_q' = q H_{q-1}."""
    c = series.coeffs
    if c.size == 1:
        return HermiteSeries(np.zeros(1))
    return HermiteSeries(c[1:] * np.arange(1, c.size))


def sobolev_norm_k2(series, k):
    """Squared norm in the k-th L2 Sobolev space of gamma.

    Sums the squared L2 norms of the first k derivatives, using
    ||f^(j)||^2 = sum_{q>=j} q!/(q-j)! * q! * c_q^2.
    """
    if k < 0:
        raise ValueError("derivative order must be nonnegative")
    terms = []
    for q, c in enumerate(series.coeffs):
        fq = math.factorial(q)
        for j in range(min(k, q) + 1):
            terms.append(fq // math.factorial(q - j) * fq * c * c)
    return math.fsum(terms)


# presets

def _centred_abs(x):
    return np.abs(x) - math.sqrt(2.0 / math.pi)


def _centre(series):
    c = series.coeffs.copy()
    c[0] = 0.0
    return HermiteSeries(c)


def preset(kind, Q=None, q=None, coeffs=None, x=None, y=None, nodes=None):
    """Build one of the centred nonlinearity presets as a HermiteSeries.

    kind is one of
      "hermite"          H_q (needs q)
      "centred_abs"      |x| - sqrt(2/pi), by quadrature (Q defaults to 16);
                         the constant term is then set to zero
      "square_centred"   x^2 - 1
      "custom_tabulated" piecewise-linear interpolation of samples (x, y),
                         centred after projection (Q defaults to 8)
      "series"           explicit coefficient list
    """
    if kind == "hermite":
        if q is None or q < 1:
            raise ValueError("hermite preset needs a degree q >= 1")
        return monomial(q).padded(max(q, Q or 0))
    if kind == "square_centred":
        return HermiteSeries([0.0, 0.0, 1.0]).padded(max(2, Q or 0))
    if kind == "centred_abs":
        Q = 16 if Q is None else Q
        s = extract_coefficients(_centred_abs, Q, nodes=nodes or max(4 * Q, 2000), extrapolate=True)
        return _centre(s)
    if kind == "custom_tabulated":
        if x is None or y is None:
            raise ValueError("custom_tabulated needs sample points x and values y")
        xs, ys = np.asarray(x, float), np.asarray(y, float)
        if xs.shape != ys.shape or xs.ndim != 1 or xs.size < 2 or np.any(np.diff(xs) <= 0):
            raise ValueError("custom_tabulated needs matching 1-d arrays with increasing x")
        Q = 8 if Q is None else Q
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", QuadratureWarning)
            s = extract_coefficients(lambda t: np.interp(t, xs, ys), Q, nodes=nodes or max(4 * Q, 2000),
                                     extrapolate=True)
        return _centre(s)
    if kind == "series":
        if coeffs is None:
            raise ValueError("series preset needs coeffs")
        s = HermiteSeries(coeffs)
        return s.padded(max(s.Q, Q or 0))
    raise ValueError(f"unknown nonlinearity kind {kind!r}")
