"""Stationary Gaussian sequences built from moving-average filter banks.

Every component filters one shared stream of i.i.d. N(0,1) innovations,

    X_i^(k) = sum_j taps[k, j] * eps_{i-j},

so rho_{k,l}(u) = E[X_i^(k) X_{i+u}^(l)] = sum_j taps[k, j] taps[l, j+u].
Component indices are 0-based throughout this module.
"""
import hashlib
import json
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.signal import fftconvolve
from scipy.special import gammaln

DEFAULT_FARIMA_J = 2 ** 16


def stream_key(seed, *labels):
    """Stable 128-bit Philox key for a (seed, labels...) stream."""
    text = ":".join([str(int(seed))] + [str(x) for x in labels])
    digest = hashlib.sha256(text.encode()).digest()
    return np.frombuffer(digest[:16], dtype=np.uint64).copy()


def rng(seed, *labels):
    """Counter-based generator for one labelled stream of a seed."""
    return np.random.Generator(np.random.Philox(key=stream_key(seed, *labels)))


# FARIMA(0, r, 0)

def _check_r(r):
    if not 0.0 < r < 0.5:
        raise ValueError(f"memory parameter r must lie in (0, 1/2), got {r}")


def farima_taps(r, J):
    """MA(infinity) coefficients c_j = Gamma(j+r) / (Gamma(j+1) Gamma(r)), j < J."""
    _check_r(r)
    if J < 1:
        raise ValueError("need at least one tap")
    ratios = np.ones(J)
    j = np.arange(J - 1, dtype=float)
    ratios[1:] = (j + r) / (j + 1.0)
    return np.cumprod(ratios)


def farima_autocovariance(r, k):
    """Exact autocovariance of the untruncated, unnormalized FARIMA(0,r,0) sequence."""
    _check_r(r)
    k = np.abs(np.asarray(k, dtype=float))
    logc = gammaln(1 - 2 * r) - gammaln(1 - r) - gammaln(r)
    out = np.exp(logc + gammaln(k + r) - gammaln(k - r + 1))
    return out if out.ndim else float(out)


def farima_variance(r):
    """rho(0) of the raw FARIMA sequence, Gamma(1-2r) / Gamma(1-r)^2."""
    _check_r(r)
    return math.exp(gammaln(1 - 2 * r) - 2 * gammaln(1 - r))


def farima_correlation(r, k):
    """Exact autocorrelation (unit variance) of FARIMA(0,r,0)."""
    return farima_autocovariance(r, k) / farima_variance(r)


def farima_tail_constant(r):
    """Limit of rho(k) k^(1-2r) for the raw sequence, Gamma(1-2r) sin(r pi) / pi."""
    _check_r(r)
    return math.exp(gammaln(1 - 2 * r)) * math.sin(r * math.pi) / math.pi


def farima_tail_variance(r, J):
    """Innovation variance lost by truncating the taps at J, sum_{j>=J} c_j^2.

    Exact: the full sum equals the raw variance, so the tail is that minus
    the retained sum.
    """
    c = farima_taps(r, J)
    return max(farima_variance(r) - math.fsum(c * c), 0.0)


@dataclass(frozen=True)
class FarimaSpec:
    r: float
    J: int = DEFAULT_FARIMA_J

    def __post_init__(self):
        _check_r(self.r)
        if self.J < 1:
            raise ValueError("J must be positive")


@dataclass(frozen=True, eq=False)
class StationaryModel:
    """m-component MA filter bank over one shared innovation stream.

    taps has shape (m, J). With normalize=True every row is scaled to unit
    l2 norm so that rho_{k,k}(0) = 1.
    """

    taps: np.ndarray
    normalize: bool = True
    farima: FarimaSpec = None

    def __post_init__(self):
        t = np.array(self.taps, dtype=float)
        if t.ndim == 1:
            t = t[None, :]
        if t.ndim != 2 or t.shape[1] == 0:
            raise ValueError("taps must be an (m, J) array")
        if t.shape[0] > 8:
            raise ValueError("at most 8 components are supported")
        norms = np.sqrt((t * t).sum(axis=1))
        if np.any(norms == 0):
            raise ValueError("a component has all-zero taps")
        if self.normalize:
            t = t / norms[:, None]
        t.setflags(write=False)
        object.__setattr__(self, "taps", t)

    @property
    def m(self):
        return self.taps.shape[0]

    @property
    def J(self):
        return self.taps.shape[1]

    @cached_property
    def _xcorr(self):
        # _xcorr[k, l, u + J - 1] = sum_j taps[k, j] taps[l, j + u]
        m, J = self.taps.shape
        out = np.empty((m, m, 2 * J - 1))
        for k in range(m):
            for l in range(m):
                if J > 256:
                    out[k, l] = fftconvolve(self.taps[l], self.taps[k][::-1])
                else:
                    out[k, l] = np.convolve(self.taps[l], self.taps[k][::-1])
        out.setflags(write=False)
        return out

    def covariance(self, k, l, u):
        """rho_{k,l}(u) for integer lag(s) u; zero beyond the tap range."""
        u = np.asarray(u)
        idx = u + self.J - 1
        ok = (idx >= 0) & (idx < 2 * self.J - 1)
        out = np.where(ok, self._xcorr[k, l][np.clip(idx, 0, 2 * self.J - 2)], 0.0)
        return out if out.ndim else float(out)

    def covariance_matrix(self, lags):
        """Array of shape (len(lags), m, m) holding rho(u) for each lag."""
        lags = np.asarray(lags)
        return np.stack([np.stack([self.covariance(k, l, lags) for l in range(self.m)], -1)
                         for k in range(self.m)], -2)

    def tail_variance(self):
        """Truncation error of the taps; zero for user-supplied finite filters."""
        if self.farima is None:
            return 0.0
        return farima_tail_variance(self.farima.r, self.farima.J)

    def to_dict(self):
        if self.farima is not None:
            d = {"farima": {"r": self.farima.r, "J": self.farima.J}}
            if not self.normalize:
                d["normalize"] = False
            if self.m > 1:
                d["m"] = self.m
            return d
        return {"m": self.m, "components": [{"taps": row.tolist()} for row in self.taps],
                "normalize": self.normalize}

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d):
        return model_from_dict(d)


def make_model(taps, normalize=True):
    """Model from a list of per-component tap vectors (ragged lengths allowed)."""
    rows = [np.atleast_1d(np.asarray(t, dtype=float)) for t in taps]
    J = max(r.size for r in rows)
    arr = np.zeros((len(rows), J))
    for k, r in enumerate(rows):
        arr[k, :r.size] = r
    return StationaryModel(arr, normalize=normalize)


def farima_model(r, J=DEFAULT_FARIMA_J, normalize=True, m=1):
    """FARIMA(0,r,0) taps, shared by m identical components (univariate case)."""
    c = farima_taps(r, J)
    return StationaryModel(np.tile(c, (m, 1)), normalize=normalize, farima=FarimaSpec(r, J))


def iid_model(m=1):
    """Independent N(0,1) sequence; components share X when m > 1."""
    return StationaryModel(np.ones((m, 1)))


def model_from_dict(d):
    """Parse the JSON model format (explicit taps or the farima shortcut)."""
    if "farima" in d:
        f = d["farima"]
        return farima_model(float(f["r"]), int(f.get("J", DEFAULT_FARIMA_J)),
                            normalize=bool(d.get("normalize", True)), m=int(d.get("m", 1)))
    comps = d["components"]
    if "m" in d and d["m"] != len(comps):
        raise ValueError(f"m = {d['m']} but {len(comps)} components given")
    return make_model([c["taps"] for c in comps], normalize=bool(d.get("normalize", True)))


def cross_covariance(model, k, l, u):
    """rho_{k,l}(u) = E[X_i^(k) X_{i+u}^(l)] from the (normalized) taps."""
    return model.covariance(k, l, u)


def _filter(taps, eps, N):
    # eps[..., J-1+i-j] is eps_{i-j}; output shape (..., m, N)
    m, J = taps.shape
    if J <= 64:
        out = np.zeros(eps.shape[:-1] + (m, N))
        for j in range(J):
            seg = eps[..., J - 1 - j:J - 1 - j + N]
            out += taps[:, j, None] * seg[..., None, :]
        return out
    out = np.empty(eps.shape[:-1] + (m, N))
    for k in range(m):
        out[..., k, :] = fftconvolve(eps, taps[k].reshape((1,) * (eps.ndim - 1) + (J,)),
                                     mode="valid", axes=-1)
    return out


def innovations(model, N, seed, stream=0):
    """The N+J-1 innovations eps_{-(J-1)}, ..., eps_{N-1} of one replication."""
    return rng(seed, "path", stream).standard_normal(N + model.J - 1)


def sample_path(model, N, seed, stream=0):
    """One m x N sample, deterministic in (model, N, seed, stream)."""
    if N < 1:
        raise ValueError("N must be positive")
    return _filter(model.taps, innovations(model, N, seed, stream), N)


def sample_paths(model, N, seed, reps, start=0):
    """Replications start..start+reps-1 stacked as (reps, m, N).

    Row r equals sample_path(model, N, seed, stream=start + r) exactly.
    """
    eps = np.stack([innovations(model, N, seed, start + r) for r in range(reps)])
    return _filter(model.taps, eps, N)


def ell_d_partial_norm(cov, d, U):
    """Partial sum of |cov(u)|^d over |u| <= U and the outermost shell's share."""
    if d < 1 or U < 1:
        raise ValueError("need d >= 1 and U >= 1")
    u = np.arange(-U, U + 1)
    vals = np.abs(np.asarray(cov(u), dtype=float)) ** d
    total = math.fsum(vals)
    last = vals[0] + vals[-1]
    return total, float(last)
