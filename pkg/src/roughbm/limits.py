"""Limit characteristics, the expected signature of the limit, and its sampler.

For nonlinearities f_k = sum_q c_q^(k) H_q and component covariances rho,

    Delta_{k,l}(u) = sum_{q<=M} q! c_q^(k) c_q^(l) rho_{k,l}(u)^q,
    D = Delta(0),  Gamma = sum_{u>=1} Delta(u),
    Sigma = D + Gamma + Gamma^T,  A = (Gamma - Gamma^T) / 2.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .gaussian import rng
from .hermite import HermiteSeries, chaos_split, hermite_rank
from .roughpath import GroupElement, tensor_exp

DEFAULT_U = 4096
TAIL_WARN = 1e-6


def _coeff_matrix(coeffs, m, M):
    if isinstance(coeffs, HermiteSeries):
        coeffs = [coeffs] * m
    coeffs = list(coeffs)
    if len(coeffs) != m:
        raise ValueError(f"need {m} series, got {len(coeffs)}")
    Q = max(c.Q for c in coeffs)
    M = Q if M is None else min(M, Q)
    C = np.zeros((m, M + 1))
    for k, c in enumerate(coeffs):
        n = min(c.Q, M) + 1
        C[k, :n] = c.coeffs[:n]
    C[:, 0] = 0.0
    return C, M


def delta_table(coeffs, model, M, lags):
    """Delta^M(u) for every u in lags, shape (len(lags), m, m)."""
    lags = np.atleast_1d(np.asarray(lags))
    m = model.m
    C, M = _coeff_matrix(coeffs, m, M)
    rho = model.covariance_matrix(lags)
    out = np.zeros(rho.shape)
    power = np.ones(rho.shape)
    for q in range(1, M + 1):
        power = power * rho
        w = math.factorial(q) * np.outer(C[:, q], C[:, q])
        if np.any(w):
            out += w * power
    return out


def delta_matrix(u, coeffs, model, M=None):
    """Delta^M(u) as an m x m matrix."""
    return delta_table(coeffs, model, M, [u])[0]


def delta_function(coeffs, model, M=None):
    """Callable lags -> Delta^M(lags), shape (len, m, m)."""
    def delta(lags):
        return delta_table(coeffs, model, M, lags)
    return delta


@dataclass(frozen=True, eq=False)
class Characteristics:
    m: int
    M: int
    DeltaZero: np.ndarray
    Gamma: np.ndarray
    Sigma: np.ndarray
    Area: np.ndarray
    U: int
    tail_bound: float
    warnings: tuple = field(default_factory=tuple)

    @property
    def sigma_tilde(self):
        """Sigma + 2A, which equals D + 2 Gamma."""
        return self.Sigma + 2.0 * self.Area

    def to_dict(self):
        return {"m": self.m, "M": self.M, "U": self.U, "tail_bound": self.tail_bound,
                "DeltaZero": self.DeltaZero.tolist(), "Gamma": self.Gamma.tolist(),
                "Sigma": self.Sigma.tolist(), "Area": self.Area.tolist(), "warnings": list(self.warnings)}


def assemble(D, Gamma, M=0, U=0, tail_bound=0.0, notes=()):
    """Characteristics from D and Gamma, with the PSD check on Sigma."""
    D = np.asarray(D, dtype=float)
    Gamma = np.asarray(Gamma, dtype=float)
    Sigma = D + Gamma + Gamma.T
    Area = 0.5 * (Gamma - Gamma.T)
    notes = list(notes)
    lam = np.linalg.eigvalsh(0.5 * (Sigma + Sigma.T)).min()
    if lam < -1e-10:
        notes.append(f"Sigma has a negative eigenvalue {lam:.3e}")
    return Characteristics(D.shape[0], M, D, Gamma, Sigma, Area, U, float(tail_bound), tuple(notes))


def characteristics(coeffs, model, M=None, U=DEFAULT_U, tail_threshold=TAIL_WARN):
    """D, Gamma (summed to lag U), Sigma and A at chaos cutoff M (None = all)."""
    if U < 1:
        raise ValueError("U must be at least 1")
    tab = delta_table(coeffs, model, M, np.arange(U + 1))
    M_used = _coeff_matrix(coeffs, model.m, M)[1]
    Gamma = tab[1:].sum(axis=0)
    tail = float(np.abs(tab[U]).max())
    notes = []
    if tail > tail_threshold:
        msg = f"outermost lag U={U} still contributes {tail:.3e}; Gamma may be truncated"
        notes.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return assemble(tab[0], Gamma, M_used, U, tail, notes)


def expected_signature_coeff(word, s, t, chars):
    """Coefficient of the expected signature of the limit on one word."""
    word = tuple(word)
    if len(word) % 2:
        return 0.0
    n = len(word) // 2
    St = chars.sigma_tilde
    val = (t - s) ** n / (2 ** n * math.factorial(n))
    for j in range(n):
        val *= St[word[2 * j] - 1, word[2 * j + 1] - 1]
    return float(val)


def expected_signature_tensor(s, t, chars, K=4):
    """exp((t-s)/2 * (Sigma + 2A)) in the tensor algebra truncated at K."""
    if K > 6:
        raise ValueError("K is limited to 6")
    m = chars.m
    levels = [np.array(0.0)] + [np.zeros((m,) * k) for k in range(1, K + 1)]
    if K >= 2:
        levels[2] = 0.5 * (t - s) * chars.sigma_tilde
    return tensor_exp(GroupElement(tuple(levels)))


def psd_sqrt(S, tol=1e-10):
    """Symmetric square root factor L with L L^T = S; negative eigenvalues above -tol are clipped."""
    S = 0.5 * (np.asarray(S, float) + np.asarray(S, float).T)
    lam, V = np.linalg.eigh(S)
    scale = max(1.0, abs(lam).max()) if lam.size else 1.0
    if lam.min() < -tol * scale:
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {lam.min():.3e})")
    return V * np.sqrt(np.clip(lam, 0.0, None))


def sample_brownian_roughpath(chars, steps, seed, representation="ito", reps=None):
    """Brownian motion with covariance Sigma and its corrected second level.

    Returns (B, BB) on the grid k/steps, shapes (steps+1, m) and
    (steps+1, m, m), or with a leading reps axis. The ito form is the
    left-point sum plus t Gamma; the stratonovich form is the midpoint sum
    minus t D/2 plus t A. Both use the same noise for a given seed.
    """
    if representation not in ("ito", "stratonovich"):
        raise ValueError("representation must be 'ito' or 'stratonovich'")
    L = psd_sqrt(chars.Sigma)
    m = chars.m
    n = 1 if reps is None else reps
    z = np.stack([rng(seed, "brownian", r).standard_normal((steps, m)) for r in range(n)])
    dB = z @ L.T / math.sqrt(steps)
    B = np.zeros((n, steps + 1, m))
    B[:, 1:] = np.cumsum(dB, axis=1)
    left = B[:, :-1]
    base = left if representation == "ito" else left + 0.5 * dB
    BB = np.zeros((n, steps + 1, m, m))
    BB[:, 1:] = np.cumsum(base[..., :, None] * dB[..., None, :], axis=1)
    tgrid = (np.arange(steps + 1) / steps)[:, None, None]
    if representation == "ito":
        BB += tgrid * chars.Gamma
    else:
        BB += tgrid * (chars.Area - 0.5 * chars.DeltaZero)
    if reps is None:
        return B[0], BB[0]
    return B, BB


def cutoff_convergence_table(coeffs, model, M_values, U=DEFAULT_U):
    """Rows (M, ||Delta^M(0) - Delta^Q(0)||, ||A^M - A^Q||, bound).

    Norms are Frobenius. The bound is
        m * max_k ||f_k^{>M}|| * (max_k ||f_k|| + max_k ||f_k^{>M}||) * ||rho||_{l^d}^d,
    with d the smallest Hermite rank present and the l^d norm summed over |u| <= U.
    """
    m = model.m
    if isinstance(coeffs, HermiteSeries):
        coeffs = [coeffs] * m
    coeffs = list(coeffs)
    Q = max(c.Q for c in coeffs)
    M_values = list(M_values)
    if any(b <= a for a, b in zip(M_values, M_values[1:])):
        raise ValueError("M values must increase")
    if M_values and M_values[-1] > Q:
        raise ValueError(f"M values are capped by the stored degree {Q}")
    full = characteristics(coeffs, model, Q, U, tail_threshold=np.inf)
    lags = np.arange(-U, U + 1)
    d = min(hermite_rank(c) for c in coeffs)
    rho = model.covariance_matrix(lags)
    ell_d = float((np.abs(rho) ** d).sum(axis=0).max())
    norm_f = max(c.norm() for c in coeffs)
    rows = []
    for M in M_values:
        ch = characteristics(coeffs, model, M, U, tail_threshold=np.inf)
        tail = max(chaos_split(c, M)[1].norm() for c in coeffs)
        rows.append({"M": M,
                     "delta0_dev": float(np.linalg.norm(ch.DeltaZero - full.DeltaZero)),
                     "area_dev": float(np.linalg.norm(ch.Area - full.Area)),
                     "bound": m * tail * (norm_f + tail) * ell_d})
    return rows
