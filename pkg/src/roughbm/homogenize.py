"""Euler recursion driven by f(X_i) and its corrected diffusion limit.

    Y_{i+1} = Y_i + N^{-1/2} V(Y_i) f(X_i) + N^{-1} b(Y_i)

is compared at time 1 with the Ito SDE

    dY = V(Y) dB + (b(Y) + c(Y)) dt,   Cov(B(1)) = Sigma,
    c_j(z) = sum_{k,l} Gamma_{kl} sum_u dV_{jl}/dz_u (z) V_{uk}(z).

Vector fields are affine in z, V_{jl}(z) = V0_{jl} + sum_u B_{jlu} z_u, so
the Jacobian is the constant tensor B. These fields are unbounded, so the
bounded-derivative hypotheses of the limit theorem do not hold globally;
runs are kept at scales where no blow-up occurs.
"""
import math
from dataclasses import dataclass

import numpy as np

from .gaussian import rng, sample_paths
from .hermite import HermiteSeries, truncate
from .limits import characteristics, psd_sqrt
from .roughpath import apply_f
from .verify import ConvergenceReport

KINDS = ("constant", "affine", "bilinear")


@dataclass(frozen=True, eq=False)
class VectorFieldSpec:
    """V(z) = V0 + B z (n x m) and drift b(z) = b0 + b1 z.

    kind "constant" requires B = 0. "affine" and "bilinear" both accept the
    general form; the bilinear label refers to the z-dependent part B z xi.
    """

    kind: str
    V0: np.ndarray
    B: np.ndarray = None
    b0: np.ndarray = None
    b1: np.ndarray = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        V0 = np.atleast_2d(np.asarray(self.V0, dtype=float))
        n, m = V0.shape
        B = np.zeros((n, m, n)) if self.B is None else np.asarray(self.B, dtype=float)
        b0 = np.zeros(n) if self.b0 is None else np.asarray(self.b0, dtype=float)
        b1 = np.zeros((n, n)) if self.b1 is None else np.asarray(self.b1, dtype=float)
        errors = []
        if B.shape != (n, m, n):
            errors.append(f"B has shape {B.shape}, expected {(n, m, n)}")
        if b0.shape != (n,):
            errors.append(f"b0 has shape {b0.shape}, expected {(n,)}")
        if b1.shape != (n, n):
            errors.append(f"b1 has shape {b1.shape}, expected {(n, n)}")
        if self.kind == "constant" and np.any(B):
            errors.append("a constant field must have B = 0")
        if errors:
            raise ValueError("; ".join(errors))
        for name, val in (("V0", V0), ("B", B), ("b0", b0), ("b1", b1)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n(self):
        return self.V0.shape[0]

    @property
    def m(self):
        return self.V0.shape[1]

    def V(self, z):
        """Field matrices, shape (..., n, m)."""
        return self.V0 + np.einsum("jlu,...u->...jl", self.B, z)

    def drift(self, z):
        return self.b0 + np.einsum("ju,...u->...j", self.b1, z)

    def to_dict(self):
        return {"kind": self.kind, "V0": self.V0.tolist(), "B": self.B.tolist(),
                "b": {"b0": self.b0.tolist(), "b1": self.b1.tolist()}}

    @classmethod
    def from_dict(cls, d):
        b = d.get("b") or {}
        return cls(d["kind"], d["V0"], d.get("B"), b.get("b0"), b.get("b1"))


def corrected_drift(vf, Gamma, z):
    """c(z) = sum_{k,l} Gamma_{kl} [(V_k . grad) V_l](z)."""
    return np.einsum("kl,jlu,...uk->...j", np.asarray(Gamma, float), vf.B, vf.V(np.asarray(z, float)))


def _fs(coeffs, m, M):
    fs = [coeffs] * m if isinstance(coeffs, HermiteSeries) else list(coeffs)
    return [truncate(f, M) if M is not None else f for f in fs]


def euler_paths(vf, model, coeffs, N, y0, seed, reps, start=0, M=None, full=False):
    """Euler recursion for replications start..start+reps-1.

    Returns endpoints (reps, n), or with full=True the trajectories
    (reps, N+1, n) at times i/N.
    """
    fs = _fs(coeffs, model.m, M)
    xi = apply_f(sample_paths(model, N, seed, reps, start), fs) / math.sqrt(N)
    Y = np.tile(np.asarray(y0, float), (reps, 1))
    traj = [Y] if full else None
    for i in range(N):
        Y = Y + np.einsum("rjl,rl->rj", vf.V(Y), xi[:, i]) + vf.drift(Y) / N
        if full:
            traj.append(Y)
    return np.stack(traj, axis=1) if full else Y


def euler_path(vf, model, coeffs, N, y0, seed, stream=0, M=None):
    """One Euler trajectory at times i/N, shape (N+1, n)."""
    return euler_paths(vf, model, coeffs, N, y0, seed, 1, stream, M, full=True)[0]


def limit_sde_paths(vf, Gamma, Sigma, steps, y0, seed, reps, start=0, corrected=True, full=False, dB=None):
    """Euler-Maruyama for dY = V(Y) dB + (b + c)(Y) dt with Cov(dB) = Sigma dt.

    dB, if given, supplies the Brownian increments (reps, steps, m) directly,
    which lets runs at different step sizes share one noise path.
    """
    Gamma = np.asarray(Gamma, float) if corrected else np.zeros_like(np.asarray(Gamma, float))
    m = vf.m
    if dB is None:
        L = psd_sqrt(Sigma)
        z = np.stack([rng(seed, "sde", start + r).standard_normal((steps, m)) for r in range(reps)])
        dB = z @ L.T / math.sqrt(steps)
    elif np.shape(dB) != (reps, steps, m):
        raise ValueError(f"dB must have shape {(reps, steps, m)}")
    dt = 1.0 / steps
    Y = np.tile(np.asarray(y0, float), (reps, 1))
    traj = [Y] if full else None
    for i in range(steps):
        drift = vf.drift(Y) + corrected_drift(vf, Gamma, Y)
        Y = Y + np.einsum("rjl,rl->rj", vf.V(Y), dB[:, i]) + drift * dt
        if full:
            traj.append(Y)
    return np.stack(traj, axis=1) if full else Y


def limit_sde_path(vf, Gamma, Sigma, steps, y0, seed, stream=0, corrected=True):
    """One limit-SDE trajectory on the grid k/steps, shape (steps+1, n)."""
    return limit_sde_paths(vf, Gamma, Sigma, steps, y0, seed, 1, stream, corrected, full=True)[0]


def _batched(fn, reps, batch):
    return np.concatenate([fn(s0, min(batch, reps - s0)) for s0 in range(0, reps, batch)], axis=0)


def _moments(Y):
    n = Y.shape[0]
    return Y.mean(axis=0), Y.std(axis=0, ddof=1) / math.sqrt(n), np.cov(Y.T, ddof=1).reshape(Y.shape[1], -1)


def compare_invariance(vf, model, coeffs, M, N_grid, reps, seed, y0=None, steps=4096, U=4096, batch=2000):
    """Endpoint mean and covariance of the Euler scheme against the limit SDE.

    For each N, values hold the largest componentwise |mean difference|
    against the SDE with drift b + c and stderrs its standard error. extra
    records the z-scores against the SDE with and without c, the raw means,
    and the operator-norm covariance gap. The verdict is converging
    when the corrected z-score at the largest N is at most 4.
    """
    y0 = np.zeros(vf.n) if y0 is None else np.asarray(y0, float)
    fs = _fs(coeffs, model.m, M)
    ch = characteristics(fs, model, M, U)
    sde = {}
    for corrected in (True, False):
        Y = _batched(lambda s0, n: limit_sde_paths(vf, ch.Gamma, ch.Sigma, steps, y0, seed, n, s0, corrected),
                     reps, batch)
        sde[corrected] = _moments(Y)
    values, stderrs, extra = [], [], {"N": [], "euler_mean": [], "z_corrected": [], "z_uncorrected": [],
                                      "cov_gap": [], "sde_mean": sde[True][0].tolist(),
                                      "sde_mean_uncorrected": sde[False][0].tolist(),
                                      "Gamma": ch.Gamma.tolist(), "Sigma": ch.Sigma.tolist()}
    for N in N_grid:
        Y = _batched(lambda s0, n: euler_paths(vf, model, fs, N, y0, seed, n, s0), reps, batch)
        mean, se, cov = _moments(Y)
        z = {}
        for corrected in (True, False):
            m2, se2, _ = sde[corrected]
            z[corrected] = float(np.max(np.abs(mean - m2) / np.sqrt(se ** 2 + se2 ** 2)))
        gap = float(np.linalg.norm(cov - sde[True][2], 2))
        values.append(float(np.max(np.abs(mean - sde[True][0]))))
        stderrs.append(float(np.max(np.sqrt(se ** 2 + sde[True][1] ** 2))))
        extra["N"].append(N)
        extra["euler_mean"].append(mean.tolist())
        extra["z_corrected"].append(z[True])
        extra["z_uncorrected"].append(z[False])
        extra["cov_gap"].append(gap)
    verdict = "converging" if extra["z_corrected"][-1] <= 4.0 else "violated"
    return ConvergenceReport("Euler scheme vs limit SDE endpoint mean", list(N_grid), values, stderrs, 0.0,
                             verdict, extra)
