"""Direct evaluation of the uplink performance metrics from ``H``."""

from __future__ import annotations

import enum

import numpy as np

from chansep.numerics import RankDeficiencyError

ZF_MAX_COND = 1e12


class MetricKind(enum.Enum):
    SumRate = "SumRate"
    ZfRate = "ZfRate"
    MmseRate = "MmseRate"
    MseTot = "MseTot"

    @property
    def maximize(self):
        return self is not MetricKind.MseTot

    def better(self, a, b):
        """True if value ``a`` strictly beats ``b``."""
        return a > b if self.maximize else a < b


def _gram(H):
    H = np.asarray(H, dtype=complex)
    return H.conj().T @ H


def _check_sigma2(sigma2):
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")


def sum_rate(H, sigma2):
    """``log2 det(I + H^H H / sigma2)`` in bits/s/Hz."""
    _check_sigma2(sigma2)
    K = np.shape(H)[1]
    A = np.eye(K) + _gram(H) / sigma2
    sign, logdet = np.linalg.slogdet(A)
    return float(logdet / np.log(2))


def zf_rate(H, sigma2):
    """Sum of per-stream ZF rates ``log2(1 + 1/(sigma2 [(H^H H)^-1]_kk))``."""
    _check_sigma2(sigma2)
    G = _gram(H)
    M, K = np.shape(H)
    if M < K:
        raise RankDeficiencyError(f"ZF needs M >= K, got M={M}, K={K}", np.inf)
    cond = np.linalg.cond(G)
    if not cond <= ZF_MAX_COND:
        raise RankDeficiencyError(f"H^H H is near-singular (cond {cond:.3e})", cond)
    d = np.real(np.diag(np.linalg.inv(G)))
    return float(np.sum(np.log2(1.0 + 1.0 / (sigma2 * d))))


def mmse_rate(H, sigma2):
    """Sum of per-stream MMSE rates ``log2(1/(sigma2 [(sigma2 I + H^H H)^-1]_kk))``."""
    _check_sigma2(sigma2)
    K = np.shape(H)[1]
    d = np.real(np.diag(np.linalg.inv(sigma2 * np.eye(K) + _gram(H))))
    return float(np.sum(-np.log2(sigma2 * d)))


def mse_tot(H, sigma2):
    """Total MSE of the MMSE combiner, ``sigma2 tr((sigma2 I + H^H H)^-1)``.

    Unit symbol power, so the value lies in ``(0, K]``.
    """
    _check_sigma2(sigma2)
    K = np.shape(H)[1]
    return float(sigma2 * np.real(np.trace(np.linalg.inv(sigma2 * np.eye(K) + _gram(H)))))


DIRECT = {
    MetricKind.SumRate: sum_rate,
    MetricKind.ZfRate: zf_rate,
    MetricKind.MmseRate: mmse_rate,
    MetricKind.MseTot: mse_tot,
}


def direct_metric(kind, H, sigma2):
    return DIRECT[MetricKind(kind)](H, sigma2)
