"""Channel separation for a rank-1 RIS-BS link.

With ``H_br = sqrt(beta) a_b a_r^H``, rotating ``H`` by the left singular
vectors of ``H_br`` leaves the RIS phases in a single row ``w^H``. Every
metric then depends on the phases only through ``w`` and a fixed ``K x K``
matrix ``Q``:

    (alpha I + H^H H)^-1 = (Q + w w^H)^-1,   alpha in {0, sigma2}.

Sign convention: for reflection coefficients ``c = exp(j phi)``,
``w = w1 + A1^H conj(c)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from chansep.metrics import MetricKind
from chansep.numerics import RankDeficiencyError, smw_inverse

ZF_MAX_COND = 1e12
TWO_PI = 2 * np.pi


def wrap_phase(phases):
    """Wrap into ``[0, 2 pi)``; ``np.mod`` alone can return ``2 pi`` for tiny negatives."""
    out = np.mod(np.asarray(phases, dtype=float), TWO_PI)
    out[out >= TWO_PI] = 0.0
    return out


@dataclass(frozen=True)
class PhaseVector:
    """RIS reflection phases in ``[0, 2 pi)``.

    Discrete vectors also keep the grid indices ``m`` of the offset phase
    ``gamma = 2 pi m / 2^b``; the physical phase is ``angle(a_r) + gamma``.
    """

    phases: np.ndarray
    bits: int | None = None
    indices: np.ndarray | None = None

    @classmethod
    def continuous(cls, phases):
        return cls(wrap_phase(phases))

    @classmethod
    def from_coefficients(cls, c):
        return cls.continuous(np.angle(np.asarray(c, dtype=complex)))

    @classmethod
    def discrete(cls, indices, bits, a_r):
        indices = np.asarray(indices, dtype=np.int64)
        if np.any(indices < 0) or np.any(indices >= 2 ** bits):
            raise ValueError(f"grid indices must lie in [0, {2 ** bits})")
        gamma = TWO_PI * indices / 2 ** bits
        phases = wrap_phase(np.angle(a_r) + gamma)
        return cls(phases, int(bits), indices.copy())

    @property
    def representation(self):
        return "Continuous" if self.bits is None else f"Discrete({self.bits})"

    @property
    def coefficients(self):
        return np.exp(1j * self.phases)

    def __len__(self):
        return len(self.phases)


@dataclass(frozen=True)
class SeparatedChannel:
    w1: np.ndarray  # (K,)
    A1: np.ndarray  # (N, K)
    Q_sum: np.ndarray
    Q_zf: np.ndarray
    sigma2: float
    a_r: np.ndarray
    P_sum: np.ndarray
    P_zf: np.ndarray | None
    logdet_Q_sum: float
    zf_cond: float
    forced: bool = False

    @property
    def K(self):
        return self.w1.size

    @property
    def N(self):
        return self.A1.shape[0]

    @property
    def Q_mmse(self):
        return self.Q_sum

    def Q(self, kind):
        return self.Q_zf if MetricKind(kind) is MetricKind.ZfRate else self.Q_sum

    def P(self, kind):
        kind = MetricKind(kind)
        if kind is MetricKind.ZfRate:
            if self.P_zf is None:
                raise RankDeficiencyError(
                    f"Q_zf is singular or ill-conditioned (cond {self.zf_cond:.3e})",
                    self.zf_cond,
                )
            return self.P_zf
        return self.P_sum


def _hermitize(A):
    return 0.5 * (A + A.conj().T)


def separate(real, sigma2, force=False):
    """Build the phase-independent parts of the separated channel.

    Requires a pure-LOS ``H_br``. With ``force=True`` a dominant-LOS
    realisation is separated through its LOS part only; metrics computed
    from the result then approximate, rather than equal, the true ones.
    """
    if not real.pure_los and not force:
        raise ValueError("channel separation requires rank-1 H_br (pure LOS)")
    H_d, H_ru, a_b, a_r = real.H_d, real.H_ru, real.a_b, real.a_r
    M, K = H_d.shape
    g = H_d.conj().T @ a_b
    # (I - a_b a_b^H / M) H_d, so Q_zf is a Gram matrix and PSD by construction
    H1 = H_d - np.outer(a_b, g.conj()) / M
    Q_zf = _hermitize(H1.conj().T @ H1)
    Q_sum = Q_zf + sigma2 * np.eye(K)
    w1 = g / np.sqrt(M)
    A1 = np.sqrt(M * real.los_gain) * (a_r.conj()[:, None] * H_ru)

    P_sum = _hermitize(np.linalg.inv(Q_sum))
    _, logdet = np.linalg.slogdet(Q_sum)
    zf_cond = np.linalg.cond(Q_zf) if np.any(Q_zf) else np.inf
    P_zf = _hermitize(np.linalg.inv(Q_zf)) if zf_cond <= ZF_MAX_COND else None
    return SeparatedChannel(
        w1=w1, A1=A1, Q_sum=Q_sum, Q_zf=Q_zf, sigma2=float(sigma2), a_r=a_r,
        P_sum=P_sum, P_zf=P_zf, logdet_Q_sum=float(logdet), zf_cond=float(zf_cond),
        forced=not real.pure_los,
    )


def _coeffs(x, N):
    c = x.coefficients if isinstance(x, PhaseVector) else np.asarray(x, dtype=complex)
    if c.shape[0] != N:
        raise ValueError(f"phase vector has length {c.shape[0]}, expected {N}")
    return c


def w_of_phases(sep, x):
    """The phase-dependent row ``w`` for a :class:`PhaseVector` or coefficients."""
    c = _coeffs(x, sep.N)
    return sep.w1 + sep.A1.conj().T @ c.conj()


def metric_from_w(kind, sep, W):
    """Separated metric for one ``w`` (shape ``(K,)``) or a batch ``(K, B)``."""
    kind = MetricKind(kind)
    W = np.asarray(W, dtype=complex)
    single = W.ndim == 1
    if single:
        W = W[:, None]
    P = sep.P(kind)
    s2 = sep.sigma2
    PW = P @ W
    q = np.real(np.sum(W.conj() * PW, axis=0))
    if kind is MetricKind.SumRate:
        K = sep.K
        out = (sep.logdet_Q_sum + np.log1p(q)) / np.log(2) - K * np.log2(s2)
    elif kind is MetricKind.MseTot:
        trP = np.real(np.trace(P))
        out = s2 * (trP - np.sum(np.abs(PW) ** 2, axis=0) / (1.0 + q))
    else:
        dS = np.real(np.diag(P))[:, None] - np.abs(PW) ** 2 / (1.0 + q)
        if kind is MetricKind.MmseRate:
            out = np.sum(-np.log2(s2 * dS), axis=0)
        else:
            out = np.sum(np.log2(1.0 + 1.0 / (s2 * dS)), axis=0)
    return float(out[0]) if single else out


def separated_metric(kind, sep, x):
    """Metric value at phases ``x`` using only ``w`` and the cached ``Q^-1``.

    ``MseTot`` carries the ``sigma2`` factor, matching
    :func:`chansep.metrics.mse_tot`.
    """
    return metric_from_w(kind, sep, w_of_phases(sep, x))


def S_of_Q(sep, kind, w):
    """``(Q + w w^H)^-1`` for the metric's ``Q``."""
    return smw_inverse(sep.P(kind), w)
