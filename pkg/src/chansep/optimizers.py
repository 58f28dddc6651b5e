"""RIS phase design.

The separated optimisers work on the vector ``x = conj(c)`` of conjugated
reflection coefficients, so that ``w = w1 + A1^H x``; a design ``x*`` maps
to physical phases ``phi = -angle(x*)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize

from chansep.metrics import MetricKind
from chansep.numerics import (
    ReducedEig,
    fix_phase,
    general_max_eigenpair,
    reduced_max_eigvec,
)
from chansep.separation import (
    PhaseVector,
    metric_from_w,
    separated_metric,
    w_of_phases,
)

BRUTE_FORCE_LIMIT = 2 ** 20


@dataclass
class OptimizerResult:
    phases: PhaseVector
    objective: float
    evaluations: int
    kind: MetricKind
    trace: list | None = None
    warnings: tuple = field(default_factory=tuple)


# ---------------------------------------------------------------- MUIQ


def _accepts(kind, value, best, tie_accept):
    if tie_accept:
        return value >= best if kind.maximize else value <= best
    return kind.better(value, best)


def muiq(kind, sep, b, L, tie_accept=False):
    """Multi-user iterative quantisation: element-wise search over a ``2^b`` grid.

    Starts from ``Phi = Diag(a_r)`` (every offset phase zero), visits
    elements ``0..N-1`` in order and tries each grid phase, keeping a
    candidate when it beats the running best (or ties it, with
    ``tie_accept``). The sweep is repeated ``L`` times.
    """
    kind = MetricKind(kind)
    if b < 1 or L < 1:
        raise ValueError(f"need b >= 1 and L >= 1, got b={b}, L={L}")
    N, Q = sep.N, 2 ** b
    grid = np.exp(1j * 2 * np.pi * np.arange(Q) / Q)
    A1c = sep.A1.conj()
    idx = np.zeros(N, dtype=np.int64)
    c = sep.a_r.astype(complex).copy()
    w = w_of_phases(sep, c)
    best = metric_from_w(kind, sep, w)
    trace = [best]
    evaluations = 0

    for _ in range(L):
        for n in range(N):
            cand = sep.a_r[n] * grid
            W = w[:, None] + A1c[n][:, None] * (cand.conj() - np.conj(c[n]))[None, :]
            values = metric_from_w(kind, sep, W)
            evaluations += Q
            start = idx[n]
            chosen = start
            for m in range(Q):
                if m == start:
                    continue
                if _accepts(kind, values[m], best, tie_accept):
                    chosen = m
                    best = float(values[m])
                    trace.append(best)
            if chosen != start:
                idx[n] = chosen
                c[n] = cand[chosen]
                w = W[:, chosen].copy()
        # drop accumulated rounding from the incremental updates
        w = w_of_phases(sep, c)

    phases = PhaseVector.discrete(idx, b, sep.a_r)
    return OptimizerResult(
        phases=phases,
        objective=separated_metric(kind, sep, phases),
        evaluations=evaluations,
        kind=kind,
        trace=trace,
        warnings=("forced-separation",) if sep.forced else (),
    )


# ---------------------------------------------------------------- closed forms


def _project(x_star):
    """Nearest unit-modulus vector (l1 sense) to ``x*``, as physical phases."""
    return PhaseVector.continuous(-np.angle(x_star))


ROTATION_GRID = 64


def _rotate_sum_rate(sep, x):
    """Rotate ``x`` by the unit scalar that maximises the dropped cross term.

    The eigenvector fixes ``x*`` only up to ``exp(j theta)``. Rotation leaves
    the quadratic part of ``w^H P w`` unchanged and turns the linear part
    ``2 Re(x^H A1 P w1)`` into ``2 Re(exp(-j theta) t)``, largest at
    ``theta = angle(t)``. Projection commutes with the rotation, so ``t`` is
    taken at the projected vector.
    """
    x = np.exp(1j * np.angle(x))
    t = np.vdot(x, sep.A1 @ (sep.P_sum @ sep.w1))
    return x if t == 0 else x * (t / abs(t))


def _rotate_mse(sep, x):
    """Rotation of ``x`` with the lowest total MSE (grid, then bounded refine)."""
    x = np.exp(1j * np.angle(x))
    a = sep.A1.conj().T @ x
    kind = MetricKind.MseTot

    def f(theta):
        return metric_from_w(kind, sep, sep.w1[:, None] + np.exp(1j * np.atleast_1d(theta)) * a[:, None])

    grid = 2 * np.pi * np.arange(ROTATION_GRID) / ROTATION_GRID
    i = int(np.argmin(f(grid)))
    h = 2 * np.pi / ROTATION_GRID
    opt = scipy.optimize.minimize_scalar(lambda t: float(f(t)[0]), bounds=(grid[i] - h, grid[i] + h),
                                         method="bounded", options={"xatol": 1e-10})
    theta = opt.x if opt.fun <= f(grid[i])[0] else grid[i]
    return x * np.exp(1j * theta)


def _no_ris(kind, sep, warnings):
    phases = PhaseVector.continuous(np.zeros(sep.N))
    return OptimizerResult(
        phases=phases,
        objective=separated_metric(kind, sep, phases),
        evaluations=1,
        kind=kind,
        warnings=tuple(warnings) + ("no-ris-effect",),
    )


def sum_rate_direction(sep):
    """Unconstrained maximiser of ``x^H (A1 P A1^H + nu I) x`` via the ``K x K`` route."""
    P, Q, A1 = sep.P_sum, sep.Q_sum, sep.A1
    G = A1.conj().T @ A1
    nu = float(np.real(np.vdot(sep.w1, P @ sep.w1))) / sep.N
    return reduced_max_eigvec(nu, P, A1, pencil=(nu * Q + G, Q))


def closed_form_sum_rate(sep):
    """Closed-form continuous phases for the sum rate.

    Drops the linear cross term of ``w^H P w``, takes the top eigenvector of
    the remaining quadratic form through the reduced problem, and projects
    it onto the unit-modulus set element by element.
    """
    kind = MetricKind.SumRate
    warnings = ["forced-separation"] if sep.forced else []
    if not np.any(sep.A1):
        return _no_ris(kind, sep, warnings)
    red = sum_rate_direction(sep)
    if red.degenerate:
        warnings.append("degenerate-eigenvalue")
    phases = _project(_rotate_sum_rate(sep, red.vector))
    return OptimizerResult(
        phases=phases,
        objective=separated_metric(kind, sep, phases),
        evaluations=1,
        kind=kind,
        warnings=tuple(warnings),
    )


def mse_direction(sep):
    """Unconstrained maximiser of ``x^H Z1 x / x^H Z2 x``.

    Returns ``(ReducedEig, fallback)``; ``fallback`` is True when ``w1 = 0``
    and the unscaled quotient is used instead.
    """
    P, Q, A1, N = sep.P_sum, sep.Q_sum, sep.A1, sep.N
    G = A1.conj().T @ A1
    Pw1 = P @ sep.w1
    alpha1 = float(np.real(np.vdot(Pw1, Pw1))) / N
    alpha2 = (1.0 + float(np.real(np.vdot(sep.w1, Pw1)))) / N
    GPG = G @ P @ G
    GP2G = G @ P @ P @ G
    K = sep.K
    if alpha1 == 0.0:
        # Z1 = A1 P^2 A1^H, Z2 = A1 P A1^H + I/N restricted to range(A1)
        F, H = GP2G, GPG + G / N
        Y = np.linalg.solve(H, F)
        pair = general_max_eigenpair(Y, pencil=(F, H))
        x = A1 @ pair.vector
        return ReducedEig(fix_phase(x), pair.value, False), True
    Z3 = np.linalg.solve(alpha2 * Q + G, (alpha2 / alpha1) * P - np.eye(K))
    pencil = (GP2G / alpha1 + G, GPG / alpha2 + G)
    return reduced_max_eigvec(1.0, Z3, A1, pencil=pencil), False


def closed_form_mse_tot(sep):
    """Closed-form continuous phases that reduce the MMSE total error.

    Keeps the quadratic terms of the numerator and denominator of the
    phase-dependent part, maximises the resulting Rayleigh quotient through
    its ``K x K`` reduction and projects onto unit modulus.
    """
    kind = MetricKind.MseTot
    warnings = ["forced-separation"] if sep.forced else []
    if not np.any(sep.A1):
        return _no_ris(kind, sep, warnings)
    red, fallback = mse_direction(sep)
    if fallback:
        warnings.append("alpha1-zero-fallback")
    if red.degenerate:
        warnings.append("degenerate-eigenvalue")
    if red.value < 1.0:
        warnings.append("reduced-top-below-one")
    phases = _project(_rotate_mse(sep, red.vector))
    return OptimizerResult(
        phases=phases,
        objective=separated_metric(kind, sep, phases),
        evaluations=1,
        kind=kind,
        warnings=tuple(warnings),
    )


# ---------------------------------------------------------------- baselines


def random_phases(N, rng):
    """I.i.d. uniform phases on ``[0, 2 pi)``."""
    return PhaseVector.continuous(rng.uniform(0.0, 2 * np.pi, N))


class _SeparatedObjective:
    def __init__(self, kind, sep):
        self.kind, self.sep = kind, sep
        self.A1h = sep.A1.conj().T

    def value(self, c):
        return metric_from_w(self.kind, self.sep, self.sep.w1 + self.A1h @ c.conj())

    def perturbed(self, c, delta):
        # column n: element n of c multiplied by each entry of delta
        w = self.sep.w1 + self.A1h @ c.conj()
        out = []
        for d in delta:
            dc = (c * d).conj() - c.conj()
            out.append(metric_from_w(self.kind, self.sep, w[:, None] + self.A1h * dc))
        return out


class _DirectObjective:
    """Metric on the true channel ``H_d + H_br diag(c) H_ru``."""

    def __init__(self, kind, real, sigma2):
        self.kind, self.real, self.sigma2 = kind, real, sigma2
        self.outer = real.H_br.T[:, :, None] * real.H_ru[:, None, :]  # (N, M, K)

    def _batch(self, H):
        kind, s2 = self.kind, self.sigma2
        K = H.shape[-1]
        G = np.einsum("bmi,bmj->bij", H.conj(), H)
        if kind is MetricKind.SumRate:
            _, ld = np.linalg.slogdet(np.eye(K) + G / s2)
            return ld / np.log(2)
        if kind is MetricKind.ZfRate:
            d = np.real(np.diagonal(np.linalg.inv(G), axis1=1, axis2=2))
            return np.sum(np.log2(1.0 + 1.0 / (s2 * d)), axis=1)
        d = np.real(np.diagonal(np.linalg.inv(s2 * np.eye(K) + G), axis1=1, axis2=2))
        if kind is MetricKind.MmseRate:
            return np.sum(-np.log2(s2 * d), axis=1)
        return s2 * np.sum(d, axis=1)

    def H(self, c):
        return self.real.H_d + (self.real.H_br * c) @ self.real.H_ru

    def value(self, c):
        return float(self._batch(self.H(c)[None])[0])

    def perturbed(self, c, delta):
        H = self.H(c)
        return [
            self._batch(H[None] + (c * (d - 1.0))[:, None, None] * self.outer)
            for d in delta
        ]


def _ascend(obj, phi, sign, max_iter, tol, fd_step):
    """Gradient ascent on ``sign * f(phi)`` with Armijo backtracking.

    Trial steps start from the Barzilai-Borwein length of the last move.
    """
    deltas = (np.exp(1j * fd_step), np.exp(-1j * fd_step))
    f = obj.value(np.exp(1j * phi))
    evals = 1
    trace = [f]
    step = None
    prev = None
    for _ in range(max_iter):
        fp, fm = obj.perturbed(np.exp(1j * phi), deltas)
        evals += 2 * phi.size
        g = sign * (fp - fm) / (2 * fd_step)
        gg = float(g @ g)
        if gg == 0.0 or not np.isfinite(gg):
            break
        if prev is not None:
            s, y = phi - prev[0], g - prev[1]
            sy = float(s @ y)
            if sy != 0.0:
                step = abs(float(s @ s) / sy)
        if step is None or not np.isfinite(step) or step <= 0:
            step = 1.0 / np.sqrt(gg)
        accepted = False
        for _ in range(60):
            trial = phi + step * g
            ft = obj.value(np.exp(1j * trial))
            evals += 1
            if sign * (ft - f) >= 1e-4 * step * gg:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        prev = (phi, g)
        phi = trial
        change = abs(ft - f)
        f = ft
        trace.append(f)
        if change < tol:
            break
    return np.mod(phi, 2 * np.pi), f, evals, trace


def projected_ascent_baseline(kind, sep, restarts=20, rng=None, real=None,
                              sigma2=None, max_iter=500, tol=1e-10, fd_step=1e-6):
    """Multi-start numerical phase optimisation (reference benchmark).

    Finite-difference gradient ascent (descent for ``MseTot``) over the phase
    angles, with Armijo backtracking; iterates are wrapped to ``[0, 2 pi)``.
    One start is the matching closed-form design, the others are random.

    Given ``real``, the exact metric of the full channel is optimised instead
    of the separated one; this is how scattered RIS-BS links are handled.
    """
    kind = MetricKind(kind)
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    if real is not None:
        obj = _DirectObjective(kind, real, sep.sigma2 if sigma2 is None else sigma2)
    else:
        obj = _SeparatedObjective(kind, sep)
    sign = 1.0 if kind.maximize else -1.0

    warm = closed_form_sum_rate(sep) if kind is MetricKind.SumRate else closed_form_mse_tot(sep)
    starts = [warm.phases.phases] + [rng.uniform(0, 2 * np.pi, sep.N) for _ in range(restarts)]
    best = None
    total = 0
    for phi0 in starts:
        phi, f, evals, trace = _ascend(obj, np.array(phi0, dtype=float), sign,
                                       max_iter, tol, fd_step)
        total += evals
        if best is None or kind.better(f, best[1]):
            best = (phi, f, trace)
    phases = PhaseVector.continuous(best[0])
    return OptimizerResult(
        phases=phases,
        objective=obj.value(phases.coefficients),
        evaluations=total,
        kind=kind,
        trace=best[2],
        warnings=("direct-objective",) if real is not None else (),
    )


# ---------------------------------------------------------------- oracle


def brute_force_discrete(kind, sep, b, chunk=4096):
    """Exhaustive search over every grid assignment (test oracle).

    Uses the same offset grid as :func:`muiq`. Ties go to the lowest
    lexicographic index tuple.
    """
    kind = MetricKind(kind)
    N, Q = sep.N, 2 ** b
    if Q ** N > BRUTE_FORCE_LIMIT:
        raise ValueError(f"search space 2^(b*N) = {Q ** N} exceeds {BRUTE_FORCE_LIMIT}")
    grid = np.exp(1j * 2 * np.pi * np.arange(Q) / Q)
    A1h = sep.A1.conj().T
    best_val, best_idx = None, None
    combos = itertools.product(range(Q), repeat=N)
    evaluations = 0
    while True:
        block = np.array(list(itertools.islice(combos, chunk)), dtype=np.int64)
        if block.size == 0:
            break
        C = sep.a_r[None, :] * grid[block]  # (B, N) physical coefficients
        W = sep.w1[:, None] + A1h @ C.conj().T
        vals = metric_from_w(kind, sep, W)
        evaluations += len(block)
        i = int(np.argmax(vals) if kind.maximize else np.argmin(vals))
        if best_val is None or kind.better(vals[i], best_val):
            best_val, best_idx = float(vals[i]), block[i]
    phases = PhaseVector.discrete(best_idx, b, sep.a_r)
    return OptimizerResult(
        phases=phases,
        objective=separated_metric(kind, sep, phases),
        evaluations=evaluations,
        kind=kind,
    )
