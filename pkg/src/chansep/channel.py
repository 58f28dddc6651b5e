"""Ray-based channel generation for the RIS-aided uplink.

Geometry: BS at the origin, RIS at ``(d_br, 0)``, users uniform over the
disk of radius ``cell_radius`` around the BS, outside an
``exclusion_radius`` disk around both the BS and the RIS.

Angles are in radians internally; the angle-spread fields of
:class:`SystemConfig` are standard deviations in degrees.
"""

from __future__ import annotations

import dataclasses
import hashlib
import math
from dataclasses import dataclass, field

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib


@dataclass(frozen=True)
class SystemConfig:
    # arrays
    M_y: int = 8
    M_z: int = 4
    N_y: int = 8
    N_z: int = 8
    K: int = 2
    d_b: float = 0.5
    d_r: float = 0.2
    # propagation
    P_ref_db: float = -30.0
    gamma_d: float = 3.5
    gamma_ru: float = 2.8
    noise_dbm: float = -80.0
    d_br: float = 51.0
    cell_radius: float = 70.0
    exclusion_radius: float = 5.0
    kappa_d: float = 1.0
    kappa_ru: float = 1.0
    kappa_br: float = math.inf
    # clusters / subrays
    C_d: int = 20
    S_d: int = 20
    C_ru: int = 20
    S_ru: int = 20
    C_br: int = 3
    S_br: int = 16
    # angle spreads, degrees: azimuth centre mean / std, azimuth subray std,
    # elevation centre and subray Laplacian std
    mu_d: float = 0.0
    sigma_c_d: float = 31.64
    sigma_s_d: float = 24.25
    sigmahat_c_d: float = 6.12
    sigmahat_s_d: float = 1.84
    mu_ru: float = 0.0
    sigma_c_ru: float = 31.64
    sigma_s_ru: float = 24.25
    sigmahat_c_ru: float = 6.12
    sigmahat_s_ru: float = 1.84
    mu_br: float = 0.0
    sigma_c_br: float = 14.4
    sigma_s_br: float = 6.24
    sigmahat_c_br: float = 1.9
    sigmahat_s_br: float = 1.37
    # optimisation
    b: int = 1
    L: int = 1
    muiq_tie_accept: bool = False
    seed: int = 0

    def __post_init__(self):
        counts = ("M_y", "M_z", "N_y", "N_z", "K", "C_d", "S_d", "C_ru",
                  "S_ru", "C_br", "S_br", "b", "L")
        for name in counts:
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.d_b <= 0 or self.d_r <= 0:
            raise ValueError("element spacings must be positive")
        if not self.cell_radius > self.exclusion_radius > 0:
            raise ValueError("need cell_radius > exclusion_radius > 0")
        for name in ("kappa_d", "kappa_ru", "kappa_br"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")
        if self.d_br <= 0:
            raise ValueError("d_br must be positive")

    @property
    def M(self):
        return self.M_y * self.M_z

    @property
    def N(self):
        return self.N_y * self.N_z

    @property
    def P(self):
        """Linear path loss at 1 m."""
        return 10.0 ** (self.P_ref_db / 10.0)

    @property
    def sigma2(self):
        """Noise power in watts."""
        return 10.0 ** ((self.noise_dbm - 30.0) / 10.0)

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def _coerce(name, value, ftype):
    if ftype in ("float", float):
        if isinstance(value, str):
            return float(value.strip().lower().replace("infinity", "inf"))
        return float(value)
    if ftype in ("int", int):
        return int(value)
    if ftype in ("bool", bool):
        if isinstance(value, str):
            return value.strip().lower() in ("1", "true", "yes", "on")
        return bool(value)
    return value


def config_from_mapping(values):
    """Build a :class:`SystemConfig` from a flat mapping; unknown keys are errors."""
    fields = {f.name: f.type for f in dataclasses.fields(SystemConfig)}
    kwargs = {}
    for key, value in values.items():
        if key not in fields:
            raise KeyError(f"unknown SystemConfig key {key!r}")
        kwargs[key] = _coerce(key, value, fields[key])
    return SystemConfig(**kwargs)


def read_toml(path):
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def load_config(path):
    """Read a flat TOML file into a :class:`SystemConfig`.

    Keys outside ``SystemConfig`` are ignored here so the same file can also
    carry sweep settings; ``kappa_br = "inf"`` encodes a pure-LOS RIS-BS link.
    """
    raw = read_toml(path)
    names = {f.name for f in dataclasses.fields(SystemConfig)}
    return config_from_mapping({k: v for k, v in raw.items() if k in names})


def ricean_weights(kappa):
    """``(eta, zeta)`` LOS / scattered amplitude weights for a K-factor."""
    if math.isinf(kappa):
        return 1.0, 0.0
    return math.sqrt(kappa / (1.0 + kappa)), math.sqrt(1.0 / (1.0 + kappa))


def laplace(rng, std, size):
    """Zero-mean Laplacian draws parameterised by standard deviation."""
    return rng.laplace(0.0, std / math.sqrt(2.0), size)


# ---------------------------------------------------------------- steering


def ura_response(n_y, n_z, spacing, theta, phi):
    """VURA response, y-major Kronecker ``a_y (x) a_z``.

    ``theta``/``phi`` may be arrays of equal shape; the array axis is
    prepended, so the result has shape ``(n_y*n_z,) + theta.shape``.
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    my = np.arange(n_y).reshape((n_y, 1) + (1,) * theta.ndim)
    mz = np.arange(n_z).reshape((1, n_z) + (1,) * theta.ndim)
    phase = 2 * np.pi * spacing * (my * np.sin(theta) * np.sin(phi) + mz * np.cos(theta))
    return np.exp(1j * phase).reshape((n_y * n_z,) + theta.shape)


def steering_vector(kind, theta, phi, cfg):
    """BS (``kind='BS'``) or RIS (``kind='RIS'``) steering vector."""
    kind = kind.upper()
    if kind == "BS":
        return ura_response(cfg.M_y, cfg.M_z, cfg.d_b, theta, phi)
    if kind == "RIS":
        return ura_response(cfg.N_y, cfg.N_z, cfg.d_r, theta, phi)
    raise ValueError(f"kind must be 'BS' or 'RIS', got {kind!r}")


# ---------------------------------------------------------------- geometry


@dataclass(frozen=True)
class UserDrop:
    positions: np.ndarray  # (K, 2) metres
    d_d: np.ndarray  # UE-BS distances
    d_ru: np.ndarray  # UE-RIS distances


def drop_users(cfg, rng):
    """Rejection-sample ``cfg.K`` users uniformly over the allowed region."""
    ris = np.array([cfg.d_br, 0.0])
    pos = np.empty((cfg.K, 2))
    k = 0
    while k < cfg.K:
        r = cfg.cell_radius * math.sqrt(rng.uniform())
        a = rng.uniform(0.0, 2 * np.pi)
        p = np.array([r * math.cos(a), r * math.sin(a)])
        if r < cfg.exclusion_radius or np.hypot(*(p - ris)) < cfg.exclusion_radius:
            continue
        pos[k] = p
        k += 1
    d_d = np.hypot(pos[:, 0], pos[:, 1])
    d_ru = np.hypot(pos[:, 0] - ris[0], pos[:, 1] - ris[1])
    return UserDrop(pos, d_d, d_ru)


# ---------------------------------------------------------------- channels


def _scatter_angles(rng, shape, mu, sigma_c, sigma_s, sigmahat_c, sigmahat_s):
    """Per-ray (theta, phi) for clusters on axis -2 and subrays on axis -1.

    Cluster elevations are Laplacian about the horizon (90 degrees).
    """
    deg = np.pi / 180.0
    cshape = shape[:-1] + (1,)
    theta_c = np.pi / 2 + laplace(rng, sigmahat_c * deg, cshape)
    phi_c = rng.normal(mu * deg, sigma_c * deg, cshape)
    theta = theta_c + laplace(rng, sigmahat_s * deg, shape)
    phi = phi_c + laplace(rng, sigma_s * deg, shape)
    return theta, phi


def _user_link(rng, n_y, n_z, spacing, gains, kappa, C, S, spread):
    """One user-side link (``H_d`` or ``H_ru``): array size x K."""
    K = gains.size
    eta, zeta = ricean_weights(kappa)
    theta_los = rng.uniform(0.0, np.pi, K)
    phi_los = rng.uniform(-np.pi / 2, np.pi / 2, K)
    H = eta * ura_response(n_y, n_z, spacing, theta_los, phi_los) * np.sqrt(gains)
    theta, phi = _scatter_angles(rng, (K, C, S), *spread)
    psi = rng.uniform(0.0, 2 * np.pi, (K, C, S))
    if zeta > 0:
        amp = np.sqrt(gains / (C * S))[:, None, None] * np.exp(1j * psi)
        rays = ura_response(n_y, n_z, spacing, theta, phi)  # (n, K, C, S)
        H = H + zeta * np.einsum("nkcs,kcs->nk", rays, amp)
    return H


def gen_user_channels(cfg, drop, rng):
    """``(H_d, H_ru)`` for one user drop."""
    B_d = cfg.P * drop.d_d ** (-cfg.gamma_d)
    B_ru = cfg.P * drop.d_ru ** (-cfg.gamma_ru)
    H_d = _user_link(
        rng, cfg.M_y, cfg.M_z, cfg.d_b, B_d, cfg.kappa_d, cfg.C_d, cfg.S_d,
        (cfg.mu_d, cfg.sigma_c_d, cfg.sigma_s_d, cfg.sigmahat_c_d, cfg.sigmahat_s_d),
    )
    H_ru = _user_link(
        rng, cfg.N_y, cfg.N_z, cfg.d_r, B_ru, cfg.kappa_ru, cfg.C_ru, cfg.S_ru,
        (cfg.mu_ru, cfg.sigma_c_ru, cfg.sigma_s_ru, cfg.sigmahat_c_ru, cfg.sigmahat_s_ru),
    )
    return H_d, H_ru


def gen_ris_bs_channel(cfg, rng):
    """RIS-BS channel: pure LOS for ``kappa_br = inf``, dominant LOS otherwise.

    Returns ``(H_br, a_b, a_r, beta_br)``.
    """
    if not cfg.kappa_br > 0:
        raise ValueError("kappa_br must be > 0: the RIS-BS link needs a LOS component")
    deg = np.pi / 180.0
    theta_D = rng.uniform(70 * deg, 90 * deg)
    phi_D = rng.uniform(-30 * deg, 30 * deg)
    theta_A = np.pi - theta_D
    phi_A = rng.uniform(-30 * deg, 30 * deg)
    a_b = steering_vector("BS", theta_A, phi_A, cfg)
    a_r = steering_vector("RIS", theta_D, phi_D, cfg)

    eta, zeta = ricean_weights(cfg.kappa_br)
    beta_br = cfg.d_br ** -2 / eta ** 2
    H_br = eta * np.sqrt(beta_br) * np.outer(a_b, a_r.conj())
    if zeta > 0:
        C, S = cfg.C_br, cfg.S_br
        spread = (cfg.mu_br, cfg.sigma_c_br, cfg.sigma_s_br, cfg.sigmahat_c_br,
                  cfg.sigmahat_s_br)
        th_a, ph_a = _scatter_angles(rng, (C, S), *spread)
        th_d, ph_d = _scatter_angles(rng, (C, S), *spread)
        psi = rng.uniform(0.0, 2 * np.pi, (C, S))
        gamma = np.sqrt(beta_br / (C * S)) * np.exp(1j * psi)
        arr = ura_response(cfg.M_y, cfg.M_z, cfg.d_b, th_a, ph_a)
        dep = ura_response(cfg.N_y, cfg.N_z, cfg.d_r, th_d, ph_d)
        H_br = H_br + zeta * np.einsum("mcs,ncs,cs->mn", arr, dep.conj(), gamma)
    return H_br, a_b, a_r, beta_br


@dataclass(frozen=True)
class ChannelRealization:
    H_d: np.ndarray
    H_ru: np.ndarray
    H_br: np.ndarray
    a_b: np.ndarray
    a_r: np.ndarray
    beta_br: float
    pure_los: bool
    eta_br: float = 1.0
    drop: UserDrop | None = field(default=None, compare=False)

    @property
    def M(self):
        return self.H_d.shape[0]

    @property
    def N(self):
        return self.H_ru.shape[0]

    @property
    def K(self):
        return self.H_d.shape[1]

    @property
    def los_gain(self):
        """Power gain of the LOS part of ``H_br`` (``d_br^-2``)."""
        return self.eta_br ** 2 * self.beta_br

    def H_br_los(self):
        return np.sqrt(self.los_gain) * np.outer(self.a_b, self.a_r.conj())

    def fingerprint(self):
        """Stable hash of the channel matrices, for paired-trial checks."""
        h = hashlib.sha256()
        for arr in (self.H_d, self.H_ru, self.H_br):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def stream(seed, *key):
    """Independent generator for ``(seed, *key)``; stateless in the key."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.default_rng(ss)


def realize(cfg, seed=None, key=(), drop=None):
    """One full channel realisation.

    Drop, RIS-BS link and user links come from separate streams under
    ``(seed, *key)``, so changing ``kappa_br`` leaves the user channels alone.
    """
    seed = cfg.seed if seed is None else seed
    key = tuple(key)
    if drop is None:
        drop = drop_users(cfg, stream(seed, *key, 0))
    H_br, a_b, a_r, beta_br = gen_ris_bs_channel(cfg, stream(seed, *key, 1))
    H_d, H_ru = gen_user_channels(cfg, drop, stream(seed, *key, 2))
    eta, _ = ricean_weights(cfg.kappa_br)
    return ChannelRealization(
        H_d=H_d, H_ru=H_ru, H_br=H_br, a_b=a_b, a_r=a_r, beta_br=beta_br,
        pure_los=math.isinf(cfg.kappa_br), eta_br=eta, drop=drop,
    )


def global_channel(real, phi):
    """``H = H_d + H_br diag(c) H_ru`` for reflection coefficients ``c``.

    ``phi`` is a :class:`~chansep.separation.PhaseVector` or an array of
    coefficients.
    """
    c = phi.coefficients if hasattr(phi, "coefficients") else np.asarray(phi)
    c = np.asarray(c, dtype=complex)
    if c.shape != (real.N,):
        raise ValueError(f"phase vector has shape {c.shape}, expected ({real.N},)")
    return real.H_d + (real.H_br * c) @ real.H_ru
