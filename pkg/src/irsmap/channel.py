"""Per-cell channel statistics and random channel realizations.

The deterministic statistics of a cell consist of a scaled direct-link scalar,
a composite cascaded vector (one entry per IRS sub-surface), and a
phase-independent scattering floor. Together they determine the expected
effective channel power gain for any IRS phase configuration, which is what
every map-building and optimization stage consumes.

All internal arithmetic is in linear units (watts, linear gains); dB and dBm
appear only at i/o boundaries.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import Point3, distance, has_line_of_sight, is_cell_blocked_by_obstacle

C_LIGHT = 299_792_458.0  # m/s

LOS = "los"
NLOS = "nlos"


class ChannelError(ValueError):
    pass


class BlockedCellError(ChannelError):
    """Raised when statistics are requested for an untraversable cell."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(value: float) -> float:
    return 10.0 * math.log10(value)


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def pathloss_los(d: float, f_c_ghz: float) -> float:
    """Indoor-factory (sparse clutter, high BS) line-of-sight path loss in dB."""
    if d <= 0:
        raise ChannelError("path loss requires a positive distance")
    return 31.84 + 21.50 * math.log10(d) + 19.0 * math.log10(f_c_ghz)


def pathloss_nlos(d: float, f_c_ghz: float) -> float:
    """Non-line-of-sight path loss in dB; never smaller than the LoS loss."""
    if d <= 0:
        raise ChannelError("path loss requires a positive distance")
    return max(
        pathloss_los(d, f_c_ghz),
        32.4 + 23.0 * math.log10(d) + 20.0 * math.log10(f_c_ghz),
    )


@dataclass(frozen=True)
class RadioParams:
    """Carrier, power budget, noise, Rician factor, and IRS array layout.

    The IRS panel is a grid of ``n_sub_x * n_sub_z`` sub-surfaces; each
    sub-surface is a contiguous block of ``elems_per_sub_x * elems_per_sub_z``
    elements sharing one phase shift. Setting the sub-surface counts to zero
    removes the IRS entirely.
    """

    f_c_ghz: float
    p_max_dbm: float
    noise_dbm: float
    rician_db: float
    n_sub_x: int = 0
    n_sub_z: int = 0
    elems_per_sub_x: int = 1
    elems_per_sub_z: int = 1
    element_spacing_wl: float = 0.5

    def __post_init__(self) -> None:
        if self.f_c_ghz <= 0:
            raise ChannelError("carrier frequency must be positive")
        if self.n_sub_x < 0 or self.n_sub_z < 0:
            raise ChannelError("sub-surface counts must be nonnegative")
        if self.elems_per_sub_x < 1 or self.elems_per_sub_z < 1:
            raise ChannelError("each sub-surface needs at least one element")
        if self.element_spacing_wl <= 0:
            raise ChannelError("element spacing must be positive")

    @property
    def n_sub(self) -> int:
        return self.n_sub_x * self.n_sub_z

    @property
    def elems_per_sub(self) -> int:
        return self.elems_per_sub_x * self.elems_per_sub_z

    @property
    def m_elements(self) -> int:
        return self.n_sub * self.elems_per_sub

    @property
    def p_max_w(self) -> float:
        return dbm_to_watt(self.p_max_dbm)

    @property
    def noise_w(self) -> float:
        return dbm_to_watt(self.noise_dbm)

    @property
    def rician_linear(self) -> float:
        return db_to_linear(self.rician_db)

    @property
    def wavelength(self) -> float:
        return C_LIGHT / (self.f_c_ghz * 1e9)


@dataclass(frozen=True)
class LinkState:
    kind: str  # LOS or NLOS
    rician_k: float  # linear; zero when blocked

    def __post_init__(self) -> None:
        if self.kind not in (LOS, NLOS):
            raise ChannelError(f"unknown link kind {self.kind!r}")
        if self.kind == NLOS and self.rician_k != 0.0:
            raise ChannelError("a blocked link has no deterministic component")


@dataclass(frozen=True)
class CellChannelStats:
    """Deterministic statistics of the channel at one mobile-user location.

    ``h_tilde`` is the scaled conjugated direct-link scalar, ``w_tilde`` the
    combined composite cascaded row vector (length = number of sub-surfaces)
    and ``tau`` the phase-independent scattering floor.
    """

    h_tilde: complex
    w_tilde: np.ndarray
    tau: float
    link_ap: LinkState
    link_irs: LinkState


@dataclass(frozen=True)
class SruChannelStats:
    """Same statistics evaluated at the static user's fixed location."""

    h_tilde: complex
    w_tilde: np.ndarray
    tau: float
    link_ap: LinkState
    link_irs: LinkState


@dataclass(frozen=True)
class ChannelSample:
    """One random realization of the three physical links."""

    g: np.ndarray  # AP -> IRS elements, length M
    h_m: complex  # AP -> user
    r_m: np.ndarray  # IRS elements -> user, length M


def _los_phasor(dist_m, wavelength: float):
    """Unit-modulus LoS component with distance-proportional phase."""
    return np.exp(-2j * np.pi * np.asarray(dist_m) / wavelength)


@lru_cache(maxsize=16)
def _irs_elements(scenario) -> np.ndarray:
    """Element center positions, shape (M, 3), sub-surface-major order.

    Elements are laid out on the wall plane through the panel center at the
    configured spacing. Entry ``n * elems_per_sub + k`` is element k of
    sub-surface n; sub-surfaces and their elements are both row-major over
    (z, x).
    """
    rp = scenario.radio
    m = rp.m_elements
    if m == 0:
        return np.zeros((0, 3))
    spacing = rp.element_spacing_wl * rp.wavelength
    mx = rp.n_sub_x * rp.elems_per_sub_x
    mz = rp.n_sub_z * rp.elems_per_sub_z
    # In-plane offsets of every element column/row, centered on the panel.
    off_u = (np.arange(mx) - (mx - 1) / 2.0) * spacing
    off_z = (np.arange(mz) - (mz - 1) / 2.0) * spacing

    positions = np.empty((m, 3))
    c = scenario.irs_center
    axis = scenario.irs_normal.lstrip("+-")
    idx = 0
    for sz in range(rp.n_sub_z):
        for sx in range(rp.n_sub_x):
            for ez in range(rp.elems_per_sub_z):
                for ex in range(rp.elems_per_sub_x):
                    u = off_u[sx * rp.elems_per_sub_x + ex]
                    z = off_z[sz * rp.elems_per_sub_z + ez]
                    if axis == "y":
                        positions[idx] = (c.x + u, c.y, c.z + z)
                    else:
                        positions[idx] = (c.x, c.y + u, c.z + z)
                    idx += 1
    positions.setflags(write=False)
    return positions


def irs_element_positions(scenario) -> np.ndarray:
    """Public accessor for the element layout (read-only view)."""
    return _irs_elements(scenario)


def los_steering_vector(scenario, point: Point3) -> np.ndarray:
    """Unit-modulus response of the element array toward a point.

    Entry m carries the phase of the exact element-to-point distance.
    """
    elems = _irs_elements(scenario)
    if elems.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    d = np.linalg.norm(elems - np.array(point.as_tuple()), axis=1)
    if np.any(d <= 0):
        raise ChannelError("point coincides with an IRS element")
    return _los_phasor(d, scenario.radio.wavelength)


@dataclass(frozen=True)
class _LinkGeometry:
    """Raw per-point link quantities shared by statistics and sampling."""

    l_am: float
    k_am: float
    h_bar: complex
    l_ai: float
    k_ai: float
    g_bar: np.ndarray
    l_im: float
    k_im: float
    r_bar: np.ndarray
    link_ap: LinkState
    link_irs: LinkState


def _link_geometry(scenario, q: Point3) -> _LinkGeometry:
    rp = scenario.radio
    kappa = rp.rician_linear
    wl = rp.wavelength

    ap_clear = has_line_of_sight(scenario, scenario.ap, q)
    k_am = kappa if ap_clear else 0.0
    d_am = distance(scenario.ap, q)
    pl = pathloss_los(d_am, rp.f_c_ghz) if ap_clear else pathloss_nlos(d_am, rp.f_c_ghz)
    l_am = db_to_linear(-pl)
    h_bar = complex(_los_phasor(d_am, wl))

    if rp.m_elements > 0:
        ai_clear = has_line_of_sight(scenario, scenario.ap, scenario.irs_center)
        k_ai = kappa if ai_clear else 0.0
        d_ai = distance(scenario.ap, scenario.irs_center)
        pl_ai = pathloss_los(d_ai, rp.f_c_ghz) if ai_clear else pathloss_nlos(d_ai, rp.f_c_ghz)
        l_ai = db_to_linear(-pl_ai)

        irs_clear = has_line_of_sight(scenario, scenario.irs_center, q)
        k_im = kappa if irs_clear else 0.0
        d_im = distance(scenario.irs_center, q)
        pl_im = pathloss_los(d_im, rp.f_c_ghz) if irs_clear else pathloss_nlos(d_im, rp.f_c_ghz)
        l_im = db_to_linear(-pl_im)

        elems = _irs_elements(scenario)
        ap_arr = np.array(scenario.ap.as_tuple())
        q_arr = np.array(q.as_tuple())
        g_bar = _los_phasor(np.linalg.norm(elems - ap_arr, axis=1), wl)
        r_bar = _los_phasor(np.linalg.norm(elems - q_arr, axis=1), wl)
        link_irs = LinkState(LOS if irs_clear else NLOS, k_im)
    else:
        k_ai = l_ai = k_im = l_im = 0.0
        g_bar = np.zeros(0, dtype=complex)
        r_bar = np.zeros(0, dtype=complex)
        link_irs = LinkState(NLOS, 0.0)

    return _LinkGeometry(
        l_am=l_am, k_am=k_am, h_bar=h_bar,
        l_ai=l_ai, k_ai=k_ai, g_bar=g_bar,
        l_im=l_im, k_im=k_im, r_bar=r_bar,
        link_ap=LinkState(LOS if ap_clear else NLOS, k_am),
        link_irs=link_irs,
    )


def _stats_from_geometry(scenario, geo: _LinkGeometry):
    rp = scenario.radio
    m = rp.m_elements
    h_tilde = math.sqrt(geo.l_am * geo.k_am / (geo.k_am + 1.0)) * np.conj(geo.h_bar)
    if m > 0:
        g_tilde = math.sqrt(geo.l_ai * geo.k_ai / (geo.k_ai + 1.0)) * geo.g_bar
        r_tilde_h = math.sqrt(geo.l_im * geo.k_im / (geo.k_im + 1.0)) * np.conj(geo.r_bar)
        w_full = r_tilde_h * g_tilde  # cascaded row vector, length M
        w_tilde = w_full.reshape(rp.n_sub, rp.elems_per_sub).sum(axis=1)
        tau = geo.l_am / (geo.k_am + 1.0) + (
            geo.l_ai * geo.l_im * (geo.k_im + geo.k_ai + 1.0) * m
            / ((geo.k_ai + 1.0) * (geo.k_im + 1.0))
        )
    else:
        w_tilde = np.zeros(0, dtype=complex)
        tau = geo.l_am / (geo.k_am + 1.0)
    w_tilde.setflags(write=False)
    return complex(h_tilde), w_tilde, tau


def compute_point_stats(scenario, q: Point3) -> CellChannelStats:
    """Channel statistics for an arbitrary in-room location."""
    geo = _link_geometry(scenario, q)
    h_tilde, w_tilde, tau = _stats_from_geometry(scenario, geo)
    return CellChannelStats(h_tilde, w_tilde, tau, geo.link_ap, geo.link_irs)


def compute_cell_stats(scenario, i: int, j: int) -> CellChannelStats:
    """Channel statistics at the center of a traversable grid cell."""
    if is_cell_blocked_by_obstacle(scenario, i, j):
        raise BlockedCellError(f"cell ({i}, {j}) lies inside an obstacle footprint")
    from .geometry import cell_center

    q = cell_center(scenario.grid, i, j, scenario.mru_height)
    return compute_point_stats(scenario, q)


def compute_sru_stats(scenario) -> SruChannelStats:
    """Channel statistics at the static user's location."""
    geo = _link_geometry(scenario, scenario.sru)
    h_tilde, w_tilde, tau = _stats_from_geometry(scenario, geo)
    return SruChannelStats(h_tilde, w_tilde, tau, geo.link_ap, geo.link_irs)


def expected_gain(stats, theta: np.ndarray) -> float:
    """Expected effective channel power gain for given sub-surface phases."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != stats.w_tilde.shape:
        raise ChannelError(
            f"phase vector length {theta.shape} does not match "
            f"{stats.w_tilde.shape} sub-surfaces"
        )
    los = stats.h_tilde + stats.w_tilde @ np.exp(1j * theta)
    return float(np.abs(los) ** 2 + stats.tau)


def _draw_cn(rng: np.random.Generator, shape) -> np.ndarray:
    """Circularly-symmetric complex Gaussian with unit variance per entry."""
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2.0)


def _sample_links(scenario, geo: _LinkGeometry, rng: np.random.Generator, n: int):
    """n independent draws of (g, h, r); arrays shaped (n, M) / (n,)."""
    m = scenario.radio.m_elements
    amp_h = math.sqrt(geo.l_am / (geo.k_am + 1.0))
    h = amp_h * (math.sqrt(geo.k_am) * geo.h_bar + _draw_cn(rng, n))
    if m > 0:
        amp_g = math.sqrt(geo.l_ai / (geo.k_ai + 1.0))
        amp_r = math.sqrt(geo.l_im / (geo.k_im + 1.0))
        g = amp_g * (math.sqrt(geo.k_ai) * geo.g_bar + _draw_cn(rng, (n, m)))
        r = amp_r * (math.sqrt(geo.k_im) * geo.r_bar + _draw_cn(rng, (n, m)))
    else:
        g = np.zeros((n, 0), dtype=complex)
        r = np.zeros((n, 0), dtype=complex)
    return g, h, r


def sample_channels(scenario, i: int, j: int, rng_seed: int) -> ChannelSample:
    """One seeded random realization of the three links at a grid cell."""
    if is_cell_blocked_by_obstacle(scenario, i, j):
        raise BlockedCellError(f"cell ({i}, {j}) lies inside an obstacle footprint")
    from .geometry import cell_center

    q = cell_center(scenario.grid, i, j, scenario.mru_height)
    geo = _link_geometry(scenario, q)
    rng = np.random.default_rng(rng_seed)
    g, h, r = _sample_links(scenario, geo, rng, 1)
    return ChannelSample(g=g[0], h_m=complex(h[0]), r_m=r[0])


def _effective_channel(g, h, r, theta_elements) -> np.ndarray:
    """|c| realizations: conj(h) + r^H diag(phases) g, vectorized over draws."""
    return np.conj(h) + np.sum(np.conj(r) * theta_elements * g, axis=1)


def _theta_elements(scenario, theta: np.ndarray) -> np.ndarray:
    rp = scenario.radio
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (rp.n_sub,):
        raise ChannelError("phase vector length does not match sub-surface count")
    return np.repeat(np.exp(1j * theta), rp.elems_per_sub)


def mc_expected_gain(scenario, i: int, j: int, theta: np.ndarray,
                     n_samples: int = 10_000, seed: int = 0,
                     chunk: int = 2048) -> tuple[float, float]:
    """Monte Carlo estimate (mean, stderr) of the effective channel power gain."""
    if n_samples < 1:
        raise ChannelError("need at least one sample")
    from .geometry import cell_center

    q = cell_center(scenario.grid, i, j, scenario.mru_height)
    geo = _link_geometry(scenario, q)
    phases = _theta_elements(scenario, theta)
    rng = np.random.default_rng(seed)

    values = np.empty(n_samples)
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        g, h, r = _sample_links(scenario, geo, rng, n)
        c = _effective_channel(g, h, r, phases)
        values[done:done + n] = np.abs(c) ** 2
        done += n
    mean = float(values.mean())
    stderr = float(values.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else 0.0
    return mean, stderr


NOMA = "noma"
OMA = "oma"
SRU_STRONG = "sru_strong"  # static user decodes the mobile user's signal first
MRU_STRONG = "mru_strong"


@dataclass(frozen=True)
class McRateResult:
    mean_m: float
    stderr_m: float
    mean_s: float
    stderr_s: float


def mc_expected_rate(scenario, i: int, j: int, theta: np.ndarray,
                     p_m: float, p_s: float, scheme: str,
                     order: str | None = None,
                     n_samples: int = 10_000, seed: int = 0,
                     chunk: int = 2048) -> McRateResult:
    """Monte Carlo mean of both users' instantaneous achievable rates.

    The mobile user sits at cell (i, j); the static user at its fixed
    location. Channels of the two users are drawn independently.
    """
    if scheme not in (NOMA, OMA):
        raise ChannelError(f"unknown scheme {scheme!r}")
    if scheme == NOMA and order not in (SRU_STRONG, MRU_STRONG):
        raise ChannelError(f"invalid decoding order {order!r}")
    if p_m < 0 or p_s < 0 or p_m + p_s > scenario.radio.p_max_w * (1 + 1e-9):
        raise ChannelError("infeasible power allocation")
    from .geometry import cell_center

    q = cell_center(scenario.grid, i, j, scenario.mru_height)
    geo_m = _link_geometry(scenario, q)
    geo_s = _link_geometry(scenario, scenario.sru)
    phases = _theta_elements(scenario, theta)
    sigma2 = scenario.radio.noise_w
    rng = np.random.default_rng(seed)

    rates_m = np.empty(n_samples)
    rates_s = np.empty(n_samples)
    done = 0
    while done < n_samples:
        n = min(chunk, n_samples - done)
        gm, hm, rm = _sample_links(scenario, geo_m, rng, n)
        gs, hs, rs = _sample_links(scenario, geo_s, rng, n)
        pow_m = np.abs(_effective_channel(gm, hm, rm, phases)) ** 2
        pow_s = np.abs(_effective_channel(gs, hs, rs, phases)) ** 2
        if scheme == OMA:
            rates_m[done:done + n] = 0.5 * np.log2(1.0 + pow_m * p_m / (sigma2 / 2.0))
            rates_s[done:done + n] = 0.5 * np.log2(1.0 + pow_s * p_s / (sigma2 / 2.0))
        else:
            # The strong user cancels the weak user's signal before decoding.
            mu_m = 0.0 if order == MRU_STRONG else 1.0
            mu_s = 0.0 if order == SRU_STRONG else 1.0
            rates_m[done:done + n] = np.log2(
                1.0 + pow_m * p_m / (mu_m * pow_m * p_s + sigma2)
            )
            rates_s[done:done + n] = np.log2(
                1.0 + pow_s * p_s / (mu_s * pow_s * p_m + sigma2)
            )
        done += n

    sq = math.sqrt(n_samples)
    return McRateResult(
        mean_m=float(rates_m.mean()),
        stderr_m=float(rates_m.std(ddof=1) / sq) if n_samples > 1 else 0.0,
        mean_s=float(rates_s.mean()),
        stderr_s=float(rates_s.std(ddof=1) / sq) if n_samples > 1 else 0.0,
    )
