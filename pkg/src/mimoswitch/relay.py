"""Zero-forcing amplify-and-forward beamformers that realize a permutation.

The relay multiplies its received uplink vector by a gain matrix G chosen
so that the end-to-end channel equals A @ P: a diagonal amplification A
times the desired switch matrix P. After each receiver divides by its
diagonal entry, every station sees its source symbol plus an effective
noise whose power sigma_e^2 is equal across stations by construction:

    relay_noise_var * ||row i_j of inv(H_up)||^2 + station_noise_var / |a_j|^2
        = sigma_e_sq                                             for all j.

The relay transmit power q is a function of sigma_e_sq and the phases of
the diagonal entries; it blows up as sigma_e_sq approaches the pole set by
the relay-noise term and decays to zero as sigma_e_sq grows, so a root of
q = relay_power always exists. The solver brackets the smallest root by a
geometric scan upward from the pole and bisects. The random-phase search
draws phases from M quantized bins, solves each of L trials, and keeps the
trial with the smallest effective noise.

All solver internals operate on stacked task arrays so that one code path
serves both the single-shot public functions (one task) and the Monte
Carlo harness (thousands of tasks); results are bit-identical either way.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .combinatorics import Permutation
from .numerics import RngStream, _as_generator, as_complex_matrix, invert

__all__ = [
    "InfeasibleNoiseTarget",
    "NoRoot",
    "ChannelRealization",
    "SolverConfig",
    "Beamformer",
    "ScalarBeamformer",
    "amplitude_from_sigma_e",
    "relay_power",
    "solve_sigma_e",
    "random_phase_search",
    "scalar_baseline",
    "simulate_slot",
    "beamformer_diagnostics",
]

# Power-equality match enforced by the solver, with margin under the
# 1e-6 contract checked against the trace form of the power constraint.
_POWER_MATCH_RTOL = 1e-7
_SCAN_LIMIT = 1000


class InfeasibleNoiseTarget(ValueError):
    """sigma_e_sq is at or below the relay-noise pole for some station."""


class NoRoot(RuntimeError):
    """Bracket scan exhausted without finding the power-equality root."""


@dataclass(frozen=True)
class ChannelRealization:
    """One slot's channel state: uplink/downlink matrices, noise, power budget.

    Station transmit power is fixed at one (symbols are unit power), so all
    noise variances are relative to unit signal power. Both matrices must be
    invertible (condition estimate below 1e12); inverses are computed once at
    construction and reused by every solver call.
    """

    h_up: np.ndarray
    h_down: np.ndarray
    relay_noise_var: float
    station_noise_var: float
    relay_power: float
    resamples: int = 0

    h_up_inv: np.ndarray = field(init=False, repr=False, compare=False)
    h_down_inv: np.ndarray = field(init=False, repr=False, compare=False)
    cond_up: float = field(init=False, repr=False, compare=False)
    cond_down: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        h_up = as_complex_matrix(self.h_up, square=True)
        h_down = as_complex_matrix(self.h_down, square=True)
        if h_up.shape != h_down.shape:
            raise ValueError("uplink and downlink matrices must have the same shape")
        if self.relay_noise_var < 0 or self.station_noise_var < 0:
            raise ValueError("noise variances must be non-negative")
        if not self.relay_power > 0:
            raise ValueError("relay power budget must be positive")
        up_inv, cond_up = invert(h_up)
        down_inv, cond_down = invert(h_down)
        for name, arr in (
            ("h_up", h_up), ("h_down", h_down),
            ("h_up_inv", up_inv), ("h_down_inv", down_inv),
        ):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "cond_up", cond_up)
        object.__setattr__(self, "cond_down", cond_down)

    @property
    def n(self) -> int:
        return self.h_up.shape[0]


@dataclass(frozen=True)
class SolverConfig:
    """Random-phase search and root-finder settings.

    ``trials`` (L) phase assignments are drawn, each phase from
    ``phase_bins`` (M) quantized values. Bisection stops when the bracket
    is narrower than ``root_tolerance`` relative and the relay power
    matches the budget to 1e-7 relative.
    """

    trials: int = 10
    phase_bins: int = 8
    root_tolerance: float = 1e-10
    max_iterations: int = 200
    bracket_scan_factor: float = 1.05

    def __post_init__(self):
        if self.trials < 1 or self.phase_bins < 1:
            raise ValueError("trials and phase_bins must be >= 1")
        if not self.root_tolerance > 0:
            raise ValueError("root_tolerance must be positive")
        if not self.bracket_scan_factor > 1:
            raise ValueError("bracket_scan_factor must exceed 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


@dataclass(frozen=True)
class Beamformer:
    """A solved relay configuration for one permutation.

    ``g`` realizes ``h_down @ g @ h_up == diag(a) @ P`` with
    ``a = amp_magnitudes * exp(1j * amp_phases)``; ``sigma_e_sq`` is the
    equalized per-station effective noise power and ``relay_power_used``
    the transmit power evaluated directly from ``g`` via the trace form.
    """

    perm: Permutation
    amp_magnitudes: np.ndarray
    amp_phases: np.ndarray
    g: np.ndarray
    sigma_e_sq: float
    relay_power_used: float

    def amplification(self) -> np.ndarray:
        """Complex diagonal of A."""
        return self.amp_magnitudes * np.exp(1j * self.amp_phases)


@dataclass(frozen=True)
class ScalarBeamformer:
    """Baseline relay configuration with a single scalar weight.

    Same zero-forcing structure but A = alpha * I, alpha > 0 set so the
    relay power meets the budget exactly. Per-station effective noise is
    no longer equalized; ``per_station_noise[j]`` is receiver j's value.
    """

    perm: Permutation
    alpha: float
    g: np.ndarray
    per_station_noise: np.ndarray
    relay_power_used: float

    def amplification(self) -> np.ndarray:
        return np.full(self.per_station_noise.shape[0], self.alpha, dtype=np.complex128)


# ---------------------------------------------------------------------------
# Solver kernel. Tasks are rows of stacked arrays:
#   s[t, j]      squared norm of row recv[j] of inv(H_up)
#   cn[t, j]     squared norm of column j of inv(H_down)
#   gamma[t]     Hermitian N x N coupling matrix for the relayed-noise term
#   phases[t, j] unit-modulus phase factors of the diagonal entries
# With d_j = x - relay_noise_var * s_j the relay power at noise level x is
#   q(x) = station_noise_var * ( sum_j cn_j / d_j
#          + relay_noise_var * z^H gamma z ),   z_j = phases_j / sqrt(d_j).
# ---------------------------------------------------------------------------


def _perm_context(channel: ChannelRealization, perms) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-permutation solver arrays (cn, s-stack, gamma-stack) for one channel."""
    hui = channel.h_up_inv
    hdi = channel.h_down_inv
    cn = np.einsum("ij,ij->j", hdi.conj(), hdi).real
    uu = hdi.conj().T @ hdi
    hh_conj = np.conj(hui @ hui.conj().T)
    row_sq = np.einsum("ij,ij->i", hui.conj(), hui).real
    s_list, g_list = [], []
    for perm in perms:
        recv = np.asarray(perm.recv_from)
        s_list.append(row_sq[recv])
        g_list.append(uu * hh_conj[np.ix_(recv, recv)])
    return cn, np.stack(s_list), np.stack(g_list)


def _q_batch(x, s, cn, gamma, phases, station_noise_var, relay_noise_var):
    """Relay power at effective-noise level x for every task. x: (T,)."""
    d = x[:, None] - relay_noise_var * s
    inv_d = 1.0 / d
    t1 = (cn * inv_d).sum(axis=1)
    z = phases * np.sqrt(inv_d)
    gz = np.einsum("tjl,tl->tj", gamma, z)
    t2 = np.einsum("tj,tj->t", z.conj(), gz).real
    return station_noise_var * (t1 + relay_noise_var * t2)


def _solve_batch(s, cn, gamma, phases, station_noise_var, relay_noise_var,
                 power, config: SolverConfig) -> np.ndarray:
    """Smallest root of q(x) = power for each task, shape (T,).

    Scans geometrically upward from the relay-noise pole to the first sign
    change, then bisects. The scan starts at an analytically safe offset:
    q(x) >= station_noise_var * cn_j / (x - pole + gap_j) for every j, so no
    root lies at or below pole + max_j(station_noise_var * cn_j / power -
    gap_j), where gap_j is the distance of station j's pole term from the
    pole. That keeps the scan short for every conditioning regime and is
    well defined when the relay is noiseless (pole = 0).
    """
    if not station_noise_var > 0:
        raise ValueError("station noise variance must be positive to solve for the amplifiers")
    pole_terms = relay_noise_var * s
    pole = pole_terms.max(axis=1)
    delta0 = ((station_noise_var / power) * cn - (pole[:, None] - pole_terms)).max(axis=1)

    factor = config.bracket_scan_factor
    prev = pole + delta0 / factor
    x = pole + delta0
    n_tasks = x.shape[0]
    lo = np.empty(n_tasks)
    hi = np.empty(n_tasks)
    found = np.zeros(n_tasks, dtype=bool)
    for _ in range(_SCAN_LIMIT + 1):
        q = _q_batch(x, s, cn, gamma, phases, station_noise_var, relay_noise_var)
        newly = ~found & (q <= power)
        lo = np.where(newly, prev, lo)
        hi = np.where(newly, x, hi)
        found |= newly
        if found.all():
            break
        prev = np.where(found, prev, x)
        x = np.where(found, x, pole + (x - pole) * factor)
    else:
        bad = int(np.flatnonzero(~found)[0])
        raise NoRoot(
            f"no sign change of relay power within {_SCAN_LIMIT} scan steps (task {bad})"
        )

    root = hi.copy()
    done = np.zeros(n_tasks, dtype=bool)
    rtol = config.root_tolerance
    for _ in range(config.max_iterations):
        mid = 0.5 * (lo + hi)
        q = _q_batch(mid, s, cn, gamma, phases, station_noise_var, relay_noise_var)
        width = hi - lo
        matched = np.abs(q - power) <= _POWER_MATCH_RTOL * power
        narrow = width <= rtol * mid
        # stop once power matches in a narrow bracket, or at float resolution
        exhausted = width <= 8 * np.finfo(float).eps * mid
        newly = ~done & ((matched & narrow) | exhausted)
        root = np.where(newly, mid, root)
        done |= newly
        go_up = ~done & (q > power)
        lo = np.where(go_up, mid, lo)
        hi = np.where(~done & ~go_up, mid, hi)
        if done.all():
            break
    else:
        mid = 0.5 * (lo + hi)
        root = np.where(done, root, mid)
    return root


def _noise_denominators(sigma_e_sq, channel, perm):
    recv = np.asarray(perm.recv_from)
    hui = channel.h_up_inv
    row_sq = np.einsum("ij,ij->i", hui.conj(), hui).real
    den = sigma_e_sq - channel.relay_noise_var * row_sq[recv]
    if np.any(den <= 0):
        pole = channel.relay_noise_var * row_sq[recv].max()
        raise InfeasibleNoiseTarget(
            f"sigma_e_sq={sigma_e_sq!r} is at or below the relay-noise pole {pole!r}"
        )
    return den


def amplitude_from_sigma_e(sigma_e_sq: float, channel: ChannelRealization,
                           perm: Permutation) -> np.ndarray:
    """Per-station amplifier magnitudes |a_j| that equalize effective noise.

    |a_j|^2 = station_noise_var / (sigma_e_sq - relay_noise_var *
    ||row recv[j] of inv(H_up)||^2). Raises :class:`InfeasibleNoiseTarget`
    when any denominator is non-positive.
    """
    den = _noise_denominators(sigma_e_sq, channel, perm)
    return np.sqrt(channel.station_noise_var / den)


def relay_power(sigma_e_sq: float, phases, channel: ChannelRealization,
                perm: Permutation) -> float:
    """Relay transmit power at the given effective-noise level and phases."""
    _noise_denominators(sigma_e_sq, channel, perm)
    cn, s, gamma = _perm_context(channel, [perm])
    ph = np.exp(1j * np.asarray(phases, dtype=float))[None, :]
    q = _q_batch(np.array([float(sigma_e_sq)]), s, cn[None, :], gamma, ph,
                 channel.station_noise_var, channel.relay_noise_var)
    return float(q[0])


def solve_sigma_e(phases, channel: ChannelRealization, perm: Permutation,
                  config: SolverConfig | None = None) -> float:
    """Smallest effective-noise level at which relay power equals the budget.

    The result q satisfies ``relay_power(result) in
    relay_power_budget * (1 +/- 1e-6)`` for channels of sane conditioning.
    """
    config = config or SolverConfig()
    cn, s, gamma = _perm_context(channel, [perm])
    ph = np.exp(1j * np.asarray(phases, dtype=float))[None, :]
    root = _solve_batch(s, cn[None, :], gamma, ph, channel.station_noise_var,
                        channel.relay_noise_var, channel.relay_power, config)
    return float(root[0])


def _build_gain_matrix(channel, perm, amp):
    recv = np.asarray(perm.recv_from)
    return channel.h_down_inv @ (amp[:, None] * channel.h_up_inv[recv, :])


def _trace_power(channel, g):
    """Relay power evaluated directly from G (trace form of the constraint)."""
    gh = g @ channel.h_up
    signal = np.einsum("ij,ij->", gh.conj(), gh).real
    noise = np.einsum("ij,ij->", g.conj(), g).real
    return float(signal + channel.relay_noise_var * noise)


def random_phase_search(channel: ChannelRealization, perm: Permutation,
                        config: SolverConfig | None = None,
                        rng: RngStream | np.random.Generator = RngStream(0)) -> Beamformer:
    """Minimize effective noise over quantized random phase assignments.

    Draws ``config.trials`` assignments of the diagonal phases, each phase
    uniform on {0, 2*pi/M, ..., 2*pi*(M-1)/M}, solves the power-equality
    equation for every trial, keeps the smallest effective noise, and
    assembles the full beamformer. The result is feasible; it upper-bounds
    the true phase optimum.
    """
    config = config or SolverConfig()
    gen = _as_generator(rng)
    n = channel.n
    bins = gen.integers(0, config.phase_bins, size=(config.trials, n))
    angles = bins * (2.0 * np.pi / config.phase_bins)

    cn, s, gamma = _perm_context(channel, [perm])
    trials = config.trials
    roots = _solve_batch(
        np.broadcast_to(s[0], (trials, n)),
        np.broadcast_to(cn, (trials, n)),
        np.broadcast_to(gamma[0], (trials, n, n)),
        np.exp(1j * angles),
        channel.station_noise_var, channel.relay_noise_var,
        channel.relay_power, config,
    )
    best = int(np.argmin(roots))
    sigma_e_sq = float(roots[best])
    theta = angles[best]
    mags = amplitude_from_sigma_e(sigma_e_sq, channel, perm)
    amp = mags * np.exp(1j * theta)
    g = _build_gain_matrix(channel, perm, amp)
    return Beamformer(
        perm=perm,
        amp_magnitudes=mags,
        amp_phases=theta,
        g=g,
        sigma_e_sq=sigma_e_sq,
        relay_power_used=_trace_power(channel, g),
    )


def scalar_baseline(channel: ChannelRealization, perm: Permutation) -> ScalarBeamformer:
    """Zero-forcing relay with a single positive scalar weight A = alpha * I.

    alpha is closed form: relay power scales as alpha^2, so alpha^2 =
    relay_power / q(alpha=1). Effective noise is generally unequal across
    stations; ``per_station_noise`` reports each receiver's value.
    """
    if not channel.station_noise_var > 0:
        raise ValueError("station noise variance must be positive")
    recv = np.asarray(perm.recv_from)
    g_unit = channel.h_down_inv @ channel.h_up_inv[recv, :]
    q_unit = _trace_power(channel, g_unit)
    alpha = float(np.sqrt(channel.relay_power / q_unit))
    g = alpha * g_unit
    hui = channel.h_up_inv
    row_sq = np.einsum("ij,ij->i", hui.conj(), hui).real
    noise = channel.relay_noise_var * row_sq[recv] + channel.station_noise_var / alpha**2
    return ScalarBeamformer(
        perm=perm,
        alpha=alpha,
        g=g,
        per_station_noise=noise,
        relay_power_used=_trace_power(channel, g),
    )


def simulate_slot(beamformer, channel: ChannelRealization, x,
                  rng: RngStream | np.random.Generator) -> np.ndarray:
    """Simulate one switching slot and return the normalized received vector.

    ``x`` holds unit-power transmit symbols, shape (n,) or (n, k) for k
    independent slots. Relay noise is drawn first, then station noise.
    The expected value of entry j of the result is ``x[recv_from[j]]``.
    """
    gen = _as_generator(rng)
    x = np.asarray(x, dtype=np.complex128)
    shape = x.shape
    relay_noise = np.sqrt(channel.relay_noise_var / 2.0) * (
        gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    )
    station_noise = np.sqrt(channel.station_noise_var / 2.0) * (
        gen.standard_normal(shape) + 1j * gen.standard_normal(shape)
    )
    y = channel.h_up @ x + relay_noise
    r = channel.h_down @ (beamformer.g @ y) + station_noise
    amp = beamformer.amplification()
    return r / (amp[:, None] if r.ndim == 2 else amp)


def beamformer_diagnostics(bf: Beamformer, channel: ChannelRealization) -> dict:
    """Independent checks of a solved beamformer, all computed from G.

    Returns relative channel-equation residual, relative relay-power error
    against the budget, and the worst relative deviation of any station's
    effective noise (recomputed from G) from ``sigma_e_sq``.
    """
    amp = bf.amplification()
    target = amp[:, None] * bf.perm.matrix()
    end_to_end = channel.h_down @ bf.g @ channel.h_up
    residual = np.linalg.norm(end_to_end - target, "fro") / np.linalg.norm(target, "fro")

    power_err = abs(_trace_power(channel, bf.g) - channel.relay_power) / channel.relay_power

    # per-station noise from G: rows of A^{-1} H_down G weight the relay noise
    eq = (end_to_end / amp[:, None]).copy()
    forward = np.einsum("ij,ij->i", eq.conj(), eq).real  # should be ~1 per row
    relayed = channel.h_down @ bf.g / amp[:, None]
    relayed_sq = np.einsum("ij,ij->i", relayed.conj(), relayed).real
    noise = channel.relay_noise_var * relayed_sq + channel.station_noise_var / np.abs(amp) ** 2
    noise_err = float(np.max(np.abs(noise - bf.sigma_e_sq)) / bf.sigma_e_sq)
    return {
        "channel_residual": float(residual),
        "power_rel_error": float(power_err),
        "noise_eq_rel_error": noise_err,
        "forward_gain_check": float(np.max(np.abs(forward - 1.0))),
    }
