"""Waveform, target scene, and Nyquist-rate echo synthesis.

The transmit pulse is a unit-magnitude linear-FM up-chirp supported on
[0, T_p).  Echoes are synthesised by evaluating the chirp envelope directly
at the receiver's Nyquist instants, so off-grid delays are exact by
construction.  Doppler acts as a pulse-to-pulse phase rotation only
(stop-and-hop regime); intra-pulse Doppler, clutter and range migration
are out of scope.
"""

from dataclasses import dataclass, field

import numpy as np

# One-sided difference step for the delay derivative at pulse-edge samples,
# as a fraction of the Nyquist interval.
_EDGE_STEP_FRACTION = 0.01


@dataclass(frozen=True)
class RadarParams:
    """Waveform and timing constants that fix every array dimension."""

    bandwidth_hz: float
    pulse_width_s: float
    pri_s: float
    num_pulses: int

    def __post_init__(self):
        if self.bandwidth_hz <= 0:
            raise ValueError("bandwidth must be positive")
        if not 0.0 < self.pulse_width_s < self.pri_s:
            raise ValueError("pulse width must lie strictly inside (0, PRI)")
        if self.num_pulses < 2:
            raise ValueError("need at least two pulses per CPI")
        if self.nyq_count < 2:
            raise ValueError("PRI must span at least two Nyquist samples")
        if self.nyq_interval_s * self.nyq_count > self.pri_s + self.nyq_interval_s:
            raise ValueError("Nyquist sample grid exceeds the PRI")

    @property
    def nyq_interval_s(self) -> float:
        return 1.0 / self.bandwidth_hz

    @property
    def nyq_count(self) -> int:
        return int(round(self.pri_s * self.bandwidth_hz))

    @property
    def delay_cell_s(self) -> float:
        return 1.0 / self.bandwidth_hz

    @property
    def doppler_cell_hz(self) -> float:
        return 1.0 / (self.num_pulses * self.pri_s)

    @property
    def max_delay_s(self) -> float:
        """Exclusive upper edge of the unambiguous delay interval."""
        return self.pri_s - self.pulse_width_s

    @property
    def max_doppler_hz(self) -> float:
        """Exclusive upper edge of the unambiguous Doppler interval."""
        return 0.5 / self.pri_s


@dataclass(frozen=True)
class Target:
    delay_s: float
    doppler_hz: float
    gain: complex


@dataclass(frozen=True)
class Scene:
    """A target list partitioned into groups of identical Doppler shift.

    ``doppler_groups`` is a tuple of ``(doppler_hz, member_indices)`` pairs
    sorted by ascending Doppler; member indices refer to ``targets``.
    Build scenes with :func:`group_by_doppler` rather than directly.
    """

    params: RadarParams
    targets: tuple = field(default=())
    doppler_groups: tuple = field(default=())

    def __post_init__(self):
        p = self.params
        for t in self.targets:
            if not 0.0 <= t.delay_s < p.max_delay_s:
                raise ValueError(f"delay {t.delay_s} outside [0, {p.max_delay_s})")
            if not abs(t.doppler_hz) < p.max_doppler_hz:
                raise ValueError(f"doppler {t.doppler_hz} outside unambiguous range")
        seen = sorted(i for _, members in self.doppler_groups for i in members)
        if seen != list(range(len(self.targets))):
            raise ValueError("doppler groups must partition the target list")
        group_dops = [nu for nu, _ in self.doppler_groups]
        if len(set(group_dops)) != len(group_dops):
            raise ValueError("group Doppler shifts must be distinct")
        if group_dops != sorted(group_dops):
            raise ValueError("groups must be sorted by ascending Doppler")

    @property
    def num_targets(self) -> int:
        return len(self.targets)

    @property
    def num_groups(self) -> int:
        return len(self.doppler_groups)

    @property
    def group_dopplers(self) -> np.ndarray:
        return np.array([nu for nu, _ in self.doppler_groups], dtype=float)


def group_by_doppler(params: RadarParams, targets, tol_hz: float = 0.0) -> Scene:
    """Partition targets into Doppler groups and return the Scene.

    Targets whose Doppler lies within ``tol_hz`` of an existing group are
    merged into it; the group keeps the first member's Doppler as its key.
    """
    targets = tuple(targets)
    keys: list[float] = []
    members: list[list[int]] = []
    for idx, t in enumerate(targets):
        for g, key in enumerate(keys):
            if abs(t.doppler_hz - key) <= tol_hz:
                members[g].append(idx)
                break
        else:
            keys.append(t.doppler_hz)
            members.append([idx])
    order = np.argsort(keys, kind="stable")
    groups = tuple((keys[g], tuple(members[g])) for g in order)
    return Scene(params=params, targets=targets, doppler_groups=groups)


def lfm_baseband(params: RadarParams, t):
    """Chirp envelope exp(j*pi*(B/T_p)*t^2) on [0, T_p), zero elsewhere.

    Accepts scalars or arrays of time offsets in seconds.  Support
    membership is decided with a tolerance of 1e-9 Nyquist intervals so
    that roundoff cannot flip the boundary samples when the pulse edges
    fall exactly on the sample grid.
    """
    t = np.asarray(t, dtype=float)
    rate = params.bandwidth_hz / params.pulse_width_s
    tol = params.nyq_interval_s * 1e-9
    inside = (t >= -tol) & (t < params.pulse_width_s - tol)
    phase = np.where(inside, t, 0.0)
    out = np.where(inside, np.exp(1j * np.pi * rate * phase**2), 0.0 + 0.0j)
    return out[()] if out.ndim == 0 else out


def _check_delay(params: RadarParams, delay_s: float):
    if not 0.0 <= delay_s < params.max_delay_s:
        raise ValueError(
            f"delay {delay_s} outside the unambiguous range [0, {params.max_delay_s})"
        )


def atom_samples(params: RadarParams, delay_s: float) -> np.ndarray:
    """Nyquist-rate samples of the delayed pulse: entry n is g(n*T_nyq - tau)."""
    _check_delay(params, delay_s)
    t = np.arange(params.nyq_count) * params.nyq_interval_s
    return lfm_baseband(params, t - delay_s)


def atom_span(params: RadarParams, delay_s: float):
    """Nonzero span of :func:`atom_samples` as ``(start_index, values)``.

    Entries equal the full-length atom on ``start_index : start_index +
    len(values)``; everything outside is zero.  The span carries at most two
    zero guard samples at its edges.
    """
    _check_delay(params, delay_s)
    b = params.bandwidth_hz
    start = max(int(np.floor(delay_s * b)) - 1, 0)
    stop = min(int(np.ceil((delay_s + params.pulse_width_s) * b)) + 2, params.nyq_count)
    t = np.arange(start, stop) * params.nyq_interval_s
    return start, lfm_baseband(params, t - delay_s)


def _atom_derivative_values(params: RadarParams, delay_s: float, t: np.ndarray):
    """d/d(tau) of the sampled atom at instants ``t``.

    Analytic inside the pulse support, zero outside.  Support samples
    within one edge step of a boundary use a one-sided difference taken on
    the interior side, so the boundary jump (which has no classical
    derivative) never enters the estimate.
    """
    u = t - delay_s
    width = params.pulse_width_s
    rate = params.bandwidth_hz / width
    h = params.nyq_interval_s * _EDGE_STEP_FRACTION
    tol = params.nyq_interval_s * 1e-9
    inside = (u >= -tol) & (u < width - tol)
    interior = (u > h) & (u < width - h)
    lead = inside & (u <= h)
    trail = inside & (u >= width - h)
    out = np.zeros(u.shape, dtype=complex)
    ui = u[interior]
    out[interior] = -2j * np.pi * rate * ui * np.exp(1j * np.pi * rate * ui**2)
    if np.any(lead):
        ul = u[lead]
        out[lead] = (lfm_baseband(params, ul) - lfm_baseband(params, ul + h)) / h
    if np.any(trail):
        ut = u[trail]
        out[trail] = (lfm_baseband(params, ut - h) - lfm_baseband(params, ut)) / h
    return out


def atom_derivative(params: RadarParams, delay_s: float) -> np.ndarray:
    """Derivative of :func:`atom_samples` with respect to the delay."""
    _check_delay(params, delay_s)
    t = np.arange(params.nyq_count) * params.nyq_interval_s
    return _atom_derivative_values(params, delay_s, t)


def atom_derivative_span(params: RadarParams, delay_s: float):
    """Nonzero span of :func:`atom_derivative` as ``(start_index, values)``."""
    _check_delay(params, delay_s)
    b = params.bandwidth_hz
    start = max(int(np.floor(delay_s * b)) - 1, 0)
    stop = min(int(np.ceil((delay_s + params.pulse_width_s) * b)) + 2, params.nyq_count)
    t = np.arange(start, stop) * params.nyq_interval_s
    return start, _atom_derivative_values(params, delay_s, t)


def group_waveforms(scene: Scene) -> np.ndarray:
    """N x K_v matrix whose column i is the gain-weighted atom sum of group i."""
    p = scene.params
    out = np.zeros((p.nyq_count, scene.num_groups), dtype=complex)
    for i, (_, members) in enumerate(scene.doppler_groups):
        for k in members:
            t = scene.targets[k]
            start, vals = atom_span(p, t.delay_s)
            out[start : start + len(vals), i] += t.gain * vals
    return out


def echo_nyquist(scene: Scene, pulse_index: int) -> np.ndarray:
    """Noise-free Nyquist-rate echo of one pulse.

    Sum over Doppler groups of exp(j*2*pi*nu*l*T) times the group's
    gain-weighted atom sum.
    """
    p = scene.params
    if not 0 <= pulse_index < p.num_pulses:
        raise ValueError(f"pulse index {pulse_index} outside 0..{p.num_pulses - 1}")
    out = np.zeros(p.nyq_count, dtype=complex)
    waves = group_waveforms(scene)
    for i, (nu, _) in enumerate(scene.doppler_groups):
        out += np.exp(2j * np.pi * nu * pulse_index * scene.params.pri_s) * waves[:, i]
    return out
