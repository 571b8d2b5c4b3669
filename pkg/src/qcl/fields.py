"""Random initial fields, relative field strength (RFS), and RFS rescaling.

Random streams
--------------
Every draw comes from ``numpy.random.PCG64`` seeded through
``numpy.random.SeedSequence(seed, spawn_key=(channel,))``; channel ``c`` of a
field therefore depends only on ``(seed, c)``. ``RNG_ALGORITHM`` is written
into run metadata.
"""

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .dynamics import ControlField
from .errors import NoValidTransitions, ZeroField

RNG_ALGORITHM = "numpy.PCG64 via SeedSequence(seed, spawn_key=(channel,))"
DEFAULT_MODES = 20
MAX_REDRAWS = 100
DEGENERATE_RTOL = 1e-12
COUPLING_RTOL = 1e-14


@dataclass(frozen=True)
class FieldInitSpec:
    """Parameters of the Gaussian-envelope multi-cosine initial field.

    Exactly one of ``target_sigma0`` (scale to a given RFS) and
    ``peak_amplitude`` (scale each channel to a given max |eps|) is set.
    ``zeta=None`` means ``T/10``; ``omega_range=None`` means the smallest and
    largest nonzero level spacings of ``H0``.
    """

    seed: int
    target_sigma0: float = None
    peak_amplitude: float = None
    m_modes: int = DEFAULT_MODES
    zeta: float = None
    omega_range: tuple = None

    def __post_init__(self):
        if self.m_modes < 1:
            raise ValueError("m_modes must be >= 1")
        if (self.target_sigma0 is None) == (self.peak_amplitude is None):
            raise ValueError("set exactly one of target_sigma0 and peak_amplitude")
        scale = self.target_sigma0 if self.target_sigma0 is not None else self.peak_amplitude
        if not scale > 0:
            raise ValueError("field scale must be positive")
        if self.omega_range is not None and self.omega_range[0] > self.omega_range[1]:
            raise ValueError("omega_range must satisfy omega_min <= omega_max")


@dataclass(frozen=True)
class ChannelDraw:
    channel: int
    omegas: np.ndarray
    amplitudes: np.ndarray
    redraws: int


def channel_rng(seed, channel):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(channel,))))


def spectral_range(sys):
    """Smallest and largest |E_j - E_k| over all level pairs with distinct energies."""
    gaps = _nondegenerate_gaps(sys)
    if gaps.size == 0:
        raise NoValidTransitions("H0 has no pair of distinct energies")
    return float(gaps.min()), float(gaps.max())


def _nondegenerate_gaps(sys):
    gaps = np.array([t.gap for t in sys.transition_table])
    scale = max(np.abs(sys.energies()).max(), 1e-300)
    return gaps[gaps > DEGENERATE_RTOL * scale]


def envelope(times, t_final, zeta, a0=1.0):
    return a0 * np.exp(-((times - t_final / 2) ** 2) / (2 * zeta**2))


def synthesize_with_log(spec, sys, t_final, l_slices):
    """Build the initial field and return it together with the per-channel draws."""
    zeta = t_final / 10 if spec.zeta is None else spec.zeta
    lo, hi = spectral_range(sys) if spec.omega_range is None else spec.omega_range
    times = (t_final / l_slices) * np.arange(1, l_slices + 1)
    env = envelope(times, t_final, zeta)
    shapes = np.empty((sys.k, l_slices))
    draws = []
    for c in range(sys.k):
        rng = channel_rng(spec.seed, c)
        for attempt in range(MAX_REDRAWS + 1):
            omegas = rng.uniform(lo, hi, spec.m_modes)
            amps = rng.uniform(0.0, 1.0, spec.m_modes)
            shape = env * (amps[:, None] * np.cos(omegas[:, None] * times)).sum(axis=0)
            if np.abs(shape).max() > 0.0:
                break
        else:
            raise ZeroField(f"channel {c}: initial field vanished after {MAX_REDRAWS} redraws")
        shapes[c] = shape
        draws.append(ChannelDraw(c, omegas, amps, attempt))
    if spec.peak_amplitude is not None:
        values = spec.peak_amplitude * shapes / np.abs(shapes).max(axis=1, keepdims=True)
        return ControlField(values, t_final), draws
    fld = ControlField(shapes, t_final)
    return rescale_to_rfs(fld, sys, spec.target_sigma0), draws


def synthesize(spec, sys, t_final, l_slices):
    return synthesize_with_log(spec, sys, t_final, l_slices)[0]


def write_draw_log(path, draws):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel", "mode", "omega", "amplitude"])
        for d in draws:
            for m, (om, a) in enumerate(zip(d.omegas, d.amplitudes)):
                w.writerow([d.channel, m, repr(float(om)), repr(float(a))])


def mean_amplitude(fld):
    """(1/L) sum_l |eps_l| for each channel."""
    return np.abs(fld.values).mean(axis=1)


def rfs_weights(sys):
    """Per-channel sum of |H_i,jk| / |E_j - E_k| and the number of counted transitions.

    Pairs whose coupling vanishes or whose levels are degenerate are skipped.
    """
    scale = max(np.abs(sys.energies()).max(), 1e-300)
    weights = np.zeros(sys.k)
    count = 0
    for i in range(sys.k):
        cmax = max(t.couplings[i] for t in sys.transition_table) if sys.transition_table else 0.0
        for t in sys.transition_table:
            mu = t.couplings[i]
            if mu > COUPLING_RTOL * cmax and t.gap > DEGENERATE_RTOL * scale:
                weights[i] += mu / t.gap
                count += 1
    if count == 0:
        raise NoValidTransitions("no coupled pair of non-degenerate levels")
    return weights, count


def rfs(fld, sys):
    """Relative field strength: mean ratio of Rabi to transition frequency."""
    weights, count = rfs_weights(sys)
    return float(np.dot(mean_amplitude(fld), weights) / count)


def rescale_to_rfs(fld, sys, target):
    current = rfs(fld, sys)
    if current == 0.0:
        raise ZeroField("cannot rescale a field with zero RFS")
    if current == target:
        return fld
    return fld.with_values(fld.values * (target / current))


def with_sigma0(spec, sigma0):
    return replace(spec, target_sigma0=sigma0, peak_amplitude=None)
