"""Time and nonlinear-frequency grids, sample containers and DFT helpers."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgument

__all__ = [
    "TimeGrid",
    "NonlinearGrid",
    "TimeSignal",
    "SpectrumKind",
    "SpectrumSamples",
    "make_time_grid",
    "make_nonlinear_grid",
    "dft",
    "inverse_dft",
    "linear_surrogate_spectrum",
    "signal_from_linear_surrogate",
    "is_power_of_two",
]


def is_power_of_two(n) -> bool:
    return isinstance(n, (int, np.integer)) and n >= 1 and (int(n) & (int(n) - 1)) == 0


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeGrid:
    """Uniform sampling grid ``t_k = t_start + k * dt``.

    Attributes
    ----------
    n_samples : int
        Number of samples, a power of two >= 2.
    dt : float
        Sample spacing in seconds.
    t_start : float
        Time of the first sample in seconds.
    """

    n_samples: int
    dt: float
    t_start: float

    def __post_init__(self):
        if not is_power_of_two(self.n_samples) or self.n_samples < 2:
            raise InvalidArgument(f"n_samples must be a power of two >= 2, got {self.n_samples!r}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise InvalidArgument(f"dt must be positive and finite, got {self.dt!r}")
        if not math.isfinite(self.t_start):
            raise InvalidArgument("t_start must be finite")

    @property
    def window(self) -> float:
        return self.n_samples * self.dt

    @property
    def t_end(self) -> float:
        """End of the last sample interval, ``t_start + n * dt``."""
        return self.t_start + self.n_samples * self.dt

    def times(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.n_samples)


@dataclass(frozen=True, eq=False)
class NonlinearGrid:
    """Real nonlinear frequencies paired with a time grid.

    ``lambda_values[k] = pi * k' / (n * dt)`` for ``k' = -n/2 .. n/2 - 1``, so
    that ``2 * lambda`` is the angular frequency grid of the DFT.
    """

    n_samples: int
    lambda_values: np.ndarray
    dt: float

    def __post_init__(self):
        object.__setattr__(self, "lambda_values", _frozen(self.lambda_values, np.float64))
        if self.lambda_values.shape != (self.n_samples,):
            raise InvalidArgument("lambda_values length must equal n_samples")

    @property
    def spacing(self) -> float:
        return math.pi / (self.n_samples * self.dt)

    @property
    def lambda_max(self) -> float:
        return float(self.lambda_values[-1])

    def __eq__(self, other):
        if not isinstance(other, NonlinearGrid):
            return NotImplemented
        return (
            self.n_samples == other.n_samples
            and self.dt == other.dt
            and np.array_equal(self.lambda_values, other.lambda_values)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class TimeSignal:
    """Complex samples on a :class:`TimeGrid`."""

    grid: TimeGrid
    samples: np.ndarray

    def __post_init__(self):
        s = _frozen(self.samples, np.complex128)
        if s.shape != (self.grid.n_samples,):
            raise InvalidArgument(
                f"signal has {s.size} samples, grid expects {self.grid.n_samples}"
            )
        if not np.all(np.isfinite(s)):
            raise InvalidArgument("signal samples must be finite")
        object.__setattr__(self, "samples", s)

    def energy(self) -> float:
        """Time-domain energy ``sum |q|^2 dt``."""
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.dt)


class SpectrumKind(enum.Enum):
    NonlinearQ = "nonlinear"
    LinearSurrogate = "linear"
    CoeffA = "a"
    CoeffB = "b"


@dataclass(frozen=True, eq=False)
class SpectrumSamples:
    """Complex values sampled on a :class:`NonlinearGrid`."""

    grid: NonlinearGrid
    values: np.ndarray
    kind: SpectrumKind

    def __post_init__(self):
        v = _frozen(self.values, np.complex128)
        if v.shape != (self.grid.n_samples,):
            raise InvalidArgument(
                f"spectrum has {v.size} samples, grid expects {self.grid.n_samples}"
            )
        if not np.all(np.isfinite(v)):
            raise InvalidArgument("spectrum values must be finite")
        object.__setattr__(self, "values", v)
        if not isinstance(self.kind, SpectrumKind):
            raise InvalidArgument(f"unknown spectrum kind {self.kind!r}")


def make_time_grid(n_samples: int, sample_rate: float, t_start: float | None = None) -> TimeGrid:
    """Build a time grid.

    Parameters
    ----------
    n_samples : int
        Power of two >= 2.
    sample_rate : float
        Samples per second.
    t_start : float, optional
        First sample time. Defaults to ``-n * dt / 2`` (grid centred on zero).

    Examples
    --------
    >>> g = make_time_grid(2, 1.0)
    >>> g.times().tolist()
    [-1.0, 0.0]
    """
    if not is_power_of_two(n_samples) or n_samples < 2:
        raise InvalidArgument(f"n_samples must be a power of two >= 2, got {n_samples!r}")
    try:
        rate = float(sample_rate)
    except (TypeError, ValueError) as exc:
        raise InvalidArgument(f"sample_rate must be a number, got {sample_rate!r}") from exc
    if not (rate > 0 and math.isfinite(rate)):
        raise InvalidArgument(f"sample_rate must be positive, got {sample_rate!r}")
    dt = 1.0 / rate
    if t_start is None:
        t_start = -n_samples * dt / 2
    return TimeGrid(int(n_samples), dt, float(t_start))


def make_nonlinear_grid(tg: TimeGrid) -> NonlinearGrid:
    n = tg.n_samples
    k = np.arange(-(n // 2), n // 2)
    lam = math.pi * k / (n * tg.dt)
    return NonlinearGrid(n, lam, tg.dt)


def _check_pow2(x):
    if not is_power_of_two(x.shape[-1]):
        raise InvalidArgument(f"transform length must be a power of two, got {x.shape[-1]}")


def dft(x) -> np.ndarray:
    """Forward DFT without prefactor, ``X_k = sum_j x_j exp(-2 pi i j k / n)``."""
    x = np.asarray(x, dtype=np.complex128)
    _check_pow2(x)
    return np.fft.fft(x)


def inverse_dft(x) -> np.ndarray:
    """Inverse of :func:`dft`, carrying the ``1/n`` factor."""
    x = np.asarray(x, dtype=np.complex128)
    _check_pow2(x)
    return np.fft.ifft(x)


def linear_surrogate_spectrum(q: TimeSignal) -> SpectrumSamples:
    """Low-power limit of the nonlinear spectrum.

    ``L(lambda) = -dt * sum_u conj(q(t_u)) exp(-2 i lambda t_u)``, which is the
    first-order term of ``b/a`` under the scattering conventions of
    :mod:`nftnet.scattering`.
    """
    tg = q.grid
    ng = make_nonlinear_grid(tg)
    spec = np.fft.fftshift(dft(np.conj(q.samples)))
    phase = np.exp(-2j * ng.lambda_values * tg.t_start)
    return SpectrumSamples(ng, -tg.dt * phase * spec, SpectrumKind.LinearSurrogate)


def signal_from_linear_surrogate(spec: SpectrumSamples, tg: TimeGrid) -> TimeSignal:
    """Exact inverse of :func:`linear_surrogate_spectrum` on the same grid."""
    if spec.grid.n_samples != tg.n_samples or spec.grid.dt != tg.dt:
        raise InvalidArgument("spectrum grid does not belong to the time grid")
    phase = np.exp(2j * spec.grid.lambda_values * tg.t_start)
    conj_q = inverse_dft(np.fft.ifftshift(spec.values * phase / -tg.dt))
    return TimeSignal(tg, np.conj(conj_q))
