"""Crossover-frequency extraction from measured gain sweeps.

The single-pole model makes ``1/gain^2`` linear in ``f^2`` with slope
``1/f0^2``, so the crossover frequency comes out of an ordinary
least-squares line fit.  A quick alternative skips the regression and reads
f0 from the frequency at which the gain has dropped n-fold from its
low-frequency value.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .base import ParamsMixin, as_float_array, check_is_fitted
from .circuit import Topology


class FitError(RuntimeError):
    """The sweep cannot be turned into a crossover frequency."""


class SweepRangeError(FitError):
    """The sweep does not reach the requested gain drop."""

    def __init__(self, message: str, max_attainable_n: float):
        super().__init__(message)
        self.max_attainable_n = max_attainable_n


class CalibrationWarning(UserWarning):
    """Fitted intercept is far from the value the topology predicts."""


def _ideal_intercept(feedback_r: float | None, gain_r: float | None) -> float | None:
    """1/(R/r + 1)^2 from the topology, when it is known."""
    if feedback_r is None or gain_r is None:
        return None
    beta = Topology(feedback_r=feedback_r, gain_r=gain_r).beta
    return beta * beta


@dataclass(frozen=True)
class SweepRecord:
    """Ordered (frequency, gain magnitude) samples of one sweep, real or
    synthetic, with optional topology metadata for diagnostics."""

    frequency_hz: np.ndarray
    gain: np.ndarray
    feedback_r: float | None = None
    gain_r: float | None = None
    label: str | None = None

    def __post_init__(self):
        f = as_float_array(self.frequency_hz, "frequency_hz", min_len=3).copy()
        y = as_float_array(self.gain, "gain", min_len=3).copy()
        if f.size != y.size:
            raise ValueError(
                f"frequency_hz and gain must have equal length, got {f.size} and {y.size}"
            )
        if f[0] <= 0.0 or np.any(np.diff(f) <= 0.0):
            raise ValueError("frequencies must be positive and strictly increasing")
        if np.any(y <= 0.0):
            raise ValueError("gains must be positive")
        f.setflags(write=False)
        y.setflags(write=False)
        object.__setattr__(self, "frequency_hz", f)
        object.__setattr__(self, "gain", y)

    @property
    def n_points(self) -> int:
        return self.frequency_hz.size

    @property
    def expected_intercept(self) -> float | None:
        return _ideal_intercept(self.feedback_r, self.gain_r)


@dataclass(frozen=True)
class FitResult:
    """Outcome of the roll-off regression."""

    f0_hz: float
    slope: float
    intercept: float
    corr: float
    n_points: int
    intercept_expected: float | None = None
    intercept_rel_dev: float | None = None


class CrossoverFrequencyFit(ParamsMixin):
    """Least-squares crossover-frequency estimator.

    Fits a straight line to ``v = 1/gain^2`` against ``u = f^2`` and reads
    ``f0 = 1/sqrt(slope)``.  The intercept is fitted freely; when the
    feedback resistors are given, the relative deviation of the intercept
    from the ideal ``1/(R/r + 1)^2`` is reported as a calibration
    diagnostic (a deviation beyond 20 percent warns).

    Parameters
    ----------
    feedback_r, gain_r : float, optional
        Feedback-network resistors in ohms, enabling the intercept
        diagnostic.
    weighted : bool, default False
        Weight the line fit by 1/v^2 (constant relative gain noise) instead
        of plain least squares.  The correlation coefficient is always the
        plain Pearson correlation of (u, v).

    Attributes
    ----------
    f0_hz_ : float
        Fitted crossover frequency in Hz.
    slope_, intercept_ : float
        Fitted line coefficients in the (f^2, 1/gain^2) plane.
    corr_ : float
        Pearson correlation coefficient of the transformed data.
    intercept_expected_, intercept_rel_dev_ : float or None
        Ideal intercept and the relative deviation of the fit from it.
    """

    def __init__(
        self,
        feedback_r: float | None = None,
        gain_r: float | None = None,
        weighted: bool = False,
    ):
        self.feedback_r = feedback_r
        self.gain_r = gain_r
        self.weighted = weighted

    def fit(self, frequency_hz, gain) -> "CrossoverFrequencyFit":
        f = as_float_array(frequency_hz, "frequency_hz", min_len=3)
        y = as_float_array(gain, "gain", min_len=3)
        if f.size != y.size:
            raise ValueError(
                f"frequency_hz and gain must have equal length, got {f.size} and {y.size}"
            )
        if np.any(f <= 0.0) or np.any(y <= 0.0):
            raise ValueError("frequencies and gains must be positive")

        u = f * f
        v = 1.0 / (y * y)
        if not np.isfinite(v).all():
            raise ValueError("transformed ordinates 1/gain^2 must be finite")

        w = 1.0 / (v * v) if self.weighted else np.ones_like(v)
        w_sum = w.sum()
        u_bar = (w * u).sum() / w_sum
        v_bar = (w * v).sum() / w_sum
        du = u - u_bar
        dv = v - v_bar
        denom = (w * du * du).sum()
        if denom == 0.0:
            raise FitError("sweep does not resolve roll-off: no frequency spread")
        slope = (w * du * dv).sum() / denom
        intercept = v_bar - slope * u_bar

        var_u = np.mean((u - u.mean()) ** 2)
        var_v = np.mean((v - v.mean()) ** 2)
        if var_v == 0.0:
            raise FitError("sweep does not resolve roll-off: gain is constant")
        corr = np.mean((u - u.mean()) * (v - v.mean())) / math.sqrt(var_u * var_v)

        if slope <= 0.0:
            raise FitError(
                "sweep does not resolve roll-off: fitted slope is not positive "
                "(all points are far below the closed-loop corner frequency)"
            )

        self.n_points_ = int(f.size)
        self.slope_ = float(slope)
        self.intercept_ = float(intercept)
        self.corr_ = float(corr)
        self.f0_hz_ = 1.0 / math.sqrt(slope)
        self.intercept_expected_ = _ideal_intercept(self.feedback_r, self.gain_r)
        if self.intercept_expected_ is not None:
            self.intercept_rel_dev_ = (
                self.intercept_ - self.intercept_expected_
            ) / self.intercept_expected_
            if abs(self.intercept_rel_dev_) > 0.20:
                warnings.warn(
                    f"fitted intercept deviates {self.intercept_rel_dev_:+.1%} from the "
                    "topology's ideal value; the gain calibration looks suspect",
                    CalibrationWarning,
                    stacklevel=2,
                )
        else:
            self.intercept_rel_dev_ = None
        return self

    def predict(self, frequency_hz) -> np.ndarray:
        """Modeled gain magnitude at the given frequencies."""
        check_is_fitted(self, "f0_hz_")
        f = as_float_array(frequency_hz, "frequency_hz")
        v_model = self.intercept_ + self.slope_ * f * f
        with np.errstate(invalid="ignore"):
            return 1.0 / np.sqrt(v_model)

    def to_result(self) -> FitResult:
        check_is_fitted(self, "f0_hz_")
        return FitResult(
            f0_hz=self.f0_hz_,
            slope=self.slope_,
            intercept=self.intercept_,
            corr=self.corr_,
            n_points=self.n_points_,
            intercept_expected=self.intercept_expected_,
            intercept_rel_dev=self.intercept_rel_dev_,
        )


def fit_f0(record: SweepRecord, weighted: bool = False) -> FitResult:
    """Run the roll-off regression on a sweep record."""
    est = CrossoverFrequencyFit(
        feedback_r=record.feedback_r, gain_r=record.gain_r, weighted=weighted
    )
    return est.fit(record.frequency_hz, record.gain).to_result()


class QuickCrossoverFit(ParamsMixin):
    """Regression-free crossover-frequency estimator.

    Takes the low-frequency gain ``y0`` from the sweep (first point by
    default, or the mean of the lowest decile with ``baseline="low_decile"``),
    locates the frequency where the gain crosses ``y0/n`` by linear
    interpolation in the (f^2, 1/gain^2) plane - where the model is exactly
    linear - and applies ``f0 = prefactor * f_fraction / sqrt(n^2 - 1)``.
    The prefactor is the ideal DC gain from the topology when both resistors
    are given, otherwise the measured ``y0``.
    """

    def __init__(
        self,
        n: float = 2.0,
        feedback_r: float | None = None,
        gain_r: float | None = None,
        baseline: str = "first",
    ):
        self.n = n
        self.feedback_r = feedback_r
        self.gain_r = gain_r
        self.baseline = baseline

    def fit(self, frequency_hz, gain) -> "QuickCrossoverFit":
        if not self.n > 1.0:
            raise ValueError(f"gain ratio n must exceed 1, got {self.n!r}")
        if self.baseline not in ("first", "low_decile"):
            raise ValueError(f"baseline must be 'first' or 'low_decile', got {self.baseline!r}")
        f = as_float_array(frequency_hz, "frequency_hz", min_len=3)
        y = as_float_array(gain, "gain", min_len=3)
        if f.size != y.size:
            raise ValueError(
                f"frequency_hz and gain must have equal length, got {f.size} and {y.size}"
            )
        if np.any(f <= 0.0) or np.any(y <= 0.0):
            raise ValueError("frequencies and gains must be positive")

        if self.baseline == "first":
            y0 = float(y[0])
        else:
            head = max(1, math.ceil(f.size / 10))
            y0 = float(y[:head].mean())

        u = f * f
        v = 1.0 / (y * y)
        v_target = (self.n / y0) ** 2
        if v[0] >= v_target:
            raise FitError(
                "first sweep point is not in the flat region: "
                f"gain has already dropped {self.n:g}-fold at the lowest frequency"
            )
        above = np.nonzero(v >= v_target)[0]
        if above.size == 0:
            max_n = y0 / float(y.min())
            raise SweepRangeError(
                f"sweep range too narrow for n = {self.n:g} "
                f"(largest attainable n is {max_n:.4g})",
                max_attainable_n=max_n,
            )
        hi = int(above[0])
        lo = hi - 1
        u_cross = u[lo] + (v_target - v[lo]) * (u[hi] - u[lo]) / (v[hi] - v[lo])
        f_fraction = math.sqrt(u_cross)

        if self.feedback_r is not None and self.gain_r is not None:
            scale = Topology(feedback_r=self.feedback_r, gain_r=self.gain_r).ideal_dc_gain
        else:
            scale = y0
        self.baseline_gain_ = y0
        self.f_fraction_hz_ = f_fraction
        self.bracket_lo_ = (float(f[lo]), float(y[lo]))
        self.bracket_hi_ = (float(f[hi]), float(y[hi]))
        self.f0_hz_ = scale * f_fraction / math.sqrt(self.n * self.n - 1.0)
        return self


def quick_fit_f0(record: SweepRecord, n: float = 2.0, baseline: str = "first") -> float:
    """Quick crossover frequency (Hz) from one sweep record."""
    est = QuickCrossoverFit(
        n=n, feedback_r=record.feedback_r, gain_r=record.gain_r, baseline=baseline
    )
    return est.fit(record.frequency_hz, record.gain).f0_hz_
