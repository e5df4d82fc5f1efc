"""Structural impulse responses and long-run impact.

The moving-average weights of the fitted autoregression, premultiplied into
the inverse contemporaneous matrix, give the response of each variable to a
one-unit structural shock.  When the lag polynomial is stable the cumulative
responses converge to a closed-form long-run impact matrix.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import IdentificationError
from .ith import StructuralEstimate
from .varcore import VarFit

__all__ = [
    "ImpulseResponseSet",
    "impulse_responses",
    "long_run_impact",
    "companion_spectral_radius",
    "STATIONARITY_MARGIN",
]

STATIONARITY_MARGIN = 1e-6

IRF_HEADER = [
    "window_id",
    "k",
    "irf_rr",
    "irf_rf",
    "irf_fr",
    "irf_ff",
    "cum_rr",
    "cum_rf",
    "cum_fr",
    "cum_ff",
]


@dataclasses.dataclass
class ImpulseResponseSet:
    """Responses by horizon; entry (i, j) is variable i's move after a unit
    shock to equation j, with i, j in (return, flow) order.

    ``cumulative[k]`` prefix-sums the responses through horizon k.
    ``long_run`` is None when the lag polynomial is too close to the unit
    circle for the closed form to apply.
    """

    horizons: np.ndarray
    irf: np.ndarray
    cumulative: np.ndarray
    long_run: np.ndarray | None
    stationary: bool
    spectral_radius: float

    def to_rows(self, window_id: str) -> list[list]:
        rows = []
        for k in self.horizons:
            a, c = self.irf[k], self.cumulative[k]
            rows.append(
                [window_id, int(k)]
                + [a[0, 0], a[0, 1], a[1, 0], a[1, 1]]
                + [c[0, 0], c[0, 1], c[1, 0], c[1, 1]]
            )
        return rows


def _impact_inverse(estimate: StructuralEstimate) -> np.ndarray:
    det = 1.0 - estimate.price_impact * estimate.flow_impact
    if abs(det) < 1e-12:
        raise IdentificationError("contemporaneous matrix is singular (b_r * b_f = 1)")
    return np.array(
        [[1.0, estimate.price_impact], [estimate.flow_impact, 1.0]]
    ) / det


def companion_spectral_radius(lag_mats: np.ndarray) -> float:
    """Largest eigenvalue modulus of the lag polynomial's companion matrix."""
    p = len(lag_mats)
    if p == 0:
        return 0.0
    comp = np.zeros((2 * p, 2 * p))
    for j in range(p):
        comp[0:2, 2 * j : 2 * j + 2] = lag_mats[j]
    if p > 1:
        comp[2:, :-2] = np.eye(2 * (p - 1))
    return float(np.max(np.abs(np.linalg.eigvals(comp))))


def impulse_responses(
    fit: VarFit, estimate: StructuralEstimate, k_max: int = 10
) -> ImpulseResponseSet:
    """Structural impulse responses up to horizon ``k_max``.

    Horizon zero is the inverse contemporaneous matrix; subsequent horizons
    follow the recursion IRF[k] = sum_j lag_mats[j-1] @ IRF[k-j] over the
    available lags, so the cumulative path is a plain prefix sum.
    """
    if k_max < 0:
        raise ValueError("k_max must be >= 0")
    b_inv = _impact_inverse(estimate)
    p = fit.lag_order
    irf = np.zeros((k_max + 1, 2, 2))
    irf[0] = b_inv
    for k in range(1, k_max + 1):
        acc = np.zeros((2, 2))
        for j in range(1, min(k, p) + 1):
            acc += fit.lag_mats[j - 1] @ irf[k - j]
        irf[k] = acc
    cumulative = np.cumsum(irf, axis=0)

    long_run, stationary, rho = long_run_impact(fit, estimate)
    return ImpulseResponseSet(
        horizons=np.arange(k_max + 1),
        irf=irf,
        cumulative=cumulative,
        long_run=long_run,
        stationary=stationary,
        spectral_radius=rho,
    )


def long_run_impact(
    fit: VarFit, estimate: StructuralEstimate, margin: float = STATIONARITY_MARGIN
) -> tuple[np.ndarray | None, bool, float]:
    """Closed-form infinite-horizon cumulative response.

    Returns ``(matrix, stationary, spectral_radius)``; the matrix is
    ``inv(I - sum of lag matrices) @ inv(B)`` when the companion spectral
    radius is below one by at least ``margin``, otherwise None.
    """
    rho = companion_spectral_radius(fit.lag_mats)
    if rho >= 1.0 - margin:
        return None, False, rho
    b_inv = _impact_inverse(estimate)
    phi_sum = fit.lag_mats.sum(axis=0) if fit.lag_order > 0 else np.zeros((2, 2))
    mat = np.linalg.solve(np.eye(2) - phi_sum, b_inv)
    return mat, True, rho
