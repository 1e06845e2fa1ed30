"""Information-flux recurrence, Taylor coefficients, and the inversion.

The probed signal has the exact expansion

    alpha_1(t) = sum_l (2t)^l / l! * delta_1^(l),

where the flux coefficients obey the two-term recurrence

    delta_j^(l) = (-1)^j [ c_{j-1} delta_{j-1}^(l-1) + c_j delta_{j+1}^(l-1) ],

with boundary convention c_0 = c_{m+1} = 0 and initial condition
delta_j^(0) = 1 for j = 1, else 0.  Odd orders of delta_1 vanish, so

    alpha_1(t) = 1 + sum_j mu_j t^{2j},    mu_j = 2^{2j} delta_1^(2j) / (2j)!

Two structural facts drive the inversion: the light cone (order l reaches
at most node l+1, so mu_j depends only on links c_1..c_j) and affinity
(mu_j is affine in c_j^2 once c_1..c_{j-1} are fixed, because exactly one
order-2j round trip reaches link j).  Matching mu_j against the fitted
coefficients eta_j therefore solves for one new link per order.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateError,
    InsufficientChain,
    InversionError,
    TomographyWarning,
)


def _links_of(chain) -> np.ndarray:
    """Accept a FluxChain or a bare 1-D array of link strengths."""
    links = getattr(chain, "links", chain)
    arr = np.asarray(links, dtype=float)
    if arr.ndim != 1:
        raise ValueError("links must be one-dimensional")
    return arr


@dataclass(frozen=True, eq=False)
class DeltaTable:
    """Flux coefficients delta_j^(l) for one chain, up to a max order.

    entries[j-1, l] holds delta_j^(l) for j in 1..m+1, l in 0..max_order.
    """

    links: np.ndarray
    entries: np.ndarray
    max_order: int

    def delta(self, j: int, l: int) -> float:
        """delta_j^(l) with 1-based node index j."""
        return float(self.entries[j - 1, l])

    def verify(self) -> bool:
        """Recompute the table and compare exactly."""
        fresh = delta_coefficients(self.links, self.max_order)
        return bool(np.array_equal(fresh.entries, self.entries))

    def to_csv(self, path: str | Path) -> None:
        """Dump as (j, l, value) rows for debugging."""
        with open(path, "w") as fh:
            fh.write("j,l,value\n")
            for j in range(1, self.entries.shape[0] + 1):
                for l in range(self.max_order + 1):
                    fh.write(f"{j},{l},{float(self.entries[j - 1, l])!r}\n")


@dataclass(frozen=True, eq=False)
class TaylorCoefficients:
    """Paired t^{2j} coefficients: mu from the chain, eta from the fit."""

    mu: np.ndarray
    eta: np.ndarray

    def max_mismatch(self) -> float:
        return float(np.max(np.abs(self.mu - self.eta)))


def delta_coefficients(chain, max_order: int) -> DeltaTable:
    """Fill the recurrence table for delta_j^(l), l = 0..max_order.

    Accepts a FluxChain or a bare array of link strengths (zeros are
    permitted here; probing the inversion uses partially zeroed chains).
    """
    links = _links_of(chain)
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    m = links.size
    cpad = np.zeros(m + 2)
    cpad[1 : m + 1] = links
    # tab[l, j] = delta_j^(l); ghost columns j=0 and j=m+2 stay zero
    tab = np.zeros((max_order + 1, m + 3))
    tab[0, 1] = 1.0
    sign = (-1.0) ** np.arange(1, m + 2)
    for l in range(1, max_order + 1):
        tab[l, 1 : m + 2] = sign * (
            cpad[0 : m + 1] * tab[l - 1, 0 : m + 1]
            + cpad[1 : m + 2] * tab[l - 1, 2 : m + 3]
        )
    return DeltaTable(links=links, entries=tab[:, 1 : m + 2].T.copy(), max_order=max_order)


def _mu_unchecked(links, n_orders: int) -> np.ndarray:
    """mu_1..mu_K from the recurrence, no link-count precondition."""
    table = delta_coefficients(links, 2 * n_orders)
    d1 = table.entries[0]
    # odd orders of delta_1 vanish identically: the recurrence only connects
    # (node parity) == (order parity) classes
    assert not np.any(d1[1::2]), "odd-order delta_1 must vanish"
    return np.array(
        [4.0**j * d1[2 * j] / math.factorial(2 * j) for j in range(1, n_orders + 1)]
    )


def mu_coefficients(chain, n_orders: int) -> np.ndarray:
    """Taylor coefficients mu_1..mu_K of the chain's signal.

    Requires m >= K: by the light cone, mu_j carries information about
    links 1..j only, so orders beyond the link count determine nothing new.
    """
    links = _links_of(chain)
    if links.size < n_orders:
        raise InsufficientChain(
            f"{n_orders} orders requested but chain has only {links.size} links"
        )
    return _mu_unchecked(links, n_orders)


def eta_coefficients(fit, n_orders: int) -> np.ndarray:
    """Taylor coefficients eta_1..eta_K of a fitted cosine sum.

    For sum_i A_i cos(omega_i t) the t^{2j} coefficient is

        eta_j = (-1)^j / (2j)! * sum_i A_i omega_i^(2j),

    linear in each amplitude.  A dc term contributes only at order zero,
    so it never enters.  ``fit`` is a CosineSumModel or any object with
    ``amplitudes`` and ``frequencies`` arrays.
    """
    A = np.asarray(fit.amplitudes, dtype=float)
    om = np.asarray(fit.frequencies, dtype=float)
    if not (np.all(np.isfinite(A)) and np.all(np.isfinite(om))):
        raise ValueError("fit parameters must be finite")
    return np.array(
        [
            (-1.0) ** j / math.factorial(2 * j) * float(np.sum(A * om ** (2 * j)))
            for j in range(1, n_orders + 1)
        ]
    )


def invert_couplings(
    eta,
    n_links: int | None = None,
    *,
    radicand_tol: float = 1e-8,
    degeneracy_tol: float = 1e-14,
) -> np.ndarray:
    """Solve eta_j = mu_j(c) sequentially for the link magnitudes.

    At step j the earlier links are already estimated and mu_j is affine
    in c_j^2, so two probe evaluations pin the line: p0 at c_j = 0 and p1
    at c_j = 1, links beyond j set to zero (legal by the light cone).
    Then c_j = sqrt((eta_j - p0)/(p1 - p0)).  Returns positive roots;
    signs are applied downstream by the caller when they are known.

    Small negative radicands (within ``radicand_tol``) are clamped to
    zero with a warning; larger ones raise InversionError flagging a fit
    inconsistency.  A vanishing slope |p1 - p0| means an earlier link was
    estimated at zero, making this one unidentifiable: DegenerateError.
    """
    eta = np.asarray(eta, dtype=float)
    m = eta.size
    if n_links is not None and n_links != m:
        raise ValueError(f"eta has {m} entries but {n_links} links were requested")
    c = np.zeros(m)
    for j in range(1, m + 1):
        probe = np.zeros(j)
        probe[: j - 1] = c[: j - 1]
        p0 = _mu_unchecked(probe, j)[-1]
        probe[j - 1] = 1.0
        p1 = _mu_unchecked(probe, j)[-1]
        scale = max(1.0, abs(p0), abs(p1))
        # structural fact 1, light cone: links beyond j cannot enter mu_j
        tail = np.concatenate([probe, np.ones(m - j)])
        assert abs(_mu_unchecked(tail, j)[-1] - p1) <= 1e-12 * scale
        # structural fact 2, affinity in c_j^2: the three-point second
        # difference of an affine function is zero
        probe[j - 1] = 2.0
        p2 = _mu_unchecked(probe, j)[-1]
        assert abs((p2 - p0) - 4.0 * (p1 - p0)) <= 1e-9 * max(scale, abs(p2))
        if abs(p1 - p0) < degeneracy_tol:
            raise DegenerateError(
                f"link {j} is unidentifiable: an earlier link was estimated at zero",
                link=j,
            )
        ratio = (eta[j - 1] - p0) / (p1 - p0)
        if ratio < -radicand_tol:
            raise InversionError(
                f"link {j}: squared coupling came out {ratio:.3e}; "
                "the fit is inconsistent with a chain of this length",
                link=j,
                radicand=ratio,
            )
        if ratio < 0.0:
            warnings.warn(
                f"link {j}: radicand {ratio:.3e} clamped to zero",
                TomographyWarning,
                stacklevel=2,
            )
            ratio = 0.0
        c[j - 1] = math.sqrt(ratio)
    return c
