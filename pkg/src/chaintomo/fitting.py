"""Cosine-sum recovery from a sampled trace.

The probed signal is a finite sum of cosines (plus a constant when the
flux chain has an odd node count).  estimate_spectrum seeds frequencies
from a zero-padded periodogram and amplitudes from linear least squares;
refine_fit polishes everything with damped least squares.  fit_trace
wires the two together and, when the seeded fit's residual betrays merged
periodogram peaks, reseeds by residual peeling and, failing that, by a
matrix-pencil subspace estimate; each reseed goes through the same
refinement and the best residual wins.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConvergenceError, ResolutionError, SpecError, TomographyWarning


@dataclass(frozen=True, eq=False)
class CosineSumModel:
    """Fitted amplitudes and angular frequencies, canonically ascending.

    dc is None when no constant term is modeled.  residual_rms is the
    root-mean-square misfit of the model that produced the parameters;
    iterations counts refinement steps (0 for a raw seed).
    """

    amplitudes: np.ndarray
    frequencies: np.ndarray
    dc: float | None = None
    residual_rms: float = float("nan")
    iterations: int = 0

    def __post_init__(self):
        A = np.atleast_1d(np.asarray(self.amplitudes, dtype=float))
        om = np.atleast_1d(np.asarray(self.frequencies, dtype=float))
        object.__setattr__(self, "amplitudes", A)
        object.__setattr__(self, "frequencies", om)
        if A.shape != om.shape or A.ndim != 1:
            raise SpecError("amplitudes and frequencies must match in length")
        if A.size < 1:
            raise SpecError("a cosine-sum model needs at least one term")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(om))):
            raise SpecError("model parameters must be finite")
        if np.any(om < 0):
            raise SpecError("frequencies must be nonnegative")

    @property
    def n_terms(self) -> int:
        return int(self.amplitudes.size)

    @property
    def amplitude_sum(self) -> float:
        """sum A_i + dc; equals the noiseless signal at t = 0."""
        return float(self.amplitudes.sum() + (self.dc or 0.0))

    def evaluate(self, times) -> np.ndarray:
        t = np.atleast_1d(np.asarray(times, dtype=float))
        out = np.cos(np.outer(t, self.frequencies)) @ self.amplitudes
        if self.dc is not None:
            out = out + self.dc
        return out

    def sorted_by_frequency(self) -> "CosineSumModel":
        order = np.argsort(self.frequencies)
        return replace(
            self,
            amplitudes=self.amplitudes[order],
            frequencies=self.frequencies[order],
        )

    def to_dict(self) -> dict:
        return {
            "terms": [
                {"A": float(a), "omega": float(w)}
                for a, w in zip(self.amplitudes, self.frequencies)
            ],
            "dc": None if self.dc is None else float(self.dc),
            "residual_rms": float(self.residual_rms),
            "iterations": int(self.iterations),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CosineSumModel":
        return cls(
            amplitudes=np.array([term["A"] for term in d["terms"]], dtype=float),
            frequencies=np.array([term["omega"] for term in d["terms"]], dtype=float),
            dc=None if d.get("dc") is None else float(d["dc"]),
            residual_rms=float(d.get("residual_rms", float("nan"))),
            iterations=int(d.get("iterations", 0)),
        )


def _times_values(trace) -> tuple[np.ndarray, np.ndarray]:
    if hasattr(trace, "times"):
        times, values = trace.times, trace.values
    else:
        times, values = trace
    return np.asarray(times, dtype=float), np.asarray(values, dtype=float)


def _check_uniform(times: np.ndarray) -> float:
    steps = np.diff(times)
    dt = steps[0]
    if not np.allclose(steps, dt, rtol=1e-9, atol=0.0):
        raise SpecError("trace sampling must be uniform")
    return float(dt)


def _rayleigh(times: np.ndarray) -> float:
    # frequency resolution of the window: one periodogram bin
    return 2.0 * np.pi / (times[-1] - times[0])


def _lstsq_amplitudes(
    times: np.ndarray, values: np.ndarray, freqs: np.ndarray, include_dc: bool
) -> tuple[np.ndarray, float | None, float]:
    design = np.cos(np.outer(times, freqs))
    if include_dc:
        design = np.hstack([design, np.ones((times.size, 1))])
    coef, *_ = np.linalg.lstsq(design, values, rcond=None)
    resid = values - design @ coef
    rms = float(np.sqrt(resid @ resid / times.size))
    if include_dc:
        return coef[:-1], float(coef[-1]), rms
    return coef, None, rms


def _log_parabolic(power: np.ndarray, i: int, grid: np.ndarray) -> float:
    """Refine a peak position by a parabola through three log-power bins."""
    if not 0 < i < power.size - 1:
        return float(grid[i])
    y0, y1, y2 = np.log(power[i - 1 : i + 2] + 1e-300)
    denom = 2.0 * (y0 - 2.0 * y1 + y2)
    shift = (y0 - y2) / denom if denom != 0.0 else 0.0
    return float(grid[i] + shift * (grid[i + 1] - grid[i]))


def _periodogram(values: np.ndarray, dt: float, pad_factor: int):
    win = np.hanning(values.size)
    n_fft = pad_factor * values.size
    spectrum = np.fft.rfft(values * win, n=n_fft)
    omega = 2.0 * np.pi * np.fft.rfftfreq(n_fft, d=dt)
    return np.abs(spectrum) ** 2, omega


def estimate_spectrum(
    trace,
    n_terms: int,
    *,
    include_dc: bool = False,
    pad_factor: int = 32,
    guard_bins: float = 1.0,
) -> CosineSumModel:
    """Seed a cosine-sum model from the trace's periodogram.

    Takes the n_terms largest separated local maxima of a zero-padded,
    Hann-windowed periodogram, refines each position by log-parabolic
    interpolation, then fills amplitudes (and dc when requested) by
    linear least squares at the fixed frequencies.  Peaks closer than
    ``guard_bins`` Rayleigh bins count as one: fewer than n_terms
    separated peaks raises ResolutionError.
    """
    times, values = _times_values(trace)
    if times.size < 4 * n_terms:
        raise SpecError(
            f"need at least {4 * n_terms} samples to seed {n_terms} terms"
        )
    dt = _check_uniform(times)
    d_omega = _rayleigh(times)
    work = values - values.mean() if include_dc else values
    power, omega = _periodogram(work, dt, pad_factor)
    interior = np.where((power[1:-1] > power[:-2]) & (power[1:-1] >= power[2:]))[0] + 1
    interior = interior[omega[interior] > 0.5 * d_omega]
    picked: list[int] = []
    for idx in interior[np.argsort(power[interior])[::-1]]:
        if all(abs(omega[idx] - omega[j]) > guard_bins * d_omega for j in picked):
            picked.append(idx)
        if len(picked) == n_terms:
            break
    if len(picked) < n_terms:
        raise ResolutionError(
            f"only {len(picked)} separated spectral peaks in a window resolving "
            f"{d_omega:.3g} rad; {n_terms} terms requested"
        )
    freqs = np.sort([_log_parabolic(power, i, omega) for i in picked])
    amps, dc, rms = _lstsq_amplitudes(times, values, freqs, include_dc)
    return CosineSumModel(amps, freqs, dc=dc, residual_rms=rms, iterations=0)


def refine_fit(
    trace,
    init: CosineSumModel,
    *,
    max_iter: int = 500,
    ftol: float = 1e-12,
) -> CosineSumModel:
    """Damped least squares over all amplitudes, frequencies, and dc.

    Levenberg-style: the normal equations are damped by a multiple of
    their diagonal, the multiplier grows until a step decreases the sum
    of squares and shrinks after each accepted step.  Converged when the
    relative decrease drops below ftol; ConvergenceError (carrying the
    best model) if max_iter steps were not enough.
    """
    times, values = _times_values(trace)
    _check_uniform(times)
    n = init.n_terms
    has_dc = init.dc is not None
    theta = np.concatenate(
        [init.amplitudes, init.frequencies, [init.dc] if has_dc else []]
    )

    def model(th):
        out = np.cos(np.outer(times, th[n : 2 * n])) @ th[:n]
        return out + th[-1] if has_dc else out

    def jacobian(th):
        A, om = th[:n], th[n : 2 * n]
        arg = np.outer(times, om)
        J = np.empty((times.size, th.size))
        J[:, :n] = np.cos(arg)
        J[:, n : 2 * n] = -A[None, :] * times[:, None] * np.sin(arg)
        if has_dc:
            J[:, -1] = 1.0
        return J

    resid = model(theta) - values
    sse = float(resid @ resid)
    damping = 1e-3
    iterations = 0
    converged = False
    for iterations in range(1, max_iter + 1):
        J = jacobian(theta)
        grad = J.T @ resid
        hess = J.T @ J
        accepted = False
        for _ in range(50):
            try:
                step = np.linalg.solve(hess + damping * np.diag(np.diag(hess)), -grad)
            except np.linalg.LinAlgError:
                damping *= 10.0
                continue
            candidate = theta + step
            resid_new = model(candidate) - values
            sse_new = float(resid_new @ resid_new)
            if sse_new <= sse:
                accepted = True
                break
            damping *= 10.0
        if not accepted:
            converged = True  # no decrease possible: at the numerical floor
            break
        rel_drop = (sse - sse_new) / max(sse, 1e-300)
        theta, resid, sse = candidate, resid_new, sse_new
        damping = max(damping * 0.3, 1e-12)
        if rel_drop < ftol:
            converged = True
            break

    A = theta[:n]
    om = np.abs(theta[n : 2 * n])
    order = np.argsort(om)
    result = CosineSumModel(
        A[order],
        om[order],
        dc=float(theta[-1]) if has_dc else None,
        residual_rms=float(np.sqrt(sse / times.size)),
        iterations=iterations,
    )
    if not converged:
        raise ConvergenceError(
            f"no convergence in {max_iter} refinement steps "
            f"(residual rms {result.residual_rms:.3e})",
            best=result,
            residual_rms=result.residual_rms,
        )
    if result.n_terms > 1 and np.min(np.diff(result.frequencies)) < 1e-9:
        raise ConvergenceError(
            "refinement collapsed two frequencies onto each other",
            best=result,
            residual_rms=result.residual_rms,
        )
    return result


def _dominant_frequency(
    times: np.ndarray, resid: np.ndarray, pad_factor: int = 32
) -> float:
    power, omega = _periodogram(resid, times[1] - times[0], pad_factor)
    mask = omega > 0.25 * _rayleigh(times)
    idx = int(np.argmax(np.where(mask, power, -1.0)))
    return _log_parabolic(power, idx, omega)


def _peel_seed(
    times: np.ndarray,
    values: np.ndarray,
    n_terms: int,
    include_dc: bool,
    inner_iters: int = 3,
) -> CosineSumModel:
    """Seed by sequentially extracting one line at a time from residuals.

    After each new line, every frequency is re-estimated against the
    least-squares model of all the others; this keeps strong lines from
    masking weak near neighbors that a single periodogram pass merges.
    """
    freqs: list[float] = []
    for _ in range(n_terms):
        if freqs:
            amps, dc, _ = _lstsq_amplitudes(times, values, np.array(freqs), include_dc)
            resid = values - CosineSumModel(amps, np.array(freqs), dc=dc).evaluate(times)
        else:
            resid = values - values.mean() if include_dc else values
        freqs.append(_dominant_frequency(times, resid))
        for _ in range(inner_iters):
            for k in range(len(freqs)):
                others = np.array([f for i, f in enumerate(freqs) if i != k])
                if others.size:
                    amps, dc, _ = _lstsq_amplitudes(times, values, others, include_dc)
                    resid = values - CosineSumModel(amps, others, dc=dc).evaluate(times)
                else:
                    resid = values - values.mean() if include_dc else values
                freqs[k] = _dominant_frequency(times, resid)
    out = np.sort(np.array(freqs))
    amps, dc, rms = _lstsq_amplitudes(times, values, out, include_dc)
    return CosineSumModel(amps, out, dc=dc, residual_rms=rms, iterations=0)


def _pencil_seed(
    times: np.ndarray, values: np.ndarray, n_terms: int, include_dc: bool
) -> CosineSumModel | None:
    """Matrix-pencil (subspace shift-invariance) frequency estimates.

    A sum of p complex exponentials makes the Hankel matrix of the
    samples rank p; the dominant right-singular subspace is shift
    invariant and the eigenvalues of its one-step map are the poles.
    Grid-free, so it separates lines the windowed periodogram merges.
    Returns None when the estimate does not yield enough usable lines.
    """
    y = np.asarray(values, dtype=float)
    dt = times[1] - times[0]
    n = y.size
    poles = 2 * n_terms + (1 if include_dc else 0)
    L = max(poles + 2, n // 3)
    if n - L < poles:
        return None
    hank = np.lib.stride_tricks.sliding_window_view(y, L + 1)[: n - L]
    _, _, vt = np.linalg.svd(hank, full_matrices=False)
    signal_space = vt.conj().T[:, :poles]
    v0, v1 = signal_space[:-1, :], signal_space[1:, :]
    z = np.linalg.eigvals(np.linalg.pinv(v0) @ v1)
    omega = np.angle(z) / dt
    omega = np.sort(omega[omega > 0.25 * _rayleigh(times)])
    if omega.size < n_terms:
        return None
    omega = omega[:n_terms]
    amps, dc, rms = _lstsq_amplitudes(times, y, omega, include_dc)
    return CosineSumModel(amps, omega, dc=dc, residual_rms=rms, iterations=0)


def fit_trace(
    trace,
    n_terms: int,
    *,
    include_dc: bool = False,
    noise_sigma: float = 0.0,
    max_iter: int = 500,
    ftol: float = 1e-12,
) -> CosineSumModel:
    """Full fit: periodogram seed, damped refinement, reseeding rescue.

    The acceptable residual floor is max(1e-8, 2 * noise_sigma).  When
    the periodogram-seeded fit stays above it (merged peaks leave the
    refiner in a wrong basin) the trace is reseeded by residual peeling
    and then by a matrix-pencil estimate, each refined the same way; the
    smallest residual wins.  A best fit still above the floor raises
    ResolutionError: wrong values must not flow silently downstream.
    """
    times, values = _times_values(trace)
    floor = max(1e-8, 2.0 * noise_sigma)
    candidates: list[CosineSumModel] = []
    first_error: Exception | None = None

    def attempt(seed_fn):
        try:
            seed = seed_fn()
            if seed is None:
                return
            candidates.append(refine_fit((times, values), seed,
                                         max_iter=max_iter, ftol=ftol))
        except ConvergenceError as exc:
            if exc.best is not None:
                candidates.append(exc.best)
        except ResolutionError as exc:
            nonlocal first_error
            first_error = first_error or exc

    attempt(lambda: estimate_spectrum((times, values), n_terms, include_dc=include_dc))
    if not candidates or min(c.residual_rms for c in candidates) > floor:
        attempt(lambda: _peel_seed(times, values, n_terms, include_dc))
    if not candidates or min(c.residual_rms for c in candidates) > floor:
        attempt(lambda: _pencil_seed(times, values, n_terms, include_dc))

    if not candidates:
        raise first_error or ResolutionError(
            f"no usable seed for {n_terms} cosine terms"
        )
    best = min(candidates, key=lambda c: c.residual_rms)
    if best.residual_rms > floor:
        raise ResolutionError(
            f"best fit residual rms {best.residual_rms:.3e} exceeds the "
            f"acceptable floor {floor:.3e}; the window cannot separate "
            f"{n_terms} lines in this trace"
        )
    t0_value = best.amplitude_sum
    tol = max(1e-6, 5.0 * max(best.residual_rms, noise_sigma))
    if abs(t0_value - 1.0) > tol:
        warnings.warn(
            f"fitted amplitudes sum to {t0_value:.6f}, expected 1",
            TomographyWarning,
            stacklevel=2,
        )
    return best
