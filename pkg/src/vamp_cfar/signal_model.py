"""Scene, observation-matrix and measurement generation.

The radar forward model is ``y = A @ x0 + n`` with a complex M x N
partial-Fourier observation matrix A, a sparse complex scene x0 and
circular complex AWGN n.  The recovery engine works on real-stacked
data, so every generated object also carries its stacked form:

* a complex vector v maps to ``[Re(v); Im(v)]`` (length doubles),
* the matrix A maps to the 2M x 2N block matrix
  ``[[Re(A), -Im(A)], [Im(A), Re(A)]]``.

All randomness is injected through an explicit ``seed`` argument
(anything ``numpy.random.default_rng`` accepts), so every function here
is pure and safe to call concurrently from Monte-Carlo workers.

Bin indices exposed in public fields (``Scene.support``) are 1-based,
matching the usual radar convention of numbering range bins 1..N.
Arrays remain 0-based internally.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError

__all__ = [
    "Scene",
    "ObservationMatrix",
    "Measurement",
    "gen_partial_fourier",
    "gen_scene",
    "measure",
    "stack_complex",
    "unstack_real",
]


def stack_complex(v: np.ndarray) -> np.ndarray:
    """Stack a complex vector into its real form ``[Re(v); Im(v)]``."""
    v = np.asarray(v)
    return np.concatenate([np.real(v), np.imag(v)]).astype(float)


def unstack_real(v_ri: np.ndarray) -> np.ndarray:
    """Invert :func:`stack_complex`.

    Raises
    ------
    DimensionError
        If the input length is odd.
    """
    v_ri = np.asarray(v_ri, dtype=float)
    if v_ri.ndim != 1 or v_ri.size % 2 != 0:
        raise DimensionError(
            f"stacked vector must be 1-D with even length, got shape {v_ri.shape}"
        )
    half = v_ri.size // 2
    return v_ri[:half] + 1j * v_ri[half:]


def _stack_matrix(a: np.ndarray) -> np.ndarray:
    """Real 2M x 2N block form [[Re, -Im], [Im, Re]] of a complex matrix."""
    re, im = np.real(a), np.imag(a)
    return np.block([[re, -im], [im, re]])


@dataclass(frozen=True)
class Scene:
    """Sparse complex observation scene with ground-truth bookkeeping.

    Attributes
    ----------
    n : int
        Scene length in bins.
    amplitudes : np.ndarray
        Complex vector of length ``n``; nonzero exactly on ``support``.
    support : frozenset[int]
        1-based indices of occupied bins.
    per_target_snr_db : float
        Per-target SNR used to size amplitudes: every target satisfies
        ``|amplitude|^2 / noise_var == 10**(snr_db / 10)``.
    noise_var : float
        Total complex per-sample noise variance the SNR refers to.
    """

    n: int
    amplitudes: np.ndarray
    support: frozenset
    per_target_snr_db: float
    noise_var: float

    @property
    def stacked(self) -> np.ndarray:
        """Real-stacked ground truth, length ``2n``."""
        return stack_complex(self.amplitudes)


@dataclass(frozen=True)
class ObservationMatrix:
    """Partial-Fourier observation matrix and its real-stacked form.

    ``entries`` holds the complex M x N matrix whose rows are distinct
    rows of the unitary n-point DFT, hence orthonormal.  ``stacked`` is
    the 2M x 2N block layout consumed by the recovery engine.
    """

    m: int
    n: int
    entries: np.ndarray
    selected_rows: np.ndarray
    stacked: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class Measurement:
    """One noisy measurement vector ``y`` plus its stacked form."""

    complex_values: np.ndarray
    stacked: np.ndarray
    noise_var: float
    seed: object


def gen_partial_fourier(n: int, m: int, seed) -> ObservationMatrix:
    """Draw an M x N partial-Fourier observation matrix.

    ``m`` distinct row indices are chosen uniformly without replacement
    from the unitary n-point DFT with entries
    ``(1/sqrt(n)) * exp(-2j*pi*k*l/n)``.  Rows of the result are
    orthonormal, which keeps the matrix in the right-orthogonally
    invariant class the recovery engine expects.

    Parameters
    ----------
    n : int
        Scene length (number of DFT columns).
    m : int
        Number of measurements (rows kept), ``1 <= m <= n``.
    seed
        Seed for ``numpy.random.default_rng``.

    Returns
    -------
    ObservationMatrix
    """
    if n < 1 or m < 1 or m > n:
        raise DimensionError(f"need 1 <= m <= n, got m={m}, n={n}")
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(n, size=m, replace=False))
    cols = np.arange(n)
    entries = np.exp(-2j * np.pi * np.outer(rows, cols) / n) / np.sqrt(n)
    return ObservationMatrix(
        m=m, n=n, entries=entries, selected_rows=rows, stacked=_stack_matrix(entries)
    )


def gen_scene(n: int, k: int, snr_db: float, noise_var: float, seed) -> Scene:
    """Generate a sparse scene with ``k`` unit-phase-random targets.

    Each target sits on a distinct uniformly random bin and has
    magnitude ``sqrt(noise_var * 10**(snr_db/10))`` with an independent
    uniform random phase, so the per-target SNR relative to the total
    complex noise variance is exactly ``snr_db``.

    ``noise_var`` must be positive whenever ``k > 0`` (it sets the
    amplitude scale); an all-empty scene tolerates ``noise_var >= 0``.
    """
    if k < 0 or k > n:
        raise DimensionError(f"need 0 <= k <= n, got k={k}, n={n}")
    if k > 0 and noise_var <= 0:
        raise ValueError("noise_var must be > 0 when the scene has targets")
    if noise_var < 0:
        raise ValueError("noise_var must be >= 0")
    rng = np.random.default_rng(seed)
    amplitudes = np.zeros(n, dtype=complex)
    support_idx = np.sort(rng.choice(n, size=k, replace=False)) if k > 0 else np.array([], dtype=int)
    if k > 0:
        magnitude = np.sqrt(noise_var * 10.0 ** (snr_db / 10.0))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=k)
        amplitudes[support_idx] = magnitude * np.exp(1j * phases)
    return Scene(
        n=n,
        amplitudes=amplitudes,
        support=frozenset(int(i) + 1 for i in support_idx),
        per_target_snr_db=snr_db,
        noise_var=noise_var,
    )


def measure(a: ObservationMatrix, scene: Scene, noise_var: float, seed) -> Measurement:
    """Apply the forward model ``y = A @ x0 + n``.

    The additive noise is circular complex Gaussian: real and imaginary
    components are i.i.d. zero-mean with variance ``noise_var / 2``
    each, so the total per-sample complex variance is ``noise_var``.
    ``noise_var = 0`` gives the exact noiseless forward model.
    """
    if a.n != scene.n:
        raise DimensionError(
            f"matrix expects scene length {a.n}, scene has length {scene.n}"
        )
    if noise_var < 0:
        raise ValueError("noise_var must be >= 0")
    rng = np.random.default_rng(seed)
    y = a.entries @ scene.amplitudes
    if noise_var > 0:
        sigma = np.sqrt(noise_var / 2.0)
        y = y + sigma * rng.standard_normal(a.m) + 1j * sigma * rng.standard_normal(a.m)
    return Measurement(
        complex_values=y, stacked=stack_complex(y), noise_var=noise_var, seed=seed
    )
