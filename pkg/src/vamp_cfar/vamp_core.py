"""K-layer unfolded-VAMP sparse recovery on real-stacked data.

One layer runs denoise -> extrinsic -> LMMSE -> extrinsic:

1. ``(xhat_k, v_k) = eta_sst(r_k, alpha_k / sqrt(gamma_k), 1)``
2. ``r~_k = (xhat_k - v_k r_k) / (1 - v_k)``,
   ``gamma~_k = gamma_k (1 - v_k) / v_k``
3. ``(x~_k, v~_k) = lmmse(A, y, r~_k, gamma~_k, gamma_w_k)``
4. ``r_{k+1} = (x~_k - v~_k r~_k) / (1 - v~_k)``,
   ``gamma_{k+1} = gamma~_k (1 - v~_k) / v~_k``,
   then damped by ``theta_k`` toward the previous iterate.

The returned pseudo-measurement is ``r_{K+1}`` (the input of the last
thresholding pass) and the sparse solution is one more soft-threshold
of it.  ``sigma2_tilde_K = 1/gamma~_K`` and ``v_tilde_K`` feed the
closed-form error-variance estimate ``sigma2_tilde_K * v~_K / (1 - v~_K)``,
which equals the engine's own claimed variance of ``r_{K+1}``; it is a
faithful estimate only while the layer parameters remain consistent
with the data, which is precisely what learned/perturbed parameters
break.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
from scipy.special import ndtri

from .errors import (
    DegenerateDivergenceError,
    DimensionError,
    NumericFailureError,
    ParameterSchemaError,
)

__all__ = [
    "LayerParams",
    "UnfoldedModel",
    "VampState",
    "RecoveryOutput",
    "LmmseSolver",
    "eta_sst",
    "lmmse_stage",
    "vamp_unfold",
    "sigma2_vamp",
    "matched_params",
    "perturb_params",
    "load_params",
    "save_params",
    "nmse",
]

@dataclass(frozen=True)
class LayerParams:
    """Per-layer learnable parameters.

    alpha : dimensionless positive threshold scale; the layer-k
        threshold is ``alpha / sqrt(gamma_k)``.
    theta : damping factor in (0, 1]; 1 means no damping.
    gamma_w : measurement precision (1/variance of one real noise
        component).
    """

    alpha: float
    theta: float
    gamma_w: float

    def validate(self, where: str = "layer") -> None:
        if not (self.alpha > 0):
            raise ParameterSchemaError(f"{where}.alpha must be > 0, got {self.alpha}")
        if not (0 < self.theta <= 1):
            raise ParameterSchemaError(
                f"{where}.theta must be in (0, 1], got {self.theta}"
            )
        if not (self.gamma_w > 0):
            raise ParameterSchemaError(
                f"{where}.gamma_w must be > 0, got {self.gamma_w}"
            )


@dataclass(frozen=True)
class UnfoldedModel:
    """A stack of K soft-threshold layers plus provenance."""

    k_layers: int
    layers: tuple
    denoiser: str = "sst"
    provenance: str = "unspecified"

    def validate(self) -> None:
        if self.k_layers < 1:
            raise ParameterSchemaError(f"k_layers must be >= 1, got {self.k_layers}")
        if len(self.layers) != self.k_layers:
            raise ParameterSchemaError(
                f"layers holds {len(self.layers)} entries, expected {self.k_layers}"
            )
        if self.denoiser != "sst":
            raise ParameterSchemaError(f"unsupported denoiser {self.denoiser!r}")
        for i, layer in enumerate(self.layers):
            layer.validate(where=f"layers[{i}]")


@dataclass(frozen=True)
class VampState:
    """Final internal state of a recovery run.

    ``r_k``/``gamma_k`` are the last extrinsic mean and precision,
    ``v_denoise`` the last gated denoiser divergence, and
    ``sigma2_tilde_K``/``v_tilde_K`` the final-layer extrinsic variance
    and LMMSE divergence feeding :func:`sigma2_vamp`.
    """

    r_k: np.ndarray
    gamma_k: float
    v_denoise: float
    sigma2_tilde_K: float
    v_tilde_K: float


@dataclass(frozen=True)
class RecoveryOutput:
    """Pseudo-measurement, sparse solution and variance bookkeeping."""

    r_ri: np.ndarray
    xhat_ri: np.ndarray
    sigma2_vamp: float
    layer_nmse: Optional[list] = None


def eta_sst(v: np.ndarray, lam: float, scale: float = 1.0):
    """Scaled soft threshold with its exact almost-everywhere divergence.

    ``xhat_i = scale * sign(v_i) * max(|v_i| - lam, 0)`` and the
    divergence is ``scale * |{i : |v_i| > lam}| / len(v)``.  Entries at
    or below the threshold become exact zeros, which downstream support
    extraction relies on.
    """
    if lam < 0:
        raise ValueError(f"threshold must be >= 0, got {lam}")
    if scale <= 0:
        raise ValueError(f"scale must be > 0, got {scale}")
    v = np.asarray(v, dtype=float)
    active = np.abs(v) > lam
    xhat = scale * np.sign(v) * np.maximum(np.abs(v) - lam, 0.0)
    divergence = scale * float(np.count_nonzero(active)) / v.size
    return xhat, divergence


class LmmseSolver:
    """LMMSE stage ``(gamma_w A^T A + gamma~ I)^-1`` solver for one matrix.

    The factorization work happens once per matrix and is reused across
    layers and trials.  Partial-Fourier stacked matrices have exactly
    orthonormal rows, for which ``A^T A`` is a projection and the
    inverse has a two-term closed form needing only two matvecs; any
    other matrix falls back to a thin SVD.  The instance is immutable
    after construction and safe to share across concurrent runs.
    """

    def __init__(self, a_ri: np.ndarray, assume_row_orthonormal: Optional[bool] = None):
        a_ri = np.asarray(a_ri, dtype=float)
        if a_ri.ndim != 2:
            raise DimensionError(f"matrix must be 2-D, got shape {a_ri.shape}")
        self.a = a_ri
        self.rows, self.cols = a_ri.shape
        if assume_row_orthonormal is None:
            assume_row_orthonormal = self._probe_row_orthonormal()
        self.row_orthonormal = bool(assume_row_orthonormal)
        if not self.row_orthonormal:
            u, s, vt = np.linalg.svd(a_ri, full_matrices=False)
            self._s2 = s * s
            self._vt = vt

    def _probe_row_orthonormal(self) -> bool:
        # A A^T = I iff A(A^T u) = u for all u; three fixed random probes
        # expose any deviation above float noise.
        rng = np.random.default_rng(0)
        u = rng.standard_normal((self.rows, 3))
        resid = self.a @ (self.a.T @ u) - u
        return bool(np.max(np.abs(resid)) <= 1e-10 * max(1.0, float(np.max(np.abs(u)))))

    def adjoint(self, y_ri: np.ndarray) -> np.ndarray:
        """``A^T y``, the quantity reused across all layers of a run."""
        y_ri = np.asarray(y_ri, dtype=float)
        if y_ri.shape != (self.rows,):
            raise DimensionError(
                f"measurement length {y_ri.shape} does not match matrix rows {self.rows}"
            )
        return self.a.T @ y_ri

    def solve(self, aty: np.ndarray, r_tilde: np.ndarray, gamma_tilde: float, gamma_w: float):
        """Posterior mean and divergence of the LMMSE stage.

        Returns ``x~ = (gamma_w A^T A + gamma~ I)^-1 (gamma_w A^T y + gamma~ r~)``
        and ``v~ = (gamma~ / cols) * trace((gamma_w A^T A + gamma~ I)^-1)``.
        """
        if not (gamma_tilde > 0):
            raise ValueError(f"gamma_tilde must be > 0, got {gamma_tilde}")
        if not (gamma_w > 0):
            raise ValueError(f"gamma_w must be > 0, got {gamma_w}")
        # aty lies in the row space of A identically, so its complement
        # projection is dropped analytically; computing it numerically
        # would amplify rounding by gamma_w / gamma_tilde.
        if self.row_orthonormal:
            pr = self.a.T @ (self.a @ r_tilde)
            x_tilde = (gamma_w * aty + gamma_tilde * pr) / (gamma_w + gamma_tilde) + (
                r_tilde - pr
            )
            trace = self.rows / (gamma_w + gamma_tilde) + (
                self.cols - self.rows
            ) / gamma_tilde
        else:
            w_aty = self._vt @ aty
            w_r = self._vt @ r_tilde
            scaled = (gamma_w * w_aty + gamma_tilde * w_r) / (
                gamma_w * self._s2 + gamma_tilde
            )
            x_tilde = self._vt.T @ scaled + (r_tilde - self._vt.T @ w_r)
            trace = float(
                np.sum(1.0 / (gamma_w * self._s2 + gamma_tilde))
            ) + (self.cols - self._s2.size) / gamma_tilde
        v_tilde = gamma_tilde * trace / self.cols
        return x_tilde, float(v_tilde)


def lmmse_stage(a_ri: np.ndarray, y_ri: np.ndarray, r_tilde: np.ndarray,
                gamma_tilde: float, gamma_w: float):
    """One-shot LMMSE stage; see :class:`LmmseSolver` for the math."""
    solver = LmmseSolver(a_ri)
    return solver.solve(solver.adjoint(y_ri), np.asarray(r_tilde, dtype=float),
                        gamma_tilde, gamma_w)


def _check_finite(arr: np.ndarray, gamma: float, layer: int) -> None:
    if not np.all(np.isfinite(arr)) or not np.isfinite(gamma):
        raise NumericFailureError(f"non-finite values after layer {layer}")


def vamp_unfold(y_ri: np.ndarray, a_ri, model: UnfoldedModel,
                init_gamma: Optional[float] = None, *,
                x0_ri: Optional[np.ndarray] = None,
                solver: Optional[LmmseSolver] = None):
    """Run K unfolded-VAMP layers and a final thresholding pass.

    Parameters
    ----------
    y_ri : np.ndarray
        Real-stacked measurement, length 2M.
    a_ri : np.ndarray
        Real-stacked observation matrix, shape (2M, 2N).  Ignored when
        ``solver`` is supplied.
    model : UnfoldedModel
        Layer parameters (matched, perturbed or learned).
    init_gamma : float, optional
        Starting precision; defaults to ``1 / var(A^T y)`` (matched
        filter warm start).
    x0_ri : np.ndarray, optional
        Ground truth; when given, a per-layer NMSE trace is recorded
        (one entry per layer plus the final thresholding pass).
    solver : LmmseSolver, optional
        Prebuilt solver, reused across trials sharing one matrix.

    Returns
    -------
    (RecoveryOutput, VampState)

    Raises
    ------
    DegenerateDivergenceError
        If a layer's denoiser passes nothing or everything (divergence
        exactly 0 or 1), which makes the extrinsic update undefined.
    NumericFailureError
        If NaN or Inf appears anywhere in the iteration.
    """
    model.validate()
    if solver is None:
        solver = LmmseSolver(np.asarray(a_ri, dtype=float))
    y_ri = np.asarray(y_ri, dtype=float)
    if y_ri.shape != (solver.rows,):
        raise DimensionError(
            f"measurement length {y_ri.shape} does not match matrix rows {solver.rows}"
        )
    if not np.all(np.isfinite(y_ri)):
        raise NumericFailureError("measurement contains non-finite values")

    track_nmse = x0_ri is not None
    if track_nmse:
        x0_ri = np.asarray(x0_ri, dtype=float)
        x0_energy = float(x0_ri @ x0_ri)
    layer_nmse: Optional[list] = [] if track_nmse else None

    def _nmse_entry(xhat):
        if x0_energy == 0.0:
            return float("nan")
        diff = xhat - x0_ri
        return float(diff @ diff) / x0_energy

    last = model.layers[-1]
    if not np.any(y_ri):
        # Zero measurement: the all-zero vector is the exact fixed point
        # of every layer, but the extrinsic precision chain is undefined
        # (the denoiser divergence would be exactly 0).  Report the zero
        # solution with the LMMSE divergence evaluated at unit precision
        # so the variance bookkeeping stays positive and finite.
        zeros = np.zeros(solver.cols)
        _, v_tilde = solver.solve(zeros, zeros, 1.0, last.gamma_w)
        sigma2 = 1.0 * v_tilde / (1.0 - v_tilde)
        if track_nmse:
            layer_nmse = [_nmse_entry(zeros)] * (model.k_layers + 1)
        out = RecoveryOutput(r_ri=zeros, xhat_ri=zeros.copy(),
                             sigma2_vamp=sigma2, layer_nmse=layer_nmse)
        state = VampState(r_k=zeros, gamma_k=1.0, v_denoise=v_tilde,
                          sigma2_tilde_K=1.0, v_tilde_K=v_tilde)
        return out, state

    aty = solver.adjoint(y_ri)
    r = aty.copy()
    if init_gamma is not None:
        if not (init_gamma > 0):
            raise ValueError(f"init_gamma must be > 0, got {init_gamma}")
        gamma = float(init_gamma)
    else:
        var0 = float(np.var(r))
        if var0 <= 0 or not np.isfinite(var0):
            raise NumericFailureError("cannot initialize precision: var(A^T y) is 0")
        gamma = 1.0 / var0

    v_k = gamma_tilde = v_tilde = None
    for k, layer in enumerate(model.layers, start=1):
        lam = layer.alpha / np.sqrt(gamma)
        xhat, v_k = eta_sst(r, lam, 1.0)
        if v_k == 0.0 or v_k == 1.0:
            raise DegenerateDivergenceError(
                f"denoiser divergence is exactly {v_k:g} at layer {k}"
            )
        if track_nmse:
            layer_nmse.append(_nmse_entry(xhat))
        r_tilde = (xhat - v_k * r) / (1.0 - v_k)
        gamma_tilde = gamma * (1.0 - v_k) / v_k

        x_tilde, v_tilde = solver.solve(aty, r_tilde, gamma_tilde, layer.gamma_w)
        if v_tilde <= 0.0 or v_tilde >= 1.0:
            raise DegenerateDivergenceError(
                f"LMMSE divergence {v_tilde:g} out of (0,1) at layer {k}"
            )
        r_new = (x_tilde - v_tilde * r_tilde) / (1.0 - v_tilde)
        gamma_new = gamma_tilde * (1.0 - v_tilde) / v_tilde
        r = layer.theta * r_new + (1.0 - layer.theta) * r
        gamma = layer.theta * gamma_new + (1.0 - layer.theta) * gamma
        _check_finite(r, gamma, k)

    sigma2_tilde_K = 1.0 / gamma_tilde
    xhat_final, _ = eta_sst(r, last.alpha / np.sqrt(gamma), 1.0)
    if track_nmse:
        layer_nmse.append(_nmse_entry(xhat_final))
    state = VampState(r_k=r, gamma_k=gamma, v_denoise=v_k,
                      sigma2_tilde_K=sigma2_tilde_K, v_tilde_K=v_tilde)
    out = RecoveryOutput(r_ri=r, xhat_ri=xhat_final,
                         sigma2_vamp=sigma2_vamp(state), layer_nmse=layer_nmse)
    return out, state


def sigma2_vamp(state: VampState) -> float:
    """Closed-form recovery-error variance claimed by the engine itself.

    ``sigma2_tilde_K * v_tilde_K / (1 - v_tilde_K)``; valid only while
    the layer parameters match the data model.
    """
    v = state.v_tilde_K
    if not (0.0 < v < 1.0):
        raise DegenerateDivergenceError(f"v_tilde_K={v:g} outside (0, 1)")
    return state.sigma2_tilde_K * v / (1.0 - v)


def matched_params(k_layers: int, prior_sparsity: float, noise_var: float) -> UnfoldedModel:
    """Build the data-matched (hand-tuned) parameter stack.

    All layers share one threshold scale set by the two-sided Gaussian
    tail rule ``alpha = Phi^-1(1 - prior_sparsity / 2)``: a null
    coordinate, which sees pure N(0, 1/gamma_k) input, survives the
    layer threshold ``alpha / sqrt(gamma_k)`` with probability equal to
    the prior nonzero fraction.  No damping (``theta = 1``);
    ``gamma_w = 2 / noise_var``, the precision of one real noise
    component.
    """
    if k_layers < 1:
        raise ParameterSchemaError(f"k_layers must be >= 1, got {k_layers}")
    if not (0 < prior_sparsity < 1):
        raise ValueError(f"prior_sparsity must be in (0, 1), got {prior_sparsity}")
    if not (noise_var > 0):
        raise ValueError(f"noise_var must be > 0, got {noise_var}")
    alpha = float(ndtri(1.0 - prior_sparsity / 2.0))
    layer = LayerParams(alpha=alpha, theta=1.0, gamma_w=2.0 / noise_var)
    return UnfoldedModel(k_layers=k_layers, layers=(layer,) * k_layers,
                         provenance="matched")


def perturb_params(model: UnfoldedModel, factor: float, seed=0) -> UnfoldedModel:
    """Multiply each layer's alpha by an independent draw from
    ``Uniform[1/factor, factor]`` (emulates what training does to the
    thresholds without running a trainer).  ``factor = 1`` returns an
    identical model."""
    if not (factor > 0):
        raise ValueError(f"factor must be > 0, got {factor}")
    model.validate()
    lo, hi = sorted((1.0 / factor, factor))
    rng = np.random.default_rng(seed)
    draws = rng.uniform(lo, hi, size=model.k_layers)
    layers = tuple(
        replace(layer, alpha=layer.alpha * float(d))
        for layer, d in zip(model.layers, draws)
    )
    return UnfoldedModel(k_layers=model.k_layers, layers=layers,
                         provenance=f"perturbed({factor:g})")


_SCHEMA_VERSION = 1


def save_params(model: UnfoldedModel, path) -> None:
    """Write a model to the portable JSON parameter file."""
    model.validate()
    doc = {
        "version": _SCHEMA_VERSION,
        "k_layers": model.k_layers,
        "denoiser": model.denoiser,
        "layers": [
            {"alpha": layer.alpha, "theta": layer.theta, "gamma_w": layer.gamma_w}
            for layer in model.layers
        ],
        "provenance": model.provenance,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")


def _require(cond: bool, field: str, message: str) -> None:
    if not cond:
        raise ParameterSchemaError(f"{field}: {message}")


def load_params(path) -> UnfoldedModel:
    """Parse and validate a JSON parameter file.

    Errors name the offending field path, e.g. ``layers[1].theta``.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParameterSchemaError(f"not valid JSON: {exc}") from exc
    _require(isinstance(doc, dict), "<root>", "document must be a JSON object")
    _require(doc.get("version") == _SCHEMA_VERSION, "version",
             f"expected {_SCHEMA_VERSION}, got {doc.get('version')!r}")
    k = doc.get("k_layers")
    _require(isinstance(k, int) and k >= 1, "k_layers",
             f"expected integer >= 1, got {k!r}")
    _require(doc.get("denoiser") == "sst", "denoiser",
             f"expected 'sst', got {doc.get('denoiser')!r}")
    raw_layers = doc.get("layers")
    _require(isinstance(raw_layers, list), "layers", "expected an array")
    _require(len(raw_layers) == k, "layers",
             f"holds {len(raw_layers)} entries, k_layers says {k}")
    layers = []
    for i, entry in enumerate(raw_layers):
        where = f"layers[{i}]"
        _require(isinstance(entry, dict), where, "expected an object")
        values = {}
        for name in ("alpha", "theta", "gamma_w"):
            _require(name in entry, f"{where}.{name}", "missing")
            value = entry[name]
            _require(isinstance(value, (int, float)) and not isinstance(value, bool),
                     f"{where}.{name}", f"expected a number, got {value!r}")
            values[name] = float(value)
        layer = LayerParams(**values)
        layer.validate(where=where)
        layers.append(layer)
    provenance = doc.get("provenance", "unspecified")
    _require(isinstance(provenance, str), "provenance", "expected a string")
    model = UnfoldedModel(k_layers=k, layers=tuple(layers), provenance=provenance)
    model.validate()
    return model


def nmse(xhat: np.ndarray, x0: np.ndarray) -> float:
    """Normalized mean squared error ``||xhat - x0||^2 / ||x0||^2``."""
    x0 = np.asarray(x0, dtype=float)
    diff = np.asarray(xhat, dtype=float) - x0
    energy = float(x0 @ x0)
    if energy == 0.0:
        raise ValueError("NMSE undefined for an all-zero reference")
    return float(diff @ diff) / energy
