"""Nominal dynamical systems: linear attractor models and stable mixtures.

A dynamical system maps a position to a desired velocity and has a single
globally attracting equilibrium.  Two parameterizations are supported: a
plain linear system ``A (xi - attractor)`` and a mixture of linear systems
blended by Gaussian responsibilities, validated against a quadratic
Lyapunov function.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError

# Below this best log-density the responsibilities are numerically meaningless
# and the nearest component (in Mahalanobis distance) takes all the weight.
LOG_DENSITY_FLOOR = -700.0

STABILITY_TOL = 1e-8
EQUILIBRIUM_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class LinearDS:
    """Linear attractor system ``velocity = A (xi - attractor)``; A Hurwitz."""

    gain_matrix: np.ndarray
    attractor: np.ndarray

    def __post_init__(self):
        gain = np.asarray(self.gain_matrix, dtype=float)
        attractor = np.asarray(self.attractor, dtype=float)
        object.__setattr__(self, "gain_matrix", gain)
        object.__setattr__(self, "attractor", attractor)
        d = attractor.shape[0]
        if gain.shape != (d, d):
            raise DomainError(
                f"gain_matrix must be {d}x{d} to match the attractor, got {gain.shape}"
            )
        max_real = float(np.max(np.linalg.eigvals(gain).real))
        if max_real >= 0.0:
            raise DomainError(
                f"gain_matrix must have strictly negative eigenvalue real parts, "
                f"max real part is {max_real}"
            )

    @property
    def dim(self) -> int:
        return self.attractor.shape[0]


def eval_linear(ds: LinearDS, xi: np.ndarray) -> np.ndarray:
    return ds.gain_matrix @ (np.asarray(xi, dtype=float) - ds.attractor)


@dataclass(frozen=True, eq=False)
class LpvDS:
    """Mixture of K linear systems with Gaussian responsibilities.

    ``velocity = sum_k w_k(xi) (A_k xi + b_k)`` where the weights come from a
    Gaussian mixture over positions.  ``lyapunov_matrix`` is the symmetric
    positive-definite P of the quadratic Lyapunov candidate used by
    :func:`validate_stability`.
    """

    priors: np.ndarray          # (K,)
    means: np.ndarray           # (K, d)
    covariances: np.ndarray     # (K, d, d)
    gains: np.ndarray           # (K, d, d)
    offsets: np.ndarray         # (K, d)
    lyapunov_matrix: np.ndarray  # (d, d)
    attractor: np.ndarray       # (d,)
    reproject_offsets: bool = False

    def __post_init__(self):
        for name in ("priors", "means", "covariances", "gains", "offsets",
                     "lyapunov_matrix", "attractor"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        k, d = self.means.shape
        if self.priors.shape != (k,):
            raise DomainError(f"priors must have {k} entries, got {self.priors.shape}")
        if np.any(self.priors < 0):
            raise DomainError(f"priors must be nonnegative, got {self.priors}")
        if abs(float(np.sum(self.priors)) - 1.0) > 1e-9:
            raise DomainError(f"priors must sum to 1, got sum {np.sum(self.priors)}")
        if self.covariances.shape != (k, d, d):
            raise DomainError(f"covariances must be ({k},{d},{d}), got {self.covariances.shape}")
        if self.gains.shape != (k, d, d):
            raise DomainError(f"gains must be ({k},{d},{d}), got {self.gains.shape}")
        if self.offsets.shape != (k, d):
            raise DomainError(f"offsets must be ({k},{d}), got {self.offsets.shape}")
        if self.attractor.shape != (d,):
            raise DomainError(f"attractor must have {d} entries, got {self.attractor.shape}")
        if self.lyapunov_matrix.shape != (d, d):
            raise DomainError(f"lyapunov_matrix must be {d}x{d}, got {self.lyapunov_matrix.shape}")

        for i, cov in enumerate(self.covariances):
            if not np.allclose(cov, cov.T, atol=1e-12):
                raise DomainError(f"covariance {i} is not symmetric")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise DomainError(f"covariance {i} is not positive-definite") from None
        p = self.lyapunov_matrix
        if not np.allclose(p, p.T, atol=1e-12):
            raise DomainError("lyapunov_matrix is not symmetric")
        p_min = float(np.min(np.linalg.eigvalsh(p)))
        if p_min <= 0.0:
            raise DomainError(
                f"lyapunov_matrix is not positive-definite (min eigenvalue {p_min:.6g})"
            )

        if self.reproject_offsets:
            object.__setattr__(self, "offsets", -self.gains @ self.attractor)
        else:
            residual = self.gains @ self.attractor + self.offsets
            worst = float(np.max(np.abs(residual)))
            if worst > EQUILIBRIUM_TOL:
                bad = int(np.argmax(np.max(np.abs(residual), axis=1)))
                raise DomainError(
                    f"component {bad} does not vanish at the attractor "
                    f"(|A_k attractor + b_k| = {worst:.3e}); set reproject_offsets "
                    f"to snap offsets at load"
                )

    @property
    def dim(self) -> int:
        return self.attractor.shape[0]

    @property
    def n_components(self) -> int:
        return self.priors.shape[0]

    @cached_property
    def _log_priors(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.priors)

    @cached_property
    def _inv_covariances(self) -> np.ndarray:
        return np.linalg.inv(self.covariances)

    @cached_property
    def _log_norms(self) -> np.ndarray:
        # log of the Gaussian normalization constant per component
        sign, logdet = np.linalg.slogdet(self.covariances)
        return -0.5 * (self.dim * math.log(2 * math.pi) + logdet)


def _mahalanobis_sq(ds: LpvDS, xi: np.ndarray) -> np.ndarray:
    delta = xi - ds.means
    return np.einsum("kd,kde,ke->k", delta, ds._inv_covariances, delta)


def mixing_weights(ds: LpvDS, xi: np.ndarray) -> np.ndarray:
    """Gaussian responsibilities at a position: nonnegative, summing to 1.

    Computed in log space with the maximum log-density subtracted.  Far from
    every component the densities underflow; the weights then collapse to
    one-hot on the nearest component so the field stays defined everywhere.
    """
    xi = np.asarray(xi, dtype=float)
    sq = _mahalanobis_sq(ds, xi)
    logs = ds._log_priors + ds._log_norms - 0.5 * sq
    peak = float(np.max(logs))
    if peak < LOG_DENSITY_FLOOR:
        weights = np.zeros(ds.n_components)
        weights[int(np.argmin(sq))] = 1.0
        return weights
    weights = np.exp(logs - peak)
    return weights / np.sum(weights)


def eval_lpv(ds: LpvDS, xi: np.ndarray) -> np.ndarray:
    xi = np.asarray(xi, dtype=float)
    weights = mixing_weights(ds, xi)
    velocities = ds.gains @ xi + ds.offsets
    return weights @ velocities


def evaluate_ds(ds: LinearDS | LpvDS, xi: np.ndarray) -> np.ndarray:
    """Velocity of either system kind at a position."""
    if isinstance(ds, LinearDS):
        return eval_linear(ds, xi)
    return eval_lpv(ds, xi)


def lyapunov_value(p: np.ndarray, xi: np.ndarray, attractor: np.ndarray) -> float:
    """Quadratic form (xi - attractor)^T P (xi - attractor)."""
    delta = np.asarray(xi, dtype=float) - np.asarray(attractor, dtype=float)
    return float(delta @ np.asarray(p, dtype=float) @ delta)


@dataclass(frozen=True)
class ComponentStability:
    index: int
    max_symmetrized_eigenvalue: float
    negative_definite: bool
    equilibrium_residual: float
    equilibrium_ok: bool


@dataclass(frozen=True)
class StabilityReport:
    kind: str
    passed: bool
    lyapunov_min_eigenvalue: float | None = None
    lyapunov_positive_definite: bool | None = None
    spectral_abscissa: float | None = None
    components: tuple[ComponentStability, ...] = ()

    def lines(self) -> list[str]:
        out = [f"system kind: {self.kind}"]
        if self.kind == "linear":
            out.append(
                f"gain matrix spectral abscissa: {self.spectral_abscissa:.6e} "
                f"({'ok' if self.passed else 'UNSTABLE'})"
            )
        else:
            out.append(
                f"lyapunov matrix min eigenvalue: {self.lyapunov_min_eigenvalue:.6e} "
                f"({'positive-definite' if self.lyapunov_positive_definite else 'NOT positive-definite'})"
            )
            for comp in self.components:
                out.append(
                    f"component {comp.index}: max eig of A^T P + P A = "
                    f"{comp.max_symmetrized_eigenvalue:.6e} "
                    f"({'ok' if comp.negative_definite else 'NOT negative-definite'}), "
                    f"equilibrium residual {comp.equilibrium_residual:.3e} "
                    f"({'ok' if comp.equilibrium_ok else 'VIOLATED'})"
                )
        out.append("overall: " + ("pass" if self.passed else "fail"))
        return out


def validate_stability(ds: LinearDS | LpvDS, tol_nd: float = STABILITY_TOL,
                       equilibrium_tol: float = EQUILIBRIUM_TOL) -> StabilityReport:
    """Check the conditions for global convergence to the attractor.

    For a mixture: P positive-definite, every ``A_k^T P + P A_k`` negative-
    definite (max eigenvalue below ``-tol_nd``), and every component vanishing
    at the attractor.  Failures are reported, never raised.
    """
    if isinstance(ds, LinearDS):
        abscissa = float(np.max(np.linalg.eigvals(ds.gain_matrix).real))
        return StabilityReport(kind="linear", passed=abscissa < 0.0,
                               spectral_abscissa=abscissa)

    p = ds.lyapunov_matrix
    p_eigs = np.linalg.eigvalsh(0.5 * (p + p.T))
    p_min = float(p_eigs[0])
    p_ok = p_min > 0.0

    components = []
    for i in range(ds.n_components):
        a = ds.gains[i]
        sym = a.T @ p + p @ a
        max_eig = float(np.max(np.linalg.eigvalsh(0.5 * (sym + sym.T))))
        residual = float(np.max(np.abs(a @ ds.attractor + ds.offsets[i])))
        components.append(ComponentStability(
            index=i,
            max_symmetrized_eigenvalue=max_eig,
            negative_definite=max_eig < -tol_nd,
            equilibrium_residual=residual,
            equilibrium_ok=residual <= equilibrium_tol,
        ))
    passed = p_ok and all(c.negative_definite and c.equilibrium_ok for c in components)
    return StabilityReport(kind="lpv", passed=passed,
                           lyapunov_min_eigenvalue=p_min,
                           lyapunov_positive_definite=p_ok,
                           components=tuple(components))
