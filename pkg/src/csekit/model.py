"""Exponential-family and canonical-GLM models.

Each family exposes its log-partition function ``A(theta)`` in natural
parameters, from which the tilt exponent ``psi`` and Renyi divergences follow
in closed form, plus a sampler that obeys the common-random-numbers contract.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ._validation import check_displacement, check_param_point

__all__ = [
    "NormalLocation",
    "BernoulliArms",
    "CanonicalGLM",
    "OutcomeMatrix",
    "softplus",
    "log_partition",
    "psi",
    "renyi_divergence",
    "sample_outcomes",
    "family_from_config",
]


def softplus(x):
    """``log(1 + e^x)`` without overflow for large ``|x|``."""
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


@dataclass(frozen=True)
class OutcomeMatrix:
    """Simulated outcomes for a block of simulations.

    ``values`` has one row per simulation. For the normal family it holds the
    observed means; for Bernoulli kinds it holds 0/1 responses laid out arm by
    arm (``arm_slices``) or row by row for the GLM.
    """

    kind: str
    values: np.ndarray
    arm_slices: tuple = ()
    covariates: np.ndarray = None

    def __len__(self):
        return self.values.shape[0]

    def arm(self, i):
        return self.values[:, self.arm_slices[i]]

    def sufficient(self):
        """Per-simulation sufficient statistic ``T(X)``, shape ``(N, d)``."""
        if self.kind == "normal":
            return self.values
        if self.kind == "bernoulli":
            return np.stack(
                [self.values[:, s].sum(axis=1) for s in self.arm_slices], axis=1
            ).astype(float)
        return self.values.astype(float) @ self.covariates


@dataclass(frozen=True)
class NormalLocation:
    """Independent unit-variance normals with mean ``theta``."""

    dim: int = 1
    kind: str = field(default="normal", init=False)

    def __post_init__(self):
        if int(self.dim) < 1:
            raise ValueError("dim must be a positive integer")

    def log_partition(self, theta):
        theta = np.asarray(theta, dtype=float)
        return 0.5 * np.sum(theta * theta, axis=-1)

    def mean_sufficient(self, theta):
        return np.asarray(theta, dtype=float)

    @property
    def n_draws(self):
        return self.dim

    def sample(self, theta, stream):
        z = stream.normals(self.dim)
        return OutcomeMatrix("normal", theta[None, :] + z)

    def to_dict(self):
        return {"name": "normal", "dim": self.dim}


@dataclass(frozen=True)
class BernoulliArms:
    """Independent arms; arm ``i`` has ``sizes[i]`` Bernoulli(sigmoid(theta_i)) patients."""

    sizes: tuple
    kind: str = field(default="bernoulli", init=False)

    def __post_init__(self):
        sizes = tuple(int(n) for n in np.atleast_1d(self.sizes))
        if not sizes or any(n < 1 for n in sizes):
            raise ValueError("arm sample sizes must be positive integers")
        object.__setattr__(self, "sizes", sizes)

    @property
    def dim(self):
        return len(self.sizes)

    @property
    def n_draws(self):
        return sum(self.sizes)

    @property
    def arm_slices(self):
        edges = np.cumsum((0,) + self.sizes)
        return tuple(slice(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]))

    def log_partition(self, theta):
        theta = np.asarray(theta, dtype=float)
        return np.sum(np.asarray(self.sizes, dtype=float) * softplus(theta), axis=-1)

    def mean_sufficient(self, theta):
        return np.asarray(self.sizes, dtype=float) * expit(np.asarray(theta, dtype=float))

    def sample(self, theta, stream):
        p = np.repeat(expit(theta), self.sizes)
        u = stream.uniforms(self.n_draws)
        return OutcomeMatrix("bernoulli", u < p[None, :], self.arm_slices)

    def to_dict(self):
        return {"name": "bernoulli_arms", "sizes": list(self.sizes)}


@dataclass(frozen=True, eq=False)
class CanonicalGLM:
    """Logistic regression with fixed covariates and Bernoulli responses."""

    covariates: np.ndarray
    kind: str = field(default="glm", init=False)

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.covariates, dtype=float))
        if not np.all(np.isfinite(x)):
            raise ValueError("covariates must be finite")
        x.setflags(write=False)
        object.__setattr__(self, "covariates", x)

    @property
    def dim(self):
        return self.covariates.shape[1]

    @property
    def n_draws(self):
        return self.covariates.shape[0]

    def log_partition(self, theta):
        eta = np.asarray(theta, dtype=float) @ self.covariates.T
        return np.sum(softplus(eta), axis=-1)

    def mean_sufficient(self, theta):
        return self.covariates.T @ expit(self.covariates @ np.asarray(theta, dtype=float))

    def sample(self, theta, stream):
        p = expit(self.covariates @ theta)
        u = stream.uniforms(self.n_draws)
        return OutcomeMatrix("glm", u < p[None, :], covariates=self.covariates)

    def to_dict(self):
        return {"name": "glm", "covariates": self.covariates.tolist()}


def family_from_config(spec):
    """Build a family from its JSON config block."""
    name = spec["name"]
    if name == "normal":
        return NormalLocation(int(spec.get("dim", 1)))
    if name == "bernoulli_arms":
        return BernoulliArms(tuple(spec["sizes"]))
    if name == "glm":
        return CanonicalGLM(np.asarray(spec["covariates"], dtype=float))
    raise KeyError(f"unknown family {name!r}")


def log_partition(family, theta):
    """``A(theta)`` for ``theta`` of shape ``(..., d)``."""
    theta = check_param_point(theta, family.dim, allow_batch=True)
    return family.log_partition(theta)


def psi(family, theta0, v, q):
    """Tilt exponent ``log E_theta0[exp(q T(X)'v)] = A(theta0 + q v) - A(theta0)``.

    ``v`` may carry leading batch axes and ``q`` broadcasts against them.
    """
    theta0 = check_param_point(theta0, family.dim)
    v = check_displacement(v, family.dim)
    q = np.asarray(q, dtype=float)
    if np.any(q < 1):
        raise ValueError("q must be >= 1")
    shifted = theta0 + q[..., None] * v
    return family.log_partition(shifted) - family.log_partition(theta0)


def renyi_divergence(family, theta0, v, q):
    """Order-``q`` Renyi divergence of ``P_{theta0+v}`` from ``P_{theta0}``."""
    q = np.asarray(q, dtype=float)
    if np.any(q <= 1):
        raise ValueError("Renyi order q must exceed 1")
    return (psi(family, theta0, v, q) - q * psi(family, theta0, v, 1.0)) / (q - 1.0)


def sample_outcomes(family, theta, stream):
    """Draw one outcome matrix row per simulation index in ``stream``.

    Normal draws are ``theta + Z`` and Bernoulli draws are ``1{U < p}`` with
    ``Z``/``U`` depending only on the stream, so outcomes at different
    ``theta`` share their randomness.
    """
    theta = check_param_point(theta, family.dim)
    return family.sample(theta, stream)
