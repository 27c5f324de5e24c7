"""Seeded generators for the data-generating processes the library estimates.

All generators are deterministic functions of (parameters, seed); substreams
are derived with `rng.stream` so adding a draw in one place never shifts the
others.  Ground truth (mixing matrix, SEM coefficients, true sources,
direction tag) is always returned alongside the data.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from .core import DataError, Dataset, InsufficientDataError, LinearMixingModel, ShapeError
from .independence import median_heuristic
from .lingam import SemModel
from .rng import stream, well_conditioned_matrix

__all__ = [
    "SourceDistribution",
    "NonstationarySpec",
    "MlpFunction",
    "gen_linear_ica",
    "gen_demo_signals",
    "gen_lingam",
    "gen_nonstationary_nica",
    "gen_nonsens_sem",
    "gen_anm",
    "gen_pnl",
    "gen_carefl",
    "darmois_construct",
]


@dataclass(frozen=True)
class SourceDistribution:
    """Standardized (zero-mean, unit-variance) source distribution.

    kind is one of gaussian, laplace, uniform, generalized-gaussian; the last
    takes a shape beta > 0 (beta=1 is Laplace, beta=2 Gaussian).  `scale`
    multiplies the standardized draw.
    """

    kind: str
    beta: Optional[float] = None
    scale: float = 1.0

    _KINDS = ("gaussian", "laplace", "uniform", "generalized-gaussian")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown source distribution {self.kind!r}")
        if self.kind == "generalized-gaussian":
            if self.beta is None or self.beta <= 0:
                raise ValueError("generalized-gaussian needs shape beta > 0")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    @classmethod
    def gaussian(cls) -> "SourceDistribution":
        return cls("gaussian")

    @classmethod
    def laplace(cls) -> "SourceDistribution":
        return cls("laplace")

    @classmethod
    def uniform(cls) -> "SourceDistribution":
        return cls("uniform")

    @classmethod
    def generalized(cls, beta: float) -> "SourceDistribution":
        return cls("generalized-gaussian", beta=beta)

    @property
    def excess_kurtosis(self) -> float:
        """Analytic excess kurtosis of the standardized distribution."""
        if self.kind == "gaussian":
            return 0.0
        if self.kind == "laplace":
            return 3.0
        if self.kind == "uniform":
            return -1.2
        b = self.beta
        g = special.gamma
        return float(g(5.0 / b) * g(1.0 / b) / g(3.0 / b) ** 2 - 3.0)

    def sample(self, size, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "gaussian":
            out = rng.standard_normal(size)
        elif self.kind == "laplace":
            out = rng.laplace(0.0, 1.0 / math.sqrt(2.0), size)
        elif self.kind == "uniform":
            out = rng.uniform(-math.sqrt(3.0), math.sqrt(3.0), size)
        else:
            b = self.beta
            alpha = math.sqrt(special.gamma(1.0 / b) / special.gamma(3.0 / b))
            mag = rng.gamma(1.0 / b, 1.0, size) ** (1.0 / b)
            out = alpha * mag * rng.choice([-1.0, 1.0], size)
        return self.scale * out

    def log_density_curvature(self, y, eps: float = 1e-3) -> np.ndarray:
        """Closed-form (log p)'' of the standardized density at points y.

        Distributions in the generalized-Gaussian family with beta < 2 have a
        distributional second derivative at 0; |y| is softened to
        sqrt(y^2 + eps^2) so the curvature is a smooth closed form in the same
        family.  Not implemented for the uniform distribution (log-density is
        flat with non-differentiable edges).
        """
        y = np.asarray(y, dtype=float)
        if self.kind == "gaussian":
            return np.full_like(y, -1.0)
        if self.kind == "uniform":
            raise DataError("log-density curvature not implemented for uniform sources")
        b = 1.0 if self.kind == "laplace" else float(self.beta)
        alpha = math.sqrt(special.gamma(1.0 / b) / special.gamma(3.0 / b))
        if b == 2.0:
            return np.full_like(y, -1.0)
        r2 = y * y + eps * eps
        r = np.sqrt(r2)
        return -(b / alpha**b) * r ** (b - 4.0) * (r2 + (b - 2.0) * y * y)


@dataclass(frozen=True)
class NonstationarySpec:
    """Segmented variance-modulation scheme for nonstationary sources.

    In segment tau, source i is zero-mean Gaussian with variance
    1/(2 * lam[tau, i]); modulation parameters must be positive.  When the
    number of segments is large enough (T - 1 >= n) the (T-1) x n matrix of
    differences lam[tau] - lam[0] should have full column rank for
    identifiability-grade runs; a deficient rank triggers a warning.
    """

    n_segments: int
    samples_per_segment: int
    lam: np.ndarray
    sufficient_statistic: str = "neg-square"

    def __post_init__(self):
        if self.sufficient_statistic != "neg-square":
            raise ValueError(f"unsupported sufficient statistic {self.sufficient_statistic!r}")
        if self.n_segments < 1:
            raise ValueError("need at least one segment")
        if self.samples_per_segment < 1:
            raise ValueError("need at least one sample per segment")
        lam = np.asarray(self.lam, dtype=float)
        if lam.shape[0] != self.n_segments:
            raise ShapeError(f"lam must have {self.n_segments} rows, got {lam.shape}")
        if np.any(lam <= 0):
            raise ValueError("modulation parameters must be positive")
        lam.flags.writeable = False
        object.__setattr__(self, "lam", lam)
        n = lam.shape[1]
        if self.n_segments - 1 >= n:
            alpha = lam[1:] - lam[0]
            if np.linalg.matrix_rank(alpha) < n:
                warnings.warn(
                    "modulation-difference matrix is rank deficient; "
                    "recovery is not identifiability-grade",
                    stacklevel=2,
                )

    @property
    def n_vars(self) -> int:
        return self.lam.shape[1]

    @classmethod
    def random(
        cls,
        n_segments: int,
        n_vars: int,
        samples_per_segment: int,
        seed: int,
        lam_range: tuple = (0.3, 3.0),
    ) -> "NonstationarySpec":
        rng = stream(seed, 40)
        lam = rng.uniform(lam_range[0], lam_range[1], size=(n_segments, n_vars))
        return cls(n_segments, samples_per_segment, lam)

    def sample_sources(self, rng: np.random.Generator) -> tuple:
        """(sources, segment_labels) with per-segment modulated variance."""
        t, n = self.lam.shape
        m = self.samples_per_segment
        sd = 1.0 / np.sqrt(2.0 * self.lam)  # segment x var standard deviations
        s = rng.standard_normal((t * m, n)) * np.repeat(sd, m, axis=0)
        labels = np.repeat(np.arange(t), m)
        return s, labels


_ACTIVATIONS = ("leaky-relu", "tanh", "identity")


@dataclass(frozen=True)
class MlpFunction:
    """Layered feed-forward map R^n -> R^n with invertible square layers.

    The activation is applied between layers; the final layer is affine.  With
    condition-bounded weights and an invertible activation the whole map is
    invertible, and `inverse` recovers inputs exactly (layer by layer).
    """

    layer_weights: tuple
    layer_biases: tuple
    activation: str = "leaky-relu"
    slope: float = 0.2
    cond_bound: float = 10.0

    def __post_init__(self):
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        weights = tuple(np.asarray(w, dtype=float) for w in self.layer_weights)
        biases = tuple(np.asarray(b, dtype=float) for b in self.layer_biases)
        if len(weights) != len(biases):
            raise ShapeError("layer_weights and layer_biases length mismatch")
        n = weights[0].shape[0]
        for w in weights:
            if w.shape != (n, n):
                raise ShapeError(f"all layers must be {n} x {n}, got {w.shape}")
            if np.linalg.cond(w) > self.cond_bound:
                raise DataError(
                    f"layer condition number {np.linalg.cond(w):.3g} exceeds {self.cond_bound}"
                )
        for w in weights:
            w.flags.writeable = False
        for b in biases:
            b.flags.writeable = False
        object.__setattr__(self, "layer_weights", weights)
        object.__setattr__(self, "layer_biases", biases)

    @property
    def n_vars(self) -> int:
        return self.layer_weights[0].shape[0]

    @property
    def n_layers(self) -> int:
        return len(self.layer_weights)

    @classmethod
    def random(
        cls,
        n_vars: int,
        n_layers: int,
        seed: int,
        activation: str = "leaky-relu",
        slope: float = 0.2,
        cond_bound: float = 10.0,
    ) -> "MlpFunction":
        rng = stream(seed, 41)
        weights = [well_conditioned_matrix(n_vars, rng, min(cond_bound, 4.0)) for _ in range(n_layers)]
        biases = [0.1 * rng.standard_normal(n_vars) for _ in range(n_layers)]
        return cls(tuple(weights), tuple(biases), activation, slope, cond_bound)

    @classmethod
    def identity(cls, n_vars: int) -> "MlpFunction":
        return cls((np.eye(n_vars),), (np.zeros(n_vars),), "identity")

    def _act(self, a: np.ndarray) -> np.ndarray:
        if self.activation == "leaky-relu":
            return np.where(a >= 0, a, self.slope * a)
        if self.activation == "tanh":
            return np.tanh(a)
        return a

    def _act_inv(self, y: np.ndarray) -> np.ndarray:
        if self.activation == "leaky-relu":
            return np.where(y >= 0, y, y / self.slope)
        if self.activation == "tanh":
            return np.arctanh(np.clip(y, -1 + 1e-15, 1 - 1e-15))
        return y

    def forward(self, points) -> np.ndarray:
        """Apply the map to points (rows)."""
        x = np.atleast_2d(np.asarray(points, dtype=float))
        for k, (w, b) in enumerate(zip(self.layer_weights, self.layer_biases)):
            x = x @ w.T + b
            if k < self.n_layers - 1:
                x = self._act(x)
        return x

    def inverse(self, points) -> np.ndarray:
        """Exact layerwise inverse (affine solve + activation inverse)."""
        y = np.atleast_2d(np.asarray(points, dtype=float))
        for k in range(self.n_layers - 1, -1, -1):
            w, b = self.layer_weights[k], self.layer_biases[k]
            y = np.linalg.solve(w, (y - b).T).T
            if k > 0:
                y = self._act_inv(y)
        return y


def gen_linear_ica(
    n_vars: int,
    n_samples: int,
    dist: SourceDistribution,
    seed: int,
    identity_mixing: bool = False,
    cond_bound: float = 10.0,
):
    """Linear mixture of i.i.d. standardized non-Gaussian sources.

    Returns (Dataset, LinearMixingModel) with the ground-truth mixing matrix
    and sources.  Gaussian sources are permitted but flagged
    unidentifiable-by-design in the model metadata.
    """
    if n_vars < 2:
        raise DataError("need at least 2 variables")
    if n_samples < 10 * n_vars:
        raise DataError(f"need at least {10 * n_vars} samples for {n_vars} variables")
    rng = stream(seed, 0)
    s = dist.sample((n_samples, n_vars), rng)
    a = np.eye(n_vars) if identity_mixing else well_conditioned_matrix(n_vars, rng, cond_bound)
    meta = {"seed": seed, "dist": dist.kind}
    if dist.kind == "gaussian":
        meta["unidentifiable_by_design"] = True
    model = LinearMixingModel(mixing=a, sources=s, metadata=meta)
    return Dataset(s @ a.T), model


def gen_demo_signals(n_samples: int, seed: int, cond_bound: float = 10.0):
    """Four structured signals (sinusoid, square, sawtooth, Laplace noise),
    standardized and randomly mixed.  The classic blind-source-separation demo.
    """
    rng = stream(seed, 1)
    t = np.arange(n_samples) / float(n_samples)
    sig = np.column_stack(
        [
            np.sin(2 * np.pi * 13.0 * t),
            np.sign(np.sin(2 * np.pi * 7.0 * t + 0.5)),
            2.0 * ((5.0 * t) % 1.0) - 1.0,
            rng.laplace(0.0, 1.0 / math.sqrt(2.0), n_samples),
        ]
    )
    sig = (sig - sig.mean(axis=0)) / sig.std(axis=0)
    a = well_conditioned_matrix(4, rng, cond_bound)
    model = LinearMixingModel(mixing=a, sources=sig, metadata={"seed": seed, "kind": "demo-signals"})
    return Dataset(sig @ a.T, time_index=np.arange(n_samples, dtype=float)), model


def gen_lingam(
    n_vars: int,
    edge_prob: float,
    noise: SourceDistribution,
    n_samples: int,
    seed: int,
    coef_range: tuple = (0.3, 0.9),
):
    """Acyclic linear SEM with non-Gaussian disturbances.

    The coefficient matrix is strictly lower triangular under a random hidden
    variable order; nonzero coefficients are uniform on +-[coef_range].  Data
    follows x = (I - B)^{-1} e.  Returns (Dataset, SemModel).
    """
    if n_vars < 2:
        raise DataError("need at least 2 variables")
    if not 0 <= edge_prob <= 1:
        raise DataError("edge_prob must be in [0, 1]")
    rng = stream(seed, 2)
    order = rng.permutation(n_vars)  # order[k] = variable at causal position k
    b = np.zeros((n_vars, n_vars))
    for ki in range(n_vars):
        for kj in range(ki):
            if rng.random() < edge_prob:
                coef = rng.uniform(coef_range[0], coef_range[1]) * rng.choice([-1.0, 1.0])
                b[order[ki], order[kj]] = coef
    e = noise.sample((n_samples, n_vars), rng)
    x = np.linalg.solve(np.eye(n_vars) - b, e.T).T
    model = SemModel(
        b=b,
        causal_order=tuple(int(v) for v in order),
        disturbance_kurtosis=tuple(noise.excess_kurtosis for _ in range(n_vars)),
        pruned=True,
    )
    return Dataset(x), model


def gen_nonstationary_nica(spec: NonstationarySpec, mixer: MlpFunction, seed: int):
    """Nonstationary sources pushed through an invertible nonlinear mixing.

    Returns (Dataset with segment_labels, true source matrix).  A single
    segment is allowed but warned about: without distribution changes the
    model is unidentifiable.
    """
    if mixer.n_vars != spec.n_vars:
        raise ShapeError(
            f"mixer dimension {mixer.n_vars} does not match spec dimension {spec.n_vars}"
        )
    if spec.n_segments == 1:
        warnings.warn("stationary: model unidentifiable (Darmois)", stacklevel=2)
    rng = stream(seed, 3)
    s, labels = spec.sample_sources(rng)
    x = mixer.forward(s)
    return Dataset(x, segment_labels=labels), s


def _monotone_map_params(rng: np.random.Generator) -> tuple:
    # h(u) = u + b * tanh(c * u): strictly increasing for b*c > -1
    return float(rng.uniform(0.3, 0.8)), float(rng.uniform(0.5, 2.0))


def gen_nonsens_sem(
    n_segments: int,
    samples_per_segment: int,
    seed: int,
    lam_range: tuple = (0.3, 3.0),
    swap: bool = False,
):
    """Bivariate nonlinear SEM with nonstationary disturbances, x1 -> x2.

    x1 = h1(e1) and x2 = h2(kappa * tanh(x1) + e2) with h1, h2 strictly
    monotone smooth maps, so (e1, e2) -> (x1, x2) is smooth and invertible and
    the cause is independent of the second disturbance.  Returns
    (Dataset with segment_labels, direction tag, disturbance matrix).
    """
    rng = stream(seed, 4)
    spec = NonstationarySpec(
        n_segments,
        samples_per_segment,
        stream(seed, 4, 1).uniform(lam_range[0], lam_range[1], size=(n_segments, 2)),
    )
    e, labels = spec.sample_sources(rng)
    b1, c1 = _monotone_map_params(rng)
    b2, c2 = _monotone_map_params(rng)
    kappa = float(rng.uniform(0.8, 1.5))
    x1 = e[:, 0] + b1 * np.tanh(c1 * e[:, 0])
    u = kappa * np.tanh(x1) + e[:, 1]
    x2 = u + b2 * np.tanh(c2 * u)
    cols = np.column_stack([x2, x1] if swap else [x1, x2])
    tag = "x2_to_x1" if swap else "x1_to_x2"
    return Dataset(cols, segment_labels=labels), tag, e


def _random_mechanism(rng: np.random.Generator):
    """Smooth nonlinearity: three random-frequency sinusoids plus a cubic."""
    amp = rng.uniform(0.5, 1.5, 3)
    freq = rng.uniform(0.5, 2.5, 3)
    phase = rng.uniform(0.0, 2 * np.pi, 3)
    cubic = rng.uniform(0.1, 0.3)

    def f(x):
        out = cubic * x**3
        for a, w, p in zip(amp, freq, phase):
            out = out + a * np.sin(w * x + p)
        return out

    return f


def gen_anm(
    n_samples: int,
    noise: SourceDistribution,
    seed: int,
    noise_scale: float = 0.4,
    zero_mechanism: bool = False,
    swap: bool = False,
):
    """Additive noise model x2 = f(x1) + e2 with a random smooth mechanism.

    Returns (Dataset(2 cols), direction tag).  With zero_mechanism the effect
    is pure noise (no edge).
    """
    if n_samples < 100:
        raise DataError("need at least 100 samples")
    rng = stream(seed, 5)
    x1 = stream(seed, 5, 1).standard_normal(n_samples)
    e2 = noise.sample(n_samples, stream(seed, 5, 2))
    if zero_mechanism:
        x2 = e2
    else:
        f = _random_mechanism(rng)
        fx = f(x1)
        x2 = fx / fx.std() + noise_scale * e2
    cols = np.column_stack([x2, x1] if swap else [x1, x2])
    return Dataset(cols), ("x2_to_x1" if swap else "x1_to_x2")


def gen_pnl(
    n_samples: int,
    noise: SourceDistribution,
    seed: int,
    noise_scale: float = 0.4,
    identity_post: bool = False,
    swap: bool = False,
):
    """Post-nonlinear model: ANM output passed through a strictly monotone map.

    The post-map composes a shifted softplus with a linear ramp; with
    identity_post=True the output equals gen_anm for the same seed.
    """
    data, tag = gen_anm(n_samples, noise, seed, noise_scale=noise_scale)
    x1, x2 = data.values[:, 0], data.values[:, 1]
    if not identity_post:
        g_rng = stream(seed, 6)
        a = float(g_rng.uniform(0.8, 1.6))
        m = float(g_rng.uniform(-0.5, 0.5))
        s = float(g_rng.uniform(0.5, 1.2))
        ramp = float(g_rng.uniform(0.2, 0.5))
        x2 = ramp * x2 + s * np.logaddexp(0.0, a * (x2 - m))
    cols = np.column_stack([x2, x1] if swap else [x1, x2])
    return Dataset(cols), ("x2_to_x1" if swap else tag)


def _small_net(rng: np.random.Generator, out_scale: float):
    """Random single-hidden-layer scalar network with bounded output."""
    w1 = rng.normal(0.0, 1.5, 8)
    b1 = rng.normal(0.0, 1.0, 8)
    w2 = rng.normal(0.0, 1.0, 8)
    w2 = w2 / np.abs(w2).sum()

    def net(x):
        h = np.tanh(np.outer(x, w1) + b1)
        return out_scale * np.tanh(h @ w2)

    return net


def gen_carefl(
    n_samples: int,
    seed: int,
    noise: Optional[SourceDistribution] = None,
    alpha_zero: bool = False,
    swap: bool = False,
):
    """Affine-flow SEM: x2 = exp(alpha(x1)) * z2 + beta(x1), x1 = z1.

    alpha and beta are random single-hidden-layer networks; z is standardized
    (Laplace by default).  alpha_zero reduces the model to an additive noise
    model.  Returns (Dataset(2 cols), direction tag).
    """
    if n_samples < 100:
        raise DataError("need at least 100 samples")
    noise = noise or SourceDistribution.laplace()
    rng = stream(seed, 7)
    z1 = noise.sample(n_samples, stream(seed, 7, 1))
    z2 = noise.sample(n_samples, stream(seed, 7, 2))
    alpha = (lambda x: np.zeros_like(x)) if alpha_zero else _small_net(rng, float(rng.uniform(0.4, 0.9)))
    beta = _small_net(rng, float(rng.uniform(1.0, 2.0)))
    x1 = z1
    x2 = np.exp(alpha(x1)) * z2 + beta(x1)
    cols = np.column_stack([x2, x1] if swap else [x1, x2])
    return Dataset(cols), ("x2_to_x1" if swap else "x1_to_x2")


def darmois_construct(data: Dataset) -> np.ndarray:
    """Empirical conditional-CDF transform z_i = P(x2 < x2_i | x1 = x1_i).

    Estimated by kernel-weighted ranks: a Gaussian kernel on x1 with
    median-heuristic bandwidth weights each observation's comparison set.  The
    result is approximately uniform on [0, 1] and approximately independent of
    x1 regardless of the dependence between x1 and x2, which is exactly why
    i.i.d. nonlinear ICA is unidentifiable.
    """
    if data.n_vars != 2:
        raise ShapeError("conditional-CDF construction needs exactly 2 columns")
    if data.n_obs < 500:
        raise InsufficientDataError(
            f"need at least 500 rows to estimate the conditional CDF, got {data.n_obs}"
        )
    x1 = data.values[:, 0]
    x2 = data.values[:, 1]
    # median heuristic scaled by the usual nonparametric smoothing rate: the
    # raw median pairwise gap oversmooths the conditional CDF toward the
    # marginal, leaving z visibly dependent on x1
    h = median_heuristic(x1) * data.n_obs ** (-0.2)
    # Pairwise kernel weights on x1; self-comparison contributes 1/2.
    d = x1[:, None] - x1[None, :]
    w = np.exp(-0.5 * (d / h) ** 2)
    less = (x2[None, :] < x2[:, None]).astype(float)
    ties = (x2[None, :] == x2[:, None]).astype(float)
    z = (w * (less + 0.5 * ties)).sum(axis=1) / w.sum(axis=1)
    return z
