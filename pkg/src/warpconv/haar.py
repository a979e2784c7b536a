"""Monte-Carlo sampling of right Haar measure on a bounded algebra region.

The target law is the algebra-coordinate density from
:func:`warpconv.groups.haar_density`, truncated to the max-norm box
|xi|_inf <= support_radius.  Haar measure on the affine and homography
groups is infinite globally, but filters only ever evaluate inside a small
identity neighbourhood, so sampling the truncated density is what the
convolution estimator needs; the unknown normalizing constant is absorbed
by the trainable filter amplitude.

Sampling runs several Metropolis chains in lockstep, vectorized across
chains, with per-step boolean accept masks recorded.  The proposal is an
isotropic Gaussian step reflected at the box boundary, which keeps the
kernel symmetric so the acceptance ratio is just the density ratio.
Output is a deterministic function of the config (including its seed).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import groups
from .groups import GroupSpec, LieDomainError

__all__ = [
    "SamplerConfig",
    "SampleSet",
    "metropolis_haar",
    "gaussian_identity_samples",
    "chain_diagnostics",
    "ChainReport",
]


@dataclass(frozen=True)
class SamplerConfig:
    num_samples: int
    num_chains: int = 8
    burn_in: int = 500
    proposal_sigma: float | None = None  # default: support_radius / 5
    support_radius: float = 0.5
    seed: int = 0
    thinning: int = 1

    def __post_init__(self):
        if self.num_samples <= 0:
            raise ValueError("num_samples must be positive")
        if self.num_chains < 1:
            raise ValueError("num_chains must be >= 1")
        if self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")
        if self.thinning < 1:
            raise ValueError("thinning must be >= 1")
        if not (0.0 < self.support_radius <= 1.0):
            raise ValueError("support_radius must lie in (0, 1]")
        if self.proposal_sigma is not None and self.proposal_sigma <= 0:
            raise ValueError("proposal_sigma must be positive")

    @property
    def sigma(self) -> float:
        return self.proposal_sigma if self.proposal_sigma is not None else self.support_radius / 5.0


@dataclass(frozen=True)
class SampleSet:
    """A batch of algebra-coordinate draws with cached exponentials.

    ``xi`` is (n, dim); ``mats_pos``/``mats_neg`` cache exp(+xi) and
    exp(-xi) as (n, 3, 3) stacks.  For Metropolis output the rows are
    ordered step-major (chain index varies fastest), so reshaping to
    (kept_steps, num_chains, dim) recovers the per-chain sequences.
    """

    spec: GroupSpec
    xi: np.ndarray
    mats_pos: np.ndarray
    mats_neg: np.ndarray
    acceptance_rate: float
    num_chains: int = 1
    support_radius: float | None = None
    accept_mask: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        for name in ("xi", "mats_pos", "mats_neg"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            a.flags.writeable = False
            object.__setattr__(self, name, a)
        if self.xi.shape != (len(self.xi), self.spec.dim):
            raise ValueError("xi shape does not match the group dimension")
        if not np.isfinite(self.xi).all():
            raise ValueError("xi contains non-finite entries")
        if self.support_radius is not None:
            if np.abs(self.xi).max(initial=0.0) > self.support_radius + 1e-12:
                raise ValueError("a sample lies outside the declared support box")

    def __len__(self):
        return len(self.xi)


def _reflect_into_box(x: np.ndarray, r: float) -> np.ndarray:
    """Fold real coordinates into [-r, r] by reflection at the walls."""
    period = 4.0 * r
    y = np.mod(x + r, period)
    y = np.where(y > 2.0 * r, period - y, y)
    return y - r


def _probe_density(spec: GroupSpec, radius: float) -> None:
    """Cheap positivity probe over the box: corners plus a fixed lattice."""
    rng = np.random.default_rng(12345)  # probe is part of the contract, not the stream
    pts = [np.zeros(spec.dim)]
    if spec.dim <= 8:
        corners = np.array(np.meshgrid(*[[-radius, radius]] * spec.dim)).reshape(spec.dim, -1).T
        pts.append(corners)
    pts.append(rng.uniform(-radius, radius, size=(512, spec.dim)))
    probe = np.concatenate([np.atleast_2d(p) for p in pts], axis=0)
    groups.haar_density_many(probe, spec)  # raises LieDomainError on any d <= 0


def metropolis_haar(spec: GroupSpec, cfg: SamplerConfig) -> SampleSet:
    """Draw ``cfg.num_samples`` points with stationary law ~ Haar density on the box.

    Chains start at the origin and advance in lockstep; the per-step
    accept/reject decisions are kept as a boolean (steps, chains) matrix.
    Output is identical whether chains are advanced serially or in
    parallel, because each step consumes one batched RNG draw.
    """
    _probe_density(spec, cfg.support_radius)
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    c, dim, r = cfg.num_chains, spec.dim, cfg.support_radius
    sigma = cfg.sigma

    x = np.zeros((c, dim))
    dens = groups.haar_density_many(x, spec)
    kept_steps = -(-cfg.num_samples // c)  # ceil
    total = cfg.burn_in + kept_steps * cfg.thinning
    keep = []
    masks = np.empty((total - cfg.burn_in, c), dtype=bool)
    accepted = 0
    for step in range(total):
        prop = _reflect_into_box(x + sigma * rng.standard_normal((c, dim)), r)
        pdens = groups.haar_density_many(prop, spec)
        accept = rng.random(c) < (pdens / dens)
        x = np.where(accept[:, None], prop, x)
        dens = np.where(accept, pdens, dens)
        if step >= cfg.burn_in:
            i = step - cfg.burn_in
            masks[i] = accept
            accepted += int(accept.sum())
            if (i + 1) % cfg.thinning == 0:
                keep.append(x.copy())

    xi = np.concatenate(keep, axis=0)[: cfg.num_samples]
    rate = accepted / masks.size if masks.size else 0.0
    if not 0.05 <= rate <= 0.95:
        warnings.warn(
            f"metropolis_haar acceptance rate {rate:.3f} outside [0.05, 0.95]; "
            "consider adjusting proposal_sigma",
            RuntimeWarning,
        )
    return SampleSet(
        spec=spec,
        xi=xi,
        mats_pos=groups._expm_many(np.einsum("ni,ijk->njk", xi, spec.basis)),
        mats_neg=groups._expm_many(np.einsum("ni,ijk->njk", -xi, spec.basis)),
        acceptance_rate=rate,
        num_chains=c,
        support_radius=r,
        accept_mask=masks,
    )


def gaussian_identity_samples(spec: GroupSpec, sigma: float, n: int, seed: int = 0) -> SampleSet:
    """n draws xi ~ N(0, sigma^2 I) through exp, with xi_0 forced to zero.

    The identity is always included so pooled outputs are continuous at
    the unwarped input even before training.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    if n <= 0:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    xi = sigma * rng.standard_normal((n, spec.dim))
    xi[0] = 0.0
    return SampleSet(
        spec=spec,
        xi=xi,
        mats_pos=groups._expm_many(np.einsum("ni,ijk->njk", xi, spec.basis)),
        mats_neg=groups._expm_many(np.einsum("ni,ijk->njk", -xi, spec.basis)),
        acceptance_rate=1.0,
        num_chains=1,
        support_radius=None,
    )


@dataclass(frozen=True)
class ChainReport:
    acceptance_rate: float
    mean: np.ndarray
    variance: np.ndarray
    psr: np.ndarray | None  # split-chain potential scale reduction, per coordinate
    notice: str = ""

    def as_dict(self) -> dict:
        return {
            "acceptance_rate": self.acceptance_rate,
            "mean": self.mean.tolist(),
            "variance": self.variance.tolist(),
            "psr": None if self.psr is None else self.psr.tolist(),
            "notice": self.notice,
        }


def chain_diagnostics(s: SampleSet) -> ChainReport:
    """Acceptance rate, per-coordinate moments, and split-chain PSR.

    PSR follows the usual split-R-hat recipe: each chain's kept sequence is
    halved, and between/within variances are compared.  Single-chain sets
    get the moments only, with a notice.
    """
    if len(s) == 0:
        raise ValueError("empty sample set")
    mean = s.xi.mean(axis=0)
    var = s.xi.var(axis=0, ddof=1) if len(s) > 1 else np.zeros(s.spec.dim)

    usable = (len(s) // s.num_chains) * s.num_chains
    if s.num_chains < 2 or usable < 4 * s.num_chains:
        return ChainReport(s.acceptance_rate, mean, var, None,
                           notice="PSR omitted: need >= 2 chains with >= 4 kept steps each")
    seq = s.xi[:usable].reshape(-1, s.num_chains, s.spec.dim)  # (steps, chains, dim)
    half = seq.shape[0] // 2
    split = np.concatenate([seq[:half], seq[half: 2 * half]], axis=1)  # (half, 2c, dim)
    n, m = split.shape[0], split.shape[1]
    chain_means = split.mean(axis=0)
    w = split.var(axis=0, ddof=1).mean(axis=0)
    b = n * chain_means.var(axis=0, ddof=1)
    var_plus = (n - 1) / n * w + b / n
    psr = np.sqrt(var_plus / np.where(w == 0, 1.0, w))
    return ChainReport(s.acceptance_rate, mean, var, psr)
