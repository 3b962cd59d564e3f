"""Adaptive random discretization around the tilted location tau.

The excursion cluster around tau has spatial extent of order 1/zeta with
zeta = b**(2/alpha) up to the kernel's local constant, so design points are
drawn i.i.d. from a heavy-tailed isotropic base density k recentred at tau
and contracted by zeta.  Inverse-density weighting then gives a conditionally
unbiased estimate of the excursion-set volume from a constant number of
points, independent of the level b.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import fdtr, fdtri, gammaln

from .errors import ConfigurationError, IntegrandBoundsError, InvalidLevelError
from .field import BoxDomain, FieldModel, as_points

__all__ = [
    "ScaleFactors",
    "cluster_scale",
    "choose_m",
    "DesignDensity",
    "DesignDraw",
    "sample_design_points",
    "mes_hat",
    "alpha_hat",
]


# ---------------------------------------------------------------------------
# Cluster scale
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScaleFactors:
    """Contraction factors zeta_1 (correlation), zeta_2 (std profile), and
    their maximum zeta; zeta_2 is 0 for constant-std models by convention."""

    zeta1: float
    zeta2: float

    @property
    def zeta(self) -> float:
        return max(self.zeta1, self.zeta2)


def cluster_scale(model: FieldModel, b: float) -> ScaleFactors:
    """Scale factors for level b: zeta_i solves c_i |s|**alpha_i = b**-2."""
    if b <= 1.0:
        raise InvalidLevelError(f"cluster scale requires b > 1, got {b}")
    rp = model.regularity
    if rp is None:
        raise ConfigurationError("model has no regularity parameters; supply them explicitly")
    zeta1 = b ** (2.0 / rp.alpha1) * rp.c1 ** (1.0 / rp.alpha1)
    if rp.constant_std:
        zeta2 = 0.0
    else:
        zeta2 = b ** (2.0 / rp.alpha2) * rp.c2 ** (1.0 / rp.alpha2)
    return ScaleFactors(zeta1=zeta1, zeta2=zeta2)


def choose_m(eps: float, model: FieldModel, lam: float = 1.0) -> int:
    """Design size m = ceil(lam * eps**-(d (2/min(alpha1, alpha2) + 2/beta1))).

    Guarantees relative discretization bias of order eps for some lam; lam
    defaults to 1 and fixed-m overrides are the usual choice in practice.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError("eps must lie in (0, 1]")
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    rp = model.regularity
    if rp is None:
        raise ConfigurationError("model has no regularity parameters; supply them explicitly")
    exponent = model.dimension * (2.0 / rp.alpha_min + 2.0 / rp.beta1)
    return int(math.ceil(lam * eps ** (-exponent)))


# ---------------------------------------------------------------------------
# Heavy-tailed isotropic base density (multivariate-t radial profile)
# ---------------------------------------------------------------------------

class DesignDensity:
    """Isotropic density k(t) = c (1 + |t|^2 / (dof * scale^2))**-((dof+d)/2).

    This is the multivariate t density with ``dof`` degrees of freedom and
    scale matrix scale^2 * I, so its radial law has the exact closed form
    |X| = scale * sqrt(d * F) with F ~ F(d, dof); radii are drawn by inverting
    that CDF and directions uniformly on the sphere.  The tail exponent is
    dof (k(t) ~ |t|**-(d+dof)), heavy enough for bounded-variance weighting
    with dof >= 3.
    """

    def __init__(self, dim: int, dof: int | None = None, scale: float | None = None):
        if dim < 1:
            raise ConfigurationError("dimension must be at least 1")
        if dof is None:
            dof = 3 if dim == 1 else 4
        if scale is None:
            scale = 1.0
        if dof < 3:
            raise ConfigurationError("need dof >= 3 for a usable heavy tail")
        if scale <= 0.0:
            raise ConfigurationError("scale must be positive")
        self.dim = int(dim)
        self.dof = float(dof)
        self.scale = float(scale)
        self._log_norm = (gammaln((self.dof + dim) / 2.0) - gammaln(self.dof / 2.0)
                          - dim / 2.0 * math.log(self.dof * math.pi)
                          - dim * math.log(self.scale))
        self._check_normalization()

    def _check_normalization(self):
        d = self.dim
        surface = 2.0 * math.pi ** (d / 2.0) / math.gamma(d / 2.0)
        radial = lambda rho: surface * rho ** (d - 1) * float(self.pdf(np.r_[rho, [0.0] * (d - 1)])[0])
        total = 0.0
        for lo, hi in [(0.0, self.scale), (self.scale, 50.0 * self.scale),
                       (50.0 * self.scale, np.inf)]:
            part, _ = quad(radial, lo, hi, limit=200)
            total += part
        if abs(total - 1.0) > 1e-8:
            raise ConfigurationError(
                f"base density fails to integrate to 1 (got {total!r})")

    def log_pdf(self, x) -> np.ndarray:
        pts = as_points(x, self.dim)
        r2 = np.sum(pts * pts, axis=1)
        return self._log_norm - (self.dof + self.dim) / 2.0 * np.log1p(
            r2 / (self.dof * self.scale ** 2))

    def pdf(self, x) -> np.ndarray:
        return np.exp(self.log_pdf(x))

    @property
    def peak(self) -> float:
        """k(0), the maximum of the density."""
        return math.exp(self._log_norm)

    def radius_cdf(self, r):
        """P(|X| <= r) via the F(d, dof) representation."""
        r = np.asarray(r, dtype=float)
        return fdtr(self.dim, self.dof, r * r / (self.dim * self.scale ** 2))

    def radius_ppf(self, u):
        """Inverse radial CDF; exact in both tails."""
        return self.scale * np.sqrt(self.dim * fdtri(self.dim, self.dof, u))

    @property
    def median_radius(self) -> float:
        return float(self.radius_ppf(0.5))

    def sample(self, rng, size: int) -> np.ndarray:
        """i.i.d. draws from k: radius by CDF inversion, direction uniform."""
        r = self.radius_ppf(rng.random(size))
        z = rng.standard_normal((size, self.dim))
        norms = np.linalg.norm(z, axis=1, keepdims=True)
        np.maximum(norms, np.finfo(float).tiny, out=norms)
        return r[:, None] * (z / norms)

    def __repr__(self):
        return f"DesignDensity(dim={self.dim}, dof={self.dof:g}, scale={self.scale:g})"


# ---------------------------------------------------------------------------
# Design draws and volume estimators
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DesignDraw:
    """One batch of design points around tau with their recorded densities.

    Points may fall outside the domain; they are retained with ``inside``
    False so that their excursion indicators vanish while the draw stays
    exchangeable.
    """

    points: np.ndarray       # (m, d)
    log_density: np.ndarray  # (m,) log of zeta^d k(zeta (t_i - tau))
    density: np.ndarray      # (m,)
    inside: np.ndarray       # (m,) bool
    tau: np.ndarray          # (d,)
    zeta: float

    @property
    def m(self) -> int:
        return self.points.shape[0]


def sample_design_points(tau, zeta: float, m: int, density: DesignDensity,
                         domain: BoxDomain, rng) -> DesignDraw:
    """m i.i.d. points t_i = tau + s_i / zeta with s_i from the base density.

    Recorded density values are zeta^d k(zeta (t_i - tau)), evaluated on the
    stored points so the identity holds bit-exactly.
    """
    if m < 1:
        raise ValueError("need at least one design point")
    if zeta <= 0.0:
        raise ValueError("zeta must be positive")
    tau = as_points(tau, density.dim)[0]
    raw = density.sample(rng, m)
    points = tau + raw / zeta
    log_k = density.dim * math.log(zeta) + density.log_pdf(zeta * (points - tau))
    return DesignDraw(points=points, log_density=log_k, density=np.exp(log_k),
                      inside=domain.contains(points), tau=tau, zeta=float(zeta))


def mes_hat(values, gamma: float, draw: DesignDraw) -> float:
    """Unbiased excursion-volume estimate (1/m) sum I(f(t_i) > gamma) / k(t_i),
    restricted to points inside the domain."""
    values = np.asarray(values, dtype=float)
    if values.shape[0] != draw.m:
        raise ValueError("field values must align with the design points")
    hits = (values > gamma) & draw.inside
    if not hits.any():
        return 0.0
    return float(np.sum(np.exp(-draw.log_density[hits]))) / draw.m


def alpha_hat(xi_values, f_values, b: float, draw: DesignDraw,
              bounds: tuple[float, float] | None = None) -> float:
    """Weighted excursion integral estimate (1/m) sum xi_i I(f_i > b) / k_i.

    If ``bounds`` = (a1, a2) is supplied, every integrand value must lie in
    [a1, a2]; a violation raises :class:`IntegrandBoundsError`.
    """
    xi = np.asarray(xi_values, dtype=float)
    fv = np.asarray(f_values, dtype=float)
    if xi.shape[0] != draw.m or fv.shape[0] != draw.m:
        raise ValueError("integrand and field values must align with the design points")
    if bounds is not None:
        a1, a2 = bounds
        if np.any(xi < a1) or np.any(xi > a2):
            raise IntegrandBoundsError(
                f"integrand value outside declared bounds [{a1}, {a2}]")
    hits = (fv > b) & draw.inside
    if not hits.any():
        return 0.0
    return float(np.sum(xi[hits] * np.exp(-draw.log_density[hits]))) / draw.m
