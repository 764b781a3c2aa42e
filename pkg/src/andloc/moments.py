"""Fractional moments of Green's functions against their proved ceilings.

For s in (0, 1) the disorder average E|G_z(x, y)|^s is finite even though
E|G| is not, and it obeys two kinds of rigorous bounds:

  * a priori single-site bound: for every complex B,
        (1/2) int_{-1}^{1} |lambda v - B|^{-s} dv <= 1/((1-s) lambda^s),
    saturated exactly at B = 0;
  * walk-expansion ceiling at s = s_crit(lambda) = 1 - 1/ln(lambda):
        E|G_z(x, y)|^{s_crit} <= ln(lambda) * C_{gamma(lambda)}(x - y),
    with C_gamma the self-avoiding-walk correlation and
    gamma(lambda) = e ln(lambda)/lambda, valid once
    gamma(lambda) * mu_d < 1.

This module estimates the left sides by Monte Carlo (counter-based seeds,
sample k is a pure function of (seed, k); means reduce in index order so
results are bit-identical for any worker count) and evaluates the right
sides by quadrature or from exact walk counts, keeping the two routes
independent.

The ceiling uses the truncated walk series plus its rigorous tail bound, so
what is checked is a true upper bound, only slightly weakened by truncation.
Decay rates fitted from the measured moments are compared against the proved
mass m_eps(lambda) = -ln gamma(lambda) - ln(mu + eps); the fit must dominate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad

from . import saw
from .anderson import (Point, Region, ResolventColumns, green, green_column,
                       sample_disorder)
from .critical import gamma_big, gamma_fn, mass, s_crit
from .parallel import map_ordered, resolve_workers
from .rng import substream, unit_open

DEFAULT_Z = 0.01j
DEFAULT_N_SAMPLES = 2000

#: formulas behind every ceiling this module attaches (recorded in artifacts)
CEILING_FORMULAS = {
    "saw_theorem": "ln(lambda) * (C_partial(gamma, x - y) + C_tail(gamma)), "
                   "gamma = e*ln(lambda)/lambda, s = 1 - 1/ln(lambda)",
    "apriori": "1 / ((1 - s) * lambda**s)",
}


class CeilingUnavailableError(Exception):
    """Truncated walk series cannot certify the ceiling (tail diverges)."""


class InsufficientDataError(Exception):
    """Too few distinct distances for a decay fit."""


# --- Monte Carlo moment estimation ---


@dataclass
class MomentEstimate:
    """Sample mean of |G_z(x, y)|^s with its standard error and, when one is
    attached, the rigorous ceiling it is compared against."""

    s: float
    z: complex
    x: Point
    y: Point
    n_samples: int
    mean: float
    stderr: Optional[float]
    ceiling: Optional[float] = None
    ceiling_kind: str = "none"  # "saw_theorem" | "apriori" | "none"

    @property
    def distance(self) -> int:
        return sum(abs(a - b) for a, b in zip(self.x, self.y))

    @property
    def margin(self) -> Optional[float]:
        """ceiling - (mean - 3 stderr); nonnegative when the check passes."""
        if self.ceiling is None:
            return None
        spread = 3.0 * self.stderr if self.stderr is not None else 0.0
        return self.ceiling - (self.mean - spread)

    @property
    def ok(self) -> Optional[bool]:
        m = self.margin
        return None if m is None else m >= 0.0

    def with_ceiling(self, value: float, kind: str) -> "MomentEstimate":
        if kind not in CEILING_FORMULAS:
            raise ValueError(f"unknown ceiling kind {kind!r}")
        return MomentEstimate(s=self.s, z=self.z, x=self.x, y=self.y,
                              n_samples=self.n_samples, mean=self.mean,
                              stderr=self.stderr, ceiling=value,
                              ceiling_kind=kind)

    def to_json_dict(self) -> dict:
        return {
            "s": self.s,
            "z": {"re": self.z.real, "im": self.z.imag},
            "x": list(self.x),
            "y": list(self.y),
            "distance": self.distance,
            "n_samples": self.n_samples,
            "mean": self.mean,
            "stderr": self.stderr,
            "ceiling": self.ceiling,
            "ceiling_kind": self.ceiling_kind,
            "margin": self.margin,
        }


def _moment_chunk(task) -> np.ndarray:
    region, lam, s, z, pairs, seed, k0, k1 = task
    ys = list(dict.fromkeys(y for _, y in pairs))
    out = np.empty((k1 - k0, len(pairs)), dtype=float)
    for i, k in enumerate(range(k0, k1)):
        sample = sample_disorder(region, substream(seed, k))
        solver = ResolventColumns(region, lam, sample, z)
        cols = {y: solver.column(y)[0] for y in ys}
        for j, (x, y) in enumerate(pairs):
            out[i, j] = abs(cols[y][region.index[x]]) ** s
    return out


def estimate_moments(region: Region, lam: float, s: float, z: complex,
                     pairs: Sequence[tuple[Point, Point]], n_samples: int,
                     seed: int, workers: Optional[int] = None) -> list[MomentEstimate]:
    """Monte Carlo E|G_z(x, y)|^s for several pairs from shared solves.

    Sample k uses the disorder seed substream(seed, k); per-sample values are
    stacked in k order before reduction, so mean and stderr are bit-identical
    for any worker count.
    """
    if not (0.0 < s < 1.0):
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    pairs = [(tuple(x), tuple(y)) for x, y in pairs]
    for x, y in pairs:
        if x not in region.index or y not in region.index:
            raise ValueError(f"pair ({x}, {y}) not inside the region")
    workers = resolve_workers(workers)
    n_chunks = min(max(1, workers * 4), n_samples)
    bounds = np.linspace(0, n_samples, n_chunks + 1).astype(int)
    tasks = [(region, lam, s, complex(z), pairs, seed, int(a), int(b))
             for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    vals = np.vstack(map_ordered(_moment_chunk, tasks, workers))
    out = []
    for j, (x, y) in enumerate(pairs):
        col = vals[:, j]
        mean = float(col.mean())
        stderr = float(col.std(ddof=1) / math.sqrt(n_samples)) if n_samples > 1 else None
        out.append(MomentEstimate(s=s, z=complex(z), x=x, y=y,
                                  n_samples=n_samples, mean=mean, stderr=stderr))
    return out


def estimate_moment(region: Region, lam: float, s: float, z: complex, x, y,
                    n_samples: int = DEFAULT_N_SAMPLES, seed: int = 0,
                    workers: Optional[int] = None) -> MomentEstimate:
    return estimate_moments(region, lam, s, z, [(tuple(x), tuple(y))],
                            n_samples, seed, workers)[0]


def estimates_to_csv(estimates: Iterable[MomentEstimate]) -> str:
    lines = ["distance,mean,stderr,ceiling"]
    for e in estimates:
        stderr = "" if e.stderr is None else repr(e.stderr)
        ceiling = "" if e.ceiling is None else repr(e.ceiling)
        lines.append(f"{e.distance},{e.mean!r},{stderr},{ceiling}")
    return "\n".join(lines) + "\n"


# --- a priori single-site bound ---


def apriori_bound(lam: float, s: float) -> float:
    """Right side 1/((1-s) lambda^s) of the single-site bound."""
    return gamma_big(s, lam)


def apriori_integral(lam: float, s: float, b: complex, tol: float = 1e-10) -> float:
    """(1/2) int_{-1}^{1} |lambda v - b|^{-s} dv by adaptive quadrature.

    The integrand peaks (for Im b = 0: diverges integrably) at v0 = Re(b)/lambda;
    the integral is split there, and for real b on the interval the algebraic
    singularity is handed to the quadrature as a weight, keeping the numerical
    route independent of the closed-form bound.
    """
    if not (0.0 < s < 1.0):
        raise ValueError(f"s must lie in (0, 1), got {s}")
    if lam <= 0:
        raise ValueError("lambda must be positive")
    b = complex(b)
    v0 = b.real / lam
    if b.imag == 0.0 and -1.0 < v0 < 1.0:
        # |lambda v - b|^{-s} = lambda^{-s} |v - v0|^{-s}: algebraic weight
        c = 0.5 * lam**-s
        left, _ = quad(lambda v: c, -1.0, v0, weight="alg", wvar=(0.0, -s),
                       epsabs=tol, limit=200)
        right, _ = quad(lambda v: c, v0, 1.0, weight="alg", wvar=(-s, 0.0),
                        epsabs=tol, limit=200)
        return left + right

    def f(v: float) -> float:
        return 0.5 * ((lam * v - b.real) ** 2 + b.imag**2) ** (-0.5 * s)

    points = [v0] if -1.0 < v0 < 1.0 else None
    val, _ = quad(f, -1.0, 1.0, points=points, epsabs=tol, limit=200)
    return val


@dataclass
class AprioriCheck:
    lam: float
    s: float
    bound: float
    ratios: list[tuple[complex, float]]  # (B, integral / bound)

    @property
    def max_ratio(self) -> float:
        return max(r for _, r in self.ratios)

    @property
    def ok(self) -> bool:
        return self.max_ratio <= 1.0 + 1e-8


def check_apriori(lam: float, s: float, b_values: Sequence[complex]) -> AprioriCheck:
    """Quadrature-vs-bound ratios over a grid of complex B."""
    if len(b_values) == 0:
        raise ValueError("need at least one B value")
    bound = apriori_bound(lam, s)
    ratios = [(complex(b), apriori_integral(lam, s, b) / bound) for b in b_values]
    return AprioriCheck(lam=lam, s=s, bound=bound, ratios=ratios)


def random_b_disc(dimension: int, lam: float, count: int, seed: int) -> list[complex]:
    """Deterministic quasi-random B grid in the disc |B| <= 2d + 2 lambda."""
    radius = 2.0 * dimension + 2.0 * lam
    out = []
    for k in range(count):
        r = radius * math.sqrt(unit_open(seed, (k, 0)))
        phi = 2.0 * math.pi * unit_open(seed, (k, 1))
        out.append(complex(r * math.cos(phi), r * math.sin(phi)))
    return out


# --- walk-expansion ceiling ---


def ceiling_value(series: saw.WalkSeries, lam: float, diff: Point) -> float:
    """ln(lambda) * (C_gamma partial sum + tail bound) at gamma(lambda).

    Raises CeilingUnavailableError when gamma(lambda) * c_N^{1/N} >= 1, in
    which case the truncated series certifies nothing.
    """
    gamma = gamma_fn(lam)
    corr = saw.correlation(series, gamma, diff)
    if not corr.converged:
        raise CeilingUnavailableError(
            f"tail bound diverges at gamma = {gamma:.6g} with N = "
            f"{series.max_length} (criterion gamma * c_N^(1/N) < 1 not met)")
    return math.log(lam) * corr.upper_bound


def default_region_family(dimension: int, L: int, keep: Sequence[Point] = (),
                          seed: int = 0, n_deletion_variants: int = 2) -> list[Region]:
    """Region family realizing the sup over volumes in the ceiling check:
    the full box, boxes minus one random site, and a half box."""
    full = Region(dimension=dimension, L=L)
    keep = {tuple(p) for p in keep}
    family = [full]
    candidates = [p for p in full.sites if p not in keep]
    for v in range(n_deletion_variants):
        pick = candidates[int(unit_open(seed, (v,)) * len(candidates))]
        family.append(full.without(pick))
    half_deleted = [p for p in full.sites if p[0] < 0 and p not in keep]
    family.append(Region(dimension=dimension, L=L,
                         deleted=frozenset(map(tuple, half_deleted))))
    return family


def check_theorem_ceiling(regions: Sequence[Region], lam: float, z: complex,
                          pairs: Sequence[tuple[Point, Point]], n_samples: int,
                          seed: int, series: saw.WalkSeries,
                          workers: Optional[int] = None) -> list[MomentEstimate]:
    """Monte Carlo means at s = s_crit(lambda) against the walk ceiling.

    Returns one estimate per (region, pair), in that order, each carrying the
    ceiling; taking the max of the means over the region family realizes the
    sup over volumes.  The ceiling depends only on x - y.
    """
    s = s_crit(lam)
    out = []
    for region in regions:
        ests = estimate_moments(region, lam, s, z, pairs, n_samples, seed, workers)
        for est in ests:
            diff = tuple(a - b for a, b in zip(est.x, est.y))
            out.append(est.with_ceiling(ceiling_value(series, lam, diff),
                                        "saw_theorem"))
    return out


# --- decay-rate fit ---


@dataclass
class DecayFit:
    """Weighted least-squares fit ln(mean) = ln(A) - rate * distance."""

    distances: list[int]
    log_means: list[float]
    fitted_rate: float
    rate_stderr: float
    fitted_prefactor: float
    reference_rate: float
    reference_positive: bool
    residuals: list[float]
    chi2: float

    def dominates_reference(self, n_sigma: float = 2.0) -> bool:
        """Fitted decay at least as fast as the proved mass, within fit error."""
        return self.fitted_rate >= self.reference_rate - n_sigma * self.rate_stderr

    def to_json_dict(self) -> dict:
        return {
            "distances": self.distances,
            "log_means": self.log_means,
            "fitted_rate": self.fitted_rate,
            "rate_stderr": self.rate_stderr,
            "fitted_prefactor": self.fitted_prefactor,
            "reference_rate": self.reference_rate,
            "reference_positive": self.reference_positive,
            "residuals": self.residuals,
            "chi2": self.chi2,
            "dominates_reference": self.dominates_reference(),
        }


def fit_decay(estimates: Sequence[MomentEstimate], lam: float, mu_upper: float,
              eps: float = 0.01) -> DecayFit:
    """Fit the measured decay rate and compare with m_eps(lambda).

    Weights are 1/sigma of ln(mean) (delta method sigma = stderr/mean) when
    standard errors are available, unweighted otherwise.
    """
    if len({e.distance for e in estimates}) < 3:
        raise InsufficientDataError("need at least 3 distinct distances")
    dists = np.array([e.distance for e in estimates], dtype=float)
    means = np.array([e.mean for e in estimates], dtype=float)
    if np.any(means <= 0):
        raise ValueError("all means must be positive to fit a log decay")
    logm = np.log(means)
    if all(e.stderr is not None and e.stderr > 0 for e in estimates):
        # known per-point sigma: keep the formal covariance
        w = means / np.array([e.stderr for e in estimates])
        cov_mode = "unscaled"
    else:
        # no error bars: let the residual scatter set the scale
        w = np.ones_like(dists)
        cov_mode = True
    coeffs, cov = np.polyfit(dists, logm, 1, w=w, cov=cov_mode)
    slope, intercept = coeffs
    resid = logm - (slope * dists + intercept)
    m = mass(lam, mu_upper, eps)
    return DecayFit(
        distances=[int(d) for d in dists],
        log_means=[float(v) for v in logm],
        fitted_rate=float(-slope),
        rate_stderr=float(math.sqrt(max(cov[0, 0], 0.0))),
        fitted_prefactor=float(math.exp(intercept)),
        reference_rate=m.value,
        reference_positive=m.positive,
        residuals=[float(r) for r in resid],
        chi2=float(np.sum((resid * w) ** 2)),
    )


# --- conditional single-site bound under fixed environments ---


def _pole_panels(v0: float, width: float) -> list[tuple[float, float]]:
    """Geometrically graded subdivision of [-1, 1] focused on v0."""
    width = max(width, 1e-12)
    if not (-1.0 < v0 < 1.0):
        return [(-1.0, 1.0)]
    cuts = {-1.0, 1.0, v0}
    for side in (1.0, -1.0):
        step = width
        while True:
            edge = v0 + side * step
            if not (-1.0 < edge < 1.0):
                break
            cuts.add(edge)
            step *= 2.0
    edges = sorted(cuts)
    return list(zip(edges[:-1], edges[1:]))


@dataclass
class DrbCheck:
    ok: bool
    tol: float
    margins: list[float]  # RHS - LHS per environment; pass iff >= -tol


def check_drb_conditional(region: Region, lam: float, s: float, z: complex,
                          x, y, n_omega_x: int = 256, n_env: int = 20,
                          seed: int = 0) -> DrbCheck:
    """Conditional bound under fixed environments, checked by quadrature.

    For each environment (all omega except omega(x) frozen), the omega(x)
    average of |G(x, y)|^s is computed by Gauss-Legendre quadrature over
    roughly n_omega_x nodes on panels graded toward the effective pole
    Re(B)/lambda, each node a fresh full solve; the right side comes from
    independent solves on the depleted region.  Environment j passes when
    LHS <= RHS + tol.
    """
    x, y = tuple(x), tuple(y)
    if x == y:
        raise ValueError("the conditional bound compares x != y")
    if x not in region.index or y not in region.index:
        raise ValueError("x and y must lie in the region")
    tol = 1e-6
    factor = gamma_big(s, lam)
    depleted = region.without(x)
    nbrs = region.neighbors_in(x)
    margins = []
    for j in range(n_env):
        sample = sample_disorder(region, substream(seed, j))
        if nbrs:
            u, _ = green_column(depleted, lam, sample, z, y)
            rhs = factor * sum(abs(u[depleted.index[q]]) ** s for q in nbrs)
        else:
            rhs = 0.0
        # effective pole of v -> G(x, y; v): B is omega(x)-independent
        gxx = green(region, lam, sample, z, x, x).value
        b = lam * sample.value(x) - 1.0 / gxx
        panels = _pole_panels(b.real / lam, abs(b.imag) / lam)
        per = max(4, n_omega_x // len(panels))
        nodes, weights = leggauss(per)
        lhs = 0.0
        for a_, b_ in panels:
            mid, half = 0.5 * (a_ + b_), 0.5 * (b_ - a_)
            for t, w in zip(nodes, weights):
                v = mid + half * t
                g = green(region, lam, sample.with_site_value(x, v), z, x, y).value
                lhs += 0.5 * w * half * abs(g) ** s
        margins.append(rhs - lhs)
    return DrbCheck(ok=all(m >= -tol for m in margins), tol=tol, margins=margins)
