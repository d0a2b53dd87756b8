"""Second-order channel statistics.

Builds all average channel gains from node geometry via power-law path
loss, and evaluates the order-statistics mean of the strongest
secondary-to-primary link together with the hypoexponential statistics of
the aggregate primary-to-secondary interference.
"""

import itertools
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

# Relative gap below which hypoexponential means count as tied, and the
# multiplicative offset used to split them.  Partial-fraction weights are
# undefined at exact ties; splitting at 1e-7 perturbs any derived mean or
# probability by O(1e-7) relative, which is far inside every Monte-Carlo
# tolerance used downstream.
TIE_REL_TOL = 1e-9
TIE_OFFSET = 1e-7


def pathloss_gain(d, d_ref, alpha):
    """Average channel gain (d / d_ref)^-alpha for distance d in meters."""
    if d <= 0 or d_ref <= 0 or alpha <= 0:
        raise ValueError(
            f"pathloss_gain requires positive inputs, got d={d}, d_ref={d_ref}, alpha={alpha}"
        )
    return (d / d_ref) ** (-alpha)


def ensure_distinct(values, rel_tol=TIE_REL_TOL, offset=TIE_OFFSET):
    """Return a copy of `values` with near-ties split multiplicatively.

    Entries whose sorted-neighbour relative gap is below `rel_tol` are
    scaled by distinct factors (1 + offset), (1 + 2*offset), ... so that
    partial-fraction expansions stay well defined.  Original ordering is
    preserved.
    """
    vals = [float(v) for v in values]
    if any(v <= 0 for v in vals):
        raise ValueError(f"means must be strictly positive, got {vals}")
    if len(vals) < 2:
        return vals
    scale = offset
    for _ in range(20):
        order = sorted(range(len(vals)), key=lambda i: vals[i])
        out = list(vals)
        groups = []
        current = [order[0]]
        for prev, idx in zip(order, order[1:]):
            if vals[idx] - vals[prev] <= rel_tol * vals[idx]:
                current.append(idx)
            else:
                groups.append(current)
                current = [idx]
        groups.append(current)
        for group in groups:
            if len(group) > 1:
                for rank, idx in enumerate(group):
                    out[idx] = vals[idx] * (1.0 + scale * (rank + 1))
        # a perturbed value may collide with a close non-tied neighbour;
        # widen the offsets and retry in that (rare) case
        srt = sorted(out)
        if all(b - a > rel_tol * b for a, b in zip(srt, srt[1:])):
            return out
        scale *= 1.7
    raise ArithmeticError(f"could not separate near-tied means {values}")


def _pf_weights_extended(ms):
    """w_k = prod_{j != k} m_k / (m_k - m_j) in extended precision; the
    products are individually benign but the weights reach magnitudes where
    float64 rounding would dominate their later cancellations."""
    arr = np.asarray(ms, dtype=np.longdouble)
    diff = arr[:, None] - arr[None, :]
    np.fill_diagonal(diff, 1.0)
    ratios = arr[:, None] / diff
    np.fill_diagonal(ratios, 1.0)
    return arr, np.prod(ratios, axis=1)


def hypoexp_weights(means):
    """Partial-fraction weights of a sum of independent exponentials.

    Returns (adjusted_means, weights) with w_k = prod_{j != k} m_k / (m_k - m_j);
    near-tied means are first split per `ensure_distinct`.
    """
    ms = ensure_distinct(means)
    _, w = _pf_weights_extended(ms)
    return ms, [float(x) for x in w]


def mean_max_inid(means):
    """E[max of independent exponentials] by the nested alternating sum.

    Summing over the anchor index l and all subsets of the remaining
    receivers: sum_l sum_S (-1)^|S| / (m_l (1/m_l + sum_{j in S} 1/m_j)^2).
    Well defined at equal means (no difference terms appear).
    """
    ms = [float(m) for m in means]
    if not ms:
        raise ValueError("mean_max_inid requires at least one mean")
    if any(m <= 0 for m in ms):
        raise ValueError(f"means must be strictly positive, got {ms}")
    terms = []
    for l, m_l in enumerate(ms):
        others = [1.0 / m for i, m in enumerate(ms) if i != l]
        for k in range(len(ms)):
            for combo in itertools.combinations(others, k):
                rate = 1.0 / m_l + sum(combo)
                terms.append((-1.0) ** k / (m_l * rate * rate))
    return math.fsum(terms)


def mean_max_iid(mean, l_r):
    """E[max of l_r i.i.d. exponentials]:
    l_r * mean * sum_{k=0}^{l_r-1} (-1)^k / (k+1)^2 * C(l_r-1, k).
    """
    if mean <= 0:
        raise ValueError(f"mean must be positive, got {mean}")
    if l_r < 1 or l_r != int(l_r):
        raise ValueError(f"l_r must be a positive integer, got {l_r}")
    l_r = int(l_r)
    total = math.fsum(
        (-1.0) ** k / (k + 1) ** 2 * math.comb(l_r - 1, k) for k in range(l_r)
    )
    return l_r * mean * total


def mean_sum_inid(means):
    """Mean of a hypoexponential sum via its partial-fraction weights.

    Equals sum(means) by linearity; evaluating the weighted form keeps the
    weights honest and is cross-checked against linearity in the tests.
    The weighted sum cancels heavily, so it is accumulated in extended
    precision.
    """
    ms = ensure_distinct(means)
    arr, w = _pf_weights_extended(ms)
    return float(np.sum(np.sort(w * arr)))


def sum_density_inid(z, means):
    """Density of a sum of independent exponentials with the given means:
    f(z) = sum_k w_k exp(-z / m_k) / m_k.
    """
    if z < 0:
        raise ValueError(f"density argument must be >= 0, got {z}")
    ms, weights = hypoexp_weights(means)
    val = math.fsum(w * math.exp(-z / m) / m for w, m in zip(weights, ms))
    return max(0.0, val)


@dataclass(frozen=True)
class Geometry:
    """Node distances (meters) defining one deployment."""

    d_st_sr: float
    d_pt_sr: tuple
    d_st_pr: tuple
    d_ref: float = 100.0
    alpha: float = 4.0

    def __post_init__(self):
        object.__setattr__(self, "d_pt_sr", tuple(float(d) for d in self.d_pt_sr))
        object.__setattr__(self, "d_st_pr", tuple(float(d) for d in self.d_st_pr))
        for name in ("d_st_sr", "d_ref", "alpha"):
            if getattr(self, name) <= 0:
                raise ValueError(f"Geometry.{name} must be positive")
        if not self.d_pt_sr or any(d <= 0 for d in self.d_pt_sr):
            raise ValueError("Geometry.d_pt_sr must be a non-empty list of positive distances")
        if not self.d_st_pr or any(d <= 0 for d in self.d_st_pr):
            raise ValueError("Geometry.d_st_pr must be a non-empty list of positive distances")


@dataclass(frozen=True)
class LinkStats:
    """All average channel gains of one scenario.

    mean_x         -- per-entry gain of the desired channel
    mean_y_per_pr  -- gain from the secondary transmitter to each primary receiver
    mean_z_per_pt  -- gain from each primary transmitter to the secondary receiver
    iid_y / iid_z  -- whether the respective link sets are declared identical
    """

    mean_x: float
    mean_y_per_pr: tuple
    mean_z_per_pt: tuple
    iid_y: bool = False
    iid_z: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mean_y_per_pr", tuple(float(v) for v in self.mean_y_per_pr))
        object.__setattr__(self, "mean_z_per_pt", tuple(float(v) for v in self.mean_z_per_pt))
        if self.mean_x <= 0:
            raise ValueError("LinkStats.mean_x must be positive")
        if not self.mean_y_per_pr or any(v <= 0 for v in self.mean_y_per_pr):
            raise ValueError("LinkStats.mean_y_per_pr must be non-empty and positive")
        if not self.mean_z_per_pt or any(v <= 0 for v in self.mean_z_per_pt):
            raise ValueError("LinkStats.mean_z_per_pt must be non-empty and positive")
        if self.iid_y and len(set(self.mean_y_per_pr)) > 1:
            raise ValueError("iid_y is set but mean_y_per_pr entries differ")
        if self.iid_z and len(set(self.mean_z_per_pt)) > 1:
            raise ValueError("iid_z is set but mean_z_per_pt entries differ")

    @classmethod
    def from_geometry(cls, geom):
        """Derive all means from distances via path loss; the iid flags are
        inferred from exact distance equality."""
        mean_x = pathloss_gain(geom.d_st_sr, geom.d_ref, geom.alpha)
        ys = tuple(pathloss_gain(d, geom.d_ref, geom.alpha) for d in geom.d_st_pr)
        zs = tuple(pathloss_gain(d, geom.d_ref, geom.alpha) for d in geom.d_pt_sr)
        return cls(
            mean_x=mean_x,
            mean_y_per_pr=ys,
            mean_z_per_pt=zs,
            iid_y=len(set(ys)) == 1,
            iid_z=len(set(zs)) == 1,
        )

    @classmethod
    def from_means(cls, mean_x, mean_y_per_pr, mean_z_per_pt, iid_y=None, iid_z=None):
        ys = tuple(float(v) for v in mean_y_per_pr)
        zs = tuple(float(v) for v in mean_z_per_pt)
        if iid_y is None:
            iid_y = len(set(ys)) == 1
        if iid_z is None:
            iid_z = len(set(zs)) == 1
        return cls(mean_x=float(mean_x), mean_y_per_pr=ys, mean_z_per_pt=zs,
                   iid_y=iid_y, iid_z=iid_z)

    @cached_property
    def mean_y(self):
        """E[strongest interfering gain seen by any primary receiver]."""
        return effective_mean_y(self)

    @cached_property
    def mean_z(self):
        """E[aggregate interfering gain at the secondary receiver]."""
        if self.iid_z:
            return len(self.mean_z_per_pt) * self.mean_z_per_pt[0]
        return mean_sum_inid(list(self.mean_z_per_pt))

    @property
    def l_r(self):
        return len(self.mean_y_per_pr)

    @property
    def l_t(self):
        return len(self.mean_z_per_pt)


def effective_mean_y(stats):
    """Mean of the maximum interfering gain over all primary receivers."""
    if stats.iid_y:
        return mean_max_iid(stats.mean_y_per_pr[0], len(stats.mean_y_per_pr))
    return mean_max_inid(list(stats.mean_y_per_pr))
