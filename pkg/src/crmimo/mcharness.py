"""Monte-Carlo ground truth for the closed forms.

Samples full channel matrices, applies zero-forcing detection through the
pseudo-inverse, and measures outage, rate and leakage empirically.  Trials
are grouped into fixed-size blocks, each driven by a counter-based Philox
generator keyed by (seed, stream id, block index), so estimates are
bit-identical for a given seed regardless of how many worker threads
process the blocks.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import ks_2samp

from .powalloc import optimal_power

log = logging.getLogger(__name__)

BLOCK_TRIALS = 1024

# sub-stream ids keep draws of different estimators disjoint under one seed
STREAM_OUTAGE = 1
STREAM_RATE = 2
STREAM_LEAKAGE = 3
STREAM_KS_ZF = 4
STREAM_KS_GAIN_REF = 5
STREAM_KS_INT_REF = 6
STREAM_ANTENNA = 7
STREAM_GAINS = 8

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class McEstimate:
    value: float
    std_error: float
    trials: int
    seed: int


@dataclass(frozen=True)
class ChannelDraw:
    """One realization: desired channel h (n x m), interfering channel h_p
    (n x l_t), and per-receiver interfering gains y (l_r x m)."""

    h: np.ndarray
    h_p: np.ndarray
    y: np.ndarray


def block_generator(seed, stream, block, retry=0):
    """Philox generator keyed by (seed, stream, retry, block); disjoint
    streams for any distinct key tuple."""
    key = ((int(seed) & _MASK64) << 64) | ((stream & 0xFF) << 56) \
        | ((retry & 0xF) << 52) | (block & ((1 << 52) - 1))
    return np.random.Generator(np.random.Philox(key=key))


def block_sizes(trials):
    sizes = [BLOCK_TRIALS] * (trials // BLOCK_TRIALS)
    if trials % BLOCK_TRIALS:
        sizes.append(trials % BLOCK_TRIALS)
    return sizes


def run_blocks(trials, worker, threads=1):
    """Evaluate worker(block_index, size) for every block and return the
    results in block order; the reduction order never depends on threads."""
    sizes = block_sizes(trials)
    if threads <= 1:
        return [worker(b, s) for b, s in enumerate(sizes)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(worker, range(len(sizes)), sizes))


def _estimate(per_trial, trials, seed):
    values = np.concatenate(per_trial)
    se = float(np.std(values, ddof=1) / math.sqrt(trials)) if trials > 1 else 0.0
    return McEstimate(value=float(np.mean(values)), std_error=se,
                      trials=trials, seed=seed)


# ---------------------------------------------------------------------------
# channel sampling
# ---------------------------------------------------------------------------

def _complex_gaussian(rng, shape, variance):
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * math.sqrt(variance / 2.0)


def sample_channel(config, stats, rng):
    """Draw one ChannelDraw matching the configured dimensions."""
    h = _complex_gaussian(rng, (config.n, config.m), stats.mean_x)
    h_p = np.empty((config.n, config.l_t), dtype=complex)
    for k, ez in enumerate(stats.mean_z_per_pt):
        h_p[:, k] = _complex_gaussian(rng, (config.n,), ez)
    y = np.empty((config.l_r, config.m))
    for j, ey in enumerate(stats.mean_y_per_pr):
        y[j, :] = rng.exponential(ey, size=config.m)
    return ChannelDraw(h=h, h_p=h_p, y=y)


def zf_sinr(draw, powers, config):
    """Per-stream SINR of the zero-forcing detector via the explicit
    pseudo-inverse of h diag(sqrt(p)):

        sinr_i = 1 / (p_p ||row_i(G+) h_p||^2 + n0 ||row_i(G+)||^2).
    """
    p = np.asarray(powers, dtype=float)
    if np.any(p <= 0):
        raise ValueError("zf_sinr requires strictly positive powers for included streams")
    g = draw.h * np.sqrt(p)[None, :]
    gp = np.linalg.pinv(g)
    row2 = np.sum(np.abs(gp) ** 2, axis=1)
    denom = config.n0 * row2
    if draw.h_p.shape[1] > 0:
        denom = denom + config.p_p * np.sum(np.abs(gp @ draw.h_p) ** 2, axis=1)
    return 1.0 / denom


def _stream_stats_block(config, stats, seed, stream, block, size):
    """Effective gains x_i = ||row_i(H+)||^-2 and interference ratios
    z_i = ||row_i(H+) h_p||^2 / ||row_i(H+)||^2 for one block, computed with
    unit powers (the power matrix scales out of both quantities).

    Rank-deficient draws (probability zero) are redrawn under a bumped key.
    """
    ezs = np.asarray(stats.mean_z_per_pt)
    for retry in range(4):
        rng = block_generator(seed, stream, block, retry)
        h = _complex_gaussian(rng, (size, config.n, config.m), stats.mean_x)
        hp = _complex_gaussian(rng, (size, config.n, config.l_t), 1.0)
        hp = hp * np.sqrt(ezs)[None, None, :]
        hh = np.conj(np.transpose(h, (0, 2, 1)))
        gram = hh @ h
        try:
            gram_inv = np.linalg.inv(gram)
        except np.linalg.LinAlgError:
            log.warning("rank-deficient channel block %d (retry %d); redrawing", block, retry)
            continue
        row_norm2 = np.einsum("bii->bi", gram_inv).real
        w = gram_inv @ (hh @ hp)
        cross2 = np.sum(np.abs(w) ** 2, axis=2)
        if np.all(np.isfinite(row_norm2)) and np.all(row_norm2 > 0):
            x_gain = 1.0 / row_norm2
            return x_gain, cross2 * x_gain
        log.warning("non-finite ZF statistics in block %d (retry %d); redrawing", block, retry)
    raise ArithmeticError(f"persistent rank deficiency in block {block}")


def sample_stream_gains(config, stats, trials, seed, threads=1):
    """Direct Erlang(n-m+1, E[X]) draws of the per-stream effective gain."""

    def worker(block, size):
        rng = block_generator(seed, STREAM_GAINS, block)
        return rng.gamma(config.diversity_order, stats.mean_x, size=size)

    return np.concatenate(run_blocks(trials, worker, threads))


# ---------------------------------------------------------------------------
# empirical estimators
# ---------------------------------------------------------------------------

def empirical_outage(config, stats, sol, trials, seed, threads=1):
    """Fraction of (trial, stream) pairs whose ZF-chain SINR falls below
    gamma_th; streams with zero allocated power count as outage."""

    def worker(block, size):
        x_gain, z = _stream_stats_block(config, stats, seed, STREAM_OUTAGE, block, size)
        p = optimal_power(x_gain, sol)
        sinr = p * x_gain / (config.p_p * z + config.n0)
        return np.mean(sinr < config.gamma_th, axis=1)

    return _estimate(run_blocks(trials, worker, threads), trials, seed)


def empirical_rate(config, stats, sol, trials, seed, threads=1):
    """Mean of log2(1 + SINR) over the full ZF chain."""

    def worker(block, size):
        x_gain, z = _stream_stats_block(config, stats, seed, STREAM_RATE, block, size)
        p = optimal_power(x_gain, sol)
        sinr = p * x_gain / (config.p_p * z + config.n0)
        return np.mean(np.log2(1.0 + sinr), axis=1)

    return _estimate(run_blocks(trials, worker, threads), trials, seed)


def empirical_leakage(powers, mean_y_per_pr, q, trials, seed, threads=1):
    """Frequency of min_j sum_i p_i |y_j^(i)|^2 > q over exponential draws
    of the interfering gains (the event that every primary receiver sees
    aggregate interference above q)."""
    p = np.asarray(powers, dtype=float)
    means = np.asarray(mean_y_per_pr, dtype=float)

    def worker(block, size):
        rng = block_generator(seed, STREAM_LEAKAGE, block)
        y = rng.exponential(1.0, size=(size, means.size, p.size)) * means[None, :, None]
        s = y @ p
        return (s > q).all(axis=1).astype(float)

    return _estimate(run_blocks(trials, worker, threads), trials, seed)


# ---------------------------------------------------------------------------
# distributional equivalence of the ZF statistics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DistributionCheck:
    """Two-sample KS comparison of the ZF-chain statistics against their
    reference laws: the effective gain against Erlang(n-m+1, E[X]) and the
    projected-interference ratio against the hypoexponential of the
    per-transmitter means."""

    gain_stat: float
    gain_pvalue: float
    interference_stat: float
    interference_pvalue: float
    trials: int


def zf_distribution_check(config, stats, trials, seed, threads=1):
    def worker(block, size):
        x_gain, z = _stream_stats_block(config, stats, seed, STREAM_KS_ZF, block, size)
        return x_gain[:, 0], z[:, 0]

    parts = run_blocks(trials, worker, threads)
    x0 = np.concatenate([p[0] for p in parts])
    z0 = np.concatenate([p[1] for p in parts])

    def gain_ref(block, size):
        rng = block_generator(seed, STREAM_KS_GAIN_REF, block)
        return rng.gamma(config.diversity_order, stats.mean_x, size=size)

    def int_ref(block, size):
        rng = block_generator(seed, STREAM_KS_INT_REF, block)
        draws = np.zeros(size)
        for ez in stats.mean_z_per_pt:
            draws += rng.exponential(ez, size=size)
        return draws

    x_ref = np.concatenate(run_blocks(trials, gain_ref, threads))
    z_ref = np.concatenate(run_blocks(trials, int_ref, threads))
    ks_x = ks_2samp(x0, x_ref)
    ks_z = ks_2samp(z0, z_ref)
    return DistributionCheck(
        gain_stat=float(ks_x.statistic),
        gain_pvalue=float(ks_x.pvalue),
        interference_stat=float(ks_z.statistic),
        interference_pvalue=float(ks_z.pvalue),
        trials=trials,
    )
