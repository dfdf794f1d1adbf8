"""Scenario parameters and the derived-quantity arithmetic shared by every module."""

import math
import warnings
from dataclasses import dataclass

# Snap tolerance for quantities that are analytically integral but carry float
# fuzz (e.g. 0.1 * 1e7 / 1e4 evaluates to 100.00000000000001).
_INT_SNAP = 1e-9


class AssumptionWarning(UserWarning):
    """A configuration violates an operating assumption; results may be loose."""


def _ceil_snapped(x):
    r = round(x)
    if abs(x - r) < _INT_SNAP:
        return int(r)
    return int(math.ceil(x))


@dataclass(frozen=True)
class ChannelParams:
    """Erasure channel and link timing.

    epsilon is the i.i.d. packet erasure probability, rate the link speed in
    bits per second, packet_size the packet length in bits. t_s is the slot
    (transmission) time, t_p the one-way propagation delay. rtt = t_s + 2*t_p
    assumes acknowledgements are negligibly small. bdp is the bandwidth-delay
    product in packets.
    """

    epsilon: float
    rate: float
    packet_size: float
    t_p: float
    t_s: float
    rtt: float
    bdp: int


def derive_channel(epsilon, rate, packet_size, t_p=None, rtt=None):
    """Build ChannelParams from primary quantities.

    Exactly one of t_p and rtt must be given; the other is derived via
    rtt = t_s + 2*t_p.
    """
    if not (0.0 <= epsilon < 1.0):
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
    if rate <= 0:
        raise ValueError(f"rate must be positive, got {rate}")
    if packet_size <= 0:
        raise ValueError(f"packet_size must be positive, got {packet_size}")
    t_s = packet_size / rate
    if (t_p is None) == (rtt is None):
        raise ValueError("give exactly one of t_p and rtt")
    if t_p is None:
        t_p = (rtt - t_s) / 2.0
        if t_p < -_INT_SNAP * t_s:
            raise ValueError(f"rtt {rtt} is shorter than one slot time {t_s}")
        t_p = max(t_p, 0.0)
    if t_p < 0:
        raise ValueError(f"t_p must be nonnegative, got {t_p}")
    rtt = t_s + 2.0 * t_p
    bdp = max(_ceil_snapped(rtt * rate / packet_size), 1)
    return ChannelParams(epsilon=float(epsilon), rate=float(rate),
                         packet_size=float(packet_size), t_p=float(t_p),
                         t_s=t_s, rtt=rtt, bdp=bdp)


def redundancy_from_margin(x, epsilon):
    """Redundancy factor giving a fractional capacity margin x above the loss rate."""
    if x < 0:
        raise ValueError(f"margin must be nonnegative, got {x}")
    if not (0.0 <= epsilon < 1.0):
        raise ValueError(f"epsilon must be in [0, 1), got {epsilon}")
    return (1.0 + x) / (1.0 - epsilon)


def coded_count_distribution(R, i):
    """Distribution of the per-round transmit count for a state needing i dofs.

    R*i packets are sent on average; the fractional part is realized by
    randomizing between floor(R*i) and ceil(R*i). Returns a dict mapping count
    to probability (a single point mass when R*i is integral).
    """
    if R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    if i < 1:
        raise ValueError(f"i must be >= 1, got {i}")
    ri = R * i
    r = round(ri)
    if abs(ri - r) < _INT_SNAP:
        return {int(r): 1.0}
    lo = int(math.floor(ri))
    frac = ri - lo
    return {lo: 1.0 - frac, lo + 1: frac}


@dataclass(frozen=True)
class CodingParams:
    """Generation size, redundancy and the derived in-flight generation count.

    n_k_low/n_k_high bracket the randomized first-round transmit count, frac is
    the probability of the high value. b is the number of generations
    concurrently in flight within one bandwidth-delay product; b_definition
    selects whether the divisor is the real-valued R*k (default) or k alone.
    within_bdp is False when R*k >= bdp, i.e. when feedback would arrive before
    the first round even finishes; the analysis still runs but is flagged.
    """

    k: int
    R: float
    n_k_low: int
    n_k_high: int
    frac: float
    b: int
    b_definition: str
    within_bdp: bool


def derive_coding(channel, k, R=None, margin=None, b_definition="n_k"):
    """Build CodingParams for a channel.

    Give either the redundancy factor R directly or a capacity margin
    (R = (1+margin)/(1-epsilon)).
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if (R is None) == (margin is None):
        raise ValueError("give exactly one of R and margin")
    if R is None:
        R = redundancy_from_margin(margin, channel.epsilon)
    if R < 1:
        raise ValueError(f"R must be >= 1, got {R}")
    if b_definition not in ("n_k", "k"):
        raise ValueError(f"b_definition must be 'n_k' or 'k', got {b_definition!r}")
    dist = coded_count_distribution(R, k)
    counts = sorted(dist)
    if len(counts) == 1:
        n_lo = n_hi = counts[0]
        frac = 0.0
    else:
        n_lo, n_hi = counts
        frac = dist[n_hi]
    divisor = R * k if b_definition == "n_k" else float(k)
    b = max(_ceil_snapped(channel.bdp / divisor), 1)
    within = R * k < channel.bdp
    if not within:
        warnings.warn(
            f"R*k = {R * k:.3f} is not smaller than the BDP ({channel.bdp}); "
            "feedback arrives before the first round completes and the delay "
            "model is loose here", AssumptionWarning, stacklevel=2)
    return CodingParams(k=int(k), R=float(R), n_k_low=n_lo, n_k_high=n_hi,
                        frac=frac, b=b, b_definition=b_definition,
                        within_bdp=within)
