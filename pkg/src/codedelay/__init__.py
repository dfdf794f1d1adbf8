"""Closed-form in-order delay and throughput efficiency of systematic coded
transport with per-generation feedback, with Monte-Carlo cross-validation.

The analytic side rests on an absorbing Markov chain over the degrees of
freedom a receiver still needs, closed-form moments for the prefix and
straggler statistics, and a four-case decomposition of the conditional delay.
The simulation side implements the same system as a time-slotted Monte-Carlo
in two fidelities plus an idealized SR-ARQ baseline, sharing one channel
parameterization.
"""

from .codec import (CodedPacket, DecoderState, encode, pack_packet,
                    systematic_packet, unpack_packet)
from .delay import (DelayMoments, conditional_mean, conditional_second_moment,
                    expected_delay)
from .efficiency import EfficiencyResult, efficiency, expected_received, \
    received_on_transition
from .gf256 import gf_axpy, gf_dot_rows, gf_inv, gf_mul, gf_scale
from .kernel import (MAX_K, NumericalError, TransitionKernel, build_kernel)
from .moments import (PrefixMoments, StragglerMoments, prefix_mgf,
                      prefix_moments, prefix_pmf, straggler_moments,
                      straggler_pmf)
from .optimizer import (SweepRecord, TradeoffPoint, default_k_range, k_star,
                        smooth_local_maxima, sweep, tradeoff_curve)
from .params import (AssumptionWarning, ChannelParams, CodingParams,
                     coded_count_distribution, derive_channel, derive_coding,
                     redundancy_from_margin)
from .simulator import (PacketRecord, SimConfig, SimStats, replicate, run_arq,
                        run_coded, trace_csv)

__version__ = "0.1.0"

__all__ = [
    "AssumptionWarning", "ChannelParams", "CodingParams", "CodedPacket",
    "DecoderState", "DelayMoments", "EfficiencyResult", "MAX_K",
    "NumericalError", "PacketRecord", "PrefixMoments", "SimConfig", "SimStats",
    "StragglerMoments", "SweepRecord", "TradeoffPoint", "TransitionKernel",
    "build_kernel", "coded_count_distribution", "conditional_mean",
    "conditional_second_moment", "default_k_range", "derive_channel",
    "derive_coding", "efficiency", "encode", "expected_delay",
    "expected_received", "gf_axpy", "gf_dot_rows", "gf_inv", "gf_mul",
    "gf_scale", "k_star", "pack_packet", "prefix_mgf", "prefix_moments",
    "prefix_pmf", "received_on_transition", "redundancy_from_margin",
    "replicate", "run_arq", "run_coded", "smooth_local_maxima",
    "straggler_moments", "straggler_pmf", "sweep", "systematic_packet",
    "trace_csv", "tradeoff_curve", "unpack_packet",
]
