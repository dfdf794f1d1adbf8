"""Systematic random linear code over GF(2^8): encoding and on-line decoding.

A generation holds k equal-length payloads. Systematic packets carry one
payload unchanged; coded packets carry a random linear combination with the
k coefficients attached. The decoder runs incremental Gaussian elimination so
every ingest reports whether the packet was innovative, and tracks which
packets arrived in systematic form for pre-decode in-order delivery.

Wire format (big-endian), used for traces and documented byte-exactly:

    offset  size  field
    0       4     generation_id (u32)
    4       1     kind: 0x00 systematic, 0x01 coded
    5       2     systematic only: packet index within the generation (u16)
    5       k     coded only: coefficient bytes c[0..k-1]
    ...     L     payload

Payload length L is fixed per generation and implied by the framing.
"""

import struct
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .gf256 import MUL, INV, gf_dot_rows

KIND_SYSTEMATIC = 0x00
KIND_CODED = 0x01


@dataclass
class CodedPacket:
    generation_id: int
    sys_index: Optional[int]          # set for systematic packets
    coeffs: Optional[np.ndarray]      # set for coded packets, k bytes
    payload: np.ndarray               # uint8 vector

    @property
    def is_systematic(self):
        return self.sys_index is not None


def _as_matrix(payloads):
    mat = np.asarray(payloads, dtype=np.uint8)
    if mat.ndim != 2:
        raise ValueError("generation payloads must form a (k, L) byte matrix")
    return mat


def systematic_packet(generation_id, payloads, i):
    mat = _as_matrix(payloads)
    return CodedPacket(generation_id=generation_id, sys_index=int(i),
                       coeffs=None, payload=mat[i].copy())


def encode(generation_id, payloads, m, rng):
    """Produce the m-th coded packet of a generation.

    Coefficients are uniform over GF(2^8)^k, redrawn in the (2^-8k) event that
    every byte is zero so a coded packet always carries information. m is the
    coded-packet sequence index within the generation; it does not influence
    the combination, which is determined by the RNG stream.
    """
    mat = _as_matrix(payloads)
    k = mat.shape[0]
    while True:
        coeffs = rng.integers(0, 256, size=k, dtype=np.uint8)
        if coeffs.any():
            break
    return CodedPacket(generation_id=generation_id, sys_index=None,
                       coeffs=coeffs, payload=gf_dot_rows(coeffs, mat))


def pack_packet(pkt, k):
    """Serialize a packet to the wire format."""
    head = struct.pack(">IB", pkt.generation_id,
                       KIND_SYSTEMATIC if pkt.is_systematic else KIND_CODED)
    if pkt.is_systematic:
        body = struct.pack(">H", pkt.sys_index)
    else:
        if len(pkt.coeffs) != k:
            raise ValueError(f"expected {k} coefficients, got {len(pkt.coeffs)}")
        body = pkt.coeffs.tobytes()
    return head + body + pkt.payload.tobytes()


def unpack_packet(blob, k):
    """Parse the wire format back into a CodedPacket."""
    gen_id, kind = struct.unpack_from(">IB", blob, 0)
    if kind == KIND_SYSTEMATIC:
        (idx,) = struct.unpack_from(">H", blob, 5)
        payload = np.frombuffer(blob, dtype=np.uint8, offset=7).copy()
        return CodedPacket(gen_id, idx, None, payload)
    if kind != KIND_CODED:
        raise ValueError(f"unknown packet kind {kind:#x}")
    coeffs = np.frombuffer(blob, dtype=np.uint8, offset=5, count=k).copy()
    payload = np.frombuffer(blob, dtype=np.uint8, offset=5 + k).copy()
    return CodedPacket(gen_id, None, coeffs, payload)


class DecoderState:
    """Incremental Gaussian elimination for one generation.

    Systematic arrivals are stored directly (no unit coefficient row, O(L)
    ingest); coded rows live in an echelon list and are reduced against
    current knowledge when they arrive. rank reaching k makes the generation
    decodable.
    """

    def __init__(self, generation_id, k, payload_len):
        self.generation_id = generation_id
        self.k = k
        self.payload_len = payload_len
        self.sys = {}                 # index -> payload, stored systematic values
        self.rows = []                # (coeffs, payload) echelon rows, pivot normalized to 1
        self.pivots = []              # pivot column of each row, insertion order
        self.seen_systematic = set()  # indices that arrived in systematic form
        self._decoded = None

    @property
    def rank(self):
        return len(self.sys) + len(self.rows)

    def _reduce(self, coeffs, payload):
        # Eliminate against echelon rows first (insertion order reaches a
        # fixpoint in one sweep), then against stored systematic values whose
        # columns no row can reintroduce.
        for (rc, rp), piv in zip(self.rows, self.pivots):
            c = coeffs[piv]
            if c:
                coeffs ^= MUL[c][rc]
                payload = payload ^ MUL[c][rp]
        for idx, val in self.sys.items():
            c = coeffs[idx]
            if c:
                coeffs[idx] = 0
                payload = payload ^ MUL[c][val]
        return coeffs, payload

    def ingest(self, pkt):
        """Feed one packet in; returns True when it increased the rank."""
        if pkt.generation_id != self.generation_id:
            raise ValueError(
                f"packet belongs to generation {pkt.generation_id}, "
                f"decoder handles {self.generation_id}")
        if self.rank >= self.k:
            if pkt.is_systematic:
                self.seen_systematic.add(pkt.sys_index)
            return False
        if pkt.is_systematic:
            i = pkt.sys_index
            self.seen_systematic.add(i)
            if i in self.sys:
                return False
            if i not in self.pivots:
                self.sys[i] = pkt.payload.astype(np.uint8, copy=True)
                self._decoded = None
                return True
            coeffs = np.zeros(self.k, dtype=np.uint8)
            coeffs[i] = 1
            payload = pkt.payload.astype(np.uint8, copy=True)
        else:
            coeffs = pkt.coeffs.astype(np.uint8, copy=True)
            payload = pkt.payload.astype(np.uint8, copy=True)
        coeffs, payload = self._reduce(coeffs, payload)
        if not coeffs.any():
            return False
        piv = int(np.flatnonzero(coeffs)[0])
        inv = INV[coeffs[piv]]
        self.rows.append((MUL[inv][coeffs], MUL[inv][payload]))
        self.pivots.append(piv)
        self._decoded = None
        return True

    def deliverable_prefix(self):
        """Packets deliverable before decoding: the systematic run 1..s, or k once decodable."""
        if self.rank >= self.k:
            return self.k
        s = 0
        while s in self.seen_systematic:
            s += 1
        return s

    def decode(self):
        """Recover all k payloads; requires rank == k."""
        if self.rank < self.k:
            raise ValueError(f"rank {self.rank} of {self.k}, not yet decodable")
        if self._decoded is not None:
            return self._decoded
        k, L = self.k, self.payload_len
        aug = np.zeros((k, k + L), dtype=np.uint8)
        r = 0
        for idx, val in self.sys.items():
            aug[r, idx] = 1
            aug[r, k:] = val
            r += 1
        for rc, rp in self.rows:
            aug[r, :k] = rc
            aug[r, k:] = rp
            r += 1
        # full reduction to the identity
        for col in range(k):
            piv_rows = np.flatnonzero(aug[col:, col]) + col
            if len(piv_rows) == 0:
                raise AssertionError("rank bookkeeping disagrees with the matrix")
            p = piv_rows[0]
            if p != col:
                aug[[col, p]] = aug[[p, col]]
            inv = INV[aug[col, col]]
            aug[col] = MUL[inv][aug[col]]
            for rr in range(k):
                if rr != col and aug[rr, col]:
                    aug[rr] ^= MUL[aug[rr, col]][aug[col]]
        self._decoded = aug[:, k:].copy()
        return self._decoded
