"""Reproducible random-number streams.

A stream is addressed by (seed, stream_id); identical addresses replay
identical draws bit for bit, and distinct stream_ids are statistically
independent.  Chains consume two streams each -- one for site selection
and one for every posterior draw -- so that kernels which differ only in
which sites they touch stay aligned on the draw stream.  Stream-id layout:

    2 * chain_index      posterior draws (z, lambda, beta, Gibbs uniforms)
    2 * chain_index + 1  site selection (which k / which subset)
    SWAP_STREAM          tempering swap decisions
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SWAP_STREAM = 1 << 48


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=(int(self.seed), int(self.stream_id)))
        return np.random.Generator(np.random.PCG64(ss))


def chain_streams(seed: int, chain_index: int = 0) -> tuple[np.random.Generator, np.random.Generator]:
    """(draw_rng, select_rng) for one chain."""
    draw = RngStream(seed, 2 * chain_index).generator()
    select = RngStream(seed, 2 * chain_index + 1).generator()
    return draw, select


def swap_stream(seed: int) -> np.random.Generator:
    return RngStream(seed, SWAP_STREAM).generator()
