"""Counter-based random streams for reproducible, order-independent sampling.

Every random draw in a run is addressed by ``(seed, context, counter words)``:
the seed and a context label select a Philox key, and the counter words
(typically ``(term_index, shot_index)``) select a block of the keyed stream.
Identical addresses always produce identical draws, so results do not depend
on how shots are distributed over workers.
"""

from __future__ import annotations

import numpy as np

__all__ = ["ShotRng"]


class ShotRng:
    """Keyed Philox stream factory.

    ``generator(*words)`` returns a ``numpy.random.Generator`` positioned at
    the counter block given by up to three 64-bit words. Reusing the same
    words yields a bit-identical stream, equivalent to constructing
    ``Philox(key=..., counter=[w0, w1, w2, 0])`` from scratch (the single
    Philox instance is reseated in place to avoid per-shot allocation).
    """

    def __init__(self, seed: int, context: int = 0):
        if seed < 0:
            raise ValueError(f"seed must be non-negative, got {seed}")
        self.seed = int(seed)
        self.context = int(context)
        key = np.random.SeedSequence([self.seed, self.context]).generate_state(2, np.uint64)
        self._bitgen = np.random.Philox(key=0)
        state = self._bitgen.state
        state["state"]["key"][:] = key
        self._bitgen.state = state
        self._key = key
        self._generator = np.random.Generator(self._bitgen)

    def generator(self, *words: int) -> np.random.Generator:
        if len(words) > 3:
            raise ValueError("at most 3 counter words are supported")
        state = self._bitgen.state
        counter = state["state"]["counter"]
        counter[:] = 0
        for i, w in enumerate(words):
            if w < 0:
                raise ValueError(f"counter words must be non-negative, got {w}")
            counter[i] = w
        # discard buffered output and the cached 32-bit half from the old position
        state["buffer_pos"] = 4
        state["has_uint32"] = 0
        state["uinteger"] = 0
        self._bitgen.state = state
        return self._generator

    def spawn(self, context: int) -> "ShotRng":
        """Independent stream family under the same seed."""
        return ShotRng(self.seed, context)
