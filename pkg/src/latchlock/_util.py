"""Small shared helpers: seeded RNG streams and JSON output conventions."""

from __future__ import annotations

import hashlib
import json
import random


def rng_stream(seed: int, name: str) -> random.Random:
    """Return a PRNG for one named pass, derived from the single run seed.

    Every source of randomness in the package goes through here so that a run
    is reproducible from (inputs, seed) alone and passes cannot perturb each
    other by consuming different amounts of randomness.
    """
    digest = hashlib.sha256(f"{seed & 0xFFFFFFFFFFFFFFFF}:{name}".encode()).digest()
    return random.Random(int.from_bytes(digest[:8], "big"))


def dump_json(obj, path=None) -> str:
    """Serialize deterministically (sorted keys, fixed separators)."""
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text
