"""Label-derived random substreams.

Every (owner, purpose) pair gets its own generator spawned from the master
seed, so adding an interferer on channel B never shifts the draws of channel A.
"""

import hashlib

import numpy as np


def label_key(label: str) -> int:
    """Stable 32-bit key for a substream label (independent of PYTHONHASHSEED)."""
    return int.from_bytes(hashlib.blake2b(label.encode("utf-8"), digest_size=4).digest(), "big")


def substream(seed: int, *labels: str) -> np.random.Generator:
    sequence = np.random.SeedSequence(
        entropy=seed, spawn_key=tuple(label_key(label) for label in labels)
    )
    return np.random.default_rng(sequence)


def interferer_labels(interferers: list) -> list[str]:
    """Substream label per interferer, derived from its content rather than its position.

    Identical interferers are told apart by their occurrence count.
    """
    labels = []
    seen: dict[str, int] = {}
    for interferer in interferers:
        if interferer.name:
            base = f"name:{interferer.name}"
        else:
            digest = hashlib.blake2b(
                interferer.model_dump_json().encode("utf-8"), digest_size=8
            ).hexdigest()
            base = f"content:{digest}"
        occurrence = seen.get(base, 0)
        seen[base] = occurrence + 1
        labels.append(f"{base}#{occurrence}")
    return labels
