"""Event-driven simulator, exact small-N oracle, and statistical
harness for finite networks of spiking neurons with leakage.

Two leak mechanisms are supported (reset to zero, decrement by one).
The simulator is exact (Gillespie-style next-event), with a compiled
kernel and a pure-Python fallback that produce bit-identical
trajectories from the same seed.
"""

from .core import (
    LEAK_KINDS,
    ModelSpec,
    PotentialList,
    RankOrder,
    SetFlags,
    SpikeWeights,
    apply_leak,
    apply_spike,
    classify,
    effective_leak_count,
    ladder,
    rank_order,
    spike_weights,
)

__version__ = "0.1.0"

__all__ = [
    "LEAK_KINDS",
    "ModelSpec",
    "PotentialList",
    "RankOrder",
    "SetFlags",
    "SpikeWeights",
    "apply_leak",
    "apply_spike",
    "classify",
    "effective_leak_count",
    "ladder",
    "rank_order",
    "spike_weights",
    "__version__",
]
