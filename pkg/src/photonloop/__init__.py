"""photonloop: simulation of a cavity-looped heralded photon-addition source.

Subpackages cover the two-mode Fock algebra (states), per-pass physical
channels (channels), the cavity-loop protocol engine (engine), an exact
count-level Markov solver (exact), the deterministic Monte Carlo sampler
(sampler), policy/ordering/sweep analysis (analysis), and a batch CLI (cli).
"""

from .states import (
    CapacityError,
    CreationSpec,
    JonesUnitary,
    PolarizationCoefficients,
    PolarizedFockState,
    UndefinedFidelityError,
    apply_annihilation,
    apply_creation,
    apply_rotation,
    build_product_state,
    circular_basis,
    fidelity,
    mm_target,
    noon_spec,
    noon_state,
    number_distribution,
    overlap,
    vacuum,
)

__version__ = "0.1.0"
