"""Dissipative spin-network quantum reservoir computing.

Simulators for two reservoir maps on a transverse-field Ising network (the
erase-and-write map and a continuously dissipating, input-driven map),
benchmark temporal tasks with linear readout training, and numerical
verification of the echo-state, fading-memory, separability and mixing-time
preconditions.
"""

from .dynamics import (
    CDParams,
    FnApproxParams,
    FnParams,
    SpinNetworkParams,
    build_driven_hamiltonian,
    build_ising_hamiltonian,
    build_liouvillian,
    fn_approx_step,
    fn_step,
    gkls_rhs,
    hs_distance,
    propagate_cd,
)
from .engine import (
    MultiplexConfig,
    SamplingConfig,
    SegmentLengths,
    apply_sampling_noise,
    expectation,
    pauli_observables,
    run_reservoir,
    segment,
)
from .readout import LinearReadout, capacity, mse
from .reservoir import CDReservoir, FNReservoir
from .tasks import (
    MGConfig,
    TaskSpec,
    autonomous_rollout,
    gen_binary_inputs,
    gen_uniform_inputs,
    mackey_glass_series,
    narma_targets,
    one_step_targets,
    parity_targets,
    stm_targets,
)

__version__ = "0.1.0"

__all__ = [
    "CDParams",
    "CDReservoir",
    "FNReservoir",
    "FnApproxParams",
    "FnParams",
    "LinearReadout",
    "MGConfig",
    "MultiplexConfig",
    "SamplingConfig",
    "SegmentLengths",
    "SpinNetworkParams",
    "TaskSpec",
    "apply_sampling_noise",
    "autonomous_rollout",
    "build_driven_hamiltonian",
    "build_ising_hamiltonian",
    "build_liouvillian",
    "capacity",
    "expectation",
    "fn_approx_step",
    "fn_step",
    "gen_binary_inputs",
    "gen_uniform_inputs",
    "gkls_rhs",
    "hs_distance",
    "mackey_glass_series",
    "mse",
    "narma_targets",
    "one_step_targets",
    "parity_targets",
    "pauli_observables",
    "propagate_cd",
    "run_reservoir",
    "segment",
    "stm_targets",
]
