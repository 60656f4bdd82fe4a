"""Exact kernels, potentials and PCAF simulation for finite symmetric chains."""
from .chain import (
    Chain,
    KernelMatrix,
    build_chain,
    chain_from_rates,
    dirichlet_energy,
    heat_kernel,
    kill_transform,
    part_chain,
    resolvent_kernel,
)
from .errors import AssumptionNotVerified, RevuzLabError
from .measures import (
    MeasureVec,
    check_assumption_general,
    check_assumption_strong,
    check_conditions_A,
    check_conditions_B,
    dirac,
    measure,
    potential,
    potential_gap,
    uniform,
    zero_measure,
)
from .pathsim import (
    coupled_sup_diffs,
    mc_revuz_functional,
    pcaf_along,
    sample_path,
    sample_paths,
    sup_diff,
)
from .verify import VerifyReport

__version__ = "0.1.0"
