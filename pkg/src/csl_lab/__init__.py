"""csl-lab: a desk-scale numerical laboratory for continuous spontaneous
localization (CSL) collapse dynamics.

Sample noise under the collapse probability rule, evolve state vectors
under the non-unitary modified Schrodinger equation, cross-check collapse
statistics against the Lindblad master equation, and reproduce the
vacuum-drive and energy-gain signatures of the theory.
"""

from .cosmogenesis import (
    CosmoParams,
    coherent_solution,
    mean_n_csl,
    mean_n_numerical,
    mean_n_schrodinger,
    moment_ode_oracle,
)
from .csl_dynamics import (
    CslModel,
    EnsembleSummary,
    TrajectoryRecord,
    evolve_linear_step,
    run_ensemble,
    sample_trajectory,
    trajectory_probability,
)
from .energy_ledger import EnergyLedger, initial_ledger, track_ledger, update_ledger
from .experiments import ExperimentConfig, run_experiment
from .hilbert import (
    DensityMatrix,
    HermitianOperator,
    JointEigenbasis,
    QuantumState,
    eigendecompose,
    expectation,
    joint_eigenbasis,
)
from .lattice_csl import (
    LatticeConfig,
    energy_gain_rate,
    numerical_energy_gain,
    smeared_mass_density,
)
from .master_eq import LindbladModel, analytic_offdiag, integrate_master, lindblad_rhs
from .noise import (
    NoiseTrajectory,
    SeededRng,
    raw_measure_log_weight,
    sample_physical_noise_step,
    time_average,
)

__version__ = "0.1.0"
