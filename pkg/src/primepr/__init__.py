"""Phase retrieval via majorization-minimization.

Four MM solvers for the intensity and amplitude least-squares formulations,
the Wirtinger Flow and Gerchberg-Saxton baselines, SQUAREM acceleration,
recovery metrics and a seeded Monte Carlo bench.
"""
from .errors import (
    BacktrackingDivergedError,
    DegenerateInitError,
    DegenerateMatrixError,
    InvalidArgumentError,
    PrimeError,
    SingularGramError,
)
from .metrics import aligned_squared_error, align_phase, autocorrelation, classify
from .problem import (
    MatrixKind,
    MeasurementEnsemble,
    Measurements,
    ProblemInstance,
    gen_dft_ensemble,
    gen_gaussian_ensemble,
    make_instance,
    objective_modulus,
    objective_squared,
    synthesize,
)
from .solvers import Algorithm, RunStatus, SolverConfig, SolverRun, config, solve

__version__ = "0.1.0"
