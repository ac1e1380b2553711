"""Guaranteed-cost control of uncertain linear quantum stochastic models.

Synthesis builds a classical output-feedback controller together with a
certified upper bound on the closed-loop quadratic cost, valid for every
norm-bounded uncertainty; verification independently re-derives closed
loop costs from moment propagation and Monte Carlo simulation and checks
them against the bound.
"""

from .errors import (Blowup, DimensionMismatch, InfeasibleSynthesis,
                     InputError, InvalidSpec, NoFeasibleTau, NonRealResult,
                     NotHurwitz, NotPositive, NotPSD, NoStabilizingSolution,
                     NumericError, ParseError, QgccError, SingularCoupling,
                     SingularSystem, StructureMismatch, UnknownKey,
                     VerificationFailure)
from .model import (ClosedLoop, Controller, CostWeights, Uncertainty,
                    UncertainSystem, assemble_closed_loop, noise_covariance,
                    sample_uncertainty)
from .hamiltonian import (HamiltonianModel, HamiltonianUncertainty,
                          build_gamma, convention_scale, default_theta,
                          hamiltonian_perturbation, permutation,
                          realize_state_space, realize_uncertain, stack_delta)
from .numerics import (OdeTrajectory, integrate_matrix_ode, newton_riccati,
                       solve_are, solve_lyapunov, spectral_radius)
from .synthesis import (AssumptionVerdict, GainSchedule, RiccatiPair,
                        SynthesisReport, TauNotation, TauSample,
                        build_controller, build_gain_schedule,
                        check_assumption1, check_coupling, cost_bound,
                        evaluate_tau, minimize_tau, pick_mode,
                        solve_control_riccati, solve_filter_riccati,
                        synthesize)
from .verify import (MomentTrajectory, SampleRecord, VerificationReport,
                     cost_from_moments, monte_carlo_cost, propagate_moments,
                     sweep_bound)
from .modelfile import (CavitySpec, ModelFile, cavity_uncertainty, load_model,
                        load_model_file, make_cavity, realize_model,
                        save_model)

__version__ = "0.1.0"

__all__ = [
    "AssumptionVerdict", "Blowup", "CavitySpec", "ClosedLoop", "Controller",
    "CostWeights", "DimensionMismatch", "GainSchedule", "HamiltonianModel",
    "HamiltonianUncertainty", "InfeasibleSynthesis", "InputError",
    "InvalidSpec", "ModelFile", "MomentTrajectory", "NoFeasibleTau",
    "NonRealResult", "NoStabilizingSolution", "NotHurwitz", "NotPSD",
    "NotPositive", "NumericError", "OdeTrajectory", "ParseError",
    "QgccError", "RiccatiPair", "SampleRecord", "SingularCoupling",
    "SingularSystem", "StructureMismatch", "SynthesisReport", "TauNotation",
    "TauSample", "Uncertainty", "UncertainSystem", "UnknownKey",
    "VerificationFailure", "VerificationReport", "assemble_closed_loop",
    "build_controller", "build_gain_schedule", "build_gamma",
    "cavity_uncertainty", "check_assumption1", "check_coupling",
    "convention_scale", "cost_bound", "cost_from_moments", "default_theta",
    "evaluate_tau", "hamiltonian_perturbation", "integrate_matrix_ode",
    "load_model", "load_model_file", "make_cavity", "minimize_tau",
    "monte_carlo_cost", "newton_riccati", "noise_covariance", "permutation",
    "pick_mode", "propagate_moments", "realize_model", "realize_state_space",
    "realize_uncertain", "sample_uncertainty", "save_model", "solve_are",
    "solve_control_riccati", "solve_filter_riccati", "solve_lyapunov",
    "spectral_radius", "stack_delta", "sweep_bound", "synthesize",
]
