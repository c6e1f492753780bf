"""Sparse two-community block model: free energies, limit functionals and HJ solvers."""

from ._core import (
    AtomicMeasure,
    ModelParams,
    appendix_a_gap,
    assemble_f,
    c_infinity,
    characteristics_solve,
    choose_b,
    delta0_free_energy,
    free_energy_exact,
    free_energy_t0,
    g,
    gamma_map,
    hopf_lax,
    mi_asymptotic_constant,
    nishimori_suite,
    optimize_parisi,
    parisi,
    project_to_dyadic,
    psi,
    psi_exact,
    set_thread_count,
    shifted_matrix,
    solve_grid,
    wasserstein,
)

__all__ = [
    "AtomicMeasure",
    "ModelParams",
    "appendix_a_gap",
    "assemble_f",
    "c_infinity",
    "characteristics_solve",
    "choose_b",
    "delta0_free_energy",
    "free_energy_exact",
    "free_energy_t0",
    "g",
    "gamma_map",
    "hopf_lax",
    "mi_asymptotic_constant",
    "nishimori_suite",
    "optimize_parisi",
    "parisi",
    "project_to_dyadic",
    "psi",
    "psi_exact",
    "set_thread_count",
    "shifted_matrix",
    "solve_grid",
    "wasserstein",
]
