"""Closed-form solution and numerical verification toolkit for the
infinite-horizon investment-consumption problem."""

from ._core import (
    AgentParams,
    BankruptcyValue,
    ClosedFormSolution,
    ConstantPolicy,
    F,
    IllPosedError,
    L,
    MarketParams,
    SimConfig,
    WellPosedness,
    classify,
    constant_policy_value,
    counterexample,
    davis_norman_residual,
    eta,
    hjb_residual,
    impatience_rate,
    klss_nu,
    klss_solution,
    klss_value,
    maximize_L,
    mc_perturbed_value,
    mc_value,
    merton_solution,
    numeraire_shift,
    perturbed_value,
    sharpe_ratio,
    transversality_probe,
)

__all__ = [
    "AgentParams",
    "BankruptcyValue",
    "ClosedFormSolution",
    "ConstantPolicy",
    "F",
    "IllPosedError",
    "L",
    "MarketParams",
    "SimConfig",
    "WellPosedness",
    "classify",
    "constant_policy_value",
    "counterexample",
    "davis_norman_residual",
    "eta",
    "hjb_residual",
    "impatience_rate",
    "klss_nu",
    "klss_solution",
    "klss_value",
    "maximize_L",
    "mc_perturbed_value",
    "mc_value",
    "merton_solution",
    "numeraire_shift",
    "perturbed_value",
    "sharpe_ratio",
    "transversality_probe",
]
