"""Closed-form oracles, qubit efficiency and the Monte Carlo trial runner."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from functools import reduce
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy import stats

from .config import ScenarioConfig, exact
from .protocol import RunReport, run_protocol, xor_bits
from .qubit import Basis

PROTOCOLS = ("SMQKA", "LiuMQKA")


@dataclass(frozen=True)
class EfficiencyFigure:
    protocol_label: str
    N: int
    k: Fraction
    value: Fraction


def qubit_efficiency(protocol_label: str, N: int, k) -> EfficiencyFigure:
    """Key bits per qubit: 1/((k+1)N) for SMQKA, 1/((k+1)N(N-1)) for Liu et al."""
    if N < 2:
        raise ValueError(f"N must be at least 2, got {N}")
    k = exact(k)
    if k < 0:
        raise ValueError(f"k must be non-negative, got {k}")
    denominator = (k + 1) * N
    if protocol_label == "LiuMQKA":
        denominator *= N - 1
    elif protocol_label != "SMQKA":
        raise ValueError(f"unknown protocol {protocol_label!r}; expected one of {PROTOCOLS}")
    return EfficiencyFigure(protocol_label, N, k, 1 / denominator)


# Pauli matrices; projector onto outcome m of basis B is (I + (-1)^m sigma_B) / 2.
_PAULI = {
    Basis.Z: np.array([[1, 0], [0, -1]], dtype=complex),
    Basis.X: np.array([[0, 1], [1, 0]], dtype=complex),
    Basis.Y: np.array([[0, -1j], [1j, 0]], dtype=complex),
}
_I2 = np.eye(2, dtype=complex)


def _projector(basis: Basis, outcome: int) -> np.ndarray:
    return (_I2 + (-1) ** outcome * _PAULI[basis]) / 2


def detection_probability_oracle(decoy_basis: Basis, tap_basis: Optional[Basis]) -> float:
    """Probability that one decoy fails the check after an intercept-resend tap.

    Non-selective tap measurement, then the legitimate check in the decoy's
    own basis; averaged over both decoy eigenstates.
    """
    decoy_basis = Basis(decoy_basis)
    total = 0.0
    for prepared in (0, 1):
        rho = _projector(decoy_basis, prepared)
        if tap_basis is not None:
            rho = sum(P @ rho @ P for P in (_projector(Basis(tap_basis), m) for m in (0, 1)))
        total += float(np.trace(rho @ _projector(decoy_basis, 1 - prepared)).real)
    return total / 2


def hop_detection_probability(kn: int, per_decoy: float) -> float:
    """Chance that at least one of ``kn`` independent decoys flags an error."""
    return 1 - (1 - per_decoy) ** kn


def xor_oracle(subkeys: Sequence[Sequence[int]]) -> tuple[int, ...]:
    if not subkeys:
        raise ValueError("need at least one sub-key")
    return reduce(xor_bits, (tuple(k) for k in subkeys))


def trial_rng(master_seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial: SeedSequence(master_seed, spawn_key=(trial,))."""
    return np.random.default_rng(np.random.SeedSequence(master_seed, spawn_key=(trial,)))


def expected_key(report: RunReport) -> tuple[int, ...]:
    if report.config.attack.startswith("fairness"):
        return report.desired_key
    return xor_oracle([k.bits for k in report.subkeys])


def trial_correct(report: RunReport) -> bool:
    """Every honest participant holds the key the scenario predicts."""
    if report.aborted:
        return False
    want = expected_key(report)
    return all(report.final_keys[i] == want for i in report.honest_ids)


def attack_succeeded(report: RunReport) -> bool:
    return bool(report.attack_flags) and all(report.attack_flags.values())


def confidence_halfwidth(successes: int, trials: int, level: float = 0.95) -> float:
    """Normal-approximation half-width; Clopper-Pearson below 100 trials."""
    if trials < 100:
        alpha = 1 - level
        lo = stats.beta.ppf(alpha / 2, successes, trials - successes + 1) if successes else 0.0
        hi = stats.beta.ppf(1 - alpha / 2, successes + 1, trials - successes) if successes < trials else 1.0
        return float(hi - lo) / 2
    p = successes / trials
    z = stats.norm.ppf(0.5 + level / 2)
    return float(z * math.sqrt(p * (1 - p) / trials))


@dataclass(frozen=True)
class TrialAggregate:
    trials: int
    correctness_rate: float
    attack_success_rate: float
    abort_rate: float
    mean_error_rate: float
    # 95% half-width of abort_rate
    confidence_halfwidth: float

    def to_dict(self) -> dict:
        return asdict(self)


def aggregate(reports: Iterable[RunReport]) -> TrialAggregate:
    reports = list(reports)
    if not reports:
        raise ValueError("no trials to aggregate")
    T = len(reports)
    aborts = sum(r.aborted for r in reports)
    rates = [x for r in reports for x in r.error_rates]
    return TrialAggregate(
        trials=T,
        correctness_rate=sum(map(trial_correct, reports)) / T,
        attack_success_rate=sum(map(attack_succeeded, reports)) / T,
        abort_rate=aborts / T,
        mean_error_rate=math.fsum(rates) / len(rates) if rates else 0.0,
        confidence_halfwidth=confidence_halfwidth(aborts, T),
    )


def run_trials(config: ScenarioConfig, trials: int, master_seed: int) -> list[RunReport]:
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    return [run_protocol(config, trial_rng(master_seed, t)) for t in range(trials)]


def monte_carlo(config: ScenarioConfig, trials: Optional[int] = None,
                master_seed: Optional[int] = None) -> TrialAggregate:
    trials = config.trials if trials is None else trials
    master_seed = config.seed if master_seed is None else master_seed
    return aggregate(run_trials(config, trials, master_seed))
