"""
Monte Carlo checks of the tabular sample-complexity claims.

Each claim returns a report entry with the estimate, its standard error, a
3-sigma interval, the expected value and a pass/fail verdict.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Any, Callable, Optional

import numpy as np

from src.casestudy.tabular import (
    A2,
    GaussianArms,
    TabularArmStats,
    alternation_violations,
    de_lifecycles_to_success,
    lifecycles_to_first_success,
    multiuser_de_sweep,
    multiuser_random_sweep,
    tabular_random_episode,
    tabular_ts_episode,
    tabular_ucb_episode,
)
from src.core.errors import ConfigError
from src.core.rng import component_rng


logger = logging.getLogger(__name__)

SINGLE_T = 4
UCB_T = 10
MULTI_USERS = 20
MULTI_ROUNDS = 10
MULTI_T = 10


@dataclass
class ClaimReport:
    estimate: float
    stderr: float
    ci_low: float
    ci_high: float
    expected: float
    passed: bool
    trials: int
    extra: dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out.update(out.pop("extra"))
        return out


def summarize(samples, expected: float, passed: Callable[[float, float], bool], **extra) -> ClaimReport:
    """Mean, standard error and 3-sigma interval of i.i.d. samples"""
    samples = np.asarray(samples, dtype=np.float64)
    mean = float(samples.mean())
    stderr = float(samples.std(ddof=1) / np.sqrt(samples.size)) if samples.size > 1 else 0.0
    return ClaimReport(
        estimate=mean,
        stderr=stderr,
        ci_low=mean - 3 * stderr,
        ci_high=mean + 3 * stderr,
        expected=expected,
        passed=bool(passed(mean, stderr)),
        trials=int(samples.size),
        extra=extra,
    )


def within_fraction(expected: float, fraction: float) -> Callable[[float, float], bool]:
    return lambda mean, _: abs(mean - expected) <= fraction * expected


def claim_single_random(seed: int, trials: int = 10_000, T: int = SINGLE_T) -> ClaimReport:
    """Life-cycles to first success under uniform picks: 2^T"""
    rng = component_rng(seed, "casestudy", "single-random")
    counts = [lifecycles_to_first_success(lambda: tabular_random_episode(T, rng)) for _ in range(trials)]
    return summarize(counts, 2.0 ** T, within_fraction(2.0 ** T, 0.10))


def claim_single_ts(seed: int, trials: int = 10_000, T: int = SINGLE_T) -> ClaimReport:
    """Life-cycles to first success under myopic Thompson sampling: 2^T"""
    rng = component_rng(seed, "casestudy", "single-ts")
    counts, picks_a2, picks = [], 0, 0
    for _ in range(trials):
        arms = GaussianArms()
        count = 0
        while True:
            count += 1
            trajectory = tabular_ts_episode(arms, T, rng, truth=A2)
            if trajectory.total > 0:
                break
            picks_a2 += sum(a == A2 for a in trajectory.actions)
            picks += T
        counts.append(count)
    report = summarize(counts, 2.0 ** T, within_fraction(2.0 ** T, 0.10))
    report.extra["pre_reward_a2_frequency"] = picks_a2 / picks if picks else float("nan")
    return report


def claim_single_ucb(seed: int, lifecycles: int = 1_000, T: int = UCB_T) -> ClaimReport:
    """UCB alternates between the arms and never collects a reward"""
    stats = TabularArmStats()
    rewards, actions = [], []
    for _ in range(lifecycles):
        trajectory = tabular_ucb_episode(stats, T, truth=A2)
        rewards.append(trajectory.total)
        actions.extend(trajectory.actions)
    violations = alternation_violations(actions)
    total = float(sum(rewards))
    return ClaimReport(
        estimate=total,
        stderr=0.0,
        ci_low=total,
        ci_high=total,
        expected=0.0,
        passed=total == 0.0 and violations == 0,
        trials=lifecycles,
        extra={"alternation_violations": violations, "steps": len(actions)},
    )


def claim_single_de(seed: int, trials: int = 10_000, T: int = SINGLE_T) -> ClaimReport:
    """
    Life-cycles to first reward for deep exploration: 2 when each
    pre-reward life-cycle is an independent prior draw, 1.5 with refutation.
    """
    rng = component_rng(seed, "casestudy", "single-de")
    prior_draws = [de_lifecycles_to_success(A2, T, rng, refute=False) for _ in range(trials)]
    refuted = [de_lifecycles_to_success(A2, T, rng, refute=True) for _ in range(trials)]
    refuted_report = summarize(refuted, 1.5, lambda mean, se: abs(mean - 1.5) <= 3 * max(se, 1e-12))
    return summarize(
        prior_draws,
        2.0,
        lambda mean, _: 1.9 <= mean <= 2.1,
        refuted=refuted_report.to_dict(),
    )


def claim_multi_de(
    seed: int, trials: int = 1_000, n_users: int = MULTI_USERS, rounds: int = MULTI_ROUNDS, T: int = MULTI_T
) -> ClaimReport:
    """DE with a generalizer forfeits at most the first round"""
    rng = component_rng(seed, "casestudy", "multi-de")
    totals, complete = [], 0
    for _ in range(trials):
        result = multiuser_de_sweep(n_users, T, rounds, rng)
        totals.append(result.total)
        complete += result.known[0] == n_users
    bound = 0.9 * n_users * (rounds - 1)
    fraction = complete / trials
    report = summarize(totals, bound, lambda mean, _: mean >= bound and fraction >= 0.95)
    report.extra["identified_after_round_1"] = fraction
    return report


def claim_multi_random(
    seed: int, trials: int = 1_000, n_users: int = MULTI_USERS, rounds: int = MULTI_ROUNDS, T: int = MULTI_T
) -> ClaimReport:
    """Random picks succeed with probability 2^-T per life-cycle"""
    rng = component_rng(seed, "casestudy", "multi-random")
    totals = [multiuser_random_sweep(n_users, T, rounds, rng).total for _ in range(trials)]
    expected = n_users * rounds * 2.0 ** -T
    return summarize(totals, expected, lambda mean, _: mean <= 1.0)


CLAIMS: dict[str, Callable[..., ClaimReport]] = {
    "single-random": claim_single_random,
    "single-ts": claim_single_ts,
    "single-ucb": claim_single_ucb,
    "single-de": claim_single_de,
    "multi-de": claim_multi_de,
    "multi-random": claim_multi_random,
}


def run_claims(claim: str = "all", seed: int = 0, trials: Optional[int] = None) -> dict[str, dict[str, Any]]:
    """
    Evaluate one claim or all of them.

    Args:
        claim: A key of CLAIMS, or "all"
        seed: Monte Carlo seed
        trials: Override the default trial count of every claim

    Returns:
        {claim id: report dict}
    """
    if claim != "all" and claim not in CLAIMS:
        raise ConfigError(f"unknown claim {claim!r}; expected one of {', '.join(CLAIMS)} or all")
    names = list(CLAIMS) if claim == "all" else [claim]
    report = {}
    for name in names:
        fn = CLAIMS[name]
        kwargs = {}
        if trials is not None:
            kwargs["lifecycles" if name == "single-ucb" else "trials"] = trials
        result = fn(seed, **kwargs)
        logger.info(
            "Claim %s: estimate %.4f (expected %.4f) -> %s", name, result.estimate, result.expected,
            "PASS" if result.passed else "FAIL",
        )
        report[name] = result.to_dict()
    return report
