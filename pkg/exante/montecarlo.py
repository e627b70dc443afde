"""
Monte Carlo rank distributions under correlated random utilities.

Every simulation draws a common value per college and an idiosyncratic
value per student-college pair, ranks colleges by the blended utility and
runs TCDM and DA on the same profile. Simulation k always uses child k of
the config seed, so results do not depend on how work is split across
processes.
"""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from core.conf import admissions_settings
from core.generators import ranked_instance
from mechanisms.da import run_da
from mechanisms.tcdm import run_tcdm

from .distributions import CapacityPrefix, CorrelatedUtilityConfig, RankDistribution, outcome_labels

logger = logging.getLogger(__name__)

CDF_COLUMNS = ['delta', 'position', 'mechanism', 'outcome', 'probability', 'cumulative']


def draw_preferences(rng, num_students, num_colleges, delta):
    """Preference orders as college indices, best first. Ties go to the lower index."""
    common = rng.random(num_colleges)
    idiosyncratic = rng.random((num_students, num_colleges))
    utility = delta * common + (1 - delta) * idiosyncratic
    return np.argsort(-utility, axis=1, kind='stable')


def _outcome_index(instance, student, college):
    if college is None:
        return len(instance.colleges)
    return instance.rank_of(student, college) - 1


def _simulate_chunk(seed_sequences, num_students, capacities, rounds, delta):
    """Outcome counts (students x outcomes) for TCDM and DA over the given streams."""
    width = len(capacities) + 1
    tcdm_counts = np.zeros((num_students, width), dtype=np.int64)
    da_counts = np.zeros((num_students, width), dtype=np.int64)
    for seed_sequence in seed_sequences:
        rng = np.random.default_rng(seed_sequence)
        orders = draw_preferences(rng, num_students, len(capacities), delta)
        instance = ranked_instance(capacities, orders)
        tcdm = run_tcdm(instance, rounds).final
        da = run_da(instance)
        for index, student in enumerate(instance.students):
            tcdm_counts[index, _outcome_index(instance, student, tcdm.college_of(student))] += 1
            da_counts[index, _outcome_index(instance, student, da.college_of(student))] += 1
    return tcdm_counts, da_counts


@dataclass(frozen=True)
class MonteCarloResult:
    config: CorrelatedUtilityConfig
    rounds: Optional[int]
    tcdm_counts: np.ndarray
    da_counts: np.ndarray

    @property
    def tcdm(self) -> List[RankDistribution]:
        return [RankDistribution.from_counts(i + 1, row, exact=False) for i, row in enumerate(self.tcdm_counts)]

    @property
    def da(self) -> List[RankDistribution]:
        return [RankDistribution.from_counts(i + 1, row, exact=False) for i, row in enumerate(self.da_counts)]

    def cdf_frame(self) -> pd.DataFrame:
        """Long table of probabilities and cumulative probabilities per outcome."""
        labels = outcome_labels(self.tcdm_counts.shape[1] - 1)
        rows = []
        for mechanism, dists in (('tcdm', self.tcdm), ('da', self.da)):
            for dist in dists:
                for label, probability, cumulative in zip(labels, dist.probs, dist.cdf()):
                    rows.append((self.config.delta, dist.position, mechanism, label, probability, cumulative))
        return pd.DataFrame(rows, columns=CDF_COLUMNS)


def monte_carlo_correlated(
    num_students: int,
    capacities: Sequence[int],
    rounds: Optional[int],
    config: CorrelatedUtilityConfig,
    threads: int = 1,
) -> MonteCarloResult:
    """
    Estimate TCDM and DA rank distributions for every priority position.
    """
    CapacityPrefix.from_capacities(capacities)
    streams = np.random.SeedSequence(config.seed).spawn(config.num_sims)

    if threads > 1:
        size = math.ceil(len(streams) / threads)
        chunks = [streams[start:start + size] for start in range(0, len(streams), size)]
        with ProcessPoolExecutor(max_workers=threads) as executor:
            parts = list(executor.map(
                _simulate_chunk,
                chunks,
                [num_students] * len(chunks),
                [list(capacities)] * len(chunks),
                [rounds] * len(chunks),
                [config.delta] * len(chunks),
            ))
        tcdm_counts = sum(part[0] for part in parts)
        da_counts = sum(part[1] for part in parts)
    else:
        tcdm_counts, da_counts = _simulate_chunk(streams, num_students, list(capacities), rounds, config.delta)

    logger.info(f"Ran {config.num_sims} correlated-utility simulations at delta={config.delta}")
    return MonteCarloResult(config=config, rounds=rounds, tcdm_counts=tcdm_counts, da_counts=da_counts)


def sweep_deltas(num_students, capacities, rounds, deltas=None, num_sims=None, seed=None, threads=1):
    """Run one simulation batch per delta and stack their CDF tables."""
    deltas = admissions_settings.MONTE_CARLO_DELTAS if deltas is None else deltas
    num_sims = admissions_settings.MONTE_CARLO_SIMS if num_sims is None else num_sims
    seed = admissions_settings.DEFAULT_SEED if seed is None else seed
    results = [
        monte_carlo_correlated(
            num_students, capacities, rounds,
            CorrelatedUtilityConfig(delta=float(delta), num_sims=num_sims, seed=seed),
            threads=threads,
        )
        for delta in deltas
    ]
    frame = pd.concat([r.cdf_frame() for r in results], ignore_index=True)
    return results, frame


def sigma_band(probability, num_sims, sigma=None):
    """Half-width of the binomial band around an exact probability, with a continuity correction."""
    sigma = admissions_settings.SIGMA_BAND if sigma is None else sigma
    p = float(probability)
    return sigma * math.sqrt(p * (1 - p) / num_sims) + 1 / (2 * num_sims)


def outside_sigma_band(estimates: Sequence[RankDistribution], exact: Sequence[RankDistribution], num_sims, sigma=None):
    """(position, outcome index, estimate, exact) for every cell outside its band."""
    misses = []
    for estimate, reference in zip(estimates, exact):
        for index, (p_hat, p) in enumerate(zip(estimate.probs, reference.probs)):
            if abs(p_hat - float(p)) > sigma_band(p, num_sims, sigma):
                misses.append((estimate.position, index, p_hat, p))
    return misses


def cdf_dominates(better: RankDistribution, worse: RankDistribution, ranks=None):
    """True when `better`'s CDF is at least `worse`'s at every rank in `ranks` (all ranks by default)."""
    ranks = range(1, better.num_colleges + 1) if ranks is None else ranks
    upper, lower = better.cdf(), worse.cdf()
    return all(upper[r - 1] >= lower[r - 1] - 1e-12 for r in ranks)
