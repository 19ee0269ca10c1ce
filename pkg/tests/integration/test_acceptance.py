"""End-to-end accuracy properties on synthetic stores."""
import numpy as np
import pytest

from src.models.matching import MatchConfig, Metric
from src.services.episode_service import PrototypeBuilder, evaluate
from src.services.fusion_service import identity_weights
from src.services.synthetic_service import generate_synthetic, shuffle_labels
from tests.utils.test_data import SEPARABLE_PARAMS


def run(store, episodes, seed, num_phases=3, cfg=None, **kwargs):
    return evaluate(
        store, way=5, shot=1, episodes=episodes, seed=seed, seg_method="cluster",
        num_phases=num_phases, overlap=1, weights=identity_weights(store.dim),
        cfg=cfg or MatchConfig(), **kwargs)


@pytest.fixture(scope="module")
def chance_store():
    """Fifty classes whose labels were shuffled across videos."""
    store = generate_synthetic(classes=50, videos_per_class=10, num_frames=8, dim=16, num_phases=3,
                               noise_sigma=0.05, phase_separation=1.0, seed=21)
    return shuffle_labels(store, seed=22)


@pytest.fixture(scope="module")
def ordered_phase_store():
    """Six classes sharing three phase directions, one order each; no class text."""
    store = generate_synthetic(classes=6, videos_per_class=8, num_frames=12, dim=16, num_phases=3,
                               noise_sigma=0.5, phase_separation=10.0, seed=31, shared_phases=True)
    return store.model_copy(update={"text": {}})


def test_separable_store_is_solved(separable_store):
    report = run(separable_store, episodes=1000, seed=7)
    assert report.accuracy >= 0.99


def test_shuffled_labels_give_chance(chance_store):
    # When: Running 10,000 5-way 1-shot episodes on shuffled labels
    report = run(chance_store, episodes=10000, seed=3)

    # Then: Accuracy sits in the binomial band around 1/5
    assert 0.185 <= report.accuracy <= 0.215


def test_zero_separation_gives_chance():
    store = generate_synthetic(classes=10, videos_per_class=6, num_frames=8, dim=16, num_phases=3,
                               noise_sigma=1.0, phase_separation=0.0, seed=5)
    report = run(store, episodes=2000, seed=9)
    assert abs(report.accuracy - 0.2) < 4 * np.sqrt(0.2 * 0.8 / 2000)


def test_interval_covers_chance(chance_store):
    # Given: Many short independent runs sharing one prototype cache
    builder = PrototypeBuilder(chance_store, identity_weights(chance_store.dim))
    runs = 300

    # When: Each run reports an exact 95% interval
    covered = 0
    for meta_seed in range(runs):
        report = run(chance_store, episodes=100, seed=1000 + meta_seed, ci_method="exact", builder=builder)
        covered += report.ci95_low <= 0.2 <= report.ci95_high

    # Then: The true accuracy is covered in at least 93% of runs
    assert covered / runs >= 0.93


def test_phase_count_sweep_peaks_at_true_count(ordered_phase_store):
    # When: Sweeping L with the same seed
    accuracy = {L: run(ordered_phase_store, episodes=200, seed=11, num_phases=L).accuracy for L in (1, 2, 3, 4)}

    # Then: Order information grows up to the true phase count and not beyond
    assert accuracy[3] == max(accuracy.values())
    assert accuracy[1] < accuracy[2] < accuracy[3]
    assert accuracy[4] <= accuracy[3]
    assert accuracy[3] >= 0.95


def test_metrics_agree_with_one_phase(ordered_phase_store):
    aligned = run(ordered_phase_store, episodes=200, seed=12, num_phases=1, cfg=MatchConfig(metric=Metric.AB_MHM))
    unaligned = run(ordered_phase_store, episodes=200, seed=12, num_phases=1, cfg=MatchConfig(metric=Metric.BI_MHM))
    assert aligned.accuracy == unaligned.accuracy
    assert aligned.correct == unaligned.correct


def test_reproducible_across_runs_and_threads(small_store):
    reports = [
        evaluate(small_store, 3, 1, 60, 4, "cluster", 3, 1, identity_weights(small_store.dim),
                 MatchConfig(alpha=0.5), threads=threads)
        for threads in (1, 1, 1, 4, 8)
    ]
    assert len({(r.accuracy, r.correct) for r in reports}) == 1
    assert len({tuple(sorted(r.per_source.items())) for r in reports}) == 1
