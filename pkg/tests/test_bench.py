import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from uclust3 import DataError
from uclust3.bench import (
    Scenario,
    StudySettings,
    ari,
    ari_study,
    kmeans,
    power_study,
    simulate_dataset,
    write_study,
)

FAST = StudySettings(var_reps=100, restarts=3)


def test_scenario_validation():
    with pytest.raises(DataError, match="sum to"):
        Scenario(n=10, L=5, sizes=(3, 3, 3), means=(0, 0, 0))
    with pytest.raises(DataError, match="means has"):
        Scenario(n=9, L=5, sizes=(3, 3, 3), means=(0, 0))
    s = Scenario(n=9, L=5, sizes=[3, 3, 3], means=[0, 1, 2])
    assert s.truth().tolist() == [1, 1, 1, 2, 2, 2, 3, 3, 3]


def test_simulation_reproducible_and_shifted():
    s = Scenario(n=30, L=4000, sizes=(10, 10, 10), means=(0.0, 0.5, 1.0), seed=3)
    a, truth = simulate_dataset(s, 2)
    b, _ = simulate_dataset(s, 2)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, simulate_dataset(s, 3)[0].values)
    for g, m in zip((1, 2, 3), s.means):
        block = a.values[truth == g]
        assert block.mean() == pytest.approx(m, abs=0.01)
        assert block.std() == pytest.approx(1.0, abs=0.01)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=2, max_size=25), st.data())
def test_ari_matches_pair_counting(a, data):
    b = data.draw(st.lists(st.integers(0, 4), min_size=len(a), max_size=len(a)))
    assert ari(a, b) == pytest.approx(oracles.ari_pairs(a, b), abs=1e-12)
    assert ari(a, b) == pytest.approx(ari(b, a), abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(1, 3), min_size=3, max_size=30), st.permutations([7, 8, 9]))
def test_ari_ignores_label_names(a, names):
    renamed = [names[v - 1] for v in a]
    if len(set(a)) > 1:
        assert ari(a, renamed) == pytest.approx(1.0)


def test_ari_known_values():
    assert ari([1, 1, 2, 2], [1, 1, 2, 2]) == 1.0
    assert ari([1, 1, 1, 1], [1, 1, 1, 1]) == 1.0
    assert ari([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5)
    with pytest.raises(DataError):
        ari([1, 2], [1, 2, 3])


def test_kmeans_recovers_separated_clusters(rng):
    x = np.concatenate([rng.normal(c, 0.1, size=(15, 4)) for c in (0.0, 3.0, 6.0)])
    labels = kmeans(x, 3, seed=1)
    assert set(labels.tolist()) == {1, 2, 3}
    assert ari(labels, np.repeat([1, 2, 3], 15)) == 1.0
    assert np.array_equal(labels, kmeans(x, 3, seed=1))


def test_kmeans_handles_duplicates_and_bad_k():
    x = np.zeros((6, 2))
    x[5] = 1.0
    labels = kmeans(x, 3, seed=0)
    assert len(set(labels.tolist())) == 3
    with pytest.raises(DataError):
        kmeans(x, 7)


def test_kmeans_more_restarts_never_worse(rng):
    x = rng.standard_normal((40, 5))

    def wcss(labels):
        return sum(((x[labels == c] - x[labels == c].mean(0)) ** 2).sum() for c in set(labels.tolist()))

    assert wcss(kmeans(x, 3, seed=2, restarts=8)) <= wcss(kmeans(x, 3, seed=2, restarts=1)) + 1e-9


def test_power_study_counts_rejections():
    s = Scenario(n=10, L=200, sizes=(1, 5, 4), means=(0.0, 1.0, 2.0), reps=4, seed=1)
    row = power_study(s, FAST)
    assert row.value == sum(row.per_replicate) / 4
    assert row.value == 1.0


def test_studies_schedule_independent():
    s = Scenario(n=10, L=100, sizes=(3, 3, 4), means=(0.0, 0.3, 0.6), reps=4, seed=2)
    one = ari_study(s, "uclust3", FAST, threads=1)
    two = ari_study(s, "uclust3", FAST, threads=2)
    assert one.per_replicate == two.per_replicate
    assert one.value == pytest.approx(np.mean(one.per_replicate))


def test_ari_study_unknown_method():
    s = Scenario(n=10, L=10, sizes=(3, 3, 4), means=(0, 0, 0), reps=1)
    with pytest.raises(DataError):
        ari_study(s, "hclust")


def test_write_study(tmp_path):
    s = Scenario(n=10, L=50, sizes=(3, 3, 4), means=(0.0, 1.0, 2.0), reps=2, seed=4)
    rows = [ari_study(s, "kmeans", FAST), ari_study(s, "uclust3", FAST)]
    csv_path, sidecar = write_study(rows, tmp_path / "study.csv", {"settings": "fast"})
    with csv_path.open() as fh:
        table = list(csv.DictReader(fh))
    assert [r["method"] for r in table] == ["kmeans", "uclust3"]
    assert float(table[1]["value"]) == rows[1].value
    meta = json.loads(sidecar.read_text())
    assert meta["config"] == {"settings": "fast"}
    assert meta["per_replicate"][0] == rows[0].per_replicate


@pytest.mark.slow
def test_power_table_row_two_member_group():
    s = Scenario(n=20, L=1000, sizes=(1, 2, 17), means=(0.0, 0.25, 0.5), reps=100, seed=31)
    row = power_study(s)
    print(f"n=20 sizes (1,2,17) power {row.value:.2f} (table: 0.93)")
    assert abs(row.value - 0.93) <= 0.10


@pytest.mark.slow
def test_power_higher_dimension():
    s = Scenario(n=10, L=2000, sizes=(1, 5, 4), means=(0.0, 0.5, 1.0), reps=100, seed=32)
    row = power_study(s)
    assert abs(row.value - 1.0) <= 0.05


@pytest.mark.slow
def test_power_non_decreasing_in_separation():
    powers = []
    for step in range(6):
        m = 0.1 * step
        s = Scenario(n=20, L=1000, sizes=(1, 6, 13), means=(0.0, m, 2 * m), reps=100, seed=33)
        powers.append(power_study(s).value)
    print("power curve", powers)
    drops = [a - b for a, b in zip(powers, powers[1:]) if b < a]
    assert len(drops) <= 1 and all(d <= 0.05 for d in drops)
