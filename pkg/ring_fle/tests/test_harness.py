import csv
import io
import math

import pytest

from .. import _harness
from .._harness import AttackSpec, TrialReport, load_config, run_trials, sweep, tv_distance
from .._protocols import PhaseParams
from .._ring import Failure, Outcome, RingConfig
from .._utils import ConfigError, PreconditionError
from .conftest import DATA_DIR


@pytest.mark.parametrize(
    "hist, expected",
    [([5, 5, 5, 5], 0.0), ([4, 0, 0, 0], 0.75), ([3, 1, 0, 0], 0.5), ([1, 1, 0, 0], 0.5)],
)
def test_tv_distance(hist, expected):
    assert tv_distance(hist, 4) == pytest.approx(expected)


def test_tv_distance_rejects():
    with pytest.raises(ValueError):
        tv_distance([0, 0, 0, 0], 4)
    with pytest.raises(ValueError):
        tv_distance([1, 2], 4)


def test_honest_trials():
    report = run_trials(RingConfig(n=5), trials=200, master_seed=1)
    assert report.trials == sum(report.histogram) == 200
    assert report.failures == {}
    assert report.target is None and report.target_rate is None
    assert report.epsilon_hat >= -1 / 5
    assert 0 <= report.chi2_pvalue <= 1
    assert report.to_dict()["config"]["attack"] is None


def test_trials_are_reproducible():
    config = RingConfig(n=6, schedule="random")
    first = run_trials(config, trials=40, master_seed=9)
    again = run_trials(config, trials=40, master_seed=9)
    assert first.histogram == again.histogram
    other = run_trials(config, trials=40, master_seed=10)
    assert other.histogram != first.histogram


def test_workers_do_not_change_results():
    config = RingConfig(n=6)
    alone = run_trials(config, trials=600, master_seed=2)
    pooled = run_trials(config, trials=600, master_seed=2, workers=2)
    assert pooled.histogram == alone.histogram


def test_cubic_attack_with_oracle():
    attack = AttackSpec("cubic", target=11, k=3, distances=(6, 4, 2))
    report = run_trials(RingConfig(n=15), attack, trials=50, master_seed=4, oracle=True)
    assert report.target_rate == 1.0
    assert report.oracle_agreement == 1.0
    assert report.to_dict()["config"]["coalition"] == []


def test_oracle_agreement_checks_the_reported_outcome(rng):
    outcome, transcript = _harness.play_trial(RingConfig(n=6), None, rng)
    assert outcome.elected
    assert _harness._oracle_agrees(transcript, outcome)
    # A reported outcome that differs from the transcript's is a disagreement.
    assert not _harness._oracle_agrees(transcript, Outcome(leader=(outcome.leader + 1) % 6))
    assert not _harness._oracle_agrees(transcript, Outcome(failure=Failure.ABORT))


def test_explicit_positions():
    attack = AttackSpec("naive", target=4, positions="0,3,6")
    assert attack.placement == "explicit"
    report = run_trials(RingConfig(n=9), attack, trials=30, oracle=True)
    assert report.histogram[4] == 30
    assert report.oracle_agreement == 1.0


def test_single_trial():
    report = run_trials(RingConfig(n=8, protocol="basic"), AttackSpec("single", target=5))
    assert report.histogram == [0, 0, 0, 0, 0, 1, 0, 0]
    assert report.epsilon_hat == pytest.approx(7 / 8)


def test_bernoulli_placement_draws_per_trial():
    attack = AttackSpec("random", target=2, p=0.5, c=1)
    report = run_trials(RingConfig(n=8), attack, trials=20, master_seed=5)
    assert report.trials == 20


@pytest.mark.parametrize(
    "config, attack, kwargs",
    [
        (RingConfig(n=8), None, {"trials": 0}),
        (RingConfig(n=8), None, {"workers": 0}),
        (RingConfig(n=8, protocol="phase"), None, {"oracle": True}),
        (RingConfig(n=8, protocol="basic"), AttackSpec("naive", positions="0,4"), {}),
        (RingConfig(n=8, protocol="basic"), AttackSpec("single", target=8), {}),
        (RingConfig(n=8), AttackSpec("random", p=1.5), {}),
        (RingConfig(n=15), AttackSpec("cubic", distances=(6, 4, 1)), {}),
    ],
)
def test_config_errors(config, attack, kwargs):
    with pytest.raises(ConfigError):
        run_trials(config, attack, **kwargs)


def test_attack_spec_errors():
    with pytest.raises(ConfigError):
        AttackSpec("bogus")
    with pytest.raises(ConfigError):
        AttackSpec("naive")
    with pytest.raises(ConfigError):
        AttackSpec("naive", k=3, placement="ring")
    assert AttackSpec.protocol_of("phase-rush") == "phase"


def test_preconditions_fail_before_any_trial(monkeypatch):
    calls = []
    monkeypatch.setattr(_harness, "play_trial", lambda *args, **kwargs: calls.append(args))
    with pytest.raises(PreconditionError):
        run_trials(RingConfig(n=9), AttackSpec("naive", positions="0,4"), trials=5)
    assert calls == []


def test_sweep():
    points = list(sweep(RingConfig(n=8), None, {"n": [4, 6]}, trials=10))
    assert [point for point, _ in points] == [{"n": 4}, {"n": 6}]
    assert [report.n for _, report in points] == [4, 6]
    attack = AttackSpec("naive", k=3)
    points = sweep(RingConfig(n=9), attack, {"target": [1, 2]}, 5)
    targets = [report.histogram[point["target"]] for point, report in points]
    assert targets == [5, 5]
    with pytest.raises(ConfigError):
        list(sweep(RingConfig(n=8), None, {"colour": [1]}, trials=1))


def test_errors_are_counted(monkeypatch):
    def boom(*args, **kwargs):
        raise RuntimeError("boom")

    monkeypatch.setattr(_harness, "simulate", boom)
    report = run_trials(RingConfig(n=4), trials=3)
    assert report.errors == 3
    assert report.histogram == [0, 0, 0, 0]
    assert report.tv is None
    with pytest.raises(RuntimeError):
        run_trials(RingConfig(n=4), trials=3, strict=True)


def test_report_invariant():
    with pytest.raises(ValueError):
        TrialReport(config={}, trials=3, master_seed=0, histogram=[1, 1])


def test_report_outputs():
    report = run_trials(RingConfig(n=4), trials=20, master_seed=3)
    buffer = io.StringIO()
    report.write_csv(buffer)
    buffer.seek(0)
    rows = list(csv.DictReader(buffer))
    assert [row["outcome"] for row in rows] == ["0", "1", "2", "3"]
    assert sum(int(row["count"]) for row in rows) == 20
    assert '"trials": 20' in report.to_json()
    assert "tv_distance" in report.format_table()


def test_load_config(tmp_path):
    options = load_config(DATA_DIR / "naive.yaml")
    assert options == {"n": 9, "attack": "naive", "positions": "0,3,6", "target": 4, "trials": 20, "seed": 7}
    bad = tmp_path / "bad.yaml"
    bad.write_text("attack: bogus\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    bad.write_text("n: [1, 2]\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    dashed = tmp_path / "dashed.yaml"
    dashed.write_text("coalition-bit: 1\n")
    assert load_config(dashed) == {"coalition_bit": 1}


def test_honest_uniformity():
    report = run_trials(RingConfig(n=5), trials=10_000, master_seed=11)
    assert report.tv < 0.02
    assert report.failures == {}


@pytest.mark.slow
def test_honest_uniformity_acceptance():
    trials, n = 100_000, 16
    report = run_trials(RingConfig(n=n), trials=trials, master_seed=12, workers=4)
    band = 5 * math.sqrt((1 / n) * (1 - 1 / n) / trials)
    assert all(abs(count / trials - 1 / n) <= band for count in report.histogram)
    assert report.tv < 0.01
    assert report.failures == {}


@pytest.mark.slow
def test_phase_honest_acceptance():
    config = RingConfig(n=36, protocol="phase", params=PhaseParams(l=4, m=2 * 36 * 36))
    report = run_trials(config, trials=10_000, master_seed=13, workers=4)
    assert report.failures == {}
    assert report.tv < 0.03


@pytest.mark.slow
def test_attack_acceptance():
    basic = run_trials(RingConfig(n=8, protocol="basic"), AttackSpec("single", target=6), trials=1000)
    assert basic.target_rate == 1.0
    for w in range(15):
        cubic = AttackSpec("cubic", target=w, k=3, distances=(6, 4, 2))
        report = run_trials(RingConfig(n=15), cubic, trials=100, master_seed=w, oracle=True)
        assert report.target_rate == 1.0
        assert report.oracle_agreement == 1.0
    randomized = run_trials(RingConfig(n=1024), AttackSpec("random", target=0), trials=200, workers=4)
    assert randomized.target_rate >= 0.95
