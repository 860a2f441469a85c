import numpy as np
import pytest

from fragility.config import RunConfig
from fragility.errors import ConfigError
from fragility.jumps import JumpPanel
from fragility.pipeline import analyze, prepare_jumps
from fragility.rolling import run, segment_instability, unstable_flags, write_periods_csv, write_series_csv
from fragility.synth import SynthSpec, generate

from conftest import random_jumps


def jump_panel(I, start=0):
    n, k = I.shape
    dates = tuple(f"2001-{1 + (start + t) // 28:02d}-{1 + (start + t) % 28:02d}" for t in range(n))
    return JumpPanel(dates, tuple(f"m{j}" for j in range(k)), np.where(I == 1, 3.0, 0.0), I.astype(np.int8), 2.0, "diff")


def test_window_count(rng):
    s = run(jump_panel(random_jumps(rng, 130, 4, 0.2)), window=120, config=RunConfig(contributions=False))
    assert len(s) == 11


def test_parallel_arrays_and_ordering(rng):
    s = run(jump_panel(random_jumps(rng, 100, 4, 0.2)), window=40)
    assert len(s.lambdas) == len(s.total_flows) == len(s) == 61
    assert len(s.contributions) == len(s) - 1
    assert all(a < b for a, b in zip(s.window_ends, s.window_ends[1:]))
    assert (s.lambdas >= 0).all() and (s.total_flows >= 0).all()


def test_window_errors(rng):
    jp = jump_panel(random_jumps(rng, 50, 3))
    with pytest.raises(ConfigError):
        run(jp, window=60)
    with pytest.raises(ConfigError):
        run(jp, window=20)
    with pytest.raises(ConfigError):
        run(jp, window=30, stride=0)


def test_empty_window_flagged(caplog):
    I = np.zeros((80, 3), dtype=np.int8)
    I[5, :] = 1
    s = run(jump_panel(I), window=40, config=RunConfig(contributions=False))
    assert s.empty[-1] and s.lambdas[-1] == 0.0 and not s.empty[0]
    assert "without any jump" in caplog.text


def test_stride_is_subsample(rng):
    jp = jump_panel(random_jumps(rng, 150, 5, 0.15))
    full = run(jp, window=50, config=RunConfig(contributions=False))
    sub = run(jp, window=50, stride=7, config=RunConfig(contributions=False))
    assert sub.window_ends == full.window_ends[::7]
    assert np.array_equal(sub.lambdas, full.lambdas[::7])
    assert np.array_equal(sub.total_flows, full.total_flows[::7])


def test_parallel_matches_serial(rng):
    jp = jump_panel(random_jumps(rng, 140, 5, 0.15))
    a = run(jp, window=40, config=RunConfig(jobs=1))
    b = run(jp, window=40, config=RunConfig(jobs=3))
    assert a.window_ends == b.window_ends
    assert np.array_equal(a.lambdas, b.lambdas) and np.array_equal(a.total_flows, b.total_flows)
    assert a.contributions == b.contributions


def test_segmentation_examples():
    assert segment_instability([0.8] * 50) == []
    lam = [0.9] * 20 + [1.2] * 30 + [0.9] * 20
    (p,) = segment_instability(lam, min_run=10)
    assert (p.first, p.last, p.length) == (20, 49, 30)
    assert p.peak_lambda == 1.2
    # a 3-window dip inside a long run merges
    lam = [0.9] * 5 + [1.1] * 15 + [0.95] * 3 + [1.3] * 15 + [0.9] * 12
    (p,) = segment_instability(lam, min_run=10)
    assert (p.first, p.last) == (5, 37) and p.peak_lambda == 1.3
    # a gap of min_run windows keeps runs apart
    lam = [1.1] * 12 + [0.9] * 10 + [1.1] * 12
    assert len(segment_instability(lam, min_run=10)) == 2
    # short isolated run is dropped
    assert segment_instability([0.9] * 10 + [1.5] * 9 + [0.9] * 10, min_run=10) == []
    with pytest.raises(ValueError):
        segment_instability([])


def test_period_fields():
    lam = np.array([0.5] * 3 + [1.4, 1.6, 1.5] + [0.5] * 3)
    flows = np.arange(9.0)
    (p,) = segment_instability(lam, min_run=3, total_flows=flows, window_ends=[f"d{k}" for k in range(9)])
    assert (p.start, p.end) == ("d3", "d5")
    assert p.mean_total_flow == 4.0 and p.peak_lambda >= 1.0
    assert unstable_flags(9, [p]).tolist() == [0, 0, 0, 1, 1, 1, 0, 0, 0]


def test_csv_outputs(tmp_path, rng):
    s = run(jump_panel(random_jumps(rng, 80, 4, 0.2)), window=40)
    periods = segment_instability(s, threshold=0.5, min_run=2)
    write_series_csv(s, periods, tmp_path / "s.csv")
    write_periods_csv(periods, tmp_path / "p.csv")
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "window_end,lambda,total_flow,node_contrib,flow_contrib,edge_contrib,unstable_flag"
    assert len(lines) == len(s) + 1
    assert lines[1].split(",")[3:6] == ["", "", ""]
    assert (tmp_path / "p.csv").read_text().splitlines()[0] == "start,end,peak_lambda,mean_total_flow"


def test_homogeneous_lambda_nearly_constant():
    panel, _ = generate(SynthSpec(n_markets=20, n_days=1200, seed=5, co_jump=0.3))
    res = analyze(panel, RunConfig(contributions=False))
    lam = res.series.lambdas
    assert lam.std() / lam.mean() < 0.10


@pytest.fixture(scope="module")
def regime_run():
    spec = SynthSpec(n_markets=42, n_days=2000, seed=0, co_jump=0.05, regimes=((1000, 0.5),))
    panel, truth = generate(spec)
    cfg = RunConfig()
    res = analyze(panel, cfg)
    # window_end rows of the jump panel on or after the switch belong to the high regime
    high = np.array([d >= panel.dates[1000 + cfg.window] for d in res.series.window_ends])
    low = np.array([d < panel.dates[1000] for d in res.series.window_ends])
    return panel, res, high, low


def test_regime_means_ordered(regime_run):
    _, res, high, low = regime_run
    s = res.series
    assert s.lambdas[high].mean() > s.lambdas[low].mean()
    assert s.total_flows[high].mean() > s.total_flows[low].mean()


def test_crisis_probabilities_in_crisis_range(regime_run):
    from fragility.network import conditional_probability

    panel, res, _, _ = regime_run
    I = res.jumps.jumps
    off = ~np.eye(I.shape[1], dtype=bool)
    # pooled over each regime; single 120-day windows swing with the few systemic days they hold
    calm = conditional_probability(I[:998])[off]
    crisis = conditional_probability(I[998:])[off]
    assert 0.2 <= np.median(crisis) <= 0.6
    assert 0.0 <= np.median(calm) <= 0.2


def test_contribution_associations(regime_run):
    from fragility.decomposition import summarize

    corr = summarize(list(regime_run[1].series.contributions)).correlations["all"]
    assert corr["node_flow"] < 0
    assert corr["flow_edge"] > 0


def test_prepare_jumps_uses_config():
    panel, _ = generate(SynthSpec(n_markets=3, n_days=200, seed=2))
    _, _, jp = prepare_jumps(panel, RunConfig(cutoff=2.5, basis="return"))
    assert jp.cutoff == 2.5 and jp.basis == "return"
