import json
import math

import pytest

from flowmech.experiments import (
    SCHEMES,
    ConfigError,
    ExperimentConfig,
    SweepRow,
    metrics,
    probability_grid,
    rows_to_csv,
    rows_to_json,
    rows_to_svg,
    sweep_probability,
    sweep_users,
)

HEADER = "n,scheme,V0,thr_low,thr_high,delay_low,delay_high,stable,ic"


@pytest.fixture(scope="module")
def default_rows():
    return sweep_users(ExperimentConfig())


@pytest.fixture(scope="module")
def prob_rows():
    return sweep_probability(ExperimentConfig())


def by(rows, scheme):
    return {r.x: r for r in rows if r.scheme == scheme}


def test_default_config():
    cfg = ExperimentConfig()
    assert cfg.mu == 5.0
    assert cfg.types == (0.1, 1.0)
    assert cfg.type_space().probs == (0.5, 0.5)
    assert cfg.n_range == tuple(range(2, 17))
    assert cfg.schemes == SCHEMES
    assert cfg.n_fixed == 4 and cfg.prob_step == 0.05


@pytest.mark.parametrize(
    "bad",
    [
        {"schemes": []},
        {"schemes": ["magic"]},
        {"n_range": []},
        {"mu": -1},
        {"types": [1.0, 0.1]},
        {"probs": [0.2, 0.2]},
        {"grid_points": 10},
        {"unknown_key": 1},
        {"types": "abc"},
        [],
    ],
)
def test_bad_config_rejected(bad):
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(bad)


def test_config_range_object():
    cfg = ExperimentConfig.from_dict({"n_range": {"start": 3, "stop": 5}})
    assert cfg.n_range == (3, 4, 5)


def test_rows_complete_and_ordered(default_rows):
    keys = [(r.x, r.scheme) for r in default_rows]
    assert keys == [(n, s) for n in range(2, 17) for s in SCHEMES]
    assert all(r.V0 >= 0 for r in default_rows)
    for r in default_rows:
        assert (r.ic is None) == (r.scheme not in ("algorithm", "apriori"))
        assert r.stable == all(d is not None for d in r.delay)


def test_algorithm_matches_maximum_for_two_users(default_rows):
    assert by(default_rows, "algorithm")[2].V0 == by(default_rows, "compliant")[2].V0


def test_algorithm_below_maximum_for_three_users(default_rows):
    # The optimum is not honest at three users, so the algorithm must move.
    assert by(default_rows, "algorithm")[3].V0 < by(default_rows, "compliant")[3].V0


def test_apriori_beats_algorithm_from_eight_users(default_rows):
    alg, apr = by(default_rows, "algorithm"), by(default_rows, "apriori")
    assert all(apr[n].V0 >= alg[n].V0 for n in range(8, 17))
    assert apr[7].V0 < alg[7].V0


def test_bne_beats_ne_beyond_three_users(default_rows):
    bne, ne = by(default_rows, "bne"), by(default_rows, "ne")
    assert all(bne[n].V0 > ne[n].V0 for n in range(4, 17))
    assert bne[3].V0 < ne[3].V0


def test_complete_information_intervention_is_optimal(default_rows):
    ic, me = by(default_rows, "intervention-complete"), by(default_rows, "compliant")
    assert all(abs(ic[n].V0 - me[n].V0) <= 1e-12 for n in range(2, 17))


def test_probability_endpoints(prob_rows):
    apr, me = by(prob_rows, "apriori"), by(prob_rows, "compliant")
    assert abs(apr[0.0].V0 - me[0.0].V0) < 1e-9
    assert abs(apr[1.0].V0 - me[1.0].V0) < 1e-9


def test_probability_gap_regression(prob_rows):
    # The absolute a-priori gap peaks at P(low)=0.65 on the 0.05 grid, not at 0.5.
    apr, me = by(prob_rows, "apriori"), by(prob_rows, "compliant")
    gaps = {p: me[p].V0 - apr[p].V0 for p in me}
    assert max(gaps, key=gaps.get) == 0.65
    assert gaps[0.65] == pytest.approx(0.505224388202821, rel=1e-9)
    assert gaps[0.5] == pytest.approx(0.4697202133016906, rel=1e-9)


def test_probability_grid():
    grid = probability_grid(0.05)
    assert len(grid) == 21 and grid[0] == 0.0 and grid[-1] == 1.0 and 0.5 in grid


def test_metrics_per_type_ordering():
    rows = metrics(ExperimentConfig())
    for r in rows:
        lo, hi = r.throughput[0], r.throughput[-1]
        assert hi >= lo
        dlo = math.inf if r.delay[0] is None else r.delay[0]
        dhi = math.inf if r.delay[-1] is None else r.delay[-1]
        assert dhi >= dlo
        if r.scheme != "apriori":
            assert hi > lo


def test_metrics_delay_shapes():
    rows = metrics(ExperimentConfig())
    opt = [r.delay[0] for r in rows if r.scheme == "compliant"]
    apr = [r.delay[0] for r in rows if r.scheme == "apriori"]
    assert max(opt) / min(opt) < 1.25
    assert max(apr) / min(apr) < 1.03
    bne = {r.x: r.stable for r in rows if r.scheme == "bne"}
    assert min(n for n, ok in bne.items() if not ok) == 4


def test_csv_format_and_determinism(default_rows):
    text = rows_to_csv(default_rows)
    assert text.splitlines()[0] == HEADER
    again = rows_to_csv(sweep_users(ExperimentConfig()))
    assert text == again
    first = text.splitlines()[1].split(",")
    assert first[:2] == ["2", "compliant"]
    assert float(first[2]) == default_rows[0].V0
    assert first[-1] == ""


def test_json_mirrors_rows(default_rows):
    doc = json.loads(rows_to_json(default_rows))
    assert len(doc) == len(default_rows)
    assert doc[0]["n"] == 2 and doc[0]["V0"] == default_rows[0].V0
    assert "runtime" not in doc[0]


def test_svg_is_pure_view(default_rows):
    before = rows_to_csv(default_rows)
    svg = rows_to_svg(default_rows)
    assert svg.startswith("<svg") and svg.count("<polyline") == len(SCHEMES)
    assert rows_to_csv(default_rows) == before


def test_row_rejects_negative_value():
    with pytest.raises(ValueError):
        SweepRow(2, "ne", -1.0, [0, 0], [None, None], False)
