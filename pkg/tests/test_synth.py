import numpy as np
import pytest

from gnrisk.loan_data import TABLES, dump_table, validate
from gnrisk.synth import (
    GROWTH_OVERRIDES,
    InfeasibleConfig,
    PlantedState,
    SynthConfig,
    generate,
    generate_full,
    parse_config_file,
    planted_hazard,
)

SMALL = dict(n_customers=1500, n_months=36)


def _state(authority=0.0, hub=0.0):
    return PlantedState(
        authority=np.array([[authority]]), hub=np.array([[hub]]), community=np.array([0]),
        community_size=np.array([1]), defaulted=np.zeros((1, 1), dtype=bool), intercept=0.0)


def test_same_seed_gives_identical_tables():
    cfg = SynthConfig(n_customers=600, n_months=24, share_large=0.0, seed=3)
    a, b = generate(cfg), generate(cfg)
    for t in TABLES:
        assert dump_table(a, t) == dump_table(b, t)


def test_different_seed_changes_output():
    a = generate(SynthConfig(n_customers=600, n_months=24, share_large=0.0, seed=3))
    b = generate(SynthConfig(n_customers=600, n_months=24, share_large=0.0, seed=4))
    assert dump_table(a, "repayments") != dump_table(b, "repayments")


def test_generated_data_validates(small_synth):
    assert validate(small_synth).ok


def test_zero_coefficients_give_even_hazard():
    cfg = SynthConfig(beta_authority=0.0, beta_hub=0.0, beta_community=0.0, beta_quarter_end=0.0)
    assert planted_hazard(0, 0, _state(0.7, 0.3), cfg, intercept=0.0) == 0.5


def test_hazard_rises_with_authority_and_falls_with_hub():
    cfg = SynthConfig()
    assert planted_hazard(0, 0, _state(0.9), cfg, -3.0) > planted_hazard(0, 0, _state(0.1), cfg, -3.0)
    assert planted_hazard(0, 0, _state(hub=0.9), cfg, -3.0) < planted_hazard(0, 0, _state(hub=0.1), cfg, -3.0)
    assert 0.0 < planted_hazard(0, 0, _state(1.0), cfg, 50.0) <= 1.0


def test_calibrated_rate_is_close_to_target():
    r = generate_full(SynthConfig(**SMALL, seed=11))
    rate = r.dataset.default_flags.mean()
    assert abs(rate - 0.0677) <= 0.005
    # the stored intercept reproduces the run when passed explicitly
    again = generate(SynthConfig(**SMALL, seed=11, intercept=r.state.intercept))
    assert dump_table(again, "repayments") == dump_table(r.dataset, "repayments")


def _clustering(result):
    d = result.state.defaulted.any(axis=1).astype(float)
    c = result.state.community
    rates = np.bincount(c, weights=d) / np.bincount(c)
    return float(np.mean(np.abs(rates - d.mean())))


@pytest.mark.parametrize("seed", range(5))
def test_community_coefficient_increases_clustering(seed):
    values = [_clustering(generate_full(SynthConfig(**SMALL, seed=seed, beta_community=b))) for b in (0.0, 3.0, 6.0)]
    assert values[0] < values[1] < values[2]


def test_quarter_end_months_default_more():
    ds = generate(SynthConfig(**SMALL, seed=1))
    month = ds.repayments["due_date"].dt.month.to_numpy()
    flags = ds.default_flags
    assert flags[month % 3 == 0].mean() > flags[month % 3 != 0].mean()


def test_growth_config_densifies_the_network():
    from gnrisk.graph import build_network
    ds = generate(SynthConfig(**SMALL, seed=2).replace(**GROWTH_OVERRIDES))
    early = build_network(ds, np.datetime64("2012-12-31")).n_edges
    late = build_network(ds, np.datetime64("2014-06-30")).n_edges
    assert late > 2 * early


@pytest.mark.parametrize("kw", [
    dict(n_customers=100),
    dict(target_default_rate=1.5),
    dict(share_small=0.9, share_large=0.2),
    dict(one_year=0.9, two_three_year=0.2),
    dict(beta_hub=1.0),
    dict(n_months=0),
])
def test_infeasible_configs_are_rejected(kw):
    with pytest.raises(InfeasibleConfig):
        generate(SynthConfig(**kw))


def test_config_file_parsing(tmp_path):
    p = tmp_path / "synth.cfg"
    p.write_text("# comment\nseed = 9\nn_customers=700  # trailing\nbeta_hub=-1.5\nintercept=none\n")
    cfg = SynthConfig.from_mapping(parse_config_file(p))
    assert (cfg.seed, cfg.n_customers, cfg.beta_hub, cfg.intercept) == (9, 700, -1.5, None)
    with pytest.raises(KeyError):
        SynthConfig.from_mapping({"colour": "red"})
