import math

import numpy as np
import pytest
from scipy import stats

from conftest import ASSETS
from src.models.noise import DispenseNoise, NoiseConfig, RateNoise
from src.models.protocol import Equilibrate, Initial
from src.models.sample import Sample
from src.services import stochastic
from src.services.deterministic import evaluate, split_sample
from src.services.integrator import integrate
from src.services import kinetics
from src.services.parser import parse_crn
from src.services.syntax import number_nodes
from src.utils.errors import (
    ConfigurationError,
    NonpositiveEquilibrateTimeError,
    TruncationTooTightError,
)
from src.utils.random_stream import RandomStream


def test_degenerate_noise_reproduces_evaluation(titration, titration_crn, cfg):
    expected = evaluate(titration, titration_crn, cfg=cfg)
    for seed in (0, 1, 2):
        assert stochastic.eval_stoch(titration, titration_crn, cfg=cfg, rng=RandomStream(seed)) == expected


def test_runs_are_reproducible(titration, titration_crn, cfg):
    noise = NoiseConfig.load(ASSETS / "noise" / "titration.json")
    first = stochastic.eval_stoch(titration, titration_crn, cfg=cfg, noise=noise, rng=RandomStream(7))
    again = stochastic.eval_stoch(titration, titration_crn, cfg=cfg, noise=noise, rng=RandomStream(7))
    other = stochastic.eval_stoch(titration, titration_crn, cfg=cfg, noise=noise, rng=RandomStream(8))
    assert first == again
    assert first != other


def test_equilibration_draws_from_the_node_stream(bimolecular_crn, cfg):
    noise = NoiseConfig.model_validate({"equilibrate": {"kind": "exponential"}})
    sample = Initial((0.1, 0.1, 0.0), 1e-3, 300.0)
    p = number_nodes(Equilibrate(sample, 4.0))
    run = RandomStream(3)
    result = stochastic.eval_stoch(p, bimolecular_crn, cfg=cfg, noise=noise, rng=run)

    duration = stochastic.sample_equilibrate_time(4.0, stochastic.node_stream(run, p.node_id))
    trajectory = integrate(
        lambda conc: kinetics.drift(bimolecular_crn, conc, 1e-3, 300.0),
        np.asarray(sample.conc),
        duration,
        cfg,
        nonnegative=True,
    )
    assert result.elapsed == duration
    assert result.sample.conc == tuple(trajectory.final)


def test_exponential_equilibration_law():
    rng = RandomStream(21)
    draws = np.array([stochastic.sample_equilibrate_time(3000.0, rng) for _ in range(20_000)])
    assert draws.min() > 0.0
    assert draws.mean() == pytest.approx(3000.0, abs=4 * 3000.0 / np.sqrt(draws.size))
    assert stats.kstest(draws, "expon", args=(0.0, 3000.0)).pvalue > 1e-3


def test_equilibration_needs_positive_duration():
    with pytest.raises(NonpositiveEquilibrateTimeError):
        stochastic.sample_equilibrate_time(0.0, RandomStream(0))


def test_truncated_dispense_law():
    noise = NoiseConfig(dispense=DispenseNoise(kind="truncated_gaussian", sigma_rel=0.05, bounds=(0.1, 0.8)))
    rng = RandomStream(5)
    draws = np.array([stochastic.sample_dispense_fraction(noise, 1e-3, 0.4, rng) for _ in range(20_000)])
    law = stats.truncnorm((0.1 - 0.4) / 0.05, (0.8 - 0.4) / 0.05, loc=0.4, scale=0.05)
    assert np.all((draws > 0.1) & (draws < 0.8))
    assert draws.mean() == pytest.approx(law.mean(), rel=0.01)
    assert draws.var() == pytest.approx(law.var(), rel=0.05)


def test_absolute_volume_deviation():
    noise = NoiseConfig.preset("protocol_only")
    assert noise.dispense.sigma(1e-3) == pytest.approx(3e-4)
    assert noise.dispense.sigma(1e-4) == pytest.approx(3e-3)
    assert noise.dispense.sigma(0.0) == 0.0


def test_zero_deviation_returns_nominal_fraction():
    assert stochastic.sample_dispense_fraction(NoiseConfig(), 1e-3, 0.37, RandomStream(0)) == 0.37


@pytest.mark.slow
def test_dispense_near_one_never_empties_a_share():
    noise = NoiseConfig(dispense=DispenseNoise(kind="truncated_gaussian", sigma_rel=0.01))
    source = Sample((0.1,), 1e-3, 300.0)
    rng = RandomStream(21)
    smallest = math.inf
    for _ in range(1_000_000):
        fraction = stochastic.sample_dispense_fraction(noise, source.volume, 0.999, rng)
        kept, rest = split_sample(source, fraction)
        assert kept.volume + rest.volume == source.volume
        smallest = min(smallest, kept.volume, rest.volume)
    assert smallest > 0.0


def test_unreachable_truncation_fails():
    noise = NoiseConfig(dispense=DispenseNoise(kind="truncated_gaussian", sigma_rel=1e-3, bounds=(0.9, 0.95)))
    with pytest.raises(TruncationTooTightError):
        stochastic.sample_dispense_fraction(noise, 1e-3, 0.5, RandomStream(0))


def sub_poisson_law(k):
    sigma = np.sqrt(k / 2.0)
    return stats.truncnorm(-k / sigma, np.inf, loc=k, scale=sigma)


def test_sub_poisson_rate_law():
    crn = parse_crn("A ->{0.1126} B\n")
    noise = NoiseConfig(rates=RateNoise(kind="sub_poisson"))
    rng = RandomStream(13)
    draws = np.array([stochastic.perturb_rates(crn, noise, rng).reactions[0].rate for _ in range(20_000)])
    law = sub_poisson_law(0.1126)
    assert draws.min() > 0.0
    assert draws.mean() == pytest.approx(law.mean(), rel=0.02)
    assert draws.var() == pytest.approx(law.var(), rel=0.05)


def test_sub_poisson_uses_declared_units():
    # 0.1126 /nM/s is 1.126e8 /M/s; the variance is k / 2 in /nM/s
    crn = parse_crn("units: nM, s\nA + B ->{0.1126} C\n")
    noise = NoiseConfig(rates=RateNoise(kind="sub_poisson"))
    rng = RandomStream(13)
    draws = np.array([stochastic.perturb_rates(crn, noise, rng).declared_rates()[0] for _ in range(20_000)])
    law = sub_poisson_law(0.1126)
    assert draws.mean() == pytest.approx(law.mean(), rel=0.02)
    assert draws.var() == pytest.approx(law.var(), rel=0.05)


def test_sub_poisson_sigma_scales_with_units():
    noise = RateNoise(kind="sub_poisson")
    (internal,) = noise.sigmas([1.126e8], [1e9])
    assert internal == pytest.approx(np.sqrt(0.1126 / 2.0) * 1e9)
    assert noise.sigmas([0.1126]) == pytest.approx([np.sqrt(0.0563)])


def test_gaussian_rate_noise_per_reaction(dsd_crn):
    noise = NoiseConfig.load(ASSETS / "noise" / "rates_gaussian.json")
    perturbed = stochastic.perturb_rates(dsd_crn, noise, RandomStream(0))
    assert perturbed.names == dsd_crn.names
    assert all(k > 0 for k in perturbed.rates)
    assert not np.array_equal(perturbed.rates, dsd_crn.rates)


def test_rate_noise_off_keeps_network(dsd_crn):
    assert stochastic.perturb_rates(dsd_crn, NoiseConfig(), RandomStream(0)) is dsd_crn


def test_rate_sigma_count_must_match(titration_crn):
    noise = NoiseConfig(rates=RateNoise(kind="gaussian", sigma_rel=[0.1, 0.1]))
    with pytest.raises(ConfigurationError):
        stochastic.perturb_rates(titration_crn, noise, RandomStream(0))


def test_observation_noise_is_clamped():
    noise = NoiseConfig.model_validate({"observe_noise": {"kind": "additive_gaussian", "sigma": 1.0}})
    observed = stochastic.noisy_observation(noise, (0.0, 0.0, 0.0), RandomStream(0))
    assert all(c >= 0.0 for c in observed)
    assert stochastic.noisy_observation(NoiseConfig(), (0.1,), RandomStream(0)) == (0.1,)


def test_unnumbered_node_has_no_stream():
    with pytest.raises(ValueError):
        stochastic.node_stream(RandomStream(0), None)


def test_streams_depend_only_on_their_path():
    a = RandomStream(4).child(2).child(7)
    b = RandomStream(4, (2, 7))
    assert [a.uniform() for _ in range(3)] == [b.uniform() for _ in range(3)]
    assert RandomStream(4).child(1).uniform() != RandomStream(4).child(2).uniform()


@pytest.mark.parametrize("name", ["degenerate", "protocol_only", "rates_only", "both", "full"])
def test_presets(name):
    noise = NoiseConfig.load(name)
    assert noise.is_degenerate == (name == "degenerate")


@pytest.mark.parametrize(
    "content",
    [
        "not json",
        '{"dispense": {"kind": "lognormal"}}',
        '{"dispense": {"kind": "truncated_gaussian", "bounds": [0.8, 0.1]}}',
        '{"rates": {"kind": "gaussian", "sigma_rel": -1}}',
        '{"colour": "blue"}',
    ],
)
def test_bad_noise_files(tmp_path, content):
    path = tmp_path / "noise.json"
    path.write_text(content)
    with pytest.raises(ConfigurationError):
        NoiseConfig.load(path)


def test_missing_noise_file(tmp_path):
    with pytest.raises(ConfigurationError):
        NoiseConfig.load(tmp_path / "absent.json")
