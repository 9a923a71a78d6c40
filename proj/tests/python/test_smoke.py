import json
import math

import numpy as np
import pytest

import doseresp


@pytest.fixture(scope="module")
def data():
    return doseresp.synthesize(71, -14.03, 9.39, 1)


def test_parse_roundtrip(data):
    text = doseresp.serialize_trials(data)
    assert doseresp.parse_trials(text) == data
    assert len(data) == 71


def test_bad_line_raises():
    with pytest.raises(doseresp.DataError, match="line 3"):
        doseresp.parse_trials("dosage,total,improved\n1.0,10,3\n1.2,5,9\n")


def test_summarize(data):
    s = doseresp.summarize(data)
    mean = sum(r.dosage for r in data.records) / len(data)
    assert s["dosage"]["mean"] == pytest.approx(mean, rel=1e-12)
    assert s["total"]["min"] <= s["total"]["median"] <= s["total"]["max"]


def test_prior_parse():
    assert str(doseresp.Prior("Normal (0, 20)")) == str(doseresp.Prior("normal(0,20)"))
    with pytest.raises(doseresp.PriorError):
        doseresp.Prior("beta(1,1)")


def test_gradient_matches_finite_difference(data):
    model = doseresp.SimpleModel(data)
    q = [-13.0, 9.0]
    g = model.gradient(q)
    h = 1e-5
    for i in range(2):
        up, down = list(q), list(q)
        up[i] += h
        down[i] -= h
        fd = (model.log_density(up) - model.log_density(down)) / (2 * h)
        assert g[i] == pytest.approx(fd, rel=1e-5, abs=1e-5)


def test_proportion_matches_conjugate():
    fit = doseresp.sample(doseresp.ProportionModel(4, 20), seed=3)
    exact = doseresp.beta_posterior(4, 20)
    p = fit["summary"]["parameters"]["p"]
    assert fit["draws"].shape == (4, 2000, 1)
    assert abs(p["mean"] - exact["mean"]) <= 4 * p["mcse"]
    assert p["split_rhat"] <= 1.01


def test_sampling_is_deterministic(data):
    model = doseresp.SimpleModel(data)
    a = doseresp.sample(model, iters=600, seed=9)
    b = doseresp.sample(model, iters=600, seed=9)
    np.testing.assert_array_equal(a["draws"], b["draws"])
    assert a["names"] == ["alpha", "beta"]


def test_diagnostics_on_iid_draws():
    rng = np.random.default_rng(0)
    chains = rng.standard_normal((4, 1000))
    assert 0.99 <= doseresp.split_rhat(chains) <= 1.02
    assert doseresp.effective_sample_size(chains) == pytest.approx(4000, rel=0.15)


def test_hierarchical_model_layout():
    ds = doseresp.synthesize_hierarchical(5, -14.03, 9.39, 0.05, 0.05, 2)
    model = doseresp.HierModel(ds)
    assert model.dim == 14
    assert model.parameter_names[-4:] == ["mu_a", "mu_b", "sigma_a", "sigma_b"]


def test_hill_closure():
    c = doseresp.hill_coefficient(1.0, 1.5)
    assert c == pytest.approx(math.log(81) / math.log(1.5), rel=1e-12)


def test_cli_roundtrip(tmp_path, data):
    csv = tmp_path / "data.csv"
    csv.write_text(doseresp.serialize_trials(data))
    out = tmp_path / "out"
    code, _, err = doseresp.run_cli(
        ["summarize", "--input", str(csv), "--out-dir", str(out)])
    assert code == 0, err
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["exit_code"] == 0
    code, _, _ = doseresp.run_cli(["sample", "--model", "bogus"])
    assert code == 1
