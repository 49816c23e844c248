import numpy as np
import pytest
from scipy.stats import multivariate_normal, norm

from app.aes.models import LeakageModel
from app.dataset.models import Dataset
from app.errors import TemplateError
from app.template.attack import class_statistics, fit_factors, fit_templates, log_likelihood, regularize, ta_classify
from app.template.models import TemplateModel


def identity_templates(n: int) -> TemplateModel:
    covariances = np.eye(n)[None]
    factors, log_dets = fit_factors(covariances)
    return TemplateModel(
        means=np.zeros((1, n)),
        covariances=covariances,
        cholesky=factors,
        log_dets=log_dets,
        priors=np.ones(1),
        regularization=0.0,
        ridge=0.0,
    )


def test_class_statistics():
    mean, covariance = class_statistics(np.array([[0.0, 0.0], [2.0, 2.0]]))
    np.testing.assert_allclose(mean, [1.0, 1.0])
    np.testing.assert_allclose(covariance, [[2.0, 2.0], [2.0, 2.0]])


@pytest.mark.parametrize("n", [1, 3, 10])
def test_log_likelihood_at_the_mean(n):
    assert log_likelihood(identity_templates(n), np.zeros(n), 0) == pytest.approx(-n / 2 * np.log(2 * np.pi))


def test_one_dimensional_log_likelihood():
    assert log_likelihood(identity_templates(1), np.ones(1), 0) == pytest.approx(-0.5 - 0.5 * np.log(2 * np.pi))


def test_log_likelihood_matches_scipy(make_dataset):
    model = fit_templates(make_dataset(200, n=4))
    trace = np.array([0.3, -1.0, 2.0, 0.5])
    expected = multivariate_normal(model.means[1], model.covariances[1]).logpdf(trace)
    assert log_likelihood(model, trace, 1) == pytest.approx(expected)


def test_posterior_agrees_with_bayes_rule(make_dataset):
    model = fit_templates(make_dataset(300, n=1, position=0, signal=2.0))
    for x in (-1.0, 0.7, 3.0):
        joint = model.priors * norm.pdf(x, model.means[:, 0], np.sqrt(model.covariances[:, 0, 0]))
        np.testing.assert_allclose(ta_classify(model, np.array([x])), joint / joint.sum(), rtol=1e-9)


def test_two_gaussian_templates_agree_with_the_bayes_classifier():
    rng = np.random.default_rng(0)
    n, count = 10, 10_000
    means = [np.zeros(n), np.full(n, 0.6)]
    mixing = rng.normal(scale=0.3, size=(n, n))
    covariances = [np.eye(n), mixing @ mixing.T + 0.5 * np.eye(n)]
    truth = [multivariate_normal(mean, covariance) for mean, covariance in zip(means, covariances)]

    traces = np.concatenate([g.rvs(count, random_state=rng) for g in truth])
    labels = np.repeat([0, 1], count)
    profiling = Dataset(
        traces=traces,
        plaintexts=np.zeros((2 * count, 16), dtype=np.uint8),
        keys=np.zeros((2 * count, 16), dtype=np.uint8),
        labels=labels,
        leakage_model=LeakageModel(kind="LSB"),
    )
    model = fit_templates(profiling, regularization=0.0)
    np.testing.assert_allclose(model.priors, [0.5, 0.5])

    fresh = np.concatenate([g.rvs(count // 2, random_state=rng) for g in truth])
    bayes = (truth[1].logpdf(fresh) > truth[0].logpdf(fresh)).astype(int)
    templates = model.predict_proba(fresh).argmax(axis=1)
    assert (templates == bayes).mean() >= 0.99


def test_uniform_priors(make_dataset):
    model = fit_templates(make_dataset(50), priors="uniform")
    np.testing.assert_allclose(model.priors, [0.5, 0.5])


def test_regularization_shrinks_towards_the_diagonal():
    covariance = np.array([[2.0, 1.0], [1.0, 3.0]])
    np.testing.assert_allclose(regularize(covariance, 1.0, 0.0), np.diag([2.0, 3.0]))
    np.testing.assert_allclose(regularize(covariance, 0.5, 0.1), [[2.1, 0.5], [0.5, 3.1]])


def test_a_class_needs_two_traces(make_dataset):
    dataset = make_dataset(40)
    dataset.labels[:] = 0
    dataset.labels[0] = 1
    with pytest.raises(TemplateError, match="class 1"):
        fit_templates(dataset)


def test_singular_covariance_is_reported():
    with pytest.raises(TemplateError, match="regularization"):
        fit_factors(np.zeros((1, 2, 2)), regularization=0.0)
