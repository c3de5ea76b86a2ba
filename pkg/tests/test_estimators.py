import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from linregions import ActivationPatternEncoder, RegionCounter, count_bruteforce, tighten_bounds
from linregions.model import forward_batch, generate_random_network, save_network


@pytest.fixture
def net():
    return generate_random_network([5, 4], 2, seed=11)


def test_counter_matches_bruteforce(net):
    rc = RegionCounter().fit(net)
    assert rc.count_ == count_bruteforce(net, tighten_bounds(net, "milp")).count
    assert rc.count_ <= rc.bounds_.empirical_ub
    assert not rc.truncated_


def test_counter_accepts_path(net, tmp_path):
    path = tmp_path / "net.json"
    save_network(net, path)
    assert RegionCounter(method="interval").fit(str(path)).count_ == RegionCounter().fit(net).count_


def test_predict_sees_only_enumerated_regions(net):
    rc = RegionCounter().fit(net)
    X = np.random.default_rng(0).uniform(0, 1, size=(500, 2))
    ids = rc.predict(X)
    assert ids.min() >= 0
    assert ids.max() < rc.count_
    bits = forward_batch(net, X)
    for row, i in zip(bits, ids):
        assert rc.patterns_[i].flat() == tuple(int(b) for b in row)


def test_predict_requires_fit():
    with pytest.raises(NotFittedError):
        RegionCounter().predict(np.zeros((1, 2)))


def test_get_params_and_clone():
    rc = RegionCounter(method="lp", eps=1e-5, limit=7)
    assert rc.get_params()["limit"] == 7
    c = clone(rc)
    assert c.get_params() == rc.get_params()


def test_limit_truncates(net):
    rc = RegionCounter(limit=2).fit(net)
    assert rc.count_ == 2
    assert rc.truncated_


def test_encoder(net):
    X = np.random.default_rng(1).uniform(0, 1, size=(50, 2))
    enc = ActivationPatternEncoder(network=net)
    out = enc.fit_transform(X)
    assert out.shape == (50, 9)
    np.testing.assert_array_equal(out, forward_batch(net, X))


def test_encoder_rejects_wrong_width(net):
    enc = ActivationPatternEncoder(network=net).fit()
    with pytest.raises(ValueError):
        enc.transform(np.zeros((3, 5)))
    with pytest.raises(ValueError):
        ActivationPatternEncoder().fit()
