"""scikit-learn style wrappers.

The analysis consumes a network rather than a data matrix, so
:class:`RegionCounter` takes the network in ``fit`` and only uses data in
``predict`` (which maps inputs to region ids). :class:`ActivationPatternEncoder`
is a plain transformer from inputs to flattened activation bits.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .bounds import DEFAULT_EXACT_K_CAP, upper_bounds
from .counting import count_exact
from .formulation import DEFAULT_EPS, tighten_bounds
from .model import NetworkModel, forward_batch, load_network, maps


def _as_network(network) -> NetworkModel:
    if isinstance(network, NetworkModel):
        return network
    return load_network(network)


def _check_inputs(net: NetworkModel, X) -> np.ndarray:
    X = check_array(X, dtype=float)
    if X.shape[1] != net.input_dim:
        raise ValueError(f"X has {X.shape[1]} features, network expects {net.input_dim}")
    return X


class RegionCounter(BaseEstimator):
    """Tighten, count exactly and bound the regions of one network.

    Fitted attributes: ``unit_bounds_``, ``count_``, ``eta_``, ``patterns_``
    (None when too many to keep), ``bounds_`` and ``truncated_``.
    """

    def __init__(self, method: str = "milp", eps: float = DEFAULT_EPS,
                 valid_inequalities: bool = False, full_dim: bool = False,
                 limit: int | None = None, time_limit: float | None = None,
                 exact_k_cap: int = DEFAULT_EXACT_K_CAP):
        self.method = method
        self.eps = eps
        self.valid_inequalities = valid_inequalities
        self.full_dim = full_dim
        self.limit = limit
        self.time_limit = time_limit
        self.exact_k_cap = exact_k_cap

    def fit(self, network, y=None):
        net = _as_network(network)
        self.network_ = net
        self.unit_bounds_ = tighten_bounds(net, self.method, time_limit=self.time_limit)
        res = count_exact(net, self.unit_bounds_, self.eps, self.limit,
                          with_valid_inequalities=self.valid_inequalities,
                          full_dim=self.full_dim, time_limit=self.time_limit)
        self.count_ = res.count
        self.truncated_ = res.truncated
        self.eta_ = maps(res.count) if res.count else float("-inf")
        self.patterns_ = res.patterns
        self.bounds_ = upper_bounds(net, self.unit_bounds_, self.exact_k_cap)
        self._index = (None if res.patterns is None
                       else {p.flat(): n for n, p in enumerate(res.patterns)})
        return self

    def predict(self, X) -> np.ndarray:
        """Index into ``patterns_`` of each input's region; -1 if not enumerated."""
        check_is_fitted(self, "count_")
        if self._index is None:
            raise ValueError("patterns were not retained; refit with a smaller network or limit")
        X = _check_inputs(self.network_, X)
        bits = forward_batch(self.network_, X)
        return np.array([self._index.get(tuple(int(b) for b in row), -1) for row in bits],
                        dtype=int)


class ActivationPatternEncoder(TransformerMixin, BaseEstimator):
    """Map inputs to their flattened 0/1 activation pattern."""

    def __init__(self, network=None):
        self.network = network

    def fit(self, X=None, y=None):
        if self.network is None:
            raise ValueError("network must be set")
        self.network_ = _as_network(self.network)
        if X is not None:
            _check_inputs(self.network_, X)
        self.n_features_in_ = self.network_.input_dim
        self.n_features_out_ = self.network_.n_units
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "network_")
        return forward_batch(self.network_, _check_inputs(self.network_, X))
