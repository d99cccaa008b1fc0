"""Scikit-learn style reservoir transformers.

A reservoir maps a scalar input sequence in [0, 1] to the matrix of observable
expectations (plus bias column), which a :class:`~dqrc.readout.LinearReadout`
then fits.  Both compose with sklearn pipelines and ``get_params`` based
tooling; all randomness (the coupling draw) happens in ``fit`` from
``coupling_seed``.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .dynamics import CDParams, FnParams, SpinNetworkParams
from .engine import MultiplexConfig, add_bias, feature_labels, make_engine, pauli_observables, run_features


def _validate_inputs(X) -> np.ndarray:
    X = np.asarray(X, dtype=float).ravel()
    if X.size == 0:
        raise ValueError("input sequence is empty")
    if X.min() < 0.0 or X.max() > 1.0:
        raise ValueError("reservoir inputs must lie in [0, 1]")
    return X


class _SpinReservoirBase(BaseEstimator, TransformerMixin):
    def fit(self, X=None, y=None):
        """Draw the coupling matrix and precompute the stepping operators."""
        if self.couplings is not None:
            base = SpinNetworkParams(
                n_qubits=self.n_qubits,
                couplings=np.asarray(self.couplings, dtype=float),
                field_h=self.field_h,
            )
        else:
            base = SpinNetworkParams.random(self.n_qubits, self.field_h, seed=self.coupling_seed)
        self.params_ = self._make_params(base)
        self.observables_ = pauli_observables(self.n_qubits)
        self.engine_ = make_engine([self.params_], self.observables_, self.virtual_nodes, self._substeps())
        self.feature_labels_ = feature_labels(
            self.observables_, MultiplexConfig(virtual_nodes=self.virtual_nodes)
        )
        return self

    def transform(self, X) -> np.ndarray:
        """Run the reservoir over an input sequence; rows are time steps."""
        if not hasattr(self, "engine_"):
            raise NotFittedError("call fit() before transform()")
        X = _validate_inputs(X)
        feats, self.final_state_ = run_features(self.engine_, self.observables_, X)
        return add_bias(feats[0])

    def _substeps(self):
        return None


class CDReservoir(_SpinReservoirBase):
    """Continuously dissipating spin network driven through a transverse field.

    Parameters
    ----------
    n_qubits : network size N (feature count 3N + 3N(N-1)/2 per virtual node).
    field_h : static field and drive scale; the drive amplitude for input s
        is ``field_h * (s + 1)``.
    dt : evolution interval per input.
    gamma : uniform decay rate of every qubit (must be > 0 for the echo
        state property).
    coupling_seed : seed for the uniform[-1, 1] coupling draw in fit().
    couplings : explicit symmetric coupling matrix overriding the draw.
    virtual_nodes : observables are recorded at V equidistant times per
        interval and concatenated.
    substeps : RK4 substep override (default: conservative rate-based rule).
    """

    def __init__(
        self,
        n_qubits: int = 5,
        field_h: float = 1.0,
        dt: float = 1.0,
        gamma: float = 1.0,
        coupling_seed: int = 0,
        couplings=None,
        virtual_nodes: int = 1,
        substeps: int | None = None,
    ):
        self.n_qubits = n_qubits
        self.field_h = field_h
        self.dt = dt
        self.gamma = gamma
        self.coupling_seed = coupling_seed
        self.couplings = couplings
        self.virtual_nodes = virtual_nodes
        self.substeps = substeps

    def _make_params(self, base: SpinNetworkParams) -> CDParams:
        return CDParams(base=base, gamma=self.gamma, dt_step=self.dt)

    def _substeps(self):
        return self.substeps


class FNReservoir(_SpinReservoirBase):
    """Erase-and-write spin network: reset qubit 1 to the input state, then
    evolve unitarily for one interval."""

    def __init__(
        self,
        n_qubits: int = 5,
        field_h: float = 1.0,
        dt: float = 1.0,
        coupling_seed: int = 0,
        couplings=None,
        virtual_nodes: int = 1,
    ):
        self.n_qubits = n_qubits
        self.field_h = field_h
        self.dt = dt
        self.coupling_seed = coupling_seed
        self.couplings = couplings
        self.virtual_nodes = virtual_nodes

    def _make_params(self, base: SpinNetworkParams) -> FnParams:
        return FnParams(base=base, dt_step=self.dt)
