"""Loss functions for the joint solver.

The squared loss is halved, (y - f)^2 / 2, so its derivative is Lipschitz
with constant 1; reported errors elsewhere use the plain squared error.
Logistic targets are -1/+1 and the derivative bound is 1/4.
"""

from __future__ import annotations

import numpy as np


class SquaredLoss:
    name = "squared"
    curvature = 1.0

    @staticmethod
    def value_mean(y, f):
        r = y - f
        return float(np.mean(r * r)) / 2.0

    @staticmethod
    def deriv(y, f):
        return f - y

    @staticmethod
    def validate_targets(y):
        if not np.all(np.isfinite(y)):
            raise ValueError("squared loss: targets must be finite")


class LogisticLoss:
    name = "logistic"
    curvature = 0.25

    @staticmethod
    def value_mean(y, f):
        # log(1 + exp(-y f)) computed stably for large |f|
        m = -y * f
        return float(np.mean(np.logaddexp(0.0, m)))

    @staticmethod
    def deriv(y, f):
        # -y * sigmoid(-y f)
        return -y / (1.0 + np.exp(y * f))

    @staticmethod
    def validate_targets(y):
        if not np.all(np.isin(y, (-1.0, 1.0))):
            raise ValueError("logistic loss: targets must be -1 or +1")


LOSSES = {"squared": SquaredLoss, "logistic": LogisticLoss}


def get_loss(name: str):
    try:
        return LOSSES[name]
    except KeyError:
        raise ValueError(f"unknown loss {name!r}; expected one of {sorted(LOSSES)}") from None


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=np.float64)))
