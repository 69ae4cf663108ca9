"""Shared fixtures: the three shipped scenario presets and small helpers."""

from __future__ import annotations

import dataclasses
import math
from pathlib import Path

import numpy as np
import pytest

from resonlab.model import AlphaProfile, ChiObservable, ModelParams, PartitionFn

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def left_params(**over) -> ModelParams:
    base = dict(a=0.0, b=1.0, c=0.32, V0=1.0, h=0.1, theta0=0.2j,
                eta=0.155, d0=0.6, T=2.0)
    base.update(over)
    return ModelParams(**base)


def right_params(**over) -> ModelParams:
    base = dict(a=0.0, b=1.0, c=0.7, V0=1.0, h=0.085, theta0=0.2j,
                eta=0.145, d0=0.6, T=1.2)
    base.update(over)
    return ModelParams(**base)


def pulse_params(**over) -> ModelParams:
    base = dict(a=0.0, b=1.0, c=0.3, V0=1.0, h=0.04, theta0=0.02j,
                eta=0.14, d0=3.0, T=3.0)
    base.update(over)
    return ModelParams(**base)


def left_alpha(params: ModelParams, frozen: bool = False) -> AlphaProfile:
    amp = 0.0 if frozen else 2.0 * params.h / (3.0 * math.sqrt(params.V0))
    kind = "constant" if frozen else "smoothstep"
    return AlphaProfile(alpha0=-1.3, amplitude=amp, T=params.T, kind=kind)


def pulse_alpha(params: ModelParams) -> AlphaProfile:
    return AlphaProfile(alpha0=-1.0,
                        amplitude=params.h / (math.sqrt(params.V0) * params.d0),
                        T=params.T, kind="pulse", u_star=0.35, width=0.025)


def window_of(params: ModelParams, alpha: AlphaProfile) -> PartitionFn:
    lam0 = params.V0 - alpha.value(0.0) ** 2 / 4.0
    return PartitionFn(lambda0=lam0, h=params.h, d0=params.d0)


def chi_of(params: ModelParams) -> ChiObservable:
    return ChiObservable(c=params.c, eta=params.eta)


@pytest.fixture(scope="session")
def presets():
    """The three scenario presets as (params, alpha, g, chi) tuples."""
    out = {}
    for name, P, al in [
        ("left", left_params(), left_alpha(left_params())),
        ("right", right_params(),
         AlphaProfile(alpha0=-1.3, amplitude=2.0 * 0.085 / 3.0, T=1.2,
                      kind="smoothstep")),
        ("boundary", pulse_params(), pulse_alpha(pulse_params())),
    ]:
        out[name] = (P, al, window_of(P, al), chi_of(P))
    return out


def simpson_quad(f, lo, hi, n=4001):
    """Plain composite-Simpson oracle used by several tests."""
    if n % 2 == 0:
        n += 1
    x = np.linspace(lo, hi, n)
    w = np.ones(n)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return np.sum(w * f(x)) * (x[1] - x[0]) / 3.0
