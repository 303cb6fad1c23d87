"""Central differences with one Richardson step (fourth order in the step)."""

import numpy as np


def richardson_derivative(f, t, dt):
    """d f / d t at ``t`` for a (vector-valued) function of a scalar time."""
    d_h = (np.asarray(f(t + dt)) - np.asarray(f(t - dt))) / (2.0 * dt)
    h = 0.5 * dt
    d_half = (np.asarray(f(t + h)) - np.asarray(f(t - h))) / (2.0 * h)
    return (4.0 * d_half - d_h) / 3.0


def richardson_second_derivative(f, t, dt):
    def c2(h):
        return (np.asarray(f(t + h)) - 2.0 * np.asarray(f(t)) + np.asarray(f(t - h))) / h**2

    return (4.0 * c2(0.5 * dt) - c2(dt)) / 3.0
