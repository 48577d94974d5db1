"""Richardson extrapolation over mesh levels (mesh size halves per level)."""
import numpy as np


def richardson(values, ratio=2.0, orders=(2.0, 3.0)):
    """Extrapolate a sequence computed on successively refined meshes.

    ``values[k]`` belongs to mesh size ``h0 / ratio**k``.  Stage ``s`` removes
    an error term of order ``orders[s]``; with three values both stages are
    applied.  Returns ``(estimate, error_estimate)`` where the error estimate
    is the change made by the last stage.
    """
    table = [float(v) for v in values]
    if not table:
        raise ValueError("no values to extrapolate")
    if len(table) == 1:
        return table[0], float("nan")
    last_change = float("nan")
    for stage in range(len(table) - 1):
        p = orders[min(stage, len(orders) - 1)]
        f = ratio**p
        new = [(f * table[k + 1] - table[k]) / (f - 1.0) for k in range(len(table) - 1)]
        last_change = abs(new[-1] - table[-1])
        table = new
    return table[-1], last_change


def observed_order(values, ratio=2.0):
    """Empirical convergence order from three consecutive levels."""
    a, b, c = (float(v) for v in values[-3:])
    if b == c or a == b:
        return float("inf")
    return float(np.log(abs((a - b) / (b - c))) / np.log(ratio))


def error_ratios(values, reference):
    """Successive error ratios |e_{k+1}| / |e_k| against a known limit."""
    err = np.abs(np.asarray(values, dtype=float) - reference)
    return err[1:] / err[:-1]
