"""Central-difference verification of every analytic gradient path.

Each check draws random small instances, evaluates one component's
analytic derivative, and compares against (f(x+h) - f(x-h)) / 2h at
h = 1e-5 in 64-bit.  Errors are reported as |a - b| / max(1, |a|, |b|),
i.e. relative for large gradients and absolute near zero, and instances
are resampled until they sit away from the clamp and relu kinks that make
finite differences meaningless.

The checks deliberately call through the module objects (``objective.``,
``distributions.``) rather than binding functions at import time, so a
deliberately broken derivative injected by a test is picked up.
"""

from __future__ import annotations

import numpy as np

from . import distributions, objective
from .distributions import floor_params
from .network import (
    DenseNet,
    TransformConfig,
    lambda_transform,
    lambda_transform_grad,
    lambda_transform_pair,
)

FD_STEP = 1e-5
TOLERANCE = 1e-6
COMPONENTS = ("forward", "transform", "posterior_jacobians",
              "ml_loss", "reg_loss", "map_loss")

_HARNESS_CLAMP = 8.0  # generous headroom: scores stay far inside [-A, A]


def central_difference(fun, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    """Central-difference gradient of a scalar function, coordinate-wise."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        step = np.zeros_like(x)
        step.flat[i] = h
        grad.flat[i] = (fun(x + step) - fun(x - step)) / (2.0 * h)
    return grad


def rel_error(a, b) -> float:
    """max |a - b| / max(1, |a|, |b|) over all coordinates."""
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    scale = np.maximum(1.0, np.maximum(np.abs(a), np.abs(b)))
    return float(np.max(np.abs(a - b) / scale))


def _random_candidates(rng, c):
    size = int(rng.integers(1, c))
    return tuple(sorted(rng.choice(c, size=size, replace=False).tolist()))


def _random_simplexish(rng, c):
    # strictly positive, need not sum to 1: the losses are checked as
    # functions of free coordinates
    return rng.uniform(0.1, 1.0, size=c)


def _random_z(rng, c):
    return rng.uniform(0.05, 0.95, size=c)


def check_forward(rng, width: int = 16) -> float:
    """Backprop through the bare network against FD on a linear probe."""
    q = int(rng.integers(2, 6))
    c = int(rng.integers(2, 6))
    net, x = _well_conditioned_net(rng, [q, width, c])
    v = rng.normal(size=c)

    def value(flat):
        net.set_flat(flat)
        scores, _ = net.forward(x)
        return float(scores @ v)

    flat0 = net.get_flat()
    scores, cache = net.forward(x)
    analytic = net.flatten_grads(net.backward(cache, v))
    numeric = central_difference(value, flat0)
    net.set_flat(flat0)
    return rel_error(analytic, numeric)


def check_transform(rng) -> float:
    cfg = TransformConfig(a=float(rng.uniform(0.2, 3.0)), b=float(rng.uniform(0.0, 2.0)),
                          gamma=float(rng.uniform(0.5, 2.0)))
    scores = rng.uniform(-3.0, 3.0, size=int(rng.integers(2, 8)))
    analytic = lambda_transform_grad(scores, cfg)
    numeric = central_difference(
        lambda s: float(lambda_transform(s, cfg).sum()), scores)
    return rel_error(analytic, numeric)


def check_posterior_jacobians(rng) -> float:
    c = int(rng.integers(2, 8))
    lam = rng.uniform(0.3, 4.0, size=c)
    o = np.zeros(c)
    o[list(_random_candidates(rng, c))] = 1.0
    jac = distributions.dirichlet_posterior_mean_jacobian(lam, o)
    err = 0.0
    for j in range(c):
        numeric = central_difference(
            lambda l, j=j: float(distributions.dirichlet_posterior_mean(l, o)[j]), lam)
        err = max(err, rel_error(jac[j], numeric))
    alpha = rng.uniform(0.3, 4.0, size=c)
    beta = rng.uniform(0.3, 4.0, size=c)
    dz_da, dz_db = distributions.beta_posterior_mean_grads(alpha, beta, o)
    num_da = np.array([
        central_difference(
            lambda a_j, j=j: float(distributions.beta_posterior_mean(
                a_j, beta[j:j + 1], o[j:j + 1])[0]), alpha[j:j + 1])[0]
        for j in range(c)])
    num_db = np.array([
        central_difference(
            lambda b_j, j=j: float(distributions.beta_posterior_mean(
                alpha[j:j + 1], b_j, o[j:j + 1])[0]), beta[j:j + 1])[0]
        for j in range(c)])
    err = max(err, rel_error(dz_da, num_da), rel_error(dz_db, num_db))
    return err


def check_ml_loss(rng) -> float:
    c = int(rng.integers(2, 9))
    cands = _random_candidates(rng, c)
    theta = _random_simplexish(rng, c)
    z = _random_z(rng, c)
    _, d_theta, d_z = objective.ml_loss(theta, z, cands)
    num_t = central_difference(
        lambda th: objective.ml_loss(th, z, cands)[0], theta)
    num_z = central_difference(
        lambda zz: objective.ml_loss(theta, zz, cands)[0], z)
    return max(rel_error(d_theta, num_t), rel_error(d_z, num_z))


def check_reg_loss(rng) -> float:
    c = int(rng.integers(2, 9))
    theta = _random_simplexish(rng, c)
    z = _random_z(rng, c)
    lam_hat = rng.uniform(0.5, 3.0, size=c)
    a_hat = rng.uniform(0.5, 3.0, size=c)
    b_hat = rng.uniform(0.5, 3.0, size=c)
    _, d_theta, d_z = objective.reg_loss(theta, z, lam_hat, a_hat, b_hat)
    num_t = central_difference(
        lambda th: objective.reg_loss(th, z, lam_hat, a_hat, b_hat)[0], theta)
    num_z = central_difference(
        lambda zz: objective.reg_loss(theta, zz, lam_hat, a_hat, b_hat)[0], z)
    return max(rel_error(d_theta, num_t), rel_error(d_z, num_z))


def _well_conditioned_net(rng, sizes, clamp=_HARNESS_CLAMP, max_tries=200):
    """Net/input pair whose preactivations avoid relu kinks and the clamp."""
    for _ in range(max_tries):
        net = DenseNet(sizes, activation="relu", clamp=clamp,
                       rng=np.random.default_rng(rng.integers(2 ** 63)))
        x = rng.normal(size=sizes[0])
        if _margins_ok(net, x):
            return net, x
    raise RuntimeError("could not draw a well-conditioned instance")


def _margins_ok(net, x, kink_margin=1e-3, score_bound=4.0):
    # score_bound stays far below the harness clamp so the FD step never
    # crosses the clamp, the z clamp, or the parameter floor
    _, cache = net.forward(x)
    for pre in cache["preacts"]:
        if np.min(np.abs(pre)) < kink_margin:
            return False
    return bool(np.max(np.abs(cache["pre_out"])) < score_bound)


def check_map_end_to_end(rng, c: int | None = None, width: int | None = None,
                         max_coords: int = 300) -> float:
    """Full-chain gradients of the MAP loss through both networks vs FD.

    Checks every parameter coordinate of both networks when their total
    count is at most ``max_coords``, otherwise a random subset.
    """
    c = c if c is not None else int(rng.integers(3, 8))
    width = width if width is not None else int(rng.integers(4, 33))
    q = int(rng.integers(2, 6))
    tc = TransformConfig(a=1.0, b=float(rng.uniform(0.0, 0.5)),
                         gamma=float(rng.uniform(0.8, 1.5)))
    net_f, x = _well_conditioned_net(rng, [q, width, c])
    net_g = None
    for _ in range(200):
        cand_g = DenseNet([q, width, 2 * c], activation="relu", clamp=_HARNESS_CLAMP,
                          rng=np.random.default_rng(rng.integers(2 ** 63)))
        if _margins_ok(cand_g, x):
            net_g = cand_g
            break
    if net_g is None:
        raise RuntimeError("could not draw a well-conditioned auxiliary net")
    cands = _random_candidates(rng, c)
    prior = (rng.uniform(0.5, 3.0, size=c), rng.uniform(0.5, 3.0, size=c),
             rng.uniform(0.5, 3.0, size=c))

    def build_input():
        sf, cf = net_f.forward(x)
        sg, cg = net_g.forward(x)
        lam = floor_params(lambda_transform(sf, tc))
        alpha, beta = lambda_transform_pair(sg, tc)
        inp = objective.PerInstanceLossInput.from_live_params(
            lam, floor_params(alpha), floor_params(beta), *prior, cands)
        return inp, sf, cf, sg, cg

    inp, sf, cf, sg, cg = build_input()
    res = objective.map_loss(inp)
    grads_f = net_f.flatten_grads(
        net_f.backward(cf, res.d_lambda * lambda_transform_grad(sf, tc)))
    d_sg = np.concatenate([res.d_alpha, res.d_beta]) * lambda_transform_grad(sg, tc)
    grads_g = net_g.flatten_grads(net_g.backward(cg, d_sg))

    def value_for(net):
        def value(flat):
            net.set_flat(flat)
            return objective.map_loss(build_input()[0]).value
        return value

    err = 0.0
    for net, analytic in ((net_f, grads_f), (net_g, grads_g)):
        flat0 = net.get_flat()
        coords = np.arange(flat0.size)
        if flat0.size > max_coords:
            coords = rng.choice(flat0.size, size=max_coords, replace=False)
        fun = value_for(net)
        for i in coords:
            step = np.zeros_like(flat0)
            step[i] = FD_STEP
            numeric = (fun(flat0 + step) - fun(flat0 - step)) / (2.0 * FD_STEP)
            err = max(err, rel_error(analytic[i], numeric))
        net.set_flat(flat0)
    return err


_CHECKS = {
    "forward": check_forward,
    "transform": check_transform,
    "posterior_jacobians": check_posterior_jacobians,
    "ml_loss": check_ml_loss,
    "reg_loss": check_reg_loss,
    "map_loss": check_map_end_to_end,
}


def run_suite(seed: int = 0, trials: int = 20) -> dict:
    """Max observed error per component over ``trials`` random instances."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    rng = np.random.default_rng([int(seed), 99])
    return {name: max(check(rng) for _ in range(trials))
            for name, check in _CHECKS.items()}
