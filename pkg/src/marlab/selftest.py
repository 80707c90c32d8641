"""Self-contained invariant checks, runnable without a test framework.

Each check re-derives an expected answer by an independent route (finite
differences, explicit scalar loops, closed forms, repeated runs) and
compares the library against it.  `marlab selftest` prints one line per
check and exits nonzero on any failure.
"""

from __future__ import annotations

import math

import numpy as np

from .gaussians import (
    DiagGaussian,
    MarginalEstimate,
    policy_mutual_information,
    running_update,
)
from .maddpg import TrainConfig, Trainer
from .nets import DenseNet, make_rng
from .particles import DT, World, _agent, integrate_physics, step


def check_gradients():
    """Backprop gradients match central finite differences."""
    rng = make_rng(7)
    net = DenseNet((3, 5, 5, 2), ("relu", "relu", "tanh"), rng=rng)
    x = rng.normal(size=(4, 3))
    w = rng.normal(size=(4, 2))  # fixed weights make the loss scalar

    def loss(params):
        saved = net.params.copy()
        net.params[:] = params
        val = float(np.sum(w * net.forward(x)))
        net.params[:] = saved
        return val

    net.forward(x)
    net.backward(w)
    grad = net.grads.copy()
    eps = 1e-6
    worst = 0.0
    fd = np.empty_like(grad)
    base = net.params.copy()
    for k in range(base.size):
        p = base.copy()
        p[k] = base[k] + eps
        hi = loss(p)
        p[k] = base[k] - eps
        lo = loss(p)
        fd[k] = (hi - lo) / (2 * eps)
    denom = np.maximum(np.abs(fd), 1e-8)
    worst = float(np.max(np.abs(grad - fd) / denom))
    return worst < 1e-5, f"max relative gradient error {worst:.2e}"


def check_mutual_information():
    """Vectorized MI estimate equals an explicit scalar re-computation."""
    rng = make_rng(11)
    d, n = 3, 32
    marginal = MarginalEstimate(0.001)
    marginal.gaussian = DiagGaussian(
        rng.normal(size=d), rng.uniform(0.5, 2.0, size=d)
    )
    batch = rng.normal(size=(n, d))
    got = policy_mutual_information(marginal, batch)

    mu_b = [sum(batch[i][k] for i in range(n)) / n for k in range(d)]
    var_b = [
        sum((batch[i][k] - mu_b[k]) ** 2 for i in range(n)) / n for k in range(d)
    ]
    var_b = [max(v, 1e-6) for v in var_b]  # same floor the library applies

    def entropy_sum(mean, var):
        # unnormalized plug-in entropy: sum over points of -p log p
        total = 0.0
        for i in range(n):
            lp = 0.0
            for k in range(d):
                z = batch[i][k] - mean[k]
                lp += -0.5 * (z * z / var[k] + math.log(2 * math.pi * var[k]))
            p = math.exp(lp)
            if p > 0.0:
                total += -p * lp
        return total

    g = marginal.gaussian
    want = entropy_sum(g.mean, g.var) - entropy_sum(mu_b, var_b)
    err = abs(got - want) / max(abs(want), 1e-12)
    return err < 1e-10, f"relative error {err:.2e} (value {got:.6f})"


def check_physics_closed_form():
    """Damped point mass under constant force matches the geometric-series
    closed form."""
    a = _agent(np.zeros(2), 0.05, "blue", "good", collide=False)
    a.velocity = np.array([0.3, -0.1])
    world = World("test", [a], [], max_steps=100)
    force = np.array([0.5, 0.2])
    k = 10
    for _ in range(k):
        integrate_physics(world, [force])
    keep = 1.0 - world.damping
    v0 = np.array([0.3, -0.1])
    # v_t = keep^t v0 + f dt (keep^{t-1} + ... + 1); x_t = dt sum v_i
    v = v0.copy()
    x = np.zeros(2)
    for _ in range(k):
        v = keep * v + force * DT
        x = x + v * DT
    ev = float(np.max(np.abs(world.agents[0].velocity - v)))
    ex = float(np.max(np.abs(world.agents[0].position - x)))
    ok = ev < 1e-12 and ex < 1e-12
    return ok, f"velocity error {ev:.2e}, position error {ex:.2e}"


def check_physics_mirror():
    """Reflecting a two-body collision about the x-axis reflects the
    whole trajectory."""
    def build(flip):
        s = -1.0 if flip else 1.0
        a = _agent(np.array([0.0, s * 0.02]), 0.05, "blue", "good")
        b = _agent(np.array([0.03, s * -0.02]), 0.05, "red", "adversary")
        a.velocity = np.array([0.1, s * 0.2])
        b.velocity = np.array([-0.1, s * 0.1])
        return World("test", [a, b], [], max_steps=100)

    w1, w2 = build(False), build(True)
    f1 = [np.array([0.2, 0.3]), np.array([-0.1, 0.4])]
    f2 = [f * np.array([1.0, -1.0]) for f in f1]
    worst = 0.0
    for _ in range(8):
        integrate_physics(w1, f1)
        integrate_physics(w2, f2)
        for p, q in zip(w1.agents, w2.agents):
            worst = max(
                worst,
                float(np.max(np.abs(p.position * np.array([1.0, -1.0]) - q.position))),
            )
    return worst < 1e-12, f"max mirrored position error {worst:.2e}"


def check_determinism():
    """Same seed and config give bit-identical parameters and logs."""
    cfg = TrainConfig(
        episodes=3, max_episode_length=8, batch_size=16, warmup_factor=1
    )
    runs = []
    for _ in range(2):
        tr = Trainer(cfg, "keep_away", betas=1e-3, seed=5)
        logs = tr.run()
        runs.append((tr, logs))
    (t1, l1), (t2, l2) = runs
    params_equal = all(
        np.array_equal(a.actor.params, b.actor.params)
        and np.array_equal(a.critic.params, b.critic.params)
        for a, b in zip(t1.agents, t2.agents)
    )
    logs_equal = all(
        np.array_equal(x.rewards, y.rewards) and np.array_equal(x.mi, y.mi)
        for x, y in zip(l1, l2)
    )
    return params_equal and logs_equal, (
        f"params identical: {params_equal}, logs identical: {logs_equal}"
    )


def check_running_update_unroll():
    """Recursive marginal update equals its direct unrolling."""
    rng = make_rng(3)
    a = 0.001
    est = MarginalEstimate(a)
    pairs = [
        (rng.normal(size=2), rng.uniform(0.5, 1.5, size=2)) for _ in range(3)
    ]
    for mu, var in pairs:
        running_update(est, mu, var)
    mu_hat, var_hat = pairs[0]
    for mu, var in pairs[1:]:
        mu_new = a * mu + (1 - a) * mu_hat
        var_hat = (
            a * var + (1 - a) * var_hat
            + (a * mu * mu + (1 - a) * mu_hat * mu_hat)
            - mu_new * mu_new
        )
        mu_hat = mu_new
    err = max(
        float(np.max(np.abs(est.gaussian.mean - mu_hat))),
        float(np.max(np.abs(est.gaussian.var - var_hat))),
    )
    return err < 1e-12, f"max unroll deviation {err:.2e}"


CHECKS = [
    ("gradient-check", check_gradients),
    ("mutual-information-scalar-oracle", check_mutual_information),
    ("physics-closed-form", check_physics_closed_form),
    ("physics-mirror-symmetry", check_physics_mirror),
    ("full-run-determinism", check_determinism),
    ("marginal-recursion-unroll", check_running_update_unroll),
]


def run_selftest(out=None):
    """Run every check, print one line each; True iff all passed."""
    import sys

    out = out if out is not None else sys.stdout
    all_ok = True
    for name, fn in CHECKS:
        ok, detail = fn()
        all_ok &= ok
        print(f"{'ok  ' if ok else 'FAIL'} {name}: {detail}", file=out)
    return all_ok
