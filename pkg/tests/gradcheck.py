"""Central finite-difference checks for Mlp gradients."""
import numpy as np

from windbid.agent.nn import Mlp

STEP = 1e-5
FLOOR = 1e-7  # absolute scale below which gradients count as zero


def rel_error(a, b):
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), FLOOR)


def numeric_grad(f, arr, h=STEP):
    """d f / d arr by central differences, perturbing ``arr`` in place."""
    g = np.zeros_like(arr)
    it = np.nditer(arr, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = arr[i]
        arr[i] = old + h
        up = f()
        arr[i] = old - h
        down = f()
        arr[i] = old
        g[i] = (up - down) / (2 * h)
    return g


def random_net(rng, n_in, n_out, output):
    depth = int(rng.integers(1, 4))
    hidden = [int(rng.integers(2, 9)) for _ in range(depth)]
    act = rng.choice(["relu", "tanh"])
    return Mlp([n_in, *hidden, n_out], str(act), output, rng)


def check_net(net, x, upstream):
    """Worst relative error over parameters and input of sum(upstream * net(x))."""
    x = np.array(x, float)
    _, cache = net.forward(x, cache=True)
    grads, gx = net.backward(cache, upstream)
    f = lambda: float(np.sum(upstream * net.forward(x)))
    worst = 0.0
    for p, g in zip(net.params, grads):
        worst = max(worst, rel_error(g, numeric_grad(f, p)).max())
    return max(worst, rel_error(gx, numeric_grad(f, x)).max())


def check_chain(actor, critic, obs):
    """Gradient of Q(obs, actor(obs)) w.r.t. actor parameters and obs."""
    obs = np.array(obs, float)
    n_obs = obs.shape[-1]
    a, a_cache = actor.forward(obs, cache=True)
    _, q_cache = critic.forward(np.concatenate([obs, a], axis=-1), cache=True)
    _, dq_in = critic.backward(q_cache, np.ones((obs.shape[0], 1)) if obs.ndim == 2 else np.ones(1))
    grads, g_obs_actor = actor.backward(a_cache, dq_in[..., n_obs:])
    g_obs = dq_in[..., :n_obs] + g_obs_actor
    f = lambda: float(np.sum(critic.forward(np.concatenate([obs, actor.forward(obs)], axis=-1))))
    worst = 0.0
    for p, g in zip(actor.params, grads):
        worst = max(worst, rel_error(g, numeric_grad(f, p)).max())
    return max(worst, rel_error(g_obs, numeric_grad(f, obs)).max())
