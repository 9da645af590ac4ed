import numpy as np
import pytest

from mfris_sagin.neural import MLP, Adam, Optimizer, clip_grads, load_nets, save_nets, sgd_step, soft_update

from gradcheck import run_all
from oracles import fd_net_grad, flatten_grads, rel_error


def test_identity_and_zero_weight_forward():
    net = MLP([3, 3], ["linear"])
    net.params = [[np.eye(3), np.zeros(3)]]
    x = np.array([[1.0, -2.0, 3.0]])
    assert np.array_equal(net.predict(x), x)
    net.params = [[np.zeros((3, 3)), np.array([1.0, 2.0, 3.0])]]
    assert np.array_equal(net.predict(x), [[1.0, 2.0, 3.0]])


def test_hand_computed_2_2_1():
    net = MLP([2, 2, 1], ["relu", "linear"])
    net.params = [[np.array([[1.0, -1.0], [2.0, 0.5]]), np.array([0.0, 1.0])],
                  [np.array([[3.0], [-2.0]]), np.array([0.5])]]
    # hidden = relu([1+4, -1+1+1]) = [5, 1]; out = 15 - 2 + 0.5
    assert np.isclose(net.predict([[1.0, 2.0]])[0, 0], 13.5)


def test_linear_layer_gradient_closed_form(rng):
    net = MLP([3, 2], ["linear"], rng)
    x = rng.standard_normal((4, 3))
    g = rng.standard_normal((4, 2))
    _, cache = net.forward(x)
    grads, g_in = net.backward(cache, g)
    assert np.allclose(grads[0][0], x.T @ g)
    assert np.allclose(grads[0][1], g.sum(0))
    assert np.allclose(g_in, g @ net.params[0][0].T)


def test_relu_negative_preactivation_blocks_gradient():
    net = MLP([1, 1], ["relu"])
    net.params = [[np.array([[1.0]]), np.array([0.0])]]
    _, cache = net.forward([[-2.0]])
    grads, g_in = net.backward(cache, np.ones((1, 1)))
    assert grads[0][0][0, 0] == 0 and g_in[0, 0] == 0


@pytest.mark.parametrize("act", ["relu", "tanh", "linear", "sigmoid", "softmax"])
def test_mlp_finite_differences(rng, act):
    net = MLP([4, 6, 3], ["tanh", act], rng)
    x = rng.standard_normal((5, 4))
    c = rng.standard_normal((5, 3))
    loss = lambda: float(np.sum(net.predict(x) * c))
    _, cache = net.forward(x)
    grads, _ = net.backward(cache, c)
    assert rel_error(flatten_grads(grads), fd_net_grad(net, loss, 1e-5)) < 1e-4


def test_every_learning_network_passes_gradcheck():
    worst = run_all(n_params=3, seed=11)
    assert set(worst) >= {"dqn.q", "ddpg.critic", "ddpg.actor", "vae.gauss.encoder", "vae.gumbel.project"}
    assert max(worst.values()) < 1e-4, worst


def test_sgd_step_cases(rng):
    net = MLP([2, 1], ["linear"], rng)
    before = net.flat()
    grads = [[np.ones((2, 1)), np.ones(1)]]
    sgd_step(net, grads, 0.0)
    assert np.array_equal(net.flat(), before)
    sgd_step(net, [[np.zeros((2, 1)), np.zeros(1)]], 0.5)
    assert np.array_equal(net.flat(), before)
    x, y = rng.standard_normal((20, 2)), rng.standard_normal((20, 1))
    loss = lambda: float(np.mean((net.predict(x) - y) ** 2))
    l0 = loss()
    out, cache = net.forward(x)
    g, _ = net.backward(cache, 2 * (out - y) / len(x))
    sgd_step(net, g, 0.05)
    assert loss() < l0


def test_soft_update_cases(rng):
    a, b = MLP([3, 2], ["linear"], rng), MLP([3, 2], ["linear"], rng)
    t = a.copy()
    soft_update(t, b, 1.0)
    assert np.array_equal(t.flat(), b.flat())
    t = a.copy()
    soft_update(t, b, 0.0)
    assert np.array_equal(t.flat(), a.flat())
    t = a.copy()
    soft_update(t, b, 0.01)
    d0 = np.linalg.norm(a.flat() - b.flat())
    assert np.isclose(np.linalg.norm(t.flat() - b.flat()), 0.99 * d0)


def test_adam_and_clipping(rng):
    net = MLP([2, 1], ["linear"], rng)
    x, y = rng.standard_normal((50, 2)), rng.standard_normal((50, 1))
    opt = Optimizer(net, 0.05, "adam", grad_clip=1.0)
    assert isinstance(opt.adam, Adam)
    losses = []
    for _ in range(100):
        out, cache = net.forward(x)
        losses.append(float(np.mean((out - y) ** 2)))
        g, _ = net.backward(cache, 2 * (out - y) / len(x))
        opt.step(net, g)
    assert losses[-1] < losses[0]
    big = [[np.full((2, 1), 100.0), np.full(1, 100.0)]]
    assert np.isclose(np.linalg.norm(flatten_grads(clip_grads(big, 1.0))), 1.0)


def test_checkpoint_roundtrip(tmp_path, rng):
    nets = {"actor": MLP([3, 4, 2], ["relu", "tanh"], rng), "critic": MLP([5, 1], ["linear"], rng)}
    save_nets(tmp_path / "a" / "x.ckpt", nets)
    back = load_nets(tmp_path / "a" / "x.ckpt")
    x = rng.standard_normal((2, 3))
    assert np.array_equal(back["actor"].predict(x), nets["actor"].predict(x))
    assert back["critic"].activations == ["linear"]


def test_bad_architecture_raises():
    with pytest.raises(ValueError):
        MLP([2, 2], ["relu", "relu"])
    with pytest.raises(ValueError):
        MLP([2, 2], ["swish"])
