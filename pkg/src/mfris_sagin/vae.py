"""Compression models for states, continuous actions and discrete actions.

GaussianVAE and GumbelVAE follow the scikit-learn transformer contract:
``fit(X)`` trains, ``transform(X)`` returns the deterministic latent code and
``inverse_transform(Z)`` reconstructs. IdentityCompressor is the ratio-1
stand-in used when compression is switched off.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.preprocessing import StandardScaler
from sklearn.utils import check_array, check_random_state
from sklearn.utils.validation import check_is_fitted

from .neural import MLP, Adam


def latent_size(ratio: float, dim: int) -> int:
    return max(1, int(round(ratio * dim)))


def gaussian_kl(mu, log_sigma):
    """KL(N(mu, sigma^2) || N(0, I)) summed over the last axis."""
    s2 = np.exp(2 * log_sigma)
    return 0.5 * np.sum(mu**2 + s2 - 1.0 - 2 * log_sigma, axis=-1)


def nmse(x, x_hat) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.sum((x - x_hat) ** 2) / np.sum(x**2))


def _seed(rs) -> int:
    return int(check_random_state(rs).randint(0, 2**31 - 1))


class IdentityCompressor(BaseEstimator, TransformerMixin):
    """Pass-through used at compression ratio 1."""

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        self.latent_dim_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self)
        return np.asarray(X, dtype=float)

    def inverse_transform(self, Z):
        return np.asarray(Z, dtype=float)

    def fit_dim(self, dim: int):
        self.n_features_in_ = self.latent_dim_ = dim
        return self


class GaussianVAE(BaseEstimator, TransformerMixin):
    """Diagonal-Gaussian VAE with an MSE reconstruction term.

    Inputs are standardised internally; codes and reconstructions are in the
    caller's units.
    """

    def __init__(self, ratio=0.5, hidden=(128,), epochs=40, batch_size=256, lr=1e-3, kl_weight=1e-3,
                 random_state=None):
        self.ratio = ratio
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.kl_weight = kl_weight
        self.random_state = random_state

    def _build(self, d):
        self.latent_dim_ = latent_size(self.ratio, d)
        rng = np.random.default_rng(_seed(self.random_state))
        h = list(self.hidden)
        self.encoder_ = MLP([d, *h, 2 * self.latent_dim_], ["tanh"] * len(h) + ["linear"], rng)
        self.decoder_ = MLP([self.latent_dim_, *h, d], ["tanh"] * len(h) + ["linear"], rng)
        self.rng_ = rng

    def _encode(self, Xs):
        out, cache = self.encoder_.forward(Xs)
        L = self.latent_dim_
        return out[:, :L], out[:, L:], cache

    def loss_and_grads(self, Xs, eps):
        """Per-sample mean loss and gradients for encoder and decoder."""
        B = len(Xs)
        mu, raw, e_cache = self._encode(Xs)
        log_s = np.clip(raw, -8.0, 4.0)
        inside = (raw == log_s)
        sigma = np.exp(log_s)
        z = mu + sigma * eps
        xr, d_cache = self.decoder_.forward(z)
        rec = np.sum((xr - Xs) ** 2) / B
        kl = np.sum(gaussian_kl(mu, log_s)) / B
        d_grads, gz = self.decoder_.backward(d_cache, 2.0 * (xr - Xs) / B)
        g_mu = gz + self.kl_weight * mu / B
        g_ls = (gz * sigma * eps + self.kl_weight * (sigma**2 - 1.0) / B) * inside
        e_grads, _ = self.encoder_.backward(e_cache, np.hstack([g_mu, g_ls]))
        return rec + self.kl_weight * kl, e_grads, d_grads

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        self.scaler_ = StandardScaler().fit(X)
        Xs = self.scaler_.transform(X)
        self._build(X.shape[1])
        opt_e, opt_d = Adam(self.encoder_, self.lr), Adam(self.decoder_, self.lr)
        self.history_ = []
        for _ in range(self.epochs):
            order = self.rng_.permutation(len(Xs))
            tot = 0.0
            for i in range(0, len(Xs), self.batch_size):
                xb = Xs[order[i:i + self.batch_size]]
                loss, ge, gd = self.loss_and_grads(xb, self.rng_.standard_normal((len(xb), self.latent_dim_)))
                opt_e.step(self.encoder_, ge)
                opt_d.step(self.decoder_, gd)
                tot += loss * len(xb)
            self.history_.append(tot / len(Xs))
        return self

    def encode_params(self, X):
        check_is_fitted(self)
        mu, raw, _ = self._encode(self.scaler_.transform(np.atleast_2d(X)))
        return mu, np.clip(raw, -8.0, 4.0)

    def transform(self, X):
        return self.encode_params(X)[0]

    def sample(self, X, rng=None):
        """Reparameterised draw z = mu + sigma * eps."""
        mu, log_s = self.encode_params(X)
        rng = np.random.default_rng(rng)
        return mu + np.exp(log_s) * rng.standard_normal(mu.shape)

    def inverse_transform(self, Z):
        check_is_fitted(self)
        return self.scaler_.inverse_transform(self.decoder_.predict(np.atleast_2d(Z)))

    def loss(self, X, rng=None) -> float:
        check_is_fitted(self)
        Xs = self.scaler_.transform(check_array(X))
        eps = np.random.default_rng(rng).standard_normal((len(Xs), self.latent_dim_))
        return float(self.loss_and_grads(Xs, eps)[0])

    def score_nmse(self, X) -> float:
        return nmse(X, self.inverse_transform(self.transform(X)))

    def nets(self) -> dict:
        return {"encoder": self.encoder_, "decoder": self.decoder_}


def block_softmax(logits, blocks):
    out = np.empty_like(logits)
    off = 0
    for n in blocks:
        z = logits[:, off:off + n]
        e = np.exp(z - z.max(axis=1, keepdims=True))
        out[:, off:off + n] = e / e.sum(axis=1, keepdims=True)
        off += n
    return out


def _block_softmax_grad(p, g, blocks):
    out = np.empty_like(p)
    off = 0
    for n in blocks:
        pb, gb = p[:, off:off + n], g[:, off:off + n]
        out[:, off:off + n] = pb * (gb - np.sum(gb * pb, axis=1, keepdims=True))
        off += n
    return out


def gumbel_softmax(logits, blocks, tau, rng=None, noise=True):
    """Relaxed one-hot sample per block: softmax((logits + g) / tau)."""
    g = 0.0
    if noise:
        u = np.random.default_rng(rng).uniform(1e-12, 1.0, logits.shape)
        g = -np.log(-np.log(u))
    return block_softmax((logits + g) / tau, blocks)


def categorical_kl_uniform(logits, blocks):
    """KL(softmax(logits) || uniform) summed over blocks."""
    q = block_softmax(logits, blocks)
    total = np.zeros(len(logits))
    off = 0
    for n in blocks:
        qb = q[:, off:off + n]
        total += np.sum(qb * (np.log(qb + 1e-300) + np.log(n)), axis=1)
        off += n
    return total


class GumbelVAE(BaseEstimator, TransformerMixin):
    """Discrete-action compressor over one-hot blocks.

    Encoder logits are relaxed per block with Gumbel noise, concatenated and
    linearly projected to the latent size. The decoder predicts one
    categorical distribution per block (cross-entropy loss).
    """

    def __init__(self, blocks=(2,), ratio=0.5, hidden=(128,), epochs=40, batch_size=256, lr=1e-3,
                 kl_weight=1e-3, temperature_start=1.0, temperature_end=0.1, input_skip=0.0,
                 random_state=None):
        self.blocks = blocks
        self.ratio = ratio
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.kl_weight = kl_weight
        self.temperature_start = temperature_start
        self.temperature_end = temperature_end
        self.input_skip = input_skip
        self.random_state = random_state

    def _logits(self, X):
        return self.encoder_.predict(X) + self.input_skip * X

    def _build(self, d):
        self.latent_dim_ = latent_size(self.ratio, d)
        rng = np.random.default_rng(_seed(self.random_state))
        h = list(self.hidden)
        self.encoder_ = MLP([d, *h, d], ["tanh"] * len(h) + ["linear"], rng)
        self.project_ = MLP([d, self.latent_dim_], ["linear"], rng)
        self.decoder_ = MLP([self.latent_dim_, *h, d], ["tanh"] * len(h) + ["linear"], rng)
        self.rng_ = rng
        self.temperature_ = self.temperature_end

    def loss_and_grads(self, X, tau, u_noise):
        B = len(X)
        blocks = list(self.blocks)
        logits, e_cache = self.encoder_.forward(X)
        logits = logits + self.input_skip * X
        g = -np.log(-np.log(u_noise))
        y = block_softmax((logits + g) / tau, blocks)
        z, p_cache = self.project_.forward(y)
        out, d_cache = self.decoder_.forward(z)
        p = block_softmax(out, blocks)
        ce = -np.sum(X * np.log(p + 1e-300)) / B
        kl = np.sum(categorical_kl_uniform(logits, blocks)) / B
        d_grads, gz = self.decoder_.backward(d_cache, (p - X) / B)
        p_grads, gy = self.project_.backward(p_cache, gz)
        g_logits = _block_softmax_grad(y, gy, blocks) / tau
        q = block_softmax(logits, blocks)
        lq = np.log(q + 1e-300)
        for off, n in zip(np.cumsum([0, *blocks[:-1]]), blocks):
            lb = lq[:, off:off + n] + np.log(n)
            qb = q[:, off:off + n]
            g_logits[:, off:off + n] += self.kl_weight / B * qb * (lb - np.sum(qb * lb, axis=1, keepdims=True))
        e_grads, _ = self.encoder_.backward(e_cache, g_logits)
        return ce + self.kl_weight * kl, e_grads, p_grads, d_grads

    def fit(self, X, y=None):
        X = check_array(X)
        if X.shape[1] != sum(self.blocks):
            raise ValueError("one-hot width does not match the block sizes")
        self.n_features_in_ = X.shape[1]
        self._build(X.shape[1])
        opts = [Adam(n, self.lr) for n in (self.encoder_, self.project_, self.decoder_)]
        self.history_ = []
        for ep in range(self.epochs):
            frac = ep / max(self.epochs - 1, 1)
            tau = self.temperature_start * (self.temperature_end / self.temperature_start) ** frac
            order = self.rng_.permutation(len(X))
            tot = 0.0
            for i in range(0, len(X), self.batch_size):
                xb = X[order[i:i + self.batch_size]]
                u = self.rng_.uniform(1e-12, 1.0, xb.shape)
                loss, *grads = self.loss_and_grads(xb, tau, u)
                for o, n, gr in zip(opts, (self.encoder_, self.project_, self.decoder_), grads):
                    o.step(n, gr)
                tot += loss * len(xb)
            self.history_.append(tot / len(X))
        self.temperature_ = self.temperature_end
        return self

    def transform(self, X):
        """Noise-free code at the online temperature."""
        check_is_fitted(self)
        logits = self._logits(np.atleast_2d(X))
        return self.project_.predict(block_softmax(logits / self.temperature_, list(self.blocks)))

    def sample(self, X, rng=None):
        check_is_fitted(self)
        logits = self._logits(np.atleast_2d(X))
        return self.project_.predict(gumbel_softmax(logits, list(self.blocks), self.temperature_, rng))

    def inverse_transform(self, Z):
        """Per-block probabilities."""
        check_is_fitted(self)
        return block_softmax(self.decoder_.predict(np.atleast_2d(Z)), list(self.blocks))

    def block_accuracy(self, X) -> float:
        P = self.inverse_transform(self.transform(X))
        hits, off = [], 0
        for n in self.blocks:
            hits.append(np.argmax(P[:, off:off + n], 1) == np.argmax(X[:, off:off + n], 1))
            off += n
        return float(np.mean(hits))

    def score_ce(self, X) -> float:
        """Mean per-sample cross-entropy of the noise-free reconstruction."""
        P = self.inverse_transform(self.transform(X))
        return float(-np.sum(X * np.log(P + 1e-300)) / len(X))

    def nets(self) -> dict:
        return {"encoder": self.encoder_, "project": self.project_, "decoder": self.decoder_}
