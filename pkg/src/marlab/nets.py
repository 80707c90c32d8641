"""Minimal dense-network engine: float64 numpy, hand-derived backprop, Adam.

All parameters of a network live in one flat contiguous vector; each
layer's weight matrix and bias vector are reshaped views into it.  That
keeps optimizer steps, soft target updates, and checkpointing to a
handful of whole-buffer numpy calls, which matters because the training
loop takes thousands of optimizer steps per second on a single core.

Gradients accumulate into a parallel flat buffer until the optimizer
consumes them.  `backward` can also be run with accumulate=False to get
input gradients without touching parameter gradients (used for the
d Q / d action pass of the deterministic policy gradient).
"""

from __future__ import annotations

import numpy as np

ACTIVATIONS = ("relu", "tanh", "identity")


def make_rng(seed):
    """A PCG64 generator seeded deterministically from an integer."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_rngs(seed, n):
    """n independent generators derived from one root seed.

    Substreams are spawned from a single SeedSequence so that consuming
    values from one stream never perturbs another; per-purpose streams
    (env layout, minibatch sampling, per-agent noise, ...) stay aligned
    across code paths that draw different amounts of randomness.
    """
    root = np.random.SeedSequence(seed)
    return [np.random.Generator(np.random.PCG64(ss)) for ss in root.spawn(n)]


def gaussian_noise(rng, dim, scale):
    """Zero-mean gaussian exploration noise, std = scale per component."""
    if scale < 0:
        raise ValueError(f"noise scale must be >= 0, got {scale}")
    if dim <= 0:
        raise ValueError(f"noise dim must be positive, got {dim}")
    # scale == 0 still consumes the same number of stream draws, so noise
    # schedules that hit exactly zero keep rng streams aligned.
    return rng.normal(0.0, scale, size=dim)


class DenseNet:
    """Fully connected net, fixed layer sizes, per-layer activations.

    sizes: (in, h1, ..., out); activations has one entry per weight layer.
    Weights init uniform +-1/sqrt(fan_in), biases zero.
    """

    def __init__(self, sizes, activations, rng=None):
        sizes = tuple(int(s) for s in sizes)
        activations = tuple(activations)
        if len(sizes) < 2:
            raise ValueError("need at least an input and an output size")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if len(activations) != len(sizes) - 1:
            raise ValueError(
                f"{len(sizes) - 1} layers but {len(activations)} activations"
            )
        for a in activations:
            if a not in ACTIVATIONS:
                raise ValueError(f"unknown activation {a!r}, expected one of {ACTIVATIONS}")
        self.sizes = sizes
        self.activations = activations

        n_params = sum((i + 1) * o for i, o in zip(sizes[:-1], sizes[1:]))
        self.params = np.zeros(n_params, dtype=np.float64)
        self.grads = np.zeros(n_params, dtype=np.float64)
        # Weights are stored (fan_in, fan_out) so the forward gemm runs on a
        # contiguous right operand; ws/gws expose the conventional
        # (fan_out, fan_in) orientation as transposed views of the same
        # memory.  _wfs/_gwfs are the storage-order arrays the hot paths use.
        self.ws, self.bs, self.gws, self.gbs = [], [], [], []
        self._wfs, self._gwfs = [], []
        off = 0
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            n_w = fan_in * fan_out
            wf = self.params[off:off + n_w].reshape(fan_in, fan_out)
            gwf = self.grads[off:off + n_w].reshape(fan_in, fan_out)
            self._wfs.append(wf)
            self._gwfs.append(gwf)
            self.ws.append(wf.T)
            self.gws.append(gwf.T)
            off += n_w
            self.bs.append(self.params[off:off + fan_out])
            self.gbs.append(self.grads[off:off + fan_out])
            off += fan_out

        if rng is not None:
            for wf in self._wfs:
                bound = 1.0 / np.sqrt(wf.shape[0])
                wf[:] = rng.uniform(-bound, bound, size=wf.shape)
        self._cache = None

    @property
    def input_dim(self):
        return self.sizes[0]

    @property
    def output_dim(self):
        return self.sizes[-1]

    def clone(self):
        """Deep copy (used to spawn target networks)."""
        other = DenseNet(self.sizes, self.activations)
        other.params[:] = self.params
        return other

    def forward(self, x):
        """Evaluate the net; caches layer inputs/outputs for backward.

        Accepts a single (d,) vector or an (n, d) batch; the return
        matches (vector in, vector out).
        """
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        if single:
            x = x[None, :]
        if x.ndim != 2 or x.shape[1] != self.sizes[0]:
            raise ValueError(f"expected input dim {self.sizes[0]}, got shape {x.shape}")
        inputs, outputs = [], []
        h = x
        for wf, b, act in zip(self._wfs, self.bs, self.activations):
            inputs.append(h)
            z = h @ wf
            z += b
            if act == "relu":
                np.maximum(z, 0.0, out=z)
            elif act == "tanh":
                np.tanh(z, out=z)
            h = z
            outputs.append(h)
        self._cache = (inputs, outputs, single)
        return h[0] if single else h

    def backward(self, upstream, accumulate=True, input_grad=True):
        """Backprop dL/d(output) through the cached forward pass.

        Returns dL/d(input).  With accumulate=True, parameter gradients
        are added into the grad buffer (so several backward passes sum);
        with accumulate=False parameter gradients are left untouched and
        only the input gradient is computed.

        input_grad narrows the returned gradient: True (default) gives
        the full dL/d(input), False skips the first-layer chain matmul
        entirely and returns None, and a slice returns dL/d(input) for
        just those input columns (what the deterministic policy gradient
        needs: only one agent's action block of the critic input).
        """
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        inputs, outputs, single = self._cache
        d = np.asarray(upstream, dtype=np.float64)
        if single and d.ndim == 1:
            d = d[None, :]
        if d.shape != outputs[-1].shape:
            raise ValueError(
                f"upstream shape {d.shape} does not match output shape {outputs[-1].shape}"
            )
        owned = False  # whether d is a scratch array we may overwrite
        for i in range(len(self.ws) - 1, -1, -1):
            act = self.activations[i]
            out = outputs[i]
            if act == "relu":
                mask = out > 0.0
                if owned:
                    np.multiply(d, mask, out=d)
                else:
                    d = d * mask
                    owned = True
            elif act == "tanh":
                deriv = out * out
                np.subtract(1.0, deriv, out=deriv)
                if owned:
                    np.multiply(d, deriv, out=d)
                else:
                    d = d * deriv
                    owned = True
            if accumulate:
                gwf = self._gwfs[i]
                gwf += inputs[i].T @ d
                gb = self.gbs[i]
                gb += d.sum(axis=0)
            if i > 0:
                d = d @ self._wfs[i].T
                owned = True
        if input_grad is False:
            return None
        if input_grad is True:
            d = d @ self._wfs[0].T
        else:
            d = d @ self._wfs[0][input_grad, :].T
        return d[0] if single else d

    def zero_grad(self):
        self.grads.fill(0.0)


class Adam(object):
    """Adam bound to one DenseNet's flat parameter / gradient buffers.

    step() applies the standard bias-corrected update and then zeroes
    the gradient buffer.  Non-finite gradients abort with a diagnostic
    naming the offending layer and the step count.
    """

    def __init__(self, net, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        if lr <= 0:
            raise ValueError(f"learning rate must be positive, got {lr}")
        self.net = net
        self.lr = float(lr)
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.t = 0
        self.m = np.zeros_like(net.params)
        self.v = np.zeros_like(net.params)
        self._scr1 = np.empty_like(net.params)
        self._scr2 = np.empty_like(net.params)

    def _diagnose_nonfinite(self):
        for i, (gw, gb) in enumerate(zip(self.net.gws, self.net.gbs)):
            if not np.all(np.isfinite(gw)):
                return f"layer {i} weights"
            if not np.all(np.isfinite(gb)):
                return f"layer {i} bias"
        return "unknown location"

    def step(self):
        g = self.net.grads
        if not np.all(np.isfinite(g)):
            where = self._diagnose_nonfinite()
            raise FloatingPointError(
                f"non-finite gradient in {where} at optimizer step {self.t + 1}"
            )
        self.t += 1
        m, v, s1, s2 = self.m, self.v, self._scr1, self._scr2
        m *= self.beta1
        np.multiply(g, 1.0 - self.beta1, out=s1)
        m += s1
        v *= self.beta2
        np.multiply(g, g, out=s2)
        s2 *= 1.0 - self.beta2
        v += s2
        # bias corrections folded into scalars:
        #   lr * (m/c1) / (sqrt(v/c2) + eps)
        # = (lr * sqrt(c2)/c1) * m / (sqrt(v) + eps*sqrt(c2))
        sqrt_c2 = np.sqrt(1.0 - self.beta2 ** self.t)
        step_size = self.lr * sqrt_c2 / (1.0 - self.beta1 ** self.t)
        np.sqrt(v, out=s2)
        s2 += self.eps * sqrt_c2
        np.divide(m, s2, out=s1)
        s1 *= step_size
        self.net.params -= s1
        g.fill(0.0)


def soft_update(target, source, tau):
    """target <- tau * source + (1 - tau) * target, elementwise.

    tau = 1 is an exact bitwise copy, tau = 0 leaves the target alone;
    both endpoints are special-cased so no rounding sneaks in.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must be in [0, 1], got {tau}")
    if target.sizes != source.sizes or target.activations != source.activations:
        raise ValueError("target and source architectures differ")
    if tau == 0.0:
        return
    if tau == 1.0:
        np.copyto(target.params, source.params)
        return
    target.params *= 1.0 - tau
    target.params += tau * source.params
