import numpy as np

from hydrofix.net.ops import (conv2d, conv2d_backward, relu, relu_backward,
                              sigmoid, upsample2, upsample2_backward)


def conv_oracle(x, kernel, bias, stride):
    """Direct nested-loop convolution with zero same-padding."""
    n, h, w, c = x.shape
    out_ch, _, kh, kw = kernel.shape
    pad = (kh - 1) // 2
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (w + 2 * pad - kw) // stride + 1
    out = np.zeros((n, ho, wo, out_ch))
    for b in range(n):
        for i in range(ho):
            for j in range(wo):
                for o in range(out_ch):
                    acc = 0.0
                    for di in range(kh):
                        for dj in range(kw):
                            r = i * stride + di - pad
                            cc = j * stride + dj - pad
                            if 0 <= r < h and 0 <= cc < w:
                                acc += (kernel[o, :, di, dj] * x[b, r, cc, :]).sum()
                    out[b, i, j, o] = acc + bias[o]
    return out


def test_conv_matches_oracle_all_configs(rng_np):
    for stride in (1, 2):
        for k in (1, 3):
            if k == 1 and stride == 2:
                continue
            x = rng_np.normal(size=(2, 6, 8, 3))
            kernel = rng_np.normal(size=(4, 3, k, k))
            bias = rng_np.normal(size=4)
            got = conv2d(x, kernel, bias, stride=stride)
            want = conv_oracle(x, kernel, bias, stride)
            assert np.allclose(got, want, atol=1e-12), (stride, k)


def test_conv_backward_matches_finite_differences(rng_np):
    x = rng_np.normal(size=(1, 6, 6, 2))
    kernel = rng_np.normal(size=(3, 2, 3, 3))
    bias = rng_np.normal(size=3)
    for stride in (1, 2):
        out = conv2d(x, kernel, bias, stride=stride)
        dy = rng_np.normal(size=out.shape)
        dx, dk, db = conv2d_backward(dy, x, kernel, stride=stride)
        h = 1e-6

        def loss(xx, kk, bb):
            return (conv2d(xx, kk, bb, stride=stride) * dy).sum()

        for arr, grad in ((x, dx), (kernel, dk), (bias, db)):
            flat = arr.ravel()
            for idx in range(0, flat.size, max(1, flat.size // 7)):
                orig = flat[idx]
                flat[idx] = orig + h
                up = loss(x, kernel, bias)
                flat[idx] = orig - h
                down = loss(x, kernel, bias)
                flat[idx] = orig
                fd = (up - down) / (2 * h)
                assert abs(fd - grad.ravel()[idx]) < 1e-5 * max(1.0, abs(fd))


def test_relu_and_backward():
    x = np.array([-2.0, 0.0, 3.0])
    out = relu(x)
    assert out.tolist() == [0.0, 0.0, 3.0]
    assert relu_backward(np.ones(3), out).tolist() == [0.0, 0.0, 1.0]


def test_sigmoid_stable_extremes():
    x = np.array([-500.0, 0.0, 500.0])
    s = sigmoid(x)
    assert s[0] >= 0.0 and s[2] <= 1.0
    assert s[1] == 0.5
    assert np.isfinite(s).all()


def test_upsample_and_adjoint(rng_np):
    x = rng_np.normal(size=(2, 3, 4, 5))
    up = upsample2(x)
    assert up.shape == (2, 6, 8, 5)
    assert (up[:, ::2, ::2, :] == x).all()
    # adjoint identity: <up(x), y> == <x, up_backward(y)>
    y = rng_np.normal(size=up.shape)
    lhs = (up * y).sum()
    rhs = (x * upsample2_backward(y)).sum()
    assert np.isclose(lhs, rhs)
