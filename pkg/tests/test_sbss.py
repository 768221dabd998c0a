import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nlsbss.sbss import (
    SCORE_EPS,
    DemixState,
    SbssCanceller,
    assemble_observation,
    demix,
    process_stream,
    reduced_update,
    score,
    scaling_d,
    update,
)
from nlsbss.signal import ShapeError, StftConfig, TimeSignal
from nlsbss.speech import speech_like

FS = 16000


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / math.sqrt(2)


def scalar_step(w, Y, X, eta, eps=SCORE_EPS):
    """Plain-Python order-1 update over a list of bins, no numpy."""
    E = [Y[k] + w[k] * X[k] for k in range(len(Y))]
    nE = math.sqrt(sum(abs(v) ** 2 for v in E) + eps)
    nX = math.sqrt(sum(abs(v) ** 2 for v in X) + eps)
    out = []
    for k in range(len(Y)):
        pe, px = E[k] / nE, X[k] / nX
        C = [[pe * E[k].conjugate(), pe * X[k].conjugate()], [px * E[k].conjugate(), px * X[k].conjugate()]]
        d = max(abs(C[0][0]) + abs(C[0][1]), abs(C[1][0]) + abs(C[1][1]))
        # first row of (I - C/d) W with W = [[1, w], [0, 1]]
        a0 = 1 - C[0][0] / d
        a1 = -C[0][1] / d
        r0 = 1 + eta * a0
        r1 = w[k] + eta * (a0 * w[k] + a1)
        out.append(r1 / r0)
    return out, E


def test_demix_passthrough_at_identity():
    rng = np.random.default_rng(0)
    obs = assemble_observation(crandn(rng, 16), crandn(rng, 3, 16))
    e = demix(DemixState.initial(16, 3), obs)
    assert np.array_equal(e, obs)


def test_demix_zero_input():
    state = DemixState.from_w(np.ones((4, 2)))
    assert np.all(demix(state, np.zeros((4, 3))) == 0)


def test_demix_cancels_exact_linear_echo():
    rng = np.random.default_rng(1)
    h = crandn(rng, 8, 3)
    X = crandn(rng, 3, 8)
    Y = np.sum(h.T * X, axis=0)
    e = demix(DemixState.from_w(-h), assemble_observation(Y, X))
    assert np.abs(e[:, 0]).max() <= 1e-14
    np.testing.assert_array_equal(e[:, 1:], X.T)


def test_demix_shape_errors():
    with pytest.raises(ShapeError):
        demix(DemixState.initial(4, 2), np.zeros((4, 4)))
    with pytest.raises(ShapeError):
        assemble_observation(np.zeros(4), np.zeros((2, 5)))


def test_score_values():
    e = np.zeros((8, 2), complex)
    e[5, 0] = 3 + 4j
    psi = score(e)
    assert psi[5, 0] == pytest.approx((3 + 4j) / 5, abs=1e-12)
    # a silent source gets a zero score instead of 0/0
    assert np.all(psi[:, 1] == 0)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 64), st.integers(1, 4), st.floats(1.0, 1e3), st.integers(0, 2**31 - 1))
def test_score_unit_norm_and_scale_invariant(K, q, a, seed):
    rng = np.random.default_rng(seed)
    e = crandn(rng, K, q)
    psi = score(e)
    assert np.allclose(np.sum(np.abs(psi) ** 2, axis=0), 1.0, atol=1e-9)
    assert np.allclose(score(a * e), psi, atol=1e-9)


def test_silence_is_fixed_point():
    rng = np.random.default_rng(2)
    state = DemixState.from_w(crandn(rng, 6, 3))
    obs = np.zeros((6, 4), complex)
    new, _, _ = update(state, demix(state, obs))
    # equal up to the rounding of the c rescale and renormalisation
    np.testing.assert_allclose(new.W, state.W, rtol=0, atol=1e-15)


def test_update_hand_example():
    # one bin, Y = X = 1: C is a constant matrix, d = 2/sqrt(1+eps), C/d = 1/2
    state = DemixState.initial(1, 1, learning_rate=0.1)
    e = demix(state, np.array([[1.0, 1.0]]))
    new, d, _ = update(state, e)
    assert new.w[0, 0] == pytest.approx(-0.05 / 1.05, abs=1e-15)
    assert d[0] == pytest.approx(2 / math.sqrt(1 + SCORE_EPS), abs=1e-15)


def test_update_matches_scalar_reference():
    rng = np.random.default_rng(3)
    K = 5
    w = crandn(rng, K, 1)
    Y, X = crandn(rng, K), crandn(rng, K)
    state = DemixState.from_w(w, 0.1)
    new, _, _ = update(state, demix(state, assemble_observation(Y, X[None])))
    ref, _ = scalar_step([complex(v) for v in w[:, 0]], [complex(v) for v in Y], [complex(v) for v in X], 0.1)
    assert max(abs(new.w[k, 0] - ref[k]) for k in range(K)) <= 1e-12


@pytest.mark.parametrize("c", [0.5, 1.0, 2.0])
def test_c_does_not_change_state(c):
    rng = np.random.default_rng(4)
    state = DemixState.from_w(crandn(rng, 10, 3))
    e = demix(state, crandn(rng, 10, 4))
    ref, _, _ = update(state, e)
    got, _, cs = update(state, e, c_override=c)
    assert np.all(cs == c)
    assert np.abs(got.W - ref.W).max() <= 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(1, 4), st.floats(1e-3, 1.0), st.integers(0, 2**31 - 1))
def test_reduced_update_equals_full(K, p, eta, seed):
    rng = np.random.default_rng(seed)
    state = DemixState.from_w(crandn(rng, K, p), eta)
    e = demix(state, crandn(rng, K, p + 1))
    psi = score(e)
    full, d, _ = update(state, e, psi)
    red = reduced_update(state.w, e, psi, eta)
    scale = max(1.0, np.abs(full.w).max())
    assert np.abs(full.w - red).max() <= 1e-12 * scale
    corr = psi[:, :, None] * np.conj(e)[:, None, :]
    np.testing.assert_allclose(d, scaling_d(corr), rtol=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 20), st.integers(1, 4), st.integers(0, 2**31 - 1))
def test_constraint_holds_after_update(K, p, seed):
    rng = np.random.default_rng(seed)
    state = DemixState.from_w(crandn(rng, K, p))
    e = demix(state, 10 * crandn(rng, K, p + 1))
    new, _, _ = update(state, e)
    assert np.all(new.W[:, 0, 0] == 1)
    assert np.all(new.W[:, 1:, 0] == 0)
    assert np.all(new.W[:, 1:, 1:] == np.eye(p))


def test_small_step_reduces_echo_residual():
    # noise-free single-talk: a tiny step must move w towards -h
    rng = np.random.default_rng(5)
    K, p = 64, 2
    h = crandn(rng, K, p)
    canc = SbssCanceller(K, p, learning_rate=1e-3)
    err0 = np.linalg.norm(canc.state.w + h)
    for _ in range(50):
        X = crandn(rng, p, K)
        canc.process_frame(np.sum(h.T * X, axis=0), X)
    assert np.linalg.norm(canc.state.w + h) < err0


def test_references_untouched():
    rng = np.random.default_rng(6)
    X = crandn(rng, 3, 12)
    X_copy = X.copy()
    canc = SbssCanceller(12, 3)
    frame = canc.process_frame(crandn(rng, 12), X)
    np.testing.assert_array_equal(X, X_copy)
    np.testing.assert_array_equal(frame.e[:, 1:], X.T)


def test_silent_far_end_returns_microphone():
    mic = speech_like(1.0, FS, seed=3)
    res = process_stream(TimeSignal(np.zeros(len(mic)), FS), mic, stft_cfg=StftConfig(512, 128))
    assert np.max(np.abs(res.estimate.samples - mic.samples)) <= 1e-10
    assert len(res.estimate) == len(mic)


def test_stream_length_and_rate_checks():
    cfg = StftConfig(512, 128)
    mic = TimeSignal(np.zeros(4000), FS)
    with pytest.raises(ValueError, match="differ"):
        process_stream(TimeSignal(np.zeros(3000), FS), mic, stft_cfg=cfg)
    with pytest.raises(ValueError, match="sample-rate"):
        process_stream(TimeSignal(np.zeros(4000), 8000), mic, stft_cfg=cfg)
    # within one frame the far end is padded
    res = process_stream(TimeSignal(np.zeros(3800), FS), mic, stft_cfg=cfg)
    assert len(res.estimate) == 4000


def test_stream_cancels_linear_echo():
    x = speech_like(3.0, FS, seed=0)
    y = TimeSignal(0.5 * np.concatenate([np.zeros(3), x.samples[:-3]]), FS)
    res = process_stream(x, y, order=1, stft_cfg=StftConfig(1024, 256))
    n = len(x)
    tail = slice(n - n // 4, n)
    ratio = np.sum(res.estimate.samples[tail] ** 2) / np.sum(y.samples[tail] ** 2)
    assert ratio < 0.1
    assert cmath.isfinite(complex(res.E.sum()))


def test_invalid_order():
    with pytest.raises(ValueError):
        DemixState.initial(4, 0)
