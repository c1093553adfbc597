"""
Compiled inner loops for CBOW/Skip-gram negative-sampling training.

All kernels are `nogil` so worker threads run them concurrently against the
shared embedding matrices (lock-free asynchronous SGD). Randomness comes from
a per-worker 64-bit LCG held in a one-element uint64 array, which keeps runs
bit-reproducible for a single worker.

The per-position gradient routines work for float32 and float64 matrices
alike; training uses float32, gradient checks use float64.
"""
import math

import numpy as np
from numba import njit

# formula codes; UNIFORM is plain CBOW averaging
UNIFORM = 0
POWER_SHARED = 1
POWER_SPLIT = 2
EXP_SHARED = 3
EXP_SPLIT = 4

WINDOW_FIXED = 0
WINDOW_RANDOM = 1

LAMBDA_FLOOR = 1e-6

_LCG_MULTIPLIER = np.uint64(25214903917)
_LCG_INCREMENT = np.uint64(11)
_SHIFT = np.uint64(16)


@njit(cache=True, nogil=True)
def next_random(rng):
    rng[0] = rng[0] * _LCG_MULTIPLIER + _LCG_INCREMENT
    return rng[0] >> _SHIFT


@njit(cache=True, nogil=True)
def lfw_lambda(formula, params, offset):
    distance = float(abs(offset))
    if formula == POWER_SHARED:
        return distance ** (-params[0]) + params[1]
    if formula == POWER_SPLIT:
        if offset < 0:
            return distance ** (-params[0]) + params[1]
        return distance ** (-params[2]) + params[3]
    if formula == EXP_SHARED:
        return math.exp(-params[0] * distance) + params[1]
    if formula == EXP_SPLIT:
        if offset < 0:
            return math.exp(-params[0] * distance) + params[1]
        return math.exp(-params[2] * distance) + params[3]
    return 1.0


@njit(cache=True, nogil=True)
def lfw_lambda_grad(formula, params, offset, out):
    """Writes d(lambda)/d(param) for every parameter into `out`."""
    for p in range(out.shape[0]):
        out[p] = 0.0
    if formula == UNIFORM:
        return
    distance = float(abs(offset))
    # split variants use slots (0, 1) left of the center and (2, 3) right of it
    base = 0
    if (formula == POWER_SPLIT or formula == EXP_SPLIT) and offset > 0:
        base = 2
    alpha = params[base]
    if formula == POWER_SHARED or formula == POWER_SPLIT:
        out[base] = -math.log(distance) * distance ** (-alpha)
    else:
        out[base] = -distance * math.exp(-alpha * distance)
    out[base + 1] = 1.0


@njit(cache=True, nogil=True)
def fill_weights(formula, params, ctx_offsets, n_ctx, lam, dlam):
    """
    Clamped weights for the present offsets and their parameter gradients.
    A clamped weight contributes no parameter gradient. Returns Z.
    """
    z = 0.0
    for j in range(n_ctx):
        value = lfw_lambda(formula, params, ctx_offsets[j])
        if value < LAMBDA_FLOOR:
            lam[j] = LAMBDA_FLOOR
            for p in range(dlam.shape[1]):
                dlam[j, p] = 0.0
        else:
            lam[j] = value
            lfw_lambda_grad(formula, params, ctx_offsets[j], dlam[j])
        z += lam[j]
    return z


@njit(cache=True, nogil=True)
def log_sigmoid(x):
    if x >= 0.0:
        return -math.log1p(math.exp(-x))
    return x - math.log1p(math.exp(x))


@njit(cache=True, nogil=True)
def sigmoid(x):
    if x >= 0.0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def score_targets(h, out, targets, n_targets, grad_h, grad_out):
    """
    Negative-sampling logistic loss of hidden vector `h` against targets[0]
    (the true word) and targets[1:] (noise words). Fills dL/dh and the
    per-target dL/d(output row); returns the loss.
    """
    dim = h.shape[0]
    for d in range(dim):
        grad_h[d] = 0.0
    loss = 0.0
    for k in range(n_targets):
        row = targets[k]
        s = 0.0
        for d in range(dim):
            s += h[d] * out[row, d]
        if k == 0:
            loss -= log_sigmoid(s)
            g = sigmoid(s) - 1.0
        else:
            loss -= log_sigmoid(-s)
            g = sigmoid(s)
        for d in range(dim):
            grad_h[d] += g * out[row, d]
            grad_out[k, d] = g * h[d]
    return loss


@njit(cache=True, nogil=True)
def cbow_position(inp, out, ctx_words, ctx_offsets, n_ctx, targets, n_targets,
                  formula, params, lam, dlam, h, grad_h, grad_out, grad_params):
    """
    Loss and gradients for one CBOW position with the weighted context
    average u_C = (1/Z) sum(lambda_j u_j). dL/du_j is (lambda_j / Z) * grad_h;
    dL/dp = (1/Z) sum_j (dlambda_j/dp) grad_h . (u_j - u_C).
    Returns (loss, Z).
    """
    dim = inp.shape[1]
    z = fill_weights(formula, params, ctx_offsets, n_ctx, lam, dlam)
    for d in range(dim):
        h[d] = 0.0
    for j in range(n_ctx):
        w = ctx_words[j]
        for d in range(dim):
            h[d] += lam[j] * inp[w, d]
    for d in range(dim):
        h[d] /= z

    loss = score_targets(h, out, targets, n_targets, grad_h, grad_out)

    for p in range(grad_params.shape[0]):
        grad_params[p] = 0.0
    if formula != UNIFORM:
        for j in range(n_ctx):
            w = ctx_words[j]
            projection = 0.0
            for d in range(dim):
                projection += grad_h[d] * (inp[w, d] - h[d])
            for p in range(grad_params.shape[0]):
                grad_params[p] += dlam[j, p] * projection / z
    return loss, z


@njit(cache=True, nogil=True)
def skipgram_pair(inp, out, center, targets, n_targets, h, grad_h, grad_out):
    """Loss and gradients for predicting targets[0] from `center`."""
    for d in range(inp.shape[1]):
        h[d] = inp[center, d]
    return score_targets(h, out, targets, n_targets, grad_h, grad_out)


@njit(cache=True, nogil=True)
def sgd_row(matrix, row, gradient, scale):
    for d in range(matrix.shape[1]):
        matrix[row, d] -= scale * gradient[d]


@njit(cache=True, nogil=True)
def draw_negatives(table, rng, targets, n_targets):
    """Fills targets[1:] with table draws, redrawing any equal to targets[0]."""
    size = np.uint64(table.shape[0])
    for k in range(1, n_targets):
        while True:
            word = table[np.int64(next_random(rng) % size)]
            if word != targets[0]:
                targets[k] = word
                break


@njit(cache=True, nogil=True)
def _effective_window(window, window_mode, rng):
    if window_mode == WINDOW_RANDOM:
        return window - np.int64(next_random(rng) % np.uint64(window))
    return window


@njit(cache=True, nogil=True)
def train_cbow_chunk(inp, out, tokens, start, stop, table, negative, window, window_mode,
                     formula, params, lr, rng, grad_params_acc):
    """
    Trains CBOW centers tokens[start:stop]; contexts may reach outside the
    range but never past the stream ends. Parameter gradients are summed into
    `grad_params_acc`. Returns (loss_sum, examples).
    """
    n = tokens.shape[0]
    dim = inp.shape[1]
    n_params = grad_params_acc.shape[0]
    ctx_words = np.empty(2 * window, dtype=np.int64)
    ctx_offsets = np.empty(2 * window, dtype=np.int64)
    lam = np.empty(2 * window, dtype=np.float64)
    dlam = np.zeros((2 * window, n_params), dtype=np.float64)
    targets = np.empty(negative + 1, dtype=np.int64)
    h = np.empty(dim, dtype=np.float64)
    grad_h = np.empty(dim, dtype=np.float64)
    grad_out = np.empty((negative + 1, dim), dtype=np.float64)
    grad_params = np.zeros(n_params, dtype=np.float64)

    loss_sum = 0.0
    examples = 0
    for t in range(start, stop):
        span = _effective_window(window, window_mode, rng)
        n_ctx = 0
        for offset in range(-span, span + 1):
            pos = t + offset
            if offset == 0 or pos < 0 or pos >= n:
                continue
            ctx_words[n_ctx] = tokens[pos]
            ctx_offsets[n_ctx] = offset
            n_ctx += 1
        if n_ctx == 0:
            continue

        targets[0] = tokens[t]
        draw_negatives(table, rng, targets, negative + 1)
        loss, z = cbow_position(inp, out, ctx_words, ctx_offsets, n_ctx, targets, negative + 1,
                                formula, params, lam, dlam, h, grad_h, grad_out, grad_params)
        loss_sum += loss
        examples += 1

        for k in range(negative + 1):
            sgd_row(out, targets[k], grad_out[k], lr)
        for j in range(n_ctx):
            sgd_row(inp, ctx_words[j], grad_h, lr * lam[j] / z)
        for p in range(n_params):
            grad_params_acc[p] += grad_params[p]
    return loss_sum, examples


@njit(cache=True, nogil=True)
def train_skipgram_chunk(inp, out, tokens, start, stop, table, negative, window, window_mode, lr, rng):
    """
    Trains Skip-gram centers tokens[start:stop], one (center, context) pair
    per present offset inside the window in effect. Returns (loss_sum, pairs).
    """
    n = tokens.shape[0]
    dim = inp.shape[1]
    targets = np.empty(negative + 1, dtype=np.int64)
    h = np.empty(dim, dtype=np.float64)
    grad_h = np.empty(dim, dtype=np.float64)
    grad_out = np.empty((negative + 1, dim), dtype=np.float64)

    loss_sum = 0.0
    pairs = 0
    for t in range(start, stop):
        span = _effective_window(window, window_mode, rng)
        center = tokens[t]
        for offset in range(-span, span + 1):
            pos = t + offset
            if offset == 0 or pos < 0 or pos >= n:
                continue
            targets[0] = tokens[pos]
            draw_negatives(table, rng, targets, negative + 1)
            loss_sum += skipgram_pair(inp, out, center, targets, negative + 1, h, grad_h, grad_out)
            pairs += 1
            for k in range(negative + 1):
                sgd_row(out, targets[k], grad_out[k], lr)
            sgd_row(inp, center, grad_h, lr)
    return loss_sum, pairs
