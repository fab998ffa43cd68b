"""Counter-based random streams built on the SplitMix64 generator.

Every (question, sample) chain owns an independent stream whose key is

    key(i, m) = mix64(master_seed XOR mix64(i * 2**32 + m))

and the uniform used at round ``t`` is the ``t``-th output of SplitMix64
started from that key::

    u(i, m, t) = (mix64(key + (t + 1) * GAMMA) >> 11) * 2**-53

``mix64`` is the SplitMix64 finalizer (Stafford variant 13).  Because a
draw is a pure function of (master_seed, i, m, t), results never depend
on evaluation order, chunking or thread count.  These constants are
frozen: changing any of them changes every simulated transcript.
"""
import numpy as np

GAMMA = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB
MASK64 = (1 << 64) - 1
MAX_INDEX = 1 << 32

_GAMMA = np.uint64(GAMMA)
_MIX1 = np.uint64(MIX1)
_MIX2 = np.uint64(MIX2)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_INV53 = 2.0**-53


def check_seed(seed):
    """Validate a 64-bit unsigned seed and return it as int."""
    seed = int(seed)
    if not 0 <= seed <= MASK64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


def mix64(z):
    """SplitMix64 finalizer on a Python int (reference implementation)."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * MIX1) & MASK64
    z = ((z ^ (z >> 27)) * MIX2) & MASK64
    return z ^ (z >> 31)


def splitmix64(seed, count):
    """First ``count`` outputs of SplitMix64 seeded with ``seed`` (pure Python)."""
    state = seed & MASK64
    out = []
    for _ in range(count):
        state = (state + GAMMA) & MASK64
        out.append(mix64(state))
    return out


def mix64_array(z):
    """Vectorised :func:`mix64` over a uint64 array (wrapping arithmetic)."""
    z = np.asarray(z, dtype=np.uint64)
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def stream_keys(master_seed, questions, samples):
    """Stream keys, shape ``(len(questions), samples)``, for the given question indices."""
    master_seed = check_seed(master_seed)
    q = np.asarray(questions, dtype=np.uint64)
    if samples > MAX_INDEX or (q.size and int(q.max()) >= MAX_INDEX):
        raise ValueError("question and sample indices must be below 2**32")
    m = np.arange(samples, dtype=np.uint64)
    coord = (q[:, None] << np.uint64(32)) | m[None, :]
    return mix64_array(np.uint64(master_seed) ^ mix64_array(coord))


def uniforms(keys, t):
    """Uniform [0, 1) draws for round ``t`` of every stream in ``keys``."""
    counter = np.uint64((t + 1) * GAMMA & MASK64)
    bits = mix64_array(keys + counter) >> _S11
    return bits.astype(np.float64) * _INV53


def uniform_scalar(key, t):
    """Pure-Python single draw; the reference the vectorised path is tested against."""
    return (mix64((key + (t + 1) * GAMMA) & MASK64) >> 11) * _INV53


def stream_key_scalar(master_seed, i, m):
    return mix64(check_seed(master_seed) ^ mix64((i << 32) | m))
