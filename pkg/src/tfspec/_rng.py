"""Counter-based random streams.

Every random quantity in the package is drawn from a Philox stream keyed by
``(seed, purpose)``.  Draws are addressable by position, so replicate ``r``
of a Monte Carlo run sees the same numbers no matter how the replicates are
batched or distributed over workers.
"""
import numpy as np

PURPOSES = {"synthesis": 1, "signal": 2, "noise": 3, "trial": 4, "aux": 5}

_WORDS_PER_BLOCK = 4  # Philox.advance() counts 4-word counter blocks
_U53 = 2.0 ** -53


def _key(seed, purpose):
    code = PURPOSES[purpose]
    seed = int(seed) & 0xFFFFFFFFFFFFFFFF
    return np.random.SeedSequence([seed, code]).generate_state(2, np.uint64)


def raw_words(seed, purpose, start, count):
    """Return ``count`` uint64 words of stream ``(seed, purpose)`` from word ``start``.

    ``start`` must be a multiple of 4.
    """
    if start % _WORDS_PER_BLOCK:
        raise ValueError("start must be a multiple of 4")
    bitgen = np.random.Philox(key=_key(seed, purpose))
    if start:
        bitgen.advance(start // _WORDS_PER_BLOCK)
    return bitgen.random_raw(count)


def circular_normals(seed, purpose, start, shape):
    """Unit-variance circular complex normals, two stream words each.

    ``start`` indexes complex draws (not words); ``2 * start`` must be a
    multiple of 4.  Polar Box-Muller: ``|z|^2`` is Exp(1) and the phase
    is uniform, so ``E{z z*} = 1`` and ``E{z z} = 0``.
    """
    shape = tuple(np.atleast_1d(shape))
    n = int(np.prod(shape))
    words = raw_words(seed, purpose, 2 * start, 2 * n)
    u = (words >> np.uint64(11)).astype(np.float64) * _U53
    u1 = 1.0 - u[0::2]  # (0, 1]
    u2 = u[1::2]
    z = np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)
    return z.reshape(shape)


def generator(seed, purpose):
    """A numpy Generator on the ``(seed, purpose)`` stream, for non-addressed draws."""
    return np.random.Generator(np.random.Philox(key=_key(seed, purpose)))
