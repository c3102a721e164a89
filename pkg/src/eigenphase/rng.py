"""Counter-based sampling of incoming rays.

Each block of ``BLOCK`` consecutive sample indices draws from its own Philox
stream keyed by ``(seed, stream)`` with the block index in the high counter
word, so sample ``i`` is a pure function of ``(seed, stream, i)``; the total
sample count and evaluation order never change it.
"""

from __future__ import annotations

import numpy as np

BLOCK = 4096

STREAM_VOLUME = 1
STREAM_FIXED_POINT = 2
STREAM_CONTACT = 3


def _block_generator(seed: int, stream: int, block: int) -> np.random.Generator:
    bitgen = np.random.Philox(key=[int(seed) & (2**64 - 1), int(stream)], counter=[0, 0, 0, int(block)])
    return np.random.Generator(bitgen)


def _rays_for_block(gen: np.random.Generator, d: int, eta_max: float) -> tuple[np.ndarray, np.ndarray]:
    omega = gen.standard_normal((BLOCK, d))
    omega /= np.linalg.norm(omega, axis=1, keepdims=True)
    direction = gen.standard_normal((BLOCK, d))
    direction -= np.einsum("ij,ij->i", direction, omega)[:, None] * omega
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    # second pass: near-parallel draws lose orthogonality to cancellation
    direction -= np.einsum("ij,ij->i", direction, omega)[:, None] * omega
    direction /= np.linalg.norm(direction, axis=1, keepdims=True)
    u = gen.random(BLOCK)
    if d == 2:
        # the 1-ball is an interval: signed radius
        radius = eta_max * (2.0 * u - 1.0)
    else:
        radius = eta_max * u ** (1.0 / (d - 1))
    eta = radius[:, None] * direction
    return omega, eta


def sample_rays(d: int, n: int, eta_max: float, seed: int, stream: int = STREAM_VOLUME) -> tuple[np.ndarray, np.ndarray]:
    """Rays uniform in Liouville measure on {|eta| <= eta_max} in T*S^{d-1}.

    omega is uniform on the sphere and eta uniform in the (d-1)-ball of radius
    ``eta_max`` inside omega-perp.
    """
    if n < 0:
        raise ValueError("sample count must be non-negative")
    nblocks = -(-n // BLOCK)
    omegas, etas = [], []
    for b in range(nblocks):
        o, e = _rays_for_block(_block_generator(seed, stream, b), d, eta_max)
        omegas.append(o)
        etas.append(e)
    if not omegas:
        return np.zeros((0, d)), np.zeros((0, d))
    return np.concatenate(omegas)[:n], np.concatenate(etas)[:n]
