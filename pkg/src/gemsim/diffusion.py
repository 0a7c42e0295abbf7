"""Transverse diffusion of the stored excitation.

The coherence obeys the 2D heat equation d(rho)/dt = D lap(rho), whose
Green's function is a Gaussian of variance 2 D t per axis. ``propagate``
applies it as two 1D convolutions with a sampled, truncated (6 sigma) and
renormalized kernel, or in Fourier space. ``fd_oracle`` time-steps the PDE
on a 5-point stencil and exists to check ``propagate`` independently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import fft, ndimage, sparse
from scipy.sparse.linalg import splu

from .core.image import ImageField

TRUNCATE = 6.0


@dataclass(frozen=True)
class DiffusionKernel:
    D: float
    t: float
    pitch: float
    truncate: float = TRUNCATE

    def __post_init__(self):
        if self.D < 0 or self.t < 0:
            raise ValueError(f"D and t must be >= 0 (got D={self.D}, t={self.t})")

    @property
    def sigma(self) -> float:
        return math.sqrt(2.0 * self.D * self.t)

    @property
    def support_radius(self) -> float:
        return self.truncate * self.sigma

    @property
    def radius_px(self) -> int:
        return int(math.ceil(self.support_radius / self.pitch))

    def weights(self) -> np.ndarray:
        """1D kernel on the pixel grid, summing to one."""
        if self.sigma == 0:
            return np.ones(1)
        s = self.sigma / self.pitch
        x = np.arange(-self.radius_px, self.radius_px + 1, dtype=float)
        w = np.exp(-0.5 * (x / s) ** 2)
        return w / w.sum()


def _check(D: float, t: float) -> None:
    if D < 0 or t < 0:
        raise ValueError(f"D and t must be >= 0 (got D={D}, t={t})")


def propagate(
    img: ImageField, D: float, t: float, method: str = "separable", expand: bool = False,
    max_leak: float | None = None,
) -> ImageField:
    """Diffuse ``img`` for time ``t`` with coefficient ``D`` (SI).

    The image is treated as zero outside its borders. By default the
    result is cropped back to the input field of view; ``expand=True``
    returns the full padded result (kernel radius added on every side), on
    which power is conserved exactly. ``max_leak`` rejects runs where more
    than that fraction of the power would leave the field of view.
    """
    _check(D, t)
    kernel = DiffusionKernel(D, t, img.pitch)
    if kernel.sigma == 0:
        return img
    pad = kernel.radius_px
    arr = np.pad(img.values, pad)
    if method == "separable":
        w = kernel.weights()
        out = ndimage.convolve1d(arr, w, axis=0, mode="constant")
        out = ndimage.convolve1d(out, w, axis=1, mode="constant")
    elif method == "spectral":
        out = _spectral(arr, D * t / img.pitch**2)
    else:
        raise ValueError(f"unknown method {method!r}")
    cropped = out[pad:-pad, pad:-pad]
    if max_leak is not None and img.values.sum() > 0:
        leak = 1.0 - cropped.sum() / img.values.sum()
        if leak > max_leak:
            raise ValueError(f"{leak:.2e} of the power leaves the field of view (limit {max_leak:.1e}); "
                             "enlarge the image")
    return ImageField(out if expand else cropped, img.pitch)


def _wavenumbers(shape):
    ky = 2 * np.pi * fft.fftfreq(shape[0])
    kx = 2 * np.pi * fft.rfftfreq(shape[1])
    return ky[:, None] ** 2, kx[None, :] ** 2


def _spectral(arr: np.ndarray, dt_px: float) -> np.ndarray:
    # dt_px = D t / pitch^2; the array is already padded so wrap-around is negligible
    shape = tuple(fft.next_fast_len(n, real=True) for n in arr.shape)
    ky2, kx2 = _wavenumbers(shape)
    F = fft.rfft2(arr, s=shape)
    out = fft.irfft2(F * np.exp(-dt_px * (ky2 + kx2)), s=shape)
    return out[: arr.shape[0], : arr.shape[1]]


class SpectralPropagator:
    """Repeated diffusion of one image for many times, sharing one FFT.

    ``combine`` evaluates a weighted sum of diffused copies with a single
    inverse transform. The Gaussian transfer function factorizes over the
    two axes, so the weighted sum of transfers is one small matrix product.
    """

    def __init__(self, img: ImageField, D: float, t_max: float):
        _check(D, t_max)
        self.img = img
        self.D = D
        self.t_max = t_max
        self.pad = DiffusionKernel(D, t_max, img.pitch).radius_px
        arr = np.pad(img.values, self.pad)
        self._shape = tuple(fft.next_fast_len(n, real=True) for n in arr.shape)
        ky2, kx2 = _wavenumbers(self._shape)
        self._ky2 = ky2[:, 0] / img.pitch**2
        self._kx2 = kx2[0, :] / img.pitch**2
        self._F = fft.rfft2(arr, s=self._shape)

    def transfer(self, t: float) -> np.ndarray:
        return np.exp(-self.D * t * self._ky2)[:, None] * np.exp(-self.D * t * self._kx2)[None, :]

    def combine(self, weights, times) -> ImageField:
        """Image of ``sum_i weights[i] * propagate(img, D, times[i])``."""
        w = np.asarray(weights, dtype=float)
        t = np.asarray(times, dtype=float)
        if np.any(t > self.t_max * (1 + 1e-9)):
            raise ValueError("time beyond the padding this propagator was built for")
        ey = np.exp(-self.D * np.outer(t, self._ky2))
        ex = np.exp(-self.D * np.outer(t, self._kx2))
        spec = (ey * w[:, None]).T @ ex
        out = fft.irfft2(self._F * spec, s=self._shape)
        p = self.pad
        h, w_ = self.img.shape
        return ImageField(out[p: p + h, p: p + w_], self.img.pitch)

    def propagate(self, t: float) -> ImageField:
        return self.combine([1.0], [t])


def laplacian_matrix(shape: tuple[int, int]) -> sparse.csr_matrix:
    """5-point Laplacian (pitch 1) with zero Dirichlet values outside the array."""
    ny, nx = shape
    ly = sparse.diags([1, -2, 1], [-1, 0, 1], shape=(ny, ny))
    lx = sparse.diags([1, -2, 1], [-1, 0, 1], shape=(nx, nx))
    return (sparse.kron(ly, sparse.identity(nx)) + sparse.kron(sparse.identity(ny), lx)).tocsc()


def fd_oracle(
    img: ImageField, D: float, t: float, dt: float | None = None, scheme: str = "explicit",
    pad: int | None = None,
) -> ImageField:
    """Finite-difference solution of the diffusion equation, for cross-checking.

    ``explicit`` is forward Euler and needs ``D dt / pitch^2 <= 0.25``;
    ``implicit`` is backward Euler. The image is zero-padded by ``pad``
    pixels (default: 6 sigma + 2) and cropped back afterwards.
    """
    _check(D, t)
    if D == 0 or t == 0:
        return img
    h2 = img.pitch**2
    if dt is None:
        dt = 0.2 * h2 / D if scheme == "explicit" else 0.5 * h2 / D
    n = max(1, int(math.ceil(t / dt - 1e-12)))
    dt = t / n
    lam = D * dt / h2
    if scheme == "explicit" and lam > 0.25:
        raise ValueError(f"explicit step unstable: D dt / pitch^2 = {lam:.4f} > 0.25")
    if pad is None:
        pad = DiffusionKernel(D, t, img.pitch).radius_px + 2
    u = np.pad(img.values, pad)
    if scheme == "explicit":
        for _ in range(n):
            lap = -4.0 * u
            lap[1:, :] += u[:-1, :]
            lap[:-1, :] += u[1:, :]
            lap[:, 1:] += u[:, :-1]
            lap[:, :-1] += u[:, 1:]
            u = u + lam * lap
    elif scheme == "implicit":
        A = sparse.identity(u.size, format="csc") - lam * laplacian_matrix(u.shape)
        lu = splu(A)
        flat = u.ravel()
        for _ in range(n):
            flat = lu.solve(flat)
        u = flat.reshape(u.shape)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    h, w = img.shape
    return ImageField(u[pad: pad + h, pad: pad + w], img.pitch)


def apply_to_storage(slices, D: float, longitudinal_lifetime: float = math.inf) -> list[ImageField]:
    """Blur each stored transverse image for its own storage time.

    ``slices`` is a sequence of ``(ImageField, storage_time)``. Longitudinal
    diffusion only removes atoms from the echo, so it enters as the uniform
    factor ``exp(-t / longitudinal_lifetime)``.
    """
    out = []
    for i, (img, t) in enumerate(slices):
        if t is None or not np.isfinite(t):
            raise ValueError(f"slice {i} has no storage time")
        blurred = propagate(img, D, t)
        if math.isfinite(longitudinal_lifetime):
            blurred = blurred.scaled(math.exp(-t / longitudinal_lifetime))
        out.append(blurred)
    return out
