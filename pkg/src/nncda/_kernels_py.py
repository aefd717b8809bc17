"""NumPy implementations of the pointwise time-step kernels.

Used when the compiled ``_kernels`` extension is unavailable or disabled.
Signatures and output-buffer conventions match the extension exactly.
"""

import numpy as np


def spectral_velocity(psi, k1, k2, uh, vh):
    np.multiply(psi, -1j * k2[None, :], out=uh)
    np.multiply(psi, 1j * k1[:, None], out=vh)


def basdevant_products(u, v, a, b):
    np.multiply(u, v, out=a)
    np.subtract(v * v, u * u, out=b)


def assemble_tendency(ah, bh, kdiff, kprod, mask, out):
    np.add(kdiff * ah, kprod * bh, out=out)
    out[mask == 0] = 0


def if_euler_update(omega, nonlin, forcing, extra, decay, dt, inv_ksq, mask, omega_out, psi_out):
    tend = nonlin + forcing
    if extra is not None:
        tend += extra
    np.multiply(decay, omega + dt * tend, out=omega_out)
    omega_out[mask == 0] = 0
    omega_out[0, 0] = 0
    np.multiply(-inv_ksq, omega_out, out=psi_out)
