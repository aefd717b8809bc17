# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled pointwise kernels for the vorticity time step.

Each function mirrors one in ``nncda._kernels_py`` and writes into
caller-owned output buffers.
"""

ctypedef double complex cplx


def spectral_velocity(const cplx[:, ::1] psi, const double[::1] k1, const double[::1] k2,
                      cplx[:, ::1] uh, cplx[:, ::1] vh):
    cdef Py_ssize_t i, j, n0 = psi.shape[0], n1 = psi.shape[1]
    cdef cplx p
    with nogil:
        for i in range(n0):
            for j in range(n1):
                p = psi[i, j]
                # -i k2 psi and i k1 psi
                uh[i, j] = k2[j] * p.imag - k2[j] * p.real * 1j
                vh[i, j] = -k1[i] * p.imag + k1[i] * p.real * 1j


def basdevant_products(const double[:, ::1] u, const double[:, ::1] v,
                       double[:, ::1] a, double[:, ::1] b):
    cdef Py_ssize_t i, j, n0 = u.shape[0], n1 = u.shape[1]
    cdef double x, y
    with nogil:
        for i in range(n0):
            for j in range(n1):
                x = u[i, j]
                y = v[i, j]
                a[i, j] = x * y
                b[i, j] = y * y - x * x


def assemble_tendency(const cplx[:, ::1] ah, const cplx[:, ::1] bh,
                      const double[:, ::1] kdiff, const double[:, ::1] kprod,
                      const unsigned char[:, ::1] mask, cplx[:, ::1] out):
    cdef Py_ssize_t i, j, n0 = ah.shape[0], n1 = ah.shape[1]
    with nogil:
        for i in range(n0):
            for j in range(n1):
                if mask[i, j]:
                    out[i, j] = kdiff[i, j] * ah[i, j] + kprod[i, j] * bh[i, j]
                else:
                    out[i, j] = 0


def if_euler_update(const cplx[:, ::1] omega, const cplx[:, ::1] nonlin,
                    const cplx[:, ::1] forcing, extra_obj,
                    const double[:, ::1] decay, double dt,
                    const double[:, ::1] inv_ksq, const unsigned char[:, ::1] mask,
                    cplx[:, ::1] omega_out, cplx[:, ::1] psi_out):
    cdef Py_ssize_t i, j, n0 = omega.shape[0], n1 = omega.shape[1]
    cdef const cplx[:, ::1] extra
    cdef bint has_extra = extra_obj is not None
    cdef cplx tend, w
    if has_extra:
        extra = extra_obj
    with nogil:
        for i in range(n0):
            for j in range(n1):
                if not mask[i, j]:
                    omega_out[i, j] = 0
                    psi_out[i, j] = 0
                    continue
                tend = nonlin[i, j] + forcing[i, j]
                if has_extra:
                    tend = tend + extra[i, j]
                w = decay[i, j] * (omega[i, j] + dt * tend)
                omega_out[i, j] = w
                psi_out[i, j] = -inv_ksq[i, j] * w
        omega_out[0, 0] = 0
        psi_out[0, 0] = 0
