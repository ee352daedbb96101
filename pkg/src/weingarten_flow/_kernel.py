"""Compiled node loop for the flow's right-hand side.

Mirrors ``surface_geometry`` + ``F_and_grad`` + ``eval_f`` for n <= 2 in a
single pass, which is what makes desk-scale runs with ~10^5 explicit steps
affordable.  The numpy path stays the reference; the test suite compares the
two node by node.
"""

from __future__ import annotations

import math

import numba
import numpy as np

from .ambient import AmbientModel, Base, Warping, orientation
from .curvfunc import CurvatureSpec, Family
from .surface import BaseGrid, FSpec

OK, BAD_X0, NOT_SPACELIKE, NOT_PD, NOT_CONVEX, BAD_F = range(6)

_WARP = {Warping.EUCLIDEAN: 0, Warping.HYPERBOLIC: 1, Warping.DESITTER: 2, Warping.CONSTANT: 3}
_FAM = {Family.GAUSS_ROOT: 0, Family.MEAN: 1, Family.SCALAR_ROOT: 2, Family.QUOTIENT: 3,
        Family.PRODUCT_GK: 4}
_FBASE = {"const": 0, "power": 1, "linear": 2}
# value-safe fast-math: keeps NaN and inf semantics, which the guards rely on
_FM = {"arcp", "contract", "afn", "reassoc"}


class KernelParams:
    """Flattened scalar parameters of one flow problem."""

    def __init__(self, model: AmbientModel, spec: CurvatureSpec, fspec: FSpec, grid: BaseGrid,
                 log_phi: bool, kappa_floor: float, delta_space: float):
        self.n = grid.n
        self.sphere = grid.is_sphere2
        self.h0 = grid.spacing[0]
        self.h1 = grid.spacing[1] if grid.n == 2 else 0.0
        theta = grid.coords[0][:, 0] if self.sphere else np.zeros(grid.shape[0])
        self.sin2 = np.sin(theta) ** 2 if self.sphere else np.ones_like(theta)
        self.dsin2 = 2 * np.sin(theta) * np.cos(theta) if self.sphere else np.zeros_like(theta)
        self.sig = float(model.sigma)
        self.s = float(orientation(model.signature))
        self.warp = _WARP[model.warping]
        self.lo, self.hi = model.interval
        self.fam = _FAM[spec.family]
        self.g_sigma1 = spec.g == "sigma1"
        self.a = float(spec.a)
        self.kmin = max(float(kappa_floor), float(spec.kappa_min))
        self.fbase = _FBASE[fspec.base]
        self.fc, self.fa, self.fp, self.fb, self.beta = fspec.c, fspec.a, fspec.p, fspec.b, fspec.beta
        self.log_phi = bool(log_phi)
        self.delta = float(delta_space)

    def args(self):
        return (self.n, self.sphere, self.h0, self.h1, self.sin2, self.dsin2, self.sig, self.s,
                self.warp, self.lo, self.hi, self.fam, self.g_sigma1, self.a, self.kmin,
                self.fbase, self.fc, self.fa, self.fp, self.fb, self.beta, self.log_phi, self.delta)


@numba.njit(cache=True, fastmath=_FM)
def _warping(warp, x):
    if warp == 0:
        return x, 1.0
    if warp == 1:
        return math.sinh(x), math.cosh(x)
    if warp == 2:
        return math.cosh(x), math.sinh(x)
    return 1.0, 0.0


@numba.njit(cache=True, fastmath=_FM)
def _F(fam, g_sigma1, a, k1, k2, n):
    """Normalized F and the larger of its partial derivatives, for n <= 2."""
    if n == 1:
        return k1, 1.0
    if fam == 1:                               # mean
        return 0.5 * (k1 + k2), 0.5
    if fam == 0 or fam == 2:                   # Gauss root; sqrt(sigma_2) coincides for n = 2
        F = math.sqrt(k1 * k2)
        return F, 0.5 * F / min(k1, k2)
    if fam == 3:                               # sigma_2 / sigma_1
        s1 = k1 + k2
        F = k1 * k2 / s1
        return F, max(k1, k2) ** 2 / (s1 * s1)
    deg = 1.0 + 2.0 * a                        # (G K^a)^(1/deg)
    if g_sigma1:
        Lg = math.log(k1 + k2)
        d1 = 1.0 / (k1 + k2)
        d2 = d1
    else:
        Lg = 0.5 * math.log(k1 * k2)
        d1 = 0.5 / k1
        d2 = 0.5 / k2
    F = math.exp((Lg + a * (math.log(k1) + math.log(k2))) / deg)
    g1 = F * (d1 + a / k1) / deg
    g2 = F * (d2 + a / k2) / deg
    return F, max(g1, g2)


@numba.njit(cache=True, fastmath=_FM)
def _f(fbase, fc, fa, fp, fb, beta, x0, vfac):
    if fbase == 0:
        val = fc
    elif fbase == 1:
        val = fa * abs(x0) ** fp
    else:
        val = fa + fb * x0
    if beta != 0.0:
        val *= vfac ** beta
    return val


@numba.njit(cache=True, fastmath=_FM)
def _log_f(fbase, fc, fa, fp, fb, beta, x0, vfac):
    if fbase == 0:
        val = math.log(fc)
    elif fbase == 1:
        val = math.log(fa) + fp * math.log(abs(x0))
    else:
        val = math.log(fa + fb * x0)
    if beta != 0.0:
        val += beta * math.log(vfac)
    return val


@numba.njit(cache=True, fastmath=_FM)
def evaluate_nodes(u, n, sphere, h0, h1, sin2, dsin2, sig, s, warp, lo, hi, fam, g_sigma1, a,
                   kmin, fbase, fc, fa, fp, fb, beta, log_phi, delta,
                   kappa, v_out, vfac_out, F_out, res_out, coef_out, stats):
    """Fill the per-node outputs; return ``(status, flat node index)``.

    ``stats`` receives min/max residual, min/max kappa, max vfac, max dt coefficient.
    """
    rows, cols = u.shape
    rmin, rmax, kmn, kmx, vmx, cmx = math.inf, -math.inf, math.inf, -math.inf, 0.0, 0.0
    half = cols // 2
    i2h0 = 0.5 / h0
    i2h1 = 0.5 / h1 if h1 > 0 else 0.0
    ih00 = 1.0 / (h0 * h0)
    ih11 = 1.0 / (h1 * h1) if h1 > 0 else 0.0
    i4h01 = 0.25 / (h0 * h1) if h1 > 0 else 0.0
    for r in range(rows):
        for c in range(cols):
            x0 = u[r, c]
            flat = r * cols + c
            if not (x0 > lo and x0 < hi):
                return BAD_X0, flat
            phi, dphi = _warping(warp, x0)
            phi2 = phi * phi
            if n == 1:
                um = u[r, c - 1 if c > 0 else cols - 1]
                upp = u[r, c + 1 if c < cols - 1 else 0]
                u0 = (upp - um) / (2 * h0)
                u00 = (upp - 2 * x0 + um) / (h0 * h0)
                norm2 = u0 * u0 / phi2
                if sig < 0 and norm2 > 1.0 - delta:
                    return NOT_SPACELIKE, flat
                v2 = 1.0 + sig * norm2
                v = math.sqrt(v2)
                g = phi2 + sig * u0 * u0
                if not g > 0:
                    return NOT_PD, flat
                dg = 2 * phi * dphi * u0 + 2 * sig * u00 * u0
                hess = u00 - 0.5 * dg / g * u0
                hh = -s * v * (hess - sig * phi * dphi)
                k1 = hh / g
                k2 = k1
                lam = 1.0 / g
            else:
                cm = c - 1 if c > 0 else cols - 1
                cp = c + 1 if c < cols - 1 else 0
                if r == 0:
                    if sphere:
                        nr, nm, npl = u[0, (c + half) % cols], u[0, (cm + half) % cols], u[0, (cp + half) % cols]
                    else:
                        nr, nm, npl = u[rows - 1, c], u[rows - 1, cm], u[rows - 1, cp]
                else:
                    nr, nm, npl = u[r - 1, c], u[r - 1, cm], u[r - 1, cp]
                if r == rows - 1:
                    if sphere:
                        sr, sm, spl = (u[rows - 1, (c + half) % cols], u[rows - 1, (cm + half) % cols],
                                       u[rows - 1, (cp + half) % cols])
                    else:
                        sr, sm, spl = u[0, c], u[0, cm], u[0, cp]
                else:
                    sr, sm, spl = u[r + 1, c], u[r + 1, cm], u[r + 1, cp]
                w = u[r, cm]
                e = u[r, cp]
                u0 = (sr - nr) * i2h0
                u1 = (e - w) * i2h1
                u00 = (sr - 2 * x0 + nr) * ih00
                u11 = (e - 2 * x0 + w) * ih11
                u01 = (spl - sm - npl + nm) * i4h01
                s11 = sin2[r]
                ds11 = dsin2[r]
                ip2 = 1.0 / phi2
                ip2s = ip2 / s11
                up0 = u0 * ip2
                up1 = u1 * ip2s
                norm2 = up0 * u0 + up1 * u1
                if sig < 0 and norm2 > 1.0 - delta:
                    return NOT_SPACELIKE, flat
                v2 = 1.0 + sig * norm2
                v = math.sqrt(v2)
                g00 = phi2 + sig * u0 * u0
                g01 = sig * u0 * u1
                g11 = phi2 * s11 + sig * u1 * u1
                siv2 = sig / v2
                gi00 = ip2 - siv2 * up0 * up0
                gi01 = -siv2 * up0 * up1
                gi11 = ip2s - siv2 * up1 * up1
                tpd = 2 * phi * dphi
                # d_k g_ij
                d000 = tpd * u0 + 2 * sig * u00 * u0
                d001 = sig * (u00 * u1 + u0 * u01)
                d011 = tpd * u0 * s11 + phi2 * ds11 + 2 * sig * u01 * u1
                d100 = tpd * u1 + 2 * sig * u01 * u0
                d101 = sig * (u01 * u1 + u0 * u11)
                d111 = tpd * u1 * s11 + 2 * sig * u11 * u1
                # first-kind Christoffel symbols Gamma_{l,ij}
                c0_00 = 0.5 * d000
                c1_00 = d001 - 0.5 * d100
                c0_01 = 0.5 * d100
                c1_01 = 0.5 * d011
                c0_11 = d101 - 0.5 * d011
                c1_11 = 0.5 * d111
                corr00 = (gi00 * c0_00 + gi01 * c1_00) * u0 + (gi01 * c0_00 + gi11 * c1_00) * u1
                corr01 = (gi00 * c0_01 + gi01 * c1_01) * u0 + (gi01 * c0_01 + gi11 * c1_01) * u1
                corr11 = (gi00 * c0_11 + gi01 * c1_11) * u0 + (gi01 * c0_11 + gi11 * c1_11) * u1
                gam = -sig * phi * dphi
                pref = -s * v
                hh00 = pref * (u00 - corr00 + gam)
                hh01 = pref * (u01 - corr01)
                hh11 = pref * (u11 - corr11 + gam * s11)
                if not g00 > 0:
                    return NOT_PD, flat
                l11 = math.sqrt(g00)
                il11 = 1.0 / l11
                l21 = g01 * il11
                l22sq = g11 - l21 * l21
                if not l22sq > 0:
                    return NOT_PD, flat
                l22 = math.sqrt(l22sq)
                il22 = 1.0 / l22
                aa = hh00 * il11 * il11
                bb = (hh01 - l21 * hh00 * il11) * il11 * il22
                cc = (hh11 - 2 * l21 * hh01 * il11 + l21 * l21 * aa) * il22 * il22
                mean = 0.5 * (aa + cc)
                dd = 0.5 * (aa - cc)
                rad = math.sqrt(dd * dd + bb * bb)
                k1 = mean - rad
                k2 = mean + rad
                gm = 0.5 * (gi00 + gi11)
                dd = 0.5 * (gi00 - gi11)
                lam = gm + math.sqrt(dd * dd + gi01 * gi01)
            kappa[flat, 0] = k1
            kappa[flat, 1] = k2
            v_out[flat] = v
            vfac = v if sig > 0 else 1.0 / v
            vfac_out[flat] = vfac
            if not k1 > kmin:
                return NOT_CONVEX, flat
            F, fmax = _F(fam, g_sigma1, a, k1, k2, n)
            if fbase == 0 and fc > 0 or fbase == 1 and fa > 0 and x0 != 0.0:
                fpos = True
            else:
                fpos = _f(fbase, fc, fa, fp, fb, beta, x0, vfac) > 0
            if not fpos:
                return BAD_F, flat
            F_out[flat] = F
            if log_phi:
                res_out[flat] = math.log(F) - _log_f(fbase, fc, fa, fp, fb, beta, x0, vfac)
                dphi_F = 1.0 / F
            else:
                res_out[flat] = F - _f(fbase, fc, fa, fp, fb, beta, x0, vfac)
                dphi_F = 1.0
            coef = dphi_F * fmax * v2 * lam
            coef_out[flat] = coef
            res = res_out[flat]
            rmin = min(rmin, res)
            rmax = max(rmax, res)
            kmn = min(kmn, k1)
            kmx = max(kmx, k2)
            vmx = max(vmx, vfac)
            cmx = max(cmx, coef)
    stats[0] = rmin
    stats[1] = rmax
    stats[2] = kmn
    stats[3] = kmx
    stats[4] = vmx
    stats[5] = cmx
    return OK, -1


@numba.njit(cache=True)
def advance(u, v, res, dt, lower, upper, direction, out):
    """``out = u - dt v res`` on flat node arrays; returns confinement and monotonicity
    violations and the u range."""
    conf, mono, umin, umax = 0.0, 0.0, math.inf, -math.inf
    for k in range(u.size):
        new = u[k] - dt * v[k] * res[k]
        out[k] = new
        conf = max(conf, lower[k] - new, new - upper[k])
        mono = max(mono, -direction * (new - u[k]))
        umin = min(umin, new)
        umax = max(umax, new)
    return conf, mono, umin, umax
