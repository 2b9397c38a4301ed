"""Homogeneous coagulation rate kernels and their small-particle regularization.

A kernel K(y, z) gives the rate density at which particles of sizes y and z
merge.  All families here are symmetric, continuous on (0, inf)^2 and
homogeneous of degree gamma in (y, z), with gamma in [0, 1), and satisfy the
growth bound K(y, z) <= C (y^gamma + z^gamma) for a family-specific constant C.

The regularized kernel multiplies K by smooth cutoff factors that switch off
collisions involving very small particles (absolute size below a threshold
lam) as well as collisions where one partner carries less than a fraction
lam/2 of the combined size.  The cutoff profile zeta is monotone, vanishes on
[0, 1/2] and equals 1 on [1, inf), so the regularized kernel vanishes
identically on a neighborhood of the axes and of the degenerate rays.
"""

from dataclasses import dataclass

import numpy as np

_FAMILIES = ("constant", "product", "sum", "zero")
_PROFILES = ("cubic", "quintic")


@dataclass(frozen=True)
class KernelSpec:
    """Parameters selecting one homogeneous symmetric kernel.

    Parameters
    ----------
    family : str
        One of "constant" (K = value, degree 0), "product"
        (K = (y z)^(gamma/2)), "sum" (K = y^alpha z^(gamma-alpha) +
        z^alpha y^(gamma-alpha)) or "zero" (K = 0, pure transport).
    gamma : float
        Homogeneity degree, in [0, 1).  Must be 0 for "constant" and "zero".
    alpha : float
        Exponent split for the "sum" family, in [0, gamma].  Ignored
        otherwise.
    value : float
        Level of the "constant" family, > 0.  Ignored otherwise.
    """

    family: str
    gamma: float = 0.0
    alpha: float = 0.0
    value: float = 1.0

    def __post_init__(self):
        if self.family not in _FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError(f"gamma must lie in [0, 1), got {self.gamma}")
        if self.family in ("constant", "zero") and self.gamma != 0.0:
            raise ValueError(f"{self.family} kernel has degree 0, got gamma={self.gamma}")
        if self.family == "constant" and not self.value > 0.0:
            raise ValueError(f"constant kernel needs value > 0, got {self.value}")
        if self.family == "sum" and not (0.0 <= self.alpha <= self.gamma):
            raise ValueError(f"sum kernel needs 0 <= alpha <= gamma, got alpha={self.alpha}")

    @property
    def growth_constant(self):
        """Smallest convenient C with K(y, z) <= C (y^gamma + z^gamma)."""
        if self.family == "constant":
            return 0.5 * self.value
        if self.family == "product":
            # (yz)^(g/2) <= (y^g + z^g)/2 by the AM-GM inequality.
            return 0.5
        if self.family == "sum":
            # y^a z^(g-a) + z^a y^(g-a) <= y^g + z^g (rearrangement).
            return 1.0
        return 0.0


def constant_kernel(value=1.0):
    """Constant kernel K = value."""
    return KernelSpec(family="constant", value=value)


def product_kernel(gamma):
    """Product kernel K = (y z)^(gamma/2)."""
    return KernelSpec(family="product", gamma=gamma)


def sum_kernel(alpha, gamma):
    """Generalized sum kernel K = y^alpha z^(gamma-alpha) + z^alpha y^(gamma-alpha)."""
    return KernelSpec(family="sum", gamma=gamma, alpha=alpha)


def zero_kernel():
    """Zero kernel; evolution reduces to the rescaling drift."""
    return KernelSpec(family="zero")


@dataclass(frozen=True)
class CutoffParams:
    """Cutoff scale and smoothness of the switching profile.

    Parameters
    ----------
    lam : float
        Cutoff scale, in (0, 1/2).  Collisions with a particle of size
        below lam/2, or where one partner holds less than (roughly) a
        fraction lam/2 of the pair, are switched off.
    profile : str
        "cubic" for the C^1 smoothstep 3u^2 - 2u^3 (default) or "quintic"
        for the C^2 smoothstep 6u^5 - 15u^4 + 10u^3, both with
        u = clip(2s - 1, 0, 1).
    """

    lam: float
    profile: str = "cubic"

    def __post_init__(self):
        if not (0.0 < self.lam < 0.5):
            raise ValueError(f"lam must lie in (0, 1/2), got {self.lam}")
        if self.profile not in _PROFILES:
            raise ValueError(f"unknown cutoff profile {self.profile!r}")


def eval_cutoff(cutoff, s):
    """Evaluate the switching profile zeta at s >= 0.

    zeta is 0 on [0, 1/2], 1 on [1, inf) and strictly increasing in
    between; the plateaus are exact (no rounding fuzz).

    Parameters
    ----------
    cutoff : CutoffParams
    s : float or ndarray
        Nonnegative argument(s).

    Returns
    -------
    float or ndarray
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0.0) or not np.all(np.isfinite(s)):
        raise ValueError("cutoff argument must be finite and >= 0")
    u = np.clip(2.0 * s - 1.0, 0.0, 1.0)
    if cutoff.profile == "cubic":
        z = u * u * (3.0 - 2.0 * u)
    else:
        z = u * u * u * (u * (6.0 * u - 15.0) + 10.0)
    return z if z.ndim else float(z)


def eval_kernel(spec, y, z):
    """Evaluate the bare kernel K(y, z) for positive sizes.

    Parameters
    ----------
    spec : KernelSpec
    y, z : float or ndarray
        Particle sizes, > 0, finite.  Arrays broadcast.

    Returns
    -------
    float or ndarray
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    if np.any(y <= 0.0) or np.any(z <= 0.0):
        raise ValueError("kernel arguments must be > 0")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(z))):
        raise ValueError("kernel arguments must be finite")
    if spec.family == "constant":
        k = np.broadcast_to(np.asarray(spec.value), np.broadcast_shapes(y.shape, z.shape)).copy()
    elif spec.family == "product":
        k = (y * z) ** (0.5 * spec.gamma)
    elif spec.family == "sum":
        a, g = spec.alpha, spec.gamma
        k = y**a * z ** (g - a) + z**a * y ** (g - a)
    else:
        k = np.zeros(np.broadcast_shapes(y.shape, z.shape))
    return k if k.ndim else float(k)


def eval_regularized(spec, cutoff, y, z):
    """Evaluate the regularized kernel K_lam(y, z).

    K_lam(y, z) = K(y, z) * zeta(y/lam) * zeta(z/lam)
                  * zeta(y / (lam (y+z))) * zeta(z / (lam (y+z))).

    Vanishes identically where y <= lam/2, z <= lam/2, or where the
    smaller partner carries at most a fraction lam/2 of y + z; in
    particular the partner ratio y/z is confined to
    [lam/(2-lam), (2-lam)/lam] on the support.

    Parameters
    ----------
    spec : KernelSpec
    cutoff : CutoffParams
    y, z : float or ndarray
        Particle sizes, > 0, finite.  Arrays broadcast.

    Returns
    -------
    float or ndarray
    """
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    k = np.asarray(eval_kernel(spec, y, z))
    if spec.family == "zero":
        return k if k.ndim else float(k)
    lam = cutoff.lam
    tot = y + z
    k = (
        k
        * eval_cutoff(cutoff, y / lam)
        * eval_cutoff(cutoff, z / lam)
        * eval_cutoff(cutoff, y / (lam * tot))
        * eval_cutoff(cutoff, z / (lam * tot))
    )
    return k if k.ndim else float(k)
