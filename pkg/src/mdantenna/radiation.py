"""Dipole emission inside planar layered media.

The emitter is an incoherent mixture of an axial (z) and two in-plane
(x, y) dipole components; within one component the s and p far-field
channels add coherently. Every power in this module is normalized to the
power the same dipole component would radiate in the unbounded host
medium, so budget entries are fractions per emitted photon.

Upward/downward partial waves in the host layer are summed as a cavity
geometric series: with a_up = r_up e^{2i kz (d-z)} and
a_dn = r_dn e^{2i kz z}, every exit amplitude carries a factor
1 / (1 - a_up a_dn).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Callable, Literal

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import (AccuracyWarning, GeometryError, InvalidApertureError,
                     OutOfDomainError)
from .stack import LayerStack, OpticalMaterial, _kz, _substack_rt

HalfSpace = Literal["down", "up"]
Component = Literal["z", "x", "y"]

_COMPONENTS: tuple[Component, ...] = ("z", "x", "y")
_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}

# relative tail mass of the dissipation integral above which the truncated
# spatial-frequency range is reported as non-converged
_TAIL_LIMIT = 1e-6


def _gl(n: int) -> tuple[np.ndarray, np.ndarray]:
    if n not in _GL_CACHE:
        _GL_CACHE[n] = leggauss(n)
    return _GL_CACHE[n]


def _gauss(f: Callable, a: float, b: float, n: int) -> float:
    x, w = _gl(n)
    xm = 0.5 * (b + a) + 0.5 * (b - a) * x
    return 0.5 * (b - a) * float(np.sum(w * f(xm)))


def _panel(f: Callable, a: float, b: float, tol: float, depth: int = 0) -> float:
    """Adaptive Gauss-Legendre panel; bisects until two node counts agree."""
    if b <= a:
        return 0.0
    coarse = _gauss(f, a, b, 24)
    fine = _gauss(f, a, b, 48)
    if abs(fine - coarse) <= max(tol, 1e-14 * abs(fine)) or depth >= 28:
        return fine
    mid = 0.5 * (a + b)
    return _panel(f, a, mid, tol / 2, depth + 1) + _panel(f, mid, b, tol / 2, depth + 1)


def _integrate(f: Callable, edges: np.ndarray, tol: float) -> float:
    edges = np.unique(np.asarray(edges, dtype=float))
    per = tol / max(len(edges) - 1, 1)
    return sum(_panel(f, a, b, per) for a, b in zip(edges[:-1], edges[1:]))


@dataclass(frozen=True)
class DipoleEmitter:
    """Point dipole inside a stack layer.

    weights = (w_axial, w_x, w_y) are the relative contributions of each
    incoherent dipole component to the total emitted power; they must be
    non-negative and sum to 1. z_offset is measured in nm from the bottom
    boundary of the host layer.
    """

    host_layer: int
    z_offset: float
    wavelength_vac: float
    weights: tuple[float, float, float]

    def __post_init__(self):
        if not self.wavelength_vac > 0:
            raise ValueError("wavelength must be positive")
        if self.z_offset < 0:
            raise ValueError("z_offset must be non-negative")
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (3,):
            raise ValueError("weights must be a (w_axial, w_x, w_y) triple")
        if np.any(w < 0):
            raise ValueError(f"weights must be non-negative, got {self.weights}")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights must sum to 1, got sum {w.sum()!r}")
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @property
    def k0(self) -> float:
        return 2.0 * np.pi / self.wavelength_vac


def _check_geometry(stack: LayerStack, emitter: DipoleEmitter):
    h = emitter.host_layer
    if not 1 <= h <= len(stack) - 2:
        raise GeometryError(f"host layer {h} is not an interior layer")
    host = stack.layers[h]
    if not host.material.lossless:
        raise GeometryError("emitter host layer must be lossless")
    if emitter.z_offset > host.thickness:
        raise GeometryError(
            f"z_offset {emitter.z_offset} nm exceeds host thickness {host.thickness} nm")


def _cavity(stack: LayerStack, emitter: DipoleEmitter, u0, pol):
    """(a_up, a_dn, t_up, t_dn, kz_h, 1 - a_up*a_dn) at vacuum-normalized u0."""
    h = emitter.host_layer
    n_h = stack.layers[h].material.n
    d_h = stack.layers[h].thickness
    k0 = emitter.k0
    r_up, t_up = _substack_rt(stack, k0, u0, pol, h, "up")
    r_dn, t_dn = _substack_rt(stack, k0, u0, pol, h - 1, "down")
    kz = _kz(n_h, k0, u0)
    a_up = r_up * np.exp(2j * kz * (d_h - emitter.z_offset))
    a_dn = r_dn * np.exp(2j * kz * emitter.z_offset)
    return a_up, a_dn, t_up, t_dn, kz, 1.0 - a_up * a_dn


def _exit_layer(stack: LayerStack, half_space: HalfSpace) -> int:
    if half_space == "down":
        return 0
    if half_space == "up":
        return len(stack) - 1
    raise ValueError(f"half_space must be 'down' or 'up', got {half_space!r}")


def _radial_fields(stack: LayerStack, emitter: DipoleEmitter, theta,
                   half_space: HalfSpace) -> np.ndarray:
    """Azimuth-free far-field amplitude profiles, stacked as rows
    (F_s, F_pperp, F_pz), sampled at polar angles theta of the exit medium.

    |F|^2 is per-steradian power in bulk-host-dipole units; the three rows
    carry the s channel of in-plane dipoles, the p channel of in-plane
    dipoles and the p channel of the axial dipole.
    """
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0) or np.any(theta > np.pi / 2 + 1e-12):
        raise OutOfDomainError("polar angle must lie in [0, pi/2]")
    _check_geometry(stack, emitter)
    exit_mat = stack.layers[_exit_layer(stack, half_space)].material
    if not exit_mat.lossless:
        # absorbing half-space: no propagating far field
        return np.zeros((3,) + theta.shape, dtype=complex)
    n_exit = exit_mat.n
    h = emitter.host_layer
    n_h = stack.layers[h].material.n
    k0 = emitter.k0

    u0 = n_exit * np.sin(theta)
    # keep clear of the host branch point and of grazing exit
    u0 = np.where(np.abs(u0 - n_h) < 1e-9, u0 - 1e-9, u0)
    u0 = np.minimum(u0, n_exit * (1.0 - 1e-12))
    # exit cosine from the (nudged) in-plane wavevector, so the flux
    # Jacobian stays paired with kz at grazing angles
    cos_exit = np.sqrt(np.maximum(1.0 - (u0 / n_exit) ** 2, 0.0))

    a_up_s, a_dn_s, t_up_s, t_dn_s, kz, den_s = _cavity(stack, emitter, u0, "s")
    a_up_p, a_dn_p, t_up_p, t_dn_p, _, den_p = _cavity(stack, emitter, u0, "p")

    u_h = u0 / n_h
    ell_h = kz / (n_h * k0)
    pref = np.sqrt(3.0 / (8.0 * np.pi * n_h)) * np.sqrt(n_exit)
    gain = pref * n_exit * cos_exit * k0 / kz

    if half_space == "down":
        phase = np.exp(1j * kz * emitter.z_offset)
        f_s = gain * phase * t_dn_s * (1.0 + a_up_s) / den_s
        f_pp = gain * phase * ell_h * t_dn_p * (1.0 - a_up_p) / den_p
        f_pz = gain * phase * u_h * t_dn_p * (1.0 + a_up_p) / den_p
    else:
        d_h = stack.layers[h].thickness
        phase = np.exp(1j * kz * (d_h - emitter.z_offset))
        f_s = gain * phase * t_up_s * (1.0 + a_dn_s) / den_s
        f_pp = gain * phase * ell_h * t_up_p * (1.0 - a_dn_p) / den_p
        f_pz = gain * phase * u_h * t_up_p * (1.0 + a_dn_p) / den_p
    return np.stack([f_s, f_pp, f_pz])


def farfield_amplitudes(stack: LayerStack, emitter: DipoleEmitter,
                        component: Component, theta, phi,
                        half_space: HalfSpace = "down"):
    """Complex far-field amplitudes (E_s, E_p) of one dipole component.

    theta is the polar angle in the exit half-space medium, phi the
    azimuth; arrays broadcast. Amplitudes are normalized so that
    |E_s|^2 + |E_p|^2 is the per-steradian power in units of the bulk-host
    emission of that component.
    """
    exit_mat = stack.layers[_exit_layer(stack, half_space)].material
    if not exit_mat.lossless:
        raise OutOfDomainError(
            f"the {half_space} half-space medium {exit_mat.name!r} is "
            "absorbing; it carries no propagating far field")
    theta, phi = np.broadcast_arrays(np.asarray(theta, float), np.asarray(phi, float))
    f_s, f_pp, f_pz = _radial_fields(stack, emitter, theta, half_space)
    if component == "z":
        return np.zeros_like(f_pz), -f_pz
    if component == "x":
        return -np.sin(phi) * f_s, -np.cos(phi) * f_pp
    if component == "y":
        return np.cos(phi) * f_s, -np.sin(phi) * f_pp
    raise ValueError(f"component must be one of {_COMPONENTS}, got {component!r}")


# ---------------------------------------------------------------------------
# dissipated-power spectrum and totals

def _power_spectrum(stack: LayerStack, emitter: DipoleEmitter,
                    component: Component, u_h) -> np.ndarray:
    """Dissipation density K(u_h) per host-normalized in-plane wavevector,
    such that the bulk-host spectrum integrates to 1 over [0, 1]."""
    u_h = np.asarray(u_h, dtype=float)
    h = emitter.host_layer
    n_h = stack.layers[h].material.n
    u0 = u_h * n_h
    a_up_p, a_dn_p, _, _, kz, den_p = _cavity(stack, emitter, u0, "p")
    ell = kz / (n_h * emitter.k0)
    if component == "z":
        return 1.5 * np.real(u_h**3 / ell * (1 + a_up_p) * (1 + a_dn_p) / den_p)
    a_up_s, a_dn_s, _, _, _, den_s = _cavity(stack, emitter, u0, "s")
    k_s = np.real(u_h / ell * (1 + a_up_s) * (1 + a_dn_s) / den_s)
    k_p = np.real(u_h * ell * (1 - a_up_p) * (1 - a_dn_p) / den_p)
    return 0.75 * (k_s + k_p)


@dataclass(frozen=True)
class EmittedPower:
    """Total dissipated power of one component (or weighted mixture),
    relative to the bulk-host dipole.

    near_field counts the in-plane wavevectors beyond the far-field
    horizon: the largest index of a lossless semi-infinite end layer,
    never below the host light line. Frustrated-TIR light that tunnels
    into a higher-index substrate still reaches a detector and is not
    near field; quenching by a lossy neighbour is.
    """

    total: float
    near_field: float
    tail_estimate: float

    @property
    def propagating(self) -> float:
        return self.total - self.near_field

    @property
    def near_field_fraction(self) -> float:
        return self.near_field / self.total


def _u_edges(stack: LayerStack, emitter: DipoleEmitter, u_max_h: float):
    """Panel edges in host units: branch points of every lossless layer,
    the host light line, then geometric padding out to u_max_h."""
    n_h = stack.layers[emitter.host_layer].material.n
    pts = {0.0, 1.0}
    for lay in stack.layers:
        if lay.material.lossless:
            pts.add(lay.material.n / n_h)
    prop = sorted(p for p in pts if p <= 1.0)
    evan = sorted(p for p in pts if 1.0 < p < u_max_h)
    last = evan[-1] if evan else 1.0
    while last < u_max_h:
        last = min(last * 2.0, u_max_h)
        evan.append(last)
    return np.array(prop), np.array([1.0] + evan)


def _farfield_horizon(stack: LayerStack, n_h: float) -> float:
    """Largest in-plane wavevector (host units) that still propagates in
    some lossless end layer; at least the host light line."""
    ends = (stack.layers[0].material, stack.layers[-1].material)
    return max([1.0] + [m.n / n_h for m in ends if m.lossless])


def _emitted_component(stack: LayerStack, emitter: DipoleEmitter,
                       component: Component, u_max_h: float) -> EmittedPower:
    def k_of(u):
        return _power_spectrum(stack, emitter, component, u)

    n_h = stack.layers[emitter.host_layer].material.n
    u_split = min(_farfield_horizon(stack, n_h), u_max_h)
    prop_edges, evan_edges = _u_edges(stack, emitter, u_max_h)
    # u = sin(alpha) removes the 1/ell singularity at the light line
    prop = _integrate(lambda a: k_of(np.sin(a)) * np.cos(a),
                      np.arcsin(prop_edges), 1e-11)
    # u = cosh(s) removes the inverse-sqrt singularity on the evanescent side
    evan_f = lambda s: k_of(np.cosh(s)) * np.sinh(s)
    ff_mask = evan_edges <= u_split * (1.0 + 1e-12)
    ff_edges, nf_edges = evan_edges[ff_mask], evan_edges[~ff_mask]
    if ff_edges.size and nf_edges.size:
        nf_edges = np.concatenate([ff_edges[-1:], nf_edges])
    tunnel = (_integrate(evan_f, np.arccosh(ff_edges), 1e-11)
              if ff_edges.size > 1 else 0.0)
    near = (_integrate(evan_f, np.arccosh(nf_edges), 1e-11)
            if nf_edges.size > 1 else 0.0)
    tail = _panel(lambda u: np.abs(k_of(u)), u_max_h, 1.1 * u_max_h, 1e-11)
    return EmittedPower(total=prop + tunnel + near, near_field=near,
                        tail_estimate=tail)


def total_emitted_power(stack: LayerStack, emitter: DipoleEmitter,
                        component: Component | None = None,
                        u_max: float | None = None) -> EmittedPower:
    """Dissipated power including the channels beyond the far-field horizon.

    component=None returns the weight-combined mixture. u_max is the
    truncation of the in-plane wavevector integral in vacuum units
    (default 1.5 * max layer index); a significant remaining tail raises
    an accuracy warning.
    """
    _check_geometry(stack, emitter)
    n_h = stack.layers[emitter.host_layer].material.n
    if u_max is None:
        u_max = 1.5 * max(lay.material.n for lay in stack.layers)
    u_max_h = max(u_max / n_h, 1.2)
    comps = _COMPONENTS if component is None else (component,)
    if component is not None and component not in _COMPONENTS:
        raise ValueError(f"component must be one of {_COMPONENTS}, got {component!r}")
    parts = {c: _emitted_component(stack, emitter, c, u_max_h) for c in comps}
    if component is None:
        w = dict(zip(_COMPONENTS, emitter.weights))
        out = EmittedPower(
            total=sum(w[c] * parts[c].total for c in comps),
            near_field=sum(w[c] * parts[c].near_field for c in comps),
            tail_estimate=sum(w[c] * parts[c].tail_estimate for c in comps))
    else:
        out = parts[component]
    if out.tail_estimate > _TAIL_LIMIT * abs(out.total):
        warnings.warn(
            f"dissipation integral truncated at u_max={u_max:.3g} has a "
            f"relative tail of {out.tail_estimate / abs(out.total):.2e}; "
            "increase u_max", AccuracyWarning, stacklevel=2)
    return out


# ---------------------------------------------------------------------------
# far-field integrals and budgets

def _halfspace_power(stack: LayerStack, emitter: DipoleEmitter,
                     component: Component, half_space: HalfSpace,
                     theta_max: float | None = None) -> float:
    """Radiated power into polar angles [0, theta_max] of one half-space."""
    exit_mat = stack.layers[_exit_layer(stack, half_space)].material
    if not exit_mat.lossless:
        return 0.0
    if theta_max is None:
        theta_max = np.pi / 2
    n_exit = exit_mat.n
    edges = {0.0, theta_max}
    for lay in stack.layers:
        if lay.material.lossless and lay.material.n < n_exit:
            t_c = np.arcsin(lay.material.n / n_exit)
            if t_c < theta_max:
                edges.add(t_c)

    def integrand(theta):
        f_s, f_pp, f_pz = _radial_fields(stack, emitter, theta, half_space)
        if component == "z":
            dens = 2.0 * np.pi * np.abs(f_pz) ** 2
        else:
            dens = np.pi * (np.abs(f_s) ** 2 + np.abs(f_pp) ** 2)
        return dens * np.sin(theta)

    return _integrate(integrand, sorted(edges), 1e-11)


@dataclass(frozen=True)
class RadiationBudget:
    """Destination fractions of emitted photons; the four entries sum to 1."""

    collected_na: float
    substrate_beyond_na: float
    leaked_top: float
    absorbed: float
    na: float

    def as_dict(self) -> dict:
        return {
            "collected_na": self.collected_na,
            "substrate_beyond_na": self.substrate_beyond_na,
            "leaked_top": self.leaked_top,
            "absorbed": self.absorbed,
            "na": self.na,
        }


def radiation_budget(stack: LayerStack, emitter: DipoleEmitter, na: float,
                     u_max: float | None = None) -> RadiationBudget:
    """Split each emitted photon between the collection cone, the substrate
    beyond the aperture, the top half-space and absorption."""
    _check_geometry(stack, emitter)
    bottom = stack.layers[0].material
    if not bottom.lossless:
        raise ValueError("collection-side medium must be lossless")
    if not 0 < na <= bottom.n:
        raise InvalidApertureError(
            f"aperture NA {na} must lie in (0, n1={bottom.n}]")
    theta_na = np.arcsin(na / bottom.n)
    collected = beyond = leaked = 0.0
    for c, w in zip(_COMPONENTS, emitter.weights):
        if w == 0.0:
            continue
        total = total_emitted_power(stack, emitter, c, u_max=u_max).total
        down_na = _halfspace_power(stack, emitter, c, "down", theta_na)
        down_all = _halfspace_power(stack, emitter, c, "down")
        up_all = _halfspace_power(stack, emitter, c, "up")
        collected += w * down_na / total
        beyond += w * (down_all - down_na) / total
        leaked += w * up_all / total
    return RadiationBudget(
        collected_na=float(collected),
        substrate_beyond_na=float(beyond),
        leaked_top=float(leaked),
        absorbed=float(1.0 - collected - beyond - leaked),
        na=na)


# ---------------------------------------------------------------------------
# sampled patterns

@dataclass(frozen=True)
class PolarProfile:
    """Azimuth-integrated power per unit polar angle, P(theta)."""

    theta: np.ndarray
    power: np.ndarray

    def integral(self) -> float:
        th = self.theta
        if th.size < 2:
            return 0.0
        # midpoint-cell quadrature: the native grid is cell-centred, so the
        # outer half cells (clamped to [0, pi/2]) must be counted too
        edges = np.empty(th.size + 1)
        edges[1:-1] = 0.5 * (th[1:] + th[:-1])
        edges[0] = max(th[0] - 0.5 * (th[1] - th[0]), 0.0)
        edges[-1] = min(th[-1] + 0.5 * (th[-1] - th[-2]), np.pi / 2)
        return float(np.sum(self.power * np.diff(edges)))


@dataclass(frozen=True)
class AngularPattern:
    """Far-field pattern of a weighted dipole mixture.

    The sampled density grids are evaluated at midpoint angular grids; the
    stored stack/emitter allow exact re-evaluation at arbitrary angles
    (used by image rendering and fitting, which must not interpolate).
    Densities are photons per steradian per emitted photon: each component
    profile is divided by that component's total emitted power and scaled
    by its mixture weight.
    """

    stack: LayerStack
    emitter: DipoleEmitter
    theta: np.ndarray
    phi: np.ndarray
    component_power: np.ndarray  # (3,) bulk-host-normalized totals

    @property
    def weights(self) -> np.ndarray:
        return np.asarray(self.emitter.weights)

    @property
    def n_collect(self) -> float:
        return self.stack.layers[0].material.n

    @property
    def normalization(self) -> float:
        """Total emitted power of the mixture in bulk-host-dipole units."""
        return float(np.dot(self.weights, self.component_power))

    def fields(self, theta, half_space: HalfSpace = "down") -> np.ndarray:
        """Exact (F_s, F_pperp, F_pz) rows at arbitrary polar angles."""
        return _radial_fields(self.stack, self.emitter, theta, half_space)

    @cached_property
    def _rows(self) -> dict:
        return {hs: self.fields(self.theta, hs) for hs in ("down", "up")}

    @cached_property
    def power_density(self) -> np.ndarray:
        """Sampled density, axes (theta, phi, component[z,x,y], pol[s,p],
        half_space[down,up]). Large at the default grid; lazy."""
        n_t, n_p = len(self.theta), len(self.phi)
        dens = np.zeros((n_t, n_p, 3, 2, 2))
        cos2 = np.cos(self.phi) ** 2
        sin2 = np.sin(self.phi) ** 2
        scale = self.weights / self.component_power
        for k, hs in enumerate(("down", "up")):
            f_s, f_pp, f_pz = np.abs(self._rows[hs]) ** 2
            dens[:, :, 0, 1, k] = scale[0] * f_pz[:, None]
            dens[:, :, 1, 0, k] = scale[1] * f_s[:, None] * sin2[None, :]
            dens[:, :, 1, 1, k] = scale[1] * f_pp[:, None] * cos2[None, :]
            dens[:, :, 2, 0, k] = scale[2] * f_s[:, None] * cos2[None, :]
            dens[:, :, 2, 1, k] = scale[2] * f_pp[:, None] * sin2[None, :]
        return dens

    def density(self, theta, phi, half_space: HalfSpace = "down",
                component: Component | None = None) -> np.ndarray:
        """Exact weighted power density at arbitrary angles (per steradian
        per emitted photon); component=None sums the mixture."""
        theta, phi = np.broadcast_arrays(np.asarray(theta, float),
                                         np.asarray(phi, float))
        f_s, f_pp, f_pz = self.fields(theta, half_space)
        scale = dict(zip(_COMPONENTS, self.weights / self.component_power))
        parts = {
            "z": scale["z"] * np.abs(f_pz) ** 2,
            "x": scale["x"] * (np.sin(phi) ** 2 * np.abs(f_s) ** 2
                               + np.cos(phi) ** 2 * np.abs(f_pp) ** 2),
            "y": scale["y"] * (np.cos(phi) ** 2 * np.abs(f_s) ** 2
                               + np.sin(phi) ** 2 * np.abs(f_pp) ** 2),
        }
        if component is not None:
            return parts[component]
        return parts["z"] + parts["x"] + parts["y"]


def angular_pattern(stack: LayerStack, emitter: DipoleEmitter,
                    theta_samples: int = 1024,
                    phi_samples: int = 720) -> AngularPattern:
    """Sample the far-field pattern on midpoint grids over one hemisphere
    of polar angle and the full azimuth."""
    if theta_samples < 8 or phi_samples < 8:
        raise ValueError("angular grids need at least 8 samples per axis")
    _check_geometry(stack, emitter)
    theta = (np.arange(theta_samples) + 0.5) * (np.pi / 2) / theta_samples
    phi = (np.arange(phi_samples) + 0.5) * (2 * np.pi) / phi_samples
    power = np.array([_emitted_component(stack, emitter, c,
                                         _default_umax_h(stack, emitter)).total
                      for c in _COMPONENTS])
    return AngularPattern(stack=stack, emitter=emitter, theta=theta, phi=phi,
                          component_power=power)


def _default_umax_h(stack: LayerStack, emitter: DipoleEmitter) -> float:
    n_h = stack.layers[emitter.host_layer].material.n
    return max(1.5 * max(lay.material.n for lay in stack.layers) / n_h, 1.2)


def phi_integrated_profile(pattern: AngularPattern,
                           half_space: HalfSpace = "down",
                           theta=None) -> PolarProfile:
    """Azimuth-integrated P(theta) = sin(theta) * integral(density dphi);
    integrates over theta to the half-space power fraction."""
    theta = pattern.theta if theta is None else np.asarray(theta, dtype=float)
    f_s, f_pp, f_pz = pattern.fields(theta, half_space)
    scale = pattern.weights / pattern.component_power
    prof_z = 2.0 * np.pi * np.abs(f_pz) ** 2
    prof_in = np.pi * (np.abs(f_s) ** 2 + np.abs(f_pp) ** 2)
    power = np.sin(theta) * (scale[0] * prof_z + (scale[1] + scale[2]) * prof_in)
    return PolarProfile(theta=theta, power=power)


# ---------------------------------------------------------------------------
# mirror placement studies

def mirror_gain(stack_without: LayerStack, stack_with: LayerStack,
                emitter: DipoleEmitter, na: float) -> float:
    """Relative change of collected_NA caused by adding the top mirror;
    the two stacks must agree below the mirror."""
    base = stack_without.layers
    wrapped = stack_with.layers
    same_below = (len(wrapped) >= len(base)
                  and wrapped[:len(base) - 1] == base[:-1]
                  and wrapped[len(base) - 1].material == base[-1].material)
    if not same_below:
        raise GeometryError(
            "stacks must differ only by the added mirror layers")
    ref = radiation_budget(stack_without, emitter, na).collected_na
    if ref <= 0:
        raise ValueError("reference stack collects no power at this aperture")
    return radiation_budget(stack_with, emitter, na).collected_na / ref - 1.0


@dataclass(frozen=True)
class SweepPoint:
    distance_nm: float
    stack: LayerStack
    budget: RadiationBudget
    pattern: AngularPattern


def mirror_distance_sweep(stack_template: LayerStack, emitter: DipoleEmitter,
                          distances_nm, na: float,
                          mirror: OpticalMaterial,
                          theta_samples: int = 1024,
                          phi_samples: int = 720,
                          threads: int = 1) -> list[SweepPoint]:
    """Budgets and reusable patterns for a mirror placed at each distance
    above the top surface of the template stack."""

    def solve(d: float) -> SweepPoint:
        stk = stack_template.with_mirror(d, mirror)
        return SweepPoint(
            distance_nm=float(d),
            stack=stk,
            budget=radiation_budget(stk, emitter, na),
            pattern=angular_pattern(stk, emitter, theta_samples, phi_samples))

    distances = [float(d) for d in distances_nm]
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(solve, distances))
    return [solve(d) for d in distances]
