"""Planar multilayer stacks and their plane-wave response.

Geometry convention: layers are ordered from the bottom (collection side,
semi-infinite) to the top (semi-infinite). Interface i separates layer i
from layer i+1; z = 0 sits at interface 0 and z grows upward, so interface
i lies at the summed thickness of layers 1..i.

All in-plane wavevectors are expressed through the dimensionless
u = k_par / k0 (vacuum normalized), which is conserved across layers.
Amplitudes are E-field amplitudes in the (s, p) basis with p-hat = s-hat
cross k-hat; externally only powers should be compared across conventions.
"""
from __future__ import annotations

import cmath
import json
from dataclasses import dataclass
from functools import cached_property
from typing import Literal, Sequence

import numpy as np

from .errors import SingularChannelError

Pol = Literal["s", "p"]

# Two longitudinal wavevectors both below this fraction of k0 make the
# interface response 0/0; see fresnel().
_KZ_SINGULAR = 1e-6


@dataclass(frozen=True)
class OpticalMaterial:
    """Non-magnetic material with complex refractive index n + i*kappa."""

    name: str
    n: float
    kappa: float = 0.0

    def __post_init__(self):
        if not self.n > 0:
            raise ValueError(f"refractive index must be positive, got {self.n}")
        if self.kappa < 0:
            raise ValueError(f"extinction must be non-negative, got {self.kappa}")

    @property
    def index(self) -> complex:
        return complex(self.n, self.kappa)

    @property
    def lossless(self) -> bool:
        return self.kappa == 0.0


@dataclass(frozen=True)
class Layer:
    """A slab of material; thickness in nm, None for semi-infinite.

    Zero thickness is allowed as a degenerate interior layer; it must
    leave every stack coefficient unchanged.
    """

    material: OpticalMaterial
    thickness: float | None = None

    def __post_init__(self):
        if self.thickness is not None and self.thickness < 0:
            raise ValueError(f"layer thickness must be >= 0, got {self.thickness}")

    @property
    def semi_infinite(self) -> bool:
        return self.thickness is None


@dataclass(frozen=True)
class PlaneWaveChannel:
    """One scattering channel: vacuum wavenumber k0 (rad/nm), normalized
    in-plane wavevector u = k_par/k0 >= 0, and polarization."""

    k0: float
    u: float
    pol: Pol

    def __post_init__(self):
        if not self.k0 > 0:
            raise ValueError("k0 must be positive")
        if self.u < 0:
            raise ValueError("u must be non-negative")
        if self.pol not in ("s", "p"):
            raise ValueError(f"polarization must be 's' or 'p', got {self.pol!r}")


@dataclass(frozen=True)
class LayerStack:
    """Ordered layer sequence, bottom (collection side) first.

    The outermost layers must be semi-infinite; interior layers must have
    finite thickness.
    """

    layers: tuple[Layer, ...]

    def __init__(self, layers: Sequence[Layer]):
        object.__setattr__(self, "layers", tuple(layers))
        if len(self.layers) < 2:
            raise ValueError("a stack needs at least two layers")
        if not self.layers[0].semi_infinite or not self.layers[-1].semi_infinite:
            raise ValueError("outermost layers must be semi-infinite")
        for lay in self.layers[1:-1]:
            if lay.semi_infinite:
                raise ValueError("only the outermost layers may be semi-infinite")

    def __len__(self) -> int:
        return len(self.layers)

    @property
    def n_interfaces(self) -> int:
        return len(self.layers) - 1

    @cached_property
    def indices(self) -> np.ndarray:
        return np.array([lay.material.index for lay in self.layers])

    @cached_property
    def thicknesses(self) -> np.ndarray:
        """Interior thicknesses in nm (layers 1..L-2)."""
        return np.array([lay.thickness for lay in self.layers[1:-1]], dtype=float)

    @cached_property
    def interface_z(self) -> np.ndarray:
        """z-position of each interface; z = 0 at interface 0."""
        return np.concatenate(([0.0], np.cumsum(self.thicknesses)))

    def layer_bottom(self, layer_index: int) -> float:
        """z of the bottom boundary of an interior or top layer."""
        if not 1 <= layer_index < len(self.layers):
            raise IndexError(f"layer {layer_index} has no bottom interface")
        return float(self.interface_z[layer_index - 1])

    def layer_thickness(self, layer_index: int) -> float | None:
        return self.layers[layer_index].thickness

    @property
    def lossless(self) -> bool:
        return all(lay.material.lossless for lay in self.layers)

    def antenna_compliant(self, triple: tuple[int, int, int] = (0, 1, 2)) -> bool:
        """True when the designated dielectric triple has strictly
        decreasing real index away from the collection side (n1 > n2 > n3),
        the ordering that funnels emission into the dense bottom medium."""
        n1, n2, n3 = (self.layers[i].material.n for i in triple)
        return n1 > n2 > n3

    def with_mirror(self, separation_nm: float, mirror: OpticalMaterial) -> "LayerStack":
        """Return a copy with the top half-space replaced by a gap of the
        same material (thickness = separation) backed by a semi-infinite
        mirror layer."""
        if not separation_nm > 0:
            raise ValueError("mirror separation must be positive")
        top = self.layers[-1]
        gap = Layer(top.material, separation_nm)
        return LayerStack(self.layers[:-1] + (gap, Layer(mirror, None)))


def longitudinal_wavevector(material: OpticalMaterial, channel: PlaneWaveChannel) -> complex:
    """kz = k0 * sqrt((n + i*kappa)^2 - u^2) on the branch Im kz >= 0,
    with Re kz >= 0 when Im kz = 0 (decaying or outgoing waves only)."""
    kz = channel.k0 * cmath.sqrt(material.index**2 - channel.u**2)
    if kz.imag < 0:
        kz = -kz
    if kz.imag == 0 and kz.real < 0:
        kz = -kz
    return kz


def _kz(n: complex, k0: float, u: np.ndarray | float) -> np.ndarray | complex:
    """Vectorized longitudinal wavevector, same branch as above."""
    kz = k0 * np.sqrt(np.asarray(n**2 - np.asarray(u) ** 2, dtype=complex))
    kz = np.where(kz.imag < 0, -kz, kz)
    kz = np.where((kz.imag == 0) & (kz.real < 0), -kz, kz)
    return kz


def _interface_rt(na: complex, nb: complex, kza, kzb, pol: Pol):
    """Single-interface Fresnel amplitudes for incidence from medium a.

    Identical indices short-circuit to (0, 1): keeps a zero-contrast
    interface exactly invisible even on the shared branch point where the
    quotient would be 0/0.
    """
    if na == nb:
        zero = np.zeros_like(np.asarray(kza, dtype=complex))
        return zero, zero + 1.0
    if pol == "s":
        den = kza + kzb
        return (kza - kzb) / den, 2 * kza / den
    den = nb**2 * kza + na**2 * kzb
    return (nb**2 * kza - na**2 * kzb) / den, 2 * na * nb * kza / den


def fresnel(mat_a: OpticalMaterial, mat_b: OpticalMaterial, channel: PlaneWaveChannel) -> tuple[complex, complex]:
    """Reflection and transmission amplitudes for the interface a -> b.

    Identical optical constants give (0, 1) at every u. A channel where
    both kz vanish (u pinned to two coincident branch points) is singular.
    """
    if (mat_a.n, mat_a.kappa) == (mat_b.n, mat_b.kappa):
        return 0.0 + 0.0j, 1.0 + 0.0j
    kza = longitudinal_wavevector(mat_a, channel)
    kzb = longitudinal_wavevector(mat_b, channel)
    lim = _KZ_SINGULAR * channel.k0
    if abs(kza) < lim and abs(kzb) < lim:
        raise SingularChannelError(
            f"both longitudinal wavevectors vanish at u={channel.u} for "
            f"{mat_a.name}|{mat_b.name}")
    r, t = _interface_rt(mat_a.index, mat_b.index, kza, kzb, channel.pol)
    return complex(r), complex(t)


def _chain_rt(ns: Sequence[complex], ds: Sequence[float], k0: float, u, pol: Pol):
    """Composite (r, t) of a half-stack.

    ns[0] is the incident medium, ns[-1] the final exit medium, ds the
    thicknesses of the media in between. Airy recursion from the far end,
    r = (r1 + r2 e^{2i beta}) / (1 + r1 r2 e^{2i beta}); stable because
    Im kz >= 0 keeps every phase factor bounded.
    """
    u = np.asarray(u, dtype=float)
    kz = [_kz(n, k0, u) for n in ns]
    lim = _KZ_SINGULAR * k0
    for j in range(len(ns) - 1):
        if ns[j] != ns[j + 1] and np.any(
                (np.abs(kz[j]) < lim) & (np.abs(kz[j + 1]) < lim)):
            raise SingularChannelError(
                f"both longitudinal wavevectors vanish between layers "
                f"{j} and {j + 1}")
    for j in range(1, len(ns) - 1):
        # an interior layer exactly on its branch point (kz = 0) makes the
        # recursion 0/0 although the limit is finite; nudge onto the
        # propagating side, off by O(lim) in a u-interval of width O(lim^2)
        kz[j] = np.where(np.abs(kz[j]) < lim, lim + 0j, kz[j])
    r, t = _interface_rt(ns[-2], ns[-1], kz[-2], kz[-1], pol)
    r = r * np.ones_like(u, dtype=complex)
    t = t * np.ones_like(u, dtype=complex)
    for j in range(len(ns) - 3, -1, -1):
        r0, t0 = _interface_rt(ns[j], ns[j + 1], kz[j], kz[j + 1], pol)
        ph = np.exp(1j * kz[j + 1] * ds[j])
        den = 1 + r0 * r * ph**2
        r = (r0 + r * ph**2) / den
        t = t0 * t * ph / den
    return r, t


def _substack_rt(stack: LayerStack, k0: float, u, pol: Pol, from_interface: int,
                 direction: Literal["up", "down"]):
    """Vectorized substack response; see substack_coefficients."""
    if not 0 <= from_interface < stack.n_interfaces:
        raise IndexError(f"interface {from_interface} out of range")
    ns = stack.indices
    ds = stack.thicknesses
    i = from_interface
    if direction == "down":
        # incident medium is layer i+1, exit is layer 0
        chain_n = ns[i + 1 :: -1]
        chain_d = ds[i - 1 :: -1] if i >= 1 else ds[:0]
    elif direction == "up":
        # incident medium is layer i, exit is the top layer
        chain_n = ns[i:]
        chain_d = ds[i:]
    else:
        raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")
    return _chain_rt(chain_n, chain_d, k0, u, pol)


def substack_coefficients(stack: LayerStack, channel: PlaneWaveChannel,
                          from_interface: int,
                          direction: Literal["up", "down"]) -> tuple[complex, complex]:
    """Composite reflection/transmission of everything beyond an interface.

    direction="down": response seen by a downward wave in layer
    from_interface+1; t is the amplitude delivered into the bottom
    half-space. direction="up": response seen by an upward wave in layer
    from_interface; t is delivered into the top half-space. Reference
    planes are the first interface met and the outermost interface.
    """
    r, t = _substack_rt(stack, channel.k0, channel.u, channel.pol,
                        from_interface, direction)
    return complex(r), complex(t)


# ---------------------------------------------------------------------------
# JSON interchange

def stack_to_json(stack: LayerStack, wavelength_nm: float) -> dict:
    layers = []
    for lay in stack.layers:
        layers.append({
            "name": lay.material.name,
            "n": lay.material.n,
            "kappa": lay.material.kappa,
            "thickness_nm": "semi-infinite" if lay.semi_infinite else lay.thickness,
        })
    return {"wavelength_nm": wavelength_nm, "layers": layers}


def stack_from_json(doc: dict | str) -> tuple[LayerStack, float]:
    """Parse {"wavelength_nm": ..., "layers": [{name, n, kappa,
    thickness_nm | "semi-infinite"}, ...]} into a stack."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    try:
        wavelength = float(doc["wavelength_nm"])
        raw_layers = doc["layers"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"stack document missing required field: {exc}") from exc
    layers = []
    for entry in raw_layers:
        mat = OpticalMaterial(entry["name"], float(entry["n"]),
                              float(entry.get("kappa", 0.0)))
        th = entry["thickness_nm"]
        layers.append(Layer(mat, None if th == "semi-infinite" else float(th)))
    return LayerStack(layers), wavelength
