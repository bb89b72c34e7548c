"""Dipole-orientation retrieval from BFP images.

Two linear stages. Stage 1 separates axial from in-plane emission on the
azimuth-integrated radial profile, where the two basis shapes differ most
and the azimuth drops out, with a non-negative least-squares solve.
Stage 2 keeps the axial amplitude fixed and splits the in-plane part on
the 2-D image.

The in-plane intensity of an incoherent (w_x, w_y) mixture rotated by psi
is linear in three images: the isotropic in-plane average B_iso, and the
cos(2 phi) / sin(2 phi) anisotropy images B_c, B_s, with coefficients
(w_x + w_y), (w_x - w_y) cos(2 psi), (w_x - w_y) sin(2 psi). The reported
w_x, w_y are the lab-axis moments of that mixture and inplane_azimuth is
the principal-axis angle recovered from the mixing term.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import lsq_linear, nnls

from .bfp import BfpImage, phi_integrate_image, render_bfp
from .errors import GeometryError, IllConditionedFitError
from .radiation import DipoleEmitter, angular_pattern
from .stack import LayerStack

# weights on a basis whose columns are this collinear are not identifiable
_COLLINEAR_LIMIT = 1e-7
# in-plane power below this fraction of the total leaves the split undefined
_SPLIT_LIMIT = 1e-6


@dataclass(frozen=True)
class FitConfig:
    """Geometry and options for orientation fits.

    host_layer / z_offset_nm / wavelength_nm locate the emitter whose
    basis patterns are synthesized. mask_max_theta_deg excludes polar
    angles above the given value from both stages (for measured data with
    a contaminated outer annulus); None fits the full aperture.
    """

    host_layer: int = 1
    z_offset_nm: float = 200.0
    wavelength_nm: float = 637.0
    mask_max_theta_deg: float | None = None
    radial_bins: int = 64


@dataclass(frozen=True)
class Stage1Fit:
    axial_fraction: float
    amplitude: float
    background: float
    residual_rms: float


@dataclass(frozen=True)
class FitResult:
    """weights = (w_axial, w_x, w_y), non-negative, summing to 1.

    inplane_azimuth_deg is the in-plane principal-axis angle in [0, 180);
    indeterminate_inplane flags a vanishing in-plane part, where the split
    and azimuth carry no information. amplitude is the overall intensity
    scale, background the fitted uniform offset per pixel.
    """

    weights: tuple[float, float, float]
    inplane_azimuth_deg: float
    amplitude: float
    background: float
    residual_rms: float
    mask_max_theta_deg: float | None
    indeterminate_inplane: bool = False

    def as_dict(self) -> dict:
        return {
            "weights": {"axial": self.weights[0], "x": self.weights[1],
                        "y": self.weights[2]},
            "inplane_azimuth_deg": self.inplane_azimuth_deg,
            "amplitude": self.amplitude,
            "background": self.background,
            "residual_rms": self.residual_rms,
            "mask_max_theta_deg": self.mask_max_theta_deg,
            "indeterminate_inplane": self.indeterminate_inplane,
        }


class ForwardModel:
    """Basis images for a given stack/emitter geometry on the exact pixel
    grid of a target image; rendered once and reused by both stages."""

    def __init__(self, image: BfpImage, stack: LayerStack, config: FitConfig):
        self.image = image
        self.stack = stack
        self.config = config
        geo = dict(grid_size=image.grid_size, na_limit=image.na_limit,
                   polarizer_deg=image.polarizer_deg,
                   pixel_pitch=image.pixel_pitch, center=image.center)

        def basis(weights) -> np.ndarray:
            emitter = DipoleEmitter(config.host_layer, config.z_offset_nm,
                                    config.wavelength_nm, weights)
            pat = angular_pattern(self.stack, emitter, 64, 8)
            return render_bfp(pat, **geo).pixels

        self.b_axial = basis((1.0, 0.0, 0.0))
        b_x = basis((0.0, 1.0, 0.0))
        b_y = basis((0.0, 0.0, 1.0))
        self.b_iso = 0.5 * (b_x + b_y)
        self.b_cos = 0.5 * (b_x - b_y)
        # sin(2 phi) anisotropy: the x-basis rotated by 45 degrees
        self.b_sin = self._sin_basis()
        self.b_flat = np.zeros_like(b_x)
        rho = image.radius_map()
        self.b_flat[rho <= image.na_limit] = 1.0
        self.fit_mask = self._mask(rho)

    def _sin_basis(self) -> np.ndarray:
        """Image of (w_x - w_y) sin(2 phi) anisotropy: render a 45-degree
        rotated in-plane dipole and remove its isotropic part."""
        emitter = DipoleEmitter(self.config.host_layer, self.config.z_offset_nm,
                                self.config.wavelength_nm, (0.0, 1.0, 0.0))
        pat = angular_pattern(self.stack, emitter, 64, 8)
        n = self.image.grid_size
        cx, cy = self.image.center
        iy, ix = np.mgrid[0:n, 0:n]
        dx = (ix - cx) * self.image.pixel_pitch
        dy = (iy - cy) * self.image.pixel_pitch
        rho = np.hypot(dx, dy)
        inside = rho <= self.image.na_limit
        theta = np.arcsin(np.clip(rho[inside] / self.image.n1, 0.0, 1.0))
        phi = np.arctan2(dy[inside], dx[inside])
        f_s, f_pp, _ = pat.fields(theta, "down")
        scale = 1.0 / pat.component_power[1]
        # dipole along +45 degrees: E_rho = cos(phi-45) F_pp, E_phi = -sin(phi-45) F_s
        c, s = np.cos(phi - np.pi / 4), np.sin(phi - np.pi / 4)
        if self.image.polarizer_deg is None:
            vals = scale * (np.abs(c * f_pp) ** 2 + np.abs(s * f_s) ** 2)
        else:
            alpha = np.deg2rad(self.image.polarizer_deg % 180.0)
            ca, sa = np.cos(phi - alpha), np.sin(phi - alpha)
            vals = scale * np.abs(c * f_pp * ca + s * f_s * sa) ** 2
        vals /= self.image.n1**2 * np.cos(theta)
        out = np.zeros((n, n))
        out[inside] = vals
        return out - self.b_iso

    def _mask(self, rho: np.ndarray) -> np.ndarray:
        mask = rho <= self.image.na_limit
        if self.config.mask_max_theta_deg is not None:
            rho_cut = self.image.n1 * np.sin(np.deg2rad(self.config.mask_max_theta_deg))
            mask &= rho <= rho_cut
        return mask

    def profile(self, pixels: np.ndarray) -> np.ndarray:
        img = replace(self.image, pixels=pixels)
        return phi_integrate_image(
            img, self.config.radial_bins,
            max_theta=None if self.config.mask_max_theta_deg is None
            else np.deg2rad(self.config.mask_max_theta_deg)).power


def fit_axial_ratio(profile: np.ndarray, basis_axial: np.ndarray,
                    basis_inplane: np.ndarray,
                    background_basis: np.ndarray | None = None) -> Stage1Fit:
    """NNLS of a measured radial profile onto the axial and in-plane basis
    profiles plus a background shape (constant by default)."""
    profile = np.asarray(profile, dtype=float)
    if background_basis is None:
        background_basis = np.ones_like(profile)
    design = np.column_stack([basis_axial, basis_inplane, background_basis])
    norms = np.linalg.norm(design, axis=0)
    if np.any(norms[:2] == 0):
        raise IllConditionedFitError("a basis profile is identically zero")
    cosang = abs(np.dot(design[:, 0], design[:, 1])) / (norms[0] * norms[1])
    if 1.0 - cosang < _COLLINEAR_LIMIT:
        raise IllConditionedFitError(
            "axial and in-plane basis profiles are collinear; the stack does "
            "not separate the orientations")
    coef, _ = nnls(design / norms, profile)
    coef /= norms
    c_ax, c_in, c_bg = coef
    amplitude = c_ax + c_in
    if amplitude <= 0:
        raise IllConditionedFitError("profile fits to zero amplitude")
    model = design @ coef
    scale = np.linalg.norm(profile)
    rms = np.linalg.norm(profile - model) / scale if scale > 0 else 0.0
    return Stage1Fit(axial_fraction=c_ax / amplitude, amplitude=amplitude,
                     background=c_bg, residual_rms=rms)


def fit_inplane_split(image: BfpImage, axial_amplitude: float,
                      model: ForwardModel) -> FitResult:
    """Stage 2: with the axial amplitude fixed, linear fit of the in-plane
    split and azimuth on the image; background is refit per pixel."""
    ref = model.image
    if (image.grid_size != ref.grid_size
            or image.pixel_pitch != ref.pixel_pitch
            or image.center != ref.center
            or image.na_limit != ref.na_limit
            or image.n1 != ref.n1
            or image.polarizer_deg != ref.polarizer_deg):
        raise GeometryError("image geometry does not match the forward model")
    mask = model.fit_mask
    data = image.pixels[mask] - axial_amplitude * model.b_axial[mask]
    design = np.column_stack([model.b_iso[mask], model.b_cos[mask],
                              model.b_sin[mask], model.b_flat[mask]])
    norms = np.linalg.norm(design, axis=0)
    norms[norms == 0] = 1.0
    res = lsq_linear(design / norms, data,
                     bounds=([0.0, -np.inf, -np.inf, 0.0], np.inf),
                     method="bvls")
    c_iso, c_cos, c_sin, c_bg = res.x / norms

    amplitude = axial_amplitude + c_iso
    aniso = np.hypot(c_cos, c_sin)
    if aniso > c_iso:  # clip to the physical simplex (noise can overshoot)
        c_cos, c_sin = c_cos * c_iso / aniso, c_sin * c_iso / aniso
        aniso = c_iso
    w_ax = axial_amplitude / amplitude
    w_x = 0.5 * (c_iso + c_cos) / amplitude
    w_y = 0.5 * (c_iso - c_cos) / amplitude
    indeterminate = c_iso <= _SPLIT_LIMIT * amplitude
    azimuth = 0.0 if indeterminate or aniso == 0.0 \
        else float(np.degrees(0.5 * np.arctan2(c_sin, c_cos)) % 180.0)

    full_model = (axial_amplitude * model.b_axial + c_iso * model.b_iso
                  + c_cos * model.b_cos + c_sin * model.b_sin
                  + c_bg * model.b_flat)
    scale = np.linalg.norm(image.pixels[mask])
    rms = np.linalg.norm((image.pixels - full_model)[mask]) / scale \
        if scale > 0 else 0.0
    return FitResult(weights=(w_ax, w_x, w_y), inplane_azimuth_deg=azimuth,
                     amplitude=amplitude, background=c_bg, residual_rms=rms,
                     mask_max_theta_deg=model.config.mask_max_theta_deg,
                     indeterminate_inplane=bool(indeterminate))


def full_fit(image: BfpImage, stack: LayerStack,
             config: FitConfig = FitConfig()) -> FitResult:
    """Two-stage orientation fit of a BFP image.

    Stage 1 fixes the axial weight on the azimuth-integrated profile
    (background basis propagated through the same annulus pipeline);
    stage 2 splits the in-plane part on the masked 2-D image.
    """
    model = ForwardModel(image, stack, config)
    stage1 = fit_axial_ratio(
        model.profile(image.pixels),
        model.profile(model.b_axial),
        model.profile(model.b_iso),
        background_basis=model.profile(model.b_flat))
    return fit_inplane_split(image, stage1.axial_fraction * stage1.amplitude,
                             model)
