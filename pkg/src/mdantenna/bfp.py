"""Back-focal-plane (Fourier-plane) images of dipole far fields.

A high-NA aplanatic objective maps the exit ray with polar angle theta to
the radius rho = n1 sin(theta) in the back focal plane (Abbe sine
condition); image coordinates are expressed in those units. Collimation
turns the p channel into the radial BFP direction (with a sign flip fixed
by requiring a continuous field across the axis) and the s channel into
the azimuthal direction, and spreads the per-steradian power with the
aplanatic apodization 1/cos(theta).

Pixels sample the continuous distribution at their centers; no pixel-area
averaging is applied.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .errors import GeometryError, InvalidApertureError, MetadataError
from .radiation import AngularPattern, PolarProfile

_METADATA_FIELDS = {
    "pixel_pitch": (int, float),
    "center_x": (int, float),
    "center_y": (int, float),
    "na_limit": (int, float),
    "n1": (int, float),
    "polarizer_deg": (int, float, type(None)),
}


@dataclass(frozen=True)
class BfpImage:
    """Square intensity map in the back focal plane.

    pixel_pitch is in units of n1*sin(theta) per pixel; center is the
    (x, y) pixel coordinate of the optical axis; values outside the
    aperture circle are zero. pixels[iy, ix] indexes row-major.
    """

    pixels: np.ndarray
    pixel_pitch: float
    center: tuple[float, float]
    na_limit: float
    n1: float
    polarizer_deg: float | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels, dtype=float)
        if px.ndim != 2 or px.shape[0] != px.shape[1]:
            raise GeometryError(f"image must be square, got shape {px.shape}")
        if px.shape[0] < 32:
            raise GeometryError(f"image grid must be at least 32x32, got {px.shape}")
        cx, cy = self.center
        n = px.shape[0]
        if not (0 <= cx <= n - 1 and 0 <= cy <= n - 1):
            raise GeometryError(
                f"optical axis {self.center} lies outside the {n}x{n} image")
        if self.na_limit > self.n1:
            raise InvalidApertureError(
                f"na_limit {self.na_limit} exceeds collection index {self.n1}")
        if not self.pixel_pitch > 0:
            raise GeometryError("pixel_pitch must be positive")
        object.__setattr__(self, "pixels", px)
        if self.polarizer_deg is not None:
            object.__setattr__(self, "polarizer_deg", float(self.polarizer_deg) % 360.0)

    @property
    def grid_size(self) -> int:
        return self.pixels.shape[0]

    def radius_map(self) -> np.ndarray:
        """rho = n1*sin(theta) at every pixel center."""
        n = self.grid_size
        iy, ix = np.mgrid[0:n, 0:n]
        cx, cy = self.center
        return self.pixel_pitch * np.hypot(ix - cx, iy - cy)

    def total_power(self) -> float:
        return float(self.pixels.sum() * self.pixel_pitch**2)


def render_bfp(pattern: AngularPattern, grid_size: int = 256,
               na_limit: float | None = None,
               polarizer_deg: float | None = None,
               pixel_pitch: float | None = None,
               center: tuple[float, float] | None = None,
               transmission=None) -> BfpImage:
    """Render the downward far field of a pattern into a BFP image.

    The polarizer projects the transverse BFP field of each dipole
    component coherently onto the transmission axis; components add
    incoherently. transmission, if given, is a callable theta -> [0, 1]
    per-angle intensity transfer (default unity). Intensities are per
    unit BFP area in pitch units, so pixels.sum() * pitch^2 approximates
    the collected power fraction inside na_limit.
    """
    n1 = pattern.n_collect
    if na_limit is None:
        na_limit = n1
    if na_limit > n1:
        raise InvalidApertureError(f"na_limit {na_limit} exceeds n1 {n1}")
    if grid_size < 32:
        raise GeometryError("image grid must be at least 32x32")
    if pixel_pitch is None:
        pixel_pitch = 2.0 * na_limit / (grid_size - 4)
    if center is None:
        center = ((grid_size - 1) / 2.0, (grid_size - 1) / 2.0)

    cx, cy = center
    iy, ix = np.mgrid[0:grid_size, 0:grid_size]
    dx = (ix - cx) * pixel_pitch
    dy = (iy - cy) * pixel_pitch
    rho = np.hypot(dx, dy)
    inside = rho <= na_limit
    theta = np.arcsin(np.clip(rho[inside] / n1, 0.0, 1.0))
    phi = np.arctan2(dy[inside], dx[inside])

    f_s, f_pp, f_pz = pattern.fields(theta, "down")
    # transverse BFP fields (E_rho, E_phi) per component
    comp_fields = (
        (f_pz, np.zeros_like(f_pz)),                    # z
        (np.cos(phi) * f_pp, -np.sin(phi) * f_s),       # x
        (np.sin(phi) * f_pp, np.cos(phi) * f_s),        # y
    )
    scale = pattern.weights / pattern.component_power
    vals = np.zeros_like(theta)
    if polarizer_deg is None:
        for s, (e_r, e_f) in zip(scale, comp_fields):
            vals += s * (np.abs(e_r) ** 2 + np.abs(e_f) ** 2)
    else:
        # a half-wave shift of the axis is the same polarizer
        alpha = np.deg2rad(float(polarizer_deg) % 180.0)
        c, s_ = np.cos(phi - alpha), np.sin(phi - alpha)
        for s, (e_r, e_f) in zip(scale, comp_fields):
            vals += s * np.abs(e_r * c - e_f * s_) ** 2
    vals /= n1**2 * np.cos(theta)
    if transmission is not None:
        vals *= transmission(theta)

    pixels = np.zeros((grid_size, grid_size))
    pixels[inside] = vals
    return BfpImage(pixels=pixels, pixel_pitch=pixel_pitch, center=center,
                    na_limit=na_limit, n1=n1, polarizer_deg=polarizer_deg)


def phi_integrate_image(image: BfpImage, radial_bins: int = 64,
                        max_theta: float | None = None) -> PolarProfile:
    """Collapse an image into P(theta) by summing annuli.

    The annulus area element absorbs the aplanatic apodization, so the
    result is directly comparable with the azimuth-integrated far-field
    profile. Bin values are pixel-center sums divided by the polar-angle
    width of the annulus.
    """
    n = image.grid_size
    cx, cy = image.center
    if not (0 <= cx <= n - 1 and 0 <= cy <= n - 1):
        raise GeometryError(f"optical axis {image.center} lies outside the image")
    if radial_bins < 1:
        raise GeometryError("need at least one radial bin")
    rho_max = image.na_limit if max_theta is None \
        else min(image.na_limit, image.n1 * np.sin(max_theta))
    rho_edges = np.linspace(0.0, rho_max, radial_bins + 1)
    theta_edges = np.arcsin(rho_edges / image.n1)

    rho = image.radius_map()
    which = np.searchsorted(rho_edges, rho.ravel(), side="right") - 1
    ok = (which >= 0) & (which < radial_bins)
    sums = np.bincount(which[ok], weights=image.pixels.ravel()[ok],
                       minlength=radial_bins)
    power = sums * image.pixel_pitch**2 / np.diff(theta_edges)
    centers = 0.5 * (theta_edges[:-1] + theta_edges[1:])
    return PolarProfile(theta=centers, power=power)


# ---------------------------------------------------------------------------
# file I/O: 16-bit grayscale images plus JSON metadata sidecars

def _metadata_path(image_path: str) -> str:
    return image_path + ".json"


def save_image(image: BfpImage, path: str,
               metadata_path: str | None = None,
               extra_metadata: dict | None = None) -> str:
    """Write a 16-bit grayscale PNG or binary PGM (by extension) plus a
    JSON metadata sidecar; returns the sidecar path.

    Intensities are scaled to the full 16-bit range; the scale is stored
    in the metadata so that load_measurement restores the quantized values
    exactly.
    """
    ext = os.path.splitext(path)[1].lower()
    peak = float(image.pixels.max())
    scale = 65535.0 / peak if peak > 0 else 1.0
    raw = np.round(image.pixels * scale).astype(np.uint16)
    if ext == ".png":
        Image.fromarray(raw).save(path, format="PNG")
    elif ext == ".pgm":
        with open(path, "wb") as fh:
            fh.write(f"P5\n{raw.shape[1]} {raw.shape[0]}\n65535\n".encode())
            fh.write(raw.astype(">u2").tobytes())
    else:
        raise ValueError(f"unsupported image format {ext!r} (use .png or .pgm)")

    meta = {
        "pixel_pitch": image.pixel_pitch,
        "center_x": image.center[0],
        "center_y": image.center[1],
        "na_limit": image.na_limit,
        "n1": image.n1,
        "polarizer_deg": image.polarizer_deg,
        "intensity_scale": scale,
    }
    if extra_metadata:
        meta.update(extra_metadata)
    mpath = metadata_path or _metadata_path(path)
    with open(mpath, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return mpath


def _read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    tokens = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise ValueError(f"not a binary PGM file: {path}")
    width, height, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    pos += 1  # single whitespace after maxval
    dtype = ">u2" if maxval > 255 else "u1"
    arr = np.frombuffer(data, dtype=dtype, count=width * height, offset=pos)
    return arr.reshape(height, width).astype(np.uint16)


def load_measurement(path: str, metadata_path: str | None = None) -> BfpImage:
    """Load a measured (or previously saved) BFP image with its metadata.

    Raises MetadataError when required metadata fields are missing or of
    the wrong type, and InvalidApertureError when the recorded aperture
    exceeds the collection index.
    """
    mpath = metadata_path or _metadata_path(path)
    try:
        with open(mpath) as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise MetadataError(f"metadata sidecar not found: {mpath}") from exc
    except json.JSONDecodeError as exc:
        raise MetadataError(f"metadata is not valid JSON: {exc}") from exc
    missing = [k for k in _METADATA_FIELDS if k not in meta]
    if missing:
        raise MetadataError(f"metadata missing required fields: {missing}")
    bad = [k for k, types in _METADATA_FIELDS.items()
           if not isinstance(meta[k], types) or isinstance(meta[k], bool)]
    if bad:
        raise MetadataError(f"metadata fields with invalid types: {bad}")

    ext = os.path.splitext(path)[1].lower()
    if ext == ".png":
        raw = np.array(Image.open(path), dtype=np.uint16)
    elif ext == ".pgm":
        raw = _read_pgm(path)
    else:
        raise ValueError(f"unsupported image format {ext!r} (use .png or .pgm)")
    scale = float(meta.get("intensity_scale", 1.0))
    return BfpImage(
        pixels=raw.astype(float) / scale,
        pixel_pitch=float(meta["pixel_pitch"]),
        center=(float(meta["center_x"]), float(meta["center_y"])),
        na_limit=float(meta["na_limit"]),
        n1=float(meta["n1"]),
        polarizer_deg=None if meta["polarizer_deg"] is None
        else float(meta["polarizer_deg"]))
