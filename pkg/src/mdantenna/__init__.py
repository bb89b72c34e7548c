"""Planar metallo-dielectric antenna toolkit.

Submodules: stack (multilayer plane-wave response), radiation (dipole
emission and power budgets), bfp (back-focal-plane images and IO),
fitting (orientation retrieval), photostats (pulsed-source Monte Carlo),
presets (reference geometry), cli (command-line front end).
"""
from . import errors
from .bfp import BfpImage, load_measurement, phi_integrate_image, render_bfp, save_image
from .fitting import FitConfig, FitResult, fit_axial_ratio, fit_inplane_split, full_fit
from .photostats import (EmitterPhotophysics, FlickerState, G2Histogram,
                         TimestampStream, TimeTrace, biexciton_probability,
                         g2_histogram, noise_fraction, simulate_source, time_trace)
from .radiation import (AngularPattern, DipoleEmitter, EmittedPower, PolarProfile,
                        RadiationBudget, SweepPoint, angular_pattern,
                        farfield_amplitudes, mirror_distance_sweep, mirror_gain,
                        phi_integrated_profile, radiation_budget, total_emitted_power)
from .stack import (Layer, LayerStack, OpticalMaterial, PlaneWaveChannel, fresnel,
                    longitudinal_wavevector, stack_from_json, stack_to_json,
                    substack_coefficients)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
