"""Canonical antenna geometry used throughout examples and tests.

The design is a planar dielectric antenna: a dense collection substrate
(sapphire), a thin polymer film hosting the emitter, air above, and
optionally a metallic mirror suspended over the film. The decreasing
index ordering n1 > n2 > n3 is what funnels nearly all emission into the
substrate hemisphere.
"""
from __future__ import annotations

from .radiation import DipoleEmitter
from .stack import Layer, LayerStack, OpticalMaterial

DESIGN_WAVELENGTH_NM = 637.0

SAPPHIRE = OpticalMaterial("sapphire", 1.78)
POLYMER = OpticalMaterial("polymer", 1.50)
PMMA = OpticalMaterial("pmma", 1.49)
PVA = OpticalMaterial("pva", 1.50)
AIR = OpticalMaterial("air", 1.00)
# high-quality (template-stripped) gold at the design wavelength; evaporated
# coatings run lossier, about 0.18 + 3.45i, which costs roughly 0.1% of the
# peak collection efficiency
GOLD = OpticalMaterial("gold", 0.14, 3.70)

EMITTER_DEPTH_NM = 200.0   # above the substrate
FILM_THICKNESS_NM = 350.0


def antenna_stack(mirror_separation_nm: float | None = None,
                  split_film: bool = False,
                  mirror: OpticalMaterial = GOLD) -> LayerStack:
    """The reference antenna stack, bottom to top.

    By default the two nearly index-matched polymer sublayers are merged
    into a single n = 1.50 film; split_film=True keeps them separate
    (200 nm n=1.49 below, 150 nm n=1.50 above). mirror_separation_nm, if
    given, places a semi-infinite mirror that far above the film.
    """
    if split_film:
        film = (Layer(PMMA, EMITTER_DEPTH_NM),
                Layer(PVA, FILM_THICKNESS_NM - EMITTER_DEPTH_NM))
    else:
        film = (Layer(POLYMER, FILM_THICKNESS_NM),)
    stack = LayerStack((Layer(SAPPHIRE, None),) + film + (Layer(AIR, None),))
    if mirror_separation_nm is not None:
        stack = stack.with_mirror(mirror_separation_nm, mirror)
    return stack


def antenna_emitter(weights: tuple[float, float, float] = (0.31, 0.345, 0.345)
                    ) -> DipoleEmitter:
    """Emitter 200 nm above the substrate (the sublayer boundary in the
    split-film stack), at the design wavelength. Works with both film
    variants: layer 1 is the host either way."""
    return DipoleEmitter(host_layer=1, z_offset=EMITTER_DEPTH_NM,
                         wavelength_vac=DESIGN_WAVELENGTH_NM, weights=weights)
