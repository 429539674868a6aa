# Copyright 2026 The relightnav Authors
# SPDX-License-Identifier: Apache-2.0

"""Relightable Gaussian splat simulator for UAV navigation."""

from ._core import (
    Environment,
    Light,
    OcclusionField,
    ParseError,
    ProtocolError,
    RelitContext,
    Scene,
    build_occlusion_field,
    constant_light,
    default_sky_light,
    gen_forest,
    light_from_coeffs,
    light_presets,
    load_light_spec,
    load_occlusion_field,
    load_scene,
    render_baked,
    sh_eval,
    sh_rotate_z,
)

__all__ = [
    "Environment",
    "Light",
    "OcclusionField",
    "ParseError",
    "ProtocolError",
    "RelitContext",
    "Scene",
    "build_occlusion_field",
    "constant_light",
    "default_sky_light",
    "gen_forest",
    "light_from_coeffs",
    "light_presets",
    "load_light_spec",
    "load_occlusion_field",
    "load_scene",
    "render_baked",
    "sh_eval",
    "sh_rotate_z",
]
