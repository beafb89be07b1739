"""Shared fixtures: a small fast specimen and a 12-file corpus."""

from __future__ import annotations

import pytest
from hypothesis import HealthCheck, settings

from gcodeguard.gcode import GcodeDocument, parse_document
from gcodeguard.synthgen import SpecimenSpec, build_specimen, generate_dataset

settings.register_profile(
    "package",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("package")

# Small enough to build in milliseconds, big enough to carry every structural
# element (skirt, perimeters, infill, 8 layers).
TINY_SPEC = SpecimenSpec(
    name="chip16x8",
    footprint=((-8.0, -4.0), (8.0, -4.0), (8.0, 4.0), (-8.0, 4.0)),
    height=1.6,
    layer_height=0.2,
    infill_line_distance=2.0,
)


@pytest.fixture(scope="session")
def tiny_doc() -> GcodeDocument:
    return build_specimen(TINY_SPEC, angle_deg=30.0, seed=99)


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """(directory, manifest) for a 12-file sweep of the tiny specimen."""
    out = tmp_path_factory.mktemp("tiny_corpus")
    manifest = generate_dataset(TINY_SPEC, 12, 30.0, out, seed=4242, dataset_id="TINY")
    return out, manifest


def doc_from(text: str) -> GcodeDocument:
    """Parse inline g-code given as a plain string (test helper)."""
    return parse_document(text)
