from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stokesdd import manufactured
from stokesdd.assembly import assemble_system, eliminate_dirichlet
from stokesdd.mesh import build_mesh_pair, build_subdomain_layout
from stokesdd.partition import build_jump_operators, build_saddle_blocks, classify_dofs
from stokesdd.reduced import build_reduced_operator

settings.register_profile(
    "default", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@dataclass
class Pipeline:
    mesh_pair: object
    layout: object
    system: object
    partition: object
    blocks: object
    jumps: object
    op: object


@lru_cache(maxsize=None)
def pipeline(n=8, nsub=2, coarse="corners", pressure="continuous", load=True):
    """Everything up to the reduced operator; ``n`` is pressure cells per side."""
    mp = build_mesh_pair(n)
    layout = build_subdomain_layout(mp, nsub)
    system = eliminate_dirichlet(assemble_system(mp, manufactured.forcing if load else None, pressure))
    part = classify_dofs(mp, layout, coarse, pressure)
    blocks = build_saddle_blocks(system, part)
    jumps = build_jump_operators(part, layout)
    op = build_reduced_operator(blocks, jumps, mp.velocity_mesh.h)
    return Pipeline(mp, layout, system, part, blocks, jumps, op)


VARIANTS = [
    ("corners", "continuous"),
    ("corners+edges", "continuous"),
    ("corners", "discontinuous"),
    ("corners+edges", "discontinuous"),
]


@pytest.fixture(params=VARIANTS, ids=lambda v: f"{v[0]}-{v[1]}")
def variant(request):
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
