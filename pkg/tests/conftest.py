"""Shared fixtures: the bundled kernels and a small hand-checkable unit."""

import textwrap

import pytest

from soalens.bench import kernel_case, particle_layout
from soalens.parser import parse

KERNELS = ("density", "force", "kick1", "kick2", "drift")

# Two-component drift variant small enough to hand-compute every offset
# and every arithmetic result in the tests that use it.
TINY_SRC = """
record Pt {
    float64 pos[2];
    float64 vel[2];
    bool updated;
};

void drift2(Pt *particles, int64 size, float64 dt) {
    [[clang::soa_conversion_target(particles)]]
    [[clang::soa_conversion_target_size(size)]]
    [[clang::soa_conversion_inputs(pos, vel, updated)]]
    [[clang::soa_conversion_outputs(pos, updated)]]
    for (int64 i = 0; i < size; i += 1) {
        ref Pt p = particles[i];
        if (!p.updated) {
            p.pos[0] += p.vel[0] * dt;
            p.pos[1] += p.vel[1] * dt;
        }
        p.updated = true;
    }
}
"""


def parse_src(text: str):
    return parse(textwrap.dedent(text))


@pytest.fixture
def tiny_unit():
    return parse_src(TINY_SRC)


@pytest.fixture(params=KERNELS)
def kernel(request):
    return kernel_case(request.param)


@pytest.fixture(scope="session")
def particle():
    return particle_layout()
