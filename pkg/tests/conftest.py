import numpy as np
import pytest

import ifind_sim as ifs
from ifind_sim.chain import bundled_config_path
from ifind_sim.dualarm import assemble_rig
from ifind_sim.surface import load_mesh

PRESETS = ("ifind-v1", "ifind-v2", "ifind-v3-arm")


def preset_config_path(name: str):
    return bundled_config_path("chains", f"{name}.yaml")


@pytest.fixture(scope="session")
def chains():
    return {name: ifs.load_chain(name) for name in PRESETS}


@pytest.fixture(scope="session")
def v2(chains):
    return chains["ifind-v2"]


@pytest.fixture(scope="session")
def rig():
    return assemble_rig("ifind-v3")


@pytest.fixture(scope="session")
def phantom():
    return load_mesh(bundled_config_path("meshes", "phantom-abdomen.off"))


def random_joint_vectors(chain, n, seed):
    rng = np.random.default_rng(seed)
    lo = np.array([j.limits[0] for j in chain.joints])
    hi = np.array([j.limits[1] for j in chain.joints])
    return lo + (hi - lo) * rng.random((n, len(chain)))
