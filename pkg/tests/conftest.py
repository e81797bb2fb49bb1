import itertools
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hcbcache.placement import NetworkConfig, check_config, validate_config  # noqa: E402


def make_config(D_T, D_R, t_T, t_R):
    """Config with the requested hypercube shape (``N = D_T * D_R``)."""
    N = D_T * D_R
    return NetworkConfig(K_T=t_T * D_T, K_R=t_R * D_R, M_T=N // D_T, M_R=N // D_R, N=N)


def make_params(D_T, D_R, t_T, t_R):
    return validate_config(make_config(D_T, D_R, t_T, t_R))


def small_grid(max_D=4, max_L=6):
    """Every valid shape with ``D_T, D_R <= max_D`` and ``t_T + t_R <= max_L``."""
    out = []
    for D_T, D_R in itertools.product(range(1, max_D + 1), range(1, max_D + 1)):
        for t_R in range(1, max_L):
            for t_T in range(1, max_L - t_R + 1):
                cfg = make_config(D_T, D_R, t_T, t_R)
                if not check_config(cfg):
                    out.append(validate_config(cfg))
    return out


@pytest.fixture
def ex3():
    return validate_config(NetworkConfig(K_T=4, K_R=4, M_T=2, M_R=2, N=4))


def pid(p):
    """Short test id such as ``DT2-DR3-tT2-tR1``."""
    return f"DT{p.D_T}-DR{p.D_R}-tT{p.t_T}-tR{p.t_R}"
