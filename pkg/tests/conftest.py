import numpy as np
import pytest

from netcrf import SampleFrame, build_geometric_network, generate_positions


def make_frame(y, d, t, f, n_total=None):
    y = np.asarray(y, dtype=float)
    n = len(y)
    return SampleFrame(
        y=y, d=np.asarray(d), t=np.asarray(t), f=np.asarray(f),
        ids=np.arange(n), n_total=n_total if n_total is not None else n,
    )


def identified_effects(means, f, t):
    """Effect fields pinned by occupied (d, t, f) cells.

    A saturated-fit coefficient is a well-defined cell-mean contrast only
    when every cell entering the contrast is occupied; otherwise exactly
    collinear dummy twins exist and which twin survives pivoting (and hence
    the attribution of the combined contrast) is arbitrary.
    """
    names = []
    if (0, 0, f) in means:
        names.append("baseline")
        if (1, 0, f) in means:
            names.append("delta0")
        if (0, t, f) in means:
            names.append("tau0")
            if (1, 0, f) in means and (1, t, f) in means:
                names.append("tau_pm")
    return names


@pytest.fixture(scope="session")
def network_2000():
    return build_geometric_network(generate_positions(2000, 424242), 0.025)


@pytest.fixture(scope="session")
def network_1000():
    return build_geometric_network(generate_positions(1000, 424242), 0.025)
