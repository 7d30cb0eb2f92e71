import pytest

from irsmap.power_map import build_power_gain_map
from irsmap.scenario import desk_scenario, paper_default_scenario, toy_scenario


@pytest.fixture(scope="session")
def paper_sc():
    return paper_default_scenario()


@pytest.fixture(scope="session")
def paper_sc_no_irs():
    return paper_default_scenario(with_irs=False)


@pytest.fixture(scope="session")
def paper_map_cont(paper_sc):
    return build_power_gain_map(paper_sc, "continuous")


@pytest.fixture(scope="session")
def paper_map_no_irs(paper_sc_no_irs):
    return build_power_gain_map(paper_sc_no_irs, "continuous")


@pytest.fixture(scope="session")
def paper_maps_discrete(paper_sc):
    return {levels: build_power_gain_map(paper_sc, levels) for levels in (2, 4, 8)}


@pytest.fixture(scope="session")
def desk_sc():
    return desk_scenario()


@pytest.fixture(scope="session")
def desk_sc_no_irs():
    return desk_scenario(with_irs=False)


@pytest.fixture(scope="session")
def toy_sc():
    return toy_scenario()
