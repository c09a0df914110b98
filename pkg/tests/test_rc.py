import numpy as np
import pytest

from flexenv.model import validate_system
from flexenv.rc import (
    CAPACITY_PER_M2,
    CONDUCTANCE_PER_M2,
    Construction,
    Edge,
    Insulation,
    NetworkError,
    NineRoomParams,
    RcNetwork,
    Room,
    adiabatic_room,
    ambient_from_csv,
    archetype_catalog,
    compile_network,
    constant_ambient,
    load_model,
    nine_room_builder,
    one_zone,
    swiss_house,
    synth_ambient,
)


def test_swiss_house_compiles_to_table_values():
    sysm, d = compile_network(swiss_house(), constant_ambient(10.0, 900, 4))
    assert sysm.A[0, 0] == pytest.approx(-2.5e-6)
    assert sysm.B_p[0, 0] == pytest.approx(5e-8)
    assert sysm.B_d[0, 0] == pytest.approx(2.5e-6)      # ambient channel G/C
    assert (sysm.x_min[0], sysm.x_max[0], sysm.x0[0]) == (22.0, 24.0, 23.0)
    assert sysm.p_max[0] == 1000.0
    assert d.values.shape == (4, 2)


def test_catalog_has_twelve_archetypes():
    cat = archetype_catalog()
    assert len(cat) == 12
    assert set(cat) == {f"{c.value}-{i.value}" for c in Construction for i in Insulation}


@pytest.mark.parametrize("construction", list(Construction))
@pytest.mark.parametrize("insulation", list(Insulation))
def test_archetype_values_scale_with_area(construction, insulation):
    net = archetype_catalog(area=50.0, power_density=20.0)[f"{construction.value}-{insulation.value}"]
    room = net.rooms[0]
    assert room.C == pytest.approx(CAPACITY_PER_M2[construction] * 50.0)
    assert 1.0 / room.R_amb == pytest.approx(CONDUCTANCE_PER_M2[insulation] * 50.0)
    assert room.p_max_room == pytest.approx(1000.0)


def test_table_values():
    assert [CAPACITY_PER_M2[c] for c in Construction] == [0.1e6, 0.3e6, 0.5e6]
    assert [CONDUCTANCE_PER_M2[i] for i in Insulation] == [0.34, 0.86, 1.14, 1.71]


def test_archetype_rejects_nonpositive_sizing():
    with pytest.raises(ValueError):
        archetype_catalog(area=0.0)


@pytest.mark.parametrize("insulated", [False, True])
def test_nine_room_structure(insulated):
    rc = nine_room_builder(insulated)
    sysm, d = compile_network(rc, constant_ambient(10.0, 900, 8))
    assert sysm.state_dim == 9 and sysm.power_dim == 9
    assert validate_system(sysm) == []
    H = rc.conductance_matrix()
    assert np.allclose(H, H.T)
    # grid adjacency: 12 internal surfaces (6 walls + 6 floors)
    assert len(rc.edges) == 12
    assert sysm.state_labels[4] == "F1R1"
    # energy conservation: with T_a = T everywhere there is no drift
    assert np.allclose(sysm.A.sum(axis=1) + sysm.B_d[:, 0], 0.0)


def test_indoor_insulation_scales_internal_resistances():
    plain = nine_room_builder(False)
    ins = nine_room_builder(True)
    f = NineRoomParams().indoor_insulation_factor
    assert np.allclose(ins.conductance_matrix() * f, plain.conductance_matrix())
    assert [r.R_amb for r in ins.rooms] == [r.R_amb for r in plain.rooms]


def test_nine_room_exposure():
    p = NineRoomParams()
    rc = nine_room_builder(False)
    ua = {r.label: 1.0 / r.R_amb for r in rc.rooms}
    assert ua["F0R0"] == pytest.approx(3 * p.facade_wall + p.ground)
    assert ua["F1R1"] == pytest.approx(2 * p.facade_wall)
    assert ua["F2R2"] == pytest.approx(3 * p.facade_wall + p.roof)


def test_nine_room_overrides():
    rc = nine_room_builder(False, {"C_room": 1e6, "p_max_room": 500.0})
    assert all(r.C == 1e6 and r.p_max_room == 500.0 for r in rc.rooms)


def test_adiabatic_room_drops_neighbours():
    rc = nine_room_builder(False)
    solo = adiabatic_room(rc, 4)
    assert solo.n == 1 and solo.edges == ()
    assert solo.rooms[0].R_amb == rc.rooms[4].R_amb


@pytest.mark.parametrize(
    "net, msg",
    [
        (RcNetwork(()), "no rooms"),
        (RcNetwork((Room("a", -1.0, 1.0),)), "capacity"),
        (RcNetwork((Room("a", 1.0, 1.0), Room("b", 1.0, 1.0)), (Edge(0, 2, 1.0),)), "missing room"),
        (RcNetwork((Room("a", 1.0, 1.0),), (Edge(0, 0, 1.0),)), "self-loop"),
        (RcNetwork((Room("a", 1.0, 1.0),), T0=30.0), "comfort band"),
        (RcNetwork((Room("a", 1.0, 1.0, heated=False),)), "no heated room"),
    ],
)
def test_network_validation(net, msg):
    with pytest.raises(NetworkError, match=msg):
        net.validate()


def test_unheated_room_has_no_input_column():
    rc = RcNetwork((Room("a", 1e6, 0.01), Room("b", 1e6, 0.01, heated=False)), (Edge(0, 1, 0.1),))
    sysm, _ = compile_network(rc, constant_ambient(5.0, 60, 2))
    assert sysm.B_p.shape == (2, 1)
    assert sysm.A[0, 1] == pytest.approx(10.0 / 1e6)


def test_network_json_round_trip(tmp_path):
    rc = nine_room_builder(True)
    rc.dump(tmp_path / "b.json")
    assert RcNetwork.load(tmp_path / "b.json") == rc
    assert isinstance(load_model(tmp_path / "b.json"), RcNetwork)


def test_synthetic_ambient():
    amb = synth_ambient(5.0, 10.0, 86400.0, 900.0, 96)
    assert amb.values[0] == pytest.approx(5.0)
    assert amb.values[24] == pytest.approx(15.0)
    assert amb.K == 96


def test_ambient_csv(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("timestamp_s,temp_C\n0,1.5\n900,2.0\n1800,2.5\n")
    amb = ambient_from_csv(path)
    assert amb.dt == 900.0 and list(amb.values) == [1.5, 2.0, 2.5]


@pytest.mark.parametrize(
    "text, msg",
    [
        ("timestamp_s,temp_C\n", "no ambient samples"),
        ("0,1\n900,\n", "missing temperature"),
        ("0,1\n900,2\n600,3\n", "strictly increasing"),
        ("0,1\n900,2\n2000,3\n", "uniform"),
    ],
)
def test_ambient_csv_errors(tmp_path, text, msg):
    path = tmp_path / "t.csv"
    path.write_text(text)
    with pytest.raises(ValueError, match=msg):
        ambient_from_csv(path)


def test_short_ambient_is_rejected():
    with pytest.raises(NetworkError):
        compile_network(one_zone(1e6, 10, 100), constant_ambient(0.0, 900, 2), K=5)
