import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isac_chansim import scenario as sc
from isac_chansim.scenario import (
    EoType2,
    LosModel,
    LosState,
    Node,
    NodeKind,
    Scenario,
    SensingMode,
    Target,
    los_state,
    specular_paths,
    validate,
)

C = sc.SPEED_OF_LIGHT


def make_scenario(mode=SensingMode.BS_MONOSTATIC, tx="bs0", rx="bs0", nodes=None, **kwargs):
    if nodes is None:
        nodes = (
            Node("bs0", NodeKind.BS, (0.0, 0.0, 10.0), (0.0, 0.0, 0.0)),
            Node("bs1", NodeKind.BS, (100.0, 0.0, 10.0), (0.0, 0.0, 0.0)),
            Node("ue0", NodeKind.UE, (50.0, 20.0, 1.5), (0.0, 0.0, 0.0)),
        )
    return Scenario(carrier_hz=3.5e9, nodes=nodes, mode=mode, tx_node_id=tx, rx_node_id=rx, **kwargs)


class TestSensingMode:
    def test_six_modes_exist(self):
        assert len(SensingMode) == 6

    @pytest.mark.parametrize(
        "mode,tx_kind,rx_kind,mono",
        [
            (SensingMode.BS_BS_BISTATIC, NodeKind.BS, NodeKind.BS, False),
            (SensingMode.BS_MONOSTATIC, NodeKind.BS, NodeKind.BS, True),
            (SensingMode.BS_UE_BISTATIC, NodeKind.BS, NodeKind.UE, False),
            (SensingMode.UE_BS_BISTATIC, NodeKind.UE, NodeKind.BS, False),
            (SensingMode.UE_UE_BISTATIC, NodeKind.UE, NodeKind.UE, False),
            (SensingMode.UE_MONOSTATIC, NodeKind.UE, NodeKind.UE, True),
        ],
    )
    def test_mode_properties(self, mode, tx_kind, rx_kind, mono):
        assert mode.tx_kind == tx_kind
        assert mode.rx_kind == rx_kind
        assert mode.is_monostatic == mono


class TestValidate:
    def test_valid_monostatic(self):
        assert validate(make_scenario()) == []

    def test_mode_kind_mismatch(self):
        bad = make_scenario(mode=SensingMode.BS_UE_BISTATIC, tx="bs0", rx="bs1")
        violations = validate(bad)
        assert any(v.startswith("mode-kind-mismatch") for v in violations)

    def test_unresolved_node(self):
        bad = make_scenario(mode=SensingMode.BS_BS_BISTATIC, tx="bs0", rx="nope")
        violations = validate(bad)
        assert any(v.startswith("unresolved-node") for v in violations)

    def test_monostatic_requires_same_node(self):
        bad = make_scenario(mode=SensingMode.BS_MONOSTATIC, tx="bs0", rx="bs1")
        assert any(v.startswith("monostatic-node-mismatch") for v in validate(bad))

    def test_bistatic_requires_distinct_nodes(self):
        bad = make_scenario(mode=SensingMode.BS_BS_BISTATIC, tx="bs0", rx="bs0")
        assert any(v.startswith("bistatic-same-node") for v in validate(bad))

    def test_duplicate_target_ids(self):
        t = Target(id="t", position=(10.0, 0.0, 1.0), velocity=(0.0, 0.0, 0.0))
        bad = make_scenario(targets=(t, t))
        assert any(v.startswith("duplicate-target-id") for v in validate(bad))

    def test_idempotent_and_pure(self):
        scn = make_scenario(mode=SensingMode.BS_UE_BISTATIC, tx="bs0", rx="bs1")
        first = validate(scn)
        second = validate(scn)
        assert first == second


class TestLosState:
    def test_fixed_models(self):
        rng = np.random.default_rng(0)
        assert los_state(1e6, LosModel("fixed-los"), rng) is LosState.LOS
        assert los_state(0.0, LosModel("fixed-nlos"), rng) is LosState.NLOS

    def test_exponential_zero_distance(self):
        rng = np.random.default_rng(1)
        model = LosModel("exponential", d0=50.0)
        assert all(los_state(0.0, model, rng) is LosState.LOS for _ in range(100))

    def test_exponential_fraction_at_d0(self):
        rng = np.random.default_rng(7)
        model = LosModel("exponential", d0=50.0)
        n = 100_000
        hits = sum(los_state(50.0, model, rng) is LosState.LOS for _ in range(n))
        assert hits / n == pytest.approx(math.exp(-1), abs=0.01)

    def test_reproducible_sequence(self):
        model = LosModel("exponential", d0=25.0)
        seq1 = [los_state(30.0, model, np.random.default_rng(123)) for _ in range(1)]
        run1 = [los_state(d, model, rng) for rng in [np.random.default_rng(5)] for d in range(1, 50)]
        run2 = [los_state(d, model, rng) for rng in [np.random.default_rng(5)] for d in range(1, 50)]
        assert run1 == run2
        assert seq1[0] in (LosState.LOS, LosState.NLOS)

    def test_model_validation(self):
        with pytest.raises(ValueError):
            LosModel("exponential", d0=0.0)
        with pytest.raises(ValueError):
            LosModel("sometimes")
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            los_state(-1.0, LosModel("fixed-los"), rng)


def ground_scenario(tx_pos, rx_pos, coeff=1.0, normal=(0.0, 0.0, 1.0), point=(0.0, 0.0, 0.0)):
    nodes = (
        Node("a", NodeKind.BS, tx_pos, (0.0, 0.0, 0.0)),
        Node("b", NodeKind.BS, rx_pos, (0.0, 0.0, 0.0)),
    )
    eo = EoType2(id="ground", point=point, normal=normal, reflection_coeff=coeff)
    return Scenario(
        carrier_hz=3.5e9,
        nodes=nodes,
        mode=SensingMode.BS_BS_BISTATIC,
        tx_node_id="a",
        rx_node_id="b",
        environment_objects=(eo,),
    )


class TestSpecularPaths:
    def test_image_method_geometry(self):
        scn = ground_scenario((0.0, 0.0, 2.0), (10.0, 0.0, 2.0))
        paths = specular_paths(scn)
        assert len(paths) == 1
        d_total = math.sqrt(10.0**2 + 4.0**2)
        assert d_total == pytest.approx(10.770, abs=5e-4)
        assert paths[0].delay_s == pytest.approx(d_total / C, rel=1e-12)
        assert paths[0].delay_s == pytest.approx(35.93e-9, abs=0.005e-9)
        lam = scn.wavelength
        assert paths[0].gain == pytest.approx(lam / (4 * math.pi * d_total), rel=1e-12)

    def test_zero_coefficient_omitted(self):
        scn = ground_scenario((0.0, 0.0, 2.0), (10.0, 0.0, 2.0), coeff=0.0)
        assert specular_paths(scn) == []

    def test_plane_behind_endpoints(self):
        # both endpoints on the negative-normal side: no reflecting face hit
        scn = ground_scenario((0.0, 0.0, -2.0), (10.0, 0.0, -2.0))
        assert specular_paths(scn) == []

    def test_straddling_endpoints(self):
        scn = ground_scenario((0.0, 0.0, 2.0), (10.0, 0.0, -2.0))
        assert specular_paths(scn) == []

    def test_departure_points_toward_plane(self):
        scn = ground_scenario((0.0, 0.0, 2.0), (10.0, 0.0, 2.0))
        path = specular_paths(scn)[0]
        assert path.aod[1] > math.pi / 2  # zenith below horizontal: downward

    @settings(max_examples=60, deadline=None)
    @given(
        st.floats(0.5, 50.0),
        st.floats(0.5, 50.0),
        st.floats(-40.0, 40.0),
        st.floats(0.1, 40.0),
    )
    def test_delay_at_least_direct(self, h_tx, h_rx, x_rx, y_rx):
        tx = (0.0, 0.0, h_tx)
        rx = (x_rx, y_rx, h_rx)
        scn = ground_scenario(tx, rx)
        direct = np.linalg.norm(np.array(rx) - np.array(tx)) / C
        for path in specular_paths(scn):
            assert path.delay_s >= direct - 1e-18


class TestConstruction:
    def test_type2_normal_must_be_unit(self):
        with pytest.raises(ValueError):
            EoType2(id="w", point=(0, 0, 0), normal=(0, 0, 2.0))

    def test_reflection_coeff_bounds(self):
        with pytest.raises(ValueError):
            EoType2(id="w", point=(0, 0, 0), normal=(0, 0, 1.0), reflection_coeff=1.5)

    def test_scalar_rcs_nonnegative(self):
        with pytest.raises(ValueError):
            Target(id="t", position=(1, 0, 0), velocity=(0, 0, 0), rcs=-2.0)

    def test_finite_positions(self):
        with pytest.raises(ValueError):
            Node("n", NodeKind.BS, (np.inf, 0, 0), (0, 0, 0))


class TestLoader:
    def test_bundled_table1_round_trip(self):
        from isac_chansim.cli import bundled_scenario

        scn, doc = sc.load_scenario_file(bundled_scenario("table1"))
        assert validate(scn) == []
        assert scn.carrier_hz == 3.5e9
        assert scn.mode is SensingMode.BS_MONOSTATIC
        assert scn.targets[0].id == "car0"
        assert np.linalg.norm(scn.targets[0].velocity) == pytest.approx(41.6667)
        assert "ofdm" in doc

    def test_unknown_key_rejected(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text(
            """
[scenario]
carrier_hz = 1e9
mode = "bs-mono"
tx = "a"
rx = "a"
typo_key = 3

[[nodes]]
id = "a"
kind = "bs"
position_m = [0.0, 0.0, 1.0]
"""
        )
        with pytest.raises(sc.ScenarioLoadError, match="typo_key"):
            sc.load_scenario_file(bad)

    def test_full_featured_document(self, tmp_path):
        doc = tmp_path / "full.toml"
        doc.write_text(
            """
[scenario]
carrier_hz = 28e9
mode = "bs-ue"
tx = "bs0"
rx = "ue0"
seed = 11

[scenario.los]
model = "exponential"
d0_m = 40.0

[[nodes]]
id = "bs0"
kind = "bs"
position_m = [0.0, 0.0, 25.0]

[[nodes]]
id = "ue0"
kind = "ue"
position_m = [80.0, 10.0, 1.5]
velocity_mps = [1.0, 0.0, 0.0]

[[targets]]
id = "drone"
position_m = [40.0, 5.0, 30.0]
velocity_mps = [0.0, 3.0, 0.0]
[targets.shape]
kind = "cylinder"
radius_m = 0.1
height_m = 0.4
reflectivity = 0.8
[targets.micro_motion]
kind = "rotor"
n_blades = 4
blade_length_m = 0.15
rpm = 6000

[[targets]]
id = "walker"
position_m = [20.0, -5.0, 1.0]
rcs_m2 = 0.5
[targets.micro_motion]
kind = "pendulum-arm"
peak_speed_mps = 2.0

[[environment]]
kind = "type1"
id = "parked-van"
position_m = [55.0, -10.0, 1.5]
rcs_m2 = 20.0

[[environment]]
kind = "type2"
id = "ground"
point_m = [0.0, 0.0, 0.0]
normal = [0.0, 0.0, 1.0]
reflection_coeff = 0.4
"""
        )
        scn, _ = sc.load_scenario_file(doc)
        assert validate(scn) == []
        assert scn.los_model.kind == "exponential" and scn.los_model.d0 == 40.0
        from isac_chansim import microdoppler, rcs

        assert isinstance(scn.targets[0].rcs, rcs.Cylinder)
        assert isinstance(scn.targets[0].micro_motion, microdoppler.Rotor)
        assert isinstance(scn.targets[1].micro_motion, microdoppler.PendulumArm)
        kinds = [type(e).__name__ for e in scn.environment_objects]
        assert kinds == ["EoType1", "EoType2"]

    def test_shape_and_scalar_rcs_exclusive(self, tmp_path):
        bad = tmp_path / "bad.toml"
        bad.write_text(
            """
[scenario]
carrier_hz = 1e9
mode = "bs-mono"
tx = "a"
rx = "a"

[[nodes]]
id = "a"
kind = "bs"
position_m = [0.0, 0.0, 1.0]

[[targets]]
id = "t"
position_m = [10.0, 0.0, 1.0]
rcs_m2 = 1.0

[targets.shape]
kind = "sphere"
radius_m = 0.5
"""
        )
        with pytest.raises(sc.ScenarioLoadError, match="either rcs_m2 or shape"):
            sc.load_scenario_file(bad)
