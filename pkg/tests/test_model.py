from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from carbonsnap.errors import ValidationError
from carbonsnap.model import (
    ActiveBreakdown,
    Inventory,
    NodeGroup,
    NodeRole,
    Site,
    active_carbon,
    aggregate_active,
    apply_pue,
    facilities_overhead,
    total_carbon,
)
from carbonsnap.quantities import (
    CarbonIntensity,
    CarbonQuantity,
    EnergyQuantity,
    PueFactor,
)

kwh = st.decimals(min_value=0, max_value=10**6, places=3, allow_nan=False, allow_infinity=False)
g_per_kwh = st.decimals(min_value=0, max_value=2000, places=2, allow_nan=False, allow_infinity=False)


class TestActiveCarbon:
    def test_reference_low(self):
        carbon = active_carbon(EnergyQuantity(19380), CarbonIntensity(50))
        assert carbon.grams == 969_000
        assert carbon.kilograms == 969

    def test_zero_energy(self):
        assert active_carbon(EnergyQuantity(0), CarbonIntensity(300)).grams == 0

    def test_reference_high(self):
        carbon = active_carbon(EnergyQuantity(19380), CarbonIntensity(300))
        assert carbon.kilograms == 5814

    @given(a=kwh, b=kwh, ci=g_per_kwh)
    def test_linearity(self, a, b, ci):
        intensity = CarbonIntensity(ci)
        joint = active_carbon(EnergyQuantity(a) + EnergyQuantity(b), intensity)
        split = active_carbon(EnergyQuantity(a), intensity) + active_carbon(
            EnergyQuantity(b), intensity
        )
        assert joint == split

    @given(e=kwh, ci1=g_per_kwh, ci2=g_per_kwh)
    def test_monotone_in_intensity(self, e, ci1, ci2):
        lo, hi = sorted([ci1, ci2])
        energy = EnergyQuantity(e)
        assert (
            active_carbon(energy, CarbonIntensity(lo)).grams
            <= active_carbon(energy, CarbonIntensity(hi)).grams
        )


class TestApplyPue:
    def test_reference_low_pue(self):
        result = apply_pue(CarbonQuantity.from_kg(969), PueFactor("1.1"))
        assert result.kilograms == Fraction("1065.9")

    def test_reference_medium_unrounded_base(self):
        result = apply_pue(CarbonQuantity.from_kg("3391.5"), PueFactor("1.3"))
        assert result.kilograms == Fraction("4408.95")

    def test_identity(self):
        carbon = CarbonQuantity.from_kg(100)
        assert apply_pue(carbon, PueFactor(1)) == carbon

    @given(c=kwh, p=st.decimals(min_value=1, max_value=3, places=3))
    def test_consistency_with_overhead(self, c, p):
        carbon = CarbonQuantity.from_kg(c)
        pue = PueFactor(p)
        assert apply_pue(carbon, pue) == carbon + facilities_overhead(carbon, pue)


class TestAggregateActive:
    def test_sums_per_tag(self):
        breakdown = aggregate_active(
            [
                ("nodes", CarbonQuantity.from_kg(100)),
                ("nodes", CarbonQuantity.from_kg(50)),
                ("facilities", CarbonQuantity.from_kg(30)),
            ]
        )
        assert breakdown.nodes.kilograms == 150
        assert breakdown.network.kilograms == 0
        assert breakdown.facilities.kilograms == 30

    def test_empty(self):
        breakdown = aggregate_active([])
        assert breakdown.total().grams == 0

    def test_unknown_tag(self):
        with pytest.raises(ValidationError, match="unknown active component"):
            aggregate_active([("cooling-tower", CarbonQuantity(1))])

    def test_six_site_nodes_carbon(self):
        site_kwh = ["1299", "261", "8154", "3831", "4271", "944"]
        intensity = CarbonIntensity(175)
        parts = [
            ("nodes", active_carbon(EnergyQuantity(v), intensity)) for v in site_kwh
        ]
        breakdown = aggregate_active(parts)
        assert breakdown.nodes == active_carbon(EnergyQuantity(18760), intensity)

    def test_total_is_exact_field_sum(self):
        breakdown = ActiveBreakdown(
            nodes=CarbonQuantity.from_kg("0.001"),
            network=CarbonQuantity.from_kg("0.002"),
            facilities=CarbonQuantity.from_kg("0.003"),
        )
        assert breakdown.total().kilograms == Fraction("0.006")


class TestTotalCarbon:
    def test_minimum_scenario(self):
        total = total_carbon(CarbonQuantity.from_kg(1066), CarbonQuantity.from_kg(375))
        assert total.kilograms == 1441

    def test_zero(self):
        assert total_carbon(CarbonQuantity(0), CarbonQuantity(0)).grams == 0

    def test_maximum_scenario(self):
        # independently: 9302 + 2409 = 11711
        total = total_carbon(CarbonQuantity.from_kg(9302), CarbonQuantity.from_kg(2409))
        assert total.kilograms == 11711

    @given(x=kwh, y=kwh)
    def test_decomposition(self, x, y):
        active = CarbonQuantity.from_kg(x)
        embodied = CarbonQuantity.from_kg(y)
        assert total_carbon(active, embodied).grams - active.grams == embodied.grams


class TestInventoryTypes:
    def test_role_parse(self):
        assert NodeRole.parse("Compute") is NodeRole.COMPUTE
        with pytest.raises(ValidationError):
            NodeRole.parse("gpu-fleet")

    def test_counts_validated(self):
        with pytest.raises(ValidationError):
            NodeGroup(name="cpu", role=NodeRole.COMPUTE, count=0)

    def test_lifespan_positive(self):
        with pytest.raises(ValidationError):
            NodeGroup(name="cpu", role=NodeRole.COMPUTE, count=1, lifespan_years=0)

    def test_duplicate_group_names(self):
        group = NodeGroup(name="cpu", role=NodeRole.COMPUTE, count=1)
        with pytest.raises(ValidationError, match="duplicate node group"):
            Site(name="X", node_groups=(group, group))

    def test_duplicate_site_names(self):
        site = Site(name="X")
        with pytest.raises(ValidationError, match="duplicate site"):
            Inventory(sites=(site, site))

    def test_total_node_count(self):
        inventory = Inventory(
            sites=(
                Site(
                    name="A",
                    node_groups=(
                        NodeGroup(name="cpu", role=NodeRole.COMPUTE, count=10),
                        NodeGroup(name="disk", role=NodeRole.STORAGE, count=5),
                    ),
                ),
            )
        )
        assert inventory.total_node_count() == 15
