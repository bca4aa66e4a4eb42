import dataclasses

import pytest
from hypothesis import given, settings, strategies as st

from memaccel.hardware import (Engine, cid_area_overhead, peak_bandwidth,
                               peak_compute, validate)


class TestDefaultsMatchPublishedConfig:
    """The shipped default file must reproduce the reference design point
    field for field."""

    def test_hbm_capacity_and_stacks(self, hw):
        assert hw.cid.num_stacks == 5
        assert hw.cid.capacity_bytes == 80 * 2**30

    def test_crossbar_hierarchy(self, hw):
        assert hw.cim.tile_mesh == (4, 4)
        assert hw.cim.core_mesh == (2, 2)
        assert hw.cim.crossbars_per_core == 8
        assert hw.cim.crossbar_rows == 128 and hw.cim.crossbar_cols == 128

    def test_adc(self, hw):
        assert hw.cim.adc_per_crossbar == 48
        assert hw.cim.adc_bits == 7

    def test_buffers(self, hw):
        assert hw.cim.gb_bytes == 4 * 2**20 and hw.cim.gb_bw == 2e12
        assert hw.cim.ib_bytes == 32 * 2**10 and hw.cim.ib_bw == 4e12
        assert hw.cim.wb_bytes == 64 * 2**10 and hw.cim.wb_bw == 4e12
        assert hw.cim.ob_bytes == 128 * 2**10 and hw.cim.ob_bw == 4e12

    def test_vector_width(self, hw):
        assert hw.logic_die.vector_width == 512

    def test_bank_units(self, hw):
        assert hw.cid.multipliers_per_bank == 32
        assert hw.cid.local_buffer_bytes == 4096
        assert hw.cid.double_buffered

    def test_systolic_variant(self, hw):
        assert hw.systolic.arrays_per_core == 2
        assert hw.systolic.array_rows == 128 and hw.systolic.array_cols == 128
        assert hw.systolic.mac_bits == 8 and hw.systolic.iso_area


class TestValidate:
    def test_default_config_valid(self, hw):
        report = validate(hw)
        assert report.ok and report.violations == []

    def test_no_compute_flagged(self, hw):
        bad = dataclasses.replace(hw, cid=dataclasses.replace(hw.cid,
                                                              multipliers_per_bank=0))
        report = validate(bad)
        assert any("no CiD compute" in v for v in report.violations)

    def test_oversized_buffer_breaks_area_budget(self, hw):
        # 40KB buffer with these area parameters pushes past the 10% ceiling.
        bad = dataclasses.replace(hw, cid=dataclasses.replace(
            hw.cid, local_buffer_bytes=40 * 1024))
        report = validate(bad)
        assert report.area_overhead > 0.10
        assert any("area overhead" in v for v in report.violations)

    def test_wordline_options(self, hw):
        for wl in (128, 64):
            good = dataclasses.replace(hw, cim=dataclasses.replace(
                hw.cim, wordlines_active=wl))
            assert validate(good).ok
        bad = dataclasses.replace(hw, cim=dataclasses.replace(
            hw.cim, wordlines_active=96))
        assert not validate(bad).ok

    def test_area_overhead_monotone(self, hw):
        base = cid_area_overhead(hw.cid, hw.area)
        more_mults = cid_area_overhead(
            dataclasses.replace(hw.cid, multipliers_per_bank=64), hw.area)
        more_buffer = cid_area_overhead(
            dataclasses.replace(hw.cid, local_buffer_bytes=8192), hw.area)
        assert more_mults > base and more_buffer > base


class TestPeaks:
    def test_cid_peak_formula(self, hw):
        banks = 5 * 16 * 4 * 4
        assert peak_compute(Engine.CID, hw) == 2 * banks * 32 * hw.cid.dram_clock

    def test_cid_peak_example_config(self, hw):
        # 5 stacks x 16 channels x 4 BG x 4 banks x 32 mults at a given clock.
        cid = dataclasses.replace(hw.cid, dram_clock=1.5e9)
        hw2 = dataclasses.replace(hw, cid=cid)
        assert peak_compute(Engine.CID, hw2) == 2 * 5 * 16 * 4 * 4 * 32 * 1.5e9

    def test_cim_peak_formula(self, hw):
        cim = hw.cim
        expected = (2 * cim.total_crossbars * cim.wordlines_active
                    * cim.adc_per_crossbar * cim.cim_clock / cim.input_stream_bits)
        assert peak_compute(Engine.CIM, hw) == expected

    def test_halving_wordlines_halves_cim_peak(self, hw):
        half = dataclasses.replace(hw, cim=dataclasses.replace(hw.cim,
                                                               wordlines_active=64))
        assert peak_compute(Engine.CIM, half) == peak_compute(Engine.CIM, hw) / 2

    def test_sa_peak_example(self, hw):
        # 4x4 tiles x 2x2 cores x 2 arrays of 128x128 at 1 GHz
        sa = dataclasses.replace(hw.systolic, sa_clock=1e9)
        hw2 = dataclasses.replace(hw, systolic=sa)
        assert peak_compute(Engine.SA, hw2) == 2 * 16 * 4 * 2 * 128 * 128 * 1e9

    def test_unknown_engine_rejected(self, hw):
        with pytest.raises(ValueError):
            peak_compute("gpu", hw)  # type: ignore[arg-type]
        with pytest.raises(ValueError):
            peak_bandwidth("gpu", hw)  # type: ignore[arg-type]

    @given(factor_field=st.sampled_from(
        ["num_stacks", "channels_per_stack", "bankgroups_per_channel",
         "banks_per_bankgroup", "multipliers_per_bank"]))
    @settings(max_examples=20, deadline=None)
    def test_cid_peak_linear_in_unit_counts(self, hw, factor_field):
        doubled = dataclasses.replace(
            hw.cid, **{factor_field: 2 * getattr(hw.cid, factor_field)})
        hw2 = dataclasses.replace(hw, cid=doubled)
        assert peak_compute(Engine.CID, hw2) == 2 * peak_compute(Engine.CID, hw)

    @given(factor_field=st.sampled_from(["crossbars_per_core", "adc_per_crossbar"]))
    @settings(max_examples=10, deadline=None)
    def test_cim_peak_linear_in_unit_counts(self, hw, factor_field):
        doubled = dataclasses.replace(
            hw.cim, **{factor_field: 2 * getattr(hw.cim, factor_field)})
        hw2 = dataclasses.replace(hw, cim=doubled)
        assert peak_compute(Engine.CIM, hw2) == 2 * peak_compute(Engine.CIM, hw)


class TestBandwidth:
    def test_internal_at_least_10x_external(self, hw):
        # The whole premise of bank-level compute: internal row bandwidth
        # dwarfs what the crossbar die can pull through the package.
        assert peak_bandwidth(Engine.CID, hw) >= 10 * hw.external_hbm_bandwidth()

    def test_external_is_stack_sum(self, hw):
        assert hw.external_hbm_bandwidth() == hw.cid.num_stacks * hw.hbm_io.per_stack_bw

    def test_crossbar_engine_sees_interposer(self, hw):
        assert peak_bandwidth(Engine.CIM, hw) == min(hw.interposer.bandwidth,
                                                     hw.external_hbm_bandwidth())

    def test_disabling_stacks_scales_both(self, hw):
        one = dataclasses.replace(hw, cid=dataclasses.replace(hw.cid, num_stacks=4))
        assert peak_bandwidth(Engine.CID, one) == pytest.approx(
            peak_bandwidth(Engine.CID, hw) * 4 / 5, rel=1e-12)
        assert one.external_hbm_bandwidth() == pytest.approx(
            hw.external_hbm_bandwidth() * 4 / 5, rel=1e-12)
