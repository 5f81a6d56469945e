import numpy as np
import pytest

from phoneuse import synthgen
from phoneuse.imu import compute_norms_block

FS = 120.0


def band_power(x, fs, f_lo, f_hi):
    """Periodogram power inside a band; plain DFT, no windowing tricks."""
    x = np.asarray(x, dtype=float)
    spec = np.abs(np.fft.rfft(x - x.mean())) ** 2 / len(x)
    freqs = np.fft.rfftfreq(len(x), 1.0 / fs)
    sel = (freqs >= f_lo) & (freqs <= f_hi)
    return float(spec[sel].sum())


def gen(vehicle, phone, seconds=120.0, seed=0):
    return synthgen.generate(synthgen.ScenarioSpec(vehicle, phone, seconds, seed=seed))


class TestScenarioGeneration:
    def test_engine_off_passenger_seat_baseline(self):
        stream = gen("engine-off", "passenger-seat", seed=3)
        a_norm, w_norm = compute_norms_block(stream.acc, stream.gyr)
        assert 9.6 <= a_norm.mean() <= 10.0
        assert w_norm.mean() < 0.05

    def test_engine_on_using_spins_past_two_rad_s(self):
        stream = gen("engine-on", "using", seed=4)
        _, w_norm = compute_norms_block(stream.acc, stream.gyr)
        assert (w_norm > 2.0).any()

    def test_same_seed_same_stream(self):
        a = gen("moving", "using", seed=42)
        b = gen("moving", "using", seed=42)
        assert np.array_equal(a.acc, b.acc)
        assert np.array_equal(a.gyr, b.gyr)

    def test_different_seeds_differ(self):
        a = gen("moving", "using", seed=1)
        b = gen("moving", "using", seed=2)
        assert not np.array_equal(a.acc, b.acc)

    def test_all_samples_satisfy_imu_invariants(self):
        stream = gen("moving", "using", seconds=10.0, seed=5)
        assert np.isfinite(stream.acc).all() and np.isfinite(stream.gyr).all()
        assert (np.diff(stream.t) > 0).all()
        assert stream.t[0] >= 0.0
        for sample in list(stream.samples())[:10]:
            sample.validate()

    def test_uniform_sampling_at_fs(self):
        stream = gen("engine-off", "using", seconds=5.0, seed=6)
        assert np.allclose(np.diff(stream.t), 1.0 / FS)

    def test_labels_follow_phone_state(self):
        assert (gen("moving", "using", 2.0).label == 1).all()
        assert (gen("moving", "phone-holder", 2.0).label == -1).all()

    def test_bad_states_rejected(self):
        with pytest.raises(ValueError):
            gen("flying", "using")
        with pytest.raises(ValueError):
            gen("moving", "juggling")
        with pytest.raises(ValueError):
            synthgen.generate(synthgen.ScenarioSpec("moving", "using", -1.0))

    def test_unknown_amplitude_override_rejected(self):
        spec = synthgen.ScenarioSpec("moving", "using", 1.0, amplitudes={"bogus": 1.0})
        with pytest.raises(ValueError, match="bogus"):
            spec.validate()

    def test_amplitude_override_applies(self):
        loud = synthgen.ScenarioSpec("engine-off", "using", 60.0, seed=7,
                                     amplitudes={"gyro_usage": 2.0})
        quiet = synthgen.ScenarioSpec("engine-off", "using", 60.0, seed=7)
        _, w_loud = compute_norms_block(*(lambda s: (s.acc, s.gyr))(synthgen.generate(loud)))
        _, w_quiet = compute_norms_block(*(lambda s: (s.acc, s.gyr))(synthgen.generate(quiet)))
        assert w_loud.std() > 2.0 * w_quiet.std()


class TestSpectralSignatures:
    def test_usage_band_power_separates_using_from_passenger_seat(self):
        for vehicle in ("engine-off", "moving"):
            using = gen(vehicle, "using", 300.0, seed=8)
            seat = gen(vehicle, "passenger-seat", 300.0, seed=9)
            a_using, _ = compute_norms_block(using.acc, using.gyr)
            a_seat, _ = compute_norms_block(seat.acc, seat.gyr)
            p_using = band_power(a_using, FS, 4.0, 12.0)
            p_seat = band_power(a_seat, FS, 4.0, 12.0)
            assert p_using >= 3.0 * p_seat

    def test_vehicle_band_power_separates_moving_from_still(self):
        moving = gen("moving", "passenger-seat", 300.0, seed=10)
        still = gen("engine-off", "passenger-seat", 300.0, seed=11)
        a_moving, _ = compute_norms_block(moving.acc, moving.gyr)
        a_still, _ = compute_norms_block(still.acc, still.gyr)
        assert band_power(a_moving, FS, 1.0, 3.0) >= 3.0 * band_power(a_still, FS, 1.0, 3.0)

    def test_holder_attenuates_vehicle_band(self):
        seat = gen("moving", "passenger-seat", 300.0, seed=12)
        holder = gen("moving", "phone-holder", 300.0, seed=12)
        a_seat, _ = compute_norms_block(seat.acc, seat.gyr)
        a_holder, _ = compute_norms_block(holder.acc, holder.gyr)
        assert band_power(a_holder, FS, 1.0, 3.0) < band_power(a_seat, FS, 1.0, 3.0)

    def test_gyro_broadband_only_while_using(self):
        using = gen("engine-off", "using", 300.0, seed=13)
        seat = gen("engine-off", "passenger-seat", 300.0, seed=14)
        _, w_using = compute_norms_block(using.acc, using.gyr)
        _, w_seat = compute_norms_block(seat.acc, seat.gyr)
        assert w_using.var() > 100.0 * w_seat.var()


class TestTrips:
    def test_single_segment_trip_equals_generate(self):
        spec = synthgen.ScenarioSpec("moving", "using", 10.0, seed=15)
        trip = synthgen.generate_trip(synthgen.ScenarioSchedule.from_specs([spec]))
        single = synthgen.generate(spec)
        assert np.array_equal(trip.acc, single.acc)
        assert np.array_equal(trip.gyr, single.gyr)
        assert trip.transitions == []

    def test_two_segment_trip_has_one_rise(self):
        specs = [synthgen.ScenarioSpec("moving", "passenger-seat", 5.0, seed=1),
                 synthgen.ScenarioSpec("moving", "using", 5.0, seed=2)]
        trip = synthgen.generate_trip(synthgen.ScenarioSchedule.from_specs(specs))
        assert len(trip.transitions) == 1
        t0, old, new = trip.transitions[0]
        assert (old, new) == (-1, 1)
        assert t0 == pytest.approx(5.0)

    def test_ten_segment_alternating_trip_has_nine_transitions(self):
        specs = []
        for k in range(10):
            phone = "using" if k % 2 else "passenger-seat"
            specs.append(synthgen.ScenarioSpec("moving", phone, 60.0, seed=k))
        trip = synthgen.generate_trip(synthgen.ScenarioSchedule.from_specs(specs))
        assert len(trip.transitions) == 9
        for k, (t0, old, new) in enumerate(trip.transitions):
            assert t0 == pytest.approx(60.0 * (k + 1))
            assert new == (1 if (k + 1) % 2 else -1)

    def test_trip_timestamps_are_continuous(self):
        schedule = synthgen.mixed_trip_schedule(segment_s=2.0, repeats=1, seed=3)
        trip = synthgen.generate_trip(schedule)
        assert np.allclose(np.diff(trip.t), 1.0 / FS)

    def test_overlapping_segments_rejected(self):
        spec = synthgen.ScenarioSpec("moving", "using", 5.0)
        schedule = synthgen.ScenarioSchedule([(spec, 0.0), (spec, 3.0)])
        with pytest.raises(ValueError, match="overlap"):
            schedule.validate()

    def test_gapped_segments_rejected(self):
        spec = synthgen.ScenarioSpec("moving", "using", 5.0)
        schedule = synthgen.ScenarioSchedule([(spec, 0.0), (spec, 9.0)])
        with pytest.raises(ValueError, match="gap"):
            schedule.validate()

    def test_mixed_trip_covers_every_scenario_combination(self):
        schedule = synthgen.mixed_trip_schedule(segment_s=1.0, repeats=1)
        combos = {(s.vehicle, s.phone) for s, _ in schedule.entries}
        assert combos == {(v, p) for v in synthgen.VEHICLE_STATES
                          for p in synthgen.PHONE_STATES}

    def test_mixed_trip_alternates_labels(self):
        schedule = synthgen.mixed_trip_schedule(segment_s=1.0, repeats=2)
        labels = [s.label for s, _ in schedule.entries]
        assert all(a != b for a, b in zip(labels[:-1], labels[1:]))

    def test_label_intervals_cover_stream(self):
        schedule = synthgen.mixed_trip_schedule(segment_s=2.0, repeats=1, seed=4)
        trip = synthgen.generate_trip(schedule)
        intervals = synthgen.label_intervals(trip)
        assert intervals[0][0] == trip.t[0]
        assert intervals[-1][1] > trip.t[-1]
        for (_, end_a, _), (start_b, _, _) in zip(intervals[:-1], intervals[1:]):
            assert end_a == pytest.approx(start_b)
