import itertools

import pytest
from hypothesis import given, settings, strategies as st

from strutservo.safety import (
    AlarmAckError,
    AlarmLevel,
    AlarmState,
    AlarmThresholds,
    AllLocksFailedError,
    Direction,
    LockAssembly,
    PumpDutyWatch,
    acknowledge,
    check_lock_capacity,
    evaluate_alarm,
    lock_loads,
)

# Worked displacement monitor: warn 20 mm, alarm 30 mm, hysteresis 2 mm, high side.
DISP_HIGH = AlarmThresholds("S1/displacement", Direction.HIGH, 20.0, 30.0, 2.0)
FORCE_LOW = AlarmThresholds("S1/force", Direction.LOW, 2025.0, 1800.0, 50.0)


def state(level=AlarmLevel.NORMAL, **kw):
    base = dict(channel="S1/displacement", level=level)
    if level is AlarmLevel.ALARM:
        base.update(latched=True, raised_tick=0)
    base.update(kw)
    return AlarmState(**base)


class TestEvaluateAlarm:
    def test_warning_on_warn_crossing(self):
        out = evaluate_alarm(state(), 25.0, DISP_HIGH, 1)
        assert out.level is AlarmLevel.WARNING

    def test_far_below_stays_normal(self):
        assert evaluate_alarm(state(), 5.0, DISP_HIGH, 1).level is AlarmLevel.NORMAL

    def test_latch_holds_without_ack(self):
        out = evaluate_alarm(state(AlarmLevel.ALARM), 27.0, DISP_HIGH, 5)
        assert out.level is AlarmLevel.ALARM
        assert out.latched

    def test_normal_jumps_straight_to_alarm(self):
        out = evaluate_alarm(state(), 35.0, DISP_HIGH, 3)
        assert out.level is AlarmLevel.ALARM
        assert out.raised_tick == 3
        assert not out.acknowledged

    def test_warning_autoclears_past_hysteresis(self):
        assert evaluate_alarm(state(AlarmLevel.WARNING), 17.9, DISP_HIGH, 2).level is AlarmLevel.NORMAL
        # inside the hysteresis gap: no clear
        assert evaluate_alarm(state(AlarmLevel.WARNING), 18.5, DISP_HIGH, 2).level is AlarmLevel.WARNING

    def test_acked_alarm_clears_after_recession(self):
        acked = state(AlarmLevel.ALARM, acknowledged=True)
        out = evaluate_alarm(acked, 15.0, DISP_HIGH, 9)
        assert out.level is AlarmLevel.NORMAL
        assert out.cleared_tick == 9
        assert not out.latched

    def test_acked_alarm_falls_to_warning_if_still_elevated(self):
        acked = state(AlarmLevel.ALARM, acknowledged=True)
        out = evaluate_alarm(acked, 25.0, DISP_HIGH, 9)
        assert out.level is AlarmLevel.WARNING

    def test_unacked_alarm_never_clears_even_when_receded(self):
        out = evaluate_alarm(state(AlarmLevel.ALARM), 5.0, DISP_HIGH, 9)
        assert out.level is AlarmLevel.ALARM

    def test_low_direction_mirrors(self):
        out = evaluate_alarm(state(channel="S1/force"), 1700.0, FORCE_LOW, 1)
        assert out.level is AlarmLevel.ALARM
        out = evaluate_alarm(state(channel="S1/force"), 2000.0, FORCE_LOW, 1)
        assert out.level is AlarmLevel.WARNING

    def test_transition_table_exhaustive(self):
        # Every (prev level, next level) pair, both directions.
        high = DISP_HIGH
        low = FORCE_LOW
        cases = {
            # (prev, target): value for high monitor, value for low monitor
            (AlarmLevel.NORMAL, AlarmLevel.NORMAL): (5.0, 2500.0),
            (AlarmLevel.NORMAL, AlarmLevel.WARNING): (25.0, 2000.0),
            (AlarmLevel.NORMAL, AlarmLevel.ALARM): (35.0, 1700.0),
            (AlarmLevel.WARNING, AlarmLevel.NORMAL): (17.0, 2500.0),
            (AlarmLevel.WARNING, AlarmLevel.WARNING): (25.0, 2000.0),
            (AlarmLevel.WARNING, AlarmLevel.ALARM): (35.0, 1700.0),
            (AlarmLevel.ALARM, AlarmLevel.NORMAL): (5.0, 2500.0),
            (AlarmLevel.ALARM, AlarmLevel.WARNING): (25.0, 2000.0),
            (AlarmLevel.ALARM, AlarmLevel.ALARM): (35.0, 1700.0),
        }
        for (prev_level, target), (v_high, v_low) in cases.items():
            for thresholds, value in ((high, v_high), (low, v_low)):
                prev = state(prev_level, channel=thresholds.channel)
                if prev_level is AlarmLevel.ALARM:
                    prev = AlarmState(thresholds.channel, AlarmLevel.ALARM, latched=True,
                                      acknowledged=True, raised_tick=0)
                out = evaluate_alarm(prev, value, thresholds, 1)
                assert out.level is target, (
                    f"{thresholds.direction}: {prev_level} + {value} -> {out.level}, want {target}"
                )

    @settings(max_examples=300, deadline=None)
    @given(st.lists(st.one_of(st.floats(0.0, 50.0), st.just("ack")), min_size=1, max_size=60))
    def test_no_skipped_acknowledgment(self, events):
        # A latched alarm never reaches normal/warning without an ack first.
        s = state()
        acked_since_raise = False
        for ev in events:
            if ev == "ack":
                if s.level is AlarmLevel.ALARM:
                    s = acknowledge(s, "op", 0)
                    acked_since_raise = True
                continue
            before = s.level
            s = evaluate_alarm(s, ev, DISP_HIGH, 0)
            if before is AlarmLevel.ALARM and s.level is not AlarmLevel.ALARM:
                assert acked_since_raise
            if s.level is AlarmLevel.ALARM and before is not AlarmLevel.ALARM:
                acked_since_raise = False

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(28.001, 29.999), min_size=1, max_size=50))
    def test_hysteresis_no_chatter_in_gap(self, values):
        # Oscillating inside (alarm - hysteresis, alarm): at most the initial transition.
        s = state(AlarmLevel.WARNING)
        transitions = 0
        for v in values:
            before = s.level
            s = evaluate_alarm(s, v, DISP_HIGH, 0)
            if s.level is not before:
                transitions += 1
        assert transitions == 0  # gap values neither breach alarm nor recede past warn

    def test_threshold_validation(self):
        with pytest.raises(ValueError):
            AlarmThresholds("x", Direction.HIGH, 30.0, 20.0, 2.0)  # warn outside alarm
        with pytest.raises(ValueError):
            AlarmThresholds("x", Direction.HIGH, 20.0, 30.0, 0.0)  # zero hysteresis
        with pytest.raises(ValueError):
            AlarmThresholds("x", Direction.HIGH, 20.0, 30.0, 15.0)  # hysteresis > gap
        with pytest.raises(ValueError):
            AlarmThresholds("x", Direction.LOW, 1800.0, 2025.0, 50.0)  # warn outside (low)


class TestAcknowledge:
    def test_ack_active_alarm(self):
        out = acknowledge(state(AlarmLevel.ALARM), "op-1", 5)
        assert out.acknowledged

    def test_ack_warning_rejected(self):
        with pytest.raises(AlarmAckError, match="no_active_alarm"):
            acknowledge(state(AlarmLevel.WARNING), "op-1", 5)

    def test_two_step_clear_protocol(self):
        s = state(AlarmLevel.ALARM)
        s = evaluate_alarm(s, 15.0, DISP_HIGH, 1)  # receded but unacked
        assert s.level is AlarmLevel.ALARM
        s = acknowledge(s, "op-1", 2)
        s = evaluate_alarm(s, 15.0, DISP_HIGH, 3)
        assert s.level is AlarmLevel.NORMAL
        assert s.cleared_tick == 3


class TestLockLoads:
    def test_equal_split(self):
        assert lock_loads(2250.0, LockAssembly(n_locks=3)) == [750.0, 750.0, 750.0]

    def test_one_failed_of_three(self):
        asm = LockAssembly(n_locks=3).fail_lock(0)
        assert lock_loads(2250.0, asm) == [0.0, 1125.0, 1125.0]

    def test_one_failed_of_two(self):
        asm = LockAssembly(n_locks=2).fail_lock(0)
        assert lock_loads(2250.0, asm) == [0.0, 2250.0]

    def test_conservation_exact_for_every_mask(self):
        for n in (2, 3):
            for r in range(n):
                for mask in itertools.combinations(range(n), r):
                    asm = LockAssembly(n_locks=n)
                    for i in mask:
                        asm = asm.fail_lock(i)
                    for force in (2250.0, 1.0, 1234.567, 1e-3, 977.7):
                        assert sum(lock_loads(force, asm)) == force

    def test_all_failed_terminal(self):
        asm = LockAssembly(n_locks=2).fail_lock(0)
        with pytest.raises(AllLocksFailedError):
            asm.fail_lock(1)

    def test_wear_cycles_counted(self):
        asm = LockAssembly(n_locks=3)
        assert asm.cycle_counts == (1, 1, 1)
        asm = asm.fail_lock(1)
        assert asm.cycle_counts == (1, 2, 1)


class TestCheckLockCapacity:
    CAPACITY = 1237.5  # 0.55 * 2250

    def test_triple_lock_single_failure_ok(self):
        assert check_lock_capacity([0.0, 1125.0, 1125.0], self.CAPACITY) == []

    def test_double_lock_single_failure_overloads(self):
        assert check_lock_capacity([0.0, 2250.0], self.CAPACITY) == [1]

    def test_all_zero_ok(self):
        assert check_lock_capacity([0.0, 0.0, 0.0], self.CAPACITY) == []

    def test_redundancy_rule(self):
        # capacity >= F_design/(n-1) makes any single failure safe for n=3 but not n=2
        f_design = 2250.0
        capacity = 0.55 * f_design
        three = lock_loads(f_design, LockAssembly(n_locks=3).fail_lock(2))
        assert check_lock_capacity(three, capacity) == []
        two = lock_loads(f_design, LockAssembly(n_locks=2).fail_lock(1))
        assert check_lock_capacity(two, capacity) != []


class TestPumpDutyWatch:
    def test_windowed_integral(self):
        watch = PumpDutyWatch(window_ticks=3)
        assert watch.update(0.5, 1.0) == pytest.approx(0.5)
        assert watch.update(0.5, 1.0) == pytest.approx(1.0)
        assert watch.update(0.5, 1.0) == pytest.approx(1.5)
        assert watch.update(0.0, 1.0) == pytest.approx(1.0)  # oldest tick dropped

    def test_sign_insensitive(self):
        watch = PumpDutyWatch(window_ticks=10)
        watch.update(-0.5, 1.0)
        assert watch.update(0.5, 1.0) == pytest.approx(1.0)


class TestLockAssemblyValidation:
    def test_bounds(self):
        with pytest.raises(ValueError):
            LockAssembly(n_locks=0)
        with pytest.raises(ValueError):
            LockAssembly(n_locks=4)
        with pytest.raises(ValueError):
            LockAssembly(capacity_kn=0.0)
        with pytest.raises(ValueError):
            LockAssembly(n_locks=2, failed=frozenset({0, 1}))
