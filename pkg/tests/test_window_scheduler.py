import numpy as np
import pytest

from embedding_forge import kernels
from embedding_forge.errors import ScheduleError
from embedding_forge.window_scheduler import (
    WindowSchedule,
    WindowStrategy,
    epoch_window,
    schedule_table,
    window_for_center,
    window_for_epoch,
)


def edws(epochs, window, phases=3):
    return WindowSchedule(WindowStrategy.EPOCH_BASED, window, epochs, phases)


class TestEpochBased:
    def test_six_epochs_window_fifteen(self):
        assert schedule_table(edws(6, 15)) == [5, 5, 10, 10, 15, 15]

    def test_three_epochs_window_fifteen(self):
        assert [window_for_epoch(edws(3, 15), k) for k in (1, 2, 3)] == [5, 10, 15]

    def test_nine_epochs(self):
        assert schedule_table(edws(9, 9)) == [3, 3, 3, 6, 6, 6, 9, 9, 9]

    def test_other_phase_counts(self):
        assert schedule_table(edws(5, 10, phases=5)) == [2, 4, 6, 8, 10]
        assert schedule_table(edws(4, 8, phases=2)) == [4, 4, 8, 8]

    def test_schedule_is_non_decreasing_and_ends_at_max(self):
        table = schedule_table(edws(12, 21))
        assert table == sorted(table)
        assert table[-1] == 21

    @pytest.mark.parametrize("epochs,window", [(4, 15), (6, 10), (5, 5)])
    def test_divisibility_is_required(self, epochs, window):
        with pytest.raises(ScheduleError, match="multiples"):
            edws(epochs, window)

    def test_epoch_out_of_range(self):
        with pytest.raises(ScheduleError):
            window_for_epoch(edws(6, 15), 7)
        with pytest.raises(ScheduleError):
            window_for_epoch(edws(6, 15), 0)

    def test_needs_edws_strategy(self):
        with pytest.raises(ScheduleError):
            window_for_epoch(WindowSchedule(WindowStrategy.FIXED, 15, 6), 1)


def test_fixed_and_random_report_the_maximum_every_epoch():
    for strategy in (WindowStrategy.FIXED, WindowStrategy.RANDOM_DYNAMIC):
        schedule = WindowSchedule(strategy, 7, 4)
        assert schedule_table(schedule) == [7, 7, 7, 7]
        assert epoch_window(schedule, 2) == 7


def test_invalid_windows_are_rejected():
    with pytest.raises(ScheduleError):
        WindowSchedule(WindowStrategy.FIXED, 0)
    with pytest.raises(ScheduleError):
        WindowSchedule(WindowStrategy.FIXED, 5, total_epochs=0)


def test_strategy_accepts_cli_names():
    assert WindowSchedule("edws", 15, 6).strategy is WindowStrategy.EPOCH_BASED
    assert WindowSchedule("random", 15).strategy is WindowStrategy.RANDOM_DYNAMIC


class TestRandomDynamic:
    def test_usage_probability_of_each_offset(self):
        r = 15
        schedule = WindowSchedule(WindowStrategy.RANDOM_DYNAMIC, r)
        rng = np.random.default_rng(2024)
        draws = np.array([window_for_center(schedule, rng) for _ in range(1_000_000)])
        assert draws.min() == 1 and draws.max() == r
        for i in range(1, r + 1):
            used = np.mean(draws >= i)
            assert abs(used - (r - i + 1) / r) < 0.005

    def test_draws_are_uniform(self):
        r = 5
        schedule = WindowSchedule(WindowStrategy.RANDOM_DYNAMIC, r)
        rng = np.random.default_rng(7)
        draws = np.array([window_for_center(schedule, rng) for _ in range(50_000)])
        counts = np.bincount(draws, minlength=r + 1)[1:]
        expected = len(draws) / r
        chi2 = np.sum((counts - expected) ** 2 / expected)
        # 4 degrees of freedom, p = 0.001
        assert chi2 < 18.47

    def test_needs_random_strategy(self):
        with pytest.raises(ScheduleError):
            window_for_center(WindowSchedule(WindowStrategy.FIXED, 5), np.random.default_rng(0))

    def test_kernel_draws_match_the_same_distribution(self):
        # interior Skip-gram centers emit 2 * r' pairs, so the mean is r + 1
        r, n = 6, 40_000
        tokens = (np.arange(n) % 50).astype(np.int32)
        inp = np.zeros((50, 4), dtype=np.float32)
        out = np.zeros((50, 4), dtype=np.float32)
        table = np.arange(50, dtype=np.int32)
        rng = np.array([12345], dtype=np.uint64)
        _, pairs = kernels.train_skipgram_chunk(inp, out, tokens, r, n - r, table, 1, r,
                                                kernels.WINDOW_RANDOM, 1e-9, rng)
        assert pairs / (n - 2 * r) == pytest.approx(r + 1, rel=0.01)

    def test_fixed_window_pairs_are_truncated_at_the_stream_ends(self):
        r, n = 3, 20
        tokens = (np.arange(n) % 5).astype(np.int32)
        inp = np.zeros((5, 4), dtype=np.float32)
        out = np.zeros((5, 4), dtype=np.float32)
        table = np.arange(5, dtype=np.int32)
        rng = np.array([1], dtype=np.uint64)
        _, pairs = kernels.train_skipgram_chunk(inp, out, tokens, 0, n, table, 1, r,
                                                kernels.WINDOW_FIXED, 1e-9, rng)
        expected = sum(1 for t in range(n) for i in range(-r, r + 1) if i != 0 and 0 <= t + i < n)
        assert pairs == expected
