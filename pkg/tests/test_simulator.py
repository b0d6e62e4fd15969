import itertools
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpe_sampling.planner import FIRST_STAGES, planned
from qpe_sampling.simulator import (
    MeasurementOracle,
    bits_to_turn,
    circular_error,
    failure_interval,
    iter_trials,
    measure,
    run_classic,
    run_improved,
    success_rate,
    trial_rng,
)


def dyadic(bits):
    return sum(b * 2.0 ** -(i + 1) for i, b in enumerate(bits))


def rounded_bits(phi, width):
    r = round(phi * 2**width) % 2**width
    return [(r >> (width - 1 - i)) & 1 for i in range(width)]


class TestMeasure:
    @pytest.mark.parametrize("j", [1, 3, 9])
    def test_certain_one(self, j):
        assert measure(MeasurementOracle(0.0, trial_rng(1, 0)), j, 0.0, 50) == 50

    def test_certain_zero(self):
        assert measure(MeasurementOracle(0.0, trial_rng(1, 0)), 2, 0.5, 50) == 0

    def test_shift_cancels_phase(self):
        assert measure(MeasurementOracle(0.125, trial_rng(1, 0)), 1, -0.125, 40) == 40

    def test_power_doubles_phase(self):
        o = MeasurementOracle(0.3)
        assert o.phase(1) == 0.3
        assert o.phase(3) == pytest.approx(0.2)

    def test_counts_samples(self):
        o = MeasurementOracle(0.2, trial_rng(0, 0))
        measure(o, 1, 0.0, 7)
        measure(o, 2, 0.1, 5)
        assert o.samples == 12

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            measure(MeasurementOracle(0.2), 1, 0.0, 0)

    @pytest.mark.parametrize("phi, j, theta", [(0.1, 1, 0.0), (0.37, 3, -0.25), (0.8123, 5, 0.1)])
    def test_calibration(self, phi, j, theta):
        n = 1_000_000
        o = MeasurementOracle(phi, trial_rng(2024, 0))
        p = (1 + math.cos(2 * math.pi * (2 ** (j - 1) * phi + theta))) / 2
        ones = measure(o, j, theta, n)
        se = math.sqrt(p * (1 - p) / n)
        assert abs(ones / n - p) <= 4 * se


class TestCircularError:
    def test_values(self):
        assert circular_error(0.99, 0.01) == pytest.approx(0.02)
        assert circular_error(0.4, 0.4) == 0
        assert circular_error(0.0, 0.5) == 0.5

    @settings(max_examples=100, deadline=None)
    @given(a=st.floats(-5, 5), b=st.floats(-5, 5))
    def test_range_and_symmetry(self, a, b):
        d = circular_error(a, b)
        assert 0 <= d <= 0.5
        assert d == pytest.approx(circular_error(b, a), abs=1e-12)


class TestClassic:
    def test_noiseless_three_bits(self):
        phi = 0.625
        tr = run_classic(phi, 1, 0.1, 200, oracle=MeasurementOracle(phi, expected=True))
        assert tr.bits == (1, 0, 1) and tr.estimate == phi

    @pytest.mark.parametrize("m", [1, 2, 4])
    def test_noiseless_dyadic(self, m):
        for bits in itertools.product((0, 1), repeat=m + 2):
            phi = dyadic(bits)
            tr = run_classic(phi, m, 0.1, 400, oracle=MeasurementOracle(phi, expected=True))
            assert tr.bits == bits

    def test_default_counts(self):
        tr = run_classic(0.3, 3, 0.1, seed=5, trial=0)
        n = tr.records[0].n
        assert n == math.ceil(2 / 0.125**2 * math.log(2 / (0.1 / 6)))
        assert tr.samples == 2 * 3 * n

    def test_tie_is_flagged(self):
        # omega exactly 1/4 turn from both candidates resolves to 0
        class Fixed(MeasurementOracle):
            def draw(self, j, theta, n):
                self.samples += n
                if j == 2:
                    return n if theta == 0 else n // 2
                return n // 2 if theta == 0 else n

        tr = run_classic(0.0, 2, 0.1, 4, oracle=Fixed(0.0))
        assert tr.bits[:1] == (0,)
        assert any(f.startswith("consistency-tie") for f in tr.flags)

    def test_statistical(self):
        stats = success_rate(3, 0.1, 400, seed=11, algorithm="classic")
        assert stats.failure_rate <= 0.1


class TestImproved:
    @pytest.mark.parametrize("fs", FIRST_STAGES)
    @pytest.mark.parametrize("m", [1, 2, 5, 12])
    def test_zero_phase(self, fs, m):
        tr = run_improved(0.0, m, 0.01, fs, seed=3, trial=0)
        assert tr.estimate == 0 and tr.success

    @pytest.mark.parametrize("fs", FIRST_STAGES)
    @pytest.mark.parametrize("m", [1, 2, 3, 5])
    def test_noiseless_dyadic(self, fs, m):
        for bits in itertools.product((0, 1), repeat=m + 2):
            phi = dyadic(bits)
            tr = run_improved(phi, m, 0.1, fs, oracle=MeasurementOracle(phi, expected=True))
            assert tr.bits == bits

    @pytest.mark.parametrize("fs", FIRST_STAGES)
    def test_sample_accounting(self, fs):
        for m, eps in [(1, 0.2), (4, 0.1), (9, 0.01), (25, 0.001)]:
            tr = run_improved(0.77, m, eps, fs, seed=1, trial=2)
            assert tr.samples == planned(eps, m, fs).total == sum(r.n for r in tr.records)

    @pytest.mark.parametrize("fs", FIRST_STAGES)
    def test_shift_keeps_angle_near_axis(self, fs):
        m = 6
        for t, tr in enumerate(self._debug_runs(m, fs, 300)):
            truth = rounded_bits(tr.phi, m + 2)
            for rec in tr.records:
                if rec.step != "sign":
                    continue
                j = rec.j
                k = m + 1 - j
                if list(tr.bits[j:]) == truth[j:]:
                    assert rec.deviation <= 2.0 ** -(k + 2) + 1e-15

    @staticmethod
    def _debug_runs(m, fs, trials):
        for t in range(trials):
            rng = trial_rng(99, t)
            phi = float(rng.random())
            yield run_improved(phi, m, 0.1, fs, oracle=MeasurementOracle(phi, rng), debug=True)

    def test_plan_mismatch(self):
        with pytest.raises(ValueError):
            run_improved(0.1, 4, 0.1, "majority", plan=planned(0.1, 3, "majority"))

    @pytest.mark.parametrize("fs", FIRST_STAGES)
    def test_near_boundary_phases(self, fs):
        m = 4
        step = 2.0 ** -(m + 2)
        phis = [(k * step + s * 1e-9) % 1.0 for k in range(2 ** (m + 2)) for s in (-1, 1)]
        stats = success_rate(m, 0.1, 2000, seed=8, first_stage=fs, phis=phis)
        assert stats.meets_target


class TestStatsAndTranscripts:
    def test_noiseless_zero(self):
        s = success_rate(3, 0.1, 50, seed=0, phis=[0.0])
        assert s.successes == s.trials == 50 and s.failures == 0

    def test_interval(self):
        lo, hi = failure_interval(0, 100)
        assert lo == 0 and hi == pytest.approx(1 - 0.005 ** (1 / 100), rel=1e-9)

    def test_deterministic(self):
        a = [t.to_json() for t in iter_trials(5, 0.05, 20, seed=17)]
        b = [t.to_json() for t in iter_trials(5, 0.05, 20, seed=17)]
        c = [t.to_json() for t in iter_trials(5, 0.05, 20, seed=18)]
        assert a == b and a != c

    def test_trial_streams_independent_of_order(self):
        trs = list(iter_trials(3, 0.1, 5, seed=4))
        alone = next(iter_trials(3, 0.1, 5, seed=4))
        assert alone.to_json() == trs[0].to_json()
        assert len({t.phi for t in trs}) == 5

    def test_json_schema(self):
        tr = run_improved(0.3, 3, 0.1, seed=2, trial=1)
        body = json.loads(tr.to_json())
        assert body["schema"] == 1
        assert set(body["bits"]) <= {"0", "1"} and len(body["bits"]) == 5
        assert body["samples"] == tr.samples
        assert {"seed", "trial", "algorithm", "records", "error", "estimate"} <= set(body)

    def test_bits_to_turn(self):
        assert bits_to_turn((1, 0, 1)) == 0.625
        assert bits_to_turn(()) == 0

    def test_bad_algorithm(self):
        with pytest.raises(ValueError):
            list(iter_trials(2, 0.1, 1, seed=0, algorithm="magic"))

    def test_uniform_phases_spread(self):
        phis = np.array([t.phi for t in iter_trials(2, 0.1, 2000, seed=1)])
        assert abs(phis.mean() - 0.5) < 0.03
