import math

import numpy as np
import pytest
import scipy.stats

from pedxing.metrics import (
    CHI2_CRIT_3_GROUPS,
    MetricsConfig,
    build_report,
    dst_metric,
    episode_averages,
    format_table,
    iqr_filter,
    kruskal_wallis,
    mann_whitney,
    ttc_metric,
)
from pedxing.scenario import JointState


def make_state(x=-10.0, v=5.0, y=-3.0, vp=1.0, t=0.0):
    return JointState(t=t, x_veh=x, v_veh=v, y_ped=y, v_ped=vp)


class TestTtcMetric:
    def test_hand_value(self, geometry):
        # gaps 10 m and 3 m at 5 m/s: 13/5
        assert ttc_metric(make_state(), geometry) == pytest.approx(2.6)

    def test_standstill_guard_kappa(self, geometry):
        cfg = MetricsConfig()
        assert cfg.kappa == 0.05
        stopped = make_state(v=0.0)
        assert ttc_metric(stopped, geometry, cfg) == pytest.approx(13.0 / 0.05)

    def test_gap_clamping(self, geometry):
        past = make_state(x=5.0, v=5.0, y=-3.0)
        # vehicle beyond the conflict contributes no negative gap
        assert ttc_metric(past, geometry) == pytest.approx(3.0 / 5.0)
        unclamped = MetricsConfig(clamp_gaps=False)
        assert ttc_metric(past, geometry, unclamped) == pytest.approx(-2.0 / 5.0)


class TestDstMetric:
    def test_hand_value(self, geometry):
        cfg = MetricsConfig()
        assert cfg.t_safe == 1.0
        # 0.5*(1 + 25) / (10 + 3 + 5*1) = 13/18
        assert dst_metric(make_state(), geometry, cfg) == pytest.approx(13.0 / 18.0)

    def test_denominator_floor(self, geometry):
        # both agents at the conflict, vehicle stopped: denominator floors at kappa
        s = make_state(x=0.0, v=0.0, y=0.0, vp=1.0)
        assert dst_metric(s, geometry) == pytest.approx(0.5 / 0.05)

    def test_zero_speeds_zero_dst(self, geometry):
        s = make_state(v=0.0, vp=0.0)
        assert dst_metric(s, geometry) == 0.0


class TestEpisodeAverages:
    def test_constant_trace_is_exact(self, geometry):
        states = [make_state(t=0.1 * k) for k in range(50)]
        ttc_avg, dst_avg = episode_averages(states, geometry)
        assert ttc_avg == pytest.approx(2.6, rel=1e-12)
        assert dst_avg == pytest.approx(13.0 / 18.0, rel=1e-12)

    def test_linear_ttc_trace(self, geometry):
        # constant 5 m/s: TTC falls linearly 4.6 -> 0.6 over 4 s, average 2.6
        states = [make_state(x=-20.0 + 5.0 * t, v=5.0, y=-3.0, vp=0.0, t=t)
                  for t in np.arange(0.0, 4.0001, 0.05)]
        ttc_avg, dst_avg = episode_averages(states, geometry)
        assert ttc_avg == pytest.approx(2.6, rel=1e-9)
        # closed form for the same trace: (2.5 ln 3.5) / 4
        expected_dst = 2.5 * math.log(28.0 / 8.0) / 4.0
        assert dst_avg == pytest.approx(expected_dst, rel=0.01)

    def test_needs_two_states_and_positive_span(self, geometry):
        with pytest.raises(ValueError):
            episode_averages([make_state()], geometry)
        with pytest.raises(ValueError):
            episode_averages([make_state(t=1.0), make_state(t=1.0)], geometry)


class TestIqrFilter:
    def test_removes_far_outlier(self):
        res = iqr_filter([1.0, 2.0, 3.0, 4.0, 100.0])
        assert res.kept.tolist() == [1.0, 2.0, 3.0, 4.0]
        assert res.removed.tolist() == [100.0]
        assert not res.undersized

    def test_small_samples_flagged_unchanged(self):
        res = iqr_filter([5.0, 500.0, -3.0])
        assert res.kept.tolist() == [5.0, 500.0, -3.0]
        assert res.undersized

    def test_identical_values_all_kept(self):
        res = iqr_filter([7.0] * 10)
        assert res.kept.size == 10
        assert res.removed.size == 0

    def test_band_is_closed(self):
        # values exactly at Q1 - 1.5 IQR / Q3 + 1.5 IQR stay in
        vals = [0.0, 1.0, 2.0, 3.0]
        q1, q3 = np.percentile(vals, [25, 75])
        edge = q3 + 1.5 * (q3 - q1)
        res = iqr_filter(vals + [edge])
        assert edge in res.kept


class TestKruskalWallis:
    def test_against_scipy_no_ties(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            groups = [rng.normal(loc, 1.0, int(rng.integers(5, 15)))
                      for loc in (0.0, 0.5, 2.0)]
            ours = kruskal_wallis(groups)
            ref_h, ref_p = scipy.stats.kruskal(*groups)
            assert ours.h == pytest.approx(ref_h, abs=1e-9)
            assert ours.p == pytest.approx(ref_p, abs=1e-9)

    def test_against_scipy_with_ties(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            groups = [rng.integers(0, 6, int(rng.integers(5, 15))).astype(float)
                      for _ in range(3)]
            if all(np.all(g == groups[0][0]) for g in groups):
                continue
            ours = kruskal_wallis(groups)
            ref_h, ref_p = scipy.stats.kruskal(*groups)
            assert ours.h == pytest.approx(ref_h, abs=1e-9)
            assert ours.p == pytest.approx(ref_p, abs=1e-9)

    def test_significance_threshold(self):
        assert CHI2_CRIT_3_GROUPS == 9.21
        clear = kruskal_wallis([[1, 2, 3, 4, 5], [11, 12, 13, 14, 15],
                                [21, 22, 23, 24, 25]])
        assert clear.significant
        same = kruskal_wallis([[1, 2, 3], [1.5, 2.5, 3.5], [1.2, 2.2, 3.2]])
        assert not same.significant

    def test_identical_data_gives_zero_h(self):
        res = kruskal_wallis([[3.0, 3.0], [3.0, 3.0], [3.0, 3.0]])
        assert res.h == 0.0

    def test_needs_two_groups(self):
        with pytest.raises(ValueError):
            kruskal_wallis([[1.0, 2.0]])


class TestMannWhitney:
    def test_separated_samples_exact_p(self):
        # all 3 of a below all 3 of b: U = 0; 2 * C(3,3)-weight / C(6,3) = 2/20
        res = mann_whitney([1.0, 2.0, 3.0], [10.0, 11.0, 12.0])
        assert res.u == 0.0
        assert res.p == pytest.approx(0.1, abs=1e-15)
        assert res.method == "exact"

    def test_exact_against_enumeration(self):
        # brute force: doubled lower-tail weight of U1 over every split of
        # the pooled sample
        rng = np.random.default_rng(21)
        from itertools import combinations
        for _ in range(10):
            n1, n2 = int(rng.integers(2, 6)), int(rng.integers(2, 6))
            pooled = rng.permutation(np.arange(1.0, n1 + n2 + 1))
            a, b = pooled[:n1], pooled[n1:]
            res = mann_whitney(a, b)
            idx = range(n1 + n2)
            count = 0
            total = 0
            for pick in combinations(idx, n1):
                total += 1
                aa = pooled[list(pick)]
                bb = np.delete(pooled, list(pick))
                u1 = int((aa[:, None] > bb[None, :]).sum())
                if u1 <= res.u:
                    count += 1
            assert res.p == pytest.approx(min(1.0, 2.0 * count / total), abs=1e-12)

    def test_exact_against_scipy(self):
        rng = np.random.default_rng(13)
        for _ in range(30):
            n1, n2 = int(rng.integers(3, 8)), int(rng.integers(3, 8))
            pooled = rng.permutation(np.arange(0.0, n1 + n2))
            a, b = pooled[:n1], pooled[n1:]
            ours = mann_whitney(a, b)
            ref = scipy.stats.mannwhitneyu(a, b, alternative="two-sided",
                                           method="exact")
            assert ours.method == "exact"
            assert ours.p == pytest.approx(ref.pvalue, abs=1e-12)

    def test_normal_approximation_against_scipy(self):
        rng = np.random.default_rng(17)
        for _ in range(30):
            a = rng.integers(0, 8, 25).astype(float)
            b = rng.integers(2, 10, 30).astype(float)
            ours = mann_whitney(a, b)
            ref = scipy.stats.mannwhitneyu(a, b, alternative="two-sided",
                                           method="asymptotic")
            assert ours.method == "normal"
            assert ours.p == pytest.approx(ref.pvalue, abs=1e-9)

    def test_ties_force_normal_path(self):
        res = mann_whitney([1.0, 1.0, 2.0], [1.0, 3.0, 4.0])
        assert res.method == "normal"

    def test_statistic_is_smaller_u(self):
        res = mann_whitney([10.0, 11.0, 12.0], [1.0, 2.0, 3.0])
        assert res.u == 0.0  # symmetric to the separated case above


class TestReport:
    def _episodes(self):
        rng = np.random.default_rng(33)
        episodes = []
        for controller, loc in (("mpc", 8.0), ("rulebased", 9.0), ("cautious", 18.0)):
            for seed in range(12):
                episodes.append({
                    "scenario": "delayed_remaining",
                    "controller": controller,
                    "t_end": float(loc + rng.normal(0, 0.5)),
                    "ttc_avg": float(loc * 3 + rng.normal(0, 1.0)),
                    "dst_avg": float(1.0 / loc + rng.normal(0, 0.01)),
                })
        return episodes

    def test_group_means_and_comparisons(self):
        episodes = self._episodes()
        report = build_report(episodes, ("mpc", "rulebased", "cautious"))
        g = report.group("delayed_remaining", "cautious", "t_end")
        assert g.n_total == 12
        assert g.mean == pytest.approx(18.0, abs=1.0)
        assert not g.undersized
        comp = [c for c in report.comparisons if c.metric == "t_end"]
        assert len(comp) == 1
        assert comp[0].h > CHI2_CRIT_3_GROUPS
        assert comp[0].mw_pair == ("mpc", "rulebased")

    def test_iqr_applied_per_group(self):
        episodes = self._episodes()
        episodes.append({"scenario": "delayed_remaining", "controller": "mpc",
                         "t_end": 1e6, "ttc_avg": 24.0, "dst_avg": 0.12})
        report = build_report(episodes, ("mpc", "rulebased", "cautious"))
        g = report.group("delayed_remaining", "mpc", "t_end")
        assert g.n_total == 13
        assert g.n_kept == 12
        assert g.mean < 100.0

    def test_format_table_mentions_all_controllers(self):
        report = build_report(self._episodes(), ("mpc", "rulebased", "cautious"))
        text = format_table(report, ("mpc", "rulebased", "cautious"))
        for name in ("mpc", "rulebased", "cautious", "t_end", "+/-"):
            assert name in text

    def test_missing_group_raises(self):
        report = build_report(self._episodes(), ("mpc", "rulebased", "cautious"))
        with pytest.raises(KeyError):
            report.group("delayed_remaining", "nonexistent", "t_end")
