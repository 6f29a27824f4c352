"""Per-technique unit tests.

Every hand-frozen constant in this file was either computed by hand from
the published closed form, recomputed here with mpmath at 50 digits, or
captured once from the serial simulator and frozen as a regression
fixture. Tests never call the code under test to produce their own
expected values at runtime, except where a sequence equality between two
techniques is itself the contract.
"""

import math

import pytest
from mpmath import mp, mpf

from dlslab import (
    AdaptiveState,
    CostVector,
    DistributionSpec,
    ExecutionContext,
    LoopDescriptor,
    LoopScheduler,
    OverheadModel,
    TECHNIQUE_NAMES,
    ThreadStats,
    ThreadWeights,
    WorkloadProfile,
    generate_costs,
    get_technique,
    normalize_technique,
    simulate,
)
from dlslab.errors import InvalidParameters, ProfileMissing, UnknownTechnique
from dlslab.schedulers import awf_update_weights

mp.dps = 50


def run_sizes(technique, n, p, k=1, *, costs=None, overhead=None,
              profile=None, weights=None, time_steps=1, instance=0,
              technique_obj=None, worker_speed=None):
    """Chunk-size sequence for one simulated instance, in grant order."""
    desc = LoopDescriptor("unit", n, time_steps)
    ctx = ExecutionContext(p=p, technique=technique, chunk_param=k,
                           weights=weights, profile=profile)
    if costs is None:
        costs = CostVector.constant(n, 1e-6)
    rep = simulate(desc, ctx, costs, overhead, technique=technique_obj,
                   worker_speed=worker_speed, collect_chunks=True)
    return rep.chunk_sizes(instance)


def run_chunks(technique, n, p, k=1, *, costs=None, overhead=None,
               profile=None, weights=None, worker_speed=None):
    desc = LoopDescriptor("unit", n)
    ctx = ExecutionContext(p=p, technique=technique, chunk_param=k,
                           weights=weights, profile=profile)
    if costs is None:
        costs = CostVector.constant(n, 1e-6)
    rep = simulate(desc, ctx, costs, overhead, worker_speed=worker_speed,
                   collect_chunks=True)
    return rep.chunks[0]


def gamma_costs(n, seed, scale=1e-11):
    spec = DistributionSpec.default("gamma", seed=seed)
    raw = generate_costs(spec, n)
    return CostVector(raw.values * scale)


def non_increasing(seq):
    return all(a >= b for a, b in zip(seq, seq[1:]))


# ---------------------------------------------------------------- registry

def test_registry_names_and_order():
    assert TECHNIQUE_NAMES == (
        "static", "ss", "gss", "tss", "fsc", "fac", "mfac", "fac2", "tap",
        "wf2", "bold", "awf", "awf-b", "awf-c", "awf-d", "awf-e", "af", "maf",
    )


def test_normalize_accepts_case_and_underscores():
    assert normalize_technique("GSS") == "gss"
    assert normalize_technique(" AWF_B ") == "awf-b"
    assert normalize_technique("mAF") == "maf"


def test_normalize_rejects_unknown():
    with pytest.raises(UnknownTechnique) as exc:
        normalize_technique("gssx")
    assert "gssx" in str(exc.value)
    assert "gss" in str(exc.value)


def test_get_technique_caches_plain_instances():
    assert get_technique("gss") is get_technique("gss")
    tuned = get_technique("tap", alpha=2.0)
    assert tuned is not get_technique("tap")
    assert tuned.alpha == 2.0


def test_profile_required_set():
    needing = {name for name in TECHNIQUE_NAMES
               if get_technique(name).requires_profile}
    assert needing == {"fsc", "fac", "mfac", "tap", "bold"}


def test_profile_missing_raised_without_profile():
    desc = LoopDescriptor("unit", 100)
    for name in ("fsc", "fac", "mfac", "tap", "bold"):
        ctx = ExecutionContext(p=2, technique=name)
        with pytest.raises(ProfileMissing):
            LoopScheduler(desc, ctx)


def test_chunk_param_larger_than_n_rejected():
    desc = LoopDescriptor("unit", 10)
    ctx = ExecutionContext(p=2, technique="ss", chunk_param=11)
    with pytest.raises(InvalidParameters):
        LoopScheduler(desc, ctx)


def test_batch_mutex_flags():
    assert get_technique("fac").uses_batch_mutex
    assert not get_technique("mfac").uses_batch_mutex
    assert not get_technique("gss").uses_batch_mutex


# ------------------------------------------------------------------ static

def test_static_blocks():
    chunks = run_chunks("static", 10, 4)
    sizes = {c.thread: c.size for c in chunks}
    assert sizes == {0: 3, 1: 3, 2: 3, 3: 1}


def test_static_ignores_chunk_param():
    assert run_sizes("static", 10, 4, k=7) == run_sizes("static", 10, 4, k=1)


def test_static_more_threads_than_iterations():
    chunks = run_chunks("static", 3, 8)
    assert sorted(c.thread for c in chunks) == [0, 1, 2]
    assert all(c.size == 1 for c in chunks)


def test_static_single_thread_takes_all():
    assert run_sizes("static", 1000, 1) == [1000]


# ---------------------------------------------------------------------- ss

def test_ss_fixed_chunk():
    assert run_sizes("ss", 100, 4, k=7) == [7] * 14 + [2]


def test_ss_unit_chunks_by_default():
    assert run_sizes("ss", 25, 3) == [1] * 25


def test_ss_whole_loop_when_k_equals_n():
    assert run_sizes("ss", 64, 4, k=64) == [64]


# --------------------------------------------------------------------- gss

def test_gss_sequence_frozen():
    # ceil(remaining / p) by hand: 100, 75, 56, 42, 31, 23, 17, 12, 9, 7,
    # 5, 4, 3, 2, 1 remaining before each grant.
    assert run_sizes("gss", 100, 4) == [25, 19, 14, 11, 8, 6, 5, 3, 3, 2,
                                        1, 1, 1, 1]


def test_gss_threshold_lifts_tail():
    seq = run_sizes("gss", 100, 4, k=5)
    assert sum(seq) == 100
    assert all(s >= 5 for s in seq[:-1])
    assert non_increasing(seq[:-1]) or seq == sorted(seq, reverse=True)


def test_gss_non_increasing_large():
    seq = run_sizes("gss", 10 ** 6, 20)
    assert non_increasing(seq)
    assert sum(seq) == 10 ** 6


# --------------------------------------------------------------------- tss

def test_tss_sequence_frozen():
    # first = ceil(1000 / 8) = 125, last = 1, C = ceil(2000 / 126) = 16,
    # delta = 124 / 15 = 8.2666..; floor sizes with running remainder.
    assert run_sizes("tss", 1000, 4) == [125, 116, 108, 100, 91, 83, 75,
                                         67, 58, 50, 42, 34, 25, 17, 9]


def test_tss_partitions_and_decreases():
    for n, p, k in ((10, 2, 1), (1000, 4, 1), (99991, 16, 5), (512, 8, 32)):
        seq = run_sizes("tss", n, p, k=k)
        assert sum(seq) == n
        assert non_increasing(seq[:-1])


def test_tss_respects_chunk_param_floor():
    seq = run_sizes("tss", 1000, 4, k=40)
    assert all(s >= 40 for s in seq[:-1])
    assert sum(seq) == 1000


# --------------------------------------------------------------------- fsc

FSC_ORACLE = 360  # frozen from the closed form below


def test_fsc_closed_form_high_precision():
    n, p = mpf(10) ** 6, mpf(20)
    h, sigma = mpf("2e-6"), mpf("1e-5")
    ratio = (mp.sqrt(2) * n * h) / (sigma * p * mp.sqrt(mp.log(p, 2)))
    assert int(mp.ceil(ratio ** (mpf(2) / 3))) == FSC_ORACLE


def test_fsc_constant_chunk_from_profile():
    prof = WorkloadProfile(mu=1e-4, sigma=1e-5, h=2e-6)
    seq = run_sizes("fsc", 10 ** 6, 20, profile=prof)
    assert seq[0] == FSC_ORACLE
    assert set(seq[:-1]) == {FSC_ORACLE}
    assert sum(seq) == 10 ** 6


def test_fsc_zero_variance_falls_back_to_even_split():
    prof = WorkloadProfile(mu=1e-4, sigma=0.0, h=2e-6)
    seq = run_sizes("fsc", 1000, 4, profile=prof)
    assert seq == [250, 250, 250, 250]


def test_fsc_single_thread_falls_back():
    prof = WorkloadProfile(mu=1e-4, sigma=1e-5, h=2e-6)
    assert run_sizes("fsc", 777, 1, profile=prof) == [777]


def test_fsc_zero_overhead_degenerates_to_chunk_param():
    prof = WorkloadProfile(mu=1e-4, sigma=1e-5, h=0.0)
    seq = run_sizes("fsc", 100, 4, k=7, profile=prof)
    assert seq == [7] * 14 + [2]


# --------------------------------------------------------------------- fac

FAC_ORACLE = 49648  # frozen from the closed form below


def test_fac_closed_form_high_precision():
    r, p = mpf(10) ** 6, mpf(20)
    ratio = mpf("0.5")  # sigma / mu
    b = (p / (2 * mp.sqrt(r))) * ratio
    x = 1 + b ** 2 + b * mp.sqrt(b ** 2 + 2)
    assert int(mp.ceil(r / (x * p))) == FAC_ORACLE


def test_fac_first_batch_chunk():
    prof = WorkloadProfile(mu=2e-4, sigma=1e-4)
    seq = run_sizes("fac", 10 ** 6, 20, profile=prof)
    assert seq[:20] == [FAC_ORACLE] * 20
    assert sum(seq) == 10 ** 6


def test_fac_batches_shrink():
    prof = WorkloadProfile(mu=2e-4, sigma=1e-4)
    seq = run_sizes("fac", 10 ** 6, 20, profile=prof)
    batch_heads = seq[::20][:4]
    assert non_increasing(batch_heads)
    assert batch_heads[0] > batch_heads[1]


def test_mfac_matches_fac_sequence():
    prof = WorkloadProfile(mu=2e-4, sigma=1e-4)
    for n, p in ((10 ** 6, 20), (1000, 4), (97, 3)):
        assert run_sizes("mfac", n, p, profile=prof) == \
            run_sizes("fac", n, p, profile=prof)


# -------------------------------------------------------------------- fac2

def test_fac2_sequence_frozen():
    assert run_sizes("fac2", 100, 4) == [13, 13, 13, 13, 7, 7, 7, 7,
                                         4, 4, 4, 4, 2, 2]


def test_fac2_batch_chunks_halve():
    seq = run_sizes("fac2", 10 ** 6, 20)
    assert seq[0] == 25000
    assert seq[20] == 12500
    assert seq[40] == 6250
    assert seq[60] == 3125
    assert sum(seq) == 10 ** 6


def test_fac2_first_chunk_is_half_gss_first():
    for n, p in ((100, 4), (10 ** 6, 20), (12345, 7)):
        gss_first = run_sizes("gss", n, p)[0]
        fac2_first = run_sizes("fac2", n, p)[0]
        assert fac2_first == math.ceil(gss_first / 2)


# --------------------------------------------------------------------- tap

TAP_ORACLE = 49795  # frozen from the closed form below


def test_tap_closed_form_high_precision():
    r, p = mpf(10) ** 6, mpf(20)
    v = mpf("1.3") * mpf("0.5")
    s = r / p + v ** 2 / 2 - v * mp.sqrt(2 * r / p + v ** 2 / 4)
    assert int(mp.ceil(s)) == TAP_ORACLE


def test_tap_first_chunk():
    prof = WorkloadProfile(mu=2e-4, sigma=1e-4)
    seq = run_sizes("tap", 10 ** 6, 20, profile=prof)
    assert seq[0] == TAP_ORACLE
    assert non_increasing(seq[:-1])
    assert sum(seq) == 10 ** 6


def test_tap_zero_variance_equals_gss():
    prof = WorkloadProfile(mu=2e-4, sigma=0.0)
    assert run_sizes("tap", 5000, 4, profile=prof) == \
        run_sizes("gss", 5000, 4)


def test_tap_rejects_nonpositive_alpha():
    with pytest.raises(InvalidParameters):
        get_technique("tap", alpha=0.0)


def test_tap_higher_alpha_is_more_conservative():
    prof = WorkloadProfile(mu=2e-4, sigma=1e-4)
    eager = run_sizes("tap", 10 ** 6, 20, profile=prof)[0]
    tuned = get_technique("tap", alpha=2.0)
    cautious = run_sizes("tap", 10 ** 6, 20, profile=prof,
                         technique_obj=tuned)[0]
    assert cautious < eager


# --------------------------------------------------------------------- wf2

def test_wf2_applies_weights():
    chunks = run_chunks("wf2", 1000, 2, weights=ThreadWeights([1.5, 0.5]))
    first_by_thread = {}
    for c in chunks:
        first_by_thread.setdefault(c.thread, c.size)
    assert first_by_thread == {0: 375, 1: 125}


def test_wf2_uniform_weights_match_fac2():
    for n, p in ((100, 4), (5000, 8)):
        assert run_sizes("wf2", n, p, weights=ThreadWeights.uniform(p)) == \
            run_sizes("fac2", n, p)
    assert run_sizes("wf2", 3000, 5) == run_sizes("fac2", 3000, 5)


def test_wf2_partitions_with_skewed_weights():
    seq = run_sizes("wf2", 99991, 4, weights=ThreadWeights([3.0, 0.5, 0.4, 0.1]))
    assert sum(seq) == 99991


# -------------------------------------------------------------------- bold

BOLD_GOLDEN_HEAD = [100000, 85500, 73896, 64455, 56667, 50162, 44673,
                    39996, 35977, 32500]
BOLD_GOLDEN_TAIL = [97, 44]
BOLD_GOLDEN_LEN = 128


def test_bold_golden_sequence():
    # Captured once from the serial simulator and frozen.
    prof = WorkloadProfile(mu=1.0, sigma=0.5, h=1e-3)
    seq = run_sizes("bold", 10 ** 6, 20, k=97, profile=prof,
                    costs=CostVector.constant(10 ** 6, 1.0))
    assert len(seq) == BOLD_GOLDEN_LEN
    assert seq[:10] == BOLD_GOLDEN_HEAD
    assert seq[-2:] == BOLD_GOLDEN_TAIL
    assert sum(seq) == 10 ** 6


def test_bold_first_chunk_at_least_gss_when_overhead_positive():
    prof = WorkloadProfile(mu=1e-4, sigma=5e-5, h=1e-5)
    for n, p in ((10 ** 5, 8), (10 ** 6, 20), (4096, 4)):
        bold_first = run_sizes("bold", n, p, profile=prof)[0]
        gss_first = run_sizes("gss", n, p)[0]
        assert bold_first >= gss_first


def test_bold_non_increasing():
    prof = WorkloadProfile(mu=1e-4, sigma=5e-5, h=1e-5)
    seq = run_sizes("bold", 10 ** 5, 8, profile=prof)
    assert non_increasing(seq)
    assert sum(seq) == 10 ** 5


def test_bold_no_overhead_no_variance_equals_gss():
    prof = WorkloadProfile(mu=1e-4, sigma=0.0, h=0.0)
    assert run_sizes("bold", 10 ** 4, 4, profile=prof) == \
        run_sizes("gss", 10 ** 4, 4)


# -------------------------------------------------------- awf weight update

def make_stats(iterations, busy, sched=None):
    p = len(iterations)
    stats = ThreadStats(p)
    stats.iterations_done = list(iterations)
    stats.busy_time = list(busy)
    stats.sched_time = list(sched) if sched else [0.0] * p
    return stats


def test_awf_weights_equal_rates_are_uniform():
    stats = make_stats([100, 100, 100], [2.0, 2.0, 2.0])
    weights = awf_update_weights(stats, "awf")
    assert list(weights) == pytest.approx([1.0, 1.0, 1.0])


def test_awf_weights_two_to_one():
    stats = make_stats([2, 1], [1.0, 1.0])
    weights = awf_update_weights(stats, "awf")
    assert list(weights) == pytest.approx([4.0 / 3.0, 2.0 / 3.0])


def test_awf_weights_sched_time_only_counts_for_d_and_e():
    stats = make_stats([100, 100], [1.0, 1.0], sched=[1.0, 0.0])
    for variant in ("awf", "b", "c"):
        w = awf_update_weights(stats, variant)
        assert list(w) == pytest.approx([1.0, 1.0])
    for variant in ("d", "e"):
        w = awf_update_weights(stats, variant)
        assert w[0] < 1.0 < w[1]
        assert w[0] == pytest.approx(2.0 / 3.0)
        assert w[1] == pytest.approx(4.0 / 3.0)


def test_awf_weights_carry_forward_idle_thread():
    stats = make_stats([50, 0], [1.0, 0.0])
    prev = ThreadWeights([1.2, 0.8])
    w = awf_update_weights(stats, "b", prev)
    assert w[1] == pytest.approx(0.8)
    assert w[0] == pytest.approx(1.2)
    assert math.fsum(w) == pytest.approx(2.0)


def test_awf_weights_sum_to_p():
    stats = make_stats([10, 30, 0, 25], [0.5, 0.25, 0.0, 1.0])
    w = awf_update_weights(stats, "c", ThreadWeights([1.0, 1.0, 0.5, 1.5]))
    assert math.fsum(w) == pytest.approx(4.0)


# ----------------------------------------------------------- awf scheduling

def drive_one_batch(technique_name):
    """Grant the full first batch on p=3, complete threads 0 and 1 with a
    2:1 rate gap, leave thread 2 outstanding, then grant thread 0 again."""
    desc = LoopDescriptor("awf", 30000)
    ctx = ExecutionContext(p=3, technique=technique_name)
    sched = LoopScheduler(desc, ctx)
    first = [sched.next_chunk(t) for t in range(3)]
    assert [c.size for c in first] == [5000, 5000, 5000]
    sched.complete_chunk(0, first[0], busy_time=5.0, sched_time=5.0)
    sched.complete_chunk(1, first[1], busy_time=10.0, sched_time=0.0)
    follow = sched.next_chunk(0)
    return follow.size, list(sched.state.adaptive.weights)


def test_awf_b_waits_for_batch_drain():
    size, weights = drive_one_batch("awf-b")
    assert weights == pytest.approx([1.0, 1.0, 1.0])
    assert size == 2500  # ceil(remaining / 2p) * unchanged weight


def test_awf_c_updates_on_chunk_completion():
    size, weights = drive_one_batch("awf-c")
    # measured rates 1000 and 500 it/s share 2.0 of weight; idle keeps 1.0
    assert weights == pytest.approx([4.0 / 3.0, 2.0 / 3.0, 1.0])
    assert size == math.ceil(2500 * 4.0 / 3.0)


def test_awf_d_counts_scheduling_time():
    size, weights = drive_one_batch("awf-d")
    # thread 0 rate drops to 5000/10s once sched time counts: equal rates
    assert weights == pytest.approx([1.0, 1.0, 1.0])
    assert size == 2500


def test_awf_e_waits_for_batch_drain():
    size, weights = drive_one_batch("awf-e")
    assert weights == pytest.approx([1.0, 1.0, 1.0])
    assert size == 2500


def test_awf_plain_updates_only_at_instance_end():
    desc = LoopDescriptor("awf", 3000)
    ctx = ExecutionContext(p=2, technique="awf")
    sched = LoopScheduler(desc, ctx)
    while True:
        granted = False
        for t in range(2):
            chunk = sched.next_chunk(t)
            if chunk is not None:
                granted = True
                busy = 1e-4 * chunk.size * (2.0 if t else 1.0)
                sched.complete_chunk(t, chunk, busy, 0.0)
        if not granted:
            break
    assert list(sched.state.adaptive.weights) == [1.0, 1.0]
    sched.finish_instance()
    weights = list(sched.state.adaptive.weights)
    assert weights[0] > 1.0 > weights[1]
    assert math.fsum(weights) == pytest.approx(2.0)


def test_awf_b_drain_triggers_update():
    desc = LoopDescriptor("awf", 30000)
    ctx = ExecutionContext(p=3, technique="awf-b")
    sched = LoopScheduler(desc, ctx)
    first = [sched.next_chunk(t) for t in range(3)]
    sched.complete_chunk(0, first[0], busy_time=5.0, sched_time=0.0)
    sched.complete_chunk(1, first[1], busy_time=10.0, sched_time=0.0)
    sched.complete_chunk(2, first[2], busy_time=10.0, sched_time=0.0)
    weights = list(sched.state.adaptive.weights)
    assert weights[0] == pytest.approx(1.5)
    assert weights[1] == weights[2] == pytest.approx(0.75)


def test_awf_untriggered_single_instance_matches_wf2():
    seq_awf = run_sizes("awf", 4096, 4)
    seq_wf2 = run_sizes("wf2", 4096, 4, weights=ThreadWeights.uniform(4))
    assert seq_awf == seq_wf2


# ------------------------------------------------------------------ af/maf

AF_ORACLE_FAST = 6657  # thread with mu=1e-3 requesting first at R=10000
AF_ORACLE_SLOW = 3329  # thread with mu=2e-3 requesting first at R=10000


def test_af_closed_form_high_precision():
    mus = (mpf("1e-3"), mpf("2e-3"))
    sig2 = mpf("1e-4") ** 2
    big_d = sig2 / mus[0] + sig2 / mus[1]
    big_e = 1 / (1 / mus[0] + 1 / mus[1])
    r = mpf(10000)
    expected = []
    for mu in mus:
        raw = (big_d + 2 * big_e * r
               - mp.sqrt(big_d ** 2 + 4 * big_d * big_e * r)) / (2 * mu)
        expected.append(int(mp.ceil(raw)))
    assert expected == [AF_ORACLE_FAST, AF_ORACLE_SLOW]


def seeded_af_scheduler(n=10000, technique="af"):
    desc = LoopDescriptor("af", n)
    ctx = ExecutionContext(p=2, technique=technique)
    adaptive = AdaptiveState(2)
    for t, mu in enumerate((1e-3, 2e-3)):
        adaptive.af_count[t] = 5
        adaptive.af_mean[t] = mu
        adaptive.af_m2[t] = 5 * (1e-4) ** 2
    return LoopScheduler(desc, ctx, adaptive=adaptive)


def test_af_closed_form_chunks():
    sched = seeded_af_scheduler()
    assert sched.next_chunk(0).size == AF_ORACLE_FAST
    sched = seeded_af_scheduler()
    assert sched.next_chunk(1).size == AF_ORACLE_SLOW


def test_af_faster_thread_gets_larger_chunk():
    assert AF_ORACLE_FAST > AF_ORACLE_SLOW


def test_af_warmup_is_ten_regardless_of_chunk_param():
    for k in (1, 7, 97):
        desc = LoopDescriptor("af", 1000)
        ctx = ExecutionContext(p=2, technique="af", chunk_param=k)
        sched = LoopScheduler(desc, ctx)
        assert sched.next_chunk(0).size == 10
        assert sched.next_chunk(1).size == 10


def test_af_warmup_clamps_to_remaining():
    desc = LoopDescriptor("af", 7)
    ctx = ExecutionContext(p=4, technique="af")
    sched = LoopScheduler(desc, ctx)
    assert sched.next_chunk(0).size == 7
    assert sched.next_chunk(1) is None


def test_af_keeps_warming_up_until_every_thread_reports():
    desc = LoopDescriptor("af", 10000)
    ctx = ExecutionContext(p=2, technique="af")
    sched = LoopScheduler(desc, ctx)
    c0 = sched.next_chunk(0)
    assert c0.size == 10
    sched.complete_chunk(0, c0, busy_time=1e-2, sched_time=0.0)
    # thread 1 has no sample yet, so thread 0 gets another warm-up chunk
    c0b = sched.next_chunk(0)
    assert c0b.size == 10
    sched.complete_chunk(0, c0b, busy_time=1e-2, sched_time=0.0)
    c1 = sched.next_chunk(1)
    assert c1.size == 10
    sched.complete_chunk(1, c1, busy_time=1e-2, sched_time=0.0)
    grown = sched.next_chunk(0)
    assert grown.size > 10


def test_af_homogeneous_no_variance_splits_evenly():
    desc = LoopDescriptor("af", 10000)
    ctx = ExecutionContext(p=4, technique="af")
    adaptive = AdaptiveState(4)
    for t in range(4):
        adaptive.af_count[t] = 3
        adaptive.af_mean[t] = 1e-3
        adaptive.af_m2[t] = 0.0
    sched = LoopScheduler(desc, ctx, adaptive=adaptive)
    assert sched.next_chunk(0).size == 2500


def test_af_welford_estimates():
    adaptive = AdaptiveState(1)
    for sample in (2.0, 4.0, 4.0, 10.0):
        adaptive.observe_iteration_time(0, sample)
    assert adaptive.mu_est(0) == pytest.approx(5.0)
    assert adaptive.sigma_est(0) == pytest.approx(3.0)


def test_maf_sample_includes_scheduling_time():
    af = get_technique("af")
    maf = get_technique("maf")
    for tech, expected_mu in ((af, 1e-3), (maf, 2e-3)):
        desc = LoopDescriptor("af", 1000)
        ctx = ExecutionContext(p=1, technique=tech.name)
        sched = LoopScheduler(desc, ctx)
        chunk = sched.next_chunk(0)
        sched.complete_chunk(0, chunk, busy_time=10 * 1e-3,
                             sched_time=10 * 1e-3)
        assert sched.state.adaptive.mu_est(0) == pytest.approx(expected_mu)


def test_maf_equals_af_without_overhead():
    costs = gamma_costs(5000, seed=4)
    for p in (1, 3):
        assert run_sizes("maf", 5000, p, costs=costs) == \
            run_sizes("af", 5000, p, costs=costs)


MAF_GOLDEN = [10, 10, 10, 10, 10, 10, 10, 20162, 22731, 13999, 10603, 8185,
              6092, 4603, 3128, 2572, 2124, 1431, 1018, 806, 615, 457, 332,
              281, 187, 148, 113, 84, 64, 46, 39, 27, 20, 15, 12, 9, 7, 5,
              4, 3, 2, 2, 1, 1, 1, 1]


def test_maf_golden_sequence():
    # Captured once from the serial simulator and frozen: p=4, h=1e-5s
    # per assignment, gamma-distributed costs.
    costs = gamma_costs(10 ** 5, seed=11)
    seq = run_sizes("maf", 10 ** 5, 4, costs=costs,
                    overhead=OverheadModel(h_assign=1e-5))
    assert seq == MAF_GOLDEN
    assert sum(seq) == 10 ** 5


def test_af_slow_worker_gets_smaller_share():
    costs = gamma_costs(10 ** 5, seed=2)

    def speed(worker, chunk):
        return 4.0 if worker == 0 else 1.0

    for name in ("af", "maf", "awf-b", "awf-c", "awf-d", "awf-e"):
        chunks = run_chunks(name, 10 ** 5, 4, costs=costs,
                            overhead=OverheadModel(h_assign=1e-6),
                            worker_speed=speed)
        done = [0] * 4
        for c in chunks:
            done[c.thread] += c.size
        assert done[0] < 10 ** 5 / 4, name


# ------------------------------------------------------------ chunk counts

def test_chunk_count_ordering_ss_gss_fsc():
    # high per-assignment overhead pushes FSC towards few large chunks
    prof = WorkloadProfile(mu=1e-4, sigma=1e-5, h=2e-3)
    n, p = 10 ** 5, 8
    counts = {name: len(run_sizes(name, n, p, profile=prof))
              for name in ("ss", "gss", "fsc")}
    assert counts["ss"] >= counts["gss"] >= counts["fsc"]
    assert counts["ss"] == n
