import math

import pytest

from cascade_lab import graphs
from cascade_lab.compound import (
    DivergenceError,
    PropertyTable,
    build_sampler,
    multi_source_alpha_exp,
    reference_multi_source,
    run_compound_batch,
    sample_poisson,
)
from cascade_lab.diffusion import ModelParams, run_batch
from cascade_lab.rng import RngStream
from cascade_lab.stats import ks_statistic, to_cdf


def test_build_sampler_rejects_bad_input():
    with pytest.raises(ValueError):
        build_sampler([])
    with pytest.raises(ValueError):
        build_sampler([(1, 0, 0)])
    with pytest.raises(ValueError):
        build_sampler([(0, 0, 5)])


def test_build_sampler_merges_duplicates():
    t = build_sampler([(2, 1, 3), (2, 1, 4), (1, 0, 1)])
    assert list(t.entries()) == [(1, 0, 1), (2, 1, 7)]
    assert t.total == 8


def test_point_mass_always_sampled():
    t = build_sampler([(1, 0, 100)])
    rng = RngStream(1)
    assert all(t.sample(rng) == (1, 0) for _ in range(100))


def test_alias_marginals_exact_structure():
    # capacity accounting: entry i owns thresh[i] units in its own bucket
    # plus (total - thresh[j]) units of every bucket aliased to it; the sum
    # must equal freq[i] * num_entries exactly.
    t = build_sampler([(1, 0, 3), (2, 1, 1), (5, 2, 4), (9, 3, 17), (10, 1, 2)])
    n = t.num_entries
    capacity = {i: int(t._thresh[i]) for i in range(n)}
    for j in range(n):
        a = int(t._alias[j])
        if a != j:
            capacity[a] += t.total - int(t._thresh[j])
    for i in range(n):
        assert capacity[i] == int(t.freqs[i]) * n


def test_alias_dyadic_exact_sampling():
    t = build_sampler([(1, 0, 1), (2, 1, 1)])
    counts = {1: 0, 2: 0}
    for i in range(20_000):
        counts[t.sample(RngStream(2, i))[0]] += 1
    assert abs(counts[1] / 20_000 - 0.5) < 0.015


def test_alias_three_to_one_frequencies():
    t = build_sampler([(1, 0, 3), (2, 1, 1)])
    n = 10**6
    hits = sum(t.sample(RngStream(3, i))[0] == 1 for i in range(n))
    assert abs(hits / n - 0.75) < 0.002


def test_alias_empirical_frequencies_within_4_sigma_per_entry():
    # quantitative sampler-correctness bound for every entry of the table
    entries = [(1, 0, 311), (2, 1, 57), (3, 1, 900), (7, 4, 13), (20, 9, 219)]
    t = build_sampler(entries)
    n = 200_000
    hits = {s: 0 for s, _, _ in entries}
    for i in range(n):
        hits[t.sample(RngStream(55, i))[0]] += 1
    for s, _, f in entries:
        p = f / t.total
        bound = 4 * math.sqrt(p * (1 - p) / n)
        assert abs(hits[s] / n - p) <= bound, s


def test_property_table_tsv_round_trip(tmp_path):
    t = build_sampler([(1, 0, 5), (3, 2, 2)])
    path = tmp_path / "t.tsv"
    t.save(path)
    assert path.read_text() == "1\t0\t5\n3\t2\t2\n"
    back = PropertyTable.load(path)
    assert list(back.entries()) == list(t.entries())


def test_property_table_load_rejects_empty(tmp_path):
    path = tmp_path / "empty.tsv"
    path.write_text("")
    with pytest.raises(ValueError):
        PropertyTable.load(path)


def test_sample_poisson_zero():
    assert all(sample_poisson(0.0, RngStream(4, i)) == 0 for i in range(50))


def test_sample_poisson_mean():
    n = 100_000
    xs = [sample_poisson(0.185, RngStream(5, i)) for i in range(n)]
    assert abs(sum(xs) / n - 0.185) < 4 * math.sqrt(0.185 / n)


# ---- the multi-source recurrence ---------------------------------------------


def test_lambda_zero_is_single_table_draw():
    t = build_sampler([(1, 0, 2), (4, 3, 1), (2, 1, 5)])
    for i in range(500):
        r1, r2 = RngStream(6, i), RngStream(6, i)
        out = multi_source_alpha_exp(t, 0.0, r1)
        s, r = t.sample(r2)
        assert (out.size, out.rounds) == (s, r)
        # identical stream consumption
        assert (r1._s0, r1._s1, r1._s2, r1._s3) == (r2._s0, r2._s1, r2._s2, r2._s3)


def test_rounds_zero_point_mass_never_loops():
    t = build_sampler([(1, 0, 100)])
    for i in range(200):
        out = multi_source_alpha_exp(t, 50.0, RngStream(7, i))
        assert (out.size, out.rounds) == (1, 0)


def test_point_mass_2_1_mean_is_2_plus_2e():
    # initial (2,1); while alive each round draws Pois(1) sub-cascades of
    # (2,1), each keeping the horizon alive one more round.  P(alive at
    # round t) = (1-e^-1)^(t-1), so E[#subs] = sum = e and E[size] = 2+2e.
    t = build_sampler([(2, 1, 1)])
    n = 200_000
    total = 0
    for i in range(n):
        total += multi_source_alpha_exp(t, 1.0, RngStream(8, i)).size
    expected = 2 + 2 * math.e
    assert abs(total / n - expected) < 0.05


def test_optimized_matches_naive_reference_draw_for_draw():
    g = graphs.generate_erdos_renyi(300, 0.01, seed=9)
    _, table = run_batch(g, "alpha_k", ModelParams(0.5), 20_000, seed=10)
    mismatches = 0
    for i in range(5_000):
        r1, r2 = RngStream(11, i), RngStream(11, i)
        a = multi_source_alpha_exp(table, 0.4, r1)
        b = reference_multi_source(table, 0.4, r2)
        if (a.size, a.rounds) != (b.size, b.rounds):
            mismatches += 1
        if (r1._s0, r1._s1, r1._s2, r1._s3) != (r2._s0, r2._s1, r2._s2, r2._s3):
            mismatches += 1
    assert mismatches == 0


def test_kernel_batch_matches_python_per_run():
    t = build_sampler([(1, 0, 7), (2, 1, 2), (6, 4, 1)])
    hist = run_compound_batch(t, 0.35, 3_000, seed=12)
    sizes = []
    for i in range(3_000):
        sizes.append(multi_source_alpha_exp(t, 0.35, RngStream(12, i)).size)
    expected: dict[int, int] = {}
    for s in sizes:
        expected[s] = expected.get(s, 0) + 1
    assert hist.counts == expected


def test_divergence_error_single_run():
    t = build_sampler([(1, 1, 1)])  # every sub-cascade extends the horizon
    with pytest.raises(DivergenceError):
        multi_source_alpha_exp(t, 60.0, RngStream(13), round_cap=1000)


def test_divergent_runs_excluded_and_counted():
    # horizon extends each round w.p. 1 - exp(-lam); lam = 5.66 puts the
    # probability of surviving past cap=200 near one half
    t = build_sampler([(1, 1, 1)])
    hist = run_compound_batch(t, 5.66, 300, seed=14, round_cap=200)
    assert 30 < hist.diverged < 270
    assert hist.runs == 300
    assert hist.total == 300 - hist.diverged


def test_all_divergent_raises():
    t = build_sampler([(1, 1, 1)])
    with pytest.raises(DivergenceError):
        run_compound_batch(t, 80.0, 50, seed=15, round_cap=100)


def test_batch_worker_invariance():
    g = graphs.generate_erdos_renyi(300, 0.01, seed=16)
    _, table = run_batch(g, "alpha_k", ModelParams(0.45), 20_000, seed=17)
    hists = [run_compound_batch(table, 0.3, 30_000, seed=18, workers=w) for w in (1, 4, 8)]
    assert hists[0].counts == hists[1].counts == hists[2].counts


def test_lambda_zero_batch_reproduces_table_marginal_distribution():
    g = graphs.generate_erdos_renyi(500, 0.006, seed=19)
    _, table = run_batch(g, "alpha_k", ModelParams(0.4), 50_000, seed=20)
    hist = run_compound_batch(table, 0.0, 50_000, seed=21)
    ks = ks_statistic(to_cdf(hist), to_cdf(table.size_marginal()))
    assert ks.statistic <= 2 / math.sqrt(50_000) + 0.003


# ---- Wald-style mean oracle --------------------------------------------------


def test_batch_mean_scales_with_lambda_per_wald_identity():
    # Sizes are constant (2) and sub-cascade rounds are 1 w.p. q, so the
    # live horizon is a geometric chain: a processed round extends the
    # horizon iff >= 1 of its Pois(lam) sub-cascades has r = 1, i.e. with
    # p = 1 - exp(-lam q).  E[rounds processed] = q / (1 - p) (the initial
    # draw opens the chain w.p. q), and by Wald's identity the mean number
    # of sub-draws is lam * E[T], each contributing exactly size 2:
    #     E[size] = 2 + 2 lam E[T].
    # This closed form is the independent oracle for the batch mean, and
    # doubling lambda visibly bends the mean away from naive linearity.
    q = 0.25
    t = build_sampler([(2, 0, 3), (2, 1, 1)])
    n = 120_000
    for lam in (0.1, 0.3, 1.0):
        p_alive = 1.0 - math.exp(-lam * q)
        e_t = q / (1.0 - p_alive)
        expected_mean = 2.0 + 2.0 * lam * e_t
        hist = run_compound_batch(t, lam, n, seed=1000 + int(lam * 10))
        mean = sum(s * c for s, c in hist.counts.items()) / hist.total
        assert abs(mean - expected_mean) < 0.05, (lam, mean, expected_mean)
