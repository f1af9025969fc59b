import pytest

from cascade_lab import graphs
from cascade_lab.cli import main
from cascade_lab.stats import SizeHistogram, read_histogram, write_histogram

DAY = 86_400


@pytest.fixture
def events_file(tmp_path):
    path = tmp_path / "events.tsv"
    path.write_text(
        f"0\tA\tB\ttag1\n"
        f"50\tA\tB\ttag1\n"
        f"{DAY}\tC\tA\ttag2\n"
        f"{2 * DAY - 1}\tB\tC\ttag2\n"
    )
    return path


@pytest.fixture
def star_graph_file(tmp_path):
    path = tmp_path / "star.cscg"
    graphs.generate_star(10).save(path)
    return path


def run(argv):
    return main([str(a) for a in argv])


def test_ingest_four_event_fixture(tmp_path, events_file, capsys):
    graph_out = tmp_path / "g.cscg"
    rc = run(
        [
            "ingest",
            "--events", events_file,
            "--graph-out", graph_out,
            "--popularity-out", tmp_path / "pop.tsv",
            "--split-out", tmp_path / "split.tsv",
            "--fresh-days", 1,
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "nodes=3 edges=3" in out
    g = graphs.Graph.load(graph_out)
    assert g.num_nodes == 3
    assert g.num_edges == 3
    # tag1 occurred during day 0 -> excluded; tag2 used by 2 distinct actors
    assert (tmp_path / "pop.tsv").read_text() == "2\t1\n"
    assert (tmp_path / "split.tsv").read_text() == "1970-01-01\ttrain\n1970-01-02\ttest\n"
    assert (tmp_path / "g.cscg.idmap.tsv").read_text() == "A\t0\nB\t1\nC\t2\n"


def test_ingest_missing_file_exit_2(tmp_path, capsys):
    rc = run(
        [
            "ingest",
            "--events", tmp_path / "nope.tsv",
            "--graph-out", tmp_path / "g",
            "--popularity-out", tmp_path / "p",
            "--split-out", tmp_path / "s",
        ]
    )
    assert rc == 2
    assert "error" in capsys.readouterr().err


def test_ingest_empty_hashtags_gives_empty_popularity(tmp_path, capsys):
    events = tmp_path / "ev.tsv"
    events.write_text(f"0\tA\tB\t\n{2 * DAY - 1}\tB\t\t\n")
    rc = run(
        [
            "ingest",
            "--events", events,
            "--graph-out", tmp_path / "g.cscg",
            "--popularity-out", tmp_path / "pop.tsv",
            "--split-out", tmp_path / "split.tsv",
        ]
    )
    assert rc == 0
    assert (tmp_path / "pop.tsv").read_text() == ""


def test_simulate_alpha_zero_point_mass(tmp_path, star_graph_file, capsys):
    hist_out = tmp_path / "h.tsv"
    rc = run(
        [
            "simulate", "--graph", star_graph_file, "--model", "alpha",
            "--alpha", 0, "--runs", 200, "--seed", 5, "--hist-out", hist_out,
        ]
    )
    assert rc == 0
    h = read_histogram(hist_out)
    assert h.counts == {1: 200}
    assert h.runs == 200


def test_simulate_rejects_bad_alpha(tmp_path, star_graph_file):
    with pytest.raises(SystemExit) as exc:
        run(
            [
                "simulate", "--graph", star_graph_file, "--model", "alpha",
                "--alpha", 1.5, "--runs", 1, "--hist-out", tmp_path / "h",
            ]
        )
    assert exc.value.code == 2


def test_simulate_deterministic_across_workers(tmp_path, star_graph_file):
    outs = []
    for w, name in [(1, "a.tsv"), (4, "b.tsv"), (8, "c.tsv")]:
        rc = run(
            [
                "simulate", "--graph", star_graph_file, "--model", "alpha-k",
                "--alpha", 0.4, "--runs", 5000, "--seed", 9,
                "--workers", w, "--hist-out", tmp_path / name,
            ]
        )
        assert rc == 0
        outs.append((tmp_path / name).read_bytes())
    assert outs[0] == outs[1] == outs[2]


def test_simulate_star_matches_binomial(tmp_path, star_graph_file):
    hist_out = tmp_path / "h.tsv"
    rc = run(
        [
            "simulate", "--graph", star_graph_file, "--model", "alpha",
            "--alpha", 0.3, "--runs", 50000, "--seed", 3,
            "--start", 0, "--hist-out", hist_out,
        ]
    )
    assert rc == 0
    h = read_histogram(hist_out)
    assert abs(h.counts[1] / h.total - 0.7**10) < 0.01


def test_table_then_compound_lambda_zero(tmp_path, star_graph_file, capsys):
    table_out = tmp_path / "t.tsv"
    rc = run(
        [
            "table", "--graph", star_graph_file, "--alpha", 0.5,
            "--runs", 20000, "--seed", 1, "--table-out", table_out,
        ]
    )
    assert rc == 0
    hist_out = tmp_path / "h.tsv"
    rc = run(
        [
            "compound", "--table", table_out, "--lambda", 0,
            "--runs", 20000, "--seed", 2, "--hist-out", hist_out,
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert "diverged=0" in out
    h = read_histogram(hist_out)
    assert h.diverged == 0
    # lambda=0 resamples the table marginal; supports must agree
    from cascade_lab.compound import PropertyTable

    marginal = PropertyTable.load(table_out).size_marginal()
    assert set(h.counts) <= set(marginal.counts)


def test_compound_empty_table_is_domain_error(tmp_path, capsys):
    table = tmp_path / "t.tsv"
    table.write_text("")
    rc = run(
        ["compound", "--table", table, "--lambda", 0.1, "--runs", 10,
         "--hist-out", tmp_path / "h.tsv"]
    )
    assert rc == 1


def test_ks_file_vs_itself(tmp_path, capsys):
    h = tmp_path / "h.tsv"
    write_histogram(SizeHistogram({1: 3, 2: 1}), h)
    rc = run(["ks", "--a", h, "--b", h])
    assert rc == 0
    assert capsys.readouterr().out == "0.000000\t1\n"


def test_ks_point_masses(tmp_path, capsys):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    write_histogram(SizeHistogram({1: 1}), a)
    write_histogram(SizeHistogram({2: 1}), b)
    rc = run(["ks", "--a", a, "--b", b])
    assert rc == 0
    assert capsys.readouterr().out == "1.000000\t1\n"


def test_ks_hand_fixture(tmp_path, capsys):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    write_histogram(SizeHistogram({1: 1}), a)
    write_histogram(SizeHistogram({1: 1, 2: 1}), b)
    rc = run(["ks", "--a", a, "--b", b])
    assert rc == 0
    assert capsys.readouterr().out == "0.500000\t1\n"


def test_ks_empty_input_domain_error(tmp_path, capsys):
    a, b = tmp_path / "a.tsv", tmp_path / "b.tsv"
    a.write_text("")
    write_histogram(SizeHistogram({1: 1}), b)
    rc = run(["ks", "--a", a, "--b", b])
    assert rc == 1


def test_fit_single_point_and_summary(tmp_path, capsys):
    graph_path = tmp_path / "g.cscg"
    graphs.generate_erdos_renyi(300, 0.005, seed=4).save(graph_path)
    target = tmp_path / "target.tsv"
    write_histogram(SizeHistogram({1: 70, 2: 20, 3: 10}), target)
    report = tmp_path / "report.tsv"
    rc = run(
        [
            "fit", "--graph", graph_path, "--model", "alpha-k",
            "--target", target, "--alpha-lo", 0.3, "--alpha-hi", 0.3,
            "--step", 0.01, "--runs-per-point", 5000, "--seed", 6,
            "--report-out", report,
        ]
    )
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("best alpha=0.3 lambda=- ks=")
    lines = report.read_text().splitlines()
    assert lines[0] == "# alpha\tlambda\tks\truns\tdiverged"
    assert len(lines) == 3  # header, one row, summary


def test_fit_compound_lambda_zero_row_equals_alpha_k_row(tmp_path, capsys):
    graph_path = tmp_path / "g.cscg"
    graphs.generate_erdos_renyi(300, 0.005, seed=4).save(graph_path)
    target = tmp_path / "target.tsv"
    write_histogram(SizeHistogram({1: 70, 2: 20, 3: 10}), target)
    rep_a = tmp_path / "a.tsv"
    rep_c = tmp_path / "c.tsv"
    base = ["--graph", graph_path, "--target", target, "--alpha-lo", 0.25,
            "--alpha-hi", 0.35, "--step", 0.05, "--runs-per-point", 5000,
            "--seed", 8]
    assert run(["fit", "--model", "alpha-k", *base, "--report-out", rep_a]) == 0
    assert run(
        ["fit", "--model", "compound", *base, "--lambda-lo", 0, "--lambda-hi", 0,
         "--report-out", rep_c]
    ) == 0
    ks_a = [line.split("\t")[2] for line in rep_a.read_text().splitlines()[1:-1]]
    ks_c = [line.split("\t")[2] for line in rep_c.read_text().splitlines()[1:-1]]
    assert ks_a == ks_c


def test_bucketize(tmp_path, capsys):
    hist = tmp_path / "h.tsv"
    write_histogram(SizeHistogram({1: 1, 2: 1, 3: 1, 4: 1}), hist)
    out = tmp_path / "buckets.tsv"
    rc = run(["bucketize", "--in", hist, "--base", 2, "--out", out])
    assert rc == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("1\t2\t")
    masses = [float(line.split("\t")[2]) for line in lines]
    assert abs(sum(masses) - 1.0) < 1e-9


def test_bucketize_rejects_base_leq_one(tmp_path):
    hist = tmp_path / "h.tsv"
    write_histogram(SizeHistogram({1: 1}), hist)
    with pytest.raises(SystemExit) as exc:
        run(["bucketize", "--in", hist, "--base", 1.0, "--out", tmp_path / "b"])
    assert exc.value.code == 2


def test_workers_env_default(tmp_path, star_graph_file, monkeypatch):
    monkeypatch.setenv("CASCADE_LAB_WORKERS", "3")
    from cascade_lab.cli import build_parser

    args = build_parser().parse_args(
        ["simulate", "--graph", "g", "--model", "alpha", "--alpha", "0.1",
         "--runs", "1", "--hist-out", "h"]
    )
    assert args.workers == 3
