import csv
import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from leafkit.errors import InvalidArgumentError, ValidationError
from leafkit.metrics import (
    ConfusionMatrix,
    RunRecord,
    aggregate_mean,
    average_rank,
    compute_report,
    confusion_from_pairs,
    rank_by_value,
    ranks_per_dataset,
    read_run_csv,
    read_run_jsonl,
    write_ranking_csv,
    write_run_jsonl,
)


def report_oracle(labels, counts):
    """Exact-rational re-derivation of accuracy and macro scores from the
    textbook definitions, independent of the library."""
    k = len(labels)
    total = sum(sum(row) for row in counts)
    per = []
    for i in range(k):
        tp = counts[i][i]
        col = sum(counts[r][i] for r in range(k))
        row = sum(counts[i])
        p = Fraction(tp, col) if col else Fraction(0)
        r = Fraction(tp, row) if row else Fraction(0)
        f1 = 2 * p * r / (p + r) if p + r else Fraction(0)
        per.append((p, r, f1))
    acc = Fraction(sum(counts[i][i] for i in range(k)), total)
    macro = tuple(sum(x[j] for x in per) / k for j in range(3))
    return acc, macro, per


class TestConfusion:
    def test_diagonal_from_matching_pairs(self):
        cm = confusion_from_pairs([("a", "a"), ("b", "b")], ["a", "b"])
        assert cm.counts.tolist() == [[1, 0], [0, 1]]

    def test_empty_pairs_zero_matrix(self):
        cm = confusion_from_pairs([], ["a", "b"])
        assert cm.counts.sum() == 0

    def test_random_pairs_match_tally_oracle(self, rng):
        labels = ["x", "y", "z"]
        pairs = [
            (labels[rng.integers(3)], labels[rng.integers(3)]) for _ in range(100)
        ]
        cm = confusion_from_pairs(pairs, labels)
        for i, t in enumerate(labels):
            for j, p in enumerate(labels):
                assert cm.counts[i, j] == sum(
                    1 for a, b in pairs if a == t and b == p
                )

    def test_unknown_label_named(self):
        with pytest.raises(ValidationError, match="mystery"):
            confusion_from_pairs([("a", "mystery")], ["a"])

    def test_negative_counts_rejected(self):
        with pytest.raises(InvalidArgumentError):
            ConfusionMatrix(("a",), np.array([[-1]]))


class TestComputeReport:
    def test_perfect_diagonal(self):
        cm = ConfusionMatrix(("a", "b", "c"), np.diag([5, 3, 9]))
        rep = compute_report(cm)
        assert rep.accuracy == 1.0
        assert rep.macro_precision == rep.macro_recall == rep.macro_f1 == 1.0

    def test_worked_two_class_matrix(self):
        rep = compute_report(ConfusionMatrix(("n", "p"), np.array([[8, 2], [4, 6]])))
        assert rep.accuracy == pytest.approx(0.70, abs=1e-12)
        assert rep.per_class[0].precision == pytest.approx(8 / 12, abs=1e-12)
        assert rep.per_class[0].recall == pytest.approx(0.8, abs=1e-12)
        assert rep.per_class[0].f1 == pytest.approx(0.7272727272727273, abs=1e-9)
        assert rep.per_class[1].precision == pytest.approx(0.75, abs=1e-12)
        assert rep.per_class[1].recall == pytest.approx(0.6, abs=1e-12)
        assert rep.per_class[1].f1 == pytest.approx(0.6666666666666666, abs=1e-9)
        assert rep.macro_f1 == pytest.approx(0.696969696969697, abs=1e-9)

    def test_never_predicted_class_scores_zero(self):
        cm = ConfusionMatrix(("a", "b"), np.array([[3, 0], [2, 0]]))
        rep = compute_report(cm)
        b = rep.per_class[1]
        assert (b.precision, b.recall, b.f1) == (0.0, 0.0, 0.0)
        assert 0.0 <= rep.macro_f1 <= 1.0

    def test_empty_matrix_rejected(self):
        with pytest.raises(InvalidArgumentError):
            compute_report(ConfusionMatrix(("a",), np.array([[0]])))

    def test_matches_exact_oracle_on_random_matrices(self, rng):
        for _ in range(1000):
            k = int(rng.integers(2, 11))
            counts = rng.integers(0, 30, size=(k, k))
            if counts.sum() == 0:
                counts[0, 0] = 1
            labels = tuple(f"c{i}" for i in range(k))
            rep = compute_report(ConfusionMatrix(labels, counts))
            acc, macro, per = report_oracle(labels, counts.tolist())
            assert rep.accuracy == pytest.approx(float(acc), abs=1e-12)
            assert rep.macro_precision == pytest.approx(float(macro[0]), abs=1e-12)
            assert rep.macro_recall == pytest.approx(float(macro[1]), abs=1e-12)
            assert rep.macro_f1 == pytest.approx(float(macro[2]), abs=1e-12)

    def test_balanced_symmetric_micro_equals_macro_recall(self):
        # equal supports and symmetric confusion: accuracy == macro recall
        cm = ConfusionMatrix(("a", "b"), np.array([[7, 3], [3, 7]]))
        rep = compute_report(cm)
        assert rep.accuracy == pytest.approx(rep.macro_recall, abs=1e-12)

    def test_weighted_f1_differs_under_imbalance(self):
        cm = ConfusionMatrix(("a", "b"), np.array([[90, 0], [9, 1]]))
        rep = compute_report(cm)
        assert rep.weighted_f1 > rep.macro_f1


class TestAggregateMean:
    def runs(self):
        return [
            RunRecord("m1", "d1", "ft", 0.8, 0.7, 10),
            RunRecord("m1", "d2", "ft", 0.9, 0.8, 20),
            RunRecord("m2", "d1", "ft", 0.6, 0.5, 30),
        ]

    def test_single_run_groups_pass_through(self):
        out = dict(aggregate_mean(self.runs(), group_by="dataset"))
        assert out["d2"]["accuracy"] == pytest.approx(0.9)

    def test_two_run_mean(self):
        out = dict(aggregate_mean(self.runs(), group_by="model"))
        assert out["m1"]["accuracy"] == pytest.approx(0.85)
        assert out["m1"]["best_epoch"] == pytest.approx(15)

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            aggregate_mean([])

    def test_full_benchmark_fixture_reproduces_model_means(self, data_dir):
        # 414-row fixture vs the reference per-model means; the reference
        # table rounds to 4 decimals and one cell rounds the other way,
        # hence 5.1e-5 instead of the half-ulp 5e-5
        runs = read_run_csv(data_dir / "benchmark_runs.csv")
        means = {
            "tl": dict(aggregate_mean([r for r in runs if r.phase == "tl"])),
            "ft": dict(aggregate_mean([r for r in runs if r.phase == "ft"])),
        }
        with (data_dir / "model_means.csv").open() as fh:
            reference = list(csv.DictReader(fh))
        assert len(reference) == 23
        for row in reference:
            model = row["model"]
            assert means["tl"][model]["accuracy"] == pytest.approx(
                float(row["acc"]), abs=5.1e-5
            )
            assert means["tl"][model]["macro_f1"] == pytest.approx(
                float(row["f1"]), abs=5.1e-5
            )
            assert means["ft"][model]["accuracy"] == pytest.approx(
                float(row["acc_ft"]), abs=5.1e-5
            )
            assert means["ft"][model]["macro_f1"] == pytest.approx(
                float(row["f1_ft"]), abs=5.1e-5
            )
            assert means["tl"][model]["best_epoch"] == pytest.approx(
                float(row["epochs"]), abs=5.1e-5
            )
            assert means["ft"][model]["best_epoch"] == pytest.approx(
                float(row["epochs_ft"]), abs=5.1e-5
            )


class TestRankByValue:
    def test_single_entry(self):
        table = rank_by_value([("only", 0.5)])
        assert table.rows[0].rank == 1

    def test_fractional_ties(self):
        table = rank_by_value([("a", 0.9), ("b", 0.9), ("c", 0.1)])
        assert [r.rank for r in table.rows] == [1.5, 1.5, 3]

    def test_reference_accuracy_order(self, data_dir):
        with (data_dir / "model_means.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        table = rank_by_value([(r["model"], float(r["acc_ft"])) for r in rows])
        reference = json.loads((data_dir / "ranking_reference.json").read_text())
        assert table.order() == reference["by_avg_acc_ft_order"]
        assert table.rows[0].name == "ConvNeXtTiny"
        assert table.rows[0].score == pytest.approx(0.8862)
        assert table.rows[1].name == "EfficientNetV2B0"
        assert table.rows[-1].name == "InceptionV3"
        assert table.rows[-1].rank == 23

    @given(st.lists(st.integers(-1000, 1000), min_size=1, max_size=30))
    def test_argsort_invariance_under_monotone_transform(self, raw):
        # transform must stay injective in float arithmetic, so scores are
        # integers with >= 1 separation between distinct values
        entries = [(f"n{i}", float(score)) for i, score in enumerate(raw)]
        base = rank_by_value(entries)
        squashed = rank_by_value(
            [(n, float(np.tanh(s / 5000.0) * 3 + 7)) for n, s in entries]
        )
        assert base.order() == squashed.order()
        assert [r.rank for r in base.rows] == [r.rank for r in squashed.rows]

    def test_non_finite_score_rejected(self):
        with pytest.raises(InvalidArgumentError):
            rank_by_value([("a", float("nan"))])


class TestAverageRank:
    def test_reference_rank_column(self, data_dir):
        ranks = json.loads((data_dir / "per_dataset_ranks.json").read_text())
        table = average_rank(ranks)
        reference = json.loads((data_dir / "ranking_reference.json").read_text())
        assert table.order() == reference["by_avg_rank_order"]
        for row, want in zip(table.rows, reference["by_avg_rank_means"]):
            assert row.score == pytest.approx(want, abs=1e-4)
        assert table.rows[0].name == "EfficientNetV2B2"
        assert table.rows[0].score == pytest.approx(6.4444, abs=1e-4)
        assert table.rows[0].rank == 1

    def test_always_first_is_overall_first(self):
        ranks = {"star": [1, 1, 1], "mid": [2, 3, 2], "tail": [3, 2, 3]}
        table = average_rank(ranks)
        assert table.rows[0].name == "star"
        assert table.rows[0].score == 1.0
        assert table.rows[0].rank == 1

    def test_identical_vectors_tie_fractionally(self):
        table = average_rank({"a": [1, 2], "b": [1, 2], "c": [3, 3]})
        assert [r.rank for r in table.rows[:2]] == [1.5, 1.5]

    def test_single_dataset(self):
        table = average_rank({"a": [2], "b": [1]})
        assert table.order() == ["b", "a"]
        assert [r.score for r in table.rows] == [1.0, 2.0]

    def test_ragged_rejected(self):
        with pytest.raises(ValidationError):
            average_rank({"a": [1, 2], "b": [1]})

    def test_ranks_per_dataset_feeds_average_rank(self):
        runs = [
            RunRecord("m1", "d1", "ft", 0.9, 0.8, 5),
            RunRecord("m2", "d1", "ft", 0.8, 0.7, 5),
            RunRecord("m1", "d2", "ft", 0.7, 0.6, 5),
            RunRecord("m2", "d2", "ft", 0.9, 0.8, 5),
        ]
        ranks = ranks_per_dataset(runs)
        assert ranks == {"m1": [1.0, 2.0], "m2": [2.0, 1.0]}


class TestRunCsv:
    def test_round_trip_layout(self, tmp_path):
        path = tmp_path / "runs.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["model", "dataset", "acc", "f1", "acc_sd", "f1_sd", "acc_ft",
                 "f1_ft", "acc_sd_ft", "f1_sd_ft", "best_epoch", "best_epoch_ft"]
            )
            writer.writerow(["m", "d", 0.8, 0.7, 0, 0, 0.9, 0.85, 0, 0, 12, 3])
        records = read_run_csv(path)
        assert len(records) == 2
        tl = [r for r in records if r.phase == "tl"][0]
        assert (tl.accuracy, tl.macro_f1, tl.best_epoch) == (0.8, 0.7, 12)

    def test_bad_cell_reports_line(self, tmp_path):
        path = tmp_path / "runs.csv"
        path.write_text("model,dataset,acc,f1,acc_sd,f1_sd,acc_ft,f1_ft,"
                        "acc_sd_ft,f1_sd_ft,best_epoch,best_epoch_ft\n"
                        "m,d,oops,0,0,0,0,0,0,0,1,1\n")
        with pytest.raises(ValidationError, match=":2"):
            read_run_csv(path)

    def test_ranking_csv_output(self, tmp_path):
        table = rank_by_value([("a", 0.5), ("b", 0.25)])
        out = tmp_path / "rank.csv"
        write_ranking_csv(table, out)
        rows = list(csv.DictReader(out.open()))
        assert rows[0]["name"] == "a" and rows[0]["rank"] == "1"

    def test_jsonl_round_trip(self, tmp_path):
        records = [
            RunRecord("m", "d", "tl", 0.8, 0.7, 12),
            RunRecord("m", "d", "ft", 0.9, 0.85, 3),
        ]
        path = tmp_path / "runs.jsonl"
        write_run_jsonl(records, path)
        assert read_run_jsonl(path) == records

    def test_jsonl_bad_row_reports_line(self, tmp_path):
        path = tmp_path / "runs.jsonl"
        path.write_text('{"model": "m"}\n')
        with pytest.raises(ValidationError, match=":1"):
            read_run_jsonl(path)
