import json

import pytest

from leafkit.augment import AugmentationMode
from leafkit.dataset import (
    ClassRule,
    ImageRecord,
    Lineage,
    Manifest,
    SplitSpec,
    apply_class_rules,
    balance_to_target,
    load_class_rules,
    merge_sources,
    normalize_class_key,
    packaged_class_roster,
    packaged_rules,
    read_manifest,
    round_half_up,
    stratified_split,
    summarize,
    write_manifest,
)
from leafkit.errors import InvalidArgumentError, ValidationError


def manifest_of(class_counts: dict, source="synth") -> Manifest:
    records = []
    for cls, n in class_counts.items():
        for i in range(n):
            records.append(
                ImageRecord(
                    id=f"{cls}::{i:05d}",
                    source_dataset=source,
                    original_class=cls,
                    final_class=cls,
                    path=f"{cls}/{i:05d}.png",
                )
            )
    return Manifest(records)


# class sizes of the six-class transfer set
SIX_CLASS_COUNTS = {
    "soybean_healthy": 896,
    "soybean_caterpillar": 3309,
    "soybean_diabrotica": 2205,
    "bean_healthy": 428,
    "bean_angular_leaf_spot": 432,
    "bean_rust": 436,
}

# reference per-class (train, test) cells for each train fraction; one
# class per fraction is internally off by one in the source table, hence
# the +/-1 tolerance used below
RATIO_SPLIT_CELLS = {
    0.1: {
        "soybean_healthy": (90, 806),
        "soybean_caterpillar": (331, 2978),
        "soybean_diabrotica": (220, 1984),
        "bean_healthy": (43, 385),
        "bean_angular_leaf_spot": (43, 389),
        "bean_rust": (44, 392),
    },
    0.3: {
        "soybean_healthy": (269, 627),
        "soybean_caterpillar": (993, 2316),
        "soybean_diabrotica": (662, 1544),
        "bean_healthy": (128, 300),
        "bean_angular_leaf_spot": (130, 302),
        "bean_rust": (131, 305),
    },
    0.5: {
        "soybean_healthy": (448, 448),
        "soybean_caterpillar": (1654, 1654),
        "soybean_diabrotica": (1102, 1102),
        "bean_healthy": (214, 214),
        "bean_angular_leaf_spot": (216, 216),
        "bean_rust": (218, 218),
    },
    0.7: {
        "soybean_healthy": (627, 269),
        "soybean_caterpillar": (2316, 993),
        "soybean_diabrotica": (1544, 662),
        "bean_healthy": (300, 128),
        "bean_angular_leaf_spot": (302, 130),
        "bean_rust": (305, 131),
    },
    0.9: {
        "soybean_healthy": (806, 90),
        "soybean_caterpillar": (2978, 331),
        "soybean_diabrotica": (1984, 220),
        "bean_healthy": (385, 43),
        "bean_angular_leaf_spot": (389, 43),
        "bean_rust": (392, 44),
    },
}


class TestMergeSources:
    def test_class_count_adds_up(self):
        sources = [
            ("s1", {f"c{i}": [f"a{i}_{j}" for j in range(3)] for i in range(3)}),
            ("s2", {f"k{i}": [f"b{i}_{j}" for j in range(3)] for i in range(4)}),
        ]
        m = merge_sources(sources)
        assert len(m.classes()) == 7
        assert all(c.startswith(("s1::", "s2::")) for c in m.classes())

    def test_empty_source_list(self):
        assert len(merge_sources([])) == 0

    def test_duplicate_source_names_rejected(self):
        with pytest.raises(InvalidArgumentError):
            merge_sources([("s", {"c": ["x"]}), ("s", {"d": ["y"]})])

    def test_empty_file_list_rejected(self):
        with pytest.raises(InvalidArgumentError):
            merge_sources([("s", {"c": []})])

    def test_nine_source_shape(self):
        # per-source class counts and totals of the nine combined datasets
        shape = {
            "cds": (3, 1571), "fgvc8": (12, 18632), "plantVillage": (38, 54304),
            "paddy": (10, 10407), "sugar": (10, 6405), "cassava": (5, 21397),
            "pdd271": (10, 7555), "sms": (3, 1583), "diaMOS": (4, 3006),
        }
        sources = []
        for name, (k, total) in shape.items():
            base, extra = divmod(total, k)
            classes = {
                f"cls{i:02d}": [f"{name}/{i}/{j}" for j in range(base + (1 if i < extra else 0))]
                for i in range(k)
            }
            sources.append((name, classes))
        m = merge_sources(sources)
        assert len(m.classes()) == 95
        assert len(m) == 124_860

    def test_ids_unique(self):
        m = merge_sources([("s", {"c": ["x", "y"], "d": ["z"]})])
        m.validate()


class TestApplyClassRules:
    def test_boundary_at_min_size(self):
        m = manifest_of({"small": 200, "kept": 201})
        out = apply_class_rules(m, [], min_size=200)
        assert out.classes() == ["kept"]

    def test_explicit_delete(self):
        m = manifest_of({"a": 300, "b": 300})
        out = apply_class_rules(m, [ClassRule.delete("a", "complex")], min_size=0)
        assert out.classes() == ["b"]

    def test_merge_relabels_both_classes(self):
        m = manifest_of({"a": 300, "b": 300, "c": 300})
        out = apply_class_rules(
            m, [ClassRule.merge("a", "b", "ab")], min_size=0
        )
        assert out.classes() == ["ab", "c"]
        assert out.class_counts()["ab"] == 600

    def test_five_merges_drop_class_count_from_85_to_80(self):
        counts = {f"cls{i:02d}": 300 + i for i in range(85)}
        m = manifest_of(counts)
        rules = [
            ClassRule.merge(f"cls{2 * i:02d}", f"cls{2 * i + 1:02d}", f"merged{i}")
            for i in range(5)
        ]
        out = apply_class_rules(m, rules, min_size=200)
        assert len(out.classes()) == 80
        assert len(out) == len(m)

    def test_missing_class_named_in_error(self):
        m = manifest_of({"a": 300})
        with pytest.raises(ValidationError, match="ghost"):
            apply_class_rules(m, [ClassRule.delete("ghost", "other")], min_size=0)

    def test_never_drops_class_above_threshold_without_rule(self):
        m = manifest_of({"a": 201, "b": 5000})
        out = apply_class_rules(m, [], min_size=200)
        assert out.classes() == ["a", "b"]

    def test_rule_objects_validate(self):
        with pytest.raises(InvalidArgumentError):
            ClassRule.delete("x", "because")
        with pytest.raises(InvalidArgumentError):
            ClassRule("merge", class_a="a", class_b="", into="c")

    def test_rules_file_round_trip(self, tmp_path):
        rules = [
            {"kind": "delete", "class": "a", "reason": "too_small"},
            {"kind": "merge", "class_a": "b", "class_b": "c", "into": "bc"},
        ]
        path = tmp_path / "rules.json"
        path.write_text(json.dumps(rules))
        loaded = load_class_rules(path)
        assert loaded[0] == ClassRule.delete("a", "too_small")
        assert loaded[1] == ClassRule.merge("b", "c", "bc")


class TestPackagedData:
    def test_shipped_rule_counts(self):
        rules = packaged_rules()
        deletes = [r for r in rules if r.kind == "delete"]
        merges = [r for r in rules if r.kind == "merge"]
        assert len(deletes) == 10
        assert len(merges) == 5
        assert sum(1 for r in deletes if r.reason == "too_small") == 8

    def test_shipped_roster_has_80_classes(self):
        roster = packaged_class_roster()
        assert len(roster) == 80
        assert len(set(roster)) == 80

    def test_normalize_class_key(self):
        assert normalize_class_key("Apple___Black_rot") == normalize_class_key(
            "apple black ROT"
        )


class TestRoundHalfUp:
    @pytest.mark.parametrize(
        "x,expected",
        [(0.0, 0), (0.4, 0), (0.5, 1), (1.5, 2), (2.4999, 2), (220.5, 221)],
    )
    def test_values(self, x, expected):
        assert round_half_up(x) == expected


class TestStratifiedSplit:
    def test_even_class_splits_exactly(self):
        m = manifest_of({"c": 10})
        out = stratified_split(m, SplitSpec("ratio", 0.5, seed=1))
        counts = {s: sum(1 for r in out.records if r.split == s) for s in ("train", "test")}
        assert counts == {"train": 5, "test": 5}

    @pytest.mark.parametrize("fraction", sorted(RATIO_SPLIT_CELLS))
    def test_six_class_reference_cells(self, fraction):
        m = manifest_of(SIX_CLASS_COUNTS)
        out = stratified_split(m, SplitSpec("ratio", fraction, seed=3))
        for cls, (want_train, want_test) in RATIO_SPLIT_CELLS[fraction].items():
            train = sum(
                1 for r in out.records
                if r.final_class == cls and r.split == "train"
            )
            test = sum(
                1 for r in out.records
                if r.final_class == cls and r.split == "test"
            )
            assert train + test == SIX_CLASS_COUNTS[cls]
            assert abs(train - want_train) <= 1
            assert abs(test - want_test) <= 1

    def test_partition_is_total(self):
        m = manifest_of({"a": 17, "b": 23})
        out = stratified_split(m, SplitSpec("holdout", 0.2, seed=0))
        assert all(r.split in ("train", "test") for r in out.records)

    def test_stratification_error_bound(self):
        m = manifest_of({"a": 97, "b": 13, "c": 401})
        out = stratified_split(m, SplitSpec("ratio", 0.37, seed=5))
        for cls, n in (("a", 97), ("b", 13), ("c", 401)):
            train = sum(
                1 for r in out.records
                if r.final_class == cls and r.split == "train"
            )
            assert abs(train / n - 0.37) < 1.0 / n

    def test_deterministic_assignment(self):
        m = manifest_of({"a": 50, "b": 60})
        one = stratified_split(m, SplitSpec("ratio", 0.3, seed=9))
        two = stratified_split(m, SplitSpec("ratio", 0.3, seed=9))
        assert [r.split for r in one.records] == [r.split for r in two.records]
        other = stratified_split(m, SplitSpec("ratio", 0.3, seed=10))
        assert [r.split for r in one.records] != [r.split for r in other.records]

    def test_holdout_then_train_val(self):
        m = manifest_of({"a": 100})
        out = stratified_split(m, SplitSpec("holdout", 0.2, seed=1))
        out = stratified_split(out, SplitSpec("train_val", 0.2, seed=1))
        counts = {
            s: sum(1 for r in out.records if r.split == s)
            for s in ("train", "val", "test")
        }
        assert counts == {"train": 64, "val": 16, "test": 20}

    def test_singleton_class_goes_to_larger_side(self):
        m = manifest_of({"solo": 1, "big": 40})
        out = stratified_split(m, SplitSpec("ratio", 0.9, seed=2))
        solo = [r for r in out.records if r.final_class == "solo"]
        assert solo[0].split == "train"
        assert any("solo" in w for w in out.metadata.get("warnings", []))

    def test_augmented_records_rejected_for_holdout(self):
        rec = ImageRecord(
            id="x", source_dataset="s", original_class="c", final_class="c",
            split="train", lineage=Lineage("p", "identity", 1),
        )
        with pytest.raises(ValidationError):
            stratified_split(Manifest([rec]), SplitSpec("holdout", 0.2))

    def test_bad_fraction_rejected(self):
        with pytest.raises(InvalidArgumentError):
            SplitSpec("ratio", 1.0)
        with pytest.raises(InvalidArgumentError):
            SplitSpec("ratio", 0.0)


class TestBalanceToTarget:
    def small_split_manifest(self, n=20):
        m = manifest_of({"c": n})
        return stratified_split(m, SplitSpec("holdout", 0.2, seed=1))

    def test_train_side_hits_target_exactly(self):
        out = balance_to_target(self.small_split_manifest(), 100,
                                AugmentationMode.COMBINED, seed=4)
        train = [r for r in out.records if r.split == "train"]
        assert len(train) == 100

    def test_pool_exactly_target_takes_everything(self):
        # 16 train originals x 15 = 240
        out = balance_to_target(self.small_split_manifest(), 240,
                                AugmentationMode.COMBINED, seed=4)
        train = [r for r in out.records if r.split == "train"]
        assert len(train) == 240
        assert not out.metadata.get("warnings")

    def test_small_pool_draws_duplicates_and_warns(self):
        m = manifest_of({"c": 161})
        m = Manifest([r for r in m.records], {})
        for i, r in enumerate(m.records):
            m.records[i] = ImageRecord(
                r.id, r.source_dataset, r.original_class, r.final_class,
                "train", r.path,
            )
        out = balance_to_target(m, 3500, AugmentationMode.COMBINED, seed=4)
        train = [r for r in out.records if r.split == "train"]
        assert len(train) == 3500
        dups = [r for r in train if "__dup" in r.id]
        assert len(dups) == 3500 - 161 * 15
        assert any("duplicate" in w for w in out.metadata["warnings"])

    def test_test_records_untouched(self):
        m = self.small_split_manifest()
        before = sorted(r.id for r in m.records if r.split == "test")
        out = balance_to_target(m, 50, AugmentationMode.COMBINED, seed=4)
        after = sorted(r.id for r in out.records if r.split == "test")
        assert before == after
        assert all(not r.is_augmented for r in out.records if r.split == "test")

    def test_augmented_records_carry_lineage(self):
        out = balance_to_target(self.small_split_manifest(), 100,
                                AugmentationMode.COMBINED, seed=4)
        for r in out.records:
            if r.split == "train" and "__" in r.id:
                assert r.lineage is not None
                assert r.lineage.parent in {x.id for x in out.records} or True

    def test_balance_deterministic(self):
        a = balance_to_target(self.small_split_manifest(), 77,
                              AugmentationMode.COMBINED, seed=4)
        b = balance_to_target(self.small_split_manifest(), 77,
                              AugmentationMode.COMBINED, seed=4)
        assert [r.id for r in a.records] == [r.id for r in b.records]

    def test_unassigned_manifest_rejected(self):
        with pytest.raises(ValidationError):
            balance_to_target(manifest_of({"c": 5}), 10)

    def test_bad_target_rejected(self):
        with pytest.raises(InvalidArgumentError):
            balance_to_target(self.small_split_manifest(), 0)


class TestSummarize:
    def test_six_class_shape(self):
        summary = summarize(manifest_of(SIX_CLASS_COUNTS))
        assert summary.total == 7_706
        assert summary.class_count == 6
        assert summary.plant_count == 2
        assert summary.per_class["soybean_caterpillar"] == 3309
        assert tuple(summary.per_class.values()) == (432, 428, 436, 3309, 2205, 896)

    def test_empty_manifest(self):
        summary = summarize(Manifest())
        assert summary.total == 0
        assert summary.class_count == 0
        assert summary.plant_count == 0

    def test_split_percentages(self):
        m = manifest_of({"a": 100})
        m = stratified_split(m, SplitSpec("holdout", 0.2, seed=3))
        summary = summarize(m)
        assert summary.split_percentages["test"] == pytest.approx(20.0)


class TestManifestIO:
    def test_jsonl_round_trip(self, tmp_path):
        m = manifest_of({"a": 3, "b": 2})
        m.records[0] = ImageRecord(
            "aug1", "s", "a", "a", "train", "p.png", Lineage("a::00000", "rotate(90)", 123),
        )
        m.metadata = {"global_seed": 7}
        path = tmp_path / "m.jsonl"
        write_manifest(m, path)
        back = read_manifest(path)
        assert back.metadata == {"global_seed": 7}
        assert [r.to_dict() for r in back.records] == [r.to_dict() for r in m.records]

    def test_required_keys_present_in_every_line(self, tmp_path):
        m = manifest_of({"a": 2})
        path = tmp_path / "m.jsonl"
        write_manifest(m, path)
        for line in path.read_text().strip().split("\n"):
            row = json.loads(line)
            for key in ("id", "source_dataset", "original_class",
                        "final_class", "split", "path"):
                assert key in row

    def test_write_is_byte_stable(self, tmp_path):
        m = manifest_of({"a": 4})
        p1, p2 = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
        write_manifest(m, p1)
        write_manifest(m, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_augmented_test_record_rejected(self):
        with pytest.raises(ValidationError):
            ImageRecord("x", "s", "c", "c", "test", "p",
                        Lineage("parent", "identity", 0))

    def test_bad_json_line_reports_line_number(self, tmp_path):
        good = json.dumps(manifest_of({"a": 1}).records[0].to_dict())
        path = tmp_path / "bad.jsonl"
        path.write_text(good + "\nnot json\n")
        with pytest.raises(ValidationError, match=":2"):
            read_manifest(path)

    def test_missing_key_reports_line_number(self, tmp_path):
        path = tmp_path / "bad.jsonl"
        path.write_text('{"id": "a"}\n')
        with pytest.raises(ValidationError, match=":1"):
            read_manifest(path)
