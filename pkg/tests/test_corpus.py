import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from al_llm.corpus import (
    Corpus,
    CorpusError,
    Instance,
    balanced_sample,
    filter_short,
    length_histogram,
    load_corpus,
    random_subsample,
    word_count,
    write_corpus_jsonl,
)


def write_jsonl(path, rows):
    path.write_text("\n".join(json.dumps(r) for r in rows) + "\n", encoding="utf-8")


class TestLoadCorpus:
    def test_jsonl_label_mapping_by_position(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"text": "a", "label": "pos"}, {"text": "b", "label": "neg"}])
        corpus = load_corpus(path, "jsonl", "text", "label", ["neg", "pos"])
        assert [i.gold_label for i in corpus.instances] == [1, 0]
        assert [i.id for i in corpus.instances] == [0, 1]

    def test_csv_missing_text_cell_names_row(self, tmp_path):
        path = tmp_path / "c.csv"
        lines = ["text,label"] + [f"row {i} words,neg" for i in range(1, 7)]
        lines.append(",neg")  # data row 7: empty text
        lines.append("row 8 words,pos")
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        with pytest.raises(CorpusError, match="row 7"):
            load_corpus(path, "csv", "text", "label", ["neg", "pos"])

    def test_no_label_field_gives_unlabeled(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"text": "a"}, {"text": "b"}])
        corpus = load_corpus(path, "jsonl", "text", None, ["neg", "pos"])
        assert all(i.gold_label is None for i in corpus.instances)

    def test_unknown_label_names_value(self, tmp_path):
        path = tmp_path / "c.jsonl"
        write_jsonl(path, [{"text": "a", "label": "maybe"}])
        with pytest.raises(CorpusError, match="'maybe'"):
            load_corpus(path, "jsonl", "text", "label", ["neg", "pos"])

    def test_invalid_json_names_row(self, tmp_path):
        path = tmp_path / "c.jsonl"
        path.write_text('{"text": "ok", "label": "neg"}\nnot json\n', encoding="utf-8")
        with pytest.raises(CorpusError, match="row 2"):
            load_corpus(path, "jsonl", "text", "label", ["neg", "pos"])

    def test_missing_file(self, tmp_path):
        with pytest.raises(CorpusError, match="not found"):
            load_corpus(tmp_path / "nope.jsonl", "jsonl", "text", None, ["a", "b"])

    def test_csv_rfc4180_quoting(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text('text,label\n"a, quoted ""text""",pos\n', encoding="utf-8")
        corpus = load_corpus(path, "csv", "text", "label", ["neg", "pos"])
        assert corpus.instances[0].text == 'a, quoted "text"'


class TestFilterShort:
    def test_five_word_boundary(self):
        corpus = Corpus(
            instances=(Instance(0, "a b c d e", 0), Instance(1, "a b c d e f", 1)),
            label_names=("neg", "pos"),
        )
        kept = filter_short(corpus, 5)
        assert [i.text for i in kept.instances] == ["a b c d e f"]
        assert kept.instances[0].id == 0  # ids reassigned

    def test_min_words_one_keeps_everything_with_two_words(self, small_corpus):
        kept = filter_short(small_corpus, 1)
        assert len(kept) == len(small_corpus)

    def test_all_short_is_an_error(self):
        corpus = Corpus(
            instances=(Instance(0, "a b", 0), Instance(1, "c d", 1)),
            label_names=("neg", "pos"),
        )
        with pytest.raises(CorpusError):
            filter_short(corpus, 5)

    def test_idempotent(self, small_corpus):
        once = filter_short(small_corpus, 3)
        twice = filter_short(once, 3)
        assert [i.text for i in once.instances] == [i.text for i in twice.instances]


class TestBalancedSample:
    def test_sample_equals_population(self, small_corpus):
        out = balanced_sample(small_corpus, 3, rng_seed=0)
        assert len(out) == 6
        labels = [i.gold_label for i in out.instances]
        assert labels.count(0) == 3 and labels.count(1) == 3

    def test_exact_per_class_counts(self, small_corpus):
        out = balanced_sample(small_corpus, 2, rng_seed=1)
        labels = [i.gold_label for i in out.instances]
        assert labels.count(0) == 2 and labels.count(1) == 2

    def test_deficit_names_class_and_count(self, small_corpus):
        with pytest.raises(CorpusError, match=r"'neg' has 3 .*need 4"):
            balanced_sample(small_corpus, 4, rng_seed=0)

    def test_deterministic(self, small_corpus):
        a = balanced_sample(small_corpus, 2, rng_seed=7)
        b = balanced_sample(small_corpus, 2, rng_seed=7)
        assert [i.text for i in a.instances] == [i.text for i in b.instances]

    def test_output_ascending_original_order(self, small_corpus):
        out = balanced_sample(small_corpus, 2, rng_seed=3)
        texts = [i.text for i in out.instances]
        original_order = [i.text for i in small_corpus.instances if i.text in set(texts)]
        assert texts == original_order


class TestRandomSubsample:
    def test_full_size_keeps_membership(self, small_corpus):
        out = random_subsample(small_corpus, len(small_corpus), rng_seed=0)
        assert [i.text for i in out.instances] == [i.text for i in small_corpus.instances]

    def test_deterministic(self, small_corpus):
        a = random_subsample(small_corpus, 3, rng_seed=42)
        b = random_subsample(small_corpus, 3, rng_seed=42)
        assert [i.text for i in a.instances] == [i.text for i in b.instances]

    def test_oversample_is_error(self, small_corpus):
        with pytest.raises(CorpusError):
            random_subsample(small_corpus, len(small_corpus) + 1, rng_seed=0)


class TestLengthHistogram:
    def test_basic_bins(self):
        texts = ["a b c", "a b c d", "a b c d e f g h i j k"]
        corpus = Corpus(
            instances=tuple(Instance(i, t, None) for i, t in enumerate(texts)),
            label_names=("x", "y"),
        )
        assert length_histogram(corpus, 10) == [(0, 2), (10, 1)]

    def test_empty_bins_omitted(self):
        texts = ["a b", "a b c d e f g h i j k l m n o p q r s t u v"]
        corpus = Corpus(
            instances=tuple(Instance(i, t, None) for i, t in enumerate(texts)),
            label_names=("x", "y"),
        )
        starts = [s for s, _ in length_histogram(corpus, 10)]
        assert starts == [0, 20]

    @given(
        st.lists(
            st.text(alphabet="ab ", min_size=1).filter(lambda t: t.strip()),
            min_size=1,
            max_size=30,
        ),
        st.integers(min_value=1, max_value=7),
    )
    @settings(max_examples=50, deadline=None)
    def test_counts_sum_to_corpus_size(self, texts, bin_width):
        corpus = Corpus(
            instances=tuple(Instance(i, t, None) for i, t in enumerate(texts)),
            label_names=("x", "y"),
        )
        hist = length_histogram(corpus, bin_width)
        assert sum(c for _, c in hist) == len(corpus)


class TestRoundTrip:
    def test_write_then_load(self, tmp_path, small_corpus):
        path = tmp_path / "out.jsonl"
        write_corpus_jsonl(small_corpus, path)
        again = load_corpus(path, "jsonl", "text", "label", ["neg", "pos"])
        assert [i.text for i in again.instances] == [i.text for i in small_corpus.instances]
        assert [i.gold_label for i in again.instances] == [
            i.gold_label for i in small_corpus.instances
        ]
        meta = json.loads((tmp_path / "out.jsonl.meta.json").read_text())
        assert meta["count"] == len(small_corpus)

    def test_label_omitted_when_absent(self, tmp_path):
        corpus = Corpus(
            instances=(Instance(0, "labeled text", 1), Instance(1, "unlabeled text", None)),
            label_names=("neg", "pos"),
        )
        path = tmp_path / "out.jsonl"
        write_corpus_jsonl(corpus, path)
        rows = [json.loads(l) for l in path.read_text().splitlines()]
        assert "label" in rows[0] and "label" not in rows[1]


def test_word_count_unicode_whitespace():
    assert word_count("a\tb c  d\n") == 4  # NBSP counts as a boundary
