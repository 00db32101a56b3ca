import io

import numpy as np
import pytest

from relemb import corpus as cp
from conftest import make_vocab


class TestTaggedParsing:
    def test_two_token_sentence(self):
        reader = cp.parse_tagged_corpus(io.StringIO("conflicts\tNNS\nare\tVBP\n\n"))
        sents = list(reader)
        assert len(sents) == 1
        assert sents[0].words == ("conflicts", "are")
        assert sents[0].tags == ("NNS", "VBP")
        assert reader.skipped_lines == 0

    def test_blank_leading_lines_ignored(self):
        text = "\n\nconflicts\tNNS\nare\tVBP\n\n"
        sents = list(cp.parse_tagged_corpus(io.StringIO(text)))
        assert len(sents) == 1
        assert sents[0].words == ("conflicts", "are")

    def test_one_column_line_skipped_with_warning(self):
        reader = cp.parse_tagged_corpus(io.StringIO("oops\nfine\tNN\n\n"))
        sents = list(reader)
        assert reader.skipped_lines == 1
        assert sents[0].words == ("fine",)

    def test_empty_fields_skipped(self):
        reader = cp.parse_tagged_corpus(io.StringIO("\tNN\nword\t\nok\tNN\n\n"))
        sents = list(reader)
        assert reader.skipped_lines == 2
        assert sents[0].words == ("ok",)

    def test_empty_file_yields_nothing(self):
        assert list(cp.parse_tagged_corpus(io.StringIO(""))) == []

    def test_missing_trailing_blank_line(self):
        sents = list(cp.parse_tagged_corpus(io.StringIO("a\tNN\nb\tNN")))
        assert len(sents) == 1 and len(sents[0]) == 2


def _sentences(text):
    return list(cp.parse_tagged_corpus(io.StringIO(text)))


class TestVocabulary:
    def test_top_k_and_unk(self):
        text = ("a\tDT\n" * 5) + ("b\tDT\n" * 3) + ("c\tDT\n" * 1) + "\n"
        vocab = cp.build_vocabulary(_sentences(text), max_words=2, max_nouns=1)
        assert vocab.word_id("a") != cp.UNK_WORD
        assert vocab.word_id("b") != cp.UNK_WORD
        assert vocab.word_id("c") == cp.UNK_WORD
        # ranked section ordered by count, ids dense from 2
        assert vocab.word_surfaces[2] == "a"
        assert vocab.word_counts[2] == 5
        assert vocab.total_token_count == 9   # UNK slot absorbs c's count

    def test_noun_counting_restricted_to_noun_tags(self):
        text = "cause\tVB\ncause\tNN\ncause\tNN\nthing\tNN\n\n"
        vocab = cp.build_vocabulary(_sentences(text), 10, 10)
        wid = vocab.word_id("cause")
        nid = vocab.noun_id("cause")
        assert vocab.word_counts[wid] == 3       # all occurrences
        assert vocab.noun_counts[nid] == 2       # NN occurrences only
        assert vocab.total_noun_count == 3

    def test_tie_break_first_seen_wins(self):
        text = "a\tDT\nb\tDT\na\tDT\nb\tDT\n\n"
        vocab = cp.build_vocabulary(_sentences(text), max_words=1, max_nouns=1)
        assert vocab.word_id("a") == 2
        assert vocab.word_id("b") == cp.UNK_WORD

    def test_lowercase_flag(self):
        text = "Cause\tNN\ncause\tNN\n\n"
        v1 = cp.build_vocabulary(_sentences(text), 10, 10, lowercase=True)
        assert v1.word_counts[v1.word_id("CAUSE")] == 2
        v2 = cp.build_vocabulary(_sentences(text), 10, 10, lowercase=False)
        assert v2.word_id("Cause") != v2.word_id("cause")

    def test_lookup_total_and_unk_rate_deterministic(self):
        text = "a\tNN\nb\tDT\n\n"
        vocab = cp.build_vocabulary(_sentences(text), 1, 1)
        held_out = _sentences("a\tNN\nzzz\tDT\nqqq\tDT\n\n")
        for surface in ("a", "b", "zzz", "", "???"):
            assert isinstance(vocab.word_id(surface), int)
        r1 = vocab.unk_rate(held_out)
        r2 = vocab.unk_rate(held_out)
        assert r1 == r2 == pytest.approx(2 / 3)

    def test_rank_order_non_increasing(self):
        text = ("x\tDT\n" * 4 + "y\tDT\n" * 7 + "z\tDT\n" * 2) + "\n"
        vocab = cp.build_vocabulary(_sentences(text), 10, 10)
        ranked = vocab.word_counts[2:]
        assert ranked == sorted(ranked, reverse=True)

    def test_save_load_round_trip(self, tmp_path):
        text = "cause\tNN\neffect\tNN\nof\tIN\n\n"
        vocab = cp.build_vocabulary(_sentences(text), 2, 2)
        path = tmp_path / "vocab.txt"
        vocab.save(path)
        loaded = cp.Vocabulary.load(path)
        assert loaded.word_surfaces == vocab.word_surfaces
        assert loaded.word_counts == vocab.word_counts
        assert loaded.noun_surfaces == vocab.noun_surfaces
        assert loaded.noun_counts == vocab.noun_counts
        assert loaded.lowercase == vocab.lowercase
        assert loaded.word_id("cause") == vocab.word_id("cause")


def _tag_sentence(words, noun_positions):
    tags = tuple("NN" if i in noun_positions else "DT"
                 for i in range(len(words)))
    return cp.TaggedSentence(tuple(words), tags)


def _grid_vocab(n=40):
    words = {f"w{i}": n - i for i in range(n)}
    nouns = {f"w{i}": n - i for i in range(n)}
    return make_vocab(words, nouns)


class TestExtraction:
    def test_pair_beyond_max_between_omitted(self):
        words = [f"w{i}" for i in range(13)]
        sent = _tag_sentence(words, {0, 12})   # 11 words between
        assert cp.extract_noun_pair_contexts(sent, _grid_vocab(), 3) == []

    def test_adjacent_pair_omitted(self):
        sent = _tag_sentence(["w0", "w1"], {0, 1})
        assert cp.extract_noun_pair_contexts(sent, _grid_vocab(), 3) == []

    def test_three_nouns_three_ordered_pairs(self):
        words = [f"w{i}" for i in range(10)]
        sent = _tag_sentence(words, {1, 4, 8})
        ctxs = cp.extract_noun_pair_contexts(sent, _grid_vocab(), 2)
        assert len(ctxs) == 3
        pairs = {(c.n1, c.n2) for c in ctxs}
        vocab = _grid_vocab()
        assert pairs == {
            (vocab.noun_id("w1"), vocab.noun_id("w4")),
            (vocab.noun_id("w1"), vocab.noun_id("w8")),
            (vocab.noun_id("w4"), vocab.noun_id("w8")),
        }

    def test_windows_and_between_content(self):
        vocab = _grid_vocab()
        words = [f"w{i}" for i in range(8)]
        sent = _tag_sentence(words, {2, 5})
        (ctx,) = cp.extract_noun_pair_contexts(sent, vocab, m_out=3)
        wid = lambda s: vocab.word_id(s)
        assert ctx.w_in == (wid("w3"), wid("w4"))
        # two real tokens left of w2, NULL-padded at the far side
        assert ctx.w_bef == (cp.NULL_WORD, wid("w0"), wid("w1"))
        assert ctx.w_aft == (wid("w6"), wid("w7"), cp.NULL_WORD)

    def test_fewer_than_two_nouns(self):
        sent = _tag_sentence(["w0", "w1", "w2"], {1})
        assert cp.extract_noun_pair_contexts(sent, _grid_vocab(), 2) == []

    def test_pair_count_matches_brute_force(self):
        rng = np.random.default_rng(0)
        vocab = _grid_vocab()
        for _ in range(200):
            n = int(rng.integers(2, 31))
            noun_pos = {int(i) for i in rng.choice(n, rng.integers(0, n), replace=False)}
            sent = _tag_sentence([f"w{i % 40}" for i in range(n)], noun_pos)
            got = cp.extract_noun_pair_contexts(sent, vocab, 2, max_between=10)
            expected = sum(
                1
                for i in sorted(noun_pos)
                for j in sorted(noun_pos)
                if i < j and 1 <= j - i - 1 <= 10
            )
            assert len(got) == expected

    def test_invariants_on_random_sentences(self):
        rng = np.random.default_rng(1)
        vocab = _grid_vocab()
        for _ in range(100):
            n = int(rng.integers(2, 25))
            noun_pos = {int(i) for i in rng.choice(n, rng.integers(2, n + 1) - 1,
                                                   replace=False)}
            sent = _tag_sentence([f"w{i % 40}" for i in range(n)], noun_pos)
            for ctx in cp.extract_noun_pair_contexts(sent, vocab, m_out=4):
                assert 1 <= ctx.m_in <= 10
                assert len(ctx.w_bef) == 4 and len(ctx.w_aft) == 4


class TestRelationLabels:
    def test_codec_round_trips_all_19(self):
        assert len(cp.ALL_LABELS) == 19
        for lab in cp.ALL_LABELS:
            assert cp.parse_label(lab.surface()) == lab
        assert sorted({cp.label_index(l) for l in cp.ALL_LABELS}) == list(range(19))

    def test_other_has_no_direction(self):
        other = cp.parse_label("Other")
        assert other.direction is None
        assert other.surface() == "Other"

    def test_unknown_label_rejected(self):
        with pytest.raises(ValueError):
            cp.parse_label("Cause-Effect(e3,e1)")
        with pytest.raises(ValueError):
            cp.parse_label("Nonsense")


SEMEVAL_SAMPLE = '''1\t"Financial <e1>stress</e1> is one of the main causes of <e2>divorce</e2>"
Cause-Effect(e1,e2)

2\t"The <e1>burst</e1> has been caused by water hammer <e2>pressure</e2>"
Cause-Effect(e2,e1)
Comment: example with a trailing comment

3\t"A <e1>word embedding</e1> maps into a <e2>vector space</e2>"
Other
'''


def _semeval_vocab():
    words = {w: 2 for w in ("financial stress is one of the main causes divorce "
                            "burst has been caused by water hammer pressure a "
                            "word embedding maps into vector space").split()}
    nouns = {w: 2 for w in ("stress", "divorce", "burst", "pressure",
                            "embedding", "space")}
    return make_vocab(words, nouns)


class TestSemEvalParsing:
    def test_example_sentences(self):
        vocab = _semeval_vocab()
        instances = cp.parse_semeval(io.StringIO(SEMEVAL_SAMPLE), vocab, m_out=5)
        assert [inst.id for inst in instances] == [1, 2, 3]
        a = instances[0]
        assert a.label == cp.RelationLabel("Cause-Effect", "e1,e2")
        assert a.context.n1 == vocab.noun_id("stress")
        assert a.context.n2 == vocab.noun_id("divorce")
        expected_in = tuple(vocab.word_id(w) for w in
                            ("is", "one", "of", "the", "main", "causes", "of"))
        assert a.context.w_in == expected_in

        b = instances[1]
        assert b.label == cp.RelationLabel("Cause-Effect", "e2,e1")
        assert b.context.n1 == vocab.noun_id("burst")

    def test_multi_token_entity_head_is_last_token(self):
        vocab = _semeval_vocab()
        instances = cp.parse_semeval(io.StringIO(SEMEVAL_SAMPLE), vocab, m_out=5)
        c = instances[2]
        assert c.context.n1 == vocab.noun_id("embedding")
        assert c.context.n2 == vocab.noun_id("space")
        # 'vector', the non-head token of e2, lands in w_in
        assert vocab.word_id("vector") in c.context.w_in

    def test_outside_windows_padded(self):
        vocab = _semeval_vocab()
        instances = cp.parse_semeval(io.StringIO(SEMEVAL_SAMPLE), vocab, m_out=5)
        a = instances[0].context
        assert len(a.w_bef) == 5 and len(a.w_aft) == 5
        assert a.w_bef[-1] == vocab.word_id("financial")
        assert a.w_bef[0] == cp.NULL_WORD     # sentence boundary padding
        assert all(w == cp.NULL_WORD for w in a.w_aft)

    def test_adjacent_entities_allowed(self):
        text = '7\t"The <e1>tank</e1> <e2>crew</e2> left"\nOther\n'
        vocab = make_vocab({"the": 1, "tank": 1, "crew": 1, "left": 1},
                           {"tank": 1, "crew": 1})
        (inst,) = cp.parse_semeval(io.StringIO(text), vocab, m_out=2)
        assert inst.context.m_in == 0

    def test_missing_markup_error_carries_id(self):
        text = '9\t"no entities here"\nOther\n'
        with pytest.raises(cp.SemEvalFormatError, match="9"):
            cp.parse_semeval(io.StringIO(text), _semeval_vocab(), 2)

    def test_unknown_label_error_carries_id(self):
        text = '4\t"<e1>a</e1> x <e2>b</e2>"\nMade-Up(e1,e2)\n'
        with pytest.raises(cp.SemEvalFormatError, match="4"):
            cp.parse_semeval(io.StringIO(text), _semeval_vocab(), 2)


class TestContextFile:
    def test_round_trip(self, tmp_path):
        vocab = _grid_vocab()
        sent = _tag_sentence([f"w{i}" for i in range(9)], {1, 4, 7})
        ctxs = cp.extract_noun_pair_contexts(sent, vocab, m_out=3)
        path = tmp_path / "ctx.txt"
        n = cp.write_contexts(ctxs, 3, path)
        assert n == len(ctxs)
        reader = cp.ContextFile(path)
        assert reader.m_out == 3
        loaded = list(reader)
        assert [(c.n1, c.n2, c.w_in, c.w_bef, c.w_aft) for c in loaded] == \
            [(c.n1, c.n2, c.w_in, c.w_bef, c.w_aft) for c in ctxs]
        # re-iterable
        assert len(list(reader)) == len(ctxs)
