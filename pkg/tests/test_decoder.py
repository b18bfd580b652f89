import string

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from a2w.alphabet import (
    JointAlphabet,
    build_positional_charset,
    build_sar_targets,
    build_vocabulary,
    spell_word,
)
from a2w.ctc import PROBABILITIES, PosteriorLattice, expand_target
from a2w.decoder import (
    TAG_FROM_CHARS,
    TAG_FROM_WORD,
    TAG_INCOMPLETE,
    SarHypothesis,
    SarWord,
    collapse_labels,
    frame_argmax,
    greedy_collapse,
    one_hot_lattice,
    parse_hypothesis,
    read_transcripts,
    render_hypothesis,
    sar_decode_chars,
    sar_decode_switched,
    sar_decode_word,
    write_sar_file,
    write_transcripts,
)

VOCAB_TEXT = ["THE CAT IS BLACK", "THE CAT SAT", "MURDER OF A COP"]


@pytest.fixture(scope="module")
def joint():
    return JointAlphabet(
        vocab=build_vocabulary(VOCAB_TEXT, min_count=1),
        charset=build_positional_charset(),
    )


def lattice_for(labels, joint):
    return one_hot_lattice(labels, joint.size)


def char_ids(joint, *symbols):
    return [joint.char_id(s) for s in symbols]


class TestGreedyCollapse:
    def test_blank_and_repeat_removal(self):
        assert collapse_labels([0, 1, 1, 0, 2]) == [1, 2]

    def test_blank_separates_genuine_repeat(self):
        assert collapse_labels([1, 0, 1]) == [1, 1]

    def test_ties_break_to_lowest_id(self):
        values = np.array([[0.5, 0.5], [0.2, 0.8]])
        path = frame_argmax(PosteriorLattice(values, PROBABILITIES))
        assert list(path.labels) == [0, 1]

    def test_collapse_matches_reference_and_never_has_blanks(self):
        # adjacent equal labels may survive when a blank separated them in
        # the argmax path; spurious repeats (same run) never do
        from itertools import groupby

        rng = np.random.default_rng(0)
        for _ in range(50):
            lat = PosteriorLattice(rng.dirichlet(np.ones(4), size=6), PROBABILITIES)
            out = greedy_collapse(lat)
            assert 0 not in out
            path = [int(v) for v in frame_argmax(lat).labels]
            reference = [k for k, _ in groupby(path) if k != 0]
            assert out == reference

    @given(st.lists(st.integers(1, 4), max_size=8))
    @settings(max_examples=80)
    def test_one_hot_expansion_inverts(self, y):
        lat = one_hot_lattice(y, 5)
        assert greedy_collapse(lat) == y
        reps = sum(1 for a, b in zip(y, y[1:]) if a == b)
        assert lat.num_frames == max(1, len(y) + reps)

    @given(st.lists(st.integers(1, 4), min_size=1, max_size=6))
    def test_expanded_target_one_hot_decodes_to_target(self, y):
        expanded = expand_target(y)
        lat = one_hot_lattice(expanded.labels, 5)
        assert greedy_collapse(lat) == y


class TestWordDecode:
    def test_word_track_only(self, joint):
        labels = char_ids(joint, "b-t", "h", "e-e") + [joint.word_id("THE")]
        assert sar_decode_word(lattice_for(labels, joint), joint) == ["THE"]

    def test_all_blank(self, joint):
        lat = PosteriorLattice(np.eye(1, joint.size), PROBABILITIES)
        assert sar_decode_word(lat, joint) == []

    def test_unk_is_literal(self, joint):
        labels = char_ids(joint, "b-z", "o", "e-o") + [joint.vocab.unk_id]
        assert sar_decode_word(lattice_for(labels, joint), joint) == ["UNK"]


class TestCharsDecode:
    def test_begin_marker_segmentation(self, joint):
        labels = char_ids(joint, "b-c", "a", "e-t", "b-i", "e-s")
        hyp = sar_decode_chars(lattice_for(labels, joint), joint)
        assert hyp.words == ["CAT", "IS"]
        assert all(e.tag == TAG_FROM_CHARS for e in hyp.entries)

    def test_doubled_symbol_expansion(self, joint):
        labels = char_ids(joint, "b-s", "u", "mm", "e", "r", "e-y")
        hyp = sar_decode_chars(lattice_for(labels, joint), joint)
        assert hyp.words == ["SUMMERY"]

    def test_empty(self, joint):
        lat = PosteriorLattice(np.eye(1, joint.size), PROBABILITIES)
        assert sar_decode_chars(lat, joint).words == []

    def test_leading_chars_incomplete(self, joint):
        labels = char_ids(joint, "a", "e-t", "b-i", "e-s")
        hyp = sar_decode_chars(lattice_for(labels, joint), joint)
        assert hyp.words == ["AT", "IS"]
        assert hyp.entries[0].tag == TAG_INCOMPLETE
        assert hyp.entries[1].tag == TAG_FROM_CHARS

    def test_unterminated_segment_incomplete(self, joint):
        labels = char_ids(joint, "b-c", "a")
        hyp = sar_decode_chars(lattice_for(labels, joint), joint)
        assert hyp.words == ["CA"]
        assert hyp.entries[0].tag == TAG_INCOMPLETE

    def test_separator_ignored(self, joint):
        labels = char_ids(joint, "b-c", "a", "e-t", "_", "b-i", "e-s")
        hyp = sar_decode_chars(lattice_for(labels, joint), joint)
        assert hyp.words == ["CAT", "IS"]


class TestSwitchedDecode:
    def test_oov_spelling_fallback(self, joint):
        labels = char_ids(joint, "b-m", "u", "r", "d", "e", "r", "i", "n", "e-g") + [joint.vocab.unk_id]
        hyp = sar_decode_switched(lattice_for(labels, joint), joint)
        assert hyp.words == ["MURDERING"]
        assert hyp.entries[0].tag == TAG_FROM_CHARS

    def test_known_word_from_word_track(self, joint):
        labels = char_ids(joint, "b-t", "h", "e-e") + [joint.word_id("THE")]
        hyp = sar_decode_switched(lattice_for(labels, joint), joint)
        assert hyp.words == ["THE"]
        assert hyp.entries[0].tag == TAG_FROM_WORD
        assert hyp.entries[0].spelling == ("b-t", "h", "e-e")

    def test_unk_with_empty_buffer(self, joint):
        labels = [joint.vocab.unk_id]
        hyp = sar_decode_switched(lattice_for(labels, joint), joint)
        assert hyp.words == ["UNK"]
        assert hyp.entries[0].tag == TAG_INCOMPLETE

    def test_buffer_clears_at_each_word(self, joint):
        labels = (
            char_ids(joint, "b-t", "h", "e-e")
            + [joint.word_id("THE")]
            + char_ids(joint, "b-z", "o", "e-o")
            + [joint.vocab.unk_id]
        )
        hyp = sar_decode_switched(lattice_for(labels, joint), joint)
        assert hyp.words == ["THE", "ZOO"]
        assert [e.tag for e in hyp.entries] == [TAG_FROM_WORD, TAG_FROM_CHARS]

    def test_trailing_chars_dropped(self, joint):
        labels = [joint.word_id("THE")] + char_ids(joint, "b-c", "a")
        hyp = sar_decode_switched(lattice_for(labels, joint), joint)
        assert hyp.words == ["THE"]

    def test_matches_word_decode_without_unk(self, joint):
        rng = np.random.default_rng(1)
        words = list(joint.vocab.words)
        for _ in range(20):
            transcript = [words[i] for i in rng.integers(0, len(words), size=4)]
            labels = list(build_sar_targets(transcript, joint).labels)
            lat = lattice_for(labels, joint)
            assert sar_decode_switched(lat, joint).words == sar_decode_word(lat, joint)


class TestPerfectLatticeRoundTrip:
    def test_all_three_decodes(self, joint):
        transcript = ["THE", "CAT", "IS", "BLACK"]
        lat = lattice_for(list(build_sar_targets(transcript, joint).labels), joint)
        assert sar_decode_word(lat, joint) == transcript
        chars = sar_decode_chars(lat, joint)
        assert chars.words == transcript
        assert [e.spelling for e in chars.entries] == [
            tuple(joint.charset.symbol_of(i).text for i in spell_word(w, joint.charset)) for w in transcript
        ]
        assert sar_decode_switched(lat, joint).words == transcript


class TestRendering:
    def test_annotated_group_rendering(self, joint):
        hyp = SarHypothesis(
            entries=(SarWord(word="THE", spelling=("b-t", "h", "e-e"), tag=TAG_FROM_WORD),)
        )
        assert render_hypothesis(hyp) == "b-t h e-e THE"

    def test_oov_renders_unk_tag(self, joint):
        hyp = SarHypothesis(
            entries=(
                SarWord(word="THE", spelling=("b-t", "h", "e-e"), tag=TAG_FROM_WORD),
                SarWord(word="MURDERING", spelling=("b-m", "u", "r", "d", "e", "r", "i", "n", "e-g"), tag=TAG_FROM_CHARS),
            )
        )
        assert render_hypothesis(hyp) == "b-t h e-e THE _ b-m u r d e r i n e-g UNK"

    def test_empty(self):
        assert render_hypothesis(SarHypothesis(entries=())) == ""

    def test_parse_inverts_render(self, joint):
        charset = joint.charset
        hyp = SarHypothesis(
            entries=(
                SarWord(word="THE", spelling=("b-t", "h", "e-e"), tag=TAG_FROM_WORD),
                SarWord(word="ZOO", spelling=("b-z", "o", "e-o"), tag=TAG_FROM_CHARS),
                SarWord(word="UNK", spelling=(), tag=TAG_INCOMPLETE),
                SarWord(word="CA", spelling=("b-c", "a"), tag=TAG_INCOMPLETE),
                SarWord(word="A", spelling=(), tag=TAG_FROM_WORD),
            )
        )
        assert parse_hypothesis(render_hypothesis(hyp), charset) == hyp

    @given(st.data())
    @settings(max_examples=60)
    def test_fuzzed_round_trip(self, data):
        # fuzz over hypotheses a decode can actually produce: from-word is
        # never the UNK tag, spelled words match their spelling
        charset = build_positional_charset()
        words = st.text(alphabet=string.ascii_lowercase, min_size=1, max_size=5).filter(lambda w: w != "unk")
        entries = []
        for _ in range(data.draw(st.integers(0, 4))):
            word = data.draw(words)
            symbols = tuple(charset.symbol_of(i).text for i in spell_word(word, charset))
            tag = data.draw(st.sampled_from([TAG_FROM_WORD, TAG_FROM_CHARS, TAG_INCOMPLETE]))
            entries.append(SarWord(word=word.upper(), spelling=symbols, tag=tag))
        hyp = SarHypothesis(entries=tuple(entries))
        assert parse_hypothesis(render_hypothesis(hyp), charset) == hyp


class TestTranscriptFiles:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "hyp.tsv"
        write_transcripts(path, [("u1", ["THE", "CAT"]), ("u2", [])])
        loaded = read_transcripts(path)
        assert loaded == {"u1": ["THE", "CAT"], "u2": []}

    def test_sar_sidecar(self, tmp_path, joint):
        hyp = SarHypothesis(entries=(SarWord(word="THE", spelling=("b-t", "h", "e-e"), tag=TAG_FROM_WORD),))
        path = tmp_path / "hyp.sar"
        write_sar_file(path, [("u1", hyp)])
        text = path.read_text()
        assert text == "u1\tb-t h e-e THE\n"
