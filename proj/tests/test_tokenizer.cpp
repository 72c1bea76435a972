// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "adgen/rng.hpp"
#include "adgen/tokenizer.hpp"

using namespace adgen;
using namespace adgen::tok;

namespace {

Vocab test_vocab() {
    return Vocab({"soft", "red", "chair", "table", "lamp", "cozy", "premium", "wood",
                  "style", "following", "the", "text", "and", "image", "description",
                  "selling", "points", "generate", "an", "advertising"});
}

}  // namespace

TEST_CASE("encode_text basics") {
    Vocab v = test_vocab();
    CHECK(encode_text({}, v).empty());
    CHECK(encode_text({"soft"}, v) == std::vector<int>{v.word_id("soft")});
    CHECK_THROWS_WITH_AS(encode_text({"plutonium"}, v), doctest::Contains("plutonium"),
                         VocabError);
}

TEST_CASE("text round-trips over random word lists") {
    Vocab v = test_vocab();
    Rng rng(5);
    for (int rep = 0; rep < 1000; ++rep) {
        std::vector<std::string> words;
        const size_t n = rng.below(12);
        for (size_t i = 0; i < n; ++i) {
            words.push_back(v.lexicon()[rng.below(v.lexicon_size())]);
        }
        CHECK(decode_text(encode_text(words, v), v) == words);
    }
}

TEST_CASE("vocab id layout has no collisions") {
    Vocab v = test_vocab();
    const size_t l = v.lexicon_size();
    // Image range directly after lexicon, specials directly after that.
    CHECK(v.image_token(0) == (int)l);
    CHECK(v.image_token(15) == (int)l + 15);
    CHECK(v.special(Vocab::kTextOpen) == (int)l + 16);
    CHECK(v.special(Vocab::kBos) == (int)l + 23);
    CHECK(v.model_vocab_size() == l + 24);
    for (int id = 0; id < (int)v.model_vocab_size(); ++id) {
        const int kinds = (v.is_word_id(id) ? 1 : 0) + (v.is_image_token(id) ? 1 : 0) +
                          (v.is_special(id) ? 1 : 0);
        CHECK(kinds == 1);
    }
}

TEST_CASE("vocab validation") {
    CHECK_THROWS_AS(Vocab({}), ContractError);
    CHECK_THROWS_AS(Vocab({"ok", "ok"}), ContractError);
    CHECK_THROWS_AS(Vocab({"Upper"}), ContractError);
    CHECK_THROWS_AS(Vocab(std::vector<std::string>(257, "w")), ContractError);
}

TEST_CASE("encode_image basics") {
    ImageCodebook cb;
    SyntheticImage zero;
    CHECK(cb.encode(zero) == std::vector<int>(16, 0));

    SyntheticImage checker;
    for (size_t i = 0; i < 16; ++i) checker.codes[i] = static_cast<std::uint8_t>(i % 2);
    const std::vector<int> expect = {0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1, 0, 1};
    CHECK(cb.encode(checker) == expect);

    SyntheticImage bad;
    bad.codes[3] = 16;
    CHECK_THROWS_AS(cb.encode(bad), CodebookError);
}

TEST_CASE("image round-trips for all single-color grids") {
    ImageCodebook cb;
    for (int c = 0; c < 16; ++c) {
        SyntheticImage img;
        img.codes.fill(static_cast<std::uint8_t>(c));
        CHECK(cb.decode(cb.encode(img)) == img);
    }
}

TEST_CASE("decode_image format errors") {
    ImageCodebook cb;
    CHECK_THROWS_AS(cb.decode(std::vector<int>(15, 0)), FormatError);
    CHECK_THROWS_AS(cb.decode(std::vector<int>(17, 0)), FormatError);
    std::vector<int> bad(16, 0);
    bad[7] = 16;
    CHECK_THROWS_AS(cb.decode(bad), FormatError);
    bad[7] = -1;
    CHECK_THROWS_AS(cb.decode(bad), FormatError);
}

TEST_CASE("image round-trips on random grids") {
    ImageCodebook cb;
    Rng rng(9);
    for (int rep = 0; rep < 200; ++rep) {
        SyntheticImage img;
        for (auto& c : img.codes) c = static_cast<std::uint8_t>(rng.below(16));
        CHECK(cb.decode(cb.encode(img)) == img);
    }
}

TEST_CASE("assemble_sequence layout") {
    Vocab v = test_vocab();
    std::vector<int> instr = encode_text({"red", "chair"}, v);
    std::vector<int> image(16, 3);

    SUBCASE("empty text gives adjacent <text></text>") {
        TokenSequence seq = assemble_sequence(instr, {}, image, v);
        CHECK(seq.ids[seq.text_open_pos()] == v.special(Vocab::kTextOpen));
        CHECK(seq.ids[seq.text_open_pos() + 1] == v.special(Vocab::kTextClose));
        CHECK(seq.length() == 2 + 0 + 16 + 4);
    }

    SUBCASE("total length arithmetic") {
        std::vector<int> text = encode_text({"soft", "cozy", "lamp"}, v);
        TokenSequence seq = assemble_sequence(instr, text, image, v);
        CHECK(seq.length() == instr.size() + text.size() + 16 + 4);
        CHECK(seq.ids[seq.image_open_pos()] == v.special(Vocab::kImageOpen));
        CHECK(seq.ids[seq.image_end()] == v.special(Vocab::kImageClose));
    }

    SUBCASE("overlong segments rejected") {
        SegmentLimits limits;
        std::vector<int> long_text(limits.max_text + 1, v.word_id("soft"));
        CHECK_THROWS_AS(assemble_sequence(instr, long_text, image, v, limits), LengthError);
        CHECK_THROWS_AS(assemble_sequence(instr, {}, std::vector<int>(15, 0), v), LengthError);
    }
}

TEST_CASE("assemble/split round-trips for random segment triples") {
    Vocab v = test_vocab();
    Rng rng(31);
    for (int rep = 0; rep < 300; ++rep) {
        std::vector<int> instr, text, image;
        const size_t ni = rng.below(10), mt = rng.below(8);
        for (size_t i = 0; i < ni; ++i) instr.push_back((int)rng.below(v.lexicon_size()));
        for (size_t i = 0; i < mt; ++i) text.push_back((int)rng.below(v.lexicon_size()));
        for (size_t i = 0; i < 16; ++i) image.push_back((int)rng.below(16));
        TokenSequence seq = assemble_sequence(instr, text, image, v);
        SplitSequence back = split_sequence(seq, v);
        CHECK(back.instruction == instr);
        CHECK(back.text == text);
        CHECK(back.image_codes == image);
    }
}

TEST_CASE("render_instruction") {
    Vocab v = test_vocab();

    SUBCASE("zero slots renders template verbatim") {
        std::vector<int> ids = render_instruction("red chair and soft lamp", {}, v);
        CHECK(decode_text(ids, v) ==
              std::vector<std::string>{"red", "chair", "and", "soft", "lamp"});
    }

    SUBCASE("personalized template ends with the style clause and placeholders") {
        const std::string tmpl =
            "description {} selling points {} generate an advertising text and image "
            "following the text style <text_ph> and the image style <image_ph>";
        std::vector<int> ids =
            render_instruction(tmpl, {"red", "chair"}, {"soft", "cozy", "premium"}, v);
        // Both placeholders present, exactly once each, and <image_ph> is last.
        int n_img = 0, n_txt = 0;
        for (int id : ids) {
            n_img += (id == v.special(Vocab::kImagePh));
            n_txt += (id == v.special(Vocab::kTextPh));
        }
        CHECK(n_img == 1);
        CHECK(n_txt == 1);
        CHECK(ids.back() == v.special(Vocab::kImagePh));
        // The clause wording survives the round trip.
        const std::string s = instruction_to_string(ids, v);
        CHECK(s ==
              "description red chair selling points soft cozy premium generate an advertising "
              "text and image following the text style <text_ph> and the image style "
              "<image_ph>");
    }

    SUBCASE("filled instruction decodes back to the filled string") {
        const std::string tmpl = "generate {} style";
        std::vector<int> ids = render_instruction(tmpl, {{"cozy", "wood"}}, v);
        CHECK(instruction_to_string(ids, v) == "generate cozy wood style");
    }

    SUBCASE("slot/field count mismatch") {
        CHECK_THROWS_AS(render_instruction("no slots here", {{"soft"}}, v), TemplateError);
        CHECK_THROWS_AS(render_instruction("one {} two {}", {{"soft"}}, v), TemplateError);
    }
}

TEST_CASE("template parsing skips blanks and comments") {
    auto tmpls = parse_templates("# comment\n\nfirst template line\n  \nsecond {} line\n");
    REQUIRE(tmpls.size() == 2);
    CHECK(tmpls[0] == "first template line");
    CHECK(tmpls[1] == "second {} line");
}

TEST_CASE("ppm rendering has the right header and size") {
    ImageCodebook cb;
    SyntheticImage img;
    img.codes.fill(9);
    std::string ppm = cb.to_ppm(img, 4);
    CHECK(ppm.substr(0, 11) == "P6\n16 16\n25");
    CHECK(ppm.size() == std::string("P6\n16 16\n255\n").size() + 16 * 16 * 3);
}
