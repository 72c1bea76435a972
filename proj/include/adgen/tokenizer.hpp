// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "adgen/common.hpp"

namespace adgen::tok {

// 4x4 grid of palette codes. The foreground mask is carried when the image
// is a product/ad image with a known foreground; decoded images have none.
struct SyntheticImage {
    static constexpr size_t kGrid = 4;
    static constexpr size_t kPatches = 16;

    std::array<std::uint8_t, kPatches> codes{};
    std::optional<std::array<bool, kPatches>> mask;  // true = product patch

    size_t foreground_count() const {
        if (!mask) return 0;
        size_t n = 0;
        for (bool b : *mask) n += b;
        return n;
    }
    bool operator==(const SyntheticImage& o) const = default;
};

// Bijective code <-> color map, the stand-in image decoder: 16 codes, one
// 4x4 patch per token.
class ImageCodebook {
  public:
    static constexpr size_t kCodes = 16;
    struct Rgb {
        std::uint8_t r, g, b;
        bool operator==(const Rgb&) const = default;
    };

    ImageCodebook();  // fixed 16-color palette

    const std::array<Rgb, kCodes>& palette() const { return palette_; }

    std::vector<int> encode(const SyntheticImage& img) const;
    SyntheticImage decode(const std::vector<int>& codes) const;

    // Portable pixmap (P6) rendering, pixels_per_patch^2 pixels per patch.
    std::string to_ppm(const SyntheticImage& img, size_t pixels_per_patch = 16) const;

  private:
    std::array<Rgb, kCodes> palette_;
};

// Word-level vocabulary over a closed lowercase lexicon, plus the reserved
// image-code range and special tokens, all mapped into one model id space:
//   [0, L)            lexicon words
//   [L, L+16)         image codes
//   [L+16, L+16+8)    specials, in the order below
class Vocab {
  public:
    enum Special : int {
        kTextOpen = 0,
        kTextClose,
        kImageOpen,
        kImageClose,
        kImagePh,
        kTextPh,
        kPad,
        kBos,
        kNumSpecials,
    };

    explicit Vocab(std::vector<std::string> lexicon);

    size_t lexicon_size() const { return words_.size(); }
    size_t model_vocab_size() const { return words_.size() + ImageCodebook::kCodes + kNumSpecials; }

    int word_id(const std::string& w) const;
    bool has_word(const std::string& w) const { return ids_.count(w) > 0; }
    const std::string& word(int id) const;
    bool is_word_id(int id) const { return id >= 0 && static_cast<size_t>(id) < words_.size(); }

    int image_token(int code) const;            // code in [0,16) -> model id
    bool is_image_token(int id) const;
    int image_code(int id) const;               // model id -> code

    int special(Special s) const { return static_cast<int>(words_.size() + ImageCodebook::kCodes + s); }
    bool is_special(int id) const {
        return id >= special(kTextOpen) && id <= special(kBos);
    }
    static const char* special_name(Special s);

    const std::vector<std::string>& lexicon() const { return words_; }

  private:
    std::vector<std::string> words_;
    std::unordered_map<std::string, int> ids_;
};

std::vector<int> encode_text(const std::vector<std::string>& words, const Vocab& vocab);
std::vector<std::string> decode_text(const std::vector<int>& ids, const Vocab& vocab);

struct SegmentLimits {
    size_t max_instr = 160;
    size_t max_text = 24;
};

// Full decoder sequence: instr, <text>, text, </text>, <image>, g[16], </image>.
struct TokenSequence {
    std::vector<int> ids;  // model id space
    size_t n_instr = 0;
    size_t m_text = 0;

    static constexpr size_t kImageLen = SyntheticImage::kPatches;

    size_t length() const { return ids.size(); }
    size_t text_open_pos() const { return n_instr; }
    size_t text_begin() const { return n_instr + 1; }
    size_t text_end() const { return n_instr + 1 + m_text; }  // position of </text>
    size_t image_open_pos() const { return n_instr + m_text + 2; }
    size_t image_begin() const { return n_instr + m_text + 3; }
    size_t image_end() const { return image_begin() + kImageLen; }  // position of </image>
};

TokenSequence assemble_sequence(const std::vector<int>& instruction,
                                const std::vector<int>& text,
                                const std::vector<int>& image_codes, const Vocab& vocab,
                                const SegmentLimits& limits = {});

// Inverse of assemble_sequence; returns (instruction ids, text ids, image codes).
struct SplitSequence {
    std::vector<int> instruction;
    std::vector<int> text;
    std::vector<int> image_codes;
};
SplitSequence split_sequence(const TokenSequence& seq, const Vocab& vocab);

// Templates are whitespace-separated tokens: "{}" marks a field slot,
// literal "<image_ph>" / "<text_ph>" become the placeholder specials, and
// every other token must be a lexicon word.
std::vector<int> render_instruction(const std::string& template_text,
                                    const std::vector<std::vector<std::string>>& fields,
                                    const Vocab& vocab);

// Convenience for the product-information instruction: fields are
// (description, selling points), in template slot order.
std::vector<int> render_instruction(const std::string& template_text,
                                    const std::vector<std::string>& description,
                                    const std::vector<std::string>& selling_points,
                                    const Vocab& vocab);

// Renders instruction ids back to template-style text (placeholders as
// literal markers) for round-trip checks and the sample CLI.
std::string instruction_to_string(const std::vector<int>& ids, const Vocab& vocab);

// One template per line; blank lines and '#' comment lines are skipped.
std::vector<std::string> load_templates(const std::string& path);
std::vector<std::string> parse_templates(const std::string& contents);

}  // namespace adgen::tok
