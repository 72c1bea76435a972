// SPDX-License-Identifier: Apache-2.0
#include "adgen/tokenizer.hpp"

#include <fstream>
#include <sstream>

namespace adgen::tok {

ImageCodebook::ImageCodebook() {
    // Classic 4-bit palette: 16 distinct RGB triples.
    palette_ = {Rgb{0, 0, 0},       Rgb{128, 0, 0},   Rgb{0, 128, 0},   Rgb{128, 128, 0},
                Rgb{0, 0, 128},     Rgb{128, 0, 128}, Rgb{0, 128, 128}, Rgb{192, 192, 192},
                Rgb{128, 128, 128}, Rgb{255, 0, 0},   Rgb{0, 255, 0},   Rgb{255, 255, 0},
                Rgb{0, 0, 255},     Rgb{255, 0, 255}, Rgb{0, 255, 255}, Rgb{255, 255, 255}};
}

std::vector<int> ImageCodebook::encode(const SyntheticImage& img) const {
    std::vector<int> out(SyntheticImage::kPatches);
    for (size_t i = 0; i < out.size(); ++i) {
        if (img.codes[i] >= kCodes) {
            throw CodebookError("encode: code " + std::to_string(img.codes[i]) +
                                " outside palette [0,16)");
        }
        out[i] = img.codes[i];
    }
    return out;
}

SyntheticImage ImageCodebook::decode(const std::vector<int>& codes) const {
    if (codes.size() != SyntheticImage::kPatches) {
        throw FormatError("decode: expected 16 codes, got " + std::to_string(codes.size()));
    }
    SyntheticImage img;
    for (size_t i = 0; i < codes.size(); ++i) {
        if (codes[i] < 0 || static_cast<size_t>(codes[i]) >= kCodes) {
            throw FormatError("decode: code " + std::to_string(codes[i]) +
                              " outside palette [0,16)");
        }
        img.codes[i] = static_cast<std::uint8_t>(codes[i]);
    }
    return img;
}

std::string ImageCodebook::to_ppm(const SyntheticImage& img, size_t pixels_per_patch) const {
    const size_t side = SyntheticImage::kGrid * pixels_per_patch;
    std::string out = "P6\n" + std::to_string(side) + " " + std::to_string(side) + "\n255\n";
    out.reserve(out.size() + side * side * 3);
    for (size_t y = 0; y < side; ++y) {
        for (size_t x = 0; x < side; ++x) {
            const size_t patch = (y / pixels_per_patch) * SyntheticImage::kGrid +
                                 (x / pixels_per_patch);
            const Rgb& c = palette_[img.codes[patch]];
            out.push_back(static_cast<char>(c.r));
            out.push_back(static_cast<char>(c.g));
            out.push_back(static_cast<char>(c.b));
        }
    }
    return out;
}

Vocab::Vocab(std::vector<std::string> lexicon) : words_(std::move(lexicon)) {
    if (words_.empty() || words_.size() > 256) {
        throw ContractError("Vocab: lexicon size must be in [1,256], got " +
                            std::to_string(words_.size()));
    }
    for (size_t i = 0; i < words_.size(); ++i) {
        const std::string& w = words_[i];
        if (w.empty()) throw ContractError("Vocab: empty word at index " + std::to_string(i));
        for (char c : w) {
            if (!((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9'))) {
                throw ContractError("Vocab: word '" + w + "' is not lowercase alphanumeric");
            }
        }
        if (!ids_.emplace(w, static_cast<int>(i)).second) {
            throw ContractError("Vocab: duplicate word '" + w + "'");
        }
    }
}

int Vocab::word_id(const std::string& w) const {
    auto it = ids_.find(w);
    if (it == ids_.end()) throw VocabError("unknown word '" + w + "'");
    return it->second;
}

const std::string& Vocab::word(int id) const {
    if (!is_word_id(id)) {
        throw IndexError("word id " + std::to_string(id) + " outside lexicon range [0," +
                         std::to_string(words_.size()) + ")");
    }
    return words_[static_cast<size_t>(id)];
}

int Vocab::image_token(int code) const {
    if (code < 0 || static_cast<size_t>(code) >= ImageCodebook::kCodes) {
        throw CodebookError("image code " + std::to_string(code) + " outside [0,16)");
    }
    return static_cast<int>(words_.size()) + code;
}

bool Vocab::is_image_token(int id) const {
    return id >= static_cast<int>(words_.size()) &&
           id < static_cast<int>(words_.size() + ImageCodebook::kCodes);
}

int Vocab::image_code(int id) const {
    if (!is_image_token(id)) {
        throw IndexError("id " + std::to_string(id) + " is not an image token");
    }
    return id - static_cast<int>(words_.size());
}

const char* Vocab::special_name(Special s) {
    switch (s) {
        case kTextOpen: return "<text>";
        case kTextClose: return "</text>";
        case kImageOpen: return "<image>";
        case kImageClose: return "</image>";
        case kImagePh: return "<image_ph>";
        case kTextPh: return "<text_ph>";
        case kPad: return "<pad>";
        case kBos: return "<bos>";
        default: return "?";
    }
}

std::vector<int> encode_text(const std::vector<std::string>& words, const Vocab& vocab) {
    std::vector<int> out;
    out.reserve(words.size());
    for (const std::string& w : words) out.push_back(vocab.word_id(w));
    return out;
}

std::vector<std::string> decode_text(const std::vector<int>& ids, const Vocab& vocab) {
    std::vector<std::string> out;
    out.reserve(ids.size());
    for (int id : ids) out.push_back(vocab.word(id));
    return out;
}

TokenSequence assemble_sequence(const std::vector<int>& instruction,
                                const std::vector<int>& text,
                                const std::vector<int>& image_codes, const Vocab& vocab,
                                const SegmentLimits& limits) {
    if (instruction.size() > limits.max_instr) {
        throw LengthError("instruction segment length " + std::to_string(instruction.size()) +
                          " exceeds maximum " + std::to_string(limits.max_instr));
    }
    if (text.size() > limits.max_text) {
        throw LengthError("text segment length " + std::to_string(text.size()) +
                          " exceeds maximum " + std::to_string(limits.max_text));
    }
    if (image_codes.size() != TokenSequence::kImageLen) {
        throw LengthError("image segment must have exactly 16 codes, got " +
                          std::to_string(image_codes.size()));
    }
    TokenSequence seq;
    seq.n_instr = instruction.size();
    seq.m_text = text.size();
    seq.ids.reserve(instruction.size() + text.size() + TokenSequence::kImageLen + 4);
    seq.ids.insert(seq.ids.end(), instruction.begin(), instruction.end());
    seq.ids.push_back(vocab.special(Vocab::kTextOpen));
    seq.ids.insert(seq.ids.end(), text.begin(), text.end());
    seq.ids.push_back(vocab.special(Vocab::kTextClose));
    seq.ids.push_back(vocab.special(Vocab::kImageOpen));
    for (int code : image_codes) seq.ids.push_back(vocab.image_token(code));
    seq.ids.push_back(vocab.special(Vocab::kImageClose));
    return seq;
}

SplitSequence split_sequence(const TokenSequence& seq, const Vocab& vocab) {
    SplitSequence out;
    out.instruction.assign(seq.ids.begin(), seq.ids.begin() + seq.n_instr);
    out.text.assign(seq.ids.begin() + seq.text_begin(), seq.ids.begin() + seq.text_end());
    for (size_t p = seq.image_begin(); p < seq.image_end(); ++p) {
        out.image_codes.push_back(vocab.image_code(seq.ids[p]));
    }
    return out;
}

namespace {
std::vector<std::string> whitespace_split(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream is(s);
    std::string tok;
    while (is >> tok) out.push_back(tok);
    return out;
}
}  // namespace

std::vector<int> render_instruction(const std::string& template_text,
                                    const std::vector<std::vector<std::string>>& fields,
                                    const Vocab& vocab) {
    const std::vector<std::string> toks = whitespace_split(template_text);
    size_t slots = 0;
    for (const std::string& t : toks) slots += (t == "{}");
    if (slots != fields.size()) {
        throw TemplateError("template has " + std::to_string(slots) + " slots but " +
                            std::to_string(fields.size()) + " fields were provided");
    }
    std::vector<int> out;
    size_t next_field = 0;
    for (const std::string& t : toks) {
        if (t == "{}") {
            for (const std::string& w : fields[next_field]) out.push_back(vocab.word_id(w));
            ++next_field;
        } else if (t == "<image_ph>") {
            out.push_back(vocab.special(Vocab::kImagePh));
        } else if (t == "<text_ph>") {
            out.push_back(vocab.special(Vocab::kTextPh));
        } else {
            out.push_back(vocab.word_id(t));
        }
    }
    return out;
}

std::vector<int> render_instruction(const std::string& template_text,
                                    const std::vector<std::string>& description,
                                    const std::vector<std::string>& selling_points,
                                    const Vocab& vocab) {
    return render_instruction(template_text, {description, selling_points}, vocab);
}

std::string instruction_to_string(const std::vector<int>& ids, const Vocab& vocab) {
    std::string out;
    for (int id : ids) {
        if (!out.empty()) out.push_back(' ');
        if (vocab.is_word_id(id)) {
            out += vocab.word(id);
        } else if (id == vocab.special(Vocab::kImagePh)) {
            out += "<image_ph>";
        } else if (id == vocab.special(Vocab::kTextPh)) {
            out += "<text_ph>";
        } else {
            throw IndexError("instruction contains non-instruction id " + std::to_string(id));
        }
    }
    return out;
}

std::vector<std::string> parse_templates(const std::string& contents) {
    std::vector<std::string> out;
    std::istringstream is(contents);
    std::string line;
    while (std::getline(is, line)) {
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos || line[first] == '#') continue;
        out.push_back(line);
    }
    return out;
}

std::vector<std::string> load_templates(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open template file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::vector<std::string> tmpls = parse_templates(ss.str());
    if (tmpls.empty()) throw FormatError("template file has no templates: " + path);
    return tmpls;
}

}  // namespace adgen::tok
