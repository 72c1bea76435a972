// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace adgen {

// Error taxonomy. Each maps to a CLI exit code in tools/adgen.cpp:
// validation errors -> 2, provenance errors -> 3, numeric failures -> 4.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ShapeError : Error { using Error::Error; };        // dimension mismatch
struct ParamError : Error { using Error::Error; };        // out-of-range parameter
struct ContractError : Error { using Error::Error; };     // API precondition violated
struct IndexError : Error { using Error::Error; };        // out-of-range index / token id
struct VocabError : Error { using Error::Error; };        // unknown word
struct CodebookError : Error { using Error::Error; };     // invalid image code
struct LengthError : Error { using Error::Error; };       // overlong segment / sequence
struct TemplateError : Error { using Error::Error; };     // slot/placeholder mismatch
struct FormatError : Error { using Error::Error; };       // malformed file contents
struct ConfigError : Error { using Error::Error; };       // bad run configuration
struct ProvenanceError : Error { using Error::Error; };   // digest / hash mismatch
struct NumericError : Error { using Error::Error; };      // NaN/Inf in training

using std::size_t;

}  // namespace adgen
