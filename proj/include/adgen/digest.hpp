// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "adgen/config.hpp"

namespace adgen {

// Git-style blob hash: SHA-1 over "blob <len>\0" + bytes, hex-encoded.
std::string git_blob_hash(const std::string& bytes);
std::string git_blob_hash_file(const std::string& path);

// Digest of the canonical (key-sorted) JSON form of a run configuration.
std::string config_digest(const RunConfig& cfg);

}  // namespace adgen
