// SPDX-License-Identifier: Apache-2.0
#include "adgen/digest.hpp"

#include <fstream>
#include <sstream>

#include <openssl/evp.h>

namespace adgen {

namespace {
std::string sha1_hex(const std::string& bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx, digest, &len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw Error("sha1 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}
}  // namespace

std::string git_blob_hash(const std::string& bytes) {
    std::string framed = "blob " + std::to_string(bytes.size());
    framed.push_back('\0');
    framed += bytes;
    return sha1_hex(framed);
}

std::string git_blob_hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open file for hashing: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return git_blob_hash(ss.str());
}

std::string config_digest(const RunConfig& cfg) {
    return git_blob_hash(cfg.to_json().dump());
}

}  // namespace adgen
