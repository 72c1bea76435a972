// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "adgen/config.hpp"
#include "adgen/nn.hpp"

namespace adgen {

constexpr std::uint32_t kCheckpointVersion = 1;

// Single self-contained binary: magic "UADG", u32 version, length-prefixed
// JSON header (config, digests, step, rng seed, tensor manifest), then one
// length-prefixed little-endian f64 blob per manifest entry, in manifest
// order.
struct CheckpointMeta {
    RunConfig config;
    std::string config_digest;
    std::string dataset_hash;
    long long step = 0;
    std::uint64_t rng_seed = 0;
};

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<const nn::ParamSet*>& tensor_sets);

struct LoadedCheckpoint {
    CheckpointMeta meta;
    std::vector<std::pair<std::string, Tensor>> tensors;  // manifest order

    // Copies loaded values into an already-built ParamSet; every set entry
    // must be present with a matching shape.
    void restore_into(nn::ParamSet& ps) const;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace adgen
