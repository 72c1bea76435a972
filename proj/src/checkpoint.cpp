// SPDX-License-Identifier: Apache-2.0
#include "adgen/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <unordered_map>

static_assert(std::endian::native == std::endian::little,
              "checkpoint format assumes a little-endian host");

namespace adgen {

using nlohmann::json;

namespace {

constexpr char kMagic[4] = {'U', 'A', 'D', 'G'};

void write_u32(std::ostream& out, std::uint32_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void write_u64(std::ostream& out, std::uint64_t v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
std::uint32_t read_u32(std::istream& in) {
    std::uint32_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}
std::uint64_t read_u64(std::istream& in) {
    std::uint64_t v = 0;
    in.read(reinterpret_cast<char*>(&v), sizeof(v));
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const CheckpointMeta& meta,
                     const std::vector<const nn::ParamSet*>& tensor_sets) {
    json header;
    header["config"] = meta.config.to_json();
    header["config_digest"] = meta.config_digest;
    header["dataset_hash"] = meta.dataset_hash;
    header["step"] = meta.step;
    header["rng_seed"] = meta.rng_seed;
    json manifest = json::array();
    for (const nn::ParamSet* ps : tensor_sets) {
        for (const auto& [name, t] : ps->items()) {
            manifest.push_back({{"name", name}, {"shape", t.shape()}});
        }
    }
    header["manifest"] = std::move(manifest);
    const std::string hbytes = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw FormatError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 4);
    write_u32(out, kCheckpointVersion);
    write_u64(out, hbytes.size());
    out.write(hbytes.data(), static_cast<std::streamsize>(hbytes.size()));
    for (const nn::ParamSet* ps : tensor_sets) {
        for (const auto& [name, t] : ps->items()) {
            const std::uint64_t bytes = t.numel() * sizeof(double);
            write_u64(out, bytes);
            out.write(reinterpret_cast<const char*>(t.data().data()),
                      static_cast<std::streamsize>(bytes));
        }
    }
    if (!out) throw FormatError("failed writing checkpoint: " + path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open checkpoint: " + path);
    char magic[4] = {};
    in.read(magic, 4);
    if (!in || std::memcmp(magic, kMagic, 4) != 0) {
        throw FormatError("bad checkpoint magic in " + path);
    }
    const std::uint32_t version = read_u32(in);
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    const std::uint64_t hlen = read_u64(in);
    std::string hbytes(hlen, '\0');
    in.read(hbytes.data(), static_cast<std::streamsize>(hlen));
    if (!in) throw FormatError("truncated checkpoint header in " + path);
    json header;
    try {
        header = json::parse(hbytes);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("bad checkpoint header: ") + e.what());
    }

    LoadedCheckpoint out;
    out.meta.config = RunConfig::from_json(header.at("config"));
    out.meta.config_digest = header.at("config_digest").get<std::string>();
    out.meta.dataset_hash = header.at("dataset_hash").get<std::string>();
    out.meta.step = header.at("step").get<long long>();
    out.meta.rng_seed = header.at("rng_seed").get<std::uint64_t>();

    for (const json& entry : header.at("manifest")) {
        const std::string name = entry.at("name").get<std::string>();
        const std::vector<size_t> shape = entry.at("shape").get<std::vector<size_t>>();
        size_t numel = 1;
        for (size_t d : shape) numel *= d;
        const std::uint64_t bytes = read_u64(in);
        if (bytes != numel * sizeof(double)) {
            throw FormatError("checkpoint blob size mismatch for tensor '" + name + "'");
        }
        std::vector<double> data(numel);
        in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(bytes));
        if (!in) throw FormatError("truncated checkpoint blob for tensor '" + name + "'");
        out.tensors.emplace_back(name, Tensor::from(std::move(data), shape));
    }
    return out;
}

void LoadedCheckpoint::restore_into(nn::ParamSet& ps) const {
    std::unordered_map<std::string, const Tensor*> by_name;
    for (const auto& [name, t] : tensors) by_name[name] = &t;
    for (const auto& [name, t] : ps.items()) {
        auto it = by_name.find(name);
        if (it == by_name.end()) {
            throw ProvenanceError("checkpoint is missing tensor '" + name + "'");
        }
        if (it->second->shape() != t.shape()) {
            throw ProvenanceError("checkpoint tensor '" + name + "' has shape " +
                                  it->second->shape_str() + ", expected " + t.shape_str());
        }
        Tensor dst = t;
        std::copy(it->second->data().begin(), it->second->data().end(), dst.data().begin());
    }
}

}  // namespace adgen
