#pragma once

#include <fstream>

#include <json.hpp>

#include "fisp/tensor.hpp"

namespace fisp::ckpt {

using nlohmann::json;

// Archive layout: 8-byte magic, u32 format version, u64 header length,
// JSON header, then all tensor payloads as little-endian doubles in
// manifest order. The header holds everything non-tensor (config snapshot,
// iteration counter, RNG state) so a save/load/save round trip is
// byte-identical.
constexpr char kMagic[9] = "FISPCKP1";
constexpr std::uint32_t kVersion = 1;

struct Checkpoint {
    std::int64_t iteration = 0;
    std::string rng_state;
    json config = json::object();
    std::vector<std::pair<std::string, Tensor>> tensors;

    const Tensor* find(const std::string& name) const {
        for (const auto& [n, t] : tensors)
            if (n == name) return &t;
        return nullptr;
    }
};

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    json header;
    header["iteration"] = ck.iteration;
    header["rng_state"] = ck.rng_state;
    header["config"] = ck.config;
    json manifest = json::array();
    for (const auto& [name, t] : ck.tensors) {
        manifest.push_back({{"name", name}, {"shape", {t.n, t.c, t.h, t.w}}});
    }
    header["tensors"] = manifest;
    const std::string head = header.dump();

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open checkpoint for writing: " + path);
    out.write(kMagic, 8);
    const std::uint32_t ver = kVersion;
    out.write(reinterpret_cast<const char*>(&ver), sizeof ver);
    const std::uint64_t hlen = head.size();
    out.write(reinterpret_cast<const char*>(&hlen), sizeof hlen);
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& [_, t] : ck.tensors)
        out.write(reinterpret_cast<const char*>(t.v.data()),
                  static_cast<std::streamsize>(t.v.size() * sizeof(double)));
    if (!out) throw DataError("short write while saving checkpoint: " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open checkpoint: " + path);
    char magic[8];
    if (!in.read(magic, 8) || std::string(magic, 8) != std::string(kMagic, 8))
        throw DataError("not a checkpoint file: " + path);
    std::uint32_t ver = 0;
    if (!in.read(reinterpret_cast<char*>(&ver), sizeof ver) || ver != kVersion)
        throw DataError("unsupported checkpoint version in " + path);
    std::uint64_t hlen = 0;
    if (!in.read(reinterpret_cast<char*>(&hlen), sizeof hlen))
        throw DataError("truncated checkpoint header: " + path);
    std::string head(hlen, '\0');
    if (!in.read(head.data(), static_cast<std::streamsize>(hlen)))
        throw DataError("truncated checkpoint header: " + path);
    json header = json::parse(head, nullptr, false);
    if (header.is_discarded()) throw DataError("malformed checkpoint header: " + path);

    Checkpoint ck;
    ck.iteration = header.at("iteration").get<std::int64_t>();
    ck.rng_state = header.at("rng_state").get<std::string>();
    ck.config = header.at("config");
    for (const auto& entry : header.at("tensors")) {
        const auto shape = entry.at("shape");
        Tensor t(shape.at(0).get<std::int64_t>(), shape.at(1).get<std::int64_t>(),
                 shape.at(2).get<std::int64_t>(), shape.at(3).get<std::int64_t>());
        if (!in.read(reinterpret_cast<char*>(t.v.data()),
                     static_cast<std::streamsize>(t.v.size() * sizeof(double))))
            throw DataError("truncated checkpoint payload: " + path);
        ck.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(t));
    }
    return ck;
}

}  // namespace fisp::ckpt
