#pragma once

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <vector>

#include "fisp/png_io.hpp"
#include "fisp/synth.hpp"

namespace fisp {

namespace fs = std::filesystem;

enum class Split { kTrain, kVal, kTest };

inline const char* split_name(Split s) {
    switch (s) {
        case Split::kTrain: return "train";
        case Split::kVal: return "val";
        case Split::kTest: return "test";
    }
    return "?";
}

// Minimal key-value reader for the dataset meta file: `key = value` lines,
// '#' comments, quoted strings allowed.
inline std::map<std::string, std::string> read_meta_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read meta file: " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r\"");
            const auto e = s.find_last_not_of(" \t\r\"");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

inline void write_meta_file(const fs::path& path, int bit_depth, Cfa cfa,
                            const std::map<std::string, std::string>& extras = {}) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write meta file: " + path.string());
    out << "bit_depth = " << bit_depth << "\n";
    out << "cfa = \"" << cfa_name(cfa) << "\"\n";
    for (const auto& [k, v] : extras)
        if (k != "bit_depth" && k != "cfa") out << k << " = \"" << v << "\"\n";
}

struct PairEntry {
    fs::path raw_path;
    fs::path rgb_path;
    std::string name;
};

// Immutable index of aligned (raw, rgb) pairs for one split.
struct DatasetIndex {
    std::vector<PairEntry> pairs;
    int patch_size = 448;
    Split split = Split::kTrain;
    int bit_depth = 10;
    Cfa cfa = Cfa::kRggb;

    std::size_t size() const { return pairs.size(); }
    bool empty() const { return pairs.empty(); }
};

struct DatasetConfig {
    Split split = Split::kTrain;
    int patch_size = 448;
};

// Layout: <root>/{train,val,test}/raw/<name>.png (16-bit gray) paired with
// <root>/{train,val,test}/rgb/<name>.png (8-bit RGB), plus <root>/meta.toml
// carrying bit_depth and cfa. Pairing is by basename; any orphan is an
// error naming the file.
inline DatasetIndex load_dataset(const fs::path& root, const DatasetConfig& config) {
    DatasetIndex index;
    index.split = config.split;
    index.patch_size = config.patch_size;

    const auto meta = read_meta_file(root / "meta.toml");
    if (auto it = meta.find("bit_depth"); it != meta.end()) index.bit_depth = std::stoi(it->second);
    if (auto it = meta.find("cfa"); it != meta.end()) index.cfa = cfa_from_name(it->second);

    const fs::path raw_dir = root / split_name(config.split) / "raw";
    const fs::path rgb_dir = root / split_name(config.split) / "rgb";
    if (!fs::exists(raw_dir) && !fs::exists(rgb_dir)) return index;  // empty split

    std::map<std::string, fs::path> raws, rgbs;
    auto collect = [](const fs::path& dir, std::map<std::string, fs::path>& dst) {
        if (!fs::exists(dir)) return;
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".png") dst[e.path().stem().string()] = e.path();
    };
    collect(raw_dir, raws);
    collect(rgb_dir, rgbs);

    for (const auto& [name, path] : raws)
        if (!rgbs.count(name))
            throw DataError("unpaired RAW file (no RGB counterpart): " + path.string());
    for (const auto& [name, path] : rgbs)
        if (!raws.count(name))
            throw DataError("unpaired RGB file (no RAW counterpart): " + path.string());

    for (const auto& [name, raw_path] : raws) {
        const auto [rw, rh] = pngio::png_dims(raw_path);
        const auto [gw, gh] = pngio::png_dims(rgbs[name]);
        if (rw != gw || rh != gh)
            throw DimensionError("pair '" + name + "': RAW " + std::to_string(rw) + "x" +
                                 std::to_string(rh) + " vs RGB " + std::to_string(gw) + "x" +
                                 std::to_string(gh));
        index.pairs.push_back({raw_path, rgbs[name], name});
    }
    std::sort(index.pairs.begin(), index.pairs.end(),
              [](const PairEntry& a, const PairEntry& b) { return a.name < b.name; });
    return index;
}

inline RawImage load_raw(const fs::path& path, int bit_depth, Cfa cfa) {
    int w = 0, h = 0;
    const auto codes = pngio::read_gray16(path.string(), w, h);
    RawImage raw;
    raw.bit_depth = bit_depth;
    raw.cfa = cfa;
    raw.data = Tensor(1, 1, h, w);
    const double scale = 1.0 / static_cast<double>((1 << bit_depth) - 1);
    for (std::int64_t i = 0; i < raw.data.numel(); ++i)
        raw.data.v[static_cast<std::size_t>(i)] = codes[static_cast<std::size_t>(i)] * scale;
    return raw;
}

inline void save_raw(const fs::path& path, const RawImage& raw) {
    const double full_scale = static_cast<double>((1 << raw.bit_depth) - 1);
    std::vector<std::uint16_t> codes(static_cast<std::size_t>(raw.data.numel()));
    for (std::size_t i = 0; i < codes.size(); ++i)
        codes[i] = static_cast<std::uint16_t>(std::lround(clamp01(raw.data.v[i]) * full_scale));
    pngio::write_gray16(path.string(), codes, static_cast<int>(raw.width()),
                        static_cast<int>(raw.height()));
}

struct LoadedPair {
    RawImage raw;
    RgbImage rgb;
};

inline LoadedPair load_pair(const DatasetIndex& index, const PairEntry& entry) {
    LoadedPair p;
    p.raw = load_raw(entry.raw_path, index.bit_depth, index.cfa);
    p.rgb = RgbImage{pngio::read_rgb8(entry.rgb_path.string())};
    if (!p.raw.data.same_shape(Tensor(1, 1, p.rgb.height(), p.rgb.width())))
        throw DimensionError("pair '" + entry.name + "': RAW/RGB dimensions differ");
    return p;
}

// Co-located crops with an even-aligned corner so the CFA phase of the
// crop matches the full image. Deterministic per seed.
inline std::pair<RawImage, RgbImage> extract_patch_pair(const LoadedPair& pair, int patch_size,
                                                        std::uint64_t seed) {
    const std::int64_t h = pair.raw.height();
    const std::int64_t w = pair.raw.width();
    if (patch_size % 2 != 0) throw DimensionError("extract_patch_pair: patch_size must be even");
    if (patch_size > h || patch_size > w)
        throw DimensionError("extract_patch_pair: patch " + std::to_string(patch_size) +
                             " exceeds image " + std::to_string(h) + "x" + std::to_string(w));
    Rng rng(seed);
    std::int64_t y0 = rng.index(h - patch_size + 1);
    std::int64_t x0 = rng.index(w - patch_size + 1);
    y0 &= ~std::int64_t{1};  // round down to even, preserving CFA phase
    x0 &= ~std::int64_t{1};

    RawImage raw_patch;
    raw_patch.bit_depth = pair.raw.bit_depth;
    raw_patch.cfa = pair.raw.cfa;
    raw_patch.data = Tensor(1, 1, patch_size, patch_size);
    RgbImage rgb_patch{Tensor(1, 3, patch_size, patch_size)};
    for (std::int64_t y = 0; y < patch_size; ++y)
        for (std::int64_t x = 0; x < patch_size; ++x) {
            raw_patch.data.at(0, 0, y, x) = pair.raw.data.at(0, 0, y0 + y, x0 + x);
            for (int ch = 0; ch < 3; ++ch)
                rgb_patch.data.at(0, ch, y, x) = pair.rgb.data.at(0, ch, y0 + y, x0 + x);
        }
    return {raw_patch, rgb_patch};
}

}  // namespace fisp
