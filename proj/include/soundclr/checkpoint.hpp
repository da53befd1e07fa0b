#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "soundclr/config.hpp"
#include "soundclr/errors.hpp"
#include "soundclr/optimizer.hpp"
#include "soundclr/tensor.hpp"

namespace soundclr {

// Every stream used in training is derived statelessly from (seed, epoch,
// ...), so the seed plus next_epoch fully captures the RNG position.
struct Checkpoint {
    int version = 1;
    TrainConfig config;
    ParamSet params;
    OptimizerState opt;
    int next_epoch = 0; // first epoch not yet run
    std::uint64_t seed = 0;
};

// File layout ("SCKP0001"): 8-byte magic, 8-byte LE header length, UTF-8 JSON
// header (config, epoch, rng state, tensor records with byte offsets), then
// contiguous little-endian float64 payloads.
inline void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
    json header;
    header["version"] = ckpt.version;
    header["config"] = ckpt.config;
    header["epoch"] = ckpt.next_epoch;
    header["rng"] = {{"seed", ckpt.seed}, {"next_epoch", ckpt.next_epoch}};
    header["opt_step"] = ckpt.opt.step;

    json records = json::array();
    std::uint64_t offset = 0;
    auto add = [&](const std::string& name, const Tensor& t) {
        const std::uint64_t len = t.numel() * 8;
        records.push_back({{"name", name}, {"shape", t.shape}, {"dtype", "f64"}, {"offset", offset}, {"length", len}});
        offset += len;
    };
    for (const auto& [name, t] : ckpt.params) add("param/" + name, t);
    for (const auto& [name, t] : ckpt.opt.m) add("adam_m/" + name, t);
    for (const auto& [name, t] : ckpt.opt.v) add("adam_v/" + name, t);
    header["tensors"] = records;

    const std::string hstr = header.dump();
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("save_checkpoint: cannot open " + path);
    f.write("SCKP0001", 8);
    std::uint64_t hlen = hstr.size();
    unsigned char lenb[8];
    for (int i = 0; i < 8; ++i) lenb[i] = static_cast<unsigned char>(hlen >> (8 * i));
    f.write(reinterpret_cast<char*>(lenb), 8);
    f.write(hstr.data(), static_cast<std::streamsize>(hstr.size()));

    auto write_tensor = [&](const Tensor& t) {
        static_assert(sizeof(double) == 8);
        f.write(reinterpret_cast<const char*>(t.data.data()), static_cast<std::streamsize>(t.numel() * 8));
    };
    for (const auto& [name, t] : ckpt.params) write_tensor(t);
    for (const auto& [name, t] : ckpt.opt.m) write_tensor(t);
    for (const auto& [name, t] : ckpt.opt.v) write_tensor(t);
    if (!f) throw DataError("save_checkpoint: write failed for " + path);
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("load_checkpoint: cannot open " + path);
    char magic[8];
    f.read(magic, 8);
    if (!f || std::memcmp(magic, "SCKP0001", 8) != 0)
        throw DataError("load_checkpoint: bad magic or version in " + path);
    unsigned char lenb[8];
    f.read(reinterpret_cast<char*>(lenb), 8);
    if (!f) throw DataError("load_checkpoint: truncated header length in " + path);
    std::uint64_t hlen = 0;
    for (int i = 0; i < 8; ++i) hlen |= std::uint64_t(lenb[i]) << (8 * i);
    std::string hstr(hlen, '\0');
    f.read(hstr.data(), static_cast<std::streamsize>(hlen));
    if (!f) throw DataError("load_checkpoint: truncated header in " + path);

    json header;
    try {
        header = json::parse(hstr);
    } catch (const json::exception& e) {
        throw DataError(std::string("load_checkpoint: corrupt header: ") + e.what());
    }

    Checkpoint ckpt;
    ckpt.version = header.value("version", 1);
    if (ckpt.version != 1) throw DataError("load_checkpoint: unsupported version in " + path);
    header.at("config").get_to(ckpt.config);
    ckpt.next_epoch = header.value("epoch", 0);
    ckpt.seed = header["rng"].value("seed", std::uint64_t{0});
    ckpt.opt.step = header.value("opt_step", std::int64_t{0});

    const std::streampos payload_start = f.tellg();
    for (const auto& rec : header.at("tensors")) {
        const std::string name = rec.at("name").get<std::string>();
        std::vector<std::size_t> shape = rec.at("shape").get<std::vector<std::size_t>>();
        const auto offset = rec.at("offset").get<std::uint64_t>();
        const auto length = rec.at("length").get<std::uint64_t>();
        Tensor t(shape);
        if (length != t.numel() * 8) throw DataError("load_checkpoint: corrupted length field for " + name);
        f.seekg(payload_start + static_cast<std::streamoff>(offset));
        f.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(length));
        if (!f) throw DataError("load_checkpoint: truncated payload for " + name);
        if (name.rfind("param/", 0) == 0)
            ckpt.params.emplace(name.substr(6), std::move(t));
        else if (name.rfind("adam_m/", 0) == 0)
            ckpt.opt.m.emplace(name.substr(7), std::move(t));
        else if (name.rfind("adam_v/", 0) == 0)
            ckpt.opt.v.emplace(name.substr(7), std::move(t));
        else
            throw DataError("load_checkpoint: unknown tensor record " + name);
    }
    return ckpt;
}

} // namespace soundclr
