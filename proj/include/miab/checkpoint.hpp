#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "miab/config.hpp"
#include "miab/errors.hpp"
#include "miab/learning.hpp"
#include "miab/policy.hpp"
#include "miab/rewards.hpp"

namespace miab {

inline constexpr const char* kCheckpointMagic = "MIAB-CHECKPOINT";
inline constexpr int kCheckpointVersion = 1;

/// Everything needed to resume evaluation or training bookkeeping.
struct Checkpoint {
    Config config;
    std::uint64_t seed = 0;
    long episode = 0;
    Agents agents;
    RewardNormalizer normalizer;
};

namespace detail {

inline std::vector<std::pair<std::string, ParamRef>> checkpoint_tensors(Agents& a) {
    std::vector<std::pair<std::string, ParamRef>> out;
    for (std::size_t k = 0; k < a.miab.size(); ++k)
        for (auto& p : a.miab[k].params()) out.emplace_back("miab" + std::to_string(k + 1) + "/" + p.name, p);
    for (auto& p : a.ue.params()) out.emplace_back("ue/" + p.name, p);
    return out;
}

inline void put_f32(std::ostream& out, double v) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(v));
    const char bytes[4] = {static_cast<char>(bits & 0xff), static_cast<char>((bits >> 8) & 0xff),
                           static_cast<char>((bits >> 16) & 0xff), static_cast<char>((bits >> 24) & 0xff)};
    out.write(bytes, 4);
}

inline double get_f32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw CheckpointError("truncated tensor data");
    const std::uint32_t bits = static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
                               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    return static_cast<double>(std::bit_cast<float>(bits));
}

inline std::string shape_text(const PolicyShape& s) {
    return std::to_string(s.obs_dim) + " " + std::to_string(s.n_actions) + " " + std::to_string(s.p) + " " +
           std::to_string(s.n) + " " + std::to_string(s.heads);
}

}  // namespace detail

/// Text header (magic, version, counters, shapes, configuration and
/// normaliser, tensor table) followed by each tensor as column-major
/// little-endian float32.
inline void write_checkpoint(std::ostream& out, const Checkpoint& ck) {
    auto& agents = const_cast<Agents&>(ck.agents);
    const auto tensors = detail::checkpoint_tensors(agents);
    out << kCheckpointMagic << "\n";
    out << "format_version " << kCheckpointVersion << "\n";
    out << "episode " << ck.episode << "\n";
    out << "seed " << ck.seed << "\n";
    out << "n_miab " << agents.miab.size() << "\n";
    out << "shape_high " << detail::shape_text(agents.miab.empty() ? PolicyShape{} : agents.miab.front().shape()) << "\n";
    out << "shape_low " << detail::shape_text(agents.ue.shape()) << "\n";
    std::istringstream cfg(to_text(ck.config));
    for (std::string line; std::getline(cfg, line);) out << "config " << line << "\n";
    const auto& n = ck.normalizer;
    out << "normalizer " << detail::format_double(n.decay()) << " " << n.warmup() << " "
        << detail::format_double(n.backhaul_mean()) << " " << detail::format_double(n.rate_mean()) << " "
        << n.episodes() << " " << n.backhaul_count() << " " << n.rate_count() << "\n";
    out << "tensors " << tensors.size() << "\n";
    for (const auto& [name, p] : tensors) out << "tensor " << name << " " << p.value->rows() << " " << p.value->cols() << "\n";
    out << "end_header\n";
    for (const auto& [name, p] : tensors)
        for (Eigen::Index k = 0; k < p.value->size(); ++k) detail::put_f32(out, p.value->data()[k]);
    if (!out) throw IoError("checkpoint write failed");
}

inline Checkpoint read_checkpoint(std::istream& in) {
    auto next = [&](const char* what) {
        std::string line;
        if (!std::getline(in, line)) throw CheckpointError(std::string("truncated header at ") + what);
        return line;
    };
    auto expect = [&](const std::string& line, const std::string& key) {
        if (line.rfind(key + " ", 0) != 0) throw CheckpointError("expected '" + key + "', got '" + line + "'");
        return std::istringstream(line.substr(key.size() + 1));
    };
    if (next("magic") != kCheckpointMagic) throw CheckpointError("not a checkpoint file");
    int version = 0;
    expect(next("format_version"), "format_version") >> version;
    if (version != kCheckpointVersion)
        throw CheckpointError("format version " + std::to_string(version) + ", expected " +
                              std::to_string(kCheckpointVersion));
    Checkpoint ck;
    expect(next("episode"), "episode") >> ck.episode;
    expect(next("seed"), "seed") >> ck.seed;
    std::size_t n_miab = 0;
    expect(next("n_miab"), "n_miab") >> n_miab;
    PolicyShape high, low;
    auto hs = expect(next("shape_high"), "shape_high");
    hs >> high.obs_dim >> high.n_actions >> high.p >> high.n >> high.heads;
    auto ls = expect(next("shape_low"), "shape_low");
    ls >> low.obs_dim >> low.n_actions >> low.p >> low.n >> low.heads;
    if (!hs || !ls) throw CheckpointError("malformed policy shape");
    std::string cfg_text, line = next("config");
    while (line.rfind("config ", 0) == 0) {
        cfg_text += line.substr(7) + "\n";
        line = next("config");
    }
    try {
        std::istringstream cs(cfg_text);
        ck.config = parse_config(cs);
    } catch (const ConfigError& e) {
        throw CheckpointError(std::string("stored configuration invalid: ") + e.what());
    }
    double decay = 0, bmean = 0, rmean = 0;
    int warmup = 0;
    long eps = 0, bc = 0, rc = 0;
    auto ns = expect(line, "normalizer");
    ns >> decay >> warmup >> bmean >> rmean >> eps >> bc >> rc;
    if (!ns) throw CheckpointError("malformed normalizer line");
    ck.normalizer = RewardNormalizer(decay, warmup);
    ck.normalizer.restore(bmean, rmean, eps, bc, rc);

    for (std::size_t k = 0; k < n_miab; ++k) ck.agents.miab.emplace_back(high);
    ck.agents.ue = PolicyNet(low);
    auto tensors = detail::checkpoint_tensors(ck.agents);
    std::size_t count = 0;
    expect(next("tensors"), "tensors") >> count;
    if (count != tensors.size())
        throw CheckpointError("tensor count " + std::to_string(count) + " does not match shapes (" +
                              std::to_string(tensors.size()) + ")");
    for (auto& [name, p] : tensors) {
        std::string got;
        Eigen::Index rows = -1, cols = -1;
        expect(next("tensor"), "tensor") >> got >> rows >> cols;
        if (got != name || rows != p.value->rows() || cols != p.value->cols())
            throw CheckpointError("tensor '" + got + "' does not match expected '" + name + "' " +
                                  std::to_string(p.value->rows()) + "x" + std::to_string(p.value->cols()));
    }
    if (next("end_header") != "end_header") throw CheckpointError("missing end_header");
    for (auto& [name, p] : tensors)
        for (Eigen::Index k = 0; k < p.value->size(); ++k) {
            const double v = detail::get_f32(in);
            if (!std::isfinite(v)) throw CheckpointError("non-finite value in tensor '" + name + "'");
            p.value->data()[k] = v;
        }
    if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError("trailing bytes after tensor data");
    for (auto& net : ck.agents.miab) net.refresh();
    ck.agents.ue.refresh();
    return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + tmp + "'");
        write_checkpoint(out, ck);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("cannot move checkpoint into '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open '" + path + "'");
    return read_checkpoint(in);
}

}  // namespace miab
