#ifndef TRUG_CHECKPOINT_HPP
#define TRUG_CHECKPOINT_HPP

// Model checkpoints ("TRGC"). Little-endian layout:
//   "TRGC"  u32 version = 1  u32 model kind (1 rbm, 2 trbm, 3 tggm)
//   truncation manifest: u32 mode (0 shared, 1 per-unit)  u32 trainable bits (1 lower, 2 upper)
//                        u32 count  f64 lower[count]  f64 upper[count]
//   u32 block count, then per block: u32 name length, name bytes, u32 rows, u32 cols, f64 values row-major.

#include "data.hpp"
#include "errors.hpp"
#include "linalg.hpp"
#include "rbm.hpp"
#include "tggm.hpp"
#include "trbm.hpp"

#include <cstring>
#include <map>
#include <string>
#include <vector>

namespace trug {

enum class ModelKind : std::uint32_t { rbm = 1, trbm = 2, tggm = 3 };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::rbm: return "rbm";
        case ModelKind::trbm: return "trbm";
        case ModelKind::tggm: return "tggm";
    }
    return "unknown";
}

struct Checkpoint {
    ModelKind kind = ModelKind::rbm;
    TrugParams trug;
    std::map<std::string, Matrix> blocks;

    const Matrix& block(const std::string& name) const {
        const auto it = blocks.find(name);
        if (it == blocks.end()) throw ConfigError("checkpoint has no block '" + name + "'");
        return it->second;
    }

    Vector vector(const std::string& name) const {
        const Matrix& m = block(name);
        if (m.cols() != 1) throw ConfigError("checkpoint block '" + name + "' is not a column vector");
        return m.col(0);
    }

    double scalar(const std::string& name) const {
        const Matrix& m = block(name);
        if (m.size() != 1) throw ConfigError("checkpoint block '" + name + "' is not a scalar");
        return m(0, 0);
    }

    bool has(const std::string& name) const { return blocks.count(name) != 0; }
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

inline void put_f64(std::vector<std::uint8_t>& b, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    for (int s = 0; s < 64; s += 8) b.push_back(static_cast<std::uint8_t>(bits >> s));
}

inline double read_f64(const std::vector<std::uint8_t>& b, std::size_t at) {
    if (at + 8 > b.size()) throw ParseError("unexpected end of checkpoint", b.size());
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) bits = (bits << 8) | b[at + static_cast<std::size_t>(i)];
    double v;
    std::memcpy(&v, &bits, sizeof v);
    return v;
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ck) {
    std::vector<std::uint8_t> out{'T', 'R', 'G', 'C'};
    detail::put_le32(out, kCheckpointVersion);
    detail::put_le32(out, static_cast<std::uint32_t>(ck.kind));
    detail::put_le32(out, ck.trug.mode == TruncationMode::shared ? 0u : 1u);
    detail::put_le32(out, (ck.trug.trainable.lower ? 1u : 0u) | (ck.trug.trainable.upper ? 2u : 0u));
    detail::put_le32(out, static_cast<std::uint32_t>(ck.trug.size()));
    for (Eigen::Index j = 0; j < ck.trug.size(); ++j) detail::put_f64(out, ck.trug.lower[j]);
    for (Eigen::Index j = 0; j < ck.trug.size(); ++j) detail::put_f64(out, ck.trug.upper[j]);
    detail::put_le32(out, static_cast<std::uint32_t>(ck.blocks.size()));
    for (const auto& [name, m] : ck.blocks) {
        detail::put_le32(out, static_cast<std::uint32_t>(name.size()));
        out.insert(out.end(), name.begin(), name.end());
        detail::put_le32(out, static_cast<std::uint32_t>(m.rows()));
        detail::put_le32(out, static_cast<std::uint32_t>(m.cols()));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) detail::put_f64(out, m(r, c));
    }
    return out;
}

inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), "TRGC", 4) != 0) throw ParseError("bad checkpoint magic", 0);
    const std::uint32_t version = detail::read_le32(bytes, 4);
    if (version != kCheckpointVersion)
        throw ParseError("unsupported checkpoint version " + std::to_string(version), 4);
    Checkpoint ck;
    const std::uint32_t kind = detail::read_le32(bytes, 8);
    if (kind < 1 || kind > 3) throw ParseError("unknown model kind " + std::to_string(kind), 8);
    ck.kind = static_cast<ModelKind>(kind);
    const std::uint32_t mode = detail::read_le32(bytes, 12);
    if (mode > 1) throw ParseError("unknown truncation mode", 12);
    const std::uint32_t mask = detail::read_le32(bytes, 16);
    const std::uint32_t count = detail::read_le32(bytes, 20);
    std::size_t at = 24;
    Vector lo(count), hi(count);
    for (std::uint32_t j = 0; j < count; ++j, at += 8) lo[j] = detail::read_f64(bytes, at);
    for (std::uint32_t j = 0; j < count; ++j, at += 8) hi[j] = detail::read_f64(bytes, at);
    try {
        const TrainableMask tm{(mask & 1u) != 0, (mask & 2u) != 0};
        ck.trug = mode == 0 ? TrugParams::shared(lo.size() ? lo[0] : 0.0, hi.size() ? hi[0] : 1.0, tm)
                            : TrugParams::per_unit(lo, hi, tm);
        if (mode == 0 && count != 1) throw ContractError("shared mode with " + std::to_string(count) + " pairs");
    } catch (const ContractError& e) {
        throw ParseError(std::string("invalid truncation manifest: ") + e.what(), 12);
    }
    const std::uint32_t blocks = detail::read_le32(bytes, at);
    at += 4;
    for (std::uint32_t i = 0; i < blocks; ++i) {
        const std::uint32_t len = detail::read_le32(bytes, at);
        at += 4;
        if (at + len > bytes.size()) throw ParseError("truncated block name", at);
        std::string name(bytes.begin() + static_cast<std::ptrdiff_t>(at),
                         bytes.begin() + static_cast<std::ptrdiff_t>(at + len));
        at += len;
        const std::uint32_t rows = detail::read_le32(bytes, at), cols = detail::read_le32(bytes, at + 4);
        at += 8;
        if (at + std::size_t{rows} * cols * 8 > bytes.size()) throw ParseError("truncated block '" + name + "'", at);
        Matrix m(rows, cols);
        for (std::uint32_t r = 0; r < rows; ++r)
            for (std::uint32_t c = 0; c < cols; ++c, at += 8) m(r, c) = detail::read_f64(bytes, at);
        ck.blocks.emplace(std::move(name), std::move(m));
    }
    if (at != bytes.size()) throw ParseError("trailing bytes after checkpoint", at);
    return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck) {
    detail::write_file(path, encode_checkpoint(ck));
}

inline Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(detail::read_file(path)); }

// ---------------------------------------------------------------- model conversions

inline Checkpoint to_checkpoint(const RbmModel& m) {
    return {ModelKind::rbm, m.trug, {{"W", m.W}, {"b", m.b}, {"c", m.c}, {"d", m.d}}};
}

inline Checkpoint to_checkpoint(const TrbmModel& m) {
    Checkpoint ck{ModelKind::trbm, m.trug,
                  {{"W1", m.W1}, {"W2", m.W2}, {"W3", m.W3}, {"W4", m.W4}, {"a", m.a}, {"b", m.b}, {"c", m.c},
                   {"d", m.d}}};
    if (m.separate_initial) {
        ck.blocks.emplace("b_init", m.b_init);
        ck.blocks.emplace("c_init", m.c_init);
    }
    return ck;
}

inline Checkpoint to_checkpoint(const TggmModel& m) {
    return {ModelKind::tggm,
            m.trug,
            {{"W0", m.W0},
             {"b0", m.b0},
             {"W1", m.W1},
             {"b1", m.b1},
             {"sigma2", Matrix::Constant(1, 1, m.sigma2)},
             {"learn_sigma2", Matrix::Constant(1, 1, m.learn_sigma2 ? 1.0 : 0.0)}}};
}

namespace detail {

inline void expect_kind(const Checkpoint& ck, ModelKind want) {
    if (ck.kind != want)
        throw ConfigError("checkpoint holds a " + to_string(ck.kind) + " model, expected " + to_string(want));
}

template <class Model>
Model validated(Model m) {
    try {
        m.validate();
    } catch (const ContractError& e) {
        throw ConfigError(std::string("checkpoint is inconsistent: ") + e.what());
    }
    return m;
}

}  // namespace detail

inline RbmModel rbm_from_checkpoint(const Checkpoint& ck) {
    detail::expect_kind(ck, ModelKind::rbm);
    return detail::validated(RbmModel{ck.block("W"), ck.vector("b"), ck.vector("c"), ck.vector("d"), ck.trug});
}

inline TrbmModel trbm_from_checkpoint(const Checkpoint& ck) {
    detail::expect_kind(ck, ModelKind::trbm);
    TrbmModel m{ck.block("W1"), ck.block("W2"), ck.block("W3"), ck.block("W4"), ck.vector("a"), ck.vector("b"),
                ck.vector("c"), ck.vector("d"),  ck.trug,        false,          Vector(),       Vector()};
    if (ck.has("b_init")) {
        m.separate_initial = true;
        m.b_init = ck.vector("b_init");
        m.c_init = ck.vector("c_init");
    }
    return detail::validated(std::move(m));
}

inline TggmModel tggm_from_checkpoint(const Checkpoint& ck) {
    detail::expect_kind(ck, ModelKind::tggm);
    TggmModel m{ck.block("W0"), ck.vector("b0"), ck.block("W1"), ck.vector("b1"), ck.scalar("sigma2"), ck.trug,
                ck.scalar("learn_sigma2") != 0.0};
    return detail::validated(std::move(m));
}

}  // namespace trug

#endif  // TRUG_CHECKPOINT_HPP
