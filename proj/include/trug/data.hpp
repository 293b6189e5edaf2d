#ifndef TRUG_DATA_HPP
#define TRUG_DATA_HPP

// Dataset ingestion and synthesis: IDX image files, numeric CSV regression tables,
// bouncing-ball videos and the packed bitmap container ("TGBM").

#include "errors.hpp"
#include "linalg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace trug {

// ---------------------------------------------------------------- byte helpers

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ConfigError("write failed for '" + path + "'");
}

inline std::uint32_t read_be32(const std::vector<std::uint8_t>& b, std::size_t at) {
    if (at + 4 > b.size()) throw ParseError("truncated header", b.size());
    return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
           std::uint32_t{b[at + 3]};
}

inline void put_be32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint32_t read_le32(const std::vector<std::uint8_t>& b, std::size_t at) {
    if (at + 4 > b.size()) throw ParseError("unexpected end of file", b.size());
    return std::uint32_t{b[at]} | (std::uint32_t{b[at + 1]} << 8) | (std::uint32_t{b[at + 2]} << 16) |
           (std::uint32_t{b[at + 3]} << 24);
}

inline void put_le32(std::vector<std::uint8_t>& b, std::uint32_t v) {
    for (int s = 0; s < 32; s += 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

}  // namespace detail

// ---------------------------------------------------------------- IDX images

struct BinaryImageDataset {
    Matrix images;  // N x (width * height), entries 0/1
    int width = 0;
    int height = 0;

    Eigen::Index size() const { return images.rows(); }
};

/// Pixel intensities in [0, 1], one image per row, from an unsigned-byte IDX file (magic 0x00000803).
struct IdxImages {
    Matrix intensities;
    int width = 0;
    int height = 0;
};

inline IdxImages parse_idx_images(const std::vector<std::uint8_t>& bytes) {
    const std::uint32_t magic = detail::read_be32(bytes, 0);
    if (magic != 0x00000803u) throw ParseError("bad IDX magic (expected unsigned-byte rank-3 images)", 0);
    const std::uint32_t count = detail::read_be32(bytes, 4);
    const std::uint32_t rows = detail::read_be32(bytes, 8);
    const std::uint32_t cols = detail::read_be32(bytes, 12);
    if (rows == 0 || cols == 0) throw ParseError("zero image dimension", rows == 0 ? 8 : 12);
    const std::size_t pixels = std::size_t{rows} * cols;
    const std::size_t need = 16 + std::size_t{count} * pixels;
    if (bytes.size() < need) throw ParseError("truncated IDX payload", bytes.size());
    if (bytes.size() > need) throw ParseError("trailing bytes after IDX payload", need);
    IdxImages out;
    out.width = static_cast<int>(cols);
    out.height = static_cast<int>(rows);
    out.intensities.resize(count, static_cast<Eigen::Index>(pixels));
    for (std::size_t i = 0; i < count; ++i)
        for (std::size_t p = 0; p < pixels; ++p)
            out.intensities(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) =
                bytes[16 + i * pixels + p] / 255.0;
    return out;
}

inline std::vector<std::uint8_t> encode_idx_images(const Matrix& intensities, int width, int height) {
    require(width > 0 && height > 0 && intensities.cols() == Eigen::Index{width} * height,
            "idx: image size does not match width x height");
    std::vector<std::uint8_t> out;
    detail::put_be32(out, 0x00000803u);
    detail::put_be32(out, static_cast<std::uint32_t>(intensities.rows()));
    detail::put_be32(out, static_cast<std::uint32_t>(height));
    detail::put_be32(out, static_cast<std::uint32_t>(width));
    for (Eigen::Index i = 0; i < intensities.rows(); ++i)
        for (Eigen::Index p = 0; p < intensities.cols(); ++p)
            out.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(intensities(i, p), 0.0, 1.0) * 255.0)));
    return out;
}

enum class Binarization { threshold, stochastic };

/// Threshold: bit = intensity >= threshold. Stochastic: bit ~ Bernoulli(intensity), drawn row by row.
template <class Urbg>
Matrix binarize(const Matrix& intensities, Binarization mode, double threshold, Urbg& rng) {
    require(threshold > 0.0 && threshold < 1.0, "binarize: threshold must lie in (0, 1)");
    Matrix out(intensities.rows(), intensities.cols());
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (Eigen::Index i = 0; i < intensities.rows(); ++i)
        for (Eigen::Index p = 0; p < intensities.cols(); ++p) {
            const double v = intensities(i, p);
            if (mode == Binarization::threshold)
                out(i, p) = v >= threshold ? 1.0 : 0.0;
            else
                out(i, p) = unif(rng) < v ? 1.0 : 0.0;
        }
    return out;
}

template <class Urbg>
BinaryImageDataset load_idx_images(const std::string& path, Binarization mode, double threshold, Urbg& rng) {
    const IdxImages raw = parse_idx_images(detail::read_file(path));
    return {binarize(raw.intensities, mode, threshold, rng), raw.width, raw.height};
}

/// Deterministic threshold binarisation.
inline BinaryImageDataset load_idx_images(const std::string& path, double threshold = 0.5) {
    Rng unused(0);
    return load_idx_images(path, Binarization::threshold, threshold, unused);
}

// ---------------------------------------------------------------- CSV regression

/// Per-column mean and population standard deviation; `kept` lists the original column index of each
/// retained column and `dropped` the constant ones.
struct ColumnStats {
    Vector mean;
    Vector std;
    std::vector<int> kept;
    std::vector<int> dropped;

    Matrix standardize(const Matrix& raw_kept) const {
        require(raw_kept.cols() == mean.size(), "standardize: column count mismatch");
        return ((raw_kept.rowwise() - mean.transpose()).array().rowwise() / std.transpose().array()).matrix();
    }

    Matrix destandardize(const Matrix& z) const {
        require(z.cols() == mean.size(), "destandardize: column count mismatch");
        return ((z.array().rowwise() * std.transpose().array()).rowwise() + mean.transpose().array()).matrix();
    }
};

/// Stats over the columns of `raw`; zero-variance columns are dropped when `drop_constant`.
inline ColumnStats column_stats(const Matrix& raw, bool drop_constant, const std::vector<int>& original_index) {
    require(raw.rows() > 0, "column_stats: no rows");
    ColumnStats st;
    std::vector<double> means, stds;
    for (Eigen::Index c = 0; c < raw.cols(); ++c) {
        const double mu = raw.col(c).mean();
        const double sd = std::sqrt((raw.col(c).array() - mu).square().mean());
        if (sd == 0.0 && drop_constant) {
            st.dropped.push_back(original_index[static_cast<std::size_t>(c)]);
            continue;
        }
        require(sd > 0.0, "column_stats: constant target column");
        means.push_back(mu);
        stds.push_back(sd);
        st.kept.push_back(original_index[static_cast<std::size_t>(c)]);
    }
    st.mean = Eigen::Map<Vector>(means.data(), static_cast<Eigen::Index>(means.size()));
    st.std = Eigen::Map<Vector>(stds.data(), static_cast<Eigen::Index>(stds.size()));
    return st;
}

struct CsvTable {
    std::vector<std::string> header;
    Matrix values;
};

/// Comma-separated numeric table, dot decimal. ParseError offsets are 1-based line numbers.
inline CsvTable parse_csv(std::istream& in, bool has_header) {
    CsvTable out;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    auto split = [](const std::string& s) {
        std::vector<std::string> cells;
        std::stringstream ss(s);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        if (!s.empty() && s.back() == ',') cells.emplace_back();
        return cells;
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        auto cells = split(line);
        if (has_header && out.header.empty() && rows.empty()) {
            out.header = std::move(cells);
            continue;
        }
        std::vector<double> row;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            std::string cell = cells[c];
            const auto first = cell.find_first_not_of(" \t"), last = cell.find_last_not_of(" \t");
            cell = first == std::string::npos ? "" : cell.substr(first, last - first + 1);
            double v = 0.0;
            const auto res = std::from_chars(cell.data(), cell.data() + cell.size(), v);
            if (cell.empty() || res.ec != std::errc() || res.ptr != cell.data() + cell.size() || !std::isfinite(v))
                throw ParseError("non-numeric cell '" + cell + "' in column " + std::to_string(c + 1) + " of line " +
                                     std::to_string(line_no),
                                 line_no);
            row.push_back(v);
        }
        if (!rows.empty() && row.size() != rows.front().size())
            throw ParseError("row has " + std::to_string(row.size()) + " cells, expected " +
                                 std::to_string(rows.front().size()),
                             line_no);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw ParseError("no data rows", line_no);
    out.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            out.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    return out;
}

struct RegressionDataset {
    Matrix inputs;   // standardised
    Matrix targets;  // standardised
    ColumnStats feature_stats;
    ColumnStats target_stats;
    std::vector<Eigen::Index> source_rows;  // row indices into the original table
};

struct RegressionSplit {
    RegressionDataset train;
    RegressionDataset test;
};

/// Shuffled train/test partition of an N-row table: round(N * test_fraction) test rows.
inline std::pair<std::vector<Eigen::Index>, std::vector<Eigen::Index>> split_rows(Eigen::Index n,
                                                                                  std::uint64_t seed,
                                                                                  double test_fraction) {
    require(test_fraction > 0.0 && test_fraction < 1.0, "split: test_fraction must lie in (0, 1)");
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
    std::iota(idx.begin(), idx.end(), Eigen::Index{0});
    Rng rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));
    require(n_test >= 1 && n_test < idx.size(), "split: empty train or test split");
    std::vector<Eigen::Index> test(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    std::vector<Eigen::Index> train(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
    return {train, test};
}

/// Splits and standardises a table; `target_columns` index the table's columns (negative counts from the end).
inline RegressionSplit split_regression(const Matrix& table, std::vector<int> target_columns, std::uint64_t seed,
                                        double test_fraction) {
    const auto cols = static_cast<int>(table.cols());
    require(!target_columns.empty(), "regression: no target columns");
    for (int& t : target_columns) {
        if (t < 0) t += cols;
        require(t >= 0 && t < cols, "regression: target column out of range");
    }
    std::vector<int> features;
    for (int c = 0; c < cols; ++c)
        if (std::find(target_columns.begin(), target_columns.end(), c) == target_columns.end()) features.push_back(c);
    require(!features.empty(), "regression: no feature columns");

    const auto [train_rows, test_rows] = split_rows(table.rows(), seed, test_fraction);
    auto take = [&](const std::vector<Eigen::Index>& rows, const std::vector<int>& columns) {
        Matrix out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns.size()));
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < columns.size(); ++c)
                out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = table(rows[r], columns[c]);
        return out;
    };
    RegressionSplit out;
    out.train.feature_stats = column_stats(take(train_rows, features), true, features);
    out.train.target_stats = column_stats(take(train_rows, target_columns), false, target_columns);
    out.test.feature_stats = out.train.feature_stats;
    out.test.target_stats = out.train.target_stats;
    for (auto* part : {&out.train, &out.test}) {
        const auto& rows = part == &out.train ? train_rows : test_rows;
        part->inputs = part->feature_stats.standardize(take(rows, part->feature_stats.kept));
        part->targets = part->target_stats.standardize(take(rows, target_columns));
        part->source_rows = rows;
    }
    return out;
}

inline RegressionSplit load_regression_csv(const std::string& path, const std::vector<int>& target_columns,
                                           std::uint64_t split_seed, double test_fraction, bool has_header = true) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    return split_regression(parse_csv(in, has_header).values, target_columns, split_seed, test_fraction);
}

// ---------------------------------------------------------------- bouncing balls

struct BouncingBallConfig {
    int n_balls = 3;
    int frame_size = 30;
    int n_frames = 100;
    double radius = 3.0;
    double speed = 1.0;
    std::uint64_t seed = 0;
    int n_sequences = 1;

    void validate() const {
        require(n_balls >= 0, "balls: n_balls must be non-negative");
        require(frame_size >= 1 && n_frames >= 1 && n_sequences >= 0, "balls: sizes must be positive");
        require(radius > 0.0 && radius < frame_size / 2.0, "balls: radius must lie in (0, frame_size / 2)");
        require(speed >= 0.0 && std::isfinite(speed), "balls: speed must be non-negative");
    }
};

struct Ball {
    double x, y;    // centre, in pixels; pixel (r, c) covers [c, c + 1) x [r, r + 1)
    double vx, vy;  // pixels per frame
};

/// One frame step with elastic reflection off the walls at radius from each edge.
inline void advance_ball(Ball& b, double size, double radius) {
    auto reflect = [&](double& p, double& v) {
        p += v;
        const double lo = radius, hi = size - radius;
        // Repeat in case a very fast ball crosses the box more than once.
        while (p < lo || p > hi) {
            if (p < lo) p = 2 * lo - p;
            if (p > hi) p = 2 * hi - p;
            v = -v;
        }
    };
    reflect(b.x, b.vx);
    reflect(b.y, b.vy);
}

/// Filled discs: a pixel is on when its centre lies within radius of any ball.
inline RowVector render_balls(const std::vector<Ball>& balls, int size, double radius) {
    RowVector frame = RowVector::Zero(Eigen::Index{size} * size);
    for (const Ball& b : balls)
        for (int r = 0; r < size; ++r)
            for (int c = 0; c < size; ++c) {
                const double dx = c + 0.5 - b.x, dy = r + 0.5 - b.y;
                if (dx * dx + dy * dy <= radius * radius) frame[r * size + c] = 1.0;
            }
    return frame;
}

/// n_frames x size^2 video from the given initial balls; frame 0 shows the initial positions.
inline Matrix simulate_balls(std::vector<Ball> balls, const BouncingBallConfig& config) {
    config.validate();
    Matrix video(config.n_frames, Eigen::Index{config.frame_size} * config.frame_size);
    for (int t = 0; t < config.n_frames; ++t) {
        video.row(t) = render_balls(balls, config.frame_size, config.radius);
        for (Ball& b : balls) advance_ball(b, config.frame_size, config.radius);
    }
    return video;
}

/// Uniform positions inside the walls and uniform directions at the configured speed. Balls pass through each other.
inline std::vector<Matrix> generate_bouncing_balls(const BouncingBallConfig& config) {
    config.validate();
    Rng rng(config.seed);
    std::uniform_real_distribution<double> pos(config.radius, config.frame_size - config.radius);
    std::uniform_real_distribution<double> angle(0.0, 2.0 * M_PI);
    std::vector<Matrix> out;
    for (int s = 0; s < config.n_sequences; ++s) {
        std::vector<Ball> balls;
        for (int i = 0; i < config.n_balls; ++i) {
            const double x = pos(rng), y = pos(rng), a = angle(rng);
            balls.push_back({x, y, config.speed * std::cos(a), config.speed * std::sin(a)});
        }
        out.push_back(simulate_balls(std::move(balls), config));
    }
    return out;
}

// ---------------------------------------------------------------- packed bitmap container

// Layout (little-endian): "TGBM", u32 version = 1, u32 width, u32 height, u32 item count, then per item
// u32 frame count followed by frames * width * height bits packed LSB-first, padded to a whole byte.
struct BitmapSet {
    int width = 0;
    int height = 0;
    std::vector<Matrix> items;  // each frames x (width * height), entries 0/1
};

inline constexpr std::uint32_t kBitmapVersion = 1;

inline std::vector<std::uint8_t> encode_bitmaps(const BitmapSet& set) {
    require(set.width > 0 && set.height > 0, "bitmap: width and height must be positive");
    const Eigen::Index pixels = Eigen::Index{set.width} * set.height;
    std::vector<std::uint8_t> out{'T', 'G', 'B', 'M'};
    detail::put_le32(out, kBitmapVersion);
    detail::put_le32(out, static_cast<std::uint32_t>(set.width));
    detail::put_le32(out, static_cast<std::uint32_t>(set.height));
    detail::put_le32(out, static_cast<std::uint32_t>(set.items.size()));
    for (const Matrix& item : set.items) {
        require(item.cols() == pixels, "bitmap: item width does not match width x height");
        detail::put_le32(out, static_cast<std::uint32_t>(item.rows()));
        const std::size_t bits = static_cast<std::size_t>(item.size());
        std::vector<std::uint8_t> packed((bits + 7) / 8, 0);
        std::size_t k = 0;
        for (Eigen::Index t = 0; t < item.rows(); ++t)
            for (Eigen::Index p = 0; p < pixels; ++p, ++k) {
                const double v = item(t, p);
                require(v == 0.0 || v == 1.0, "bitmap: entries must be 0 or 1");
                if (v == 1.0) packed[k / 8] |= static_cast<std::uint8_t>(1u << (k % 8));
            }
        out.insert(out.end(), packed.begin(), packed.end());
    }
    return out;
}

inline BitmapSet decode_bitmaps(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, "TGBM"))
        throw ParseError("bad bitmap magic", 0);
    const std::uint32_t version = detail::read_le32(bytes, 4);
    if (version != kBitmapVersion) throw ParseError("unsupported bitmap version " + std::to_string(version), 4);
    BitmapSet set;
    set.width = static_cast<int>(detail::read_le32(bytes, 8));
    set.height = static_cast<int>(detail::read_le32(bytes, 12));
    if (set.width <= 0 || set.height <= 0) throw ParseError("zero bitmap dimension", 8);
    const std::uint32_t count = detail::read_le32(bytes, 16);
    const Eigen::Index pixels = Eigen::Index{set.width} * set.height;
    std::size_t at = 20;
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t frames = detail::read_le32(bytes, at);
        at += 4;
        const std::size_t bits = std::size_t{frames} * static_cast<std::size_t>(pixels);
        const std::size_t nbytes = (bits + 7) / 8;
        if (at + nbytes > bytes.size()) throw ParseError("truncated bitmap item " + std::to_string(i), bytes.size());
        Matrix item(frames, pixels);
        for (std::size_t k = 0; k < bits; ++k)
            item(static_cast<Eigen::Index>(k) / pixels, static_cast<Eigen::Index>(k) % pixels) =
                (bytes[at + k / 8] >> (k % 8)) & 1u;
        at += nbytes;
        set.items.push_back(std::move(item));
    }
    if (at != bytes.size()) throw ParseError("trailing bytes after bitmap items", at);
    return set;
}

inline void write_bitmaps(const std::string& path, const BitmapSet& set) { detail::write_file(path, encode_bitmaps(set)); }

inline BitmapSet read_bitmaps(const std::string& path) { return decode_bitmaps(detail::read_file(path)); }

}  // namespace trug

#endif  // TRUG_DATA_HPP
