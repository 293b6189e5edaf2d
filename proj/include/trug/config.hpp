#ifndef TRUG_CONFIG_HPP
#define TRUG_CONFIG_HPP

// Run configuration: INI file with typed sections, `section.key=value` overrides, validation that
// reports every violation at once, and a resolved snapshot writer.
//
// Grammar: `[section]` headers, `key = value` lines, `;` or `#` comments. Reals accept `inf` / `-inf`.
// Booleans are true/false. Unknown sections or keys are errors.

#include "errors.hpp"
#include "linalg.hpp"
#include "nonlinearity.hpp"
#include "optim.hpp"

#include <boost/algorithm/string.hpp>
#include <boost/lexical_cast.hpp>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace trug {

enum class ModelChoice { rbm, trbm, tggm };

struct RunConfig {
    // [run]
    ModelChoice model = ModelChoice::rbm;
    std::optional<std::uint64_t> seed;  // mandatory
    int epochs = 10;
    std::string output_dir = "run";
    int checkpoint_every = 1;  // epochs
    int eval_every = 1;        // epochs

    // [data]
    std::string train;  // idx images (rbm), packed sequences (trbm) or csv table (tggm)
    std::string test;   // idx images or packed sequences; unused for tggm
    std::string binarize = "threshold";
    double threshold = 0.5;
    std::vector<int> target_columns{-1};
    std::uint64_t split_seed = 0;
    double test_fraction = 0.1;
    bool has_header = true;

    // [model]
    int hidden = 500;
    TruncationMode trunc_mode = TruncationMode::shared;
    double trunc_lower = 0.0;
    double trunc_upper = 1.0;
    bool learn_lower = true;
    bool learn_upper = true;
    double weight_sd = 0.1;  // N(0, 0.01) weights
    bool learn_d = true;
    double sigma2 = 0.5;
    bool learn_sigma2 = true;
    bool separate_initial = false;

    // [optimizer]
    OptimizerConfig optimizer;  // rmsprop, delay 0.95, batch 100
    long trunc_horizon = 0;     // 0 means the total number of planned steps

    // [cd]
    int cd_k = 1;
    bool persistent = false;

    // [ais]
    int ais_temps = 10000;
    int ais_chains = 100;
    int ais_runs = 1;

    // [tggm]
    int mf_cycles = 10;

    // [balls] for gen-data
    int balls = 3;
    int frame_size = 30;
    int frames = 100;
    double radius = 3.0;
    double speed = 1.0;
    int train_sequences = 4000;
    int test_sequences = 200;

    RunConfig() {
        optimizer.learning_rate = 1e-4;
        optimizer.decay = 0.95;
        optimizer.batch_size = 100;
        optimizer.trunc = {1e-4, 1e-6, 1};
    }

    TrugParams trug_params() const {
        const TrainableMask mask{learn_lower, learn_upper};
        return trunc_mode == TruncationMode::shared ? TrugParams::shared(trunc_lower, trunc_upper, mask)
                                                    : TrugParams::per_unit(hidden, trunc_lower, trunc_upper, mask);
    }
};

inline std::string to_string(ModelChoice m) {
    switch (m) {
        case ModelChoice::rbm: return "rbm";
        case ModelChoice::trbm: return "trbm";
        case ModelChoice::tggm: return "tggm";
    }
    return "?";
}

/// $TRUG_DATA_DIR when set, otherwise ./data.
inline std::filesystem::path data_dir() {
    if (const char* dir = std::getenv("TRUG_DATA_DIR"); dir != nullptr && *dir != '\0') return dir;
    return "data";
}

/// Absolute paths as given; relative ones are taken inside data_dir().
inline std::string resolve_data_path(const std::string& path) {
    if (path.empty() || std::filesystem::path(path).is_absolute()) return path;
    return (data_dir() / path).string();
}

namespace detail {

using Tree = boost::property_tree::ptree;

inline double parse_real(const std::string& raw) {
    const std::string s = boost::algorithm::to_lower_copy(boost::algorithm::trim_copy(raw));
    if (s == "inf" || s == "+inf") return kInf;
    if (s == "-inf") return -kInf;
    return boost::lexical_cast<double>(s);
}

inline std::string format_real(double v) {
    if (v == kInf) return "inf";
    if (v == -kInf) return "-inf";
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

/// Reads keys out of a tree, collecting every problem instead of stopping at the first.
class Reader {
public:
    explicit Reader(const Tree& tree) : tree_(tree) {}

    template <class F>
    void get(const std::string& section, const std::string& key, F&& assign) {
        known_.insert(section + "." + key);
        const auto node = tree_.get_child_optional(section + "." + key);
        if (!node) return;
        const std::string raw = boost::algorithm::trim_copy(node->data());
        try {
            assign(raw);
        } catch (const std::exception&) {
            errors_.push_back(section + "." + key + ": cannot parse '" + raw + "'");
        }
    }

    void real(const std::string& s, const std::string& k, double& out) {
        get(s, k, [&](const std::string& r) { out = parse_real(r); });
    }
    template <class Int>
    void integer(const std::string& s, const std::string& k, Int& out) {
        get(s, k, [&](const std::string& r) { out = boost::lexical_cast<Int>(r); });
    }
    void boolean(const std::string& s, const std::string& k, bool& out) {
        get(s, k, [&](const std::string& r) {
            if (r == "true")
                out = true;
            else if (r == "false")
                out = false;
            else
                throw std::invalid_argument(r);
        });
    }
    void text(const std::string& s, const std::string& k, std::string& out) {
        get(s, k, [&](const std::string& r) { out = r; });
    }

    template <class Enum>
    void choice(const std::string& s, const std::string& k, Enum& out, const std::map<std::string, Enum>& options) {
        get(s, k, [&](const std::string& r) {
            const auto it = options.find(r);
            if (it == options.end()) throw std::invalid_argument(r);
            out = it->second;
        });
    }

    void check_unknown() {
        for (const auto& [section, body] : tree_) {
            if (body.empty() && !body.data().empty()) {
                errors_.push_back("key '" + section + "' outside any section");
                continue;
            }
            for (const auto& [key, value] : body) {
                (void)value;
                if (!known_.count(section + "." + key)) errors_.push_back("unknown key " + section + "." + key);
            }
        }
    }

    std::vector<std::string>& errors() { return errors_; }

private:
    const Tree& tree_;
    std::set<std::string> known_;
    std::vector<std::string> errors_;
};

}  // namespace detail

/// Applies `section.key=value` overrides on top of a parsed tree.
inline void apply_overrides(detail::Tree& tree, const std::vector<std::string>& overrides) {
    for (const std::string& o : overrides) {
        const auto eq = o.find('=');
        const auto dot = o.find('.');
        if (eq == std::string::npos || dot == std::string::npos || dot > eq)
            throw ConfigError("override '" + o + "' is not of the form section.key=value");
        tree.put(boost::algorithm::trim_copy(o.substr(0, eq)), boost::algorithm::trim_copy(o.substr(eq + 1)));
    }
}

/// Builds and validates a RunConfig. Throws ConfigError listing every violation.
inline RunConfig config_from_tree(const detail::Tree& tree, bool check_paths = true) {
    RunConfig c;
    detail::Reader rd(tree);
    rd.choice("run", "model", c.model,
              {{"rbm", ModelChoice::rbm}, {"trbm", ModelChoice::trbm}, {"tggm", ModelChoice::tggm}});
    rd.get("run", "seed", [&](const std::string& r) { c.seed = boost::lexical_cast<std::uint64_t>(r); });
    rd.integer("run", "epochs", c.epochs);
    rd.text("run", "output_dir", c.output_dir);
    rd.integer("run", "checkpoint_every", c.checkpoint_every);
    rd.integer("run", "eval_every", c.eval_every);

    rd.text("data", "train", c.train);
    rd.text("data", "test", c.test);
    rd.text("data", "binarize", c.binarize);
    rd.real("data", "threshold", c.threshold);
    rd.get("data", "target_columns", [&](const std::string& r) {
        std::vector<std::string> parts;
        boost::algorithm::split(parts, r, boost::is_any_of(","));
        c.target_columns.clear();
        for (auto& p : parts) c.target_columns.push_back(boost::lexical_cast<int>(boost::algorithm::trim_copy(p)));
    });
    rd.integer("data", "split_seed", c.split_seed);
    rd.real("data", "test_fraction", c.test_fraction);
    rd.boolean("data", "has_header", c.has_header);

    rd.integer("model", "hidden", c.hidden);
    rd.choice("model", "trunc_mode", c.trunc_mode,
              {{"shared", TruncationMode::shared}, {"per_unit", TruncationMode::per_unit}});
    rd.real("model", "trunc_lower", c.trunc_lower);
    rd.real("model", "trunc_upper", c.trunc_upper);
    rd.boolean("model", "learn_lower", c.learn_lower);
    rd.boolean("model", "learn_upper", c.learn_upper);
    rd.real("model", "weight_sd", c.weight_sd);
    rd.boolean("model", "learn_d", c.learn_d);
    rd.real("model", "sigma2", c.sigma2);
    rd.boolean("model", "learn_sigma2", c.learn_sigma2);
    rd.boolean("model", "separate_initial", c.separate_initial);

    rd.choice("optimizer", "kind", c.optimizer.kind,
              {{"rmsprop", OptimizerKind::rmsprop}, {"sgd-momentum", OptimizerKind::sgd_momentum}});
    rd.real("optimizer", "learning_rate", c.optimizer.learning_rate);
    rd.real("optimizer", "decay", c.optimizer.decay);
    rd.integer("optimizer", "batch_size", c.optimizer.batch_size);
    rd.real("optimizer", "trunc_lr_start", c.optimizer.trunc.start);
    rd.real("optimizer", "trunc_lr_end", c.optimizer.trunc.end);
    rd.integer("optimizer", "trunc_horizon", c.trunc_horizon);

    rd.integer("cd", "k", c.cd_k);
    rd.boolean("cd", "persistent", c.persistent);
    rd.integer("ais", "temps", c.ais_temps);
    rd.integer("ais", "chains", c.ais_chains);
    rd.integer("ais", "runs", c.ais_runs);
    rd.integer("tggm", "mf_cycles", c.mf_cycles);

    rd.integer("balls", "balls", c.balls);
    rd.integer("balls", "frame_size", c.frame_size);
    rd.integer("balls", "frames", c.frames);
    rd.real("balls", "radius", c.radius);
    rd.real("balls", "speed", c.speed);
    rd.integer("balls", "train_sequences", c.train_sequences);
    rd.integer("balls", "test_sequences", c.test_sequences);
    rd.check_unknown();

    auto& errs = rd.errors();
    auto need = [&](bool ok, const std::string& msg) {
        if (!ok) errs.push_back(msg);
    };
    need(c.seed.has_value(), "run.seed is mandatory");
    need(c.epochs >= 0, "run.epochs must be non-negative");
    need(c.checkpoint_every >= 1, "run.checkpoint_every must be at least 1");
    need(c.eval_every >= 1, "run.eval_every must be at least 1");
    need(c.binarize == "threshold" || c.binarize == "stochastic", "data.binarize must be threshold or stochastic");
    need(c.threshold > 0.0 && c.threshold < 1.0, "data.threshold must lie in (0, 1)");
    need(c.test_fraction > 0.0 && c.test_fraction < 1.0, "data.test_fraction must lie in (0, 1)");
    need(!c.target_columns.empty(), "data.target_columns must list at least one column");
    need(c.hidden >= 1, "model.hidden must be positive");
    need(!std::isnan(c.trunc_lower) && !std::isnan(c.trunc_upper) && c.trunc_lower < c.trunc_upper &&
             c.trunc_lower != kInf && c.trunc_upper != -kInf,
         "model.trunc_lower must be below model.trunc_upper");
    need(c.weight_sd >= 0.0 && std::isfinite(c.weight_sd), "model.weight_sd must be non-negative");
    need(c.sigma2 > 0.0 && std::isfinite(c.sigma2), "model.sigma2 must be positive");
    need(std::isfinite(c.optimizer.learning_rate) && c.optimizer.learning_rate > 0.0,
         "optimizer.learning_rate must be positive");
    need(c.optimizer.decay >= 0.0 && c.optimizer.decay < 1.0, "optimizer.decay must lie in [0, 1)");
    need(c.optimizer.batch_size >= 1, "optimizer.batch_size must be positive");
    need(c.optimizer.trunc.start > 0.0 && c.optimizer.trunc.end > 0.0 &&
             c.optimizer.trunc.end <= c.optimizer.trunc.start,
         "optimizer.trunc_lr_end must be positive and not above optimizer.trunc_lr_start");
    need(c.trunc_horizon >= 0, "optimizer.trunc_horizon must be non-negative");
    need(c.cd_k >= 1, "cd.k must be at least 1");
    need(c.ais_temps >= 1 && c.ais_chains >= 1 && c.ais_runs >= 1, "ais.temps, ais.chains and ais.runs must be positive");
    need(c.mf_cycles >= 1, "tggm.mf_cycles must be at least 1");
    need(c.balls >= 0 && c.frame_size >= 1 && c.frames >= 1 && c.train_sequences >= 0 && c.test_sequences >= 0,
         "balls: counts must be non-negative and sizes positive");
    need(c.radius > 0.0 && c.radius < c.frame_size / 2.0, "balls.radius must lie in (0, frame_size / 2)");
    need(c.speed >= 0.0, "balls.speed must be non-negative");
    if (check_paths) {
        namespace fs = std::filesystem;
        need(!c.train.empty(), "data.train is required");
        if (!c.train.empty()) need(fs::exists(resolve_data_path(c.train)), "data.train not found: " + c.train);
        if (c.model != ModelChoice::tggm) {
            need(!c.test.empty(), "data.test is required for " + to_string(c.model));
            if (!c.test.empty()) need(fs::exists(resolve_data_path(c.test)), "data.test not found: " + c.test);
        }
    }
    if (!errs.empty()) {
        std::string msg = "invalid configuration:";
        for (const auto& e : errs) msg += "\n  - " + e;
        throw ConfigError(msg);
    }
    return c;
}

inline detail::Tree read_config_tree(const std::string& path) {
    detail::Tree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    return tree;
}

inline RunConfig load_config(const std::string& path, const std::vector<std::string>& overrides = {},
                             bool check_paths = true) {
    detail::Tree tree = read_config_tree(path);
    apply_overrides(tree, overrides);
    return config_from_tree(tree, check_paths);
}

/// Every key with its effective value; reading it back yields the same RunConfig.
inline detail::Tree config_to_tree(const RunConfig& c) {
    using detail::format_real;
    detail::Tree t;
    t.put("run.model", to_string(c.model));
    if (c.seed) t.put("run.seed", *c.seed);
    t.put("run.epochs", c.epochs);
    t.put("run.output_dir", c.output_dir);
    t.put("run.checkpoint_every", c.checkpoint_every);
    t.put("run.eval_every", c.eval_every);
    t.put("data.train", c.train);
    t.put("data.test", c.test);
    t.put("data.binarize", c.binarize);
    t.put("data.threshold", format_real(c.threshold));
    std::string cols;
    for (std::size_t i = 0; i < c.target_columns.size(); ++i)
        cols += (i ? "," : "") + std::to_string(c.target_columns[i]);
    t.put("data.target_columns", cols);
    t.put("data.split_seed", c.split_seed);
    t.put("data.test_fraction", format_real(c.test_fraction));
    t.put("data.has_header", c.has_header ? "true" : "false");
    t.put("model.hidden", c.hidden);
    t.put("model.trunc_mode", c.trunc_mode == TruncationMode::shared ? "shared" : "per_unit");
    t.put("model.trunc_lower", format_real(c.trunc_lower));
    t.put("model.trunc_upper", format_real(c.trunc_upper));
    t.put("model.learn_lower", c.learn_lower ? "true" : "false");
    t.put("model.learn_upper", c.learn_upper ? "true" : "false");
    t.put("model.weight_sd", format_real(c.weight_sd));
    t.put("model.learn_d", c.learn_d ? "true" : "false");
    t.put("model.sigma2", format_real(c.sigma2));
    t.put("model.learn_sigma2", c.learn_sigma2 ? "true" : "false");
    t.put("model.separate_initial", c.separate_initial ? "true" : "false");
    t.put("optimizer.kind", c.optimizer.kind == OptimizerKind::rmsprop ? "rmsprop" : "sgd-momentum");
    t.put("optimizer.learning_rate", format_real(c.optimizer.learning_rate));
    t.put("optimizer.decay", format_real(c.optimizer.decay));
    t.put("optimizer.batch_size", c.optimizer.batch_size);
    t.put("optimizer.trunc_lr_start", format_real(c.optimizer.trunc.start));
    t.put("optimizer.trunc_lr_end", format_real(c.optimizer.trunc.end));
    t.put("optimizer.trunc_horizon", c.trunc_horizon);
    t.put("cd.k", c.cd_k);
    t.put("cd.persistent", c.persistent ? "true" : "false");
    t.put("ais.temps", c.ais_temps);
    t.put("ais.chains", c.ais_chains);
    t.put("ais.runs", c.ais_runs);
    t.put("tggm.mf_cycles", c.mf_cycles);
    t.put("balls.balls", c.balls);
    t.put("balls.frame_size", c.frame_size);
    t.put("balls.frames", c.frames);
    t.put("balls.radius", format_real(c.radius));
    t.put("balls.speed", format_real(c.speed));
    t.put("balls.train_sequences", c.train_sequences);
    t.put("balls.test_sequences", c.test_sequences);
    return t;
}

inline void write_config_snapshot(const std::string& path, const RunConfig& c) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw ConfigError("cannot write '" + path + "'");
    boost::property_tree::ini_parser::write_ini(out, config_to_tree(c));
}

}  // namespace trug

#endif  // TRUG_CONFIG_HPP
