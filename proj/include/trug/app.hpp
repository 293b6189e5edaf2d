#ifndef TRUG_APP_HPP
#define TRUG_APP_HPP

// Run-level operations behind the command-line tool: train, eval, sample and gen-data.
// A run directory holds config.ini (resolved snapshot), checkpoint.trgc and metrics.jsonl.

#include "ais.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "metrics.hpp"
#include "train.hpp"

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace trug {

struct RunPaths {
    std::filesystem::path dir;

    explicit RunPaths(const std::string& output_dir) : dir(output_dir) {}
    std::string config() const { return (dir / "config.ini").string(); }
    std::string checkpoint() const { return (dir / "checkpoint.trgc").string(); }
    std::string metrics() const { return (dir / "metrics.jsonl").string(); }
};

/// Writes through a temporary file so a crash mid-write leaves the previous checkpoint intact.
inline void save_checkpoint_atomic(const std::string& path, const Checkpoint& ck) {
    const std::string tmp = path + ".tmp";
    save_checkpoint(tmp, ck);
    std::filesystem::rename(tmp, path);
}

inline Binarization binarization_of(const RunConfig& c) {
    return c.binarize == "stochastic" ? Binarization::stochastic : Binarization::threshold;
}

inline SequenceBatch load_sequences(const std::string& path) {
    BitmapSet set = read_bitmaps(resolve_data_path(path));
    SequenceBatch batch;
    batch.sequences = std::move(set.items);
    return batch;
}

inline TrainOptions train_options(const RunConfig& c, long steps_per_epoch_) {
    TrainOptions opt;
    opt.optimizer = c.optimizer;
    opt.optimizer.trunc.horizon = c.trunc_horizon > 0 ? c.trunc_horizon : std::max(1L, c.epochs * steps_per_epoch_);
    opt.cd_k = c.cd_k;
    opt.persistent = c.persistent;
    opt.learn_d = c.learn_d;
    opt.mf_cycles = c.mf_cycles;
    return opt;
}

namespace detail {

inline void add_trunc_summary(MetricRecord& rec, const TrugParams& trug) {
    rec["trunc_lower_mean"] = trug.lower.mean();
    rec["trunc_upper_mean"] = trug.upper.mean();
}

inline Vector target_scale(const RegressionDataset& d) { return d.target_stats.std; }

/// Shared epoch loop: checkpoint at epoch 0 and every `checkpoint_every`, metrics every `eval_every`.
template <class Model, class EpochFn, class MetricsFn>
void run_epochs(const RunConfig& c, Model& model, EpochFn&& epoch_fn, MetricsFn&& metrics_fn, OptimizerState& state,
                std::ostream& log) {
    const RunPaths paths(c.output_dir);
    MetricsLog metrics(paths.metrics());
    save_checkpoint_atomic(paths.checkpoint(), to_checkpoint(model));
    for (int epoch = 1; epoch <= c.epochs; ++epoch) {
        try {
            epoch_fn();
        } catch (const NumericalError& e) {
            metrics.write(state.step, {{"epoch", long{epoch}}, {"event", std::string("numerical_failure")},
                                       {"message", std::string(e.what())}});
            throw;
        }
        const bool last = epoch == c.epochs;
        if (epoch % c.checkpoint_every == 0 || last) save_checkpoint_atomic(paths.checkpoint(), to_checkpoint(model));
        if (epoch % c.eval_every == 0 || last) {
            MetricRecord rec = metrics_fn();
            rec["epoch"] = long{epoch};
            add_trunc_summary(rec, model.trug);
            metrics.write(state.step, rec);
            log << "epoch " << epoch << " step " << state.step << '\n';
        }
    }
}

}  // namespace detail

/// Trains the configured model. Throws NumericalError on divergence; the last good checkpoint stays on disk.
inline void train_run(const RunConfig& c, std::ostream& log = std::cout) {
    std::filesystem::create_directories(c.output_dir);
    write_config_snapshot(RunPaths(c.output_dir).config(), c);
    Rng rng(*c.seed);
    OptimizerState state;

    switch (c.model) {
        case ModelChoice::rbm: {
            const auto train = load_idx_images(resolve_data_path(c.train), binarization_of(c), c.threshold, rng);
            const auto test = load_idx_images(resolve_data_path(c.test), binarization_of(c), c.threshold, rng);
            RbmModel model = initialize(train.images.cols(), c.hidden, c.trug_params(), rng, c.weight_sd);
            const TrainOptions opt = train_options(c, steps_per_epoch(train.images.rows(), c.optimizer.batch_size));
            GibbsChain chain;
            detail::run_epochs(
                c, model, [&] { train_rbm_epoch(model, train.images, opt, state, rng, &chain); },
                [&] {
                    return MetricRecord{{"train_reconstruction", reconstruction_error(model, train.images)},
                                        {"test_reconstruction", reconstruction_error(model, test.images)}};
                },
                state, log);
            break;
        }
        case ModelChoice::trbm: {
            const SequenceBatch train = load_sequences(c.train), test = load_sequences(c.test);
            train.validate(2);
            test.validate(2);
            TrbmModel model =
                initialize_trbm(train.width(), c.hidden, c.trug_params(), rng, c.weight_sd, c.separate_initial);
            const TrainOptions opt =
                train_options(c, steps_per_epoch(static_cast<Eigen::Index>(train.size()), c.optimizer.batch_size));
            detail::run_epochs(
                c, model, [&] { train_trbm_epoch(model, train, opt, state, rng); },
                [&] { return MetricRecord{{"test_prediction_error", prediction_error(model, test)}}; }, state, log);
            break;
        }
        case ModelChoice::tggm: {
            const RegressionSplit split = load_regression_csv(resolve_data_path(c.train), c.target_columns,
                                                              c.split_seed, c.test_fraction, c.has_header);
            const RegressionDataset &tr = split.train, &te = split.test;
            TggmModel model =
                initialize_tggm(tr.inputs.cols(), c.hidden, tr.targets.cols(), c.trug_params(), rng, c.weight_sd,
                                c.sigma2);
            model.learn_sigma2 = c.learn_sigma2;
            const TrainOptions opt = train_options(c, steps_per_epoch(tr.inputs.rows(), c.optimizer.batch_size));
            detail::run_epochs(
                c, model, [&] { train_tggm_epoch(model, tr.inputs, tr.targets, opt, state, rng); },
                [&] {
                    return MetricRecord{
                        {"train_rmse", rmse(model, tr.inputs, tr.targets, detail::target_scale(tr))},
                        {"test_rmse", rmse(model, te.inputs, te.targets, detail::target_scale(tr))},
                        {"sigma2", model.sigma2}};
                },
                state, log);
            break;
        }
    }
}

/// Evaluates a checkpoint on the configured test data: AIS log-probability (rbm), next-frame
/// prediction error (trbm) or de-standardised RMSE (tggm).
inline MetricRecord eval_run(const RunConfig& c, const std::string& checkpoint_path) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    Rng rng(*c.seed);
    MetricRecord rec{{"event", std::string("eval")}, {"model", to_string(ck.kind)}};
    switch (ck.kind) {
        case ModelKind::rbm: {
            const RbmModel model = rbm_from_checkpoint(ck);
            const auto train = load_idx_images(resolve_data_path(c.train), binarization_of(c), c.threshold, rng);
            const auto test = load_idx_images(resolve_data_path(c.test), binarization_of(c), c.threshold, rng);
            if (test.images.cols() != model.visible()) throw ConfigError("test images do not match the checkpoint");
            AisConfig ais;
            ais.n_temps = c.ais_temps;
            ais.n_chains = c.ais_chains;
            ais.base_bias = base_bias_from_data(train.images);
            const TestLogProb lp = test_log_prob(ais, model, test.images, rng, c.ais_runs);
            double ess = 0.0;
            for (const auto& r : lp.runs) ess += r.ess / static_cast<double>(lp.runs.size());
            rec["test_log_prob"] = lp.mean;
            rec["log_z"] = lp.log_z;
            rec["log_z_spread"] = lp.log_z_spread;
            rec["ess"] = ess;
            break;
        }
        case ModelKind::trbm: {
            const TrbmModel model = trbm_from_checkpoint(ck);
            const SequenceBatch test = load_sequences(c.test);
            test.validate(2);
            if (test.width() != model.visible()) throw ConfigError("test sequences do not match the checkpoint");
            rec["test_prediction_error"] = prediction_error(model, test);
            break;
        }
        case ModelKind::tggm: {
            const TggmModel model = tggm_from_checkpoint(ck);
            const RegressionSplit split = load_regression_csv(resolve_data_path(c.train), c.target_columns,
                                                              c.split_seed, c.test_fraction, c.has_header);
            if (split.test.inputs.cols() != model.inputs() || split.test.targets.cols() != model.outputs())
                throw ConfigError("regression data does not match the checkpoint");
            rec["test_rmse"] = rmse(model, split.test.inputs, split.test.targets, split.train.target_stats.std);
            rec["train_rmse"] = rmse(model, split.train.inputs, split.train.targets, split.train.target_stats.std);
            break;
        }
    }
    return rec;
}

/// '#' for on, '.' for off; frames of a sequence side by side, items separated by a blank line.
inline std::string render_grid(const BitmapSet& set) {
    std::string out;
    for (const Matrix& item : set.items) {
        for (int r = 0; r < set.height; ++r) {
            for (Eigen::Index f = 0; f < item.rows(); ++f) {
                if (f) out += ' ';
                for (int col = 0; col < set.width; ++col) out += item(f, Eigen::Index{r} * set.width + col) > 0.5 ? '#' : '.';
            }
            out += '\n';
        }
        out += '\n';
    }
    return out;
}

struct SampleRequest {
    int count = 16;
    int gibbs_steps = 1000;  // rbm chain length, or sweeps per frame for trbm
    int length = 30;         // trbm frames
};

/// Draws model samples. TGGM has no generative sampler and is rejected with ConfigError.
inline BitmapSet sample_run(const RunConfig& c, const std::string& checkpoint_path, const SampleRequest& req) {
    require(req.count >= 0 && req.gibbs_steps >= 1 && req.length >= 1, "sample: invalid request");
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    Rng rng(*c.seed);
    BitmapSet set;
    switch (ck.kind) {
        case ModelKind::rbm: {
            const RbmModel model = rbm_from_checkpoint(ck);
            const auto shape = parse_idx_images(detail::read_file(resolve_data_path(c.train)));
            if (Eigen::Index{shape.width} * shape.height != model.visible())
                throw ConfigError("training images do not match the checkpoint");
            set.width = shape.width;
            set.height = shape.height;
            const Matrix x = sample_fantasy(model, req.gibbs_steps, req.count, rng);
            for (Eigen::Index r = 0; r < x.rows(); ++r) set.items.push_back(x.row(r));
            break;
        }
        case ModelKind::trbm: {
            const TrbmModel model = trbm_from_checkpoint(ck);
            const BitmapSet shape = read_bitmaps(resolve_data_path(c.train));
            if (Eigen::Index{shape.width} * shape.height != model.visible())
                throw ConfigError("training sequences do not match the checkpoint");
            set.width = shape.width;
            set.height = shape.height;
            set.items = generate_sequences(model, req.length, req.count, req.gibbs_steps, rng).sequences;
            break;
        }
        case ModelKind::tggm: throw ConfigError("sample: tggm is a conditional model and has no sampler");
    }
    return set;
}

/// Writes bouncing-ball training and test sets to data.train / data.test.
inline void gen_data_run(const RunConfig& c) {
    require(!c.train.empty() && !c.test.empty(), "gen-data: data.train and data.test are required");
    BouncingBallConfig bc;
    bc.n_balls = c.balls;
    bc.frame_size = c.frame_size;
    bc.n_frames = c.frames;
    bc.radius = c.radius;
    bc.speed = c.speed;
    auto write = [&](const std::string& path, int count, std::uint64_t seed) {
        bc.seed = seed;
        bc.n_sequences = count;
        const std::filesystem::path p = resolve_data_path(path);
        if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
        write_bitmaps(p.string(), {c.frame_size, c.frame_size, generate_bouncing_balls(bc)});
    };
    write(c.train, c.train_sequences, *c.seed);
    write(c.test, c.test_sequences, *c.seed + 1);
}

}  // namespace trug

#endif  // TRUG_APP_HPP
