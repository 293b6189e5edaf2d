// trug: train, evaluate and sample models with truncated Gaussian hidden units.
//
// Exit codes: 0 success, 1 other failure, 2 configuration error, 3 numerical failure.

#include <trug/app.hpp>

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace {

struct Common {
    std::string config;
    std::vector<std::string> overrides;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("-c,--config", c.config, "INI configuration file")->required()->check(CLI::ExistingFile);
    cmd->add_option("--set", c.overrides, "override a value, section.key=value")->take_all();
}

std::string checkpoint_or_default(const std::string& given, const trug::RunConfig& cfg) {
    return given.empty() ? trug::RunPaths(cfg.output_dir).checkpoint() : given;
}

void print_record(const trug::MetricRecord& rec) {
    std::cout << trug::record_to_json(0, 0.0, rec).dump() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Train and evaluate models with truncated Gaussian hidden units"};
    app.require_subcommand(1);

    Common train_opts, eval_opts, sample_opts, gen_opts;
    auto* train = app.add_subcommand("train", "train a model and write a run directory");
    add_common(train, train_opts);

    std::string eval_ckpt;
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint on the test data");
    add_common(eval, eval_opts);
    eval->add_option("--checkpoint", eval_ckpt, "checkpoint file (default: <output_dir>/checkpoint.trgc)");

    std::string sample_ckpt, sample_out;
    trug::SampleRequest req;
    auto* sample = app.add_subcommand("sample", "draw samples from a trained model");
    add_common(sample, sample_opts);
    sample->add_option("--checkpoint", sample_ckpt, "checkpoint file (default: <output_dir>/checkpoint.trgc)");
    sample->add_option("-o,--out", sample_out, "output bitmap file; a text rendering goes next to it")->required();
    sample->add_option("-n,--count", req.count, "number of samples")->capture_default_str();
    sample->add_option("--gibbs-steps", req.gibbs_steps, "Gibbs sweeps per sample (per frame for trbm)")
        ->capture_default_str();
    sample->add_option("--length", req.length, "frames per generated sequence")->capture_default_str();

    auto* gen = app.add_subcommand("gen-data", "generate bouncing-ball sequences");
    add_common(gen, gen_opts);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*train) {
            const trug::RunConfig cfg = trug::load_config(train_opts.config, train_opts.overrides);
            trug::train_run(cfg, std::cout);
            std::cout << "checkpoint: " << trug::RunPaths(cfg.output_dir).checkpoint() << '\n';
        } else if (*eval) {
            const trug::RunConfig cfg = trug::load_config(eval_opts.config, eval_opts.overrides);
            const trug::MetricRecord rec = trug::eval_run(cfg, checkpoint_or_default(eval_ckpt, cfg));
            print_record(rec);
            if (std::filesystem::exists(cfg.output_dir)) {
                trug::MetricsLog log(trug::RunPaths(cfg.output_dir).metrics());
                log.write(0, rec);
            }
        } else if (*sample) {
            const trug::RunConfig cfg = trug::load_config(sample_opts.config, sample_opts.overrides);
            const trug::BitmapSet set = trug::sample_run(cfg, checkpoint_or_default(sample_ckpt, cfg), req);
            trug::write_bitmaps(sample_out, set);
            std::ofstream(sample_out + ".txt") << trug::render_grid(set);
            std::cout << "wrote " << set.items.size() << " samples to " << sample_out << '\n';
        } else if (*gen) {
            const trug::RunConfig cfg = trug::load_config(gen_opts.config, gen_opts.overrides, false);
            trug::gen_data_run(cfg);
            std::cout << "wrote " << trug::resolve_data_path(cfg.train) << " and " << trug::resolve_data_path(cfg.test)
                      << '\n';
        }
    } catch (const trug::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << '\n';
        return 2;
    } catch (const trug::NumericalError& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
