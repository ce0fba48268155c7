// bdlab — desk-scale backdoor laboratory.
//
// Pipeline phases (each resumable, artifacts land under --out):
//   train   synthesize data, train the clean baseline and the poisoned models
//   probe   estimate backdoor directions, interpolation curves, head projections
//   attack  PGD / targeted PGD / feature-guided attacks across budgets
//   defend  trigger-aware unlearning (known + discovered trigger) and
//           attention-distillation repair
//   report  before/after defense report, reference fixtures, perceptual scores
//   run     all of the above in order
//
// import-idx converts an external IDX image/label pair into the native
// dataset container for ad-hoc experiments.

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bdlab/config.hpp"
#include "bdlab/dataset.hpp"
#include "bdlab/error.hpp"
#include "bdlab/harness.hpp"

namespace {

bdlab::Split parse_split(const std::string& name) {
    for (bdlab::Split s : {bdlab::Split::train, bdlab::Split::val, bdlab::Split::test})
        if (name == bdlab::to_string(s)) return s;
    bdlab::fail(bdlab::ErrorKind::ConfigParseError, "unknown split '" + name + "'");
}

struct CommonArgs {
    std::string config_path = "configs/desk.cfg";
    std::string out_dir = "out";
    int threads = 1;
    std::string seed;                    // optional override of run.seed
    std::vector<std::string> overrides;  // section.key=value, applied in order
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("-c,--config", args.config_path, "experiment config file")
        ->capture_default_str();
    cmd->add_option("-o,--out", args.out_dir, "artifact directory")->capture_default_str();
    cmd->add_option("-j,--threads", args.threads, "worker threads")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    cmd->add_option("--seed", args.seed, "override the root seed");
    cmd->add_option("--set", args.overrides,
                    "override a config value as section.key=value (repeatable)");
}

bdlab::ExperimentConfig resolve_config(const CommonArgs& args) {
    bdlab::ExperimentConfig cfg = bdlab::load_config(args.config_path);
    if (!args.seed.empty()) bdlab::apply_override(cfg, "run.seed=" + args.seed);
    for (const std::string& kv : args.overrides) bdlab::apply_override(cfg, kv);
    bdlab::validate_config(cfg);
    return cfg;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"bdlab — backdoor implants, feature-space probes, guided attacks, repairs"};
    app.require_subcommand(1);

    CommonArgs args;
    const char* phase_names[5] = {"train", "probe", "attack", "defend", "report"};
    const char* phase_help[5] = {
        "synthesize data and train the clean + poisoned models",
        "estimate backdoor directions and probe the feature space",
        "run PGD, targeted PGD and feature-guided attacks",
        "unlearn triggers and distill against a clean teacher",
        "write the before/after defense report",
    };
    for (int i = 0; i < 5; ++i) add_common(app.add_subcommand(phase_names[i], phase_help[i]), args);
    add_common(app.add_subcommand("run", "run every phase in order"), args);

    std::string idx_images, idx_labels, idx_split = "train", idx_out;
    CLI::App* import_cmd =
        app.add_subcommand("import-idx", "convert an IDX image/label pair to a dataset file");
    import_cmd->add_option("--images", idx_images, "IDX image file")->required();
    import_cmd->add_option("--labels", idx_labels, "IDX label file")->required();
    import_cmd->add_option("--split", idx_split, "split tag: train, val or test")
        ->capture_default_str();
    import_cmd->add_option("--out-file", idx_out, "destination dataset file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (import_cmd->parsed()) {
            const bdlab::Dataset ds =
                bdlab::import_idx(idx_images, idx_labels, parse_split(idx_split));
            bdlab::save_dataset(ds, idx_out);
            std::printf("imported %zu samples (%d classes) -> %s\n", ds.size(), ds.num_classes,
                        idx_out.c_str());
            return 0;
        }

        const bdlab::ExperimentConfig cfg = resolve_config(args);
        bdlab::RunOptions opts;
        opts.out_dir = args.out_dir;
        opts.threads = args.threads;

        const CLI::App* sub = app.get_subcommands().front();
        if (sub->get_name() == "run") {
            bdlab::run_all(cfg, opts);
        } else {
            bdlab::run_phase(bdlab::parse_phase(sub->get_name()), cfg, opts);
        }
        std::printf("%s: done (config %s, out %s)\n", sub->get_name().c_str(),
                    bdlab::config_hash(cfg).c_str(), args.out_dir.c_str());
        return 0;
    } catch (const bdlab::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return bdlab::exit_code(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 10;
    }
}
