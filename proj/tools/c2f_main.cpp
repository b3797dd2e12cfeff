// Command-line front end: model accounting, gradient verification, scaling
// benchmarks, desk-scale training, fusion ablations and receptive-field
// probes. Exit codes: 0 success, 1 verification failure, 2 usage/config
// error, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "c2f/analysis.hpp"
#include "c2f/bench.hpp"
#include "c2f/checkpoint.hpp"
#include "c2f/kernels.hpp"
#include "c2f/run_config.hpp"
#include "c2f/verify.hpp"

namespace {

using namespace c2f;

std::vector<std::int64_t> parse_int_list(const std::string& csv) {
    std::vector<std::int64_t> out;
    std::size_t pos = 0;
    while (pos < csv.size()) {
        std::size_t next = csv.find(',', pos);
        if (next == std::string::npos) next = csv.size();
        out.push_back(std::stoll(csv.substr(pos, next - pos)));
        pos = next + 1;
    }
    if (out.empty()) throw ConfigError("expected a comma-separated integer list");
    return out;
}

void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write file: " + path);
    out << text;
    if (!out) throw IoError("short write: " + path);
}

ModelConfig config_for_summarize(const std::string& variant, const std::string& config_path) {
    if (!config_path.empty()) {
        if (!std::filesystem::exists(config_path))
            throw ConfigError("config file not found: " + config_path);
        return run_config_from_file(config_path).model;
    }
    return ModelConfig::preset(variant);
}

int cmd_summarize(const std::string& variant, const std::string& config_path, std::int64_t res_h,
                  std::int64_t res_w, const std::string& csv_path) {
    const ModelConfig cfg = config_for_summarize(variant, config_path);
    const FlopReport report = count_macs(cfg, res_h, res_w);
    std::printf("model: %s (%s, %d stages, %lld blocks, kernel %dx%d)\n",
                variant_name(cfg.variant).c_str(), cfg.isotropic ? "isotropic" : "pyramid",
                cfg.isotropic ? 1 : 4, static_cast<long long>(cfg.total_blocks()),
                cfg.kernel_size, cfg.kernel_size);
    std::printf("resolution: %lldx%lld\n\n", static_cast<long long>(res_h),
                static_cast<long long>(res_w));
    std::printf("%-36s %14s %16s\n", "layer", "params", "macs");
    for (const auto& e : report.entries) {
        std::printf("%-36s %14lld %16lld\n", e.layer.c_str(), e.params, e.macs);
    }
    std::printf("%-36s %14lld %16lld\n", "TOTAL", report.total_params(), report.total_macs());
    const double macs = static_cast<double>(report.total_macs());
    std::printf("\ntotal params: %.4g M   total macs: %.4g %s\n",
                static_cast<double>(report.total_params()) / 1e6,
                macs >= 1e9 ? macs / 1e9 : macs / 1e6, macs >= 1e9 ? "G" : "M");
    if (!csv_path.empty()) write_text_file(csv_path, report.to_csv());
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, int rounds, bool inject_bug) {
    debug::inject_backward_bug = inject_bug;
    const auto results = run_gradcheck_suite(seed, rounds);
    bool all_pass = true;
    std::printf("gradient check (f64, %d seed%s starting at %llu)\n", rounds,
                rounds == 1 ? "" : "s", static_cast<unsigned long long>(seed));
    for (const auto& r : results) {
        std::printf("%-28s max_rel_err %.3e  threshold %.0e  %s\n", r.name.c_str(),
                    r.max_rel_err, r.threshold, r.pass() ? "ok" : "FAIL");
        all_pass = all_pass && r.pass();
    }
    std::printf("%s\n", all_pass ? "all checks passed" : "verification FAILED");
    return all_pass ? 0 : 1;
}

int cmd_bench(const std::string& op_name, std::int64_t channels, int kernel,
              const std::string& resolutions, int reps, std::uint64_t seed,
              const std::string& csv_path) {
    if (reps < 5) throw ConfigError("bench: --reps must be at least 5");
    const BenchOp op = bench_op_from_name(op_name);
    const auto rows = bench_layer(op, channels, kernel, parse_int_list(resolutions), reps, seed);
    const std::string csv = bench_to_csv(rows);
    std::fputs(csv.c_str(), stdout);
    if (!csv_path.empty()) write_text_file(csv_path, csv);
    return 0;
}

template <typename T>
int train_with_dtype(const RunConfig& rc, const std::string& out_dir) {
    SynthDataset data;
    data.num_classes = rc.model.num_classes;
    data.image_size = rc.train.image_size;
    data.train_size = rc.train.train_size;
    data.val_size = rc.train.val_size;
    data.seed = rc.train.seed;

    Rng init_rng = Rng(rc.train.seed).fork(0);
    Model<T> model = build_model<T>(rc.model, init_rng);
    const auto history = train_loop(model, rc.train, data);

    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir + "/metrics.csv", history_to_csv(history));
    checkpoint_save(model, out_dir + "/checkpoint.c2f");
    const auto& last = history.back();
    std::printf("trained %lld steps: loss %.4f train_acc %.4f val_acc %.4f\n",
                static_cast<long long>(last.step), last.loss, last.train_acc, last.val_acc);
    std::printf("wrote %s/metrics.csv and %s/checkpoint.c2f\n", out_dir.c_str(), out_dir.c_str());
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& out_dir,
              const std::string& dtype) {
    if (!std::filesystem::exists(config_path))
        throw ConfigError("config file not found: " + config_path);
    const RunConfig rc = run_config_from_file(config_path);
    if (dtype == "f64") return train_with_dtype<double>(rc, out_dir);
    return train_with_dtype<float>(rc, out_dir);
}

int cmd_ablate(const std::string& config_path, const std::string& strategies_csv,
               const std::string& seeds_csv, const std::string& out_path) {
    if (!std::filesystem::exists(config_path))
        throw ConfigError("config file not found: " + config_path);
    const RunConfig rc = run_config_from_file(config_path);
    std::vector<FusionStrategy> strategies;
    {
        std::size_t pos = 0;
        const std::string& s = strategies_csv;
        while (pos < s.size()) {
            std::size_t next = s.find(',', pos);
            if (next == std::string::npos) next = s.size();
            strategies.push_back(fusion_from_name(s.substr(pos, next - pos)));
            pos = next + 1;
        }
    }
    std::vector<std::uint64_t> seeds;
    for (auto v : parse_int_list(seeds_csv)) seeds.push_back(static_cast<std::uint64_t>(v));
    const auto rows = ablate_fusion(rc.model, rc.train, strategies, seeds);
    const std::string csv = ablation_to_csv(rows);
    std::fputs(csv.c_str(), stdout);
    if (!out_path.empty()) write_text_file(out_path, csv);
    return 0;
}

int cmd_probe_rf(const std::string& layer, int kernel, std::int64_t size, std::int64_t pos_h,
                 std::int64_t pos_w, std::uint64_t seed) {
    RfProbe probe;
    if (layer == "mod") {
        if (size <= 0) size = 2 * kernel + 9;
        probe = receptive_field_probe_mod(kernel, 1, size, pos_h, pos_w, seed);
    } else if (layer == "mod2") {
        if (size <= 0) size = 4 * kernel + 7;
        probe = receptive_field_probe_mod(kernel, 2, size, pos_h, pos_w, seed);
    } else if (layer == "block") {
        if (size <= 0) size = 2 * (kernel + 2) + 7;
        probe = receptive_field_probe_block(kernel, size, pos_h, pos_w, seed);
    } else {
        throw ConfigError("unknown layer selector '" + layer + "' (valid: mod, mod2, block)");
    }
    std::fputs(probe.ascii().c_str(), stdout);
    std::printf("output position (%lld,%lld), input %lldx%lld\n",
                static_cast<long long>(probe.out_h), static_cast<long long>(probe.out_w),
                static_cast<long long>(probe.input_h), static_cast<long long>(probe.input_w));
    std::printf("support bbox rows [%lld,%lld] cols [%lld,%lld] -> %lldx%lld\n",
                static_cast<long long>(probe.h0), static_cast<long long>(probe.h1),
                static_cast<long long>(probe.w0), static_cast<long long>(probe.w1),
                static_cast<long long>(probe.support_h()),
                static_cast<long long>(probe.support_w()));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"conv2former: convolutional modulation networks on a minimal autodiff engine"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    std::string dtype = "f32";
    std::string global_config;
    app.add_option("--seed", seed, "global RNG seed");
    app.add_option("--dtype", dtype, "numeric precision")
        ->check(CLI::IsMember({"f32", "f64"}));
    app.add_option("--config", global_config, "run config JSON path");

    auto* sum = app.add_subcommand("summarize", "per-layer parameter and MAC accounting");
    std::string sum_variant = "T";
    std::vector<std::int64_t> sum_res = {224, 224};
    std::string sum_csv;
    sum->add_option("--variant", sum_variant, "named variant (N,T,S,B,L,IS,IB)");
    sum->add_option("--resolution", sum_res, "input height and width")->expected(2);
    sum->add_option("--csv", sum_csv, "also write the report as CSV");

    auto* gc = app.add_subcommand("gradcheck", "finite-difference verification of every op");
    int gc_rounds = 3;
    bool gc_inject = false;
    gc->add_option("--rounds", gc_rounds, "random seeds per op");
    gc->add_flag("--inject-bug", gc_inject,
                 "negative control: perturb one backward rule and expect failure");

    auto* bench = app.add_subcommand("bench", "modulation vs attention scaling");
    std::string bench_op = "modulation";
    std::int64_t bench_channels = 64;
    int bench_kernel = 11;
    std::string bench_res = "56,112,224";
    int bench_reps = 5;
    std::string bench_csv;
    bench->add_option("--op", bench_op, "modulation | attention");
    bench->add_option("--channels", bench_channels, "channel width");
    bench->add_option("--kernel", bench_kernel, "modulation kernel size");
    bench->add_option("--resolutions", bench_res, "comma-separated square sides");
    bench->add_option("--reps", bench_reps, "timing repetitions (median reported)");
    bench->add_option("--csv", bench_csv, "also write CSV to a file");

    auto* train = app.add_subcommand("train", "train on the synthetic dataset");
    std::string train_out = "out";
    train->add_option("--out", train_out, "output directory");

    auto* ablate = app.add_subcommand("ablate", "fusion-strategy ablation");
    std::string ab_strategies =
        "hadamard,elementwise_sum,sigmoid_hadamard,l1norm_hadamard,linearnorm_hadamard";
    std::string ab_seeds = "1,2,3,4,5";
    std::string ab_out;
    ablate->add_option("--strategies", ab_strategies, "comma-separated strategy names");
    ablate->add_option("--seeds", ab_seeds, "comma-separated seeds (>= 3)");
    ablate->add_option("--out", ab_out, "also write CSV to a file");

    auto* probe = app.add_subcommand("probe-rf", "receptive-field probe");
    std::string probe_layer = "mod";
    int probe_kernel = 11;
    std::int64_t probe_size = 0;
    std::vector<std::int64_t> probe_pos = {-1, -1};
    probe->add_option("--layer", probe_layer, "mod | mod2 | block");
    probe->add_option("--kernel", probe_kernel, "kernel size");
    probe->add_option("--size", probe_size, "input side (default: auto)");
    probe->add_option("--position", probe_pos, "output position h w (default: center)")
        ->expected(2);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        app.exit(e);
        return 2;
    }

    try {
        if (sum->parsed())
            return cmd_summarize(sum_variant, global_config, sum_res[0], sum_res[1], sum_csv);
        if (gc->parsed()) return cmd_gradcheck(seed, gc_rounds, gc_inject);
        if (bench->parsed())
            return cmd_bench(bench_op, bench_channels, bench_kernel, bench_res, bench_reps, seed,
                             bench_csv);
        if (train->parsed()) return cmd_train(global_config, train_out, dtype);
        if (ablate->parsed()) return cmd_ablate(global_config, ab_strategies, ab_seeds, ab_out);
        if (probe->parsed())
            return cmd_probe_rf(probe_layer, probe_kernel, probe_size, probe_pos[0], probe_pos[1],
                                seed);
    } catch (const IoError& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const std::filesystem::filesystem_error& e) {
        std::fprintf(stderr, "io error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 2;
}
