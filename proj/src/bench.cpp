#include "c2f/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>

namespace c2f {

BenchOp bench_op_from_name(const std::string& name) {
    if (name == "modulation") return BenchOp::Modulation;
    if (name == "attention") return BenchOp::Attention;
    throw ConfigError("unknown bench op '" + name + "' (valid: modulation, attention)");
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<BenchRow> bench_layer(BenchOp op, std::int64_t channels, int kernel,
                                  const std::vector<std::int64_t>& resolutions, int reps,
                                  std::uint64_t seed) {
    if (reps < 1) throw ConfigError("bench: reps must be positive");
    using clock = std::chrono::steady_clock;
    Rng rng(seed);
    ConvModParams<float> mod =
        ConvModParams<float>::init(channels, kernel, true, true, rng);
    AttentionParams<float> attn = AttentionParams<float>::init(channels, true, rng);

    ComplexityTable analytic = complexity_compare(channels, kernel, resolutions);

    std::vector<BenchRow> rows;
    for (std::size_t ri = 0; ri < resolutions.size(); ++ri) {
        const std::int64_t r = resolutions[ri];
        BenchRow row;
        row.resolution = r;
        row.analytic_macs = op == BenchOp::Modulation ? analytic.rows[ri].modulation_macs
                                                      : analytic.rows[ri].attention_macs;
        std::vector<double> times;
        volatile float sink = 0.0f;
        for (int rep = 0; rep < reps; ++rep) {
            if (op == BenchOp::Modulation) {
                Tensor<float> x = Tensor<float>::randn({1, channels, r, r}, rng);
                const auto t0 = clock::now();
                Tensor<float> y = conv_mod_forward<float>(nullptr, x, mod,
                                                          FusionStrategy::Hadamard);
                const auto t1 = clock::now();
                sink = sink + y.data()[0];
                times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            } else {
                Tensor<float> x = Tensor<float>::randn({r * r, channels}, rng);
                const auto t0 = clock::now();
                Tensor<float> y = self_attention_infer<float>(x, attn);
                const auto t1 = clock::now();
                sink = sink + y.data()[0];
                times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
            }
        }
        (void)sink;
        row.wall_ms = median(times);
        rows.push_back(row);
    }
    return rows;
}

std::string bench_to_csv(const std::vector<BenchRow>& rows) {
    std::string out = "resolution,analytic_macs,wall_ms\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%lld,%lld,%.6g\n", static_cast<long long>(r.resolution),
                      r.analytic_macs, r.wall_ms);
        out += buf;
    }
    return out;
}

}  // namespace c2f
