#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "c2f/analysis.hpp"

namespace c2f {

struct BenchRow {
    std::int64_t resolution = 0;
    long long analytic_macs = 0;
    double wall_ms = 0.0;  // median over the requested repetitions
};

enum class BenchOp { Modulation, Attention };

BenchOp bench_op_from_name(const std::string& name);  // ConfigError on unknown

/// Times one f32 layer forward (no tape) per resolution: a convolutional
/// modulation layer on an NCHW map, or streaming self-attention on the
/// flattened token matrix. Analytic MAC columns come from
/// complexity_compare.
std::vector<BenchRow> bench_layer(BenchOp op, std::int64_t channels, int kernel,
                                  const std::vector<std::int64_t>& resolutions, int reps,
                                  std::uint64_t seed);

std::string bench_to_csv(const std::vector<BenchRow>& rows);  // resolution,analytic_macs,wall_ms

}  // namespace c2f
