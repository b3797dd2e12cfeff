#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "c2f/config.hpp"
#include "c2f/model.hpp"

namespace c2f {

struct FlopEntry {
    std::string layer;
    long long params = 0;
    long long macs = 0;
};

/// Per-layer parameter and multiply-accumulate ledger. "FLOPs" figures are
/// MAC counts (one multiply-accumulate = 1); norms, activations, poolings
/// and elementwise products are excluded from MAC totals.
struct FlopReport {
    std::vector<FlopEntry> entries;
    std::int64_t height = 0, width = 0;  // 0 when params-only

    long long total_params() const;
    long long total_macs() const;
    std::string to_csv() const;  // "layer,params,macs" rows plus a TOTAL row
};

/// Exact learnable-scalar count, itemized per layer; resolution independent.
FlopReport count_params(const ModelConfig& cfg);

/// Analytic MAC count at an input resolution (batch 1). The resolution must
/// divide by the total stride.
FlopReport count_macs(const ModelConfig& cfg, std::int64_t h, std::int64_t w);

template <typename T>
FlopReport count_params(const Model<T>& m) { return count_params(m.cfg); }

template <typename T>
FlopReport count_macs(const Model<T>& m, std::int64_t h, std::int64_t w) {
    return count_macs(m.cfg, h, w);
}

struct ComplexityRow {
    std::int64_t resolution = 0;  // square side; tokens = resolution^2
    std::int64_t tokens = 0;
    long long modulation_macs = 0;
    long long attention_macs = 0;       // projections + score + AV
    long long attention_quad_macs = 0;  // score + AV terms only
};

struct ComplexityTable {
    std::vector<ComplexityRow> rows;
    double modulation_slope = 0.0;      // fitted d log(MACs) / d log(tokens)
    double attention_quad_slope = 0.0;
    std::int64_t crossover_resolution = 0;  // smallest side where attention exceeds modulation
};

/// Analytic MACs of one convolutional modulation layer vs one self-attention
/// layer on the flattened map, with log-log growth exponents fitted by least
/// squares over the given square resolutions.
ComplexityTable complexity_compare(std::int64_t channels, int kernel,
                                   const std::vector<std::int64_t>& resolutions);

/// Gradient support of one output position with respect to the input,
/// computed in f64 by backpropagating a one-hot output gradient and keeping
/// strictly nonzero entries.
struct RfProbe {
    std::int64_t input_h = 0, input_w = 0;
    std::int64_t out_h = 0, out_w = 0;  // probed output position
    std::int64_t h0 = 0, w0 = 0, h1 = 0, w1 = 0;  // inclusive bounding box
    std::vector<std::uint8_t> mask;     // input_h * input_w, 1 = nonzero gradient

    std::int64_t support_h() const { return h1 - h0 + 1; }
    std::int64_t support_w() const { return w1 - w0 + 1; }
    bool support_is_filled_rect() const;
    std::string ascii() const;
};

/// Probe through a stack of `layers` modulation layers (Hadamard fusion,
/// random parameters).
RfProbe receptive_field_probe_mod(int kernel, int layers, std::int64_t input_hw,
                                  std::int64_t pos_h, std::int64_t pos_w, std::uint64_t seed);

/// Probe through one full block (modulation + FFN with its 3x3 depthwise).
RfProbe receptive_field_probe_block(int kernel, std::int64_t input_hw, std::int64_t pos_h,
                                    std::int64_t pos_w, std::uint64_t seed);

}  // namespace c2f
