#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "c2f/spatial.hpp"

namespace c2f {

enum class Variant { N, T, S, B, L, IS, IB, Custom };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& name);  // ConfigError listing the valid set

enum class PatchEmbedStyle { SingleConv, ThreeConv };

/// Structural description of one network. Named variants expand to the
/// published channel/depth tables; custom configs fill the fields directly.
struct ModelConfig {
    Variant variant = Variant::Custom;
    bool isotropic = false;
    std::vector<std::int64_t> channels;  // per stage (pyramid) or single width (isotropic)
    std::vector<std::int64_t> depths;    // per stage block counts, or total blocks
    int kernel_size = 11;
    double ffn_ratio = 4.0;
    FusionStrategy fusion = FusionStrategy::Hadamard;
    double drop_path_rate = 0.0;
    double layer_scale_init = 1e-6;
    std::int64_t num_classes = 1000;
    PatchEmbedStyle patch_embed_style = PatchEmbedStyle::SingleConv;  // isotropic stems only
    bool a_branch_gelu = true;
    bool output_projection = true;

    bool operator==(const ModelConfig&) const = default;

    static ModelConfig preset(Variant v);
    static ModelConfig preset(const std::string& name);

    void validate() const;  // ConfigError on inconsistency

    int total_stride() const { return isotropic ? 16 : 32; }
    std::int64_t total_blocks() const;
    std::int64_t ffn_hidden(std::int64_t c) const;
};

/// One parameter-bearing layer of the realized network, derivable from the
/// config alone. Both model construction and the parameter/MAC accounting
/// walk this plan, so the two can never drift apart.
struct LayerDesc {
    enum class Kind { Conv, Depthwise, Pointwise, Norm, LayerScale, Linear };
    std::string name;
    Kind kind;
    std::int64_t cin = 0;
    std::int64_t cout = 0;
    int k = 1;       // spatial kernel extent (Conv / Depthwise)
    int stride = 1;
    int pad = 0;
    // Input resolution of this layer is (H/in_divisor, W/in_divisor).
    std::int64_t in_divisor = 1;
    std::int64_t out_divisor = 1;

    std::int64_t param_count() const;
};

std::vector<LayerDesc> plan_model(const ModelConfig& cfg);

}  // namespace c2f
