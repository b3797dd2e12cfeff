#include "c2f/config.hpp"

#include <algorithm>
#include <cmath>

#include "c2f/errors.hpp"

namespace c2f {

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::N: return "N";
        case Variant::T: return "T";
        case Variant::S: return "S";
        case Variant::B: return "B";
        case Variant::L: return "L";
        case Variant::IS: return "IS";
        case Variant::IB: return "IB";
        case Variant::Custom: return "custom";
    }
    return "custom";
}

Variant variant_from_name(const std::string& name) {
    if (name == "N") return Variant::N;
    if (name == "T") return Variant::T;
    if (name == "S") return Variant::S;
    if (name == "B") return Variant::B;
    if (name == "L") return Variant::L;
    if (name == "IS") return Variant::IS;
    if (name == "IB") return Variant::IB;
    if (name == "custom") return Variant::Custom;
    throw ConfigError("unknown variant '" + name + "' (valid: N, T, S, B, L, IS, IB, custom)");
}

ModelConfig ModelConfig::preset(Variant v) {
    ModelConfig c;
    c.variant = v;
    switch (v) {
        case Variant::N:
            c.channels = {64, 128, 256, 512};
            c.depths = {2, 2, 8, 2};
            c.drop_path_rate = 0.1;
            break;
        case Variant::T:
            c.channels = {72, 144, 288, 576};
            c.depths = {3, 3, 12, 3};
            c.drop_path_rate = 0.15;
            break;
        case Variant::S:
            c.channels = {72, 144, 288, 576};
            c.depths = {4, 4, 32, 4};
            c.drop_path_rate = 0.3;
            break;
        case Variant::B:
            c.channels = {96, 192, 384, 768};
            c.depths = {4, 4, 34, 4};
            c.drop_path_rate = 0.7;
            break;
        case Variant::L:
            c.channels = {128, 256, 512, 1024};
            c.depths = {4, 4, 48, 4};
            c.drop_path_rate = 0.1;
            break;
        case Variant::IS:
            c.isotropic = true;
            c.channels = {320};
            c.depths = {18};
            c.drop_path_rate = 0.1;
            break;
        case Variant::IB:
            c.isotropic = true;
            c.channels = {624};
            c.depths = {18};
            c.drop_path_rate = 0.1;
            break;
        case Variant::Custom:
            break;
    }
    return c;
}

ModelConfig ModelConfig::preset(const std::string& name) {
    return preset(variant_from_name(name));
}

std::int64_t ModelConfig::total_blocks() const {
    std::int64_t n = 0;
    for (auto d : depths) n += d;
    return n;
}

std::int64_t ModelConfig::ffn_hidden(std::int64_t c) const {
    return static_cast<std::int64_t>(std::llround(ffn_ratio * static_cast<double>(c)));
}

void ModelConfig::validate() const {
    static const int kKernels[] = {5, 7, 9, 11, 15, 21};
    if (std::find(std::begin(kKernels), std::end(kKernels), kernel_size) == std::end(kKernels))
        throw ConfigError("kernel_size must be one of {5,7,9,11,15,21}, got " +
                          std::to_string(kernel_size));
    const std::size_t stages = isotropic ? 1 : 4;
    if (channels.size() != stages || depths.size() != stages)
        throw ConfigError(std::string(isotropic ? "isotropic" : "pyramid") + " config needs " +
                          std::to_string(stages) + " channel and depth entries");
    for (auto c : channels)
        if (c < 1) throw ConfigError("channel widths must be positive");
    for (auto d : depths)
        if (d < 1) throw ConfigError("stage depths must be positive");
    if ((variant == Variant::IS || variant == Variant::IB) && depths[0] != 18)
        throw ConfigError("isotropic variants use exactly 18 blocks");
    if (ffn_ratio <= 0.0) throw ConfigError("ffn_ratio must be positive");
    if (drop_path_rate < 0.0 || drop_path_rate >= 1.0)
        throw ConfigError("drop_path_rate must be in [0,1)");
    if (layer_scale_init < 0.0) throw ConfigError("layer_scale_init must be non-negative");
    if (num_classes < 1) throw ConfigError("num_classes must be positive");

    // Named pyramid variants must match their published tables exactly.
    if (variant != Variant::Custom && variant != Variant::IS && variant != Variant::IB) {
        const ModelConfig ref = preset(variant);
        if (channels != ref.channels || depths != ref.depths)
            throw ConfigError("variant " + variant_name(variant) +
                              " does not match its published channels/depths");
    }
}

std::int64_t LayerDesc::param_count() const {
    switch (kind) {
        case Kind::Conv: return cout * cin * k * k + cout;
        case Kind::Depthwise: return cout * k * k + cout;
        case Kind::Pointwise: return cout * cin + cout;
        case Kind::Norm: return 2 * cout;
        case Kind::LayerScale: return cout;
        case Kind::Linear: return cout * cin + cout;
    }
    return 0;
}

namespace {

void plan_block(std::vector<LayerDesc>& plan, const ModelConfig& cfg, const std::string& prefix,
                std::int64_t c, std::int64_t div) {
    using Kind = LayerDesc::Kind;
    const std::int64_t hidden = cfg.ffn_hidden(c);
    plan.push_back({prefix + ".norm1", Kind::Norm, c, c, 1, 1, 0, div, div});
    plan.push_back({prefix + ".mod.w1", Kind::Pointwise, c, c, 1, 1, 0, div, div});
    plan.push_back({prefix + ".mod.dconv", Kind::Depthwise, c, c, cfg.kernel_size, 1,
                    (cfg.kernel_size - 1) / 2, div, div});
    plan.push_back({prefix + ".mod.w2", Kind::Pointwise, c, c, 1, 1, 0, div, div});
    if (cfg.output_projection)
        plan.push_back({prefix + ".mod.proj", Kind::Pointwise, c, c, 1, 1, 0, div, div});
    plan.push_back({prefix + ".ls1", Kind::LayerScale, c, c, 1, 1, 0, div, div});
    plan.push_back({prefix + ".norm2", Kind::Norm, c, c, 1, 1, 0, div, div});
    plan.push_back({prefix + ".ffn.fc1", Kind::Pointwise, c, hidden, 1, 1, 0, div, div});
    plan.push_back({prefix + ".ffn.dw3", Kind::Depthwise, hidden, hidden, 3, 1, 1, div, div});
    plan.push_back({prefix + ".ffn.fc2", Kind::Pointwise, hidden, c, 1, 1, 0, div, div});
    plan.push_back({prefix + ".ls2", Kind::LayerScale, c, c, 1, 1, 0, div, div});
}

}  // namespace

std::vector<LayerDesc> plan_model(const ModelConfig& cfg) {
    cfg.validate();
    using Kind = LayerDesc::Kind;
    std::vector<LayerDesc> plan;

    if (!cfg.isotropic) {
        std::int64_t div = 1;
        for (std::size_t s = 0; s < 4; ++s) {
            const std::int64_t c = cfg.channels[s];
            const std::string stage = "stage" + std::to_string(s + 1);
            if (s == 0) {
                plan.push_back({"stem.conv0", Kind::Conv, 3, c, 4, 4, 0, 1, 4});
                plan.push_back({"stem.norm", Kind::Norm, c, c, 1, 1, 0, 4, 4});
                div = 4;
            } else {
                const std::int64_t cprev = cfg.channels[s - 1];
                plan.push_back({stage + ".downsample.conv", Kind::Conv, cprev, c, 2, 2, 0, div,
                                div * 2});
                div *= 2;
                plan.push_back({stage + ".downsample.norm", Kind::Norm, c, c, 1, 1, 0, div, div});
            }
            for (std::int64_t b = 0; b < cfg.depths[s]; ++b) {
                plan_block(plan, cfg, stage + ".block" + std::to_string(b), c, div);
            }
        }
        const std::int64_t ch = cfg.channels[3];
        plan.push_back({"head.norm", Kind::Norm, ch, ch, 1, 1, 0, 32, 32});
        plan.push_back({"head.linear", Kind::Linear, ch, cfg.num_classes, 1, 1, 0, 32, 32});
    } else {
        const std::int64_t w = cfg.channels[0];
        if (cfg.patch_embed_style == PatchEmbedStyle::SingleConv) {
            plan.push_back({"stem.conv0", Kind::Conv, 3, w, 16, 16, 0, 1, 16});
        } else {
            const std::int64_t w4 = std::max<std::int64_t>(1, w / 4);
            const std::int64_t w2 = std::max<std::int64_t>(1, w / 2);
            plan.push_back({"stem.conv0", Kind::Conv, 3, w4, 3, 2, 1, 1, 2});
            plan.push_back({"stem.conv1", Kind::Conv, w4, w2, 3, 2, 1, 2, 4});
            plan.push_back({"stem.conv2", Kind::Conv, w2, w, 3, 2, 1, 4, 8});
            plan.push_back({"stem.conv3", Kind::Conv, w, w, 2, 2, 0, 8, 16});
        }
        plan.push_back({"stem.norm", Kind::Norm, w, w, 1, 1, 0, 16, 16});
        for (std::int64_t b = 0; b < cfg.depths[0]; ++b) {
            plan_block(plan, cfg, "stage1.block" + std::to_string(b), w, 16);
        }
        plan.push_back({"head.norm", Kind::Norm, w, w, 1, 1, 0, 16, 16});
        plan.push_back({"head.linear", Kind::Linear, w, cfg.num_classes, 1, 1, 0, 16, 16});
    }
    return plan;
}

}  // namespace c2f
