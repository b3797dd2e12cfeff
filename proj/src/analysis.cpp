#include "c2f/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "c2f/gradcheck.hpp"

namespace c2f {

long long FlopReport::total_params() const {
    long long t = 0;
    for (const auto& e : entries) t += e.params;
    return t;
}

long long FlopReport::total_macs() const {
    long long t = 0;
    for (const auto& e : entries) t += e.macs;
    return t;
}

std::string FlopReport::to_csv() const {
    std::string s = "layer,params,macs\n";
    for (const auto& e : entries) {
        s += e.layer + "," + std::to_string(e.params) + "," + std::to_string(e.macs) + "\n";
    }
    s += "TOTAL," + std::to_string(total_params()) + "," + std::to_string(total_macs()) + "\n";
    return s;
}

namespace {

long long layer_macs(const LayerDesc& l, std::int64_t h, std::int64_t w) {
    const std::int64_t oh = h / l.out_divisor;
    const std::int64_t ow = w / l.out_divisor;
    switch (l.kind) {
        case LayerDesc::Kind::Conv:
            return static_cast<long long>(l.cout) * l.cin * l.k * l.k * oh * ow;
        case LayerDesc::Kind::Depthwise:
            return static_cast<long long>(l.cout) * l.k * l.k * oh * ow;
        case LayerDesc::Kind::Pointwise:
            return static_cast<long long>(l.cout) * l.cin * oh * ow;
        case LayerDesc::Kind::Linear:
            return static_cast<long long>(l.cout) * l.cin;
        case LayerDesc::Kind::Norm:
        case LayerDesc::Kind::LayerScale:
            return 0;
    }
    return 0;
}

}  // namespace

FlopReport count_params(const ModelConfig& cfg) {
    FlopReport r;
    for (const auto& l : plan_model(cfg)) {
        r.entries.push_back({l.name, l.param_count(), 0});
    }
    return r;
}

FlopReport count_macs(const ModelConfig& cfg, std::int64_t h, std::int64_t w) {
    const int stride = cfg.total_stride();
    if (h % stride != 0 || w % stride != 0)
        throw DimensionError("count_macs: resolution " + std::to_string(h) + "x" +
                             std::to_string(w) + " not divisible by total stride " +
                             std::to_string(stride));
    FlopReport r;
    r.height = h;
    r.width = w;
    for (const auto& l : plan_model(cfg)) {
        r.entries.push_back({l.name, l.param_count(), layer_macs(l, h, w)});
    }
    return r;
}

// ------------------------------------------------------------- complexity

namespace {

long long modulation_layer_macs(std::int64_t c, int k, std::int64_t tokens) {
    // w1 + w2 + output projection, plus the depthwise pass.
    return 3LL * c * c * tokens + static_cast<long long>(k) * k * c * tokens;
}

long long attention_quad_macs(std::int64_t c, std::int64_t tokens) {
    return 2LL * tokens * tokens * c;  // Q K^T scores and the AV product
}

long long attention_layer_macs(std::int64_t c, std::int64_t tokens) {
    return 3LL * c * c * tokens + attention_quad_macs(c, tokens);
}

double fit_loglog_slope(const std::vector<std::int64_t>& xs, const std::vector<long long>& ys) {
    const std::size_t n = xs.size();
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < n; ++i) {
        const double lx = std::log(static_cast<double>(xs[i]));
        const double ly = std::log(static_cast<double>(ys[i]));
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    const double d = static_cast<double>(n) * sxx - sx * sx;
    return (static_cast<double>(n) * sxy - sx * sy) / d;
}

}  // namespace

ComplexityTable complexity_compare(std::int64_t channels, int kernel,
                                   const std::vector<std::int64_t>& resolutions) {
    ComplexityTable t;
    std::vector<std::int64_t> tokens;
    std::vector<long long> mod, quad;
    for (auto r : resolutions) {
        ComplexityRow row;
        row.resolution = r;
        row.tokens = r * r;
        row.modulation_macs = modulation_layer_macs(channels, kernel, row.tokens);
        row.attention_macs = attention_layer_macs(channels, row.tokens);
        row.attention_quad_macs = attention_quad_macs(channels, row.tokens);
        t.rows.push_back(row);
        tokens.push_back(row.tokens);
        mod.push_back(row.modulation_macs);
        quad.push_back(row.attention_quad_macs);
    }
    if (tokens.size() >= 2) {
        t.modulation_slope = fit_loglog_slope(tokens, mod);
        t.attention_quad_slope = fit_loglog_slope(tokens, quad);
    }
    for (std::int64_t r = 1; r <= 1 << 14; ++r) {
        const std::int64_t p = r * r;
        if (attention_layer_macs(channels, p) > modulation_layer_macs(channels, kernel, p)) {
            t.crossover_resolution = r;
            break;
        }
    }
    return t;
}

// ------------------------------------------------------------- RF probes

bool RfProbe::support_is_filled_rect() const {
    for (std::int64_t i = 0; i < input_h; ++i) {
        for (std::int64_t j = 0; j < input_w; ++j) {
            const bool inside = i >= h0 && i <= h1 && j >= w0 && j <= w1;
            if (mask[static_cast<std::size_t>(i * input_w + j)] != (inside ? 1 : 0)) return false;
        }
    }
    return true;
}

std::string RfProbe::ascii() const {
    std::string s;
    s.reserve(static_cast<std::size_t>(input_h * (input_w + 1)));
    for (std::int64_t i = 0; i < input_h; ++i) {
        for (std::int64_t j = 0; j < input_w; ++j) {
            s += mask[static_cast<std::size_t>(i * input_w + j)] ? '#' : '.';
        }
        s += '\n';
    }
    return s;
}

namespace {

RfProbe probe_from_forward(
    const std::function<Tensor<double>(Tape<double>*, const Tensor<double>&)>& forward,
    std::int64_t input_hw, std::int64_t pos_h, std::int64_t pos_w, std::uint64_t seed) {
    constexpr std::int64_t kChannels = 4;
    Rng rng(seed);
    Tensor<double> x = Tensor<double>::randn({1, kChannels, input_hw, input_hw}, rng);
    x.set_requires_grad(true);

    Tape<double> tape;
    Tensor<double> out = forward(&tape, x);
    if (pos_h < 0) pos_h = out.shape()[2] / 2;
    if (pos_w < 0) pos_w = out.shape()[3] / 2;

    // One-hot projection of a single output coordinate, backpropagated.
    Tensor<double> onehot = Tensor<double>::zeros(out.shape());
    onehot.data()[(0 * out.shape()[1] + 0) * out.shape()[2] * out.shape()[3] +
                  pos_h * out.shape()[3] + pos_w] = 1.0;
    Tensor<double> loss = projected_loss(&tape, out, onehot);
    tape.backward(loss);

    RfProbe probe;
    probe.input_h = input_hw;
    probe.input_w = input_hw;
    probe.out_h = pos_h;
    probe.out_w = pos_w;
    probe.mask.assign(static_cast<std::size_t>(input_hw * input_hw), 0);
    const double* g = x.grad_ptr();
    probe.h0 = input_hw;
    probe.w0 = input_hw;
    probe.h1 = -1;
    probe.w1 = -1;
    for (std::int64_t i = 0; i < input_hw; ++i) {
        for (std::int64_t j = 0; j < input_hw; ++j) {
            double mag = 0.0;
            for (std::int64_t c = 0; c < kChannels; ++c) {
                mag += std::abs(g[(c * input_hw + i) * input_hw + j]);
            }
            if (mag != 0.0) {
                probe.mask[static_cast<std::size_t>(i * input_hw + j)] = 1;
                probe.h0 = std::min(probe.h0, i);
                probe.w0 = std::min(probe.w0, j);
                probe.h1 = std::max(probe.h1, i);
                probe.w1 = std::max(probe.w1, j);
            }
        }
    }
    return probe;
}

}  // namespace

RfProbe receptive_field_probe_mod(int kernel, int layers, std::int64_t input_hw,
                                  std::int64_t pos_h, std::int64_t pos_w, std::uint64_t seed) {
    constexpr std::int64_t kChannels = 4;
    Rng prng(seed + 1);
    std::vector<ConvModParams<double>> params;
    for (int l = 0; l < layers; ++l) {
        params.push_back(ConvModParams<double>::init(kChannels, kernel, true, true, prng));
    }
    return probe_from_forward(
        [&](Tape<double>* tape, const Tensor<double>& x) {
            Tensor<double> h = x;
            for (const auto& p : params) {
                h = conv_mod_forward(tape, h, p, FusionStrategy::Hadamard);
            }
            return h;
        },
        input_hw, pos_h, pos_w, seed);
}

RfProbe receptive_field_probe_block(int kernel, std::int64_t input_hw, std::int64_t pos_h,
                                    std::int64_t pos_w, std::uint64_t seed) {
    constexpr std::int64_t kChannels = 4;
    Rng prng(seed + 1);
    ModelConfig cfg;
    cfg.kernel_size = kernel;
    BlockParams<double> block;
    block.norm1 = NormParams<double>::init(kChannels);
    block.mod = ConvModParams<double>::init(kChannels, kernel, true, true, prng);
    block.ls1 = Tensor<double>::full({kChannels}, 1e-2);
    block.norm2 = NormParams<double>::init(kChannels);
    const std::int64_t hidden = 2 * kChannels;
    block.ffn.fc1_w = Tensor<double>::truncated_normal({hidden, kChannels}, prng, 0.2);
    block.ffn.fc1_b = Tensor<double>::zeros({hidden});
    block.ffn.dw_k = Tensor<double>::truncated_normal({hidden, 3, 3}, prng, 0.2);
    block.ffn.dw_b = Tensor<double>::zeros({hidden});
    block.ffn.fc2_w = Tensor<double>::truncated_normal({kChannels, hidden}, prng, 0.2);
    block.ffn.fc2_b = Tensor<double>::zeros({kChannels});
    block.ls2 = Tensor<double>::full({kChannels}, 1e-2);
    block.drop_path_p = 0.0;

    Rng fwd_rng(seed + 2);
    return probe_from_forward(
        [&](Tape<double>* tape, const Tensor<double>& x) {
            return block_forward(tape, x, block, FusionStrategy::Hadamard, false, fwd_rng);
        },
        input_hw, pos_h, pos_w, seed);
}

}  // namespace c2f
