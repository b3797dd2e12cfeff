#pragma once

#include <functional>
#include <string>
#include <vector>

#include "c2f/config.hpp"
#include "c2f/spatial.hpp"

namespace c2f {

template <typename T>
struct NormParams {
    Tensor<T> gamma, beta;
    static NormParams init(std::int64_t c) {
        return {Tensor<T>::ones({c}), Tensor<T>::zeros({c})};
    }
};

/// Channel-mixing sub-network of a block: fc1 expand, 3x3 depthwise, GELU,
/// fc2 contract.
template <typename T>
struct FfnParams {
    Tensor<T> fc1_w, fc1_b;  // [rC,C], [rC]
    Tensor<T> dw_k, dw_b;    // [rC,3,3], [rC]
    Tensor<T> fc2_w, fc2_b;  // [C,rC], [C]
};

template <typename T>
struct BlockParams {
    NormParams<T> norm1;
    ConvModParams<T> mod;
    Tensor<T> ls1;  // [C] layer scale
    NormParams<T> norm2;
    FfnParams<T> ffn;
    Tensor<T> ls2;  // [C]
    double drop_path_p = 0.0;
};

template <typename T>
struct ConvLayer {
    Tensor<T> w, b;
    int stride = 1;
    int pad = 0;
    bool gelu_after = false;
};

/// Strided embedding between resolutions: conv layers followed by a channel
/// norm. The stem and the between-stage downsamples share this structure.
template <typename T>
struct PatchEmbedParams {
    std::vector<ConvLayer<T>> convs;
    NormParams<T> norm;
};

template <typename T>
struct StageParams {
    PatchEmbedParams<T> embed;  // stem for stage 0, downsample for later stages
    std::vector<BlockParams<T>> blocks;
};

template <typename T>
struct Model {
    ModelConfig cfg;
    std::vector<StageParams<T>> stages;
    NormParams<T> head_norm;
    Tensor<T> head_w, head_b;  // [num_classes, C], [num_classes]
};

/// Materializes a validated config: truncated-normal(0.02) weights, zero
/// biases, unit norms, layer scale at cfg.layer_scale_init, and per-block
/// drop-path rates linearly spaced from 0 to cfg.drop_path_rate in depth
/// order.
template <typename T>
Model<T> build_model(const ModelConfig& cfg, Rng& rng);

template <typename T>
Tensor<T> patch_embed_forward(Tape<T>* tape, const Tensor<T>& x, const PatchEmbedParams<T>& pe);

template <typename T>
Tensor<T> ffn_forward(Tape<T>* tape, const Tensor<T>& x, const FfnParams<T>& p);

/// Two-residual block: x + dp(ls1 * Mod(Norm1 x)), then + dp(ls2 * FFN(Norm2 .)).
template <typename T>
Tensor<T> block_forward(Tape<T>* tape, const Tensor<T>& x, const BlockParams<T>& p,
                        FusionStrategy fusion, bool training, Rng& rng);

/// Full network: stem, stages, global average pool, final norm, classifier.
/// Input spatial extents must be divisible by the total stride.
template <typename T>
Tensor<T> model_forward(Tape<T>* tape, const Model<T>& m, const Tensor<T>& x, bool training,
                        Rng& rng);

/// Visits every learnable tensor in canonical order with a stable name.
template <typename T>
void for_each_param(Model<T>& m,
                    const std::function<void(const std::string&, Tensor<T>&)>& fn);

template <typename T>
std::vector<Tensor<T>> collect_params(Model<T>& m);

template <typename T>
void set_params_requires_grad(Model<T>& m, bool v);

template <typename T>
void zero_all_grads(Model<T>& m);

}  // namespace c2f
