#pragma once

#include <string>

#include "c2f/ops.hpp"
#include "c2f/rng.hpp"

namespace c2f {

/// How the convolutional feature map A is fused with the value branch V.
/// Hadamard is the default; the others exist for the weighting ablation.
enum class FusionStrategy {
    Hadamard,            // A (*) V
    ElementwiseSum,      // A + V
    SigmoidHadamard,     // sigmoid(A) (*) V
    L1NormHadamard,      // A / (channelwise L1 + eps) (*) V
    LinearNormHadamard,  // A mapped per feature map onto (0,1] (*) V
};

const char* fusion_name(FusionStrategy s);
FusionStrategy fusion_from_name(const std::string& name);  // ConfigError on unknown

/// Learnable state of one convolutional modulation layer:
///   A = DConv_kxk(opt. GELU(W1 x + b1)),  V = W2 x + b2,
///   Z = fuse(A, V),  out = opt. Wo Z + bo.
template <typename T>
struct ConvModParams {
    Tensor<T> w1, b1;      // [C,C], [C] channel mixing feeding the A branch
    Tensor<T> dk, db;      // [C,k,k], [C] depthwise kernel + bias
    Tensor<T> w2, b2;      // [C,C], [C] value branch
    Tensor<T> wo, bo;      // [C,C], [C] output projection; undefined when off
    int kernel_size = 11;
    bool a_branch_gelu = true;

    bool has_output_projection() const { return wo.defined(); }

    static ConvModParams init(std::int64_t channels, int kernel_size, bool a_branch_gelu,
                              bool output_projection, Rng& rng);
};

/// Single-head attention baseline. scale_inv_sqrt selects 1/sqrt(C) score
/// scaling; off matches the unscaled formulation.
template <typename T>
struct AttentionParams {
    Tensor<T> wq, bq, wk, bk, wv, bv;  // each [C,C] + [C]
    bool scale_inv_sqrt = true;

    static AttentionParams init(std::int64_t channels, bool scale_inv_sqrt, Rng& rng);
};

/// Applies one fusion strategy to equal-shape NCHW tensors.
template <typename T>
Tensor<T> fusion_apply(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& v, FusionStrategy s);

/// Convolutional modulation layer forward. Every output location depends
/// only on the k x k input window centered at it.
template <typename T>
Tensor<T> conv_mod_forward(Tape<T>* tape, const Tensor<T>& x, const ConvModParams<T>& p,
                           FusionStrategy s);

/// The A branch alone (no tape); used to probe content adaptivity.
template <typename T>
Tensor<T> conv_mod_attention_map(const Tensor<T>& x, const ConvModParams<T>& p);

/// Single-head self-attention on a token matrix [N_tokens, C]:
/// A = softmax(Q K^T * s), out = A V.
template <typename T>
Tensor<T> self_attention_forward(Tape<T>* tape, const Tensor<T>& x, const AttentionParams<T>& p);

/// Inference-only attention that streams the score matrix in row tiles, so
/// memory stays O(N_tokens * C) instead of O(N_tokens^2). Matches
/// self_attention_forward within accumulation-order rounding.
template <typename T>
Tensor<T> self_attention_infer(const Tensor<T>& x, const AttentionParams<T>& p,
                               std::int64_t row_tile = 32);

}  // namespace c2f
