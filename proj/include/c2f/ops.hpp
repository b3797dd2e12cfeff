#pragma once

#include <vector>

#include "c2f/rng.hpp"
#include "c2f/tape.hpp"
#include "c2f/tensor.hpp"

// Differentiable tensor operations. Every op takes the tape as its first
// argument; pass nullptr for inference (no recording, outputs do not require
// grad). Forward arithmetic runs on the active kernel table.

namespace c2f {

// ---- core ----

/// Matrix product of rank-2 tensors, [m,k] x [k,n] -> [m,n].
template <typename T> Tensor<T> matmul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> transpose(Tape<T>* tape, const Tensor<T>& a);

/// Elementwise sum of equal-shape tensors.
template <typename T> Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

/// Hadamard (elementwise) product of equal-shape tensors.
template <typename T> Tensor<T> hadamard(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b);

template <typename T> Tensor<T> scale(Tape<T>* tape, const Tensor<T>& a, T s);

/// Row-wise softmax of a rank-2 tensor, computed with max subtraction.
template <typename T> Tensor<T> softmax_rows(Tape<T>* tape, const Tensor<T>& a);

/// Sum of all elements as a [1] tensor.
template <typename T> Tensor<T> sum_all(Tape<T>* tape, const Tensor<T>& a);

// ---- neural layers ----

/// Per-channel k x k cross-correlation, stride 1, zero "same" padding.
/// x [N,C,H,W], kernel [C,k,k], bias [C]. k must be odd.
template <typename T>
Tensor<T> depthwise_conv2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& kernel,
                           const Tensor<T>& bias);

/// Dense 2-D cross-correlation. x [N,Ci,H,W], w [Co,Ci,kh,kw], bias [Co].
/// The strided extent must divide evenly (patch embeddings).
template <typename T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int stride, int pad);

/// Per-pixel channel mixing (1x1 convolution): x [N,C,H,W], w [C',C], bias [C'].
template <typename T>
Tensor<T> pointwise_linear(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                           const Tensor<T>& bias);

/// LayerNorm over the channel axis at each spatial position of an NCHW map.
template <typename T>
Tensor<T> layer_norm_channels(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& gamma,
                              const Tensor<T>& beta, T eps = T(1e-6));

/// Exact GELU, x * Phi(x) with the Gaussian CDF via erf.
template <typename T> Tensor<T> gelu(Tape<T>* tape, const Tensor<T>& x);

template <typename T> Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& x);

/// Divides each channel vector by its L1 norm (+eps) at every spatial
/// position: y[n,:,h,w] = a[n,:,h,w] / (sum_c |a[n,c,h,w]| + eps).
template <typename T>
Tensor<T> l1_normalize_channels(Tape<T>* tape, const Tensor<T>& a, T eps = T(1e-8));

/// Affinely maps each (n,c) feature map onto (0,1] with the maximum landing
/// exactly on 1: y = (x - min + eps) / (max - min + eps). Constant maps
/// become all-ones through the same eps guard.
template <typename T>
Tensor<T> minmax_normalize_maps(Tape<T>* tape, const Tensor<T>& a, T eps = T(1e-8));

/// Per-channel scaling of an NCHW map by a learnable [C] vector (layer scale).
template <typename T>
Tensor<T> channel_scale(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& s);

/// Spatial mean per (n,c): [N,C,H,W] -> [N,C].
template <typename T> Tensor<T> global_avg_pool(Tape<T>* tape, const Tensor<T>& x);

/// Fully connected layer on row vectors: x [N,C], w [K,C], b [K] -> [N,K].
template <typename T>
Tensor<T> linear(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b);

/// Stochastic depth. Training mode samples one keep decision per batch entry
/// (keep probability 1-p, kept samples rescaled by 1/(1-p)); eval mode is the
/// identity. p must lie in [0,1).
template <typename T>
Tensor<T> drop_path(Tape<T>* tape, const Tensor<T>& x, double p, bool training, Rng& rng);

/// Deterministic core of drop_path: applies a given keep mask. Exposed so
/// tests can force a drop.
template <typename T>
Tensor<T> drop_path_apply(Tape<T>* tape, const Tensor<T>& x, const std::vector<char>& keep,
                          T keep_scale);

/// Label-smoothed cross entropy, mean over the batch. logits [N,K].
template <typename T>
Tensor<T> cross_entropy_smoothed(Tape<T>* tape, const Tensor<T>& logits,
                                 const std::vector<int>& labels, T eps_smooth);

}  // namespace c2f
