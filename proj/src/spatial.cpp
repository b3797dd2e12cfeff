#include "c2f/spatial.hpp"

#include <cmath>

#include "c2f/kernels.hpp"
#include "c2f/parallel.hpp"

namespace c2f {

const char* fusion_name(FusionStrategy s) {
    switch (s) {
        case FusionStrategy::Hadamard: return "hadamard";
        case FusionStrategy::ElementwiseSum: return "elementwise_sum";
        case FusionStrategy::SigmoidHadamard: return "sigmoid_hadamard";
        case FusionStrategy::L1NormHadamard: return "l1norm_hadamard";
        case FusionStrategy::LinearNormHadamard: return "linearnorm_hadamard";
    }
    return "hadamard";
}

FusionStrategy fusion_from_name(const std::string& name) {
    if (name == "hadamard") return FusionStrategy::Hadamard;
    if (name == "elementwise_sum") return FusionStrategy::ElementwiseSum;
    if (name == "sigmoid_hadamard") return FusionStrategy::SigmoidHadamard;
    if (name == "l1norm_hadamard") return FusionStrategy::L1NormHadamard;
    if (name == "linearnorm_hadamard") return FusionStrategy::LinearNormHadamard;
    throw ConfigError("unknown fusion strategy '" + name +
                      "' (valid: hadamard, elementwise_sum, sigmoid_hadamard, "
                      "l1norm_hadamard, linearnorm_hadamard)");
}

template <typename T>
ConvModParams<T> ConvModParams<T>::init(std::int64_t channels, int kernel_size, bool a_branch_gelu,
                                        bool output_projection, Rng& rng) {
    if (kernel_size < 1 || kernel_size % 2 == 0)
        throw ConfigError("ConvModParams: kernel size must be odd, got " +
                          std::to_string(kernel_size));
    constexpr double kStd = 0.02;
    ConvModParams<T> p;
    p.kernel_size = kernel_size;
    p.a_branch_gelu = a_branch_gelu;
    p.w1 = Tensor<T>::truncated_normal({channels, channels}, rng, kStd);
    p.b1 = Tensor<T>::zeros({channels});
    p.dk = Tensor<T>::truncated_normal({channels, kernel_size, kernel_size}, rng, kStd);
    p.db = Tensor<T>::zeros({channels});
    p.w2 = Tensor<T>::truncated_normal({channels, channels}, rng, kStd);
    p.b2 = Tensor<T>::zeros({channels});
    if (output_projection) {
        p.wo = Tensor<T>::truncated_normal({channels, channels}, rng, kStd);
        p.bo = Tensor<T>::zeros({channels});
    }
    return p;
}

template <typename T>
AttentionParams<T> AttentionParams<T>::init(std::int64_t channels, bool scale_inv_sqrt, Rng& rng) {
    constexpr double kStd = 0.02;
    AttentionParams<T> p;
    p.scale_inv_sqrt = scale_inv_sqrt;
    p.wq = Tensor<T>::truncated_normal({channels, channels}, rng, kStd);
    p.bq = Tensor<T>::zeros({channels});
    p.wk = Tensor<T>::truncated_normal({channels, channels}, rng, kStd);
    p.bk = Tensor<T>::zeros({channels});
    p.wv = Tensor<T>::truncated_normal({channels, channels}, rng, kStd);
    p.bv = Tensor<T>::zeros({channels});
    return p;
}

template <typename T>
Tensor<T> fusion_apply(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& v, FusionStrategy s) {
    if (a.shape() != v.shape())
        throw DimensionError("fusion_apply: shape mismatch " + a.shape().str() + " vs " +
                             v.shape().str());
    switch (s) {
        case FusionStrategy::Hadamard:
            return hadamard(tape, a, v);
        case FusionStrategy::ElementwiseSum:
            return add(tape, a, v);
        case FusionStrategy::SigmoidHadamard:
            return hadamard(tape, sigmoid(tape, a), v);
        case FusionStrategy::L1NormHadamard:
            return hadamard(tape, l1_normalize_channels(tape, a), v);
        case FusionStrategy::LinearNormHadamard:
            return hadamard(tape, minmax_normalize_maps(tape, a), v);
    }
    throw ConfigError("fusion_apply: unknown strategy");
}

template <typename T>
Tensor<T> conv_mod_forward(Tape<T>* tape, const Tensor<T>& x, const ConvModParams<T>& p,
                           FusionStrategy s) {
    Tensor<T> a = pointwise_linear(tape, x, p.w1, p.b1);
    if (p.a_branch_gelu) a = gelu(tape, a);
    a = depthwise_conv2d(tape, a, p.dk, p.db);
    Tensor<T> v = pointwise_linear(tape, x, p.w2, p.b2);
    Tensor<T> z = fusion_apply(tape, a, v, s);
    if (p.has_output_projection()) z = pointwise_linear(tape, z, p.wo, p.bo);
    return z;
}

template <typename T>
Tensor<T> conv_mod_attention_map(const Tensor<T>& x, const ConvModParams<T>& p) {
    Tensor<T> a = pointwise_linear<T>(nullptr, x, p.w1, p.b1);
    if (p.a_branch_gelu) a = gelu<T>(nullptr, a);
    return depthwise_conv2d<T>(nullptr, a, p.dk, p.db);
}

template <typename T>
Tensor<T> self_attention_forward(Tape<T>* tape, const Tensor<T>& x, const AttentionParams<T>& p) {
    if (x.shape().nd != 2)
        throw DimensionError("self_attention_forward: expected [N_tokens, C], got " +
                             x.shape().str());
    const std::int64_t c = x.shape()[1];
    Tensor<T> q = linear(tape, x, p.wq, p.bq);
    Tensor<T> k = linear(tape, x, p.wk, p.bk);
    Tensor<T> v = linear(tape, x, p.wv, p.bv);
    Tensor<T> scores = matmul(tape, q, transpose(tape, k));
    if (p.scale_inv_sqrt) {
        scores = scale(tape, scores, static_cast<T>(1.0 / std::sqrt(static_cast<double>(c))));
    }
    Tensor<T> attn = softmax_rows(tape, scores);
    return matmul(tape, attn, v);
}

namespace {

// out[N,C] = x[N,C] * w[C,C]^T + b, tiled row-block GEMM (no tape).
template <typename T>
Tensor<T> project_tokens(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    const std::int64_t n = x.shape()[0], c = x.shape()[1];
    Tensor<T> out = Tensor<T>::zeros({n, c});
    const T* px = x.data();
    const T* pw = w.data();
    const T* pb = b.data();
    T* py = out.data();
    parallel_for(n, [&](std::int64_t i0, std::int64_t i1) {
        for (std::int64_t i = i0; i < i1; ++i) {
            for (std::int64_t k = 0; k < c; ++k) {
                py[i * c + k] =
                    pb[k] + kernels::active<T>().dot(pw + k * c, px + i * c,
                                                     static_cast<std::size_t>(c));
            }
        }
    });
    return out;
}

}  // namespace

template <typename T>
Tensor<T> self_attention_infer(const Tensor<T>& x, const AttentionParams<T>& p,
                               std::int64_t row_tile) {
    if (x.shape().nd != 2)
        throw DimensionError("self_attention_infer: expected [N_tokens, C], got " +
                             x.shape().str());
    const std::int64_t n = x.shape()[0], c = x.shape()[1];
    const T s = p.scale_inv_sqrt ? static_cast<T>(1.0 / std::sqrt(static_cast<double>(c))) : T(1);

    Tensor<T> q = project_tokens(x, p.wq, p.bq);
    Tensor<T> k = project_tokens(x, p.wk, p.bk);
    Tensor<T> v = project_tokens(x, p.wv, p.bv);

    // V transposed to [C, N] so the AV reduction runs over contiguous rows.
    std::vector<T> vt(static_cast<std::size_t>(c * n));
    {
        const T* pv = v.data();
        for (std::int64_t i = 0; i < n; ++i)
            for (std::int64_t j = 0; j < c; ++j) vt[j * n + i] = pv[i * c + j];
    }

    Tensor<T> out = Tensor<T>::zeros({n, c});
    const std::int64_t tile = std::max<std::int64_t>(1, row_tile);
    const std::int64_t ntiles = (n + tile - 1) / tile;
    const T* pq = q.data();
    const T* pk = k.data();
    T* py = out.data();

    parallel_for(ntiles, [&](std::int64_t t0, std::int64_t t1) {
        std::vector<T> srow(static_cast<std::size_t>(tile * n));
        for (std::int64_t t = t0; t < t1; ++t) {
            const std::int64_t r0 = t * tile;
            const std::int64_t rows = std::min(tile, n - r0);
            // scores tile = Q[r0:r0+rows] K^T, blocked over columns for L1 reuse
            std::fill(srow.begin(), srow.begin() + rows * n, T(0));
            constexpr std::int64_t jb = 2048;
            for (std::int64_t j0 = 0; j0 < n; j0 += jb) {
                const std::int64_t jn = std::min(jb, n - j0);
                for (std::int64_t r = 0; r < rows; ++r) {
                    const T* qrow = pq + (r0 + r) * c;
                    T* sr = srow.data() + r * n + j0;
                    for (std::int64_t j = 0; j < jn; ++j) {
                        sr[j] = kernels::active<T>().dot(qrow, pk + (j0 + j) * c,
                                                         static_cast<std::size_t>(c));
                    }
                }
            }
            for (std::int64_t r = 0; r < rows; ++r) {
                T* sr = srow.data() + r * n;
                if (s != T(1)) kernels::active<T>().scale(sr, s, sr, static_cast<std::size_t>(n));
                T mx = sr[0];
                for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, sr[j]);
                for (std::int64_t j = 0; j < n; ++j) sr[j] -= mx;
                kernels::active<T>().vexp(sr, sr, static_cast<std::size_t>(n));
                const T z = kernels::active<T>().sum(sr, static_cast<std::size_t>(n));
                kernels::active<T>().scale(sr, T(1) / z, sr, static_cast<std::size_t>(n));
                T* orow = py + (r0 + r) * c;
                for (std::int64_t j = 0; j < c; ++j) {
                    orow[j] = kernels::active<T>().dot(sr, vt.data() + j * n,
                                                       static_cast<std::size_t>(n));
                }
            }
        }
    });
    return out;
}

#define C2F_INSTANTIATE_SPATIAL(T)                                                              \
    template struct ConvModParams<T>;                                                           \
    template struct AttentionParams<T>;                                                         \
    template Tensor<T> fusion_apply<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&,            \
                                       FusionStrategy);                                         \
    template Tensor<T> conv_mod_forward<T>(Tape<T>*, const Tensor<T>&, const ConvModParams<T>&, \
                                           FusionStrategy);                                     \
    template Tensor<T> conv_mod_attention_map<T>(const Tensor<T>&, const ConvModParams<T>&);    \
    template Tensor<T> self_attention_forward<T>(Tape<T>*, const Tensor<T>&,                    \
                                                 const AttentionParams<T>&);                    \
    template Tensor<T> self_attention_infer<T>(const Tensor<T>&, const AttentionParams<T>&,     \
                                               std::int64_t);

C2F_INSTANTIATE_SPATIAL(float)
C2F_INSTANTIATE_SPATIAL(double)

}  // namespace c2f
