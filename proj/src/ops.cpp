#include "c2f/ops.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "c2f/kernels.hpp"
#include "c2f/parallel.hpp"

namespace c2f {

namespace debug {
bool inject_backward_bug = false;
}

namespace {

template <typename T>
const kernels::Kernels<T>& K() {
    return kernels::active<T>();
}

template <typename T>
bool want_grad(Tape<T>* tape, const Tensor<T>& a) {
    return tape != nullptr && a.requires_grad();
}

template <typename T>
bool want_grad(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    return tape != nullptr && (a.requires_grad() || b.requires_grad());
}

template <typename T>
void check_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* op) {
    if (a.shape() != b.shape())
        throw DimensionError(std::string(op) + ": shape mismatch " + a.shape().str() + " vs " +
                             b.shape().str());
}

template <typename T>
void check_rank(const Tensor<T>& t, int rank, const char* op) {
    if (t.shape().nd != rank)
        throw DimensionError(std::string(op) + ": expected rank " + std::to_string(rank) +
                             ", got " + t.shape().str());
}

}  // namespace

// ---------------------------------------------------------------- matmul

template <typename T>
Tensor<T> matmul(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    check_rank(a, 2, "matmul");
    check_rank(b, 2, "matmul");
    const std::int64_t m = a.shape()[0], k = a.shape()[1];
    const std::int64_t k2 = b.shape()[0], n = b.shape()[1];
    if (k != k2)
        throw DimensionError("matmul: inner extents disagree " + a.shape().str() + " x " +
                             b.shape().str());

    Tensor<T> out = Tensor<T>::zeros({m, n});
    {
        const T* pa = a.data();
        const T* pb = b.data();
        T* py = out.data();
        parallel_for(m, [&](std::int64_t i0, std::int64_t i1) {
            for (std::int64_t i = i0; i < i1; ++i) {
                T* row = py + i * n;
                for (std::int64_t kk = 0; kk < k; ++kk) {
                    K<T>().axpy(pa[i * k + kk], pb + kk * n, row, static_cast<std::size_t>(n));
                }
            }
        });
    }

    if (want_grad(tape, a, b)) {
        out.set_requires_grad(true);
        Tensor<T> av = a, bv = b, ov = out;
        tape->record([av, bv, ov, m, k, n]() mutable {
            const T* g = ov.grad_ptr();
            if (!g) return;
            if (av.requires_grad()) {
                T* da = av.ensure_grad();
                const T* pb = bv.data();
                const T bug = debug::inject_backward_bug ? T(1.01) : T(1);
                parallel_for(m, [&](std::int64_t i0, std::int64_t i1) {
                    for (std::int64_t i = i0; i < i1; ++i) {
                        for (std::int64_t kk = 0; kk < k; ++kk) {
                            da[i * k + kk] +=
                                bug * K<T>().dot(g + i * n, pb + kk * n, static_cast<std::size_t>(n));
                        }
                    }
                });
            }
            if (bv.requires_grad()) {
                T* db = bv.ensure_grad();
                const T* pa = av.data();
                parallel_for(k, [&](std::int64_t k0, std::int64_t k1) {
                    for (std::int64_t kk = k0; kk < k1; ++kk) {
                        for (std::int64_t i = 0; i < m; ++i) {
                            K<T>().axpy(pa[i * k + kk], g + i * n, db + kk * n,
                                        static_cast<std::size_t>(n));
                        }
                    }
                });
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------- transpose

template <typename T>
Tensor<T> transpose(Tape<T>* tape, const Tensor<T>& a) {
    check_rank(a, 2, "transpose");
    const std::int64_t m = a.shape()[0], n = a.shape()[1];
    Tensor<T> out = Tensor<T>::zeros({n, m});
    {
        const T* pa = a.data();
        T* py = out.data();
        for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < n; ++j) py[j * m + i] = pa[i * n + j];
    }
    if (want_grad(tape, a)) {
        out.set_requires_grad(true);
        Tensor<T> av = a, ov = out;
        tape->record([av, ov, m, n]() mutable {
            const T* g = ov.grad_ptr();
            if (!g || !av.requires_grad()) return;
            T* da = av.ensure_grad();
            for (std::int64_t i = 0; i < m; ++i)
                for (std::int64_t j = 0; j < n; ++j) da[i * n + j] += g[j * m + i];
        });
    }
    return out;
}

// ---------------------------------------------------------------- add / hadamard / scale

template <typename T>
Tensor<T> add(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "add");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    K<T>().add(a.data(), b.data(), out.data(), static_cast<std::size_t>(a.numel()));
    if (want_grad(tape, a, b)) {
        out.set_requires_grad(true);
        Tensor<T> av = a, bv = b, ov = out;
        tape->record([av, bv, ov]() mutable {
            const T* g = ov.grad_ptr();
            if (!g) return;
            const std::size_t n = static_cast<std::size_t>(ov.numel());
            if (av.requires_grad()) K<T>().axpy(T(1), g, av.ensure_grad(), n);
            if (bv.requires_grad()) K<T>().axpy(T(1), g, bv.ensure_grad(), n);
        });
    }
    return out;
}

template <typename T>
Tensor<T> hadamard(Tape<T>* tape, const Tensor<T>& a, const Tensor<T>& b) {
    check_same_shape(a, b, "hadamard");
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    K<T>().mul(a.data(), b.data(), out.data(), static_cast<std::size_t>(a.numel()));
    if (want_grad(tape, a, b)) {
        out.set_requires_grad(true);
        Tensor<T> av = a, bv = b, ov = out;
        tape->record([av, bv, ov]() mutable {
            const T* g = ov.grad_ptr();
            if (!g) return;
            const std::size_t n = static_cast<std::size_t>(ov.numel());
            if (av.requires_grad()) K<T>().mul_acc(g, bv.data(), av.ensure_grad(), n);
            if (bv.requires_grad()) K<T>().mul_acc(g, av.data(), bv.ensure_grad(), n);
        });
    }
    return out;
}

template <typename T>
Tensor<T> scale(Tape<T>* tape, const Tensor<T>& a, T s) {
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    K<T>().scale(a.data(), s, out.data(), static_cast<std::size_t>(a.numel()));
    if (want_grad(tape, a)) {
        out.set_requires_grad(true);
        Tensor<T> av = a, ov = out;
        tape->record([av, ov, s]() mutable {
            const T* g = ov.grad_ptr();
            if (!g || !av.requires_grad()) return;
            K<T>().axpy(s, g, av.ensure_grad(), static_cast<std::size_t>(ov.numel()));
        });
    }
    return out;
}

// ---------------------------------------------------------------- softmax_rows

template <typename T>
Tensor<T> softmax_rows(Tape<T>* tape, const Tensor<T>& a) {
    check_rank(a, 2, "softmax_rows");
    const std::int64_t m = a.shape()[0], n = a.shape()[1];
    Tensor<T> out = Tensor<T>::zeros({m, n});
    {
        const T* pa = a.data();
        T* py = out.data();
        parallel_for(m, [&](std::int64_t i0, std::int64_t i1) {
            std::vector<T> shifted(static_cast<std::size_t>(n));
            for (std::int64_t i = i0; i < i1; ++i) {
                const T* row = pa + i * n;
                T mx = row[0];
                for (std::int64_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
                for (std::int64_t j = 0; j < n; ++j) shifted[j] = row[j] - mx;
                T* yrow = py + i * n;
                K<T>().vexp(shifted.data(), yrow, static_cast<std::size_t>(n));
                const T z = K<T>().sum(yrow, static_cast<std::size_t>(n));
                K<T>().scale(yrow, T(1) / z, yrow, static_cast<std::size_t>(n));
            }
        });
    }
    if (want_grad(tape, a)) {
        out.set_requires_grad(true);
        Tensor<T> av = a, ov = out;
        tape->record([av, ov, m, n]() mutable {
            const T* g = ov.grad_ptr();
            if (!g || !av.requires_grad()) return;
            T* da = av.ensure_grad();
            const T* y = ov.data();
            parallel_for(m, [&](std::int64_t i0, std::int64_t i1) {
                for (std::int64_t i = i0; i < i1; ++i) {
                    const T* yr = y + i * n;
                    const T* gr = g + i * n;
                    const T s = K<T>().dot(gr, yr, static_cast<std::size_t>(n));
                    T* dr = da + i * n;
                    for (std::int64_t j = 0; j < n; ++j) dr[j] += yr[j] * (gr[j] - s);
                }
            });
        });
    }
    return out;
}

// ---------------------------------------------------------------- sum_all

template <typename T>
Tensor<T> sum_all(Tape<T>* tape, const Tensor<T>& a) {
    Tensor<T> out = Tensor<T>::zeros({1});
    out.data()[0] = K<T>().sum(a.data(), static_cast<std::size_t>(a.numel()));
    if (want_grad(tape, a)) {
        out.set_requires_grad(true);
        Tensor<T> av = a, ov = out;
        tape->record([av, ov]() mutable {
            const T* g = ov.grad_ptr();
            if (!g || !av.requires_grad()) return;
            const T g0 = g[0];
            T* da = av.ensure_grad();
            const std::int64_t n = av.numel();
            for (std::int64_t i = 0; i < n; ++i) da[i] += g0;
        });
    }
    return out;
}

// ---------------------------------------------------------------- depthwise_conv2d

namespace {

// Copies plane (H x W) into a zero-padded (H+2p x W+2p) scratch buffer.
template <typename T>
void fill_padded(const T* plane, std::int64_t h, std::int64_t w, int p, T* padded) {
    const std::int64_t pw = w + 2 * p;
    std::fill(padded, padded + (h + 2 * p) * pw, T(0));
    for (std::int64_t r = 0; r < h; ++r) {
        std::copy(plane + r * w, plane + (r + 1) * w, padded + (r + p) * pw + p);
    }
}

}  // namespace

template <typename T>
Tensor<T> depthwise_conv2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& kernel,
                           const Tensor<T>& bias) {
    check_rank(x, 4, "depthwise_conv2d");
    check_rank(kernel, 3, "depthwise_conv2d kernel");
    check_rank(bias, 1, "depthwise_conv2d bias");
    const std::int64_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    const std::int64_t kc = kernel.shape()[0], kh = kernel.shape()[1], kw = kernel.shape()[2];
    if (kh != kw) throw DimensionError("depthwise_conv2d: kernel must be square");
    if (kh % 2 == 0) throw ConfigError("depthwise_conv2d: kernel size must be odd");
    if (kc != c || bias.shape()[0] != c)
        throw DimensionError("depthwise_conv2d: channel mismatch");
    const int k = static_cast<int>(kh);
    const int p = (k - 1) / 2;
    const std::int64_t pw = w + 2 * p;

    Tensor<T> out = Tensor<T>::zeros({n, c, h, w});
    {
        const T* px = x.data();
        const T* pk = kernel.data();
        const T* pbias = bias.data();
        T* py = out.data();
        parallel_for(n * c, [&](std::int64_t t0, std::int64_t t1) {
            std::vector<T> padded(static_cast<std::size_t>((h + 2 * p) * pw));
            for (std::int64_t t = t0; t < t1; ++t) {
                const std::int64_t ci = t % c;
                fill_padded(px + t * h * w, h, w, p, padded.data());
                const T* kc_ptr = pk + ci * k * k;
                for (std::int64_t oh = 0; oh < h; ++oh) {
                    T* orow = py + t * h * w + oh * w;
                    std::fill(orow, orow + w, pbias[ci]);
                    for (int r = 0; r < k; ++r) {
                        const T* prow = padded.data() + (oh + r) * pw;
                        for (int s = 0; s < k; ++s) {
                            K<T>().axpy(kc_ptr[r * k + s], prow + s, orow,
                                        static_cast<std::size_t>(w));
                        }
                    }
                }
            }
        });
    }

    const bool need = tape && (x.requires_grad() || kernel.requires_grad() || bias.requires_grad());
    if (need) {
        out.set_requires_grad(true);
        Tensor<T> xv = x, kv = kernel, bv = bias, ov = out;
        tape->record([xv, kv, bv, ov, n, c, h, w, k, p, pw]() mutable {
            const T* g = ov.grad_ptr();
            if (!g) return;
            if (xv.requires_grad()) {
                T* dx = xv.ensure_grad();
                const T* pk = kv.data();
                parallel_for(n * c, [&](std::int64_t t0, std::int64_t t1) {
                    std::vector<T> dpad(static_cast<std::size_t>((h + 2 * p) * pw));
                    for (std::int64_t t = t0; t < t1; ++t) {
                        const std::int64_t ci = t % c;
                        std::fill(dpad.begin(), dpad.end(), T(0));
                        const T* kc_ptr = pk + ci * k * k;
                        for (std::int64_t oh = 0; oh < h; ++oh) {
                            const T* grow = g + t * h * w + oh * w;
                            for (int r = 0; r < k; ++r) {
                                T* drow = dpad.data() + (oh + r) * pw;
                                for (int s = 0; s < k; ++s) {
                                    K<T>().axpy(kc_ptr[r * k + s], grow, drow + s,
                                                static_cast<std::size_t>(w));
                                }
                            }
                        }
                        for (std::int64_t r = 0; r < h; ++r) {
                            K<T>().axpy(T(1), dpad.data() + (r + p) * pw + p, dx + t * h * w + r * w,
                                        static_cast<std::size_t>(w));
                        }
                    }
                });
            }
            if (kv.requires_grad()) {
                T* dk = kv.ensure_grad();
                const T* px = xv.data();
                parallel_for(c, [&](std::int64_t c0, std::int64_t c1) {
                    std::vector<T> padded(static_cast<std::size_t>((h + 2 * p) * pw));
                    for (std::int64_t ci = c0; ci < c1; ++ci) {
                        T* dkc = dk + ci * k * k;
                        for (std::int64_t ni = 0; ni < n; ++ni) {
                            const std::int64_t t = ni * c + ci;
                            fill_padded(px + t * h * w, h, w, p, padded.data());
                            for (std::int64_t oh = 0; oh < h; ++oh) {
                                const T* grow = g + t * h * w + oh * w;
                                for (int r = 0; r < k; ++r) {
                                    const T* prow = padded.data() + (oh + r) * pw;
                                    for (int s = 0; s < k; ++s) {
                                        dkc[r * k + s] +=
                                            K<T>().dot(grow, prow + s, static_cast<std::size_t>(w));
                                    }
                                }
                            }
                        }
                    }
                });
            }
            if (bv.requires_grad()) {
                T* db = bv.ensure_grad();
                parallel_for(c, [&](std::int64_t c0, std::int64_t c1) {
                    for (std::int64_t ci = c0; ci < c1; ++ci) {
                        T acc = T(0);
                        for (std::int64_t ni = 0; ni < n; ++ni) {
                            acc += K<T>().sum(g + (ni * c + ci) * h * w,
                                              static_cast<std::size_t>(h * w));
                        }
                        db[ci] += acc;
                    }
                });
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------- conv2d

template <typename T>
Tensor<T> conv2d(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int stride, int pad) {
    check_rank(x, 4, "conv2d");
    check_rank(w, 4, "conv2d weight");
    check_rank(bias, 1, "conv2d bias");
    if (stride < 1) throw ConfigError("conv2d: stride must be positive");
    const std::int64_t n = x.shape()[0], ci = x.shape()[1], h = x.shape()[2], ww = x.shape()[3];
    const std::int64_t co = w.shape()[0], wci = w.shape()[1], kh = w.shape()[2], kw = w.shape()[3];
    if (wci != ci) throw DimensionError("conv2d: channel mismatch");
    if (bias.shape()[0] != co) throw DimensionError("conv2d: bias extent mismatch");
    const std::int64_t eh = h + 2 * pad - kh;
    const std::int64_t ew = ww + 2 * pad - kw;
    if (eh < 0 || ew < 0 || h % stride != 0 || ww % stride != 0)
        throw DimensionError("conv2d: spatial extent " + x.shape().str() +
                             " not divisible by stride " + std::to_string(stride));
    const std::int64_t oh = eh / stride + 1;
    const std::int64_t ow = ew / stride + 1;

    Tensor<T> out = Tensor<T>::zeros({n, co, oh, ow});
    {
        const T* px = x.data();
        const T* pw = w.data();
        const T* pb = bias.data();
        T* py = out.data();
        parallel_for(n * co, [&](std::int64_t t0, std::int64_t t1) {
            for (std::int64_t t = t0; t < t1; ++t) {
                const std::int64_t ni = t / co, coi = t % co;
                for (std::int64_t r = 0; r < oh; ++r) {
                    for (std::int64_t s = 0; s < ow; ++s) {
                        T acc = pb[coi];
                        for (std::int64_t cii = 0; cii < ci; ++cii) {
                            const T* xp = px + (ni * ci + cii) * h * ww;
                            const T* wp = pw + ((coi * ci + cii) * kh) * kw;
                            for (std::int64_t u = 0; u < kh; ++u) {
                                const std::int64_t ih = r * stride + u - pad;
                                if (ih < 0 || ih >= h) continue;
                                for (std::int64_t v = 0; v < kw; ++v) {
                                    const std::int64_t iw = s * stride + v - pad;
                                    if (iw < 0 || iw >= ww) continue;
                                    acc += wp[u * kw + v] * xp[ih * ww + iw];
                                }
                            }
                        }
                        py[(t * oh + r) * ow + s] = acc;
                    }
                }
            }
        });
    }

    const bool need = tape && (x.requires_grad() || w.requires_grad() || bias.requires_grad());
    if (need) {
        out.set_requires_grad(true);
        Tensor<T> xv = x, wv = w, bv = bias, ov = out;
        const int st = stride, pd = pad;
        tape->record([xv, wv, bv, ov, n, ci, co, h, ww, kh, kw, oh, ow, st, pd]() mutable {
            const T* g = ov.grad_ptr();
            if (!g) return;
            if (xv.requires_grad()) {
                T* dx = xv.ensure_grad();
                const T* pw = wv.data();
                parallel_for(n * ci, [&](std::int64_t t0, std::int64_t t1) {
                    for (std::int64_t t = t0; t < t1; ++t) {
                        const std::int64_t ni = t / ci, cii = t % ci;
                        T* dxp = dx + t * h * ww;
                        for (std::int64_t coi = 0; coi < co; ++coi) {
                            const T* gp = g + (ni * co + coi) * oh * ow;
                            const T* wp = pw + ((coi * ci + cii) * kh) * kw;
                            for (std::int64_t r = 0; r < oh; ++r) {
                                for (std::int64_t s = 0; s < ow; ++s) {
                                    const T gv = gp[r * ow + s];
                                    for (std::int64_t u = 0; u < kh; ++u) {
                                        const std::int64_t ih = r * st + u - pd;
                                        if (ih < 0 || ih >= h) continue;
                                        for (std::int64_t v = 0; v < kw; ++v) {
                                            const std::int64_t iw = s * st + v - pd;
                                            if (iw < 0 || iw >= ww) continue;
                                            dxp[ih * ww + iw] += wp[u * kw + v] * gv;
                                        }
                                    }
                                }
                            }
                        }
                    }
                });
            }
            if (wv.requires_grad()) {
                T* dw = wv.ensure_grad();
                const T* px = xv.data();
                parallel_for(co, [&](std::int64_t c0, std::int64_t c1) {
                    for (std::int64_t coi = c0; coi < c1; ++coi) {
                        for (std::int64_t ni = 0; ni < n; ++ni) {
                            const T* gp = g + (ni * co + coi) * oh * ow;
                            for (std::int64_t r = 0; r < oh; ++r) {
                                for (std::int64_t s = 0; s < ow; ++s) {
                                    const T gv = gp[r * ow + s];
                                    for (std::int64_t cii = 0; cii < ci; ++cii) {
                                        const T* xp = px + (ni * ci + cii) * h * ww;
                                        T* dwp = dw + ((coi * ci + cii) * kh) * kw;
                                        for (std::int64_t u = 0; u < kh; ++u) {
                                            const std::int64_t ih = r * st + u - pd;
                                            if (ih < 0 || ih >= h) continue;
                                            for (std::int64_t v = 0; v < kw; ++v) {
                                                const std::int64_t iw = s * st + v - pd;
                                                if (iw < 0 || iw >= ww) continue;
                                                dwp[u * kw + v] += gv * xp[ih * ww + iw];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                });
            }
            if (bv.requires_grad()) {
                T* db = bv.ensure_grad();
                parallel_for(co, [&](std::int64_t c0, std::int64_t c1) {
                    for (std::int64_t coi = c0; coi < c1; ++coi) {
                        T acc = T(0);
                        for (std::int64_t ni = 0; ni < n; ++ni) {
                            acc += K<T>().sum(g + (ni * co + coi) * oh * ow,
                                              static_cast<std::size_t>(oh * ow));
                        }
                        db[coi] += acc;
                    }
                });
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------- pointwise_linear

template <typename T>
Tensor<T> pointwise_linear(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w,
                           const Tensor<T>& bias) {
    check_rank(x, 4, "pointwise_linear");
    check_rank(w, 2, "pointwise_linear weight");
    check_rank(bias, 1, "pointwise_linear bias");
    const std::int64_t n = x.shape()[0], ci = x.shape()[1], h = x.shape()[2], ww = x.shape()[3];
    const std::int64_t co = w.shape()[0];
    if (w.shape()[1] != ci)
        throw DimensionError("pointwise_linear: channel mismatch, x " + x.shape().str() + " w " +
                             w.shape().str());
    if (bias.shape()[0] != co) throw DimensionError("pointwise_linear: bias extent mismatch");
    const std::int64_t p = h * ww;

    Tensor<T> out = Tensor<T>::zeros({n, co, h, ww});
    {
        const T* px = x.data();
        const T* pw = w.data();
        const T* pb = bias.data();
        T* py = out.data();
        parallel_for(n * co, [&](std::int64_t t0, std::int64_t t1) {
            for (std::int64_t t = t0; t < t1; ++t) {
                const std::int64_t ni = t / co, coi = t % co;
                T* orow = py + t * p;
                std::fill(orow, orow + p, pb[coi]);
                for (std::int64_t cii = 0; cii < ci; ++cii) {
                    K<T>().axpy(pw[coi * ci + cii], px + (ni * ci + cii) * p, orow,
                                static_cast<std::size_t>(p));
                }
            }
        });
    }

    const bool need = tape && (x.requires_grad() || w.requires_grad() || bias.requires_grad());
    if (need) {
        out.set_requires_grad(true);
        Tensor<T> xv = x, wv = w, bv = bias, ov = out;
        tape->record([xv, wv, bv, ov, n, ci, co, p]() mutable {
            const T* g = ov.grad_ptr();
            if (!g) return;
            if (xv.requires_grad()) {
                T* dx = xv.ensure_grad();
                const T* pw = wv.data();
                parallel_for(n * ci, [&](std::int64_t t0, std::int64_t t1) {
                    for (std::int64_t t = t0; t < t1; ++t) {
                        const std::int64_t ni = t / ci, cii = t % ci;
                        T* drow = dx + t * p;
                        for (std::int64_t coi = 0; coi < co; ++coi) {
                            K<T>().axpy(pw[coi * ci + cii], g + (ni * co + coi) * p, drow,
                                        static_cast<std::size_t>(p));
                        }
                    }
                });
            }
            if (wv.requires_grad()) {
                T* dw = wv.ensure_grad();
                const T* px = xv.data();
                parallel_for(co, [&](std::int64_t c0, std::int64_t c1) {
                    for (std::int64_t coi = c0; coi < c1; ++coi) {
                        for (std::int64_t cii = 0; cii < ci; ++cii) {
                            T acc = T(0);
                            for (std::int64_t ni = 0; ni < n; ++ni) {
                                acc += K<T>().dot(g + (ni * co + coi) * p, px + (ni * ci + cii) * p,
                                                  static_cast<std::size_t>(p));
                            }
                            dw[coi * ci + cii] += acc;
                        }
                    }
                });
            }
            if (bv.requires_grad()) {
                T* db = bv.ensure_grad();
                parallel_for(co, [&](std::int64_t c0, std::int64_t c1) {
                    for (std::int64_t coi = c0; coi < c1; ++coi) {
                        T acc = T(0);
                        for (std::int64_t ni = 0; ni < n; ++ni) {
                            acc += K<T>().sum(g + (ni * co + coi) * p, static_cast<std::size_t>(p));
                        }
                        db[coi] += acc;
                    }
                });
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------- layer_norm_channels

template <typename T>
Tensor<T> layer_norm_channels(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& gamma,
                              const Tensor<T>& beta, T eps) {
    check_rank(x, 4, "layer_norm_channels");
    const std::int64_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    if (gamma.shape() != Shape{c} || beta.shape() != Shape{c})
        throw DimensionError("layer_norm_channels: affine extents must be [C]");
    const std::int64_t p = h * w;

    Tensor<T> out = Tensor<T>::zeros(x.shape());
    auto mu = std::make_shared<std::vector<T>>(static_cast<std::size_t>(n * p));
    auto rstd = std::make_shared<std::vector<T>>(static_cast<std::size_t>(n * p));
    {
        const T* px = x.data();
        const T* pg = gamma.data();
        const T* pbt = beta.data();
        T* py = out.data();
        parallel_for(n * h, [&](std::int64_t t0, std::int64_t t1) {
            for (std::int64_t t = t0; t < t1; ++t) {
                const std::int64_t ni = t / h, hi = t % h;
                for (std::int64_t wi = 0; wi < w; ++wi) {
                    const std::int64_t pos = hi * w + wi;
                    const T* base = px + ni * c * p + pos;
                    T m = T(0);
                    for (std::int64_t cc = 0; cc < c; ++cc) m += base[cc * p];
                    m /= static_cast<T>(c);
                    T var = T(0);
                    for (std::int64_t cc = 0; cc < c; ++cc) {
                        const T d = base[cc * p] - m;
                        var += d * d;
                    }
                    var /= static_cast<T>(c);
                    const T rs = T(1) / std::sqrt(var + eps);
                    (*mu)[ni * p + pos] = m;
                    (*rstd)[ni * p + pos] = rs;
                    T* obase = py + ni * c * p + pos;
                    for (std::int64_t cc = 0; cc < c; ++cc) {
                        obase[cc * p] = (base[cc * p] - m) * rs * pg[cc] + pbt[cc];
                    }
                }
            }
        });
    }

    const bool need = tape && (x.requires_grad() || gamma.requires_grad() || beta.requires_grad());
    if (need) {
        out.set_requires_grad(true);
        Tensor<T> xv = x, gv = gamma, bv = beta, ov = out;
        tape->record([xv, gv, bv, ov, mu, rstd, n, c, h, w, p]() mutable {
            const T* g = ov.grad_ptr();
            if (!g) return;
            const T* px = xv.data();
            const T* pg = gv.data();
            if (gv.requires_grad() || bv.requires_grad()) {
                T* dgam = gv.requires_grad() ? gv.ensure_grad() : nullptr;
                T* dbet = bv.requires_grad() ? bv.ensure_grad() : nullptr;
                parallel_for(c, [&](std::int64_t c0, std::int64_t c1) {
                    for (std::int64_t cc = c0; cc < c1; ++cc) {
                        T sg = T(0), sb = T(0);
                        for (std::int64_t ni = 0; ni < n; ++ni) {
                            const T* gbase = g + (ni * c + cc) * p;
                            const T* xbase = px + (ni * c + cc) * p;
                            for (std::int64_t pos = 0; pos < p; ++pos) {
                                const T xh =
                                    (xbase[pos] - (*mu)[ni * p + pos]) * (*rstd)[ni * p + pos];
                                sg += gbase[pos] * xh;
                                sb += gbase[pos];
                            }
                        }
                        if (dgam) dgam[cc] += sg;
                        if (dbet) dbet[cc] += sb;
                    }
                });
            }
            if (xv.requires_grad()) {
                T* dx = xv.ensure_grad();
                parallel_for(n * h, [&](std::int64_t t0, std::int64_t t1) {
                    for (std::int64_t t = t0; t < t1; ++t) {
                        const std::int64_t ni = t / h, hi = t % h;
                        for (std::int64_t wi = 0; wi < w; ++wi) {
                            const std::int64_t pos = hi * w + wi;
                            const T* xbase = px + ni * c * p + pos;
                            const T* gbase = g + ni * c * p + pos;
                            const T m = (*mu)[ni * p + pos];
                            const T rs = (*rstd)[ni * p + pos];
                            T mean_gg = T(0), mean_ggx = T(0);
                            for (std::int64_t cc = 0; cc < c; ++cc) {
                                const T xh = (xbase[cc * p] - m) * rs;
                                const T gg = gbase[cc * p] * pg[cc];
                                mean_gg += gg;
                                mean_ggx += gg * xh;
                            }
                            mean_gg /= static_cast<T>(c);
                            mean_ggx /= static_cast<T>(c);
                            T* dbase = dx + ni * c * p + pos;
                            for (std::int64_t cc = 0; cc < c; ++cc) {
                                const T xh = (xbase[cc * p] - m) * rs;
                                const T gg = gbase[cc * p] * pg[cc];
                                dbase[cc * p] += rs * (gg - mean_gg - xh * mean_ggx);
                            }
                        }
                    }
                });
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------- gelu / sigmoid

template <typename T>
Tensor<T> gelu(Tape<T>* tape, const Tensor<T>& x) {
    constexpr double kInvSqrt2 = 0.70710678118654752440;
    constexpr double kInvSqrt2Pi = 0.39894228040143267794;
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    {
        const T* px = x.data();
        T* py = out.data();
        parallel_for(x.numel(), [&](std::int64_t i0, std::int64_t i1) {
            for (std::int64_t i = i0; i < i1; ++i) {
                const double v = static_cast<double>(px[i]);
                py[i] = static_cast<T>(v * 0.5 * (1.0 + std::erf(v * kInvSqrt2)));
            }
        });
    }
    if (want_grad(tape, x)) {
        out.set_requires_grad(true);
        Tensor<T> xv = x, ov = out;
        tape->record([xv, ov]() mutable {
            const T* g = ov.grad_ptr();
            if (!g || !xv.requires_grad()) return;
            T* dx = xv.ensure_grad();
            const T* px = xv.data();
            parallel_for(xv.numel(), [&](std::int64_t i0, std::int64_t i1) {
                for (std::int64_t i = i0; i < i1; ++i) {
                    const double v = static_cast<double>(px[i]);
                    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
                    const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
                    dx[i] += g[i] * static_cast<T>(cdf + v * pdf);
                }
            });
        });
    }
    return out;
}

template <typename T>
Tensor<T> sigmoid(Tape<T>* tape, const Tensor<T>& x) {
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    {
        const T* px = x.data();
        T* py = out.data();
        parallel_for(x.numel(), [&](std::int64_t i0, std::int64_t i1) {
            for (std::int64_t i = i0; i < i1; ++i) {
                const T v = px[i];
                if (v >= T(0)) {
                    py[i] = T(1) / (T(1) + std::exp(-v));
                } else {
                    const T e = std::exp(v);
                    py[i] = e / (T(1) + e);
                }
            }
        });
    }
    if (want_grad(tape, x)) {
        out.set_requires_grad(true);
        Tensor<T> xv = x, ov = out;
        tape->record([xv, ov]() mutable {
            const T* g = ov.grad_ptr();
            if (!g || !xv.requires_grad()) return;
            T* dx = xv.ensure_grad();
            const T* y = ov.data();
            const std::int64_t n = xv.numel();
            for (std::int64_t i = 0; i < n; ++i) dx[i] += g[i] * y[i] * (T(1) - y[i]);
        });
    }
    return out;
}

// ---------------------------------------------------------------- l1_normalize_channels

template <typename T>
Tensor<T> l1_normalize_channels(Tape<T>* tape, const Tensor<T>& a, T eps) {
    check_rank(a, 4, "l1_normalize_channels");
    const std::int64_t n = a.shape()[0], c = a.shape()[1], h = a.shape()[2], w = a.shape()[3];
    const std::int64_t p = h * w;
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    auto sums = std::make_shared<std::vector<T>>(static_cast<std::size_t>(n * p));
    {
        const T* pa = a.data();
        T* py = out.data();
        parallel_for(n * h, [&](std::int64_t t0, std::int64_t t1) {
            for (std::int64_t t = t0; t < t1; ++t) {
                const std::int64_t ni = t / h, hi = t % h;
                for (std::int64_t wi = 0; wi < w; ++wi) {
                    const std::int64_t pos = hi * w + wi;
                    const T* base = pa + ni * c * p + pos;
                    T s = eps;
                    for (std::int64_t cc = 0; cc < c; ++cc) s += std::abs(base[cc * p]);
                    (*sums)[ni * p + pos] = s;
                    T* obase = py + ni * c * p + pos;
                    for (std::int64_t cc = 0; cc < c; ++cc) obase[cc * p] = base[cc * p] / s;
                }
            }
        });
    }
    if (want_grad(tape, a)) {
        out.set_requires_grad(true);
        Tensor<T> av = a, ov = out;
        tape->record([av, ov, sums, n, c, h, w, p]() mutable {
            const T* g = ov.grad_ptr();
            if (!g || !av.requires_grad()) return;
            T* dx = av.ensure_grad();
            const T* pa = av.data();
            const T* y = ov.data();
            parallel_for(n * h, [&](std::int64_t t0, std::int64_t t1) {
                for (std::int64_t t = t0; t < t1; ++t) {
                    const std::int64_t ni = t / h, hi = t % h;
                    for (std::int64_t wi = 0; wi < w; ++wi) {
                        const std::int64_t pos = hi * w + wi;
                        const T s = (*sums)[ni * p + pos];
                        const T* gbase = g + ni * c * p + pos;
                        const T* ybase = y + ni * c * p + pos;
                        const T* abase = pa + ni * c * p + pos;
                        T gy = T(0);
                        for (std::int64_t cc = 0; cc < c; ++cc) gy += gbase[cc * p] * ybase[cc * p];
                        T* dbase = dx + ni * c * p + pos;
                        for (std::int64_t cc = 0; cc < c; ++cc) {
                            const T av_ = abase[cc * p];
                            const T sgn = av_ > T(0) ? T(1) : (av_ < T(0) ? T(-1) : T(0));
                            dbase[cc * p] += gbase[cc * p] / s - gy / s * sgn;
                        }
                    }
                }
            });
        });
    }
    return out;
}

// ---------------------------------------------------------------- minmax_normalize_maps

template <typename T>
Tensor<T> minmax_normalize_maps(Tape<T>* tape, const Tensor<T>& a, T eps) {
    check_rank(a, 4, "minmax_normalize_maps");
    const std::int64_t n = a.shape()[0], c = a.shape()[1], h = a.shape()[2], w = a.shape()[3];
    const std::int64_t p = h * w;
    Tensor<T> out = Tensor<T>::zeros(a.shape());
    auto denom = std::make_shared<std::vector<T>>(static_cast<std::size_t>(n * c));
    auto imin = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(n * c));
    auto imax = std::make_shared<std::vector<std::int64_t>>(static_cast<std::size_t>(n * c));
    {
        const T* pa = a.data();
        T* py = out.data();
        parallel_for(n * c, [&](std::int64_t t0, std::int64_t t1) {
            for (std::int64_t t = t0; t < t1; ++t) {
                const T* plane = pa + t * p;
                T lo = plane[0], hi = plane[0];
                std::int64_t ilo = 0, ihi = 0;
                for (std::int64_t i = 1; i < p; ++i) {
                    if (plane[i] < lo) { lo = plane[i]; ilo = i; }
                    if (plane[i] > hi) { hi = plane[i]; ihi = i; }
                }
                const T d = hi - lo + eps;
                (*denom)[t] = d;
                (*imin)[t] = ilo;
                (*imax)[t] = ihi;
                T* oplane = py + t * p;
                for (std::int64_t i = 0; i < p; ++i) oplane[i] = (plane[i] - lo + eps) / d;
            }
        });
    }
    if (want_grad(tape, a)) {
        out.set_requires_grad(true);
        Tensor<T> av = a, ov = out;
        tape->record([av, ov, denom, imin, imax, n, c, p]() mutable {
            const T* g = ov.grad_ptr();
            if (!g || !av.requires_grad()) return;
            T* dx = av.ensure_grad();
            const T* y = ov.data();
            parallel_for(n * c, [&](std::int64_t t0, std::int64_t t1) {
                for (std::int64_t t = t0; t < t1; ++t) {
                    const T d = (*denom)[t];
                    const T* gp = g + t * p;
                    const T* yp = y + t * p;
                    T* dp = dx + t * p;
                    const T s = K<T>().sum(gp, static_cast<std::size_t>(p));
                    const T sy = K<T>().dot(gp, yp, static_cast<std::size_t>(p));
                    K<T>().axpy(T(1) / d, gp, dp, static_cast<std::size_t>(p));
                    dp[(*imin)[t]] += (sy - s) / d;
                    dp[(*imax)[t]] -= sy / d;
                }
            });
        });
    }
    return out;
}

// ---------------------------------------------------------------- channel_scale

template <typename T>
Tensor<T> channel_scale(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& s) {
    check_rank(x, 4, "channel_scale");
    const std::int64_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    if (s.shape() != Shape{c}) throw DimensionError("channel_scale: scale extent must be [C]");
    const std::int64_t p = h * w;
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    {
        const T* px = x.data();
        const T* ps = s.data();
        T* py = out.data();
        parallel_for(n * c, [&](std::int64_t t0, std::int64_t t1) {
            for (std::int64_t t = t0; t < t1; ++t) {
                K<T>().scale(px + t * p, ps[t % c], py + t * p, static_cast<std::size_t>(p));
            }
        });
    }
    const bool need = tape && (x.requires_grad() || s.requires_grad());
    if (need) {
        out.set_requires_grad(true);
        Tensor<T> xv = x, sv = s, ov = out;
        tape->record([xv, sv, ov, n, c, p]() mutable {
            const T* g = ov.grad_ptr();
            if (!g) return;
            if (xv.requires_grad()) {
                T* dx = xv.ensure_grad();
                const T* ps = sv.data();
                parallel_for(n * c, [&](std::int64_t t0, std::int64_t t1) {
                    for (std::int64_t t = t0; t < t1; ++t) {
                        K<T>().axpy(ps[t % c], g + t * p, dx + t * p, static_cast<std::size_t>(p));
                    }
                });
            }
            if (sv.requires_grad()) {
                T* ds = sv.ensure_grad();
                const T* px = xv.data();
                parallel_for(c, [&](std::int64_t c0, std::int64_t c1) {
                    for (std::int64_t cc = c0; cc < c1; ++cc) {
                        T acc = T(0);
                        for (std::int64_t ni = 0; ni < n; ++ni) {
                            acc += K<T>().dot(g + (ni * c + cc) * p, px + (ni * c + cc) * p,
                                              static_cast<std::size_t>(p));
                        }
                        ds[cc] += acc;
                    }
                });
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------- global_avg_pool

template <typename T>
Tensor<T> global_avg_pool(Tape<T>* tape, const Tensor<T>& x) {
    check_rank(x, 4, "global_avg_pool");
    const std::int64_t n = x.shape()[0], c = x.shape()[1], h = x.shape()[2], w = x.shape()[3];
    const std::int64_t p = h * w;
    Tensor<T> out = Tensor<T>::zeros({n, c});
    {
        const T* px = x.data();
        T* py = out.data();
        parallel_for(n * c, [&](std::int64_t t0, std::int64_t t1) {
            for (std::int64_t t = t0; t < t1; ++t) {
                py[t] = K<T>().sum(px + t * p, static_cast<std::size_t>(p)) / static_cast<T>(p);
            }
        });
    }
    if (want_grad(tape, x)) {
        out.set_requires_grad(true);
        Tensor<T> xv = x, ov = out;
        tape->record([xv, ov, n, c, p]() mutable {
            const T* g = ov.grad_ptr();
            if (!g || !xv.requires_grad()) return;
            T* dx = xv.ensure_grad();
            parallel_for(n * c, [&](std::int64_t t0, std::int64_t t1) {
                for (std::int64_t t = t0; t < t1; ++t) {
                    const T gv = g[t] / static_cast<T>(p);
                    T* dp = dx + t * p;
                    for (std::int64_t i = 0; i < p; ++i) dp[i] += gv;
                }
            });
        });
    }
    return out;
}

// ---------------------------------------------------------------- linear

template <typename T>
Tensor<T> linear(Tape<T>* tape, const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b) {
    check_rank(x, 2, "linear");
    check_rank(w, 2, "linear weight");
    check_rank(b, 1, "linear bias");
    const std::int64_t n = x.shape()[0], c = x.shape()[1];
    const std::int64_t k = w.shape()[0];
    if (w.shape()[1] != c || b.shape()[0] != k)
        throw DimensionError("linear: extents disagree, x " + x.shape().str() + " w " +
                             w.shape().str());
    Tensor<T> out = Tensor<T>::zeros({n, k});
    {
        const T* px = x.data();
        const T* pw = w.data();
        const T* pb = b.data();
        T* py = out.data();
        parallel_for(n, [&](std::int64_t i0, std::int64_t i1) {
            for (std::int64_t i = i0; i < i1; ++i) {
                for (std::int64_t kk = 0; kk < k; ++kk) {
                    py[i * k + kk] =
                        pb[kk] + K<T>().dot(pw + kk * c, px + i * c, static_cast<std::size_t>(c));
                }
            }
        });
    }
    const bool need = tape && (x.requires_grad() || w.requires_grad() || b.requires_grad());
    if (need) {
        out.set_requires_grad(true);
        Tensor<T> xv = x, wv = w, bv = b, ov = out;
        tape->record([xv, wv, bv, ov, n, c, k]() mutable {
            const T* g = ov.grad_ptr();
            if (!g) return;
            if (xv.requires_grad()) {
                T* dx = xv.ensure_grad();
                const T* pw = wv.data();
                parallel_for(n, [&](std::int64_t i0, std::int64_t i1) {
                    for (std::int64_t i = i0; i < i1; ++i) {
                        for (std::int64_t kk = 0; kk < k; ++kk) {
                            K<T>().axpy(g[i * k + kk], pw + kk * c, dx + i * c,
                                        static_cast<std::size_t>(c));
                        }
                    }
                });
            }
            if (wv.requires_grad()) {
                T* dw = wv.ensure_grad();
                const T* px = xv.data();
                parallel_for(k, [&](std::int64_t k0, std::int64_t k1) {
                    for (std::int64_t kk = k0; kk < k1; ++kk) {
                        for (std::int64_t i = 0; i < n; ++i) {
                            K<T>().axpy(g[i * k + kk], px + i * c, dw + kk * c,
                                        static_cast<std::size_t>(c));
                        }
                    }
                });
            }
            if (bv.requires_grad()) {
                T* db = bv.ensure_grad();
                for (std::int64_t kk = 0; kk < k; ++kk) {
                    T acc = T(0);
                    for (std::int64_t i = 0; i < n; ++i) acc += g[i * k + kk];
                    db[kk] += acc;
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------- drop_path

template <typename T>
Tensor<T> drop_path_apply(Tape<T>* tape, const Tensor<T>& x, const std::vector<char>& keep,
                          T keep_scale) {
    check_rank(x, 4, "drop_path");
    const std::int64_t n = x.shape()[0];
    if (static_cast<std::int64_t>(keep.size()) != n)
        throw DimensionError("drop_path: keep mask size must equal batch");
    const std::int64_t stride = x.numel() / n;
    Tensor<T> out = Tensor<T>::zeros(x.shape());
    {
        const T* px = x.data();
        T* py = out.data();
        for (std::int64_t i = 0; i < n; ++i) {
            if (keep[static_cast<std::size_t>(i)]) {
                K<T>().scale(px + i * stride, keep_scale, py + i * stride,
                             static_cast<std::size_t>(stride));
            }
        }
    }
    if (want_grad(tape, x)) {
        out.set_requires_grad(true);
        Tensor<T> xv = x, ov = out;
        auto mask = std::make_shared<std::vector<char>>(keep);
        tape->record([xv, ov, mask, keep_scale, n, stride]() mutable {
            const T* g = ov.grad_ptr();
            if (!g || !xv.requires_grad()) return;
            T* dx = xv.ensure_grad();
            for (std::int64_t i = 0; i < n; ++i) {
                if ((*mask)[static_cast<std::size_t>(i)]) {
                    K<T>().axpy(keep_scale, g + i * stride, dx + i * stride,
                                static_cast<std::size_t>(stride));
                }
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> drop_path(Tape<T>* tape, const Tensor<T>& x, double p, bool training, Rng& rng) {
    if (p < 0.0 || p >= 1.0)
        throw ConfigError("drop_path: rate must be in [0,1), got " + std::to_string(p));
    if (!training || p == 0.0) return x;
    check_rank(x, 4, "drop_path");
    const std::int64_t n = x.shape()[0];
    std::vector<char> keep(static_cast<std::size_t>(n));
    for (std::int64_t i = 0; i < n; ++i) keep[static_cast<std::size_t>(i)] = rng.uniform() >= p;
    return drop_path_apply(tape, x, keep, static_cast<T>(1.0 / (1.0 - p)));
}

// ---------------------------------------------------------------- cross_entropy_smoothed

template <typename T>
Tensor<T> cross_entropy_smoothed(Tape<T>* tape, const Tensor<T>& logits,
                                 const std::vector<int>& labels, T eps_smooth) {
    check_rank(logits, 2, "cross_entropy_smoothed");
    const std::int64_t n = logits.shape()[0], k = logits.shape()[1];
    if (static_cast<std::int64_t>(labels.size()) != n)
        throw ContractError("cross_entropy_smoothed: label count must equal batch");
    for (int y : labels) {
        if (y < 0 || y >= k)
            throw ContractError("cross_entropy_smoothed: label " + std::to_string(y) +
                                " outside [0," + std::to_string(k) + ")");
    }
    if (eps_smooth < T(0) || eps_smooth >= T(1))
        throw ContractError("cross_entropy_smoothed: smoothing must be in [0,1)");

    Tensor<T> out = Tensor<T>::zeros({1});
    {
        const T* pl = logits.data();
        double total = 0.0;
        for (std::int64_t i = 0; i < n; ++i) {
            const T* row = pl + i * k;
            T mx = row[0];
            for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
            double z = 0.0, rowsum = 0.0;
            for (std::int64_t j = 0; j < k; ++j) {
                z += std::exp(static_cast<double>(row[j] - mx));
                rowsum += static_cast<double>(row[j]);
            }
            const double log_z = static_cast<double>(mx) + std::log(z);
            const double eps = static_cast<double>(eps_smooth);
            // loss = logZ - sum_k t_k x_k with t = eps/K + (1-eps) one_hot.
            const double tx =
                (1.0 - eps) * static_cast<double>(row[labels[static_cast<std::size_t>(i)]]) +
                eps / static_cast<double>(k) * rowsum;
            total += log_z - tx;
        }
        out.data()[0] = static_cast<T>(total / static_cast<double>(n));
    }

    if (want_grad(tape, logits)) {
        out.set_requires_grad(true);
        Tensor<T> lv = logits, ov = out;
        auto labs = std::make_shared<std::vector<int>>(labels);
        tape->record([lv, ov, labs, eps_smooth, n, k]() mutable {
            const T* g = ov.grad_ptr();
            if (!g || !lv.requires_grad()) return;
            const T g0 = g[0];
            T* dl = lv.ensure_grad();
            const T* pl = lv.data();
            const T eps = eps_smooth;
            parallel_for(n, [&](std::int64_t i0, std::int64_t i1) {
                for (std::int64_t i = i0; i < i1; ++i) {
                    const T* row = pl + i * k;
                    T mx = row[0];
                    for (std::int64_t j = 1; j < k; ++j) mx = std::max(mx, row[j]);
                    double z = 0.0;
                    for (std::int64_t j = 0; j < k; ++j)
                        z += std::exp(static_cast<double>(row[j] - mx));
                    const int y = (*labs)[static_cast<std::size_t>(i)];
                    for (std::int64_t j = 0; j < k; ++j) {
                        const T prob =
                            static_cast<T>(std::exp(static_cast<double>(row[j] - mx)) / z);
                        T target = eps / static_cast<T>(k);
                        if (j == y) target += T(1) - eps;
                        dl[i * k + j] += g0 * (prob - target) / static_cast<T>(n);
                    }
                }
            });
        });
    }
    return out;
}

// ---------------------------------------------------------------- instantiations

#define C2F_INSTANTIATE_OPS(T)                                                                     \
    template Tensor<T> matmul<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&);                    \
    template Tensor<T> transpose<T>(Tape<T>*, const Tensor<T>&);                                   \
    template Tensor<T> add<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&);                       \
    template Tensor<T> hadamard<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&);                  \
    template Tensor<T> scale<T>(Tape<T>*, const Tensor<T>&, T);                                    \
    template Tensor<T> softmax_rows<T>(Tape<T>*, const Tensor<T>&);                                \
    template Tensor<T> sum_all<T>(Tape<T>*, const Tensor<T>&);                                     \
    template Tensor<T> depthwise_conv2d<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&,           \
                                           const Tensor<T>&);                                      \
    template Tensor<T> conv2d<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,   \
                                 int, int);                                                        \
    template Tensor<T> pointwise_linear<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&,           \
                                           const Tensor<T>&);                                      \
    template Tensor<T> layer_norm_channels<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&,        \
                                              const Tensor<T>&, T);                                \
    template Tensor<T> gelu<T>(Tape<T>*, const Tensor<T>&);                                        \
    template Tensor<T> sigmoid<T>(Tape<T>*, const Tensor<T>&);                                     \
    template Tensor<T> l1_normalize_channels<T>(Tape<T>*, const Tensor<T>&, T);                    \
    template Tensor<T> minmax_normalize_maps<T>(Tape<T>*, const Tensor<T>&, T);                    \
    template Tensor<T> channel_scale<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&);             \
    template Tensor<T> global_avg_pool<T>(Tape<T>*, const Tensor<T>&);                             \
    template Tensor<T> linear<T>(Tape<T>*, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
    template Tensor<T> drop_path<T>(Tape<T>*, const Tensor<T>&, double, bool, Rng&);               \
    template Tensor<T> drop_path_apply<T>(Tape<T>*, const Tensor<T>&, const std::vector<char>&,    \
                                          T);                                                      \
    template Tensor<T> cross_entropy_smoothed<T>(Tape<T>*, const Tensor<T>&,                       \
                                                 const std::vector<int>&, T);

C2F_INSTANTIATE_OPS(float)
C2F_INSTANTIATE_OPS(double)

}  // namespace c2f
