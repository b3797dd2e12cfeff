#include "c2f/kernels.hpp"

#include <cmath>

// Reference kernels. Plain loops in a fixed evaluation order; the SIMD
// variants are validated against these.

namespace c2f::kernels {
namespace scalar {

template <typename T>
void add(const T* a, const T* b, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] + b[i];
}

template <typename T>
void mul(const T* a, const T* b, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = a[i] * b[i];
}

template <typename T>
void mul_acc(const T* a, const T* b, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a[i] * b[i];
}

template <typename T>
void axpy(T alpha, const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <typename T>
void scale(const T* x, T alpha, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i];
}

template <typename T>
T dot(const T* a, const T* b, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
    return acc;
}

template <typename T>
T sum(const T* x, std::size_t n) {
    T acc = T(0);
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

template <typename T>
void vexp(const T* x, T* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

}  // namespace scalar

template <typename T>
const Kernels<T>& scalar_table() {
    static const Kernels<T> table{
        &scalar::add<T>,  &scalar::mul<T>,   &scalar::mul_acc<T>,
        &scalar::axpy<T>, &scalar::scale<T>, &scalar::dot<T>,
        &scalar::sum<T>,  &scalar::vexp<T>,  "scalar",
    };
    return table;
}

template const Kernels<float>& scalar_table<float>();
template const Kernels<double>& scalar_table<double>();

}  // namespace c2f::kernels
