#pragma once

#include <cstddef>

namespace c2f::kernels {

/// Table of the data-parallel primitives every tensor op is built from.
/// The scalar table is the reference semantics; the AVX2 table must agree
/// with it within floating-point reassociation error (equivalence-tested).
template <typename T>
struct Kernels {
    void (*add)(const T* a, const T* b, T* y, std::size_t n);      // y = a + b
    void (*mul)(const T* a, const T* b, T* y, std::size_t n);      // y = a * b
    void (*mul_acc)(const T* a, const T* b, T* y, std::size_t n);  // y += a * b
    void (*axpy)(T alpha, const T* x, T* y, std::size_t n);        // y += alpha * x
    void (*scale)(const T* x, T alpha, T* y, std::size_t n);       // y = alpha * x
    T (*dot)(const T* a, const T* b, std::size_t n);
    T (*sum)(const T* x, std::size_t n);
    void (*vexp)(const T* x, T* y, std::size_t n);                 // y = exp(x)
    const char* name;
};

template <typename T> const Kernels<T>& scalar_table();

/// AVX2+FMA variants. Off x86 (or when the CPU lacks the features) the
/// entries alias the scalar implementations.
template <typename T> const Kernels<T>& avx2_table();

bool avx2_available();

/// Table selected once at startup: AVX2 when the CPU supports it, scalar
/// otherwise. Overridable for debugging via C2F_ISA=scalar|avx2.
template <typename T> const Kernels<T>& active();

const char* active_isa();

}  // namespace c2f::kernels
