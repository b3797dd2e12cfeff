#include "c2f/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace c2f::kernels {

namespace {

bool cpu_has_avx2_fma() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

// Chosen once; the decision is stable for the lifetime of the process so
// every run on a fixed machine executes the same kernel set.
bool choose_avx2() {
    const char* env = std::getenv("C2F_ISA");
    if (env && std::strcmp(env, "scalar") == 0) return false;
    if (env && std::strcmp(env, "avx2") == 0) return cpu_has_avx2_fma();
    return cpu_has_avx2_fma();
}

bool use_avx2() {
    static const bool v = choose_avx2();
    return v;
}

}  // namespace

bool avx2_available() { return cpu_has_avx2_fma(); }

template <>
const Kernels<float>& active<float>() {
    return use_avx2() ? avx2_table<float>() : scalar_table<float>();
}

template <>
const Kernels<double>& active<double>() {
    return use_avx2() ? avx2_table<double>() : scalar_table<double>();
}

const char* active_isa() { return use_avx2() ? "avx2" : "scalar"; }

}  // namespace c2f::kernels
