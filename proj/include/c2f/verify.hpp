#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace c2f {

struct OpCheckResult {
    std::string name;
    double max_rel_err = 0.0;  // worst over all seeds
    double threshold = 1e-5;
    bool pass() const { return max_rel_err < threshold; }
};

/// f64 central-difference check of every differentiable op plus a tiny
/// end-to-end model (threshold 1e-4 for the latter, 1e-5 for ops). Each op
/// is probed with `num_seeds` seeded random inputs; the reported error is
/// the maximum observed.
std::vector<OpCheckResult> run_gradcheck_suite(std::uint64_t seed_base, int num_seeds);

}  // namespace c2f
