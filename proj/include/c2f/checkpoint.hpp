#pragma once

#include <string>

#include "c2f/model.hpp"

namespace c2f {

/// Single-file checkpoint:
///   "C2FW" | u32-le format version | u64-le manifest length |
///   manifest JSON (config + ordered tensor records) | raw little-endian
///   tensor payload in manifest order.
/// Writes go to a temp file renamed into place. save -> load -> save is
/// byte-identical, and a loaded model's eval logits match the saved model's
/// bitwise.
inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void checkpoint_save(Model<T>& m, const std::string& path);  // IoError on write failure

/// Rejects bad magic, unknown version, truncated payload and manifest/model
/// mismatches with FormatError.
template <typename T>
Model<T> checkpoint_load(const std::string& path);

/// Peeks the tensor dtype recorded in the manifest ("f32" or "f64").
std::string checkpoint_dtype(const std::string& path);

}  // namespace c2f
