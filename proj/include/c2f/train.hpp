#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "c2f/model.hpp"

namespace c2f {

/// AdamW moments, one slot per parameter tensor in canonical order.
template <typename T>
struct OptimState {
    std::vector<std::vector<T>> m, v;
    std::int64_t t = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.05;

    static OptimState init(const std::vector<Tensor<T>>& params);
};

/// One decoupled-weight-decay Adam step: p -= lr_t * (m_hat/(sqrt(v_hat)+eps)
/// + wd * p). Gradients are read from the parameters' grad buffers (missing
/// buffer = zero gradient); bias correction uses the incremented step count.
template <typename T>
void adamw_step(std::vector<Tensor<T>>& params, OptimState<T>& state, double lr_t);

/// Linear warmup to lr_max over `warmup` steps, then cosine decay to zero at
/// `total`.
double cosine_lr(std::int64_t step, std::int64_t total, std::int64_t warmup, double lr_max);

struct TrainConfig {
    std::int64_t batch_size = 32;
    double lr_base = 0.001;
    std::int64_t warmup_steps = -1;  // -1: 5% of total steps
    std::int64_t epochs = 1;
    double label_smoothing = 0.1;
    std::uint64_t seed = 0;
    std::int64_t train_size = 512;
    std::int64_t val_size = 256;
    std::int64_t image_size = 32;

    bool operator==(const TrainConfig&) const = default;

    /// Linear batch-size scaling rule.
    double effective_lr() const {
        return lr_base * static_cast<double>(batch_size) / 1024.0;
    }
};

/// Procedural 10-class image set: class-conditioned oriented bars or blob
/// pairs on a noisy background, generated per index from the seed alone so
/// any index is reproducible in isolation. Classes cycle with the index, so
/// every contiguous split is balanced. Train indices are [0, train_size),
/// validation follows.
struct SynthDataset {
    std::int64_t num_classes = 10;
    std::int64_t image_size = 32;
    std::int64_t train_size = 512;
    std::int64_t val_size = 256;
    std::uint64_t seed = 0;

    int label(std::int64_t index) const { return static_cast<int>(index % num_classes); }

    /// Writes one CHW image (3 x image_size x image_size).
    void render(std::int64_t index, float* chw) const;
};

struct HistoryRow {
    std::int64_t step = 0;
    double lr = 0.0;
    double loss = 0.0;
    double train_acc = 0.0;
    double val_acc = 0.0;
};

/// "step,lr,loss,train_acc,val_acc" with one row per entry.
std::string history_to_csv(const std::vector<HistoryRow>& rows);

/// Full-split accuracy in eval mode.
template <typename T>
double evaluate_accuracy(const Model<T>& m, const SynthDataset& data, bool val_split,
                         std::int64_t batch_size);

/// Epoch-driven AdamW training with cosine schedule and label smoothing.
/// Deterministic for a fixed (model, config, dataset): identical reruns give
/// bitwise-identical parameters and history. One row per epoch.
template <typename T>
std::vector<HistoryRow> train_loop(Model<T>& m, const TrainConfig& cfg, const SynthDataset& data);

struct AblationRow {
    FusionStrategy strategy;
    std::vector<double> val_accs;  // one per seed, in input order
    double mean = 0.0;
    double stddev = 0.0;
};

/// Trains one fresh model per (strategy, seed) under otherwise identical
/// settings and reports final validation accuracy. Needs at least 3 seeds.
std::vector<AblationRow> ablate_fusion(const ModelConfig& base, const TrainConfig& tcfg,
                                       const std::vector<FusionStrategy>& strategies,
                                       const std::vector<std::uint64_t>& seeds);

std::string ablation_to_csv(const std::vector<AblationRow>& rows);

}  // namespace c2f
