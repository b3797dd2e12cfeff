#include "c2f/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "c2f/ops.hpp"

namespace c2f {

// ------------------------------------------------------------- AdamW

template <typename T>
OptimState<T> OptimState<T>::init(const std::vector<Tensor<T>>& params) {
    OptimState<T> s;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const auto& p : params) {
        s.m.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
        s.v.emplace_back(static_cast<std::size_t>(p.numel()), T(0));
    }
    return s;
}

template <typename T>
void adamw_step(std::vector<Tensor<T>>& params, OptimState<T>& state, double lr_t) {
    if (params.size() != state.m.size())
        throw ContractError("adamw_step: state does not match parameter list");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor<T>& p = params[i];
        if (static_cast<std::int64_t>(state.m[i].size()) != p.numel())
            throw ContractError("adamw_step: moment shape does not match parameter");
        T* pv = p.data();
        const T* g = p.grad_ptr();
        T* m = state.m[i].data();
        T* v = state.v[i].data();
        const std::int64_t n = p.numel();
        for (std::int64_t j = 0; j < n; ++j) {
            const double gj = g ? static_cast<double>(g[j]) : 0.0;
            const double mj = state.beta1 * static_cast<double>(m[j]) + (1.0 - state.beta1) * gj;
            const double vj =
                state.beta2 * static_cast<double>(v[j]) + (1.0 - state.beta2) * gj * gj;
            m[j] = static_cast<T>(mj);
            v[j] = static_cast<T>(vj);
            const double mhat = mj / bc1;
            const double vhat = vj / bc2;
            const double pj = static_cast<double>(pv[j]);
            pv[j] = static_cast<T>(
                pj - lr_t * (mhat / (std::sqrt(vhat) + state.eps) + state.weight_decay * pj));
        }
    }
}

double cosine_lr(std::int64_t step, std::int64_t total, std::int64_t warmup, double lr_max) {
    if (step < 0 || step > total)
        throw ContractError("cosine_lr: step " + std::to_string(step) + " outside [0," +
                            std::to_string(total) + "]");
    if (warmup < 0 || warmup >= total)
        throw ContractError("cosine_lr: warmup must lie in [0,total)");
    if (step < warmup) return lr_max * static_cast<double>(step) / static_cast<double>(warmup);
    const double u = static_cast<double>(step - warmup) / static_cast<double>(total - warmup);
    return lr_max * 0.5 * (1.0 + std::cos(3.14159265358979323846 * u));
}

// ------------------------------------------------------------- dataset

namespace {

// Distinct base colors, one per class, spread around a color wheel.
void class_color(int cls, double rgb[3]) {
    const double h = 6.283185307179586 * static_cast<double>(cls) / 10.0;
    rgb[0] = 0.5 + 0.5 * std::cos(h);
    rgb[1] = 0.5 + 0.5 * std::cos(h - 2.0943951023931953);
    rgb[2] = 0.5 + 0.5 * std::cos(h + 2.0943951023931953);
}

}  // namespace

void SynthDataset::render(std::int64_t index, float* chw) const {
    Rng rng = Rng(seed).fork(static_cast<std::uint64_t>(index) + 17);
    const int cls = label(index);
    const std::int64_t s = image_size;
    const double angle = (cls % 5) * (3.14159265358979 / 5.0) + rng.uniform(-0.12, 0.12);
    const double cx = static_cast<double>(s) / 2.0 + rng.uniform(-3.0, 3.0);
    const double cy = static_cast<double>(s) / 2.0 + rng.uniform(-3.0, 3.0);
    const bool bar = cls < 5;
    const double dx = std::cos(angle), dy = std::sin(angle);
    double rgb[3];
    class_color(cls, rgb);

    const double len = static_cast<double>(s) * 0.42;
    const double thickness = 2.2;
    const double blob_off = static_cast<double>(s) * 0.23;
    const double blob_sigma = 2.8;

    for (std::int64_t y = 0; y < s; ++y) {
        for (std::int64_t x = 0; x < s; ++x) {
            const double px = static_cast<double>(x) - cx;
            const double py = static_cast<double>(y) - cy;
            const double along = px * dx + py * dy;
            const double across = -px * dy + py * dx;
            double intensity = 0.0;
            if (bar) {
                if (std::abs(along) < len && std::abs(across) < thickness + 1.0) {
                    intensity = std::clamp(thickness + 1.0 - std::abs(across), 0.0, 1.0);
                }
            } else {
                const double d1 = (along - blob_off) * (along - blob_off) + across * across;
                const double d2 = (along + blob_off) * (along + blob_off) + across * across;
                intensity = std::exp(-d1 / (2.0 * blob_sigma * blob_sigma)) +
                            std::exp(-d2 / (2.0 * blob_sigma * blob_sigma));
                intensity = std::min(intensity, 1.0);
            }
            for (int c = 0; c < 3; ++c) {
                const double noise = 0.06 * rng.normal();
                const double v = intensity * rgb[c] + noise - 0.25;
                chw[c * s * s + y * s + x] = static_cast<float>(v);
            }
        }
    }
}

// ------------------------------------------------------------- loops

namespace {

template <typename T>
Tensor<T> make_batch(const SynthDataset& data, const std::vector<std::int64_t>& indices,
                     std::vector<int>& labels_out) {
    const std::int64_t n = static_cast<std::int64_t>(indices.size());
    const std::int64_t s = data.image_size;
    Tensor<T> batch = Tensor<T>::zeros({n, 3, s, s});
    labels_out.resize(static_cast<std::size_t>(n));
    std::vector<float> img(static_cast<std::size_t>(3 * s * s));
    for (std::int64_t i = 0; i < n; ++i) {
        data.render(indices[static_cast<std::size_t>(i)], img.data());
        T* dst = batch.data() + i * 3 * s * s;
        for (std::size_t j = 0; j < img.size(); ++j) dst[j] = static_cast<T>(img[j]);
        labels_out[static_cast<std::size_t>(i)] =
            data.label(indices[static_cast<std::size_t>(i)]);
    }
    return batch;
}

template <typename T>
std::int64_t count_correct(const Tensor<T>& logits, const std::vector<int>& labels) {
    const std::int64_t n = logits.shape()[0], k = logits.shape()[1];
    std::int64_t correct = 0;
    const T* p = logits.data();
    for (std::int64_t i = 0; i < n; ++i) {
        std::int64_t best = 0;
        for (std::int64_t j = 1; j < k; ++j) {
            if (p[i * k + j] > p[i * k + best]) best = j;
        }
        if (best == labels[static_cast<std::size_t>(i)]) ++correct;
    }
    return correct;
}

}  // namespace

template <typename T>
double evaluate_accuracy(const Model<T>& m, const SynthDataset& data, bool val_split,
                         std::int64_t batch_size) {
    const std::int64_t base = val_split ? data.train_size : 0;
    const std::int64_t count = val_split ? data.val_size : data.train_size;
    Rng unused(0);
    std::int64_t correct = 0;
    std::vector<int> labels;
    for (std::int64_t off = 0; off < count; off += batch_size) {
        const std::int64_t n = std::min(batch_size, count - off);
        std::vector<std::int64_t> idx(static_cast<std::size_t>(n));
        std::iota(idx.begin(), idx.end(), base + off);
        Tensor<T> batch = make_batch<T>(data, idx, labels);
        Tensor<T> logits = model_forward<T>(nullptr, m, batch, false, unused);
        correct += count_correct(logits, labels);
    }
    return static_cast<double>(correct) / static_cast<double>(count);
}

template <typename T>
std::vector<HistoryRow> train_loop(Model<T>& m, const TrainConfig& cfg, const SynthDataset& data) {
    if (cfg.batch_size < 1 || cfg.epochs < 1)
        throw ConfigError("train_loop: batch_size and epochs must be positive");
    const std::int64_t steps_per_epoch = data.train_size / cfg.batch_size;
    if (steps_per_epoch < 1)
        throw ConfigError("train_loop: train_size smaller than one batch");
    const std::int64_t total_steps = steps_per_epoch * cfg.epochs;
    const std::int64_t warmup =
        cfg.warmup_steps >= 0
            ? cfg.warmup_steps
            : static_cast<std::int64_t>(std::llround(0.05 * static_cast<double>(total_steps)));
    if (warmup >= total_steps)
        throw ConfigError("train_loop: warmup does not fit inside the step budget");
    const double lr_max = cfg.effective_lr();

    set_params_requires_grad(m, true);
    std::vector<Tensor<T>> params = collect_params(m);
    OptimState<T> opt = OptimState<T>::init(params);

    Rng shuffle_rng = Rng(cfg.seed).fork(1);
    Rng path_rng = Rng(cfg.seed).fork(2);

    std::vector<std::int64_t> order(static_cast<std::size_t>(data.train_size));
    std::iota(order.begin(), order.end(), 0);

    std::vector<HistoryRow> history;
    std::int64_t step = 0;
    std::vector<int> labels;
    for (std::int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        // Fisher-Yates over the epoch's sample order.
        for (std::int64_t i = data.train_size - 1; i > 0; --i) {
            const std::int64_t j =
                static_cast<std::int64_t>(shuffle_rng.next_u64() % static_cast<std::uint64_t>(i + 1));
            std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
        }
        double loss_sum = 0.0;
        double last_lr = 0.0;
        for (std::int64_t b = 0; b < steps_per_epoch; ++b) {
            std::vector<std::int64_t> idx(order.begin() + b * cfg.batch_size,
                                          order.begin() + (b + 1) * cfg.batch_size);
            Tensor<T> batch = make_batch<T>(data, idx, labels);
            Tape<T> tape;
            Tensor<T> logits = model_forward(&tape, m, batch, true, path_rng);
            Tensor<T> loss = cross_entropy_smoothed(&tape, logits, labels,
                                                    static_cast<T>(cfg.label_smoothing));
            tape.backward(loss);
            last_lr = cosine_lr(step, total_steps, warmup, lr_max);
            adamw_step(params, opt, last_lr);
            for (auto& p : params) p.zero_grad();
            loss_sum += static_cast<double>(loss.item());
            ++step;
        }
        HistoryRow row;
        row.step = step;
        row.lr = last_lr;
        row.loss = loss_sum / static_cast<double>(steps_per_epoch);
        row.train_acc = evaluate_accuracy(m, data, false, cfg.batch_size);
        row.val_acc = evaluate_accuracy(m, data, true, cfg.batch_size);
        history.push_back(row);
    }
    return history;
}

std::string history_to_csv(const std::vector<HistoryRow>& rows) {
    std::string out = "step,lr,loss,train_acc,val_acc\n";
    char buf[160];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%lld,%.9g,%.9g,%.9g,%.9g\n",
                      static_cast<long long>(r.step), r.lr, r.loss, r.train_acc, r.val_acc);
        out += buf;
    }
    return out;
}

std::vector<AblationRow> ablate_fusion(const ModelConfig& base, const TrainConfig& tcfg,
                                       const std::vector<FusionStrategy>& strategies,
                                       const std::vector<std::uint64_t>& seeds) {
    if (seeds.size() < 3) throw ContractError("ablate_fusion: needs at least 3 seeds");
    std::vector<AblationRow> rows;
    for (FusionStrategy s : strategies) {
        AblationRow row;
        row.strategy = s;
        for (std::uint64_t seed : seeds) {
            ModelConfig cfg = base;
            cfg.fusion = s;
            TrainConfig tc = tcfg;
            tc.seed = seed;
            SynthDataset data;
            data.image_size = tc.image_size;
            data.train_size = tc.train_size;
            data.val_size = tc.val_size;
            data.num_classes = cfg.num_classes;
            data.seed = seed;
            Rng init_rng = Rng(seed).fork(0);
            Model<float> model = build_model<float>(cfg, init_rng);
            std::vector<HistoryRow> hist = train_loop(model, tc, data);
            row.val_accs.push_back(hist.back().val_acc);
        }
        double mean = 0.0;
        for (double a : row.val_accs) mean += a;
        mean /= static_cast<double>(row.val_accs.size());
        double var = 0.0;
        for (double a : row.val_accs) var += (a - mean) * (a - mean);
        var /= static_cast<double>(row.val_accs.size());
        row.mean = mean;
        row.stddev = std::sqrt(var);
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_to_csv(const std::vector<AblationRow>& rows) {
    std::string out = "strategy,mean_val_acc,std_val_acc,seeds\n";
    char buf[96];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), ",%.9g,%.9g,%zu\n", r.mean, r.stddev, r.val_accs.size());
        out += fusion_name(r.strategy);
        out += buf;
    }
    return out;
}

#define C2F_INSTANTIATE_TRAIN(T)                                                              \
    template struct OptimState<T>;                                                            \
    template void adamw_step<T>(std::vector<Tensor<T>>&, OptimState<T>&, double);             \
    template double evaluate_accuracy<T>(const Model<T>&, const SynthDataset&, bool,          \
                                         std::int64_t);                                       \
    template std::vector<HistoryRow> train_loop<T>(Model<T>&, const TrainConfig&,             \
                                                   const SynthDataset&);

C2F_INSTANTIATE_TRAIN(float)
C2F_INSTANTIATE_TRAIN(double)

}  // namespace c2f
