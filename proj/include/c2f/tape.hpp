#pragma once

#include <functional>
#include <vector>

#include "c2f/errors.hpp"
#include "c2f/tensor.hpp"

namespace c2f {

namespace debug {
/// Negative-control hook for the gradient checker: when set, one backward
/// rule (matmul's dA term) is deliberately perturbed. Never set in normal
/// operation; exposed so a verification run can prove it would catch a bug.
extern bool inject_backward_bug;
}  // namespace debug

/// Reverse-mode record of one forward pass. Ops append their backward rule
/// in execution order; backward() replays them in reverse, accumulating into
/// the grad buffers of every tensor that requires grad. Single-threaded and
/// single-use: the record is discarded after backward.
template <typename T>
class Tape {
public:
    using BackwardFn = std::function<void()>;

    void record(BackwardFn fn) {
        if (consumed_) throw ContractError("Tape: recording after backward");
        nodes_.push_back(std::move(fn));
    }

    std::size_t size() const { return nodes_.size(); }
    bool consumed() const { return consumed_; }

    /// Seeds d(loss)/d(loss) = 1 and replays the record in reverse. Leaf
    /// gradients accumulate across tapes; Tensor::zero_grad resets them.
    void backward(Tensor<T>& loss) {
        if (consumed_) throw ContractError("Tape: backward called twice");
        if (loss.numel() != 1)
            throw ContractError("Tape::backward: loss must be scalar, got " + loss.shape().str());
        consumed_ = true;
        loss.ensure_grad()[0] += T(1);
        for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
        nodes_.clear();
        nodes_.shrink_to_fit();
    }

private:
    std::vector<BackwardFn> nodes_;
    bool consumed_ = false;
};

template <typename T>
void backward(Tape<T>& tape, Tensor<T>& loss) {
    tape.backward(loss);
}

}  // namespace c2f
