#pragma once

#include <cstdint>
#include <vector>

#include "latentlab/tensor.hpp"

namespace latentlab {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
};

/// Per-parameter first/second moment accumulators plus the shared step count.
struct OptimizerState {
    AdamWConfig hp;
    std::vector<Tensor> m;
    std::vector<Tensor> v;
    int64_t step = 0;

    static OptimizerState init(const AdamWConfig& hp, const std::vector<const Tensor*>& params);
};

/// One AdamW step: decoupled weight decay applied directly to the parameters,
/// bias-corrected moments, step counter incremented. Bit-deterministic.
void adamw_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads,
                OptimizerState& state);

}  // namespace latentlab
