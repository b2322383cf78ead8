#include "latentlab/optim.hpp"

#include <cmath>

#include "latentlab/common.hpp"

namespace latentlab {

OptimizerState OptimizerState::init(const AdamWConfig& hp, const std::vector<const Tensor*>& params) {
    require(hp.beta1 >= 0 && hp.beta1 < 1 && hp.beta2 >= 0 && hp.beta2 < 1,
            "OptimizerState: betas must lie in [0, 1)");
    require(hp.eps > 0 && hp.lr >= 0 && hp.weight_decay >= 0,
            "OptimizerState: lr/eps/weight_decay out of range");
    OptimizerState s;
    s.hp = hp;
    s.m.reserve(params.size());
    s.v.reserve(params.size());
    for (const Tensor* p : params) {
        s.m.push_back(Tensor::zeros(p->shape));
        s.v.push_back(Tensor::zeros(p->shape));
    }
    return s;
}

void adamw_step(std::vector<Tensor*> params, const std::vector<const Tensor*>& grads,
                OptimizerState& state) {
    require(params.size() == grads.size() && params.size() == state.m.size(),
            "adamw_step: parameter/gradient/state count mismatch");
    state.step += 1;
    const AdamWConfig& hp = state.hp;
    const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(state.step));
    for (size_t k = 0; k < params.size(); ++k) {
        Tensor& p = *params[k];
        const Tensor& g = *grads[k];
        require(p.same_shape(g) && p.same_shape(state.m[k]), "adamw_step: shape mismatch");
        Tensor& m = state.m[k];
        Tensor& v = state.v[k];
        const double decay = 1.0 - hp.lr * hp.weight_decay;
        for (size_t i = 0; i < p.v.size(); ++i) {
            m.v[i] = hp.beta1 * m.v[i] + (1.0 - hp.beta1) * g.v[i];
            v.v[i] = hp.beta2 * v.v[i] + (1.0 - hp.beta2) * g.v[i] * g.v[i];
            const double mhat = m.v[i] / bc1;
            const double vhat = v.v[i] / bc2;
            p.v[i] = p.v[i] * decay - hp.lr * mhat / (std::sqrt(vhat) + hp.eps);
        }
    }
}

}  // namespace latentlab
