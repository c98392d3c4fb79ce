// Bias-corrected Adam. State is kept per parameter tensor; a tensor's step
// counter advances only when that tensor is part of the update, so updates
// that never touch a tensor leave it bitwise unchanged.
#pragma once

#include <cmath>
#include <unordered_map>
#include <vector>

#include "normshare/common.hpp"
#include "normshare/tensor.hpp"

namespace normshare {

template <class Real>
struct AdamState {
    struct Slot {
        std::vector<Real> m;
        std::vector<Real> v;
        long step = 0;
    };

    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::unordered_map<Tensor<Real>*, Slot> slots;
};

template <class Real>
void adam_step(const std::vector<Tensor<Real>*>& params, AdamState<Real>& state) {
    for (Tensor<Real>* p : params) {
        if (!p->requires_grad || p->grad.size() != p->values.size())
            throw ContractError("adam_step: parameter has no populated gradient");
        auto& slot = state.slots[p];
        if (slot.m.empty()) {
            slot.m.assign(p->values.size(), Real(0));
            slot.v.assign(p->values.size(), Real(0));
        }
        slot.step += 1;
        const double b1 = state.beta1, b2 = state.beta2;
        const double corr1 = 1.0 - std::pow(b1, static_cast<double>(slot.step));
        const double corr2 = 1.0 - std::pow(b2, static_cast<double>(slot.step));
        for (size_t i = 0; i < p->values.size(); ++i) {
            const double g = static_cast<double>(p->grad[i]);
            const double m = b1 * static_cast<double>(slot.m[i]) + (1.0 - b1) * g;
            const double v = b2 * static_cast<double>(slot.v[i]) + (1.0 - b2) * g * g;
            slot.m[i] = static_cast<Real>(m);
            slot.v[i] = static_cast<Real>(v);
            const double mhat = m / corr1;
            const double vhat = v / corr2;
            p->values[i] -= static_cast<Real>(state.lr * mhat / (std::sqrt(vhat) + state.epsilon));
        }
        p->zero_grad();
    }
}

}  // namespace normshare
