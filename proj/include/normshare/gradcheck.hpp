// Central-difference verification of analytic gradients. The loss builder must
// be deterministic (dropout off); this is checked by evaluating it twice.
#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "normshare/adam.hpp"
#include "normshare/tape.hpp"

namespace normshare {

template <class Real>
using LossBuilder = std::function<Var<Real>(Tape<Real>&)>;

// Returns max over all parameter entries of
//   |analytic - numeric| / max(1e-8, |analytic| + |numeric|).
template <class Real>
double gradient_check(const LossBuilder<Real>& build_loss, const std::vector<Tensor<Real>*>& params,
                      double h = 1e-5) {
    auto eval = [&]() -> double {
        Tape<Real> tape;
        return static_cast<double>(build_loss(tape).scalar());
    };

    const double l1 = eval();
    const double l2 = eval();
    if (std::abs(l1 - l2) > 1e-12 * (1.0 + std::abs(l1)))
        throw ContractError(cat("gradient_check: loss is not deterministic (", l1, " vs ", l2, ")"));

    for (Tensor<Real>* p : params) p->zero_grad();
    {
        Tape<Real> tape;
        Var<Real> loss = build_loss(tape);
        tape.backward(loss);
    }

    double max_rel = 0.0;
    for (Tensor<Real>* p : params) {
        for (size_t i = 0; i < p->values.size(); ++i) {
            const Real saved = p->values[i];
            p->values[i] = saved + static_cast<Real>(h);
            const double up = eval();
            p->values[i] = saved - static_cast<Real>(h);
            const double down = eval();
            p->values[i] = saved;
            const double numeric = (up - down) / (2.0 * h);
            const double analytic = static_cast<double>(p->grad[i]);
            const double rel = std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

}  // namespace normshare
