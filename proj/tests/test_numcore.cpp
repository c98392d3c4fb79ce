#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "normshare/adam.hpp"
#include "normshare/gradcheck.hpp"
#include "normshare/tape.hpp"

using namespace normshare;

namespace {

Tensor<double> make_param(std::vector<int> shape, Pcg32& rng, double lo = -1.0, double hi = 1.0) {
    Tensor<double> t(std::move(shape), true);
    t.fill_uniform(rng, lo, hi);
    return t;
}

}  // namespace

TEST_CASE("forward op shapes and values") {
    Tape<double> tape;
    Pcg32 rng(7);

    SECTION("matmul shape rule") {
        Tensor<double> a({2, 3}, true), b({3, 4}, true);
        a.fill_uniform(rng, -1, 1);
        b.fill_uniform(rng, -1, 1);
        auto c = matmul(tape.leaf(a), tape.leaf(b));
        REQUIRE(c.shape() == std::vector<int>{2, 4});
    }

    SECTION("matmul shape mismatch names the op") {
        Tensor<double> a({2, 3}), b({4, 4});
        REQUIRE_THROWS_AS(matmul(tape.leaf(a), tape.leaf(b)), DimensionError);
        try {
            matmul(tape.leaf(a), tape.leaf(b));
        } catch (const DimensionError& e) {
            REQUIRE(std::string(e.what()).find("matmul") != std::string::npos);
            REQUIRE(std::string(e.what()).find("(2,3)") != std::string::npos);
        }
    }

    SECTION("softmax of zeros is uniform") {
        auto s = softmax(tape.constant({3}, {0.0, 0.0, 0.0}));
        for (double v : s.values()) REQUIRE(v == Catch::Approx(1.0 / 3.0).margin(1e-15));
    }

    SECTION("tanh at zero has value 0 and gradient 1") {
        Tensor<double> w({1}, true);
        auto y = normshare::tanh(tape.leaf(w));
        REQUIRE(y.values()[0] == 0.0);
        tape.backward(sum(y));
        REQUIRE(w.grad[0] == Catch::Approx(1.0));
    }

    SECTION("dropout rejects p outside [0,1)") {
        Tensor<double> w({4}, true);
        REQUIRE_THROWS_AS(dropout(tape.leaf(w), 1.0, rng, true), ParameterError);
        REQUIRE_THROWS_AS(dropout(tape.leaf(w), -0.1, rng, true), ParameterError);
    }
}

TEST_CASE("cross entropy loss") {
    Tape<double> tape;

    SECTION("uniform logits give ln V") {
        auto logits = tape.constant({3, 4}, std::vector<double>(12, 0.0));
        auto loss = cross_entropy_loss(logits, {0, 1, 3});
        REQUIRE(loss.scalar() == Catch::Approx(std::log(4.0)).epsilon(1e-12));
    }

    SECTION("confident correct logit gives near-zero loss") {
        auto logits = tape.constant({1, 2}, {10.0, -10.0});
        auto loss = cross_entropy_loss(logits, {0});
        // -log(sigmoid(20)) = log(1 + e^-20)
        REQUIRE(loss.scalar() == Catch::Approx(std::log1p(std::exp(-20.0))).epsilon(1e-5));
        REQUIRE(loss.scalar() < 1e-8);
    }

    SECTION("loss decreases toward zero as margin grows") {
        double prev = 1e9;
        for (double margin : {1.0, 4.0, 16.0, 64.0}) {
            auto logits = tape.constant({2, 3}, {margin, 0.0, 0.0, 0.0, margin, 0.0});
            const double l = cross_entropy_loss(logits, {0, 1}).scalar();
            REQUIRE(l < prev);
            prev = l;
        }
        REQUIRE(prev < 1e-20);
    }

    SECTION("out of range target index") {
        auto logits = tape.constant({1, 3}, {0.0, 0.0, 0.0});
        REQUIRE_THROWS_AS(cross_entropy_loss(logits, {3}), IndexError);
    }
}

TEST_CASE("backward basics") {
    SECTION("loss = sum(w) gives unit gradients") {
        Tensor<double> w({3}, true);
        w.values = {5.0, -2.0, 0.5};
        Tape<double> tape;
        tape.backward(sum(tape.leaf(w)));
        REQUIRE(w.grad == std::vector<double>{1.0, 1.0, 1.0});
    }

    SECTION("loss = sum(w*w) gives 2w") {
        Tensor<double> w({2}, true);
        w.values = {1.0, 2.0};
        Tape<double> tape;
        auto v = tape.leaf(w);
        tape.backward(sum(mul(v, v)));
        REQUIRE(w.grad[0] == Catch::Approx(2.0));
        REQUIRE(w.grad[1] == Catch::Approx(4.0));
    }

    SECTION("backward rejects non-scalar loss") {
        Tensor<double> w({3}, true);
        Tape<double> tape;
        auto v = tape.leaf(w);
        REQUIRE_THROWS_AS(tape.backward(v), ContractError);
    }

    SECTION("tape records inputs before outputs") {
        Tensor<double> a({2, 2}, true), b({2, 2}, true);
        Tape<double> tape;
        auto c = matmul(tape.leaf(a), tape.leaf(b));
        auto d = normshare::tanh(c);
        auto l = sum(add(c, d));
        for (int id = 0; id < tape.size(); ++id)
            for (int in : tape.node(id).inputs) REQUIRE(in < id);
        REQUIRE(l.numel() == 1);
    }
}

TEST_CASE("gradient accumulation across multiple uses") {
    Pcg32 rng(11);
    Tensor<double> w = make_param({3, 3}, rng);
    Tensor<double> x1 = make_param({2, 3}, rng);
    Tensor<double> x2 = make_param({2, 3}, rng);
    x1.requires_grad = x2.requires_grad = false;

    // Using w in k places must equal the sum of the k single-use gradients.
    w.zero_grad();
    {
        Tape<double> tape;
        auto vw = tape.leaf(w);
        auto part1 = sum(matmul(tape.leaf(x1), vw));
        auto part2 = sum(normshare::tanh(matmul(tape.leaf(x2), vw)));
        tape.backward(add(part1, part2));
    }
    const std::vector<double> grad_both = w.grad;

    w.zero_grad();
    {
        Tape<double> tape;
        tape.backward(sum(matmul(tape.leaf(x1), tape.leaf(w))));
    }
    const std::vector<double> grad_one = w.grad;

    w.zero_grad();
    {
        Tape<double> tape;
        tape.backward(sum(normshare::tanh(matmul(tape.leaf(x2), tape.leaf(w)))));
    }
    const std::vector<double> grad_two = w.grad;

    for (size_t i = 0; i < grad_both.size(); ++i)
        REQUIRE(grad_both[i] == Catch::Approx(grad_one[i] + grad_two[i]).margin(1e-12));

    // Finite differences agree with the accumulated gradient.
    auto build = [&](Tape<double>& tape) {
        auto vw = tape.leaf(w);
        return add(sum(matmul(tape.leaf(x1), vw)), sum(normshare::tanh(matmul(tape.leaf(x2), vw))));
    };
    REQUIRE(gradient_check<double>(build, {&w}) < 1e-6);
}

TEST_CASE("gradient_check") {
    Pcg32 rng(23);

    SECTION("linear loss is exact") {
        Tensor<double> w = make_param({4, 3}, rng);
        Tensor<double> x = make_param({2, 4}, rng);
        x.requires_grad = false;
        auto build = [&](Tape<double>& t) { return sum(matmul(t.leaf(x), t.leaf(w))); };
        REQUIRE(gradient_check<double>(build, {&w}) < 1e-9);
    }

    SECTION("single LSTM cell step") {
        const int in_dim = 4, hidden = 5;
        Tensor<double> wg = make_param({in_dim + hidden, 4 * hidden}, rng, -0.4, 0.4);
        Tensor<double> bg = make_param({1, 4 * hidden}, rng, -0.1, 0.1);
        Tensor<double> x = make_param({1, in_dim}, rng);
        Tensor<double> h0 = make_param({1, hidden}, rng, -0.5, 0.5);
        Tensor<double> c0 = make_param({1, hidden}, rng, -0.5, 0.5);
        auto build = [&](Tape<double>& t) {
            auto xs = t.leaf(x), hp = t.leaf(h0), cp = t.leaf(c0);
            auto gates = add(matmul(concat_cols<double>({xs, hp}), t.leaf(wg)), t.leaf(bg));
            auto i = sigmoid(slice_cols(gates, 0, hidden));
            auto f = sigmoid(slice_cols(gates, hidden, 2 * hidden));
            auto g = normshare::tanh(slice_cols(gates, 2 * hidden, 3 * hidden));
            auto o = sigmoid(slice_cols(gates, 3 * hidden, 4 * hidden));
            auto c = add(mul(f, cp), mul(i, g));
            auto h = mul(o, normshare::tanh(c));
            return mean(mul(h, h));
        };
        REQUIRE(gradient_check<double>(build, {&wg, &bg, &x, &h0, &c0}) < 1e-4);
    }

    SECTION("non-deterministic loss is rejected") {
        Tensor<double> w = make_param({2, 2}, rng);
        auto shared_rng = std::make_shared<Pcg32>(3);
        auto build = [&, shared_rng](Tape<double>& t) {
            return sum(dropout(t.leaf(w), 0.5, *shared_rng, true));
        };
        REQUIRE_THROWS_AS(gradient_check<double>(build, {&w}), ContractError);
    }
}

TEST_CASE("op catalogue gradients match finite differences", "[property]") {
    // Random small shapes (<= 8 per dim), many seeds.
    const std::vector<OpKind> unary = {OpKind::tanh, OpKind::sigmoid, OpKind::softmax,
                                       OpKind::log_softmax, OpKind::sum, OpKind::mean};
    for (uint64_t seed = 1; seed <= 100; ++seed) {
        Pcg32 rng(seed);
        const int n = 1 + static_cast<int>(rng.below(8));
        const int k = 1 + static_cast<int>(rng.below(8));
        const int m = 1 + static_cast<int>(rng.below(8));

        for (OpKind kind : unary) {
            Tensor<double> a = make_param({n, m}, rng);
            // Weight the output so the loss is not constant (mean of softmax is 1/m).
            std::vector<double> wv(static_cast<size_t>(n) * m);
            for (double& v : wv) v = rng.uniform(-1, 1);
            auto build = [&](Tape<double>& t) {
                auto out = forward_op<double>(kind, {t.leaf(a)});
                auto w = t.constant(out.shape(), std::vector<double>(wv.begin(), wv.begin() + out.numel()));
                return mean(mul(out, w));
            };
            INFO("unary op " << static_cast<int>(kind) << " seed " << seed);
            REQUIRE(gradient_check<double>(build, {&a}) < 1e-4);
        }
        {
            Tensor<double> a = make_param({n, k}, rng), b = make_param({k, m}, rng);
            auto build = [&](Tape<double>& t) {
                return mean(forward_op<double>(OpKind::matmul, {t.leaf(a), t.leaf(b)}));
            };
            REQUIRE(gradient_check<double>(build, {&a, &b}) < 1e-4);
        }
        {
            Tensor<double> a = make_param({n, m}, rng), b = make_param({n, m}, rng);
            for (OpKind kind : {OpKind::add, OpKind::elementwise_multiply}) {
                auto build = [&](Tape<double>& t) {
                    return mean(forward_op<double>(kind, {t.leaf(a), t.leaf(b)}));
                };
                REQUIRE(gradient_check<double>(build, {&a, &b}) < 1e-4);
            }
        }
        {
            Tensor<double> a = make_param({n, k}, rng), b = make_param({n, m}, rng);
            OpArgs cargs;
            cargs.axis = 1;
            auto build = [&](Tape<double>& t) {
                return mean(forward_op<double>(OpKind::concat, {t.leaf(a), t.leaf(b)}, cargs));
            };
            REQUIRE(gradient_check<double>(build, {&a, &b}) < 1e-4);
        }
        {
            Tensor<double> a = make_param({n, m}, rng);
            OpArgs sargs;
            sargs.start = static_cast<int>(rng.below(static_cast<uint32_t>(m)));
            sargs.stop = sargs.start + 1 + static_cast<int>(rng.below(static_cast<uint32_t>(m - sargs.start)));
            auto build = [&](Tape<double>& t) {
                return mean(forward_op<double>(OpKind::slice, {t.leaf(a)}, sargs));
            };
            REQUIRE(gradient_check<double>(build, {&a}) < 1e-4);
        }
        {
            Tensor<double> table = make_param({k + 1, m}, rng);
            OpArgs eargs;
            for (int i = 0; i < n; ++i) eargs.ids.push_back(static_cast<int>(rng.below(static_cast<uint32_t>(k + 1))));
            auto build = [&](Tape<double>& t) {
                return mean(forward_op<double>(OpKind::embedding_lookup, {t.leaf(table)}, eargs));
            };
            REQUIRE(gradient_check<double>(build, {&table}) < 1e-4);
        }
        {
            // Dropout with a mask that is re-derived from a fixed seed each build.
            Tensor<double> a = make_param({n, m}, rng);
            const uint64_t mask_seed = seed * 977;
            auto build = [&](Tape<double>& t) {
                Pcg32 mask_rng(mask_seed);
                OpArgs dargs;
                dargs.p = 0.4;
                dargs.rng = &mask_rng;
                dargs.train = true;
                return mean(forward_op<double>(OpKind::dropout, {t.leaf(a)}, dargs));
            };
            REQUIRE(gradient_check<double>(build, {&a}) < 1e-4);
        }
        {
            // cross-entropy as composite: matmul + loss
            Tensor<double> w = make_param({k, m}, rng), x = make_param({n, k}, rng);
            std::vector<int> targets;
            for (int i = 0; i < n; ++i) targets.push_back(static_cast<int>(rng.below(static_cast<uint32_t>(m))));
            auto build = [&](Tape<double>& t) {
                return cross_entropy_loss(matmul(t.leaf(x), t.leaf(w)), targets);
            };
            REQUIRE(gradient_check<double>(build, {&w, &x}) < 1e-4);
        }
    }
}

TEST_CASE("softmax rows are a probability simplex", "[property]") {
    for (uint64_t seed = 1; seed <= 50; ++seed) {
        Pcg32 rng(seed);
        const int n = 1 + static_cast<int>(rng.below(8));
        const int m = 1 + static_cast<int>(rng.below(8));
        Tensor<double> a({n, m});
        a.fill_uniform(rng, -30, 30);
        Tape<double> tape;
        auto s = softmax(tape.leaf(a));
        for (int i = 0; i < n; ++i) {
            double row_sum = 0;
            for (int j = 0; j < m; ++j) {
                const double v = s.values()[static_cast<size_t>(i) * m + j];
                REQUIRE(v >= 0.0);
                row_sum += v;
            }
            REQUIRE(std::abs(row_sum - 1.0) <= 1e-12);
        }
    }
}

TEST_CASE("determinism: identical seed gives bitwise-identical values and gradients") {
    auto run = [](uint64_t seed) {
        Pcg32 rng(seed);
        Tensor<double> w = make_param({4, 4}, rng);
        Tensor<double> x = make_param({2, 4}, rng);
        Tape<double> tape;
        auto h = normshare::tanh(matmul(tape.leaf(x), tape.leaf(w)));
        auto drop = dropout(h, 0.3, rng, true);
        auto loss = mean(mul(drop, drop));
        const double lv = loss.scalar();
        tape.backward(loss);
        return std::tuple{lv, w.grad, x.grad};
    };
    auto [l1, gw1, gx1] = run(99);
    auto [l2, gw2, gx2] = run(99);
    REQUIRE(l1 == l2);
    REQUIRE(gw1 == gw2);
    REQUIRE(gx1 == gx2);
}

TEST_CASE("adam") {
    SECTION("zero gradient leaves parameters unchanged") {
        Tensor<double> w({3}, true);
        w.values = {1.0, -2.0, 3.0};
        w.zero_grad();
        AdamState<double> st;
        const auto before = w.values;
        adam_step<double>({&w}, st);
        REQUIRE(w.values == before);
    }

    SECTION("first step magnitude is about lr") {
        Tensor<double> w({3}, true);
        w.values = {0.0, 0.0, 0.0};
        w.grad = {0.5, -3.0, 1e-3};
        AdamState<double> st;
        st.lr = 0.01;
        adam_step<double>({&w}, st);
        // step 1 update = lr * g / (|g| + eps) ~= lr * sign(g)
        REQUIRE(w.values[0] == Catch::Approx(-0.01).epsilon(1e-4));
        REQUIRE(w.values[1] == Catch::Approx(0.01).epsilon(1e-4));
        REQUIRE(w.values[2] == Catch::Approx(-0.01).epsilon(1e-3));
        REQUIRE(w.grad == std::vector<double>{0.0, 0.0, 0.0});  // zeroed afterward
    }

    SECTION("converges on a scalar quadratic") {
        // Independent oracle run: minimize (w-3)^2 from w=0 with lr=0.1.
        Tensor<double> w({1}, true);
        w.values = {0.0};
        AdamState<double> st;
        st.lr = 0.1;
        int steps = 0;
        for (; steps < 2000; ++steps) {
            w.grad = {2.0 * (w.values[0] - 3.0)};
            adam_step<double>({&w}, st);
            if (std::abs(w.values[0] - 3.0) < 0.01) break;
        }
        REQUIRE(std::abs(w.values[0] - 3.0) < 0.01);
        REQUIRE(steps < 2000);
    }

    SECTION("missing gradient is a contract error") {
        Tensor<double> w({3}, true);
        w.grad.clear();
        AdamState<double> st;
        REQUIRE_THROWS_AS(adam_step<double>({&w}, st), ContractError);
    }
}

TEST_CASE("f32 engine passes a relaxed gradient check") {
    Pcg32 rng(5);
    Tensor<float> w({3, 4}, true);
    w.fill_uniform(rng, -0.5, 0.5);
    Tensor<float> x({2, 3}, true);
    x.fill_uniform(rng, -0.5, 0.5);
    auto build = [&](Tape<float>& t) {
        return mean(normshare::tanh(matmul(t.leaf(x), t.leaf(w))));
    };
    REQUIRE(gradient_check<float>(build, {&w, &x}, 1e-2) < 1e-2);
}
