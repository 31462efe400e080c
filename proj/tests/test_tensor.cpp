#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>

#include "lmkit/kernels.hpp"
#include "lmkit/ops.hpp"
#include "lmkit/rng.hpp"
#include "lmkit/tensor.hpp"
#include "oracle.hpp"

using namespace lmkit;
namespace op = lmkit::ops;

namespace {

std::vector<float> to_vec(const Tensor& t) {
    return {t.values().begin(), t.values().end()};
}

Tensor identity(std::int64_t n) {
    Tensor t = Tensor::zeros({n, n});
    for (std::int64_t i = 0; i < n; ++i) t.data()[i * n + i] = 1.0f;
    return t;
}

}  // namespace

TEST_CASE("matmul basics") {
    Tensor a = Tensor::from({2, 2}, {1, 2, 3, 4});
    Tensor c = op::matmul(a, identity(2));
    CHECK(to_vec(c) == std::vector<float>{1, 2, 3, 4});

    Tensor u = Tensor::from({1, 2}, {1, 0});
    Tensor v = Tensor::from({2, 1}, {0, 1});
    CHECK(op::matmul(u, v).item() == 0.0f);

    Tensor bad = Tensor::zeros({3, 3});
    CHECK_THROWS_AS(op::matmul(a, bad), ShapeError);
}

TEST_CASE("matmul gradient equals column sums of b and matches finite differences") {
    Rng rng(7);
    Tensor a = Tensor::randn({3, 4}, rng, 1.0f, true);
    Tensor b = Tensor::randn({4, 2}, rng, 1.0f, true);

    Tensor loss = op::sum(op::matmul(a, b));
    backward(loss);

    // d(sum(AB))/dA[i,t] = sum_j B[t,j], identical for every row i.
    for (std::int64_t i = 0; i < 3; ++i) {
        for (std::int64_t t = 0; t < 4; ++t) {
            float col_sum = b.at(t, 0) + b.at(t, 1);
            CHECK(a.grad()[i * 4 + t] == doctest::Approx(col_sum).epsilon(1e-6));
        }
    }

    auto f = [&]() { return static_cast<double>(op::sum(op::matmul(a, b)).item()); };
    CHECK(oracle::max_grad_err(f, a) < 1e-3);
    CHECK(oracle::max_grad_err(f, b) < 1e-3);
}

TEST_CASE("softmax values") {
    Tensor z = Tensor::from({4}, {0, 0, 0, 0});
    Tensor sz = op::softmax(z);
    for (float v : sz.values()) CHECK(v == doctest::Approx(0.25));

    Tensor big = Tensor::from({2}, {1000, 0});
    Tensor sb = op::softmax(big);
    CHECK(sb.at(0) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(sb.at(1) == doctest::Approx(0.0).epsilon(1e-6));

    Tensor logs = Tensor::from({3}, {std::log(1.0f), std::log(2.0f), std::log(3.0f)});
    Tensor sl = op::softmax(logs);
    CHECK(sl.at(0) == doctest::Approx(1.0 / 6.0).epsilon(1e-6));
    CHECK(sl.at(1) == doctest::Approx(2.0 / 6.0).epsilon(1e-6));
    CHECK(sl.at(2) == doctest::Approx(3.0 / 6.0).epsilon(1e-6));
}

TEST_CASE("softmax rows sum to one and are shift invariant") {
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor x = Tensor::randn({5, 9}, rng, 3.0f);
        Tensor y = op::softmax(x);
        for (std::int64_t r = 0; r < 5; ++r) {
            double s = 0.0;
            for (std::int64_t j = 0; j < 9; ++j) s += y.at(r, j);
            CHECK(std::abs(s - 1.0) < 1e-6);
        }
        const float c = static_cast<float>(rng.normal(0.0, 5.0));
        Tensor shifted = x.clone();
        for (float& v : shifted.values()) v += c;
        Tensor ys = op::softmax(shifted);
        for (std::int64_t i = 0; i < y.numel(); ++i) {
            CHECK(std::abs(y.at(i) - ys.at(i)) < 1e-6);
        }
    }
}

TEST_CASE("cross entropy closed forms") {
    // Uniform logits: loss is ln(V) for any targets.
    Tensor logits = Tensor::zeros({3, 8});
    std::vector<std::int32_t> targets{1, 5, 7};
    CHECK(op::cross_entropy(logits, targets).item() ==
          doctest::Approx(std::log(8.0)).epsilon(1e-6));

    // Confident correct answer: loss near zero.
    Tensor confident = Tensor::zeros({3, 8});
    for (std::int64_t i = 0; i < 3; ++i) {
        confident.data()[i * 8 + targets[static_cast<std::size_t>(i)]] = 30.0f;
    }
    CHECK(op::cross_entropy(confident, targets).item() < 1e-5);
}

TEST_CASE("cross entropy mask selects positions") {
    // Hand-computed on 3-class logits in double precision.
    Tensor logits = Tensor::from({2, 3}, {0.5f, -1.0f, 2.0f, 3.0f, 0.0f, -2.0f});
    std::vector<std::int32_t> targets{2, 1};
    std::vector<std::uint8_t> first_only{1, 0};

    const double lse0 = std::log(std::exp(0.5) + std::exp(-1.0) + std::exp(2.0));
    const double expected = lse0 - 2.0;
    CHECK(op::cross_entropy(logits, targets, first_only).item() ==
          doctest::Approx(expected).epsilon(1e-6));

    std::vector<std::uint8_t> none{0, 0};
    CHECK_THROWS_AS(op::cross_entropy(logits, targets, none), DegenerateInputError);

    std::vector<std::int32_t> oob{3, 0};
    CHECK_THROWS_AS(op::cross_entropy(logits, oob), IndexError);
}

TEST_CASE("backward linear and quadratic forms") {
    Rng rng(3);
    Tensor x = Tensor::randn({4, 3}, rng, 1.0f, true);

    backward(op::sum(x));
    for (std::int64_t i = 0; i < x.numel(); ++i) CHECK(x.grad()[i] == 1.0f);

    x.zero_grad();
    backward(op::sum(op::mul(x, x)));
    for (std::int64_t i = 0; i < x.numel(); ++i) {
        CHECK(x.grad()[i] == doctest::Approx(2.0f * x.at(i)).epsilon(1e-6));
    }

    // Repeated calls accumulate until zeroed.
    backward(op::sum(x));
    CHECK(x.grad()[0] == doctest::Approx(2.0f * x.at(0) + 1.0f).epsilon(1e-6));

    CHECK_THROWS_AS(backward(x), ContractError);
    CHECK_THROWS_AS(backward(Tensor::scalar(1.0f)), ContractError);
}

TEST_CASE("two layer mlp gradients match finite differences") {
    Rng rng(17);
    Tensor input = Tensor::randn({4, 6}, rng, 1.0f);
    Tensor w1 = Tensor::randn({8, 6}, rng, 0.5f, true);
    Tensor w2 = Tensor::randn({3, 8}, rng, 0.5f, true);
    Tensor nw = Tensor::full({6}, 1.0f, true);
    std::vector<std::int32_t> targets{0, 1, 2, 1};

    auto forward = [&]() {
        Tensor h = op::linear(op::rmsnorm(input, nw), w1);
        return op::cross_entropy(op::linear(op::gelu(h), w2), targets);
    };
    backward(forward());
    auto f = [&]() { return static_cast<double>(forward().item()); };
    CHECK(oracle::max_grad_err(f, w1) < 1e-3);
    CHECK(oracle::max_grad_err(f, w2) < 1e-3);
    CHECK(oracle::max_grad_err(f, nw) < 1e-3);
}

TEST_CASE("chain rule on randomly composed graphs") {
    // 100+ random graphs of add/mul/scale/matmul/linear composed to a scalar,
    // every leaf checked against central finite differences.
    Rng rng(23);
    for (int graph = 0; graph < 110; ++graph) {
        const std::int64_t m = 2 + static_cast<std::int64_t>(rng.below(3));
        const std::int64_t k = 2 + static_cast<std::int64_t>(rng.below(3));
        const std::int64_t n = 2 + static_cast<std::int64_t>(rng.below(3));
        Tensor a = Tensor::randn({m, k}, rng, 0.8f, true);
        Tensor b = Tensor::randn({k, n}, rng, 0.8f, true);
        Tensor c = Tensor::randn({m, n}, rng, 0.8f, true);
        const float s = static_cast<float>(rng.normal(0.0, 1.0));
        const std::uint64_t variant = rng.below(4);

        auto forward = [&]() {
            Tensor y = op::matmul(a, b);
            switch (variant) {
                case 0: y = op::add(y, c); break;
                case 1: y = op::mul(y, c); break;
                case 2: y = op::add(op::scale(y, s), c); break;
                default: y = op::mul(op::add(y, c), c); break;
            }
            return op::sum(y);
        };
        backward(forward());
        auto f = [&]() { return static_cast<double>(forward().item()); };
        CHECK(oracle::max_grad_err(f, a) < 1e-3);
        CHECK(oracle::max_grad_err(f, b) < 1e-3);
        CHECK(oracle::max_grad_err(f, c) < 1e-3);
    }
}

TEST_CASE("gelu softplus transpose concat split match finite differences") {
    Rng rng(31);
    Tensor x = Tensor::randn({3, 4}, rng, 1.0f, true);

    auto f1 = [&]() { return static_cast<double>(op::sum(op::gelu(x)).item()); };
    backward(op::sum(op::gelu(x)));
    CHECK(oracle::max_grad_err(f1, x) < 1e-3);

    x.zero_grad();
    auto f2 = [&]() { return static_cast<double>(op::sum(op::softplus(x)).item()); };
    backward(op::sum(op::softplus(x)));
    CHECK(oracle::max_grad_err(f2, x) < 1e-3);

    x.zero_grad();
    auto f3 = [&]() {
        auto parts = op::split(op::transpose(x), 0, 2);
        return static_cast<double>(op::sum(op::mul(op::concat(parts, 0), op::transpose(x))).item());
    };
    backward(op::sum(op::mul(op::concat(op::split(op::transpose(x), 0, 2), 0), op::transpose(x))));
    CHECK(oracle::max_grad_err(f3, x) < 1e-3);

    // Round trip reassembles exactly.
    Tensor y = Tensor::randn({4, 6}, rng, 1.0f);
    for (int axis : {0, 1}) {
        Tensor back = op::concat(op::split(y, axis, 2), axis);
        CHECK(std::memcmp(back.data(), y.data(), sizeof(float) * 24) == 0);
    }
}

TEST_CASE("embedding backward scatter-adds repeated ids") {
    Tensor table = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
    std::vector<std::int32_t> ids{1, 1, 2};
    Tensor out = op::embedding(table, ids);
    CHECK(to_vec(out) == std::vector<float>{3, 4, 3, 4, 5, 6});
    backward(op::sum(out));
    const float* g = table.grad();
    CHECK(g[0] == 0.0f);
    CHECK(g[2] == 2.0f);  // row 1 hit twice
    CHECK(g[4] == 1.0f);

    std::vector<std::int32_t> oob{3};
    CHECK_THROWS_AS(op::embedding(table, oob), IndexError);
}

TEST_CASE("causal softmax masks the future") {
    Rng rng(41);
    Tensor scores = Tensor::randn({3, 5}, rng, 1.0f, true);  // past_len = 2
    Tensor att = op::causal_softmax(scores, 2);
    CHECK(att.at(0, 3) == 0.0f);
    CHECK(att.at(0, 4) == 0.0f);
    CHECK(att.at(1, 4) == 0.0f);
    for (std::int64_t i = 0; i < 3; ++i) {
        double s = 0.0;
        for (std::int64_t j = 0; j < 5; ++j) s += att.at(i, j);
        CHECK(std::abs(s - 1.0) < 1e-6);
    }
    auto f = [&]() {
        Tensor w = Tensor::from({5, 1}, {0.3f, -0.2f, 0.5f, 0.7f, -0.4f});
        return static_cast<double>(op::sum(op::matmul(op::causal_softmax(scores, 2), w)).item());
    };
    Tensor w = Tensor::from({5, 1}, {0.3f, -0.2f, 0.5f, 0.7f, -0.4f});
    backward(op::sum(op::matmul(op::causal_softmax(scores, 2), w)));
    CHECK(oracle::max_grad_err(f, scores) < 1e-3);
}

TEST_CASE("identical op sequences are bitwise deterministic") {
    auto run = [](std::uint64_t seed) {
        Rng rng(seed);
        Tensor a = Tensor::randn({16, 24}, rng, 1.0f, true);
        Tensor b = Tensor::randn({24, 8}, rng, 1.0f, true);
        Tensor w = Tensor::full({8}, 1.0f);
        Tensor y = op::softmax(op::rmsnorm(op::gelu(op::matmul(a, b)), w));
        backward(op::sum(op::mul(y, y)));
        std::vector<float> all(y.values().begin(), y.values().end());
        all.insert(all.end(), a.grad(), a.grad() + a.numel());
        all.insert(all.end(), b.grad(), b.grad() + b.numel());
        return all;
    };
    auto r1 = run(99);
    auto r2 = run(99);
    CHECK(r1.size() == r2.size());
    CHECK(std::memcmp(r1.data(), r2.data(), r1.size() * sizeof(float)) == 0);
}

TEST_CASE("parallel and serial gemm agree bitwise") {
    // The A/B buffers hold m*k and k*n floats, which are exactly the sizes
    // required under either transpose interpretation, so the same random
    // buffers exercise NN, NT and TN.
    Rng rng(55);
    using kernels::Trans;
    for (int trial = 0; trial < 12; ++trial) {
        const std::int64_t m = 1 + static_cast<std::int64_t>(rng.below(37));
        const std::int64_t k = 1 + static_cast<std::int64_t>(rng.below(29));
        const std::int64_t n = 1 + static_cast<std::int64_t>(rng.below(33));
        std::vector<float> a(static_cast<std::size_t>(m * k)), b(static_cast<std::size_t>(k * n));
        for (float& v : a) v = static_cast<float>(rng.normal(0, 1));
        for (float& v : b) v = static_cast<float>(rng.normal(0, 1));

        for (auto [ta, tb] :
             {std::pair{Trans::N, Trans::N}, {Trans::N, Trans::T}, {Trans::T, Trans::N}}) {
            std::vector<float> c1(static_cast<std::size_t>(m * n), 0.5f);
            std::vector<float> c2 = c1;
            kernels::serial::gemm(a.data(), ta, b.data(), tb, c1.data(), m, k, n, true);
            kernels::parallel::gemm(a.data(), ta, b.data(), tb, c2.data(), m, k, n, true);
            CHECK(std::memcmp(c1.data(), c2.data(),
                              sizeof(float) * static_cast<std::size_t>(m * n)) == 0);
        }
    }
}

TEST_CASE("checkpointed backward is bitwise identical on a deep chain") {
    Rng rng(77);
    std::vector<Tensor> weights;
    for (int i = 0; i < 4; ++i) weights.push_back(Tensor::randn({6, 6}, rng, 0.5f, true));
    Tensor x0 = Tensor::randn({3, 6}, rng, 1.0f, true);

    auto block = [&](int i, const Tensor& x) { return op::gelu(op::linear(x, weights[static_cast<std::size_t>(i)])); };

    auto run = [&](bool ckpt) {
        for (Tensor& w : weights) w.zero_grad();
        x0.zero_grad();
        Tensor x = x0;
        for (int i = 0; i < 4; ++i) {
            if (ckpt) {
                x = op::checkpoint([&, i](const Tensor& in) { return block(i, in); }, x);
            } else {
                x = block(i, x);
            }
        }
        backward(op::sum(op::mul(x, x)));
        std::vector<float> grads;
        for (const Tensor& w : weights) grads.insert(grads.end(), w.grad(), w.grad() + w.numel());
        grads.insert(grads.end(), x0.grad(), x0.grad() + x0.numel());
        return grads;
    };

    auto plain = run(false);
    auto ckpt = run(true);
    CHECK(plain.size() == ckpt.size());
    CHECK(std::memcmp(plain.data(), ckpt.data(), plain.size() * sizeof(float)) == 0);
}

TEST_CASE("debug checks flag non-finite values") {
    set_debug_checks(true);
    Tensor huge = Tensor::full({2, 2}, 3e38f);
    CHECK_THROWS_AS(op::mul(huge, huge), NumericError);
    set_debug_checks(false);
    CHECK_NOTHROW(op::mul(huge, huge));
    set_debug_checks(true);
}

TEST_CASE("frozen leaves never receive gradients") {
    Rng rng(5);
    Tensor frozen = Tensor::randn({3, 3}, rng, 1.0f, false);
    Tensor live = Tensor::randn({3, 3}, rng, 1.0f, true);
    backward(op::sum(op::matmul(frozen, live)));
    CHECK(live.has_grad());
    CHECK_FALSE(frozen.has_grad());
}
