#include <doctest.h>

#include <cmath>

#include "vawi/adam.hpp"
#include "vawi/gradcheck.hpp"
#include "vawi/rng.hpp"
#include "vawi/tensor.hpp"

using namespace vawi;

namespace {

Tensor random_tensor(std::size_t r, std::size_t c, RngStream& rng, bool requires_grad = true) {
    std::vector<double> v(r * c);
    for (double& x : v) x = 2.0 * rng.uniform_open01() - 1.0;
    return Tensor::from_data(r, c, std::move(v), requires_grad);
}

} // namespace

TEST_SUITE("tensor") {

TEST_CASE("matmul identity and zero") {
    Tensor a = Tensor::from_data(2, 2, {1, 2, 3, 4});
    Tensor eye = Tensor::from_data(2, 2, {1, 0, 0, 1});
    Tensor out = matmul(a, eye);
    CHECK(out.at(0, 0) == 1.0);
    CHECK(out.at(0, 1) == 2.0);
    CHECK(out.at(1, 0) == 3.0);
    CHECK(out.at(1, 1) == 4.0);

    Tensor zero = Tensor::zeros(2, 2);
    Tensor b = Tensor::from_data(2, 2, {9, 8, 7, 6});
    Tensor z = matmul(zero, b);
    for (double v : z.data()) CHECK(v == 0.0);
}

TEST_CASE("matmul hand-expanded product") {
    Tensor a = Tensor::from_data(2, 2, {1, 2, 3, 4});
    Tensor b = Tensor::from_data(2, 2, {5, 6, 7, 8});
    Tensor c = matmul(a, b);
    CHECK(c.at(0, 0) == 19.0);
    CHECK(c.at(0, 1) == 22.0);
    CHECK(c.at(1, 0) == 43.0);
    CHECK(c.at(1, 1) == 50.0);
}

TEST_CASE("matmul shape error names both shapes") {
    Tensor a = Tensor::zeros(2, 3);
    Tensor b = Tensor::zeros(2, 2);
    try {
        matmul(a, b);
        FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("2x3") != std::string::npos);
        CHECK(msg.find("2x2") != std::string::npos);
    }
}

TEST_CASE("softmax symmetric row") {
    Tensor m = Tensor::from_data(1, 3, {4.2, 4.2, 4.2});
    Tensor s = softmax_rows(m);
    for (std::size_t j = 0; j < 3; ++j) CHECK(s.at(0, j) == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("softmax large logits stay finite") {
    Tensor m = Tensor::from_data(1, 2, {1000.0, 0.0});
    Tensor s = softmax_rows(m);
    CHECK(all_finite(s));
    CHECK(s.at(0, 0) == doctest::Approx(1.0));
    CHECK(s.at(0, 1) == doctest::Approx(0.0));
}

TEST_CASE("softmax closed form quarter/three-quarters") {
    Tensor m = Tensor::from_data(1, 2, {0.0, std::log(3.0)});
    Tensor s = softmax_rows(m);
    CHECK(std::fabs(s.at(0, 0) - 0.25) < 1e-15);
    CHECK(std::fabs(s.at(0, 1) - 0.75) < 1e-15);
}

TEST_CASE("softmax rows sum to one and shift invariance") {
    RngStream rng(11);
    Tensor m = random_tensor(6, 9, rng, false);
    Tensor s = softmax_rows(m);
    for (std::size_t i = 0; i < 6; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 9; ++j) sum += s.at(i, j);
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
    Tensor shifted = add(m, Tensor::full(6, 9, 17.5));
    Tensor s2 = softmax_rows(shifted);
    for (std::size_t i = 0; i < m.size(); ++i) {
        CHECK(std::fabs(s.data()[i] - s2.data()[i]) < 1e-12);
    }
}

TEST_CASE("causal softmax zeroes everything above the diagonal") {
    RngStream rng(12);
    Tensor m = random_tensor(5, 5, rng, false);
    Tensor s = softmax_rows(m, true);
    for (std::size_t i = 0; i < 5; ++i) {
        double sum = 0.0;
        for (std::size_t j = 0; j < 5; ++j) {
            if (j > i) CHECK(s.at(i, j) == 0.0);
            sum += s.at(i, j);
        }
        CHECK(std::fabs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("backward of x squared") {
    Tensor x = Tensor::from_data(1, 1, {3.0}, true);
    Tensor y = mul(x, x);
    y.backward();
    CHECK(x.grad()[0] == doctest::Approx(6.0));
}

TEST_CASE("backward of sum of softmax is zero") {
    RngStream rng(13);
    Tensor x = random_tensor(1, 5, rng);
    Tensor loss = sum_all(softmax_rows(x));
    loss.backward();
    for (double g : x.grad()) CHECK(std::fabs(g) < 1e-12);
}

TEST_CASE("backward accumulates until zero_grad") {
    Tensor x = Tensor::from_data(1, 1, {2.0}, true);
    mul(x, x).backward();
    mul(x, x).backward();
    CHECK(x.grad()[0] == doctest::Approx(8.0));
    x.zero_grad();
    mul(x, x).backward();
    CHECK(x.grad()[0] == doctest::Approx(4.0));
}

TEST_CASE("backward rejects non-scalar outputs") {
    Tensor x = Tensor::from_data(1, 2, {1.0, 2.0}, true);
    CHECK_THROWS_AS(add(x, x).backward(), ContractError);
}

TEST_CASE("adam zero gradient is a fixed point without decay") {
    std::vector<Tensor> params{Tensor::from_data(1, 2, {0.5, -0.25}, true)};
    AdamState st = make_adam_state(params, 1e-3, 0.0);
    adam_step(params, {{0.0, 0.0}}, st);
    CHECK(params[0].at(0, 0) == 0.5);
    CHECK(params[0].at(0, 1) == -0.25);
    CHECK(st.step_count == 1);
}

TEST_CASE("adam first step magnitude matches the bias-corrected closed form") {
    const double lr = 2e-5, g = 0.37, eps = 1e-8;
    std::vector<Tensor> params{Tensor::from_data(1, 1, {1.0}, true)};
    AdamState st = make_adam_state(params, lr, 0.0);
    adam_step(params, {{g}}, st);
    // At t=1 the bias corrections cancel: |dp| = lr*|g| / (|g| + eps) ~ lr.
    const double expected = lr * g / (g + eps);
    CHECK(std::fabs((1.0 - params[0].item()) - expected) < 1e-15);
    CHECK(std::fabs(1.0 - params[0].item()) == doctest::Approx(lr).epsilon(1e-6));
}

TEST_CASE("adam decay-only closed form") {
    std::vector<Tensor> params{Tensor::from_data(1, 1, {1.0}, true)};
    AdamState st = make_adam_state(params, 2e-5, 0.01);
    adam_step(params, {{0.0}}, st);
    CHECK(params[0].item() == doctest::Approx(0.9999998).epsilon(1e-12));
}

TEST_CASE("adam rejects mismatched shapes") {
    std::vector<Tensor> params{Tensor::from_data(1, 2, {1.0, 2.0}, true)};
    AdamState st = make_adam_state(params, 1e-3, 0.0);
    std::vector<std::vector<double>> bad{{1.0, 2.0, 3.0}};
    CHECK_THROWS_AS(adam_step(params, bad, st), DimensionError);
}

TEST_CASE("warmup schedule closed form") {
    // 100 steps at 6% warmup: multiplier is step/6 for steps 1..6, then 1.
    for (std::uint64_t s = 1; s <= 6; ++s) {
        CHECK(warmup_lr_multiplier(s, 100, 0.06) ==
              doctest::Approx(static_cast<double>(s) / 6.0));
    }
    CHECK(warmup_lr_multiplier(7, 100, 0.06) == 1.0);
    CHECK(warmup_lr_multiplier(100, 100, 0.06) == 1.0);
    CHECK(warmup_lr_multiplier(1, 100, 0.0) == 1.0);
}

TEST_CASE("gumbel closed forms") {
    CHECK(std::fabs(gumbel_from_uniform(std::exp(-1.0)) - 0.0) < 1e-12);
    CHECK(std::fabs(gumbel_from_uniform(std::exp(-std::exp(1.0))) - (-1.0)) < 1e-12);
    // extreme draws stay finite thanks to clamping
    CHECK(std::isfinite(gumbel_from_uniform(0.0)));
    CHECK(std::isfinite(gumbel_from_uniform(1.0)));
}

TEST_CASE("gumbel sampling is deterministic per stream") {
    RngStream a(99, {1, 2, purpose::gumbel});
    RngStream b(99, {1, 2, purpose::gumbel});
    Tensor ga = gumbel_sample(2, 3, a);
    Tensor gb = gumbel_sample(2, 3, b);
    for (std::size_t i = 0; i < ga.size(); ++i) CHECK(ga.data()[i] == gb.data()[i]);

    RngStream c(99, {1, 2, purpose::noise});
    Tensor gc = gumbel_sample(2, 3, c);
    bool any_diff = false;
    for (std::size_t i = 0; i < ga.size(); ++i) any_diff |= ga.data()[i] != gc.data()[i];
    CHECK(any_diff);
}

TEST_CASE("rng streams are independent of draw interleaving") {
    RngStream a(7, {3, 4, 5});
    double first = a.uniform_open01();
    RngStream b(7, {3, 4, 5});
    (void)RngStream(7, {9, 9, 9}).uniform_open01(); // unrelated stream
    CHECK(first == b.uniform_open01());
}

TEST_CASE("finite differences are near-exact on a quadratic") {
    RngStream rng(21);
    Tensor p = random_tensor(2, 3, rng);
    Tensor a = random_tensor(2, 3, rng, false);
    auto f = [&]() { return sum_all(mul(mul(p, p), a)); };
    auto report = finite_diff_check(f, {{"p", p}}, 1e-5);
    CHECK(report.max_rel_err < 1e-9);
    CHECK(report.coords_checked == 6);
}

TEST_CASE("frozen group behind a detached subgraph checks clean") {
    RngStream rng(22);
    Tensor frozen = random_tensor(2, 2, rng, false);
    Tensor live = random_tensor(2, 2, rng, true);
    // The frozen branch is computed once and cached as a constant, the way
    // frozen-encoder outputs are cached in the training pipeline. f never
    // recomputes it, so both analytic and numeric gradients vanish.
    Tensor cached = detach(matmul(frozen, frozen));
    auto f = [&]() { return sum_all(mul(matmul(cached, live), matmul(cached, live))); };
    f().backward();
    CHECK(frozen.grad().empty());
    auto report = finite_diff_check(f, {{"frozen", frozen}}, 1e-5);
    CHECK(report.max_rel_err < 1e-12);
}

TEST_CASE("gradcheck covers every differentiable op") {
    RngStream rng(23);
    const double tol = 1e-4;

    SUBCASE("matmul and transpose") {
        Tensor a = random_tensor(3, 4, rng), b = random_tensor(4, 2, rng);
        auto f = [&]() {
            RngStream local(101);
            Tensor y = matmul(a, transpose(transpose(b)));
            return sum_all(mul(y, random_tensor(3, 2, local, false)));
        };
        CHECK(finite_diff_check(f, {{"a", a}, {"b", b}}, 1e-5).max_rel_err < tol);
    }
    SUBCASE("elementwise add sub mul scale") {
        Tensor a = random_tensor(2, 3, rng), b = random_tensor(2, 3, rng);
        auto f = [&]() {
            RngStream local(102);
            Tensor y = scale(sub(add(a, b), mul(a, b)), 1.7);
            return sum_all(mul(y, random_tensor(2, 3, local, false)));
        };
        CHECK(finite_diff_check(f, {{"a", a}, {"b", b}}, 1e-5).max_rel_err < tol);
    }
    SUBCASE("softmax and log softmax") {
        Tensor a = random_tensor(3, 5, rng);
        auto f = [&]() {
            RngStream local(103);
            Tensor y = add(softmax_rows(a), log_softmax_rows(a));
            return sum_all(mul(y, random_tensor(3, 5, local, false)));
        };
        CHECK(finite_diff_check(f, {{"a", a}}, 1e-5).max_rel_err < tol);
    }
    SUBCASE("causal softmax") {
        Tensor a = random_tensor(4, 4, rng);
        auto f = [&]() {
            RngStream local(104);
            return sum_all(mul(softmax_rows(a, true), random_tensor(4, 4, local, false)));
        };
        CHECK(finite_diff_check(f, {{"a", a}}, 1e-5).max_rel_err < tol);
    }
    SUBCASE("tanh and gelu") {
        Tensor a = random_tensor(2, 4, rng);
        auto f = [&]() {
            RngStream local(105);
            return sum_all(mul(add(tanh_op(a), gelu(a)), random_tensor(2, 4, local, false)));
        };
        CHECK(finite_diff_check(f, {{"a", a}}, 1e-5).max_rel_err < tol);
    }
    SUBCASE("layer norm") {
        Tensor x = random_tensor(3, 6, rng);
        Tensor gamma = random_tensor(1, 6, rng);
        Tensor beta = random_tensor(1, 6, rng);
        auto f = [&]() {
            RngStream local(106);
            return sum_all(
                mul(layer_norm_rows(x, gamma, beta), random_tensor(3, 6, local, false)));
        };
        CHECK(finite_diff_check(f, {{"x", x}, {"gamma", gamma}, {"beta", beta}}, 1e-5)
                  .max_rel_err < tol);
    }
    SUBCASE("bias broadcast and row scaling") {
        Tensor m = random_tensor(3, 4, rng);
        Tensor b = random_tensor(1, 4, rng);
        Tensor w = random_tensor(1, 3, rng);
        auto f = [&]() {
            RngStream local(107);
            return sum_all(mul(scale_rows(add_row_broadcast(m, b), w),
                               random_tensor(3, 4, local, false)));
        };
        CHECK(finite_diff_check(f, {{"m", m}, {"b", b}, {"w", w}}, 1e-5).max_rel_err < tol);
    }
    SUBCASE("gather slice concat interleave reductions") {
        Tensor m = random_tensor(4, 6, rng);
        Tensor n = random_tensor(2, 6, rng);
        auto f = [&]() {
            RngStream local(108);
            Tensor g = gather_rows(m, {3, 0, 1});
            Tensor gc = gather_cols(g, {5, 1, 2});
            Tensor sc = slice_cols(m, 1, 3);
            Tensor cat = concat_rows({gc, slice_cols(sc, 0, 3)});
            Tensor inter = interleave_rows(cat, gather_cols(n, {0, 2, 4}),
                                           {{0, 0}, {1, 1}, {0, 3}, {1, 0}});
            Tensor pooled = mean_rows(inter);
            Tensor cc = concat_cols({pooled, pick(m, 2, 2)});
            return sum_all(mul(cc, random_tensor(1, 4, local, false)));
        };
        CHECK(finite_diff_check(f, {{"m", m}, {"n", n}}, 1e-5).max_rel_err < tol);
    }
}

TEST_CASE("straight-through ones forward exactly one, gradient passes through") {
    Tensor w = Tensor::from_data(1, 3, {0.2, 0.9, 0.5}, true);
    Tensor ones = straight_through_ones(w);
    for (double v : ones.data()) CHECK(v == 1.0);
    Tensor coeff = Tensor::from_data(1, 3, {3.0, -1.0, 0.5});
    sum_all(mul(ones, coeff)).backward();
    CHECK(w.grad()[0] == doctest::Approx(3.0));
    CHECK(w.grad()[1] == doctest::Approx(-1.0));
    CHECK(w.grad()[2] == doctest::Approx(0.5));
}

TEST_CASE("gaussian sample moments") {
    RngStream rng(31, {0, 0, purpose::noise});
    const std::size_t n = 100000;
    Tensor g = gaussian_sample(1, n, rng, 0.0, 0.02);
    double mean = 0.0;
    for (double v : g.data()) mean += v;
    mean /= static_cast<double>(n);
    // 3 sigma of the sample mean at sd 0.02
    CHECK(std::fabs(mean) < 3.0 * 0.02 / std::sqrt(static_cast<double>(n)));
}

} // TEST_SUITE
