#include <doctest.h>

#include "helpers.hpp"

using namespace hwf;
using hwt::bitwise_equal;
using hwt::random_tensor;
using hwt::random_tensor_no_kink;

TEST_CASE("conv2d: centered delta kernel is the identity") {
    RngStream rng(11);
    Tensor<double> x = random_tensor({2, 3, 7, 9}, rng);
    Tensor<double> w({3, 3, 3, 3});
    auto& wd = w.mutable_data();
    for (int co = 0; co < 3; ++co) wd[((co * 3 + co) * 3 + 1) * 3 + 1] = 1.0;
    Tensor<double> b({3});
    CHECK(bitwise_equal(conv2d(x, w, b, 1), x));

    // ramp input, single-channel delta kernel
    Tensor<double> ramp({1, 1, 3, 3}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
    Tensor<double> k1({1, 1, 3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0});
    CHECK(bitwise_equal(conv2d(ramp, k1, Tensor<double>({1}), 1), ramp));
}

TEST_CASE("conv2d: hand-evaluated 1x1 kernel") {
    Tensor<double> x({1, 1, 2, 2}, {1, 2, 3, 4});
    Tensor<double> w({1, 1, 1, 1}, {2});
    Tensor<double> b({1}, {1});
    Tensor<double> y = conv2d(x, w, b, 0);
    CHECK(y.data() == std::vector<double>{3, 5, 7, 9});
}

TEST_CASE("conv2d: parameter count formula") {
    CHECK(params_conv(64, 64, 3) == 36928);
    CHECK(params_conv(64, 64, 3, false) == 36864);
}

TEST_CASE("conv2d: error paths") {
    Tensor<double> x({1, 2, 4, 4});
    Tensor<double> w({1, 3, 3, 3});  // channel mismatch
    Tensor<double> b({1});
    CHECK_THROWS_AS(conv2d(x, w, b, 1), ConfigError);
    Tensor<double> w2({1, 2, 3, 3});
    CHECK_THROWS_AS(conv2d(x, w2, b, 0), ConfigError);  // wrong padding
    Tensor<double> bad({1, 2, 4, 4});
    bad.mutable_data()[3] = std::nan("");
    CHECK_THROWS_AS(conv2d(bad, w2, b, 1), NumericError);
}

TEST_CASE("matmul: identity and hand values") {
    RngStream rng(5);
    Tensor<double> eye({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    Tensor<double> m = random_tensor({3, 3}, rng);
    CHECK(hwt::max_abs_diff(matmul(eye, m).data(), m.data()) == 0.0);

    Tensor<double> a({1, 2}, {1, 2});
    Tensor<double> b({2, 1}, {3, 4});
    CHECK(matmul(a, b).data() == std::vector<double>{11});

    Tensor<double> bad({2, 3});
    CHECK_THROWS_AS(matmul(m, bad), ConfigError);
}

TEST_CASE("matmul: gradient of sum(A*B) wrt A equals ones*B^T") {
    RngStream rng(17);
    Tensor<double> a = random_tensor({4, 5}, rng);
    Tensor<double> b = random_tensor({5, 3}, rng);
    a.set_requires_grad(true);
    Tape<double> tape;
    {
        TapeScope<double> scope(tape);
        tape.backward(sum(matmul(a, b)));
    }
    // closed form: grad[i,k] = sum_j b[k,j]
    for (int64_t i = 0; i < 4; ++i)
        for (int64_t k = 0; k < 5; ++k) {
            double want = 0;
            for (int64_t j = 0; j < 3; ++j) want += b.at({k, j});
            CHECK((*a.grad())[i * 5 + k] == doctest::Approx(want).epsilon(1e-12));
        }
    // and the finite-difference oracle agrees
    auto f = [&](const Tensor<double>& t) { return sum(matmul(t, b)); };
    CHECK(finite_diff_check<double>(f, a, 1e-5) < 1e-8);
}

TEST_CASE("layer_norm: frozen examples") {
    Tensor<double> ones4 = Tensor<double>::ones({4});
    Tensor<double> zeros4 = Tensor<double>::zeros({4});

    Tensor<double> constant({4}, {5, 5, 5, 5});
    Tensor<double> y = layer_norm(constant, ones4, zeros4, 1e-5);
    for (double v : y.data()) CHECK(v == doctest::Approx(0.0));

    Tensor<double> two({2}, {1, 3});
    y = layer_norm(two, Tensor<double>::ones({2}), Tensor<double>::zeros({2}), 1e-12);
    CHECK(y.data()[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(y.data()[1] == doctest::Approx(1.0).epsilon(1e-6));

    Tensor<double> gamma0 = Tensor<double>::zeros({2});
    Tensor<double> beta7 = Tensor<double>::full({2}, 7.0);
    y = layer_norm(two, gamma0, beta7, 1e-5);
    CHECK(y.data() == std::vector<double>{7, 7});
}

TEST_CASE("layer_norm: moments property on random slices") {
    RngStream rng(23);
    Tensor<double> x = random_tensor({6, 32}, rng, -3.0, 3.0);
    Tensor<double> y = layer_norm(x, Tensor<double>::ones({32}), Tensor<double>::zeros({32}), 1e-5);
    for (int64_t r = 0; r < 6; ++r) {
        double mean = 0, var = 0;
        for (int64_t j = 0; j < 32; ++j) mean += y.at({r, j});
        mean /= 32;
        for (int64_t j = 0; j < 32; ++j) var += (y.at({r, j}) - mean) * (y.at({r, j}) - mean);
        var /= 32;
        CHECK(std::abs(mean) <= 1e-6);
        CHECK(std::abs(var - 1.0) <= 1e-3);
    }
}

TEST_CASE("softmax: frozen examples and stability") {
    Tensor<double> uni({3}, {2.5, 2.5, 2.5});
    Tensor<double> thirds = softmax(uni, 0);
    for (double v : thirds.data()) CHECK(v == doctest::Approx(1.0 / 3));

    Tensor<double> pair({2}, {0.0, std::log(3.0)});
    Tensor<double> y = softmax(pair, 0);
    CHECK(y.data()[0] == doctest::Approx(0.25).epsilon(1e-12));
    CHECK(y.data()[1] == doctest::Approx(0.75).epsilon(1e-12));

    Tensor<double> extreme({2}, {1e4, 0.0});
    y = softmax(extreme, 0);
    for (double v : y.data()) CHECK(std::isfinite(v));
    CHECK(y.data()[0] + y.data()[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("softmax: slices sum to 1 for any finite input") {
    RngStream rng(31);
    Tensor<double> x = random_tensor({4, 5, 6}, rng, -1e3, 1e3);
    for (int axis = 0; axis < 3; ++axis) {
        Tensor<double> y = softmax(x, axis);
        // reduce along `axis` and check every slice
        const auto& s = y.shape();
        int64_t inner = 1, outer = 1;
        for (int i = axis + 1; i < 3; ++i) inner *= s[i];
        for (int i = 0; i < axis; ++i) outer *= s[i];
        for (int64_t o = 0; o < outer; ++o)
            for (int64_t in = 0; in < inner; ++in) {
                double total = 0;
                for (int64_t a = 0; a < s[axis]; ++a)
                    total += y.data()[(o * s[axis] + a) * inner + in];
                CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
                (void)total;
            }
    }
}

TEST_CASE("backward: gradient seeding and usage errors") {
    RngStream rng(41);
    Tensor<double> x = random_tensor({3, 4}, rng);
    x.set_requires_grad(true);

    SUBCASE("sum gives ones") {
        Tape<double> tape;
        TapeScope<double> scope(tape);
        tape.backward(sum(x));
        for (double g : *x.grad()) CHECK(g == 1.0);
    }
    SUBCASE("quadratic gives x") {
        Tape<double> tape;
        TapeScope<double> scope(tape);
        tape.backward(scale(sum(mul(x, x)), 0.5));
        CHECK(hwt::max_abs_diff(*x.grad(), x.data()) < 1e-15);
    }
    SUBCASE("repeated backward is rejected") {
        Tape<double> tape;
        TapeScope<double> scope(tape);
        Tensor<double> loss = sum(x);
        tape.backward(loss);
        CHECK_THROWS_AS(tape.backward(loss), UsageError);
    }
    SUBCASE("non-scalar loss is rejected") {
        Tape<double> tape;
        TapeScope<double> scope(tape);
        Tensor<double> y = mul(x, x);
        CHECK_THROWS_AS(tape.backward(y), UsageError);
    }
    SUBCASE("detached loss is rejected") {
        Tensor<double> loss;
        {
            Tape<double> other;
            TapeScope<double> scope(other);
            loss = sum(x);
        }
        Tape<double> tape;
        CHECK_THROWS_AS(tape.backward(loss), UsageError);
    }
}

TEST_CASE("backward: each leaf populated exactly once despite reuse") {
    Tensor<double> x({3}, {1.0, 2.0, 3.0});
    x.set_requires_grad(true);
    Tape<double> tape;
    {
        TapeScope<double> scope(tape);
        // x used twice: d/dx sum(x*x) = 2x
        tape.backward(sum(mul(x, x)));
    }
    CHECK((*x.grad())[0] == doctest::Approx(2.0));
    CHECK((*x.grad())[1] == doctest::Approx(4.0));
    CHECK((*x.grad())[2] == doctest::Approx(6.0));
}

TEST_CASE("finite_diff_check: exact, relu, and chained maps") {
    RngStream rng(53);
    Tensor<double> x = random_tensor_no_kink({2, 6}, rng);

    auto fsum = [](const Tensor<double>& t) { return sum(t); };
    CHECK(finite_diff_check<double>(fsum, x, 1e-5) <= 1e-9);  // exact up to rounding

    auto frelu = [](const Tensor<double>& t) { return sum(relu(t)); };
    CHECK(finite_diff_check<double>(frelu, x, 1e-5) <= 1e-6);

    Tensor<double> w = random_tensor({6, 3}, rng);
    auto fchain = [&](const Tensor<double>& t) { return sum(matmul(softmax(t, 1), w)); };
    CHECK(finite_diff_check<double>(fchain, x, 1e-5) <= 1e-5);

    Tensor<double> nan_in({2}, {std::nan(""), 0.0});
    CHECK_THROWS_AS(finite_diff_check<double>(fsum, nan_in, 1e-5), NumericError);
}

TEST_CASE("finite_diff_check: every primitive on random small tensors") {
    RngStream rng(67);
    Tensor<double> x = random_tensor_no_kink({2, 3, 4}, rng);
    Tensor<double> y = random_tensor_no_kink({2, 3, 4}, rng);
    Tensor<double> suffix = random_tensor({4}, rng);

    using F = std::function<Tensor<double>(const Tensor<double>&)>;
    std::vector<std::pair<const char*, F>> cases = {
        {"add", [&](const Tensor<double>& t) { return sum(mul(add(t, y), add(t, y))); }},
        {"sub", [&](const Tensor<double>& t) { return sum(mul(sub(t, y), sub(t, y))); }},
        {"mul", [&](const Tensor<double>& t) { return sum(mul(t, y)); }},
        {"scale", [&](const Tensor<double>& t) { return sum(scale(t, 2.5)); }},
        {"add_broadcast", [&](const Tensor<double>& t) { return sum(mul(add_broadcast(t, suffix), add_broadcast(t, suffix))); }},
        {"relu", [&](const Tensor<double>& t) { return sum(relu(t)); }},
        {"reshape", [&](const Tensor<double>& t) { return sum(mul(reshape(t, {6, 4}), reshape(t, {6, 4}))); }},
        {"permute", [&](const Tensor<double>& t) { return sum(mul(permute(t, {2, 0, 1}), permute(t, {2, 0, 1}))); }},
        {"softmax", [&](const Tensor<double>& t) { return sum(mul(softmax(t, 2), y)); }},
        {"layer_norm", [&](const Tensor<double>& t) {
             return sum(mul(layer_norm(t, Tensor<double>::ones({4}), Tensor<double>::zeros({4}), 1e-5), y));
         }},
    };
    for (auto& [name, f] : cases) {
        INFO(name);
        CHECK(finite_diff_check<double>(f, x, 1e-5) <= 1e-4);
    }
}

TEST_CASE("reshape/permute round trip is bitwise") {
    RngStream rng(71);
    Tensor<double> x = random_tensor({2, 3, 4, 5}, rng);
    Tensor<double> p = permute(x, {3, 1, 0, 2});
    Tensor<double> back = permute(p, {2, 1, 3, 0});
    CHECK(bitwise_equal(back, x));
    CHECK(bitwise_equal(reshape(reshape(x, {6, 20}), x.shape()), x));
}

TEST_CASE("gather validates its index map") {
    Tensor<double> x({4}, {1, 2, 3, 4});
    CHECK_THROWS_AS(gather(x, std::vector<int64_t>{0, 4}, Shape{2}), UsageError);
    CHECK_THROWS_AS(gather(x, std::vector<int64_t>{0}, Shape{2}), UsageError);
    Tensor<double> ok = gather(x, std::vector<int64_t>{3, 0}, Shape{2});
    CHECK(ok.data() == std::vector<double>{4, 1});
}

TEST_CASE("tensor invariants: shape/data agreement and finiteness") {
    CHECK_THROWS_AS(Tensor<double>(Shape{2, 3}, std::vector<double>{1, 2}), ConfigError);
    CHECK_THROWS_AS(Tensor<double>(Shape{0, 3}), ConfigError);
    RngStream rng(3);
    Tensor<double> x = random_tensor({3, 3}, rng);
    Tensor<double> y = softmax(layer_norm(relu(x), Tensor<double>::ones({3}),
                                          Tensor<double>::zeros({3}), 1e-5), 1);
    CHECK(all_finite(y.data()));
}
