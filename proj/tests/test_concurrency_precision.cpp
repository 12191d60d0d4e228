#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <thread>

#include "helpers.hpp"

// Threading determinism and the f64 code paths.

using namespace hwf;
using hwt::bitwise_equal;
using hwt::random_tensor;

namespace {

struct ThreadCountGuard {
    ~ThreadCountGuard() { set_thread_count(1); }
};

std::string temp_dir(const char* tag) {
    auto dir = std::filesystem::temp_directory_path() / (std::string("hwf_cp_") + tag);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir.string();
}

}  // namespace

TEST_CASE("kernels are bitwise identical for any worker count") {
    ThreadCountGuard guard;
    ModelConfig cfg = ModelConfig::preset("toy");
    ModelWeights<float> w = make_initialized_weights<float>(cfg, 51);
    RngStream rng(52);
    Tensor<float> x({2, 1, 24, 24});
    for (auto& v : x.mutable_data()) v = static_cast<float>(rng.next_double());

    set_thread_count(1);
    Tensor<float> ref = model_forward(x, w, cfg);
    for (int threads : {2, 3, 5}) {
        set_thread_count(threads);
        Tensor<float> got = model_forward(x, w, cfg);
        CHECK(got.data() == ref.data());
    }

    // gradients too: same loss, same weight gradients, any thread count
    set_thread_count(1);
    w.set_requires_grad(true);
    Tensor<float> target({2, 1, 24, 24});
    for (auto& v : target.mutable_data()) v = static_cast<float>(rng.next_double());
    auto grads_with = [&](int threads) {
        set_thread_count(threads);
        w.zero_grads();
        Tape<float> tape;
        {
            TapeScope<float> scope(tape);
            tape.backward(mse_loss(model_forward(x, w, cfg), target));
        }
        std::vector<float> all;
        for (auto& [name, t] : w.registry())
            all.insert(all.end(), t->grad()->begin(), t->grad()->end());
        return all;
    };
    const std::vector<float> g1 = grads_with(1);
    const std::vector<float> g4 = grads_with(4);
    CHECK(g1 == g4);
}

TEST_CASE("forward passes may run concurrently over shared read-only weights") {
    // one tape per thread; weights carry no gradient buffers, so backward
    // writes only thread-local input grads
    ModelConfig cfg = ModelConfig::preset("toy");
    ModelWeights<double> w = make_initialized_weights<double>(cfg, 53);

    auto worker = [&](uint64_t seed, std::vector<double>& grad_out) {
        RngStream rng(seed);
        Tensor<double> x({1, 1, 16, 16});
        for (auto& v : x.mutable_data()) v = rng.next_double();
        x.set_requires_grad(true);
        Tape<double> tape;
        {
            TapeScope<double> scope(tape);
            Tensor<double> y = model_forward(x, w, cfg);
            tape.backward(sum(mul(y, y)));
        }
        grad_out = *x.grad();
    };

    std::vector<double> ga_threaded, gb_threaded;
    {
        std::thread ta(worker, 1, std::ref(ga_threaded));
        std::thread tb(worker, 2, std::ref(gb_threaded));
        ta.join();
        tb.join();
    }
    std::vector<double> ga_serial, gb_serial;
    worker(1, ga_serial);
    worker(2, gb_serial);
    CHECK(ga_threaded == ga_serial);
    CHECK(gb_threaded == gb_serial);
}

TEST_CASE("f64 training runs and round-trips its checkpoint") {
    const std::string dir = temp_dir("f64");
    RngStream rng(54);
    for (int i = 0; i < 4; ++i) {
        ImageBuffer img = ImageBuffer::make(16, 16, 1);
        for (auto& v : img.data) v = std::floor(256 * rng.next_double());
        write_image(img, dir + "/i" + std::to_string(i) + ".pgm");
    }
    ModelConfig mcfg = ModelConfig::preset("toy");
    mcfg.precision = Precision::f64;
    TrainConfig tcfg;
    tcfg.sigma = 15;
    tcfg.batch_size = 2;
    tcfg.epochs = 1;
    tcfg.patch_size = 16;
    tcfg.patches_per_image = 2;
    tcfg.seed = 5;
    tcfg.max_steps = 3;

    TrainResult res = train<double>(mcfg, tcfg, dir, dir + "/m.ckpt", "");
    CHECK(res.steps_run == 3);

    Checkpoint<double> ck = load_checkpoint<double>(dir + "/m.ckpt");
    CHECK(ck.model.precision == Precision::f64);
    CHECK(ck.has_optim);
    CHECK(ck.optim.step == 3);
    CHECK_THROWS_AS(load_checkpoint<float>(dir + "/m.ckpt"), CheckpointArchMismatch);

    // a checkpoint without optimizer state reports has_optim = false
    save_checkpoint<double>(ck.weights, nullptr, ck.model, {}, dir + "/plain.ckpt");
    Checkpoint<double> plain = load_checkpoint<double>(dir + "/plain.ckpt");
    CHECK_FALSE(plain.has_optim);
    std::filesystem::remove_all(dir);
}

TEST_CASE("optional architecture branches still preserve shape and finiteness") {
    RngStream rng(55);
    SUBCASE("relative-position bias in the global blocks") {
        ModelConfig cfg = ModelConfig::preset("toy");
        cfg.rel_bias_gte = true;
        ModelWeights<double> w = make_initialized_weights<double>(cfg, 56);
        for (auto& v : w.gte[0].attn.rel_bias.mutable_data()) v = 0.1 * rng.next_gaussian();
        Tensor<double> x = random_tensor({1, 1, 20, 20}, rng, 0.0, 1.0);
        Tensor<double> y = model_forward(x, w, cfg);
        CHECK(y.shape() == x.shape());
        CHECK(all_finite(y.data()));
        CHECK(count_params(w) == count_params(cfg));  // closed form tracks the extra table

        ModelWeights<double> zero = make_zero_weights<double>(cfg);
        CHECK(bitwise_equal(model_forward(x, zero, cfg), x));
    }
    SUBCASE("nested transformer order") {
        ModelConfig cfg = ModelConfig::preset("toy");
        cfg.tde_order = TdeOrder::nested;
        ModelWeights<double> w = make_initialized_weights<double>(cfg, 57);
        Tensor<double> x = random_tensor({1, 1, 17, 19}, rng, 0.0, 1.0);
        Tensor<double> y = model_forward(x, w, cfg);
        CHECK(y.shape() == x.shape());
        CHECK(all_finite(y.data()));
    }
}

TEST_CASE("training data errors carry file context") {
    const std::string dir = temp_dir("err");
    ImageBuffer small = ImageBuffer::make(8, 8, 1);
    write_image(small, dir + "/small.pgm");
    ModelConfig mcfg = ModelConfig::preset("toy");
    TrainConfig tcfg;
    tcfg.patch_size = 16;
    CHECK_THROWS_WITH_AS(train<float>(mcfg, tcfg, dir, "", ""),
                         doctest::Contains("small.pgm"), DataError);
    CHECK_THROWS_AS(train<float>(mcfg, tcfg, dir + "/none", "", ""), DataError);

    ImageBuffer img = ImageBuffer::make(16, 16, 1);
    CHECK_THROWS_AS(add_awgn(img, -1.0, RngStream(1)), ConfigError);
    std::filesystem::remove_all(dir);
}
