// hwformer: train / denoise / eval / bench / selftest over the core library.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
// Every failure prints one machine-parsable line: "error: <category>: <reason>".

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "hwf/hwformer.hpp"

namespace {

using namespace hwf;

struct CommonOpts {
    std::string preset;
    std::string config_path;
    int threads = 0;  // 0 = unset; falls back to HWF_THREADS, then 1
};

void apply_threads(const CommonOpts& c) {
    int n = c.threads;
    if (n <= 0) {
        if (const char* env = std::getenv("HWF_THREADS")) n = std::atoi(env);
    }
    set_thread_count(n > 0 ? n : 1);
}

// defaults <- preset <- config file <- explicit flags (callers overlay flags)
KvMap layered_kv(const CommonOpts& c) {
    KvMap kv;
    if (!c.preset.empty()) kv = ModelConfig::preset(c.preset).to_kv();
    if (!c.config_path.empty())
        for (const auto& [k, v] : load_kv_file(c.config_path)) kv[k] = v;
    return kv;
}

void echo_config(const KvMap& kv) {
    std::string text = serialize_kv(kv);
    std::string out = "# effective configuration\n";
    size_t pos = 0;
    while (pos < text.size()) {
        const size_t nl = text.find('\n', pos);
        out += "# " + text.substr(pos, nl - pos) + "\n";
        pos = nl + 1;
    }
    std::fputs(out.c_str(), stdout);
}

std::vector<int64_t> parse_int_list(const std::string& s) {
    std::vector<int64_t> out;
    size_t pos = 0;
    while (pos < s.size()) {
        size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        try {
            out.push_back(std::stoll(s.substr(pos, comma - pos)));
        } catch (const std::exception&) {
            throw UsageError("bad integer list: '" + s + "'");
        }
        pos = comma + 1;
    }
    if (out.empty()) throw UsageError("empty integer list");
    return out;
}

// ------------------------------------------------------------------- train

int cmd_train(const CommonOpts& common, const KvMap& overrides, const std::string& data_dir,
              const std::string& out_path, const std::string& log_path) {
    KvMap kv = layered_kv(common);
    for (const auto& [k, v] : overrides) kv[k] = v;
    ModelConfig mcfg = ModelConfig::from_kv(kv);
    TrainConfig tcfg = TrainConfig::from_kv(kv);

    KvMap effective = mcfg.to_kv();
    for (const auto& [k, v] : tcfg.to_kv()) effective[k] = v;
    effective["run.data"] = data_dir;
    effective["run.out"] = out_path;
    effective["run.threads"] = std::to_string(thread_count());
    echo_config(effective);

    TrainResult res;
    if (mcfg.precision == Precision::f64)
        res = train<double>(mcfg, tcfg, data_dir, out_path, log_path);
    else
        res = train<float>(mcfg, tcfg, data_dir, out_path, log_path);

    std::printf("steps=%lld final_loss=%s best_val_psnr=%s checkpoint=%s\n",
                static_cast<long long>(res.steps_run),
                res.step_losses.empty() ? "-" : format_double(res.step_losses.back()).c_str(),
                format_double(res.best_val_psnr).c_str(), res.checkpoint_path.c_str());
    return 0;
}

// ----------------------------------------------------------------- denoise

template <typename T>
void denoise_with(const std::string& ckpt_path, const std::string& input,
                  const std::string& output, int64_t tile, int64_t overlap) {
    Checkpoint<T> ck = load_checkpoint<T>(ckpt_path);
    ImageBuffer noisy = read_image(input);
    ImageBuffer restored = tile_denoise(ck.weights, ck.model, noisy, tile, overlap);
    write_image(restored, output);
    std::printf("wrote %s (%lldx%lld, tile=%lld overlap=%lld)\n", output.c_str(),
                static_cast<long long>(restored.width), static_cast<long long>(restored.height),
                static_cast<long long>(tile), static_cast<long long>(overlap));
}

int cmd_denoise(const CommonOpts& common, const std::string& ckpt, const std::string& input,
                const std::string& output, int64_t tile, int64_t overlap) {
    if (!common.preset.empty() || !common.config_path.empty())
        throw UsageError("denoise takes its architecture from the checkpoint; "
                         "--preset/--config conflict with --checkpoint");
    const KvMap kv = read_checkpoint_config(ckpt);
    KvMap effective = kv;
    effective["run.input"] = input;
    effective["run.out"] = output;
    echo_config(effective);
    if (kv_str_or(kv, "model.precision", "f32") == "f64")
        denoise_with<double>(ckpt, input, output, tile, overlap);
    else
        denoise_with<float>(ckpt, input, output, tile, overlap);
    return 0;
}

// -------------------------------------------------------------------- eval

template <typename T>
EvalReport eval_with(const std::string& ckpt_path, const std::string& data_dir, double sigma,
                     uint64_t seed, int64_t tile, int64_t overlap) {
    Checkpoint<T> ck = load_checkpoint<T>(ckpt_path);
    return evaluate(ck.weights, ck.model, data_dir, sigma, seed, tile, overlap, ckpt_path);
}

int cmd_eval(const CommonOpts& common, const std::string& ckpt, const std::string& data_dir,
             double sigma, uint64_t seed, int64_t tile, int64_t overlap,
             const std::string& out_csv, const std::string& format) {
    if (!common.preset.empty() || !common.config_path.empty())
        throw UsageError("eval takes its architecture from the checkpoint; "
                         "--preset/--config conflict with --checkpoint");
    if (format != "table" && format != "csv")
        throw UsageError("--format must be 'table' or 'csv'");
    const KvMap kv = read_checkpoint_config(ckpt);
    KvMap effective = kv;
    effective["run.data"] = data_dir;
    effective["run.sigma"] = format_double(sigma);
    effective["run.seed"] = std::to_string(seed);
    echo_config(effective);

    EvalReport report;
    if (kv_str_or(kv, "model.precision", "f32") == "f64")
        report = eval_with<double>(ckpt, data_dir, sigma, seed, tile, overlap);
    else
        report = eval_with<float>(ckpt, data_dir, sigma, seed, tile, overlap);

    std::fputs((format == "csv" ? report.to_csv() : report.to_table()).c_str(), stdout);
    if (!out_csv.empty()) {
        std::ofstream f(out_csv);
        if (!f) throw DataError("cannot write report: " + out_csv);
        f << report.to_csv();
    }
    return 0;
}

// ------------------------------------------------------------------- bench

int cmd_bench(const CommonOpts& common, const std::string& windows_list, int64_t image,
              int64_t patch) {
    KvMap kv = layered_kv(common);
    if (common.preset.empty() && common.config_path.empty())
        kv = ModelConfig::preset("toy").to_kv();
    ModelConfig base = ModelConfig::from_kv(kv);
    const std::vector<int64_t> windows = parse_int_list(windows_list);

    KvMap effective = base.to_kv();
    effective["bench.windows"] = windows_list;
    effective["bench.image"] = std::to_string(image);
    effective["bench.patch"] = std::to_string(patch);
    echo_config(effective);

    std::printf("window,params,flops_total,flops_attention\n");
    for (const BenchRow& row : window_sweep(base, windows, image, patch))
        std::printf("%lld,%lld,%lld,%lld\n", static_cast<long long>(row.window),
                    static_cast<long long>(row.params), static_cast<long long>(row.flops_total),
                    static_cast<long long>(row.flops_attention));
    return 0;
}

// ---------------------------------------------------------------- selftest

int cmd_selftest() {
    int failures = 0;
    auto check = [&](const char* name, bool ok, const std::string& detail = "") {
        if (ok)
            std::printf("ok   %s\n", name);
        else {
            std::printf("FAIL %s%s%s\n", name, detail.empty() ? "" : ": ", detail.c_str());
            ++failures;
        }
    };
    RngStream rng(2024);

    {
        Tensor<double> x({1, 3, 50, 70});
        for (auto& v : x.mutable_data()) v = rng.next_double();
        auto [win, layout] = partition_windows(x, 48);
        check("window round trip (50x70, w=48)", merge_windows(win, layout).data() == x.data());
        Tensor<double> tok = patchify(win, 6);
        check("patchify round trip", unpatchify(tok, 3, 48, 6).data() == win.data());
        Tensor<double> r = roll(x, Axis::horizontal, 13);
        check("roll round trip", roll_reverse(r, Axis::horizontal, 13).data() == x.data());
    }
    {
        Tensor<double> x({4, 16});
        for (auto& v : x.mutable_data()) v = 2000.0 * (rng.next_double() - 0.5);
        Tensor<double> soft = softmax(x, 1);
        bool sums_ok = true;
        for (int64_t r = 0; r < 4; ++r) {
            double s = 0;
            for (int64_t j = 0; j < 16; ++j) s += soft.at({r, j});
            sums_ok = sums_ok && std::abs(s - 1.0) <= 1e-6;
        }
        check("softmax rows sum to 1", sums_ok);
        Tensor<double> normed =
            layer_norm(x, Tensor<double>::ones({16}), Tensor<double>::zeros({16}), 1e-5);
        double mean = 0;
        for (int64_t j = 0; j < 16; ++j) mean += normed.at({0, j});
        check("layer_norm zero mean", std::abs(mean / 16) <= 1e-6);
    }
    {
        Tensor<double> x({2, 3, 4});
        for (auto& v : x.mutable_data()) v = rng.next_gaussian();
        Tensor<double> w({4, 4});
        for (auto& v : w.mutable_data()) v = 0.4 * rng.next_gaussian();
        auto f = [&](const Tensor<double>& t) {
            Tensor<double> h = matmul(reshape(softmax(t, 2), {6, 4}), w);
            return sum(mul(h, h));
        };
        const double err = finite_diff_check<double>(f, x, 1e-5);
        check("gradient check (softmax+matmul)", err <= 1e-4, format_double(err));
    }
    {
        bool ratio_ok = true;
        for (int64_t c : {8, 64, 180})
            ratio_ok = ratio_ok &&
                       conv_projection_params(c, false) * 144 == fcl_projection_params(c, 6, false);
        check("conv/FCL projection ratio = 1/144", ratio_ok);
    }
    {
        ModelConfig cfg = ModelConfig::preset("toy");
        ModelWeights<double> zero = make_zero_weights<double>(cfg);
        Tensor<double> x({1, 1, 41, 53});
        for (auto& v : x.mutable_data()) v = rng.next_double();
        check("zero-weight model is the identity",
              model_forward(x, zero, cfg).data() == x.data());
    }
    {
        ModelConfig cfg = ModelConfig::preset("toy");
        ModelWeights<float> w = make_initialized_weights<float>(cfg, 5);
        OptimState<float> st = make_optim_state(w);
        const auto path = std::filesystem::temp_directory_path() / "hwf_selftest.ckpt";
        save_checkpoint(w, &st, cfg, {}, path.string());
        Checkpoint<float> ck = load_checkpoint<float>(path.string());
        bool same = true;
        auto ra = w.registry();
        auto rb = ck.weights.registry();
        for (size_t i = 0; i < ra.size(); ++i)
            same = same && ra[i].second->data() == rb[i].second->data();
        std::filesystem::remove(path);
        check("checkpoint round trip", same);
    }
    {
        bool lr_ok = lr_at(1, 1e-4) == 1e-4 && lr_at(15, 1e-4) == 5e-5 &&
                     lr_at(22, 1e-4) == 2.5e-5 && lr_at(28, 1e-4) == 7.8125e-7;
        check("learning-rate schedule", lr_ok);
    }

    std::printf("%s (%d failure%s)\n", failures == 0 ? "selftest passed" : "selftest FAILED",
                failures, failures == 1 ? "" : "s");
    return failures == 0 ? 0 : 3;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"HWformer image denoiser: heterogeneous global-window attention with "
                 "directional shifted-window transformers"};
    app.require_subcommand(1);

    CommonOpts common;
    std::string data_dir, out_path, log_path, ckpt, input, format = "table",
                                                          windows = "4,6,8,48,96";
    double sigma = -1;
    int64_t seed = -1, epochs = -1, batch = -1, steps = -1, patch_size = -1;
    double lr = -1;
    int64_t tile = 96, overlap = 16, image = 96, bench_patch = 2;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--preset", common.preset, "Model preset: 'paper' or 'toy'");
        sub->add_option("--config", common.config_path, "key=value config file");
        sub->add_option("--threads", common.threads,
                        "Worker threads (default: HWF_THREADS or 1; 1 = reproducible)");
    };

    CLI::App* train_cmd =
        app.add_subcommand("train", "Train a denoiser on a directory of PGM/PPM images");
    add_common(train_cmd);
    train_cmd->add_option("--data", data_dir, "Training image directory")->required();
    train_cmd->add_option("--out", out_path, "Output checkpoint path")->required();
    train_cmd->add_option("--log", log_path, "Metric log (CSV lines)");
    train_cmd->add_option("--sigma", sigma, "AWGN std on the 0-255 scale");
    train_cmd->add_option("--seed", seed, "RNG seed");
    train_cmd->add_option("--epochs", epochs, "Training epochs");
    train_cmd->add_option("--batch", batch, "Batch size");
    train_cmd->add_option("--lr", lr, "Base learning rate");
    train_cmd->add_option("--steps", steps, "Hard cap on optimizer steps (0 = none)");
    train_cmd->add_option("--patch-size", patch_size, "Training crop size");

    CLI::App* denoise_cmd =
        app.add_subcommand("denoise", "Restore one noisy image with a checkpoint");
    add_common(denoise_cmd);
    denoise_cmd->add_option("--checkpoint", ckpt, "Trained checkpoint")->required();
    denoise_cmd->add_option("--input", input, "Noisy input image (PGM/PPM)")->required();
    denoise_cmd->add_option("--out", out_path, "Restored output image")->required();
    denoise_cmd->add_option("--tile", tile, "Tile size for tiled inference");
    denoise_cmd->add_option("--overlap", overlap, "Tile overlap (uniform blending)");

    CLI::App* eval_cmd =
        app.add_subcommand("eval", "PSNR/SSIM report over a clean dataset + synthetic noise");
    add_common(eval_cmd);
    eval_cmd->add_option("--checkpoint", ckpt, "Trained checkpoint")->required();
    eval_cmd->add_option("--data", data_dir, "Clean image directory")->required();
    eval_cmd->add_option("--sigma", sigma, "AWGN std on the 0-255 scale")->required();
    eval_cmd->add_option("--seed", seed, "Noise seed");
    eval_cmd->add_option("--tile", tile, "Tile size");
    eval_cmd->add_option("--overlap", overlap, "Tile overlap");
    eval_cmd->add_option("--out", out_path, "Write the CSV report here");
    eval_cmd->add_option("--format", format, "stdout format: 'table' or 'csv'");

    CLI::App* bench_cmd =
        app.add_subcommand("bench", "Params/FLOPs across window sizes at a fixed image size");
    add_common(bench_cmd);
    bench_cmd->add_option("--windows", windows, "Comma-separated window sizes");
    bench_cmd->add_option("--image", image, "Square image size");
    bench_cmd->add_option("--patch", bench_patch, "Token patch used for every window in the sweep");

    CLI::App* selftest_cmd = app.add_subcommand("selftest", "Run the built-in invariant suite");
    add_common(selftest_cmd);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help
        std::fflush(stdout);
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        return 1;
    }

    try {
        apply_threads(common);
        if (train_cmd->parsed()) {
            KvMap overrides;
            if (sigma >= 0) overrides["train.sigma"] = format_double(sigma);
            if (seed >= 0) overrides["train.seed"] = std::to_string(seed);
            if (epochs >= 0) overrides["train.epochs"] = std::to_string(epochs);
            if (batch >= 0) overrides["train.batch_size"] = std::to_string(batch);
            if (lr >= 0) overrides["train.lr"] = format_double(lr);
            if (steps >= 0) overrides["train.max_steps"] = std::to_string(steps);
            if (patch_size >= 0) overrides["train.patch_size"] = std::to_string(patch_size);
            return cmd_train(common, overrides, data_dir, out_path, log_path);
        }
        if (denoise_cmd->parsed()) return cmd_denoise(common, ckpt, input, out_path, tile, overlap);
        if (eval_cmd->parsed())
            return cmd_eval(common, ckpt, data_dir, sigma, seed < 0 ? 0 : seed, tile, overlap,
                            out_path, format);
        if (bench_cmd->parsed()) return cmd_bench(common, windows, image, bench_patch);
        if (selftest_cmd->parsed()) return cmd_selftest();
        std::fprintf(stderr, "error: usage: no subcommand\n");
        return 1;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        return 1;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "error: usage: %s\n", e.what());
        return 1;
    } catch (const NumericError& e) {
        std::fprintf(stderr, "error: numeric: %s\n", e.what());
        return 3;
    } catch (const DataError& e) {
        std::fprintf(stderr, "error: data: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: data: %s\n", e.what());
        return 2;
    }
}
