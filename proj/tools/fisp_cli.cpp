// Command-line front end: train / eval / infer / decompose / synth-data.
// Exit codes: 0 success, 2 usage, 3 config error, 4 data error, 5 runtime.

#include <CLI11.hpp>

#include <cstdio>
#include <cstdlib>
#include <iostream>
#include <map>

#include "fisp/train.hpp"

namespace {

using namespace fisp;

constexpr int kExitUsage = 2;
constexpr int kExitConfig = 3;
constexpr int kExitData = 4;
constexpr int kExitRuntime = 5;

struct TrainArgs {
    std::string config_path;
    std::string dataset_root;
    std::string out_dir;
    std::string resume_path;
    std::int64_t total_iters = -1;
    double lr_init = -1.0;
    int batch_size = -1;
    int patch_size = -1;
    std::int64_t seed = -1;
    std::int64_t channels = -1;
    int log_every = 100;
};

train::TrainConfig resolve_train_config(const TrainArgs& a) {
    train::TrainConfig cfg;
    if (!a.config_path.empty()) {
        std::ifstream in(a.config_path);
        if (!in) throw ConfigError("config file not found: " + a.config_path);
        ckpt::json j = ckpt::json::parse(in, nullptr, false);
        if (j.is_discarded()) throw ConfigError("config file is not valid JSON: " + a.config_path);
        cfg = train::train_config_from_json(j);
    }
    if (const char* env = std::getenv("FISP_DATASET_ROOT"); env && *env) cfg.dataset_root = env;
    if (!a.dataset_root.empty()) cfg.dataset_root = a.dataset_root;
    if (!a.out_dir.empty()) cfg.out_dir = a.out_dir;
    if (a.total_iters >= 0) cfg.total_iters = a.total_iters;
    if (a.lr_init > 0) cfg.lr_init = a.lr_init;
    if (a.batch_size > 0) cfg.batch_size = a.batch_size;
    if (a.patch_size > 0) cfg.patch_size = a.patch_size;
    if (a.seed >= 0) {
        cfg.seed = static_cast<std::uint64_t>(a.seed);
        cfg.model.seed = static_cast<std::uint64_t>(a.seed);
    }
    if (a.channels > 0) cfg.model.base_channels = a.channels;
    if (cfg.dataset_root.empty())
        throw ConfigError("no dataset root: pass --dataset-root, set FISP_DATASET_ROOT, "
                          "or provide it in the config file");
    cfg.validate();
    return cfg;
}

int run_train(const TrainArgs& a) {
    train::TrainConfig cfg = resolve_train_config(a);
    train::Trainer trainer(cfg);
    if (!a.resume_path.empty()) trainer.resume_from(ckpt::load_checkpoint(a.resume_path));
    std::cout << "training: " << cfg.total_iters << " iters, batch " << cfg.batch_size
              << ", patch " << cfg.patch_size << ", channels " << cfg.model.base_channels
              << ", params " << trainer.model().param_count() << "\n";
    auto result = trainer.run();
    for (const auto& row : result.log)
        if (a.log_every > 0 && (row.iter % a.log_every == 0 || row.iter + 1 == cfg.total_iters))
            std::cout << "iter " << row.iter << " lr " << row.lr << " total " << row.report.total
                      << "\n";
    std::cout << "checkpoint: " << result.checkpoint_path << "\n"
              << "log: " << result.log_path << "\n";
    return 0;
}

Split parse_split(const std::string& s) {
    if (s == "train") return Split::kTrain;
    if (s == "val") return Split::kVal;
    if (s == "test") return Split::kTest;
    throw ConfigError("unknown split '" + s + "' (expected train, val or test)");
}

int run_eval(const std::string& ckpt_path, const std::string& dataset_root,
             const std::string& split, bool float_metrics, const std::string& table_path,
             const std::string& kv_path) {
    auto ck = ckpt::load_checkpoint(ckpt_path);
    train::TrainConfig cfg = train::train_config_from_json(ck.config);
    if (const char* env = std::getenv("FISP_DATASET_ROOT"); env && *env) cfg.dataset_root = env;
    if (!dataset_root.empty()) cfg.dataset_root = dataset_root;
    if (cfg.dataset_root.empty()) throw ConfigError("no dataset root for evaluation");
    auto model = train::model_from_checkpoint(ck);
    train::EvalOptions opt;
    opt.split = parse_split(split);
    opt.float_metrics = float_metrics;
    opt.table_path = table_path;
    opt.keyvalue_path = kv_path;
    auto dm = train::evaluate(model, cfg, opt);
    std::cout << metric::metrics_table(dm);
    return 0;
}

int run_infer(const std::string& ckpt_path, const std::string& raw_path,
              const std::string& out_dir, bool intermediates, int bit_depth,
              const std::string& cfa) {
    auto ck = ckpt::load_checkpoint(ckpt_path);
    train::TrainConfig cfg = train::train_config_from_json(ck.config);
    auto model = train::model_from_checkpoint(ck);
    const int bits = bit_depth > 0 ? bit_depth : cfg.raw_bit_depth;
    const Cfa pattern = cfa_from_name(cfa.empty() ? cfg.cfa : cfa);
    auto written = train::infer(model, raw_path, out_dir, intermediates, bits, pattern);
    for (const auto& p : written) std::cout << p << "\n";
    return 0;
}

int run_decompose(const std::string& in_path, const std::string& out_dir) {
    Tensor rgb = pngio::read_rgb8(in_path);
    auto sp = fourier::decompose(rgb);
    Tensor amp = sp.amplitude;
    double hi = 0.0;
    for (auto& v : amp.v) {
        v = std::log1p(v);
        hi = std::max(hi, v);
    }
    if (hi > 0.0)
        for (auto& v : amp.v) v /= hi;
    Tensor phase = sp.phase;
    for (auto& v : phase.v) v = (v + M_PI) / (2.0 * M_PI);
    std::filesystem::create_directories(out_dir);
    const std::string stem = std::filesystem::path(in_path).stem().string();
    const auto amp_path =
        (std::filesystem::path(out_dir) / (stem + "_log_amplitude.png")).string();
    const auto phase_path = (std::filesystem::path(out_dir) / (stem + "_phase.png")).string();
    pngio::write_rgb8(amp_path, amp);
    pngio::write_rgb8(phase_path, phase);
    std::cout << amp_path << "\n" << phase_path << "\n";
    return 0;
}

struct SynthArgs {
    std::string in_dir;
    std::string out_root;
    std::string split = "train";
    int procedural = 0;
    int size = 64;
    std::uint64_t seed = 0;
    int bit_depth = 10;
    std::string cfa = "rggb";
    double inverse_gamma = 2.2;
    std::vector<double> wb = {2.0, 1.0, 1.5};
    double noise_read = 0.0;
    double noise_shot = 0.0;
};

// Pairs a ground-truth sRGB image with a mosaic rendered through the
// inverse pipeline (gamma, inverse white balance, optional noise,
// quantization), then writes the documented dataset layout.
int run_synth(const SynthArgs& a) {
    if (a.out_root.empty()) throw ConfigError("synth-data: --out is required");
    if (a.in_dir.empty() && a.procedural <= 0)
        throw ConfigError("synth-data: pass --in <dir> or --procedural <count>");
    if (a.wb.size() != 3) throw ConfigError("synth-data: --wb takes three gains");

    DegradationParams params;
    params.inverse_gamma = a.inverse_gamma;
    params.wb_gains = {a.wb[0], a.wb[1], a.wb[2]};
    params.noise_read_sigma = a.noise_read;
    params.noise_shot_gain = a.noise_shot;
    params.bit_depth = a.bit_depth;
    params.cfa = cfa_from_name(a.cfa);

    const auto root = std::filesystem::path(a.out_root);
    const auto raw_dir = root / a.split / "raw";
    const auto rgb_dir = root / a.split / "rgb";
    std::filesystem::create_directories(raw_dir);
    std::filesystem::create_directories(rgb_dir);

    struct Item {
        std::string name;
        Tensor rgb;
    };
    std::vector<Item> items;
    if (!a.in_dir.empty()) {
        std::vector<std::filesystem::path> files;
        for (const auto& e : std::filesystem::directory_iterator(a.in_dir))
            if (e.path().extension() == ".png") files.push_back(e.path());
        if (files.empty()) throw DataError("synth-data: no .png files under " + a.in_dir);
        std::sort(files.begin(), files.end());
        for (const auto& f : files) {
            Tensor rgb = pngio::read_rgb8(f.string());
            // trim a trailing row/column so the mosaic tiles evenly
            if (rgb.h % 2 != 0 || rgb.w % 2 != 0) {
                Tensor t(1, 3, rgb.h & ~1, rgb.w & ~1);
                for (std::int64_t c = 0; c < 3; ++c)
                    for (std::int64_t y = 0; y < t.h; ++y)
                        for (std::int64_t x = 0; x < t.w; ++x)
                            t.at(0, c, y, x) = rgb.at(0, c, y, x);
                rgb = std::move(t);
            }
            items.push_back({f.stem().string(), std::move(rgb)});
        }
    } else {
        if (a.size < 2 || a.size % 2 != 0)
            throw ConfigError("synth-data: --size must be even and >= 2");
        for (int i = 0; i < a.procedural; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "synth%04d", i);
            items.push_back({name, make_procedural_rgb(a.size, a.size,
                                                       a.seed * 1000003u +
                                                           static_cast<std::uint64_t>(i))
                                       .data});
        }
    }

    for (std::size_t i = 0; i < items.size(); ++i) {
        DegradationParams p = params;
        p.seed = a.seed * 0x9E3779B9u + i;
        RawImage raw = synthesize_raw(RgbImage{items[i].rgb}, p);
        save_raw(raw_dir / (items[i].name + ".png"), raw);
        pngio::write_rgb8((rgb_dir / (items[i].name + ".png")).string(), items[i].rgb);
    }

    std::map<std::string, std::string> extras;
    extras["inverse_gamma"] = std::to_string(a.inverse_gamma);
    extras["wb_r"] = std::to_string(a.wb[0]);
    extras["wb_g"] = std::to_string(a.wb[1]);
    extras["wb_b"] = std::to_string(a.wb[2]);
    extras["noise_read_sigma"] = std::to_string(a.noise_read);
    extras["noise_shot_gain"] = std::to_string(a.noise_shot);
    extras["seed"] = std::to_string(a.seed);
    write_meta_file(root / "meta.toml", a.bit_depth, params.cfa, extras);

    std::cout << "wrote " << items.size() << " pairs under " << (root / a.split).string() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"frequency-domain RAW-to-sRGB pipeline"};
    app.require_subcommand(1);

    TrainArgs ta;
    auto* train_cmd = app.add_subcommand("train", "train a model");
    train_cmd->add_option("--config", ta.config_path, "JSON config file");
    train_cmd->add_option("--dataset-root", ta.dataset_root, "dataset root directory");
    train_cmd->add_option("--out-dir", ta.out_dir, "run output directory");
    train_cmd->add_option("--resume", ta.resume_path, "checkpoint to resume from");
    train_cmd->add_option("--iters", ta.total_iters, "total iterations");
    train_cmd->add_option("--lr", ta.lr_init, "initial learning rate");
    train_cmd->add_option("--batch", ta.batch_size, "batch size");
    train_cmd->add_option("--patch", ta.patch_size, "training patch size");
    train_cmd->add_option("--seed", ta.seed, "seed for sampling and init");
    train_cmd->add_option("--channels", ta.channels, "base channel count (16/24/48)");
    train_cmd->add_option("--log-every", ta.log_every, "stdout cadence (0 silences)");

    std::string eval_ckpt, eval_root, eval_split = "test", eval_table, eval_kv;
    bool eval_float = false;
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint file")->required();
    eval_cmd->add_option("--dataset-root", eval_root, "dataset root override");
    eval_cmd->add_option("--split", eval_split, "train/val/test");
    eval_cmd->add_flag("--float-metrics", eval_float, "skip 8-bit quantization");
    eval_cmd->add_option("--table", eval_table, "write text table here");
    eval_cmd->add_option("--keyvalues", eval_kv, "write key-value report here");

    std::string inf_ckpt, inf_in, inf_out = ".", inf_cfa;
    bool inf_intermediates = false;
    int inf_bits = 0;
    auto* infer_cmd = app.add_subcommand("infer", "render one RAW file");
    infer_cmd->add_option("--checkpoint", inf_ckpt, "checkpoint file")->required();
    infer_cmd->add_option("--in", inf_in, "16-bit grayscale RAW PNG")->required();
    infer_cmd->add_option("--out", inf_out, "output directory");
    infer_cmd->add_flag("--intermediates", inf_intermediates,
                        "also write branch previews and spectra");
    infer_cmd->add_option("--bit-depth", inf_bits, "RAW bit depth override");
    infer_cmd->add_option("--cfa", inf_cfa, "CFA pattern override (rggb/bggr/grbg/gbrg)");

    std::string dec_in, dec_out = ".";
    auto* dec_cmd = app.add_subcommand("decompose", "write amplitude/phase visualizations");
    dec_cmd->add_option("--in", dec_in, "RGB PNG input")->required();
    dec_cmd->add_option("--out", dec_out, "output directory");

    SynthArgs sa;
    std::int64_t synth_seed = 0;
    auto* synth_cmd = app.add_subcommand("synth-data", "build a synthetic RAW/RGB dataset");
    synth_cmd->add_option("--in", sa.in_dir, "directory of source RGB PNGs");
    synth_cmd->add_option("--procedural", sa.procedural, "generate N procedural images instead");
    synth_cmd->add_option("--size", sa.size, "procedural image size (even)");
    synth_cmd->add_option("--out", sa.out_root, "dataset root to create")->required();
    synth_cmd->add_option("--split", sa.split, "split subdirectory (default train)");
    synth_cmd->add_option("--seed", synth_seed, "noise/content seed");
    synth_cmd->add_option("--bit-depth", sa.bit_depth, "RAW bit depth");
    synth_cmd->add_option("--cfa", sa.cfa, "CFA pattern");
    synth_cmd->add_option("--gamma", sa.inverse_gamma, "inverse gamma exponent");
    synth_cmd->add_option("--wb", sa.wb, "white-balance gains r g b")->expected(3);
    synth_cmd->add_option("--noise-read", sa.noise_read, "read noise sigma");
    synth_cmd->add_option("--noise-shot", sa.noise_shot, "shot noise gain");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);  // prints usage/diagnostic
        return kExitUsage;
    }

    try {
        if (*train_cmd) return run_train(ta);
        if (*eval_cmd)
            return run_eval(eval_ckpt, eval_root, eval_split, eval_float, eval_table, eval_kv);
        if (*infer_cmd)
            return run_infer(inf_ckpt, inf_in, inf_out, inf_intermediates, inf_bits, inf_cfa);
        if (*dec_cmd) return run_decompose(dec_in, dec_out);
        if (*synth_cmd) {
            sa.seed = static_cast<std::uint64_t>(synth_seed);
            return run_synth(sa);
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const DataError& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitRuntime;
    }
    return kExitUsage;
}
