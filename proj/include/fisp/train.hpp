#pragma once

#include <filesystem>

#include "fisp/checkpoint.hpp"
#include "fisp/dataset.hpp"
#include "fisp/metrics.hpp"
#include "fisp/model.hpp"
#include "fisp/synth.hpp"

namespace fisp::train {

namespace fs = std::filesystem;
using ckpt::json;

struct TrainConfig {
    std::int64_t total_iters = 30000;
    double lr_init = 2e-4;
    std::int64_t lr_halve_every = 10000;
    int batch_size = 4;
    int patch_size = 448;
    std::uint64_t seed = 1;
    loss::LossWeights loss_weights;
    net::ModelConfig model;
    std::string dataset_root;
    std::string out_dir = "runs/default";
    std::string perceptual_weights;  // empty -> seeded fallback extractor
    std::int64_t checkpoint_every = 1000;
    double grad_clip = 0.0;  // 0 disables clipping
    int raw_bit_depth = 10;
    std::string cfa = "rggb";

    void validate() const {
        if (total_iters < 1) throw ConfigError("total_iters must be >= 1");
        if (lr_init <= 0) throw ConfigError("lr_init must be positive");
        if (lr_halve_every < 1) throw ConfigError("lr_halve_every must be >= 1");
        if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
        if (patch_size < 2 || patch_size % 2 != 0)
            throw ConfigError("patch_size must be even and >= 2");
        if (grad_clip < 0) throw ConfigError("grad_clip must be >= 0");
        model.validate();
    }
};

inline double lr_at(const TrainConfig& cfg, std::int64_t t) {
    return cfg.lr_init * std::pow(0.5, static_cast<double>(t / cfg.lr_halve_every));
}

inline json model_config_to_json(const net::ModelConfig& m) {
    return json{{"base_channels", m.base_channels},
                {"n_blocks_structure", m.n_blocks_structure},
                {"n_blocks_color", m.n_blocks_color},
                {"fusion_scales", m.fusion_scales},
                {"enable_phase_branch", m.enable_phase_branch},
                {"enable_amplitude_branch", m.enable_amplitude_branch},
                {"seed", m.seed}};
}

inline net::ModelConfig model_config_from_json(const json& j) {
    net::ModelConfig m;
    m.base_channels = j.value("base_channels", m.base_channels);
    m.n_blocks_structure = j.value("n_blocks_structure", m.n_blocks_structure);
    m.n_blocks_color = j.value("n_blocks_color", m.n_blocks_color);
    m.fusion_scales = j.value("fusion_scales", m.fusion_scales);
    m.enable_phase_branch = j.value("enable_phase_branch", m.enable_phase_branch);
    m.enable_amplitude_branch = j.value("enable_amplitude_branch", m.enable_amplitude_branch);
    m.seed = j.value("seed", m.seed);
    return m;
}

inline json train_config_to_json(const TrainConfig& c) {
    return json{{"total_iters", c.total_iters},
                {"lr_init", c.lr_init},
                {"lr_halve_every", c.lr_halve_every},
                {"batch_size", c.batch_size},
                {"patch_size", c.patch_size},
                {"seed", c.seed},
                {"loss_weights",
                 {{"alpha", c.loss_weights.alpha},
                  {"beta", c.loss_weights.beta},
                  {"gamma", c.loss_weights.gamma},
                  {"ssim_coeff", c.loss_weights.ssim_coeff}}},
                {"model", model_config_to_json(c.model)},
                {"dataset_root", c.dataset_root},
                {"out_dir", c.out_dir},
                {"perceptual_weights", c.perceptual_weights},
                {"checkpoint_every", c.checkpoint_every},
                {"grad_clip", c.grad_clip},
                {"raw_bit_depth", c.raw_bit_depth},
                {"cfa", c.cfa}};
}

inline TrainConfig train_config_from_json(const json& j) {
    TrainConfig c;
    c.total_iters = j.value("total_iters", c.total_iters);
    c.lr_init = j.value("lr_init", c.lr_init);
    c.lr_halve_every = j.value("lr_halve_every", c.lr_halve_every);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.patch_size = j.value("patch_size", c.patch_size);
    c.seed = j.value("seed", c.seed);
    if (j.contains("loss_weights")) {
        const auto& w = j.at("loss_weights");
        c.loss_weights.alpha = w.value("alpha", c.loss_weights.alpha);
        c.loss_weights.beta = w.value("beta", c.loss_weights.beta);
        c.loss_weights.gamma = w.value("gamma", c.loss_weights.gamma);
        c.loss_weights.ssim_coeff = w.value("ssim_coeff", c.loss_weights.ssim_coeff);
    }
    if (j.contains("model")) c.model = model_config_from_json(j.at("model"));
    c.dataset_root = j.value("dataset_root", c.dataset_root);
    c.out_dir = j.value("out_dir", c.out_dir);
    c.perceptual_weights = j.value("perceptual_weights", c.perceptual_weights);
    c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
    c.grad_clip = j.value("grad_clip", c.grad_clip);
    c.raw_bit_depth = j.value("raw_bit_depth", c.raw_bit_depth);
    c.cfa = j.value("cfa", c.cfa);
    return c;
}

// Adam with bias correction. Moment tensors are keyed to the parameter
// list order, which is fixed by construction.
struct Adam {
    double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    std::int64_t t = 0;
    std::vector<Tensor> m, v;

    void init(const net::ParamList& params) {
        m.clear();
        v.clear();
        for (const auto& [_, p] : params.items) {
            m.emplace_back(p->val.n, p->val.c, p->val.h, p->val.w);
            v.emplace_back(p->val.n, p->val.c, p->val.h, p->val.w);
        }
    }

    void step(const net::ParamList& params, double lr, double clip = 0.0) {
        ++t;
        const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
        double scale = 1.0;
        if (clip > 0.0) {
            double sq = 0.0;
            for (const auto& [_, p] : params.items)
                for (const double g : p->grad.v) sq += g * g;
            const double norm = std::sqrt(sq);
            if (norm > clip) scale = clip / norm;
        }
        for (std::size_t i = 0; i < params.items.size(); ++i) {
            Tensor& pv = params.items[i].second->val;
            const Tensor& g = params.items[i].second->grad;
            if (g.v.empty()) continue;  // parameter unused by this graph
            for (std::size_t k = 0; k < pv.v.size(); ++k) {
                const double gk = g.v[k] * scale;
                m[i].v[k] = beta1 * m[i].v[k] + (1.0 - beta1) * gk;
                v[i].v[k] = beta2 * v[i].v[k] + (1.0 - beta2) * gk * gk;
                const double mhat = m[i].v[k] / bc1;
                const double vhat = v[i].v[k] / bc2;
                pv.v[k] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }
};

struct IterationLog {
    std::int64_t iter = 0;
    double lr = 0.0;
    loss::LossReport report;
};

struct TrainResult {
    ckpt::Checkpoint final_checkpoint;
    std::vector<IterationLog> log;
    std::string checkpoint_path;
    std::string log_path;
};

namespace detail {

inline void check_finite_report(const loss::LossReport& r, std::int64_t iter) {
    const std::pair<const char*, double> terms[] = {
        {"phase", r.l_pha},   {"amplitude", r.l_amp}, {"frequency", r.l_fre},
        {"perceptual", r.l_vgg}, {"ssim", r.l_ssim},  {"l1", r.l_1},
        {"spatial", r.l_spa}, {"total", r.total}};
    for (const auto& [name, value] : terms)
        if (!std::isfinite(value))
            throw NumericError("non-finite " + std::string(name) + " loss at iteration " +
                               std::to_string(iter));
}

inline ckpt::Checkpoint snapshot(const net::IspModel& model, const Adam& opt, const Rng& rng,
                                 const TrainConfig& cfg, std::int64_t iteration) {
    ckpt::Checkpoint ck;
    ck.iteration = iteration;
    ck.rng_state = rng.state();
    ck.config = train_config_to_json(cfg);
    const auto params = model.params();
    for (const auto& [name, p] : params.items) ck.tensors.emplace_back(name, p->val);
    for (std::size_t i = 0; i < params.items.size(); ++i) {
        ck.tensors.emplace_back(params.items[i].first + ".adam_m", opt.m[i]);
        ck.tensors.emplace_back(params.items[i].first + ".adam_v", opt.v[i]);
    }
    return ck;
}

inline void restore_params(const net::IspModel& model, Adam& opt, const ckpt::Checkpoint& ck,
                           bool want_moments) {
    const auto params = model.params();
    opt.init(params);
    for (std::size_t i = 0; i < params.items.size(); ++i) {
        const auto& name = params.items[i].first;
        const Tensor* pv = ck.find(name);
        if (!pv) throw DataError("checkpoint missing parameter '" + name + "'");
        if (!pv->same_shape(params.items[i].second->val))
            throw DimensionError("checkpoint parameter '" + name + "' has wrong shape");
        params.items[i].second->val = *pv;
        if (want_moments) {
            const Tensor* mm = ck.find(name + ".adam_m");
            const Tensor* vv = ck.find(name + ".adam_v");
            if (!mm || !vv) throw DataError("checkpoint missing optimizer state for '" + name + "'");
            opt.m[i] = *mm;
            opt.v[i] = *vv;
        }
    }
    opt.t = ck.iteration;
}

struct CachedPair {
    std::string name;
    RawImage raw;
    RgbImage rgb;
};

inline std::vector<CachedPair> load_split(const TrainConfig& cfg, Split split) {
    DatasetConfig dc;
    dc.split = split;
    DatasetIndex index = load_dataset(cfg.dataset_root, dc);
    if (cfg.raw_bit_depth > 0) index.bit_depth = cfg.raw_bit_depth;
    if (!cfg.cfa.empty()) index.cfa = cfa_from_name(cfg.cfa);
    std::vector<CachedPair> cache;
    cache.reserve(index.pairs.size());
    for (const auto& entry : index.pairs) {
        auto pair = load_pair(index, entry);
        cache.push_back({entry.name, std::move(pair.raw), std::move(pair.rgb)});
    }
    return cache;
}

}  // namespace detail

class Trainer {
  public:
    explicit Trainer(const TrainConfig& cfg)
        : cfg_(cfg), model_(cfg.model), rng_(cfg.seed) {
        cfg_.validate();
        params_ = model_.params();
        opt_.init(params_);
        extractor_ = make_extractor(cfg_);
    }

    static loss::FeatureExtractor make_extractor(const TrainConfig& cfg) {
        if (!cfg.perceptual_weights.empty()) {
            if (auto fe = loss::FeatureExtractor::from_file(cfg.perceptual_weights)) return *fe;
        }
        return loss::FeatureExtractor::seeded_fallback();
    }

    void resume_from(const ckpt::Checkpoint& ck) {
        detail::restore_params(model_, opt_, ck, true);
        start_iter_ = ck.iteration;
        rng_.restore(ck.rng_state);
    }

    // Single-writer deterministic loop. The whole split is cached in
    // memory up front; per iteration the RNG draws (pair, patch) for each
    // batch element in a fixed order.
    TrainResult run() {
        auto cache = detail::load_split(cfg_, Split::kTrain);
        if (cache.empty()) throw DataError("training split is empty under " + cfg_.dataset_root);
        for (const auto& pair : cache) {
            if (pair.raw.height() < cfg_.patch_size || pair.raw.width() < cfg_.patch_size)
                throw DimensionError("pair '" + pair.name + "' smaller than patch_size " +
                                     std::to_string(cfg_.patch_size));
        }
        const std::int64_t div = std::int64_t{1} << (cfg_.model.fusion_scales - 1);
        if (cfg_.patch_size % div != 0)
            throw DimensionError("patch_size must be divisible by " + std::to_string(div));

        fs::create_directories(cfg_.out_dir);
        const std::string log_path = (fs::path(cfg_.out_dir) / "train_log.csv").string();
        std::ofstream log(log_path, start_iter_ > 0 ? std::ios::app : std::ios::trunc);
        if (start_iter_ == 0)
            log << "iter,lr,total,l_spa,l_fre,l_pha,l_amp,l_vgg,l_ssim,l_1,fallback\n";

        TrainResult result;
        result.log_path = log_path;
        const std::string ck_path = (fs::path(cfg_.out_dir) / "checkpoint.fckp").string();

        for (std::int64_t it = start_iter_; it < cfg_.total_iters; ++it) {
            const auto [packed, dem, gt] = sample_batch(cache);
            auto outs = model_.forward_vars(ad::constant(packed), ad::constant(dem));
            auto tl = loss::total_loss_v(outs.y, outs.y_structure, outs.y_color,
                                         ad::constant(gt), cfg_.loss_weights, extractor_);
            detail::check_finite_report(tl.report, it);
            for (auto& [_, p] : params_.items) p->zero_grad();
            ad::backward(tl.total);
            opt_.step(params_, lr_at(cfg_, it), cfg_.grad_clip);

            IterationLog row{it, lr_at(cfg_, it), tl.report};
            result.log.push_back(row);
            log << it << ',' << row.lr << ',' << row.report.total << ',' << row.report.l_spa
                << ',' << row.report.l_fre << ',' << row.report.l_pha << ',' << row.report.l_amp
                << ',' << row.report.l_vgg << ',' << row.report.l_ssim << ',' << row.report.l_1
                << ',' << (row.report.extractor_fallback ? 1 : 0) << '\n';

            if (cfg_.checkpoint_every > 0 && (it + 1) % cfg_.checkpoint_every == 0 &&
                it + 1 < cfg_.total_iters)
                ckpt::save_checkpoint(ck_path, detail::snapshot(model_, opt_, rng_, cfg_, it + 1));
        }
        result.final_checkpoint = detail::snapshot(model_, opt_, rng_, cfg_, cfg_.total_iters);
        ckpt::save_checkpoint(ck_path, result.final_checkpoint);
        result.checkpoint_path = ck_path;
        return result;
    }

    net::IspModel& model() { return model_; }
    Rng& rng() { return rng_; }

  private:
    std::tuple<Tensor, Tensor, Tensor> sample_batch(
        const std::vector<detail::CachedPair>& cache) {
        const int b = cfg_.batch_size;
        const int p = cfg_.patch_size;
        Tensor packed(b, 4, p / 2, p / 2), dem(b, 3, p, p), gt(b, 3, p, p);
        for (int e = 0; e < b; ++e) {
            const auto& pair = cache[static_cast<std::size_t>(rng_.index(
                static_cast<std::int64_t>(cache.size())))];
            LoadedPair lp{pair.raw, pair.rgb};
            auto [raw_patch, rgb_patch] = extract_patch_pair(lp, p, rng_.bits());
            PackedRaw pk = pack_bayer(raw_patch);
            RgbImage dm = demosaic(raw_patch);
            std::copy(pk.data.v.begin(), pk.data.v.end(),
                      packed.v.begin() + static_cast<std::ptrdiff_t>(e * pk.data.numel()));
            std::copy(dm.data.v.begin(), dm.data.v.end(),
                      dem.v.begin() + static_cast<std::ptrdiff_t>(e * dm.data.numel()));
            std::copy(rgb_patch.data.v.begin(), rgb_patch.data.v.end(),
                      gt.v.begin() + static_cast<std::ptrdiff_t>(e * rgb_patch.data.numel()));
        }
        return {std::move(packed), std::move(dem), std::move(gt)};
    }

    TrainConfig cfg_;
    net::IspModel model_;
    net::ParamList params_;
    Adam opt_;
    Rng rng_;
    loss::FeatureExtractor extractor_;
    std::int64_t start_iter_ = 0;
};

inline TrainResult train(const TrainConfig& cfg) {
    Trainer tr(cfg);
    return tr.run();
}

inline TrainResult resume(const TrainConfig& cfg, const std::string& checkpoint_path) {
    Trainer tr(cfg);
    tr.resume_from(ckpt::load_checkpoint(checkpoint_path));
    return tr.run();
}

// Restores a model from a checkpoint; the embedded config wins unless the
// caller overrides it.
inline net::IspModel model_from_checkpoint(const ckpt::Checkpoint& ck) {
    TrainConfig cfg = train_config_from_json(ck.config);
    net::IspModel model(cfg.model);
    Adam opt;
    detail::restore_params(model, opt, ck, false);
    return model;
}

struct EvalOptions {
    Split split = Split::kTest;
    bool float_metrics = false;
    std::string table_path;      // optional output files
    std::string keyvalue_path;
    metric::LpipsScorer lpips;
};

inline metric::DatasetMetrics evaluate(const net::IspModel& model, const TrainConfig& cfg,
                                       const EvalOptions& opt) {
    DatasetConfig dc;
    dc.split = opt.split;
    DatasetIndex index = load_dataset(cfg.dataset_root, dc);
    if (cfg.raw_bit_depth > 0) index.bit_depth = cfg.raw_bit_depth;
    if (!cfg.cfa.empty()) index.cfa = cfa_from_name(cfg.cfa);
    if (index.pairs.empty())
        throw DataError("evaluation split '" + std::string(split_name(opt.split)) +
                        "' is empty under " + cfg.dataset_root);
    metric::DatasetMetrics dm;
    const std::int64_t div = std::int64_t{1} << (cfg.model.fusion_scales - 1);
    for (const auto& entry : index.pairs) {
        LoadedPair pair;
        try {
            pair = load_pair(index, entry);
        } catch (const DimensionError&) {
            ++dm.skipped;  // RAW/RGB dims disagree; row dropped, count surfaced
            continue;
        }
        if (pair.raw.height() % div != 0 || pair.raw.width() % div != 0 ||
            pair.raw.height() % 2 != 0 || pair.raw.width() % 2 != 0) {
            ++dm.skipped;
            continue;
        }
        auto outs = model.forward(pair.raw);
        dm.rows.emplace_back(entry.name,
                             metric::compute_metrics(outs.y, pair.rgb.data, opt.float_metrics,
                                                     opt.lpips));
    }
    dm.finalize();
    if (!opt.table_path.empty()) {
        std::ofstream f(opt.table_path);
        f << metric::metrics_table(dm);
    }
    if (!opt.keyvalue_path.empty()) {
        std::ofstream f(opt.keyvalue_path);
        f << metric::metrics_keyvalues(dm);
    }
    return dm;
}

namespace detail {

inline Tensor normalized_log_amplitude(const Tensor& rgb) {
    auto sp = fourier::decompose(rgb);
    Tensor out = sp.amplitude;
    double hi = 0.0;
    for (auto& v : out.v) {
        v = std::log1p(v);
        hi = std::max(hi, v);
    }
    if (hi > 0.0)
        for (auto& v : out.v) v /= hi;
    return out;
}

inline Tensor normalized_phase(const Tensor& rgb) {
    auto sp = fourier::decompose(rgb);
    Tensor out = sp.phase;
    for (auto& v : out.v) v = (v + M_PI) / (2.0 * M_PI);
    return out;
}

}  // namespace detail

// Writes <stem>.png, plus branch previews and spectral visualizations of
// the final output when emit_intermediates is set. Returns written paths.
inline std::vector<std::string> infer(const net::IspModel& model, const std::string& raw_path,
                                      const std::string& out_dir, bool emit_intermediates,
                                      int bit_depth, Cfa cfa) {
    RawImage raw = load_raw(raw_path, bit_depth, cfa);
    const std::int64_t div = std::int64_t{1} << (model.config.fusion_scales - 1);
    if (raw.height() % 2 != 0 || raw.width() % 2 != 0 || raw.height() % div != 0 ||
        raw.width() % div != 0)
        throw DimensionError("RAW dims " + std::to_string(raw.height()) + "x" +
                             std::to_string(raw.width()) + " must be divisible by " +
                             std::to_string(std::max<std::int64_t>(div, 2)));
    auto outs = model.forward(raw);
    fs::create_directories(out_dir);
    const std::string stem = fs::path(raw_path).stem().string();
    std::vector<std::string> written;
    auto emit = [&](const std::string& suffix, const Tensor& t) {
        const std::string path = (fs::path(out_dir) / (stem + suffix + ".png")).string();
        pngio::write_rgb8(path, t);
        written.push_back(path);
    };
    emit("", outs.y);
    if (emit_intermediates) {
        emit("_structure", outs.y_structure);
        emit("_color", outs.y_color);
        emit("_log_amplitude", detail::normalized_log_amplitude(outs.y));
        emit("_phase", detail::normalized_phase(outs.y));
    }
    return written;
}

}  // namespace fisp::train
