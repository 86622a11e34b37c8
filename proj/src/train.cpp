#include "lle/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "lle/convert.hpp"

namespace fs = std::filesystem;

namespace lle {

namespace {

void reject_unknown_keys(const nlohmann::json& j, const std::vector<std::string>& known,
                         const std::string& scope) {
    for (const auto& [key, _] : j.items())
        if (std::find(known.begin(), known.end(), key) == known.end())
            throw std::runtime_error("config: unknown key '" + scope + key + "'");
}

Smoother parse_smoother(const std::string& s) {
    if (s == "gaussian") return Smoother::Gaussian;
    if (s == "median") return Smoother::Median;
    if (s == "resample") return Smoother::Resample;
    throw std::runtime_error("config: unknown smoother '" + s + "'");
}

// Distinct deterministic streams per purpose, all derived from one seed.
unsigned sub_seed(int seed, unsigned purpose, unsigned a = 0, unsigned b = 0) {
    unsigned h = static_cast<unsigned>(seed) * 2654435761u;
    h ^= purpose * 2246822519u + 0x9e3779b9u;
    h ^= a * 3266489917u + (h << 6) + (h >> 2);
    h ^= b * 668265263u + (h << 6) + (h >> 2);
    return h;
}

}  // namespace

LossKind parse_loss_kind(const std::string& name) {
    if (name == "l1") return LossKind::L1;
    if (name == "brightness") return LossKind::Brightness;
    if (name == "smooth") return LossKind::Smooth;
    if (name == "ssim") return LossKind::Ssim;
    if (name == "total") return LossKind::Total;
    throw std::runtime_error("unknown loss '" + name + "'");
}

TrainConfig parse_train_config_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    reject_unknown_keys(j, {"batch_size", "learning_rate", "decay_factor", "patience",
                            "min_learning_rate", "epochs", "seed", "loss", "objective", "augment",
                            "tau", "max_rounds", "validation_fraction", "niqe_patch"},
                        "");
    TrainConfig c;
    c.batch_size = j.value("batch_size", c.batch_size);
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.decay_factor = j.value("decay_factor", c.decay_factor);
    c.patience = j.value("patience", c.patience);
    c.min_learning_rate = j.value("min_learning_rate", c.min_learning_rate);
    c.epochs = j.value("epochs", c.epochs);
    c.seed = j.value("seed", c.seed);
    c.objective = parse_loss_kind(j.value("objective", std::string("total")));
    c.augment = j.value("augment", c.augment);
    c.tau = j.value("tau", c.tau);
    c.max_rounds = j.value("max_rounds", c.max_rounds);
    c.validation_fraction = j.value("validation_fraction", c.validation_fraction);
    c.niqe_patch = j.value("niqe_patch", c.niqe_patch);
    if (j.contains("loss")) {
        const auto& l = j["loss"];
        reject_unknown_keys(l, {"lambda1", "lambda2", "lambda3", "gamma1", "gamma2", "smoother",
                                "smooth_sigma", "smooth_radius", "ssim_window", "ssim_k1", "ssim_k2"},
                            "loss.");
        c.loss.lambda1 = l.value("lambda1", c.loss.lambda1);
        c.loss.lambda2 = l.value("lambda2", c.loss.lambda2);
        c.loss.lambda3 = l.value("lambda3", c.loss.lambda3);
        c.loss.gamma1 = l.value("gamma1", c.loss.gamma1);
        c.loss.gamma2 = l.value("gamma2", c.loss.gamma2);
        if (l.contains("smoother")) c.loss.smoother = parse_smoother(l["smoother"].get<std::string>());
        c.loss.smooth_sigma = l.value("smooth_sigma", c.loss.smooth_sigma);
        c.loss.smooth_radius = l.value("smooth_radius", c.loss.smooth_radius);
        c.loss.ssim_window = l.value("ssim_window", c.loss.ssim_window);
        c.loss.ssim_k1 = l.value("ssim_k1", c.loss.ssim_k1);
        c.loss.ssim_k2 = l.value("ssim_k2", c.loss.ssim_k2);
    }
    if (c.batch_size < 1 || c.learning_rate <= 0.0 || c.min_learning_rate <= 0.0 || c.tau <= 0.0)
        throw std::runtime_error("config: invalid values (batch >= 1, rates and tau positive)");
    return c;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("config: cannot open " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_train_config_json(text);
}

Dataset load_dataset(const std::string& dir) {
    const fs::path low_dir = fs::path(dir) / "low";
    const fs::path high_dir = fs::path(dir) / "high";
    if (!fs::is_directory(low_dir)) throw std::runtime_error("load_dataset: missing " + low_dir.string());

    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(low_dir))
        if (e.is_regular_file() && e.path().extension() == ".png")
            names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    if (names.empty()) throw std::runtime_error("load_dataset: no PNG files in " + low_dir.string());

    Dataset ds;
    for (const auto& name : names) {
        Sample s;
        s.id = name;
        s.low = load_image((low_dir / name).string());
        const fs::path high = high_dir / name;
        if (fs::exists(high)) {
            ImagePlane target = load_image(high.string());
            if (!target.same_shape(s.low)) {
                ds.diagnostics.push_back("rejected pair '" + name + "': dimension mismatch");
                continue;
            }
            s.target = std::move(target);
            s.provenance = Provenance::TrueLabel;
        }
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

ImagePlane synth_lowlight(const ImagePlane& bright, double gamma, double noise_sigma, int seed) {
    if (gamma < 1.0) throw std::invalid_argument("synth_lowlight: gamma must be >= 1");
    ImagePlane low = gamma_correct(bright, gamma);
    if (noise_sigma > 0.0) {
        std::mt19937 rng(sub_seed(seed, 3));
        std::normal_distribution<double> noise(0.0, noise_sigma);
        for (auto& v : low.data) v = static_cast<float>(v + noise(rng));
    }
    return clamp_unit(low);
}

Sample augment_sample(const Sample& s, int seed) {
    std::mt19937 rng(sub_seed(seed, 4));
    const int pick = std::uniform_int_distribution<int>(0, 5)(rng);
    auto apply = [pick](const ImagePlane& img) {
        switch (pick) {
            case 1: return flip_horizontal(img);
            case 2: return flip_vertical(img);
            case 3: return rotate90(img, 1);
            case 4: return rotate90(img, 2);
            case 5: return rotate90(img, 3);
            default: return img;
        }
    };
    Sample out = s;
    out.low = apply(s.low);
    if (s.target) out.target = apply(*s.target);
    return out;
}

OptimState make_optim_state(const ParamStore& params, const TrainConfig& config) {
    OptimState opt;
    opt.learning_rate = config.learning_rate;
    opt.min_learning_rate = config.min_learning_rate;
    opt.decay_factor = config.decay_factor;
    opt.patience = config.patience;
    for (const auto& e : params.entries) {
        opt.m.emplace_back(e.value.shape);
        opt.v.emplace_back(e.value.shape);
    }
    return opt;
}

void adam_step(ParamStore& params, OptimState& opt) {
    if (params.entries.empty()) throw std::invalid_argument("adam_step: empty parameter store");
    if (opt.m.size() != params.entries.size())
        throw std::invalid_argument("adam_step: optimizer/store mismatch");
    ++opt.step;
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(opt.step));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(opt.step));
    for (size_t p = 0; p < params.entries.size(); ++p) {
        auto& value = params.entries[p].value;
        auto& grad = params.entries[p].grad;
        auto& m = opt.m[p];
        auto& v = opt.v[p];
        for (size_t i = 0; i < value.size(); ++i) {
            const double g = grad.data[i];
            const double mi = opt.beta1 * m.data[i] + (1.0 - opt.beta1) * g;
            const double vi = opt.beta2 * v.data[i] + (1.0 - opt.beta2) * g * g;
            m.data[i] = static_cast<float>(mi);
            v.data[i] = static_cast<float>(vi);
            value.data[i] = static_cast<float>(
                value.data[i] - opt.learning_rate * (mi / bc1) / (std::sqrt(vi / bc2) + opt.epsilon));
        }
        grad.data.assign(grad.size(), 0.0f);
    }
}

void lr_on_plateau(OptimState& opt, const std::vector<double>& val_ssim_history) {
    if (val_ssim_history.empty()) throw std::invalid_argument("lr_on_plateau: empty history");
    const int epoch = static_cast<int>(val_ssim_history.size()) - 1;
    const double current = val_ssim_history.back();
    if (current > opt.best_metric + 1e-4) {
        opt.best_metric = std::max(opt.best_metric, current);
        opt.best_epoch = epoch;
        return;
    }
    opt.best_metric = std::max(opt.best_metric, current);
    const int reference = std::max(opt.best_epoch, opt.last_reduction_epoch);
    if (epoch - reference >= opt.patience) {
        opt.learning_rate = std::max(opt.learning_rate * opt.decay_factor, opt.min_learning_rate);
        opt.last_reduction_epoch = epoch;
        ++opt.reductions;
    }
}

ImagePlane predict_enhanced(const ParamStore& params, const ImagePlane& low) {
    Tape tape;
    auto in = tape.constant(to_tensor<float>(invert(low)));
    auto fw = net_forward(tape, params, in);
    AtmosphericMap map;
    map.h = to_plane(tape.value(fw.h));
    map.c = 1.0f;
    return enhance(low, map);
}

namespace {

struct ValMetrics {
    double ssim = 0.0;
    double psnr = 0.0;
};

ValMetrics validate(const ParamStore& params, const std::vector<Sample>& val) {
    ValMetrics m;
    for (const auto& s : val) {
        const ImagePlane y = predict_enhanced(params, s.low);
        m.ssim += ssim_metric(*s.target, y).value;
        m.psnr += psnr(*s.target, y).value;
    }
    m.ssim /= static_cast<double>(val.size());
    m.psnr /= static_cast<double>(val.size());
    return m;
}

}  // namespace

TrainReport train_loop(const std::vector<Sample>& train, const std::vector<Sample>& val,
                       const TrainConfig& config, ParamStore& params, OptimState& opt,
                       int round, int stop_after_reductions) {
    if (train.empty()) throw std::invalid_argument("train_loop: no labeled samples");
    for (const auto& s : train)
        if (!s.target) throw std::invalid_argument("train_loop: sample '" + s.id + "' has no target");

    const std::vector<Sample>& metric_set = val.empty() ? train : val;

    TrainReport report;
    std::vector<double> ssim_history;
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::mt19937 shuffle_rng(sub_seed(config.seed, 1, static_cast<unsigned>(round),
                                          static_cast<unsigned>(epoch)));
        std::shuffle(order.begin(), order.end(), shuffle_rng);

        double epoch_loss = 0.0;
        size_t seen = 0;
        for (size_t start = 0; start < order.size(); start += config.batch_size) {
            const size_t end = std::min(order.size(), start + config.batch_size);
            const float inv_batch = 1.0f / static_cast<float>(end - start);
            params.zero_grads();
            for (size_t k = start; k < end; ++k) {
                const Sample* sample = &train[order[k]];
                Sample augmented;
                if (config.augment) {
                    augmented = augment_sample(*sample,
                                               static_cast<int>(sub_seed(config.seed, 5,
                                                                         static_cast<unsigned>(epoch),
                                                                         static_cast<unsigned>(order[k]))));
                    sample = &augmented;
                }
                Tape tape;
                const TensorT<float> inverted = to_tensor<float>(invert(sample->low));
                auto in = tape.constant(inverted);
                auto fw = net_forward(tape, params, in);
                // B = h*(I'-1) + 1, y_p = 1 - B (unclamped for the loss)
                auto b = tape.add_scalar(tape.mul(fw.h, tape.add_scalar(in, -1.0f)), 1.0f);
                auto y_p = tape.rsub_scalar(1.0f, b);
                const TensorT<float> y_g = to_tensor<float>(*sample->target);

                Tape::NodeId loss;
                switch (config.objective) {
                    case LossKind::L1: loss = l1_loss_node(tape, y_p, y_g); break;
                    case LossKind::Brightness:
                        loss = brightness_loss_node(tape, y_p, y_g, config.loss.gamma1,
                                                    config.loss.gamma2);
                        break;
                    case LossKind::Smooth: loss = smooth_loss_node(tape, y_p, y_g, config.loss); break;
                    case LossKind::Ssim: loss = ssim_loss_node(tape, y_p, y_g, config.loss); break;
                    default: loss = total_loss_node(tape, y_p, y_g, config.loss).total; break;
                }
                tape.backward(loss, inv_batch);
                accumulate_grads(tape, fw, params);
                epoch_loss += tape.value(loss).data[0];
                ++seen;
            }
            adam_step(params, opt);
        }

        const ValMetrics vm = validate(params, metric_set);
        ssim_history.push_back(vm.ssim);
        lr_on_plateau(opt, ssim_history);

        EpochRecord rec;
        rec.round = round;
        rec.epoch = epoch;
        rec.train_loss = seen ? epoch_loss / static_cast<double>(seen) : 0.0;
        rec.val_ssim = vm.ssim;
        rec.val_psnr = vm.psnr;
        rec.learning_rate = opt.learning_rate;
        report.epochs.push_back(rec);

        if (stop_after_reductions >= 0 && opt.reductions >= stop_after_reductions) break;
    }
    return report;
}

TrainReport train_supervised(const std::vector<Sample>& samples, const TrainConfig& config,
                             ParamStore& params, OptimState& opt, int round,
                             int stop_after_reductions) {
    if (samples.empty()) throw std::invalid_argument("train_supervised: no samples");

    std::vector<size_t> idx(samples.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937 rng(sub_seed(config.seed, 2));
    std::shuffle(idx.begin(), idx.end(), rng);

    size_t val_count = 0;
    if (samples.size() >= 2)
        val_count = std::max<size_t>(1, static_cast<size_t>(config.validation_fraction *
                                                            static_cast<double>(samples.size()) + 0.5));
    std::vector<Sample> train, val;
    std::vector<size_t> val_idx;
    for (size_t i = 0; i < idx.size(); ++i) {
        if (i < val_count) {
            val.push_back(samples[idx[i]]);
            val_idx.push_back(idx[i]);
        } else {
            train.push_back(samples[idx[i]]);
        }
    }
    TrainReport report = train_loop(train, val, config, params, opt, round, stop_after_reductions);
    report.validation_indices = val_idx;
    return report;
}

void curriculum_round(CurriculumState& state, const ParamStore& params, const TrainConfig& config) {
    ++state.round;
    if (state.pool.empty()) {
        state.last_admitted = 0;
        return;
    }
    std::vector<Sample> remaining;
    int admitted = 0;
    for (const auto& s : state.pool) {
        ImagePlane response = predict_enhanced(params, s.low);
        const double score = niqe_score(response, state.niqe).value;
        if (score <= state.n_a + state.tau) {
            Sample acting = s;
            acting.target = std::move(response);  // frozen copy
            acting.provenance = Provenance::ActingLabel;
            state.admitted.push_back(std::move(acting));
            ++admitted;
        } else {
            remaining.push_back(s);
        }
    }
    state.pool = std::move(remaining);
    state.last_admitted = admitted;
}

SemiSupervisedReport run_semi_supervised(const std::vector<Sample>& labeled,
                                         const std::vector<Sample>& pool,
                                         const TrainConfig& config, ParamStore& params,
                                         const std::string& run_dir) {
    if (labeled.empty()) throw std::invalid_argument("run_semi_supervised: no labeled samples");
    for (const auto& s : labeled)
        if (!s.target) throw std::invalid_argument("run_semi_supervised: unlabeled sample in labeled set");

    SemiSupervisedReport report;

    // NIQE anchor from true labels only, computed exactly once.
    CurriculumState state;
    {
        std::vector<ImagePlane> targets;
        for (const auto& s : labeled) targets.push_back(*s.target);
        state.niqe = fit_niqe_model(targets, config.niqe_patch);
        double acc = 0.0;
        for (const auto& t : targets) acc += niqe_score(t, state.niqe).value;
        state.n_a = acc / static_cast<double>(targets.size());
    }
    state.labeled = labeled;
    state.pool = pool;
    state.tau = config.tau;
    std::sort(state.pool.begin(), state.pool.end(),
              [](const Sample& a, const Sample& b) { return a.id < b.id; });

    // Fixed validation split from the labeled set, shared by every phase.
    std::vector<size_t> idx(labeled.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937 rng(sub_seed(config.seed, 2));
    std::shuffle(idx.begin(), idx.end(), rng);
    size_t val_count = 0;
    if (labeled.size() >= 2)
        val_count = std::max<size_t>(1, static_cast<size_t>(config.validation_fraction *
                                                            static_cast<double>(labeled.size()) + 0.5));
    std::vector<Sample> val, labeled_train;
    for (size_t i = 0; i < idx.size(); ++i)
        (i < val_count ? val : labeled_train).push_back(labeled[idx[i]]);

    OptimState opt = make_optim_state(params, config);

    auto checkpoint_path = [&](int round) {
        return (fs::path(run_dir) / "checkpoints" / ("round-" + std::to_string(round) + ".ckpt")).string();
    };
    if (!run_dir.empty()) {
        fs::create_directories(fs::path(run_dir) / "checkpoints");
        fs::create_directories(fs::path(run_dir) / "logs");
    }

    // Pretrain until the plateau rule fires twice or the budget is spent.
    TrainReport pre = train_loop(labeled_train, val, config, params, opt, 0, 2);
    report.epochs = pre.epochs;
    report.pretrain_val_psnr = pre.epochs.empty() ? 0.0 : pre.epochs.back().val_psnr;
    if (!run_dir.empty()) save_checkpoint(params, checkpoint_path(0), "pretrain");

    for (int round = 1; round <= config.max_rounds; ++round) {
        if (state.pool.empty()) break;
        curriculum_round(state, params, config);

        CurriculumRoundRecord rec;
        rec.round = round;
        rec.labeled = state.labeled.size();
        rec.acting = state.admitted.size();
        rec.pool = state.pool.size();
        rec.admitted = static_cast<size_t>(state.last_admitted);
        rec.n_a = state.n_a;
        rec.tau = state.tau;
        report.rounds.push_back(rec);

        if (state.last_admitted == 0) break;

        std::vector<Sample> mixed = labeled_train;
        mixed.insert(mixed.end(), state.admitted.begin(), state.admitted.end());
        TrainReport r = train_loop(mixed, val, config, params, opt, round, -1);
        report.epochs.insert(report.epochs.end(), r.epochs.begin(), r.epochs.end());
        if (!run_dir.empty()) save_checkpoint(params, checkpoint_path(round), "round " + std::to_string(round));
    }

    report.final_val_psnr = report.epochs.empty() ? 0.0 : report.epochs.back().val_psnr;
    if (!run_dir.empty()) {
        write_metrics_csv(report.epochs, (fs::path(run_dir) / "logs" / "metrics.csv").string());
        write_curriculum_csv(report.rounds, (fs::path(run_dir) / "curriculum.csv").string());
    }
    return report;
}

void write_metrics_csv(const std::vector<EpochRecord>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_metrics_csv: cannot open " + path);
    f << "round,epoch,split,loss,ssim,psnr,lr\n";
    char buf[200];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%d,train,%.9g,,,%.9g\n", r.round, r.epoch, r.train_loss,
                      r.learning_rate);
        f << buf;
        std::snprintf(buf, sizeof(buf), "%d,%d,val,,%.9g,%.9g,%.9g\n", r.round, r.epoch, r.val_ssim,
                      r.val_psnr, r.learning_rate);
        f << buf;
    }
}

void write_curriculum_csv(const std::vector<CurriculumRoundRecord>& rows, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("write_curriculum_csv: cannot open " + path);
    f << "round,labeled,acting,pool,admitted,n_a,tau\n";
    char buf[200];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%d,%zu,%zu,%zu,%zu,%.9g,%.9g\n", r.round, r.labeled,
                      r.acting, r.pool, r.admitted, r.n_a, r.tau);
        f << buf;
    }
}

void save_checkpoint(const ParamStore& params, const std::string& path, const std::string& metadata) {
    nlohmann::json j;
    j["format"] = "lle-checkpoint";
    j["version"] = 1;
    j["seed"] = params.config.seed;
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : params.config.layers)
        layers.push_back({{"in", l.in_channels}, {"out", l.out_channels}});
    j["layers"] = layers;
    nlohmann::json plist = nlohmann::json::array();
    for (const auto& e : params.entries) plist.push_back({{"name", e.name}, {"shape", e.value.shape}});
    j["params"] = plist;
    j["metadata"] = metadata;
    const std::string blob_name = fs::path(path).filename().string() + ".bin";
    j["blob"] = blob_name;

    std::ofstream f(path);
    if (!f) throw std::runtime_error("save_checkpoint: cannot open " + path);
    f << j.dump(2) << "\n";

    std::ofstream bin(fs::path(path).parent_path() / blob_name, std::ios::binary);
    if (!bin) throw std::runtime_error("save_checkpoint: cannot open blob for " + path);
    for (const auto& e : params.entries)
        bin.write(reinterpret_cast<const char*>(e.value.data.data()),
                  static_cast<std::streamsize>(e.value.size() * sizeof(float)));
}

ParamStore load_checkpoint(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_checkpoint: cannot open " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception&) {
        throw std::runtime_error("load_checkpoint: not a checkpoint manifest: " + path);
    }
    if (j.value("format", "") != "lle-checkpoint" || j.value("version", 0) != 1)
        throw std::runtime_error("load_checkpoint: version mismatch in " + path);

    NetConfig config;
    config.seed = j.value("seed", 0);
    for (const auto& l : j.at("layers"))
        config.layers.push_back({l.at("in").get<int>(), l.at("out").get<int>()});

    ParamStore params = init_params<float>(config, config.seed);
    const auto plist = j.at("params");
    if (plist.size() != params.entries.size())
        throw std::runtime_error("load_checkpoint: parameter list mismatch in " + path);

    std::ifstream bin(fs::path(path).parent_path() / j.at("blob").get<std::string>(),
                      std::ios::binary);
    if (!bin) throw std::runtime_error("load_checkpoint: missing blob for " + path);
    for (size_t i = 0; i < params.entries.size(); ++i) {
        auto& e = params.entries[i];
        if (plist[i].at("name").get<std::string>() != e.name ||
            plist[i].at("shape").get<std::vector<int>>() != e.value.shape)
            throw std::runtime_error("load_checkpoint: manifest/blob mismatch in " + path);
        bin.read(reinterpret_cast<char*>(e.value.data.data()),
                 static_cast<std::streamsize>(e.value.size() * sizeof(float)));
        if (!bin) throw std::runtime_error("load_checkpoint: truncated blob for " + path);
    }
    return params;
}

}  // namespace lle
