// Command-line front end: train, curriculum, enhance, evaluate,
// histcompare, gradcheck. Exit codes: 0 ok, 2 config, 3 dataset,
// 4 checkpoint, 5 model, 6 gradcheck failure.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lle/haze.hpp"
#include "lle/image.hpp"
#include "lle/iqa.hpp"
#include "lle/loss.hpp"
#include "lle/net.hpp"
#include "lle/train.hpp"

namespace fs = std::filesystem;
using namespace lle;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitDataset = 3;
constexpr int kExitCheckpoint = 4;
constexpr int kExitModel = 5;
constexpr int kExitGradcheck = 6;

struct CliError {
    int code;
    std::string message;
};

TrainConfig config_or_default(const std::string& path) {
    if (path.empty()) return TrainConfig{};
    try {
        return load_train_config(path);
    } catch (const std::exception& e) {
        throw CliError{kExitConfig, e.what()};
    }
}

Dataset dataset_or_die(const std::string& dir) {
    try {
        return load_dataset(dir);
    } catch (const std::exception& e) {
        throw CliError{kExitDataset, e.what()};
    }
}

ParamStore checkpoint_or_die(const std::string& path) {
    try {
        return load_checkpoint(path);
    } catch (const std::exception& e) {
        throw CliError{kExitCheckpoint, e.what()};
    }
}

std::vector<Sample> labeled_only(Dataset& ds) {
    std::vector<Sample> out;
    for (auto& s : ds.samples)
        if (s.target) out.push_back(std::move(s));
    return out;
}

void apply_overrides(TrainConfig& config, int seed, int epochs, double tau, const std::string& loss) {
    if (seed >= 0) config.seed = seed;
    if (epochs >= 0) config.epochs = epochs;
    if (tau > 0.0) config.tau = tau;
    if (!loss.empty()) {
        try {
            config.objective = parse_loss_kind(loss);
        } catch (const std::exception& e) {
            throw CliError{kExitConfig, e.what()};
        }
    }
}

int run_train(const std::string& config_path, const std::string& data_dir, const std::string& out_dir,
              int seed, int epochs, const std::string& loss_name) {
    TrainConfig config = config_or_default(config_path);
    apply_overrides(config, seed, epochs, -1.0, loss_name);

    Dataset ds = dataset_or_die(data_dir);
    for (const auto& d : ds.diagnostics) std::cerr << "warning: " << d << "\n";
    std::vector<Sample> labeled = labeled_only(ds);
    if (labeled.empty()) throw CliError{kExitDataset, "train: no labeled pairs in " + data_dir};

    ParamStore params = init_params<float>(default_net_config(config.seed), config.seed);
    OptimState opt = make_optim_state(params, config);
    TrainReport report = train_supervised(labeled, config, params, opt);

    fs::create_directories(out_dir);
    save_checkpoint(params, (fs::path(out_dir) / "model.ckpt").string(), "supervised");
    write_metrics_csv(report.epochs, (fs::path(out_dir) / "metrics.csv").string());
    if (!report.epochs.empty()) {
        const auto& last = report.epochs.back();
        std::printf("trained %zu epochs, final val ssim %.9g psnr %.9g\n", report.epochs.size(),
                    last.val_ssim, last.val_psnr);
    }
    return 0;
}

int run_curriculum(const std::string& config_path, const std::string& labeled_dir,
                   const std::string& pool_dir, const std::string& out_dir, int seed, int epochs,
                   double tau) {
    TrainConfig config = config_or_default(config_path);
    apply_overrides(config, seed, epochs, tau, "");

    Dataset lds = dataset_or_die(labeled_dir);
    std::vector<Sample> labeled = labeled_only(lds);
    if (labeled.empty()) throw CliError{kExitDataset, "curriculum: no labeled pairs in " + labeled_dir};
    Dataset pds = dataset_or_die(pool_dir);
    std::vector<Sample> pool = std::move(pds.samples);
    for (auto& s : pool) {
        s.target.reset();
        s.provenance = Provenance::Unlabeled;
    }

    fs::create_directories(out_dir);
    ParamStore params = init_params<float>(default_net_config(config.seed), config.seed);
    SemiSupervisedReport report;
    try {
        report = run_semi_supervised(labeled, pool, config, params, out_dir);
    } catch (const std::exception& e) {
        throw CliError{kExitModel, e.what()};
    }
    save_checkpoint(params, (fs::path(out_dir) / "model.ckpt").string(), "curriculum final");
    std::printf("pretrain val psnr %.9g, final val psnr %.9g, rounds %zu\n",
                report.pretrain_val_psnr, report.final_val_psnr, report.rounds.size());
    return 0;
}

int run_enhance(const std::string& checkpoint, const std::vector<std::string>& inputs,
                const std::string& out_dir) {
    ParamStore params = checkpoint_or_die(checkpoint);
    fs::create_directories(out_dir);
    for (const auto& in : inputs) {
        ImagePlane low;
        try {
            low = load_image(in);
        } catch (const std::exception& e) {
            throw CliError{kExitDataset, e.what()};
        }
        const auto t0 = std::chrono::steady_clock::now();
        ImagePlane out = predict_enhanced(params, low);
        const auto t1 = std::chrono::steady_clock::now();
        const std::string dest = (fs::path(out_dir) / fs::path(in).filename()).string();
        save_image(out, dest);
        const double ms = std::chrono::duration<double, std::milli>(t1 - t0).count();
        std::printf("%s -> %s (%.1f ms)\n", in.c_str(), dest.c_str(), ms);
    }
    return 0;
}

int run_evaluate(const std::string& checkpoint, const std::string& data_dir,
                 const std::string& model_path) {
    ParamStore params = checkpoint_or_die(checkpoint);
    Dataset ds = dataset_or_die(data_dir);
    std::vector<Sample> labeled = labeled_only(ds);
    if (labeled.empty()) throw CliError{kExitDataset, "evaluate: no labeled pairs in " + data_dir};

    NiqeModel niqe;
    bool have_niqe = false;
    if (!model_path.empty()) {
        try {
            niqe = load_niqe_model(model_path);
            have_niqe = true;
        } catch (const std::exception& e) {
            throw CliError{kExitModel, e.what()};
        }
    }

    double sum_psnr = 0.0, sum_ssim = 0.0, sum_niqe = 0.0;
    for (const auto& s : labeled) {
        ImagePlane y = predict_enhanced(params, s.low);
        const double p = psnr(*s.target, y).value;
        const double m = ssim_metric(*s.target, y).value;
        sum_psnr += p;
        sum_ssim += m;
        if (have_niqe) {
            const double nq = niqe_score(y, niqe).value;
            sum_niqe += nq;
            std::printf("%s psnr %.9g ssim %.9g niqe %.9g\n", s.id.c_str(), p, m, nq);
        } else {
            std::printf("%s psnr %.9g ssim %.9g\n", s.id.c_str(), p, m);
        }
    }
    const double n = static_cast<double>(labeled.size());
    if (have_niqe)
        std::printf("mean psnr %.9g ssim %.9g niqe %.9g\n", sum_psnr / n, sum_ssim / n, sum_niqe / n);
    else
        std::printf("mean psnr %.9g ssim %.9g\n", sum_psnr / n, sum_ssim / n);
    return 0;
}

int run_histcompare(const std::string& a_path, const std::string& b_path, int bins, bool no_invert,
                    const std::string& out_csv) {
    if (bins < 1) throw CliError{kExitConfig, "histcompare: bins must be >= 1"};
    ImagePlane a, b;
    try {
        a = load_image(a_path);
        b = load_image(b_path);
    } catch (const std::exception& e) {
        throw CliError{kExitDataset, e.what()};
    }
    if (a.channels != b.channels)
        throw CliError{kExitDataset, "histcompare: channel count mismatch"};
    if (!no_invert) b = invert(b);
    Histogram ha = histogram(a, bins);
    Histogram hb = histogram(b, bins);
    const double na = static_cast<double>(a.height) * a.width;
    const double nb = static_cast<double>(b.height) * b.width;
    for (auto& v : ha.counts) v /= na;
    for (auto& v : hb.counts) v /= nb;
    ha.normalized = hb.normalized = true;
    double l1 = 0.0;
    for (size_t i = 0; i < ha.counts.size(); ++i) l1 += std::fabs(ha.counts[i] - hb.counts[i]);
    l1 /= static_cast<double>(a.channels);
    if (!out_csv.empty()) {
        Histogram diff = ha;
        for (size_t i = 0; i < diff.counts.size(); ++i) diff.counts[i] -= hb.counts[i];
        write_histogram_csv(diff, out_csv);
    }
    std::printf("histogram l1 distance %.9g\n", l1);
    return 0;
}

int run_gradcheck(int trials, const std::string& precision, const std::string& loss_name, int hw) {
    if (trials < 1) throw CliError{kExitConfig, "gradcheck: trials must be >= 1"};
    LossWeights weights;
    weights.ssim_window = 5;  // keeps tiny instances valid
    LossKind kind;
    try {
        kind = parse_loss_kind(loss_name);
    } catch (const std::exception& e) {
        throw CliError{kExitConfig, e.what()};
    }
    GradCheckReport report;
    if (precision == "double")
        report = grad_check<double>(default_net_config(), kind, trials, weights, hw);
    else if (precision == "float")
        report = grad_check<float>(default_net_config(), kind, trials, weights, hw);
    else
        throw CliError{kExitConfig, "gradcheck: precision must be float or double"};
    std::printf("gradcheck %s %s: max rel error %.3g (tol %.3g) worst %s[%zu] -> %s\n",
                loss_name.c_str(), precision.c_str(), report.max_rel_error, report.tolerance,
                report.worst_param.c_str(), report.worst_index, report.pass ? "pass" : "FAIL");
    return report.pass ? 0 : kExitGradcheck;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Low-light image enhancement via an inverted haze model"};
    app.require_subcommand(1);

    std::string config_path, data_dir, labeled_dir, pool_dir, out_dir = "out";
    std::string checkpoint, model_path, loss_name, precision = "float", out_csv;
    std::string hist_a, hist_b;
    std::vector<std::string> inputs;
    int seed = -1, epochs = -1, bins = 64, trials = 1, hw = 8;
    double tau = -1.0;
    bool no_invert = false;

    auto* train = app.add_subcommand("train", "Supervised training on paired data");
    train->add_option("--config", config_path);
    train->add_option("--data", data_dir)->required();
    train->add_option("--out", out_dir);
    train->add_option("--seed", seed);
    train->add_option("--epochs", epochs);
    train->add_option("--loss", loss_name);

    auto* curriculum = app.add_subcommand("curriculum", "Semi-supervised curriculum training");
    curriculum->add_option("--config", config_path);
    curriculum->add_option("--labeled", labeled_dir)->required();
    curriculum->add_option("--pool", pool_dir)->required();
    curriculum->add_option("--out", out_dir);
    curriculum->add_option("--seed", seed);
    curriculum->add_option("--epochs", epochs);
    curriculum->add_option("--tau", tau);

    auto* enhance_cmd = app.add_subcommand("enhance", "Enhance low-light images");
    enhance_cmd->add_option("--checkpoint", checkpoint)->required();
    enhance_cmd->add_option("--out", out_dir);
    enhance_cmd->add_option("images", inputs)->required();

    auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint on paired data");
    evaluate->add_option("--checkpoint", checkpoint)->required();
    evaluate->add_option("--data", data_dir)->required();
    evaluate->add_option("--model", model_path);

    auto* histcompare = app.add_subcommand("histcompare", "Compare image histograms");
    histcompare->add_option("a", hist_a)->required();
    histcompare->add_option("b", hist_b)->required();
    histcompare->add_option("--bins", bins);
    histcompare->add_flag("--no-invert", no_invert);
    histcompare->add_option("--csv", out_csv);

    auto* gradcheck_cmd = app.add_subcommand("gradcheck", "Verify gradients by finite differences");
    gradcheck_cmd->add_option("--trials", trials);
    gradcheck_cmd->add_option("--precision", precision);
    gradcheck_cmd->add_option("--loss", loss_name);
    gradcheck_cmd->add_option("--size", hw);

    CLI11_PARSE(app, argc, argv);

    try {
        if (train->parsed()) return run_train(config_path, data_dir, out_dir, seed, epochs, loss_name);
        if (curriculum->parsed())
            return run_curriculum(config_path, labeled_dir, pool_dir, out_dir, seed, epochs, tau);
        if (enhance_cmd->parsed()) return run_enhance(checkpoint, inputs, out_dir);
        if (evaluate->parsed()) return run_evaluate(checkpoint, data_dir, model_path);
        if (histcompare->parsed()) return run_histcompare(hist_a, hist_b, bins, no_invert, out_csv);
        if (gradcheck_cmd->parsed())
            return run_gradcheck(trials, precision, loss_name.empty() ? "total" : loss_name, hw);
    } catch (const CliError& e) {
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
