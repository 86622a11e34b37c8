#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lle/haze.hpp"
#include "lle/image.hpp"
#include "lle/iqa.hpp"
#include "lle/loss.hpp"
#include "lle/net.hpp"

namespace lle {

enum class Provenance { TrueLabel, ActingLabel, Unlabeled };

struct Sample {
    std::string id;
    ImagePlane low;
    std::optional<ImagePlane> target;
    Provenance provenance = Provenance::Unlabeled;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::string> diagnostics;  // rejected pairs etc.
};

struct TrainConfig {
    int batch_size = 16;
    double learning_rate = 1e-4;
    double decay_factor = 0.5;
    int patience = 5;
    double min_learning_rate = 1e-6;
    int epochs = 100;            // per phase
    int seed = 0;
    LossWeights loss;
    LossKind objective = LossKind::Total;
    bool augment = true;
    double tau = 0.5;
    int max_rounds = 5;
    double validation_fraction = 0.1;
    int niqe_patch = 48;
};

TrainConfig load_train_config(const std::string& path);  // rejects unknown keys
TrainConfig parse_train_config_json(const std::string& text);

struct OptimState {
    std::vector<TensorT<float>> m;  // first moments, mirrors ParamStore order
    std::vector<TensorT<float>> v;  // second moments
    long step = 0;
    double learning_rate = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    // plateau bookkeeping
    double best_metric = -1e300;
    int best_epoch = -1;
    int last_reduction_epoch = -1;
    double min_learning_rate = 1e-6;
    double decay_factor = 0.5;
    int patience = 5;
    int reductions = 0;
};

OptimState make_optim_state(const ParamStore& params, const TrainConfig& config);
void adam_step(ParamStore& params, OptimState& opt);
void lr_on_plateau(OptimState& opt, const std::vector<double>& val_ssim_history);

// dir/low/*.png with optional dir/high/<same name>.png targets.
Dataset load_dataset(const std::string& dir);

ImagePlane synth_lowlight(const ImagePlane& bright, double gamma, double noise_sigma, int seed);
Sample augment_sample(const Sample& s, int seed);

struct EpochRecord {
    int round = 0;
    int epoch = 0;
    double train_loss = 0.0;
    double val_ssim = 0.0;
    double val_psnr = 0.0;
    double learning_rate = 0.0;
};

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::vector<size_t> validation_indices;  // into the sample vector passed in
};

// Predicted enhancement for one low-light image (unclamped pipeline output
// is used by the loss; this clamps for metrics/output).
ImagePlane predict_enhanced(const ParamStore& params, const ImagePlane& low);

TrainReport train_supervised(const std::vector<Sample>& samples, const TrainConfig& config,
                             ParamStore& params, OptimState& opt, int round = 0,
                             int stop_after_reductions = -1);

// Training with an explicit train/validation split; the public
// train_supervised wraps this with the seeded 10% split.
TrainReport train_loop(const std::vector<Sample>& train, const std::vector<Sample>& val,
                       const TrainConfig& config, ParamStore& params, OptimState& opt,
                       int round, int stop_after_reductions);

struct CurriculumState {
    std::vector<Sample> labeled;   // true labels
    std::vector<Sample> pool;      // unlabeled
    std::vector<Sample> admitted;  // acting labels, frozen once admitted
    double n_a = 0.0;              // mean NIQE of true-label targets
    double tau = 0.5;
    int round = 0;
    int last_admitted = -1;
    NiqeModel niqe;
};

// Scores the pool with the current network and admits responses whose
// NIQE is at most n_a + tau. Admitted targets are frozen copies.
void curriculum_round(CurriculumState& state, const ParamStore& params, const TrainConfig& config);

struct CurriculumRoundRecord {
    int round = 0;
    size_t labeled = 0;
    size_t acting = 0;
    size_t pool = 0;
    size_t admitted = 0;
    double n_a = 0.0;
    double tau = 0.0;
};

struct SemiSupervisedReport {
    std::vector<EpochRecord> epochs;
    std::vector<CurriculumRoundRecord> rounds;
    double pretrain_val_psnr = 0.0;
    double final_val_psnr = 0.0;
};

SemiSupervisedReport run_semi_supervised(const std::vector<Sample>& labeled,
                                         const std::vector<Sample>& pool,
                                         const TrainConfig& config, ParamStore& params,
                                         const std::string& run_dir = "");

void write_metrics_csv(const std::vector<EpochRecord>& rows, const std::string& path);
void write_curriculum_csv(const std::vector<CurriculumRoundRecord>& rows, const std::string& path);

void save_checkpoint(const ParamStore& params, const std::string& path,
                     const std::string& metadata = "");
ParamStore load_checkpoint(const std::string& path);

}  // namespace lle
