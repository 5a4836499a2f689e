#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "mrgt/ablation.hpp"
#include "mrgt/datamodel.hpp"
#include "mrgt/heads.hpp"
#include "mrgt/metrics.hpp"
#include "mrgt/model.hpp"

namespace mrgt {

struct TrainConfig {
    std::size_t epochs = 15;
    std::size_t batch_size = 10;
    double lr_gcn = 1e-3;
    double lr_backbone = 1e-4;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    LossWeights loss;
    std::uint64_t seed = 1234;
    AblationMask ablation;
    /// Greedy-decode the validation split every epoch for the log.
    bool val_generation = true;

    void validate() const;
};

/// First and second moments, aligned with ParamStore order.
struct AdamState {
    std::vector<Matrix> m;
    std::vector<Matrix> v;
    std::uint64_t step = 0;

    static AdamState zeros_like(const ParamStore& params);
    friend bool operator==(const AdamState&, const AdamState&) = default;
};

/// One AdamW update from the gradients currently stored in `params`:
/// bias-corrected adaptive step, then decoupled decay theta -= lr * wd * theta.
/// GCN weights use lr_gcn, every other tensor lr_backbone. Increments
/// `state.step` first, so the first call uses step 1.
void adamw_step(ParamStore& params, AdamState& state, const TrainConfig& cfg);

double learning_rate_for(const ParamTensor& p, const TrainConfig& cfg);

struct EpochLog {
    std::size_t epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
    std::optional<EvalReport> val_report;
};

struct TrainResult {
    std::vector<EpochLog> log;
    std::size_t best_epoch = 0;
    double best_val_loss = 0.0;
    AdamState optimizer;  // state at the best epoch
    std::string rng_state;
};

/// Progress sink; receives one line per epoch.
using TrainLogger = std::function<void(const std::string&)>;

/// Trains on split.train, validates on split.val each epoch, and leaves the
/// model holding the parameters of the best validation joint loss. When
/// `checkpoint` is set the best state is written there.
TrainResult train(MrgtModel& model, const Dataset& data, const DatasetSplit& split, const TrainConfig& cfg,
                  const std::optional<std::filesystem::path>& checkpoint = std::nullopt, const TrainLogger& logger = {});

/// Mean joint loss over the given samples (teacher forced, no updates).
double mean_loss(MrgtModel& model, const Dataset& data, const std::vector<std::size_t>& indices,
                 const AblationMask& ablation, const LossWeights& weights);

/// Classification + greedy generation over the given samples.
EvalReport evaluate(MrgtModel& model, const Dataset& data, const std::vector<std::size_t>& indices,
                    const AblationMask& ablation);

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    std::size_t worst_entry = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
    std::size_t checked = 0;
};

struct GradCheckOptions {
    double epsilon = 1e-4;
    /// Tensors with more entries are checked on a seeded subsample.
    std::size_t max_entries_per_tensor = 200;
    std::uint64_t seed = 99;
    double rel_floor = 1e-6;
};

/// Compares backprop gradients of the joint loss against central
/// differences. The relation graph is built once and held fixed.
GradCheckResult grad_check(MrgtModel& model, const NewsVideoSample& sample, const AblationMask& ablation,
                           const LossWeights& weights, const GradCheckOptions& opts = {});

} // namespace mrgt
