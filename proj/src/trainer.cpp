#include "mrgt/trainer.hpp"

#include <cmath>
#include <cstdio>

#include "mrgt/checkpoint.hpp"
#include "mrgt/errors.hpp"

namespace mrgt {

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("epochs", "must be at least 1");
    if (batch_size < 1) throw ValidationError("batch_size", "must be at least 1");
    if (!(lr_gcn >= 0.0) || !(lr_backbone >= 0.0)) throw ValidationError("lr", "learning rates must be non-negative");
    if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay", "must be non-negative");
    if (!(loss.alpha1 >= 0.0) || !(loss.alpha2 >= 0.0)) throw ValidationError("alpha", "loss weights must be non-negative");
    if (!ablation.valid()) throw ValidationError("ablation", "every input segment is masked");
}

AdamState AdamState::zeros_like(const ParamStore& params) {
    AdamState s;
    for (const auto& p : params) {
        s.m.emplace_back(p.value.rows(), p.value.cols());
        s.v.emplace_back(p.value.rows(), p.value.cols());
    }
    return s;
}

double learning_rate_for(const ParamTensor& p, const TrainConfig& cfg) {
    return p.lr_group == LrGroup::gcn ? cfg.lr_gcn : cfg.lr_backbone;
}

void adamw_step(ParamStore& params, AdamState& state, const TrainConfig& cfg) {
    if (state.m.size() != params.size() || state.v.size() != params.size()) {
        throw DimensionError("adamw_step: optimizer state does not match parameter count");
    }
    for (const auto& p : params) {
        if (!all_finite(p.grad)) throw NumericError("adamw_step: non-finite gradient in " + p.name);
    }
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double bc1 = 1.0 - std::pow(cfg.beta1, t);
    const double bc2 = 1.0 - std::pow(cfg.beta2, t);
    std::size_t i = 0;
    for (auto& p : params) {
        Matrix& m = state.m[i];
        Matrix& v = state.v[i];
        ++i;
        const double lr = learning_rate_for(p, cfg);
        for (std::size_t k = 0; k < p.value.size(); ++k) {
            const double g = p.grad[k];
            m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g;
            v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g * g;
            const double mhat = m[k] / bc1;
            const double vhat = v[k] / bc2;
            p.value[k] -= lr * mhat / (std::sqrt(vhat) + cfg.eps);
            p.value[k] -= lr * cfg.weight_decay * p.value[k];
        }
    }
}

double mean_loss(MrgtModel& model, const Dataset& data, const std::vector<std::size_t>& indices,
                 const AblationMask& ablation, const LossWeights& weights) {
    if (indices.empty()) return 0.0;
    double total = 0.0;
    for (std::size_t idx : indices) {
        Tape tape(false);
        total += tape.value(model.forward(tape, data.samples.at(idx), ablation, weights).loss)(0, 0);
    }
    return total / static_cast<double>(indices.size());
}

EvalReport evaluate(MrgtModel& model, const Dataset& data, const std::vector<std::size_t>& indices,
                    const AblationMask& ablation) {
    std::vector<TokenSeq> generated, references;
    std::vector<Label> predictions, labels;
    for (std::size_t idx : indices) {
        const NewsVideoSample& s = data.samples.at(idx);
        Prediction p = model.predict(s, ablation);
        generated.push_back(std::move(p.explanation));
        references.emplace_back(s.explanation.begin(), s.explanation.end() - 1);
        predictions.push_back(p.label);
        labels.push_back(s.label);
    }
    return evaluate_outputs(generated, references, predictions, labels);
}

TrainResult train(MrgtModel& model, const Dataset& data, const DatasetSplit& split, const TrainConfig& cfg,
                  const std::optional<std::filesystem::path>& checkpoint, const TrainLogger& logger) {
    cfg.validate();
    if (split.train.empty()) throw ValidationError("train", "training split is empty");
    ParamStore& params = model.params();
    AdamState adam = AdamState::zeros_like(params);
    Rng rng(cfg.seed);

    TrainResult result;
    std::vector<Matrix> best_values;
    std::optional<Checkpoint> best_ckpt;
    bool have_best = false;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::vector<std::size_t> order = split.train;
        rng.shuffle(order);
        double epoch_loss = 0.0;
        for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const std::size_t end = std::min(order.size(), start + cfg.batch_size);
            params.zero_grad();
            for (std::size_t b = start; b < end; ++b) {
                Tape tape;
                ForwardResult fr = model.forward(tape, data.samples[order[b]], cfg.ablation, cfg.loss);
                const double loss = tape.value(fr.loss)(0, 0);
                if (!std::isfinite(loss)) {
                    throw NumericError("non-finite loss in epoch " + std::to_string(epoch) + " batch " +
                                       std::to_string(start / cfg.batch_size) + " (sample " +
                                       data.samples[order[b]].id + ")");
                }
                epoch_loss += loss;
                tape.backward(fr.loss);
            }
            const double inv = 1.0 / static_cast<double>(end - start);
            for (auto& p : params)
                for (double& g : p.grad.data()) g *= inv;
            adamw_step(params, adam, cfg);
        }

        EpochLog entry;
        entry.epoch = epoch;
        entry.train_loss = epoch_loss / static_cast<double>(order.size());
        const std::vector<std::size_t>& val = split.val.empty() ? split.train : split.val;
        entry.val_loss = mean_loss(model, data, val, cfg.ablation, cfg.loss);
        if (cfg.val_generation && !split.val.empty()) entry.val_report = evaluate(model, data, split.val, cfg.ablation);
        result.log.push_back(entry);

        if (!have_best || entry.val_loss < result.best_val_loss) {
            have_best = true;
            result.best_epoch = epoch;
            result.best_val_loss = entry.val_loss;
            best_values.clear();
            for (const auto& p : params) best_values.push_back(p.value);
            result.optimizer = adam;
            result.rng_state = rng.state();
        }
        if (logger) {
            char buf[256];
            std::snprintf(buf, sizeof buf, "epoch %zu train_loss %.6f val_loss %.6f", epoch, entry.train_loss,
                          entry.val_loss);
            std::string line = buf;
            if (entry.val_report) {
                std::snprintf(buf, sizeof buf, " val_acc %.4f val_bleu1 %.4f", entry.val_report->classification.accuracy,
                              entry.val_report->bleu[0]);
                line += buf;
            }
            logger(line);
        }
    }

    std::size_t i = 0;
    for (auto& p : params) p.value = best_values[i++];
    if (checkpoint) {
        save_checkpoint(*checkpoint, make_checkpoint(model, data.vocab, cfg, result.optimizer, result.best_epoch,
                                                     result.rng_state));
    }
    return result;
}

GradCheckResult grad_check(MrgtModel& model, const NewsVideoSample& sample, const AblationMask& ablation,
                           const LossWeights& weights, const GradCheckOptions& opts) {
    ParamStore& params = model.params();
    std::optional<MultimodalGraph> graph;
    if (!ablation.no_graph) graph = model.graph_for(sample, ablation);
    const MultimodalGraph* fixed = graph ? &*graph : nullptr;

    params.zero_grad();
    {
        Tape tape;
        ForwardResult fr = model.forward(tape, sample, ablation, weights, fixed);
        tape.backward(fr.loss);
    }
    auto objective = [&] {
        Tape tape(false);
        return tape.value(model.forward(tape, sample, ablation, weights, fixed).loss)(0, 0);
    };
    FiniteDiffOptions fd;
    fd.epsilon = opts.epsilon;
    fd.max_entries_per_tensor = opts.max_entries_per_tensor;
    fd.seed = opts.seed;
    const NumericGrad numeric = finite_diff_grad(objective, params, fd);

    GradCheckResult r;
    for (std::size_t t = 0; t < params.size(); ++t) {
        const ParamTensor& p = params[t];
        for (std::size_t e : numeric.checked[t]) {
            const double err = relative_error(p.grad[e], numeric.grad[t][e], opts.rel_floor);
            ++r.checked;
            if (r.worst_param.empty() || err > r.max_rel_error) {
                r.max_rel_error = err;
                r.worst_param = p.name;
                r.worst_entry = e;
                r.worst_analytic = p.grad[e];
                r.worst_numeric = numeric.grad[t][e];
            }
        }
    }
    params.zero_grad();
    return r;
}

} // namespace mrgt
