#include "mrgt/config.hpp"

#include <fstream>
#include <set>

#include "mrgt/errors.hpp"

namespace mrgt {

using nlohmann::json;
using nlohmann::ordered_json;

ordered_json to_json(const ModelConfig& c) {
    ordered_json j;
    j["width"] = c.encoder.width;
    j["vocab_size"] = c.encoder.vocab_size;
    j["frame_dim"] = c.encoder.frame_dim;
    j["encoder_layers"] = c.encoder.n_layers;
    j["encoder_heads"] = c.encoder.n_heads;
    j["decoder_layers"] = c.decoder.n_layers;
    j["decoder_heads"] = c.decoder.n_heads;
    j["ffn_mult"] = c.encoder.ffn_mult;
    j["max_text_len"] = c.encoder.max_text_len;
    j["max_frames"] = c.encoder.max_frames;
    j["max_gen_len"] = c.decoder.max_gen_len;
    j["tied_output"] = c.decoder.tied_output;
    j["positional"] = c.encoder.positional;
    j["gcn_layers"] = c.gcn_layers;
    j["tau_sem"] = c.graph.tau_sem;
    j["init_seed"] = c.init_seed;
    return j;
}

ordered_json to_json(const TrainConfig& c) {
    ordered_json j;
    j["epochs"] = c.epochs;
    j["batch_size"] = c.batch_size;
    j["lr_gcn"] = c.lr_gcn;
    j["lr_backbone"] = c.lr_backbone;
    j["weight_decay"] = c.weight_decay;
    j["beta1"] = c.beta1;
    j["beta2"] = c.beta2;
    j["eps"] = c.eps;
    j["alpha1"] = c.loss.alpha1;
    j["alpha2"] = c.loss.alpha2;
    j["seed"] = c.seed;
    ordered_json abl = ordered_json::array();
    const bool flags[] = {c.ablation.no_title, c.ablation.no_ocr, c.ablation.no_related, c.ablation.no_visual,
                          c.ablation.no_graph};
    for (std::size_t i = 0; i < kAblationNames.size(); ++i)
        if (flags[i]) abl.push_back(std::string(kAblationNames[i]));
    j["ablation"] = std::move(abl);
    j["val_generation"] = c.val_generation;
    return j;
}

ordered_json to_json(const RunConfig& c) {
    ordered_json j;
    j["model"] = to_json(c.model);
    j["train"] = to_json(c.train);
    j["split"] = {{"ratios", {c.ratios.train, c.ratios.val, c.ratios.test}}, {"seed", c.split_seed}};
    return j;
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const char* section) {
    if (!j.is_object()) throw ValidationError(section, "expected a JSON object");
    for (const auto& [key, _] : j.items()) {
        if (!known.contains(key)) throw ValidationError(section, "unknown key '" + key + "'");
    }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    try {
        out = it->get<T>();
    } catch (const json::exception& e) {
        throw ValidationError(key, e.what());
    }
}

} // namespace

void apply_json(const json& j, ModelConfig& c) {
    reject_unknown(j,
                   {"width", "vocab_size", "frame_dim", "encoder_layers", "encoder_heads", "decoder_layers",
                    "decoder_heads", "ffn_mult", "max_text_len", "max_frames", "max_gen_len", "tied_output",
                    "positional", "gcn_layers", "tau_sem", "init_seed"},
                   "model");
    read(j, "width", c.encoder.width);
    c.decoder.width = c.encoder.width;
    read(j, "vocab_size", c.encoder.vocab_size);
    c.decoder.vocab_size = c.encoder.vocab_size;
    read(j, "frame_dim", c.encoder.frame_dim);
    read(j, "encoder_layers", c.encoder.n_layers);
    read(j, "encoder_heads", c.encoder.n_heads);
    read(j, "decoder_layers", c.decoder.n_layers);
    read(j, "decoder_heads", c.decoder.n_heads);
    read(j, "ffn_mult", c.encoder.ffn_mult);
    c.decoder.ffn_mult = c.encoder.ffn_mult;
    read(j, "max_text_len", c.encoder.max_text_len);
    read(j, "max_frames", c.encoder.max_frames);
    read(j, "max_gen_len", c.decoder.max_gen_len);
    read(j, "tied_output", c.decoder.tied_output);
    read(j, "positional", c.encoder.positional);
    read(j, "gcn_layers", c.gcn_layers);
    read(j, "tau_sem", c.graph.tau_sem);
    read(j, "init_seed", c.init_seed);
}

void apply_json(const json& j, TrainConfig& c) {
    reject_unknown(j,
                   {"epochs", "batch_size", "lr_gcn", "lr_backbone", "weight_decay", "beta1", "beta2", "eps", "alpha1",
                    "alpha2", "seed", "ablation", "val_generation"},
                   "train");
    read(j, "epochs", c.epochs);
    read(j, "batch_size", c.batch_size);
    read(j, "lr_gcn", c.lr_gcn);
    read(j, "lr_backbone", c.lr_backbone);
    read(j, "weight_decay", c.weight_decay);
    read(j, "beta1", c.beta1);
    read(j, "beta2", c.beta2);
    read(j, "eps", c.eps);
    read(j, "alpha1", c.loss.alpha1);
    read(j, "alpha2", c.loss.alpha2);
    read(j, "seed", c.seed);
    read(j, "val_generation", c.val_generation);
    if (auto it = j.find("ablation"); it != j.end()) {
        std::vector<std::string> names;
        read(j, "ablation", names);
        c.ablation = parse_ablation(names);
    }
}

void apply_json(const json& j, RunConfig& c) {
    reject_unknown(j, {"model", "train", "split"}, "config");
    if (auto it = j.find("model"); it != j.end()) apply_json(*it, c.model);
    if (auto it = j.find("train"); it != j.end()) apply_json(*it, c.train);
    if (auto it = j.find("split"); it != j.end()) {
        reject_unknown(*it, {"ratios", "seed"}, "split");
        std::vector<double> r;
        read(*it, "ratios", r);
        if (!r.empty()) {
            if (r.size() != 3) throw ValidationError("split", "ratios must have three entries");
            c.ratios = {r[0], r[1], r[2]};
        }
        read(*it, "seed", c.split_seed);
    }
}

RunConfig load_run_config(const std::filesystem::path& path, RunConfig defaults) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError("config " + path.string() + ": " + e.what());
    }
    apply_json(j, defaults);
    defaults.model.validate();
    defaults.train.validate();
    return defaults;
}

} // namespace mrgt
