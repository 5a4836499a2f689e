#include "mrgt/cli.hpp"

#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mrgt/checkpoint.hpp"
#include "mrgt/config.hpp"
#include "mrgt/errors.hpp"
#include "mrgt/trainer.hpp"

namespace mrgt {

namespace {

const std::map<std::string, SplitMode> kSplitModes = {{"overlap", SplitMode::random},
                                                      {"event-disjoint", SplitMode::event_disjoint}};
const std::map<std::string, SampleFilter> kFilters = {
    {"all", SampleFilter::all}, {"ocr", SampleFilter::ocr_only}, {"non-ocr", SampleFilter::non_ocr_only}};

struct Options {
    // synth
    std::string out_path;
    std::size_t n = 600;
    std::size_t vocab = 64;
    std::uint64_t seed = SynthConfig{}.seed;
    double frac_fake = 0.5;
    double frac_non_ocr = SynthConfig{}.fraction_non_ocr;
    std::size_t frame_dim = 16;
    std::size_t max_frames = 6;
    // train / eval / ablate
    std::string data;
    std::string config;
    std::string ckpt;
    std::vector<std::string> ablate;
    std::string split = "overlap";
    std::string filter = "all";
    std::string report;
    // explain
    std::string sample;
    std::string dump_graph;
    // gradcheck
    std::size_t dim = 8;
    std::size_t samples = 3;
};

RunConfig read_config(const std::string& path) {
    RunConfig rc;
    if (path.empty()) return rc;
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config " + path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("config " + path + ": " + e.what());
    }
    apply_json(j, rc);
    return rc;
}

/// Loads the corpus and fixes the vocabulary and frame width in the model config.
Dataset load_for_training(const std::string& path, RunConfig& rc) {
    LoadOptions lo;
    lo.max_text_len = rc.model.encoder.max_text_len;
    lo.max_frames = rc.model.encoder.max_frames;
    Dataset ds = load_dataset(path, lo);
    if (ds.samples.empty()) throw ValidationError("data", "dataset " + path + " is empty");
    const std::size_t frame_dim = ds.samples.front().frames.cols();
    const ModelConfig sized = ModelConfig::make(ds.vocab.size(), frame_dim, rc.model.encoder.width);
    rc.model.encoder.vocab_size = sized.encoder.vocab_size;
    rc.model.decoder.vocab_size = sized.decoder.vocab_size;
    rc.model.encoder.frame_dim = frame_dim;
    rc.model.validate();
    rc.train.validate();
    return ds;
}

std::set<std::string> events(const Dataset& ds, const std::vector<std::size_t>& idx) {
    std::set<std::string> out;
    for (std::size_t i : idx) out.insert(ds.samples[i].event_id);
    return out;
}

void require_disjoint_events(const Dataset& ds, const DatasetSplit& sp) {
    const auto tr = events(ds, sp.train), va = events(ds, sp.val), te = events(ds, sp.test);
    for (const auto& e : te)
        if (tr.contains(e) || va.contains(e)) throw SplitError("event " + e + " appears in the test split and elsewhere");
    for (const auto& e : va)
        if (tr.contains(e)) throw SplitError("event " + e + " appears in both train and validation splits");
}

DatasetSplit regime_split(const Dataset& ds, const RunConfig& rc, const std::string& split_name) {
    DatasetSplit sp = make_split(ds.samples, rc.ratios, kSplitModes.at(split_name), SampleFilter::all, rc.split_seed);
    if (sp.mode == SplitMode::event_disjoint) require_disjoint_events(ds, sp);
    return sp;
}

std::vector<std::size_t> apply_filter(const Dataset& ds, const std::vector<std::size_t>& idx, SampleFilter f) {
    std::vector<std::size_t> out;
    for (std::size_t i : idx) {
        const bool ocr = ds.samples[i].has_ocr();
        if (f == SampleFilter::all || (f == SampleFilter::ocr_only && ocr) || (f == SampleFilter::non_ocr_only && !ocr))
            out.push_back(i);
    }
    return out;
}

std::string fmt(double v, int digits = 4) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot write " + path);
    f << text;
    if (!f) throw IoError("write failed for " + path);
}

int cmd_synth(const Options& o, std::ostream& out) {
    SynthConfig sc;
    sc.n_samples = o.n;
    sc.vocab_size = o.vocab;
    sc.seed = o.seed;
    sc.fraction_fake = o.frac_fake;
    sc.fraction_non_ocr = o.frac_non_ocr;
    sc.frame_dim = o.frame_dim;
    sc.max_frames = o.max_frames;
    const Dataset ds = synth_generate(sc);
    save_dataset(o.out_path, ds);

    const CorpusStats st = corpus_stats(ds.samples);
    out << "wrote " << st.total << " samples to " << o.out_path << "\n";
    out << "Total " << st.total << "  Fake " << st.fake << "  Real " << st.real << "  with OCR " << st.with_ocr
        << "  without OCR " << st.total - st.with_ocr << "\n";
    out << "mean title length " << fmt(st.mean_title_len, 2) << "  mean explanation length "
        << fmt(st.mean_explanation_len, 2) << "\n";
    if (st.total > 0) {
        const DatasetSplit sp = make_split(ds.samples, {}, SplitMode::random, SampleFilter::all, 5);
        out << "Train " << sp.train.size() << "  Val " << sp.val.size() << "  Test " << sp.test.size() << "\n";
    }
    return kExitOk;
}

int cmd_train(const Options& o, std::ostream& out) {
    RunConfig rc = read_config(o.config);
    if (!o.ablate.empty()) rc.train.ablation = parse_ablation(o.ablate);
    const Dataset ds = load_for_training(o.data, rc);
    const DatasetSplit sp = regime_split(ds, rc, o.split);

    MrgtModel model(rc.model);
    out << "model: " << model.describe(rc.train.ablation) << "\n";
    out << "loss weights: alpha1=" << rc.train.loss.alpha1 << " alpha2=" << rc.train.loss.alpha2 << "\n";
    out << "split: " << o.split << " train=" << sp.train.size() << " val=" << sp.val.size()
        << " test=" << sp.test.size() << "\n";
    const TrainResult r = train(model, ds, sp, rc.train, std::filesystem::path(o.ckpt),
                                [&](const std::string& line) { out << line << "\n" << std::flush; });
    out << "best epoch " << r.best_epoch << " val_loss " << fmt(r.best_val_loss, 6) << "\n";
    out << "checkpoint: " << o.ckpt << "\n";
    return kExitOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(o.ckpt);
    RunConfig rc = read_config(o.config);
    LoadOptions lo;
    lo.vocab = &ckpt.vocab;
    lo.frame_dim = ckpt.model.encoder.frame_dim;
    lo.max_text_len = ckpt.model.encoder.max_text_len;
    lo.max_frames = ckpt.model.encoder.max_frames;
    const Dataset ds = load_dataset(o.data, lo);

    const DatasetSplit sp = regime_split(ds, rc, o.split);
    const SampleFilter filter = kFilters.at(o.filter);
    const std::vector<std::size_t> test = apply_filter(ds, sp.test, filter);
    if (test.empty()) throw SplitError("no test samples left after filtering (" + o.filter + ")");

    MrgtModel model = restore_model(ckpt);
    EvalReport report = evaluate(model, ds, test, ckpt.train.ablation);
    report.regime = o.split + "/" + o.filter;
    const std::string json = report_json(report);
    if (!o.report.empty()) write_text(o.report, json + "\n");
    out << json << "\n";
    const std::vector<std::string> names{ckpt.train.ablation.describe()};
    out << report_table(std::span<const EvalReport>(&report, 1), names);
    return kExitOk;
}

int cmd_explain(const Options& o, std::ostream& out) {
    const Checkpoint ckpt = load_checkpoint(o.ckpt);
    LoadOptions lo;
    lo.frame_dim = ckpt.model.encoder.frame_dim;
    lo.max_text_len = ckpt.model.encoder.max_text_len;
    lo.max_frames = ckpt.model.encoder.max_frames;
    const NewsVideoSample sample = parse_sample(o.sample, ckpt.vocab, lo);
    MrgtModel model = restore_model(ckpt);
    const AblationMask& mask = ckpt.train.ablation;
    const Prediction p = model.predict(sample, mask);

    out << "label " << (p.label == Label::fake ? "fake" : "real") << "\n";
    out << "p0 " << fmt(p.probs[0], 6) << " p1 " << fmt(p.probs[1], 6) << "\n";
    out << "explanation";
    for (TokenId t : p.explanation) out << ' ' << ckpt.vocab.token(t);
    out << "\n";
    if (!o.dump_graph.empty()) {
        if (mask.no_graph) throw UsageError("--dump-graph needs a model trained with the graph enabled");
        const MultimodalGraph g = model.graph_for(sample, mask);
        std::ofstream f(o.dump_graph);
        if (!f) throw IoError("cannot write " + o.dump_graph);
        write_edge_log(f, g);
        out << "edges " << g.edge_log.size() << " written to " << o.dump_graph << "\n";
    }
    return kExitOk;
}

int cmd_ablate(const Options& o, std::ostream& out) {
    RunConfig rc = read_config(o.config);
    const Dataset ds = load_for_training(o.data, rc);
    const DatasetSplit sp = regime_split(ds, rc, o.split);

    std::vector<AblationMask> variants{AblationMask{}};
    for (auto name : kAblationNames) variants.push_back(single_ablation(name));
    std::vector<EvalReport> rows;
    std::vector<std::string> names;
    for (const AblationMask& mask : variants) {
        TrainConfig tc = rc.train;
        tc.ablation = mask;
        MrgtModel model(rc.model);
        out << "training " << model.describe(mask) << "\n" << std::flush;
        train(model, ds, sp, tc);
        if (mask.no_graph) {
            for (std::size_t i : sp.test) {
                Tape tape(false);
                const ForwardResult fr = model.forward(tape, ds.samples[i], mask, tc.loss);
                if (fr.fused.id != fr.encoded.id || !(tape.value(fr.fused) == tape.value(fr.encoded)))
                    throw NumericError("w/o-Graph: Z differs from H on sample " + ds.samples[i].id);
            }
            out << "w/o-Graph: Z == H verified on " << sp.test.size() << " test samples\n";
        }
        rows.push_back(evaluate(model, ds, sp.test, mask));
        rows.back().regime = o.split;
        names.push_back(mask.describe());
    }
    out << report_table(rows, names);
    if (!o.report.empty()) {
        nlohmann::ordered_json j = nlohmann::ordered_json::array();
        for (std::size_t i = 0; i < rows.size(); ++i) {
            auto row = nlohmann::ordered_json::parse(report_json(rows[i]));
            row["model"] = names[i];
            j.push_back(std::move(row));
        }
        write_text(o.report, j.dump(2) + "\n");
    }
    return kExitOk;
}

int cmd_gradcheck(const Options& o, std::ostream& out) {
    Dataset ds;
    if (o.data.empty()) {
        SynthConfig sc;
        sc.n_samples = std::max<std::size_t>(o.samples, 1);
        sc.vocab_size = 32;
        sc.frame_dim = o.dim;
        sc.max_frames = 4;
        sc.seed = o.seed;
        ds = synth_generate(sc);
    } else {
        ds = load_dataset(o.data);
    }
    ModelConfig mc = ModelConfig::make(ds.vocab.size(), ds.samples.at(0).frames.cols(), o.dim);
    mc.encoder.n_heads = mc.decoder.n_heads = 2;
    mc.encoder.ffn_mult = mc.decoder.ffn_mult = 2;
    mc.validate();
    MrgtModel model(mc);

    struct Objective {
        const char* name;
        AblationMask mask;
        LossWeights weights;
    };
    AblationMask no_graph;
    no_graph.no_graph = true;
    const Objective objectives[] = {{"full", {}, {}},
                                    {"w/o-Graph", no_graph, {}},
                                    {"classification only", {}, {1.0, 0.0}},
                                    {"generation only", {}, {0.0, 1.0}}};
    double worst = 0.0;
    for (const auto& obj : objectives) {
        for (std::size_t i = 0; i < std::min(o.samples, ds.samples.size()); ++i) {
            const GradCheckResult r = grad_check(model, ds.samples[i], obj.mask, obj.weights);
            out << obj.name << " sample " << ds.samples[i].id << ": max_rel_error " << std::scientific
                << std::setprecision(3) << r.max_rel_error << std::defaultfloat << " (" << r.worst_param << "["
                << r.worst_entry << "], " << r.checked << " entries)\n";
            worst = std::max(worst, r.max_rel_error);
        }
    }
    out << "worst " << std::scientific << std::setprecision(3) << worst << std::defaultfloat << "\n";
    if (worst >= 1e-3) throw NumericError("gradient check failed: max relative error " + std::to_string(worst));
    return kExitOk;
}

} // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"MRGT: multimodal fake news video detection with explanation generation", "mrgt"};
    app.require_subcommand(1);
    Options o;

    auto* synth = app.add_subcommand("synth", "Generate a synthetic corpus");
    synth->add_option("--out", o.out_path, "Output JSONL path")->required();
    synth->add_option("--n", o.n, "Number of samples");
    synth->add_option("--vocab", o.vocab, "Vocabulary size (>= 32)");
    synth->add_option("--seed", o.seed, "Generator seed");
    synth->add_option("--frac-fake", o.frac_fake, "Fraction of fake samples")->check(CLI::Range(0.0, 1.0));
    synth->add_option("--frac-non-ocr", o.frac_non_ocr, "Fraction of samples without OCR")->check(CLI::Range(0.0, 1.0));
    synth->add_option("--frame-dim", o.frame_dim, "Frame feature width");
    synth->add_option("--max-frames", o.max_frames, "Maximum frames per sample");

    auto* train_cmd = app.add_subcommand("train", "Train a model");
    train_cmd->add_option("--data", o.data, "Dataset JSONL")->required();
    train_cmd->add_option("--config", o.config, "Run config JSON");
    train_cmd->add_option("--out-ckpt", o.ckpt, "Checkpoint to write")->required();
    train_cmd->add_option("--ablate", o.ablate, "Ablations: w/o-Title, w/o-OCR, w/o-Related, w/o-Visual, w/o-Graph");
    train_cmd->add_option("--split", o.split, "overlap or event-disjoint")->check(CLI::IsMember({"overlap", "event-disjoint"}));

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a test regime");
    eval_cmd->add_option("--data", o.data, "Dataset JSONL")->required();
    eval_cmd->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
    eval_cmd->add_option("--config", o.config, "Run config JSON (split ratios and seed)");
    eval_cmd->add_option("--split", o.split, "overlap or event-disjoint")->check(CLI::IsMember({"overlap", "event-disjoint"}));
    eval_cmd->add_option("--filter", o.filter, "all, ocr or non-ocr")->check(CLI::IsMember({"all", "ocr", "non-ocr"}));
    eval_cmd->add_option("--report", o.report, "Write the JSON report here");

    auto* explain = app.add_subcommand("explain", "Classify one sample and generate its explanation");
    explain->add_option("--ckpt", o.ckpt, "Checkpoint")->required();
    explain->add_option("--sample", o.sample, "One dataset JSON line")->required();
    explain->add_option("--dump-graph", o.dump_graph, "Write the relation graph edges as JSONL");

    auto* ablate = app.add_subcommand("ablate", "Train and compare the full model with each ablation");
    ablate->add_option("--data", o.data, "Dataset JSONL")->required();
    ablate->add_option("--config", o.config, "Run config JSON");
    ablate->add_option("--split", o.split, "overlap or event-disjoint")->check(CLI::IsMember({"overlap", "event-disjoint"}));
    ablate->add_option("--report", o.report, "Write the JSON rows here");

    auto* gradcheck = app.add_subcommand("gradcheck", "Compare backprop with finite differences");
    gradcheck->add_option("--data", o.data, "Dataset JSONL (default: small synthetic set)");
    gradcheck->add_option("--dim", o.dim, "Model width");
    gradcheck->add_option("--samples", o.samples, "Samples to check");
    gradcheck->add_option("--seed", o.seed, "Synthetic data seed");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n" << app.help();
        return kExitUsage;
    }

    try {
        if (synth->parsed()) return cmd_synth(o, out);
        if (train_cmd->parsed()) return cmd_train(o, out);
        if (eval_cmd->parsed()) return cmd_eval(o, out);
        if (explain->parsed()) return cmd_explain(o, out);
        if (ablate->parsed()) return cmd_ablate(o, out);
        if (gradcheck->parsed()) return cmd_gradcheck(o, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const NumericError& e) {
        err << "numeric error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const ValidationError& e) {
        err << "validation error (" << e.field() << "): " << e.what() << "\n";
        return kExitData;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    }
    return kExitUsage;
}

} // namespace mrgt
