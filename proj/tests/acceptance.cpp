// Runs the acceptance criteria end to end and prints one PASS/FAIL line per
// criterion. Settings and thresholds come from acceptance.json.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>

#include <json.hpp>

#include "graph_oracle.hpp"
#include "metric_oracles.hpp"
#include "mrgt/checkpoint.hpp"
#include "mrgt/cli.hpp"
#include "mrgt/config.hpp"
#include "mrgt/trainer.hpp"

using namespace mrgt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string sci(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    return buf;
}

std::string sci_fixed(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12f", v);
    return buf;
}

ModelConfig toy_model(std::size_t vocab, std::size_t frame_dim, std::size_t width) {
    ModelConfig mc = ModelConfig::make(vocab, frame_dim, width);
    mc.encoder.n_heads = mc.decoder.n_heads = 2;
    mc.encoder.ffn_mult = mc.decoder.ffn_mult = 2;
    return mc;
}

Outcome gradient_correctness(const json& c) {
    const auto t0 = Clock::now();
    const std::size_t width = c["width"];
    SynthConfig sc;
    sc.n_samples = 40;
    sc.vocab_size = 32;
    sc.frame_dim = width;
    sc.max_frames = 4;
    sc.seed = c["synth_seed"];
    const Dataset ds = synth_generate(sc);
    MrgtModel model(toy_model(ds.vocab.size(), width, width));

    AblationMask no_graph;
    no_graph.no_graph = true;
    const std::pair<AblationMask, LossWeights> objectives[] = {
        {{}, {}}, {no_graph, {}}, {{}, {1.0, 0.0}}, {{}, {0.0, 1.0}}};
    GradCheckOptions opts;
    opts.epsilon = c["epsilon"];
    double worst = 0.0;
    std::size_t checked = 0, used = 0;
    for (const auto& s : ds.samples) {
        if (used == c["samples"].get<std::size_t>()) break;
        if (build_sequence(s).size() > c["max_sequence"].get<std::size_t>()) continue;
        ++used;
        for (const auto& [mask, weights] : objectives) {
            const GradCheckResult r = grad_check(model, s, mask, weights, opts);
            worst = std::max(worst, r.max_rel_error);
            checked += r.checked;
        }
    }
    const double secs = seconds_since(t0);
    const bool pass = used > 0 && worst < c["max_rel_error"].get<double>() && secs < c["max_seconds"].get<double>();
    return {pass, "max relative error " + sci(worst) + " over " + std::to_string(checked) + " entries, " +
                      std::to_string(used) + " samples x 4 objectives (< " + sci(c["max_rel_error"]) + "), " +
                      sci(secs) + "s"};
}

Outcome graph_oracle_equivalence(const json& c) {
    const auto t0 = Clock::now();
    Rng rng(c["seed"].get<std::uint64_t>());
    const std::size_t cases = c["cases"], max_s = c["max_sequence"];
    std::size_t agree = 0, covered = 0, edges = 0;
    for (std::size_t k = 0; k < cases; ++k) {
        const oracle::RandomCase rc = oracle::random_case(rng, max_s, 2 + rng.index(3));
        const MultimodalGraph g = build_graph(rc.x, rc.inputs);
        oracle::EdgeSet got, logged;
        for (std::size_t i = 0; i < g.nodes; ++i)
            for (std::size_t j = i + 1; j < g.nodes; ++j)
                if (g.adjacency(i, j) != 0.0) got.insert({i, j});
        for (const auto& e : g.edge_log) logged.insert({e.i, e.j});
        agree += got == oracle::edges(rc.x, rc.inputs, GraphConfig{}.tau_sem);
        covered += logged == got && logged.size() == g.edge_log.size();
        edges += got.size();
    }
    const double secs = seconds_since(t0);
    const bool pass = agree == cases && covered == cases && secs < c["max_seconds"].get<double>();
    return {pass, std::to_string(agree) + "/" + std::to_string(cases) + " edge sets equal the oracle, " +
                      std::to_string(covered) + "/" + std::to_string(cases) + " logs complete, " +
                      std::to_string(edges) + " edges, " + sci(secs) + "s"};
}

Outcome normalization_spectra(const json& c) {
    Rng rng(c["seed"].get<std::uint64_t>());
    const std::size_t cases = c["cases"], max_n = c["max_nodes"];
    const double tol = c["tolerance"];
    double worst = 0.0;
    std::size_t symmetric = 0;
    for (std::size_t k = 0; k < cases; ++k) {
        const std::size_t n = 1 + rng.index(max_n);
        const Matrix a = oracle::random_adjacency(rng, n, rng.uniform());
        const Matrix an = normalize_adjacency(a);
        bool sym = true;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) sym = sym && an(i, j) == an(j, i);
        symmetric += sym;
        worst = std::max(worst, oracle::spectral_radius(an, rng, c["iterations"]));
    }
    return {symmetric == cases && worst <= 1.0 + tol,
            std::to_string(symmetric) + "/" + std::to_string(cases) + " symmetric, max spectral radius " +
                sci_fixed(worst) + " (<= 1 + " + sci(tol) + ")"};
}

Outcome ablation_identity(const json& c) {
    SynthConfig sc;
    sc.n_samples = c["samples"];
    sc.seed = c["seed"];
    const Dataset ds = synth_generate(sc);
    ModelConfig mc = ModelConfig::make(ds.vocab.size(), sc.frame_dim, 32);
    MrgtModel model(mc);
    AblationMask mask;
    mask.no_graph = true;
    std::size_t identical = 0;
    for (const auto& s : ds.samples) {
        Tape tape(false);
        const ForwardResult r = model.forward(tape, s, mask, {});
        const Matrix& z = tape.value(r.fused);
        const Matrix& h = tape.value(r.encoded);
        identical += z.same_shape(h) && std::memcmp(z.data().data(), h.data().data(), 8 * z.size()) == 0;
    }
    return {identical == ds.samples.size(),
            std::to_string(identical) + "/" + std::to_string(ds.samples.size()) + " samples with Z == H bitwise"};
}

Outcome metric_oracles(const json& c) {
    Rng rng(c["seed"].get<std::uint64_t>());
    const double tol = c["tolerance"];
    const std::size_t vocab = c["vocab"], max_len = c["max_len"];
    double worst = 0.0;
    for (std::size_t k = 0; k < c["corpora"].get<std::size_t>(); ++k) {
        std::vector<TokenSeq> cands, refs;
        const int n = rng.range(1, 8);
        for (int i = 0; i < n; ++i) {
            cands.push_back(oracle::random_seq(rng, vocab, max_len));
            refs.push_back(oracle::random_seq(rng, vocab, max_len));
        }
        // Seed some overlap so higher-order n-grams are exercised.
        if (rng.uniform() < 0.5) cands[0] = refs[0];
        const auto b = bleu(cands, refs), ob = oracle::bleu(cands, refs);
        for (int i = 0; i < 4; ++i) worst = std::max(worst, std::abs(b[i] - ob[i]));
        double orl = 0.0;
        for (int i = 0; i < n; ++i) orl += oracle::rouge_l(cands[i], refs[i]);
        worst = std::max(worst, std::abs(rouge_l(cands, refs) - orl / n));
        worst = std::max(worst, std::abs(cider(cands, refs, refs) - oracle::cider(cands, refs, refs)));
    }
    const TokenSeq four{3, 1, 4, 1};
    const double meteor = meteor_lite(four, four);

    std::size_t reports_ok = 0;
    const std::size_t vectors = c["label_vectors"];
    for (std::size_t k = 0; k < vectors; ++k) {
        const std::size_t n = 1 + rng.index(30);
        std::vector<Label> pred(n), truth(n);
        double cm[2][2] = {};
        for (std::size_t i = 0; i < n; ++i) {
            pred[i] = rng.uniform() < 0.5 ? Label::fake : Label::real;
            truth[i] = rng.uniform() < 0.5 ? Label::fake : Label::real;
            cm[static_cast<int>(truth[i])][static_cast<int>(pred[i])] += 1;
        }
        double p[2], r[2], f[2];
        for (int k2 = 0; k2 < 2; ++k2) {
            const double tp = cm[k2][k2], fp = cm[1 - k2][k2], fn = cm[k2][1 - k2];
            p[k2] = tp + fp > 0 ? tp / (tp + fp) : 0.0;
            r[k2] = tp + fn > 0 ? tp / (tp + fn) : 0.0;
            f[k2] = p[k2] + r[k2] > 0 ? 2 * p[k2] * r[k2] / (p[k2] + r[k2]) : 0.0;
        }
        const ClassificationReport rep = classification_report(pred, truth);
        const bool ok = std::abs(rep.accuracy - (cm[0][0] + cm[1][1]) / n) < 1e-12 &&
                        std::abs(rep.macro_precision - (p[0] + p[1]) / 2) < 1e-12 &&
                        std::abs(rep.macro_recall - (r[0] + r[1]) / 2) < 1e-12 &&
                        std::abs(rep.macro_f1 - (f[0] + f[1]) / 2) < 1e-12;
        reports_ok += ok;
    }
    const bool pass = worst <= tol && meteor == 0.9921875 && reports_ok == vectors;
    return {pass, "max |metric - oracle| " + sci(worst) + " (<= " + sci(tol) + "), METEOR identical-4 = " +
                      std::to_string(meteor) + ", classification " + std::to_string(reports_ok) + "/" +
                      std::to_string(vectors)};
}

struct LearningRun {
    TrainResult result;
    EvalReport test;
    std::string checkpoint_bytes;
    std::string log;
    double seconds = 0.0;
};

struct LearningSetup {
    Dataset data;
    DatasetSplit split;
    ModelConfig model;
    TrainConfig train;
    RunConfig run;
};

LearningSetup learning_setup(const json& c) {
    LearningSetup s;
    SynthConfig sc;
    sc.n_samples = c["n_samples"];
    sc.vocab_size = c["vocab_size"];
    sc.frame_dim = c["frame_dim"];
    sc.max_frames = c["max_frames"];
    sc.seed = c["synth_seed"];
    s.data = synth_generate(sc);
    const auto ratios = c["ratios"].get<std::vector<double>>();
    s.run.ratios = {ratios[0], ratios[1], ratios[2]};
    s.run.split_seed = c["split_seed"];
    s.split = make_split(s.data.samples, s.run.ratios, SplitMode::random, SampleFilter::all, s.run.split_seed);
    s.model = ModelConfig::make(s.data.vocab.size(), sc.frame_dim, c["width"]);
    s.model.init_seed = c["init_seed"];
    s.train.epochs = c["epochs"];
    s.train.batch_size = c["batch_size"];
    s.train.seed = c["train_seed"];
    s.run.model = s.model;
    s.run.train = s.train;
    return s;
}

LearningRun learning_run(const LearningSetup& s, const fs::path& ckpt) {
    LearningRun run;
    const auto t0 = Clock::now();
    MrgtModel model(s.model);
    run.result = train(model, s.data, s.split, s.train, ckpt);
    run.seconds = seconds_since(t0);
    run.test = evaluate(model, s.data, s.split.test, {});
    std::ifstream in(ckpt, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    run.checkpoint_bytes = ss.str();
    std::ostringstream log;
    log.precision(17);
    for (const auto& e : run.result.log) {
        log << e.epoch << ' ' << e.train_loss << ' ' << e.val_loss;
        if (e.val_report) log << ' ' << e.val_report->classification.accuracy << ' ' << e.val_report->bleu[0];
        log << '\n';
    }
    run.log = log.str();
    return run;
}

Outcome learning_check(const json& c, const LearningSetup& s, const LearningRun& r) {
    const double first = r.result.log.front().train_loss, last = r.result.log.back().train_loss;
    const double ratio = last / first;
    const double acc = r.test.classification.accuracy, b1 = r.test.bleu[0];
    const bool sizes = s.split.train.size() == 600 && s.split.test.size() == 100;
    const bool pass = sizes && ratio < c["max_loss_ratio"].get<double>() && acc >= c["min_accuracy"].get<double>() &&
                      b1 >= c["min_bleu1"].get<double>() && r.seconds < c["max_seconds"].get<double>();
    char buf[320];
    std::snprintf(buf, sizeof buf,
                  "train/test %zu/%zu, loss %.4f -> %.4f (ratio %.3f < %.2f), test accuracy %.3f (>= %.2f), "
                  "BLEU-1 %.3f (>= %.2f), %.0fs",
                  s.split.train.size(), s.split.test.size(), first, last, ratio, c["max_loss_ratio"].get<double>(),
                  acc, c["min_accuracy"].get<double>(), b1, c["min_bleu1"].get<double>(), r.seconds);
    return {pass, buf};
}

Outcome determinism(const LearningRun& a, const LearningRun& b) {
    const bool ckpt = !a.checkpoint_bytes.empty() && a.checkpoint_bytes == b.checkpoint_bytes;
    const bool logs = a.log == b.log;
    return {ckpt && logs, std::string("checkpoints ") + (ckpt ? "identical" : "DIFFER") + " (" +
                              std::to_string(a.checkpoint_bytes.size()) + " bytes), loss logs " +
                              (logs ? "identical" : "DIFFER")};
}

Outcome regime_harness(const LearningSetup& s, const fs::path& dir, const fs::path& ckpt) {
    std::string detail;
    bool pass = true;

    const DatasetSplit ev =
        make_split(s.data.samples, s.run.ratios, SplitMode::event_disjoint, SampleFilter::all, s.run.split_seed);
    std::set<std::string> sets[3];
    const std::vector<std::size_t>* parts[3] = {&ev.train, &ev.val, &ev.test};
    for (int k = 0; k < 3; ++k)
        for (std::size_t i : *parts[k]) sets[k].insert(s.data.samples[i].event_id);
    std::size_t shared = 0;
    for (int a = 0; a < 3; ++a)
        for (int b = a + 1; b < 3; ++b)
            for (const auto& e : sets[a]) shared += sets[b].contains(e);
    pass = pass && shared == 0;
    detail += "shared events " + std::to_string(shared);

    const DatasetSplit non =
        make_split(s.data.samples, s.run.ratios, SplitMode::random, SampleFilter::non_ocr_only, s.run.split_seed);
    std::size_t with_ocr = 0, total = 0;
    for (const auto* l : {&non.train, &non.val, &non.test})
        for (std::size_t i : *l) {
            with_ocr += s.data.samples[i].has_ocr();
            ++total;
        }
    pass = pass && with_ocr == 0 && total > 0;
    detail += ", non-OCR filter kept " + std::to_string(total) + " samples with " + std::to_string(with_ocr) + " OCR";

    const fs::path data = dir / "acceptance.jsonl", config = dir / "run.json";
    save_dataset(data, s.data);
    std::ofstream(config) << to_json(s.run).dump();
    const std::pair<const char*, const char*> regimes[] = {
        {"overlap", "all"}, {"event-disjoint", "all"}, {"overlap", "non-ocr"}};
    int emitted = 0;
    for (const auto& [split, filter] : regimes) {
        const fs::path report = dir / (std::string("report_") + split + "_" + filter + ".json");
        std::ostringstream out, err;
        const int code = run_cli({"eval", "--data", data.string(), "--ckpt", ckpt.string(), "--config",
                                  config.string(), "--split", split, "--filter", filter, "--report", report.string()},
                                 out, err);
        bool ok = code == 0 && fs::exists(report);
        if (ok) {
            std::ifstream in(report);
            const json j = json::parse(in);
            ok = j["samples"].get<int>() > 0 && j["bleu"].size() == 4 && j.contains("macro_f1");
        }
        emitted += ok;
        if (!ok) detail += std::string(", eval ") + split + "/" + filter + " failed: " + err.str();
    }
    pass = pass && emitted == 3;
    detail += ", " + std::to_string(emitted) + "/3 regime reports emitted";
    return {pass, detail};
}

} // namespace

int main(int argc, char** argv) {
    const fs::path config_path = argc > 1 ? fs::path(argv[1]) : fs::path(MRGT_ACCEPTANCE_CONFIG);
    std::ifstream in(config_path);
    if (!in) {
        std::fprintf(stderr, "cannot open %s\n", config_path.string().c_str());
        return 2;
    }
    const json cfg = json::parse(in);
    const fs::path dir = fs::temp_directory_path() / "mrgt_acceptance";
    fs::remove_all(dir);
    fs::create_directories(dir);

    int failures = 0;
    auto report = [&](int id, const char* name, const Outcome& o) {
        std::printf("%s [%d] %s: %s\n", o.pass ? "PASS" : "FAIL", id, name, o.detail.c_str());
        std::fflush(stdout);
        failures += !o.pass;
    };

    report(1, "gradient correctness", gradient_correctness(cfg["gradient"]));
    report(2, "graph rule oracle", graph_oracle_equivalence(cfg["graph_oracle"]));
    report(3, "normalization spectra", normalization_spectra(cfg["spectra"]));
    report(4, "w/o-Graph identity", ablation_identity(cfg["ablation_identity"]));
    report(5, "metric oracles", metric_oracles(cfg["metrics"]));

    const json& lc = cfg["learning"];
    const LearningSetup setup = learning_setup(lc);
    const LearningRun first = learning_run(setup, dir / "first.ckpt");
    report(6, "learning check", learning_check(lc, setup, first));
    const LearningRun second = learning_run(setup, dir / "second.ckpt");
    report(7, "determinism", determinism(first, second));
    report(8, "regime harness", regime_harness(setup, dir, dir / "first.ckpt"));

    fs::remove_all(dir);
    std::printf("%d/8 criteria passed\n", 8 - failures);
    return failures == 0 ? 0 : 1;
}
