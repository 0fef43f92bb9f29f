// ivnet: synth / preprocess / train / eval / introspect
//
// Exit codes: 0 ok, 2 usage, 3 data error, 4 numeric error, 1 anything else.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "ivnet/cli/config.hpp"
#include "ivnet/cli/manifest.hpp"
#include "ivnet/ivnet.hpp"

namespace fs = std::filesystem;
using namespace ivnet;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

std::vector<std::string> g_argv;

void write_text(const std::string &path, const std::string &text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw DataError("cannot write " + path);
    }
    out << text;
}

std::string manifest_path(const std::string &explicit_path, const std::string &out) {
    return explicit_path.empty() ? out + ".manifest.json" : explicit_path;
}

Corpus load_processed(const std::string &path) {
    LoadResult loaded = load_threads(path);
    for (const auto &t : loaded.corpus.threads) {
        for (const auto &p : t.posts) {
            if (p.tokens.empty()) {
                throw DataError(fmt::format("{}: thread {} has untokenized posts; run preprocess first", path,
                                            t.thread_id));
            }
        }
    }
    if (!loaded.rejected.empty()) {
        throw DataError(fmt::format("{}: {} records from excluded forums; run preprocess first", path,
                                    loaded.rejected.size()));
    }
    return std::move(loaded.corpus);
}

// ---------------------------------------------------------------------------

struct SynthArgs {
    std::string spec;
    std::string out;
    std::string manifest;
    std::optional<std::uint64_t> seed;
};

int cmd_synth(const SynthArgs &a) {
    cli::Stopwatch clock;
    SynthSpec spec;
    std::optional<std::uint64_t> file_seed;
    {
        std::ifstream in(a.spec);
        if (!in) {
            throw DataError("cannot open spec " + a.spec);
        }
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(in);
        } catch (const nlohmann::json::parse_error &e) {
            throw DataError(a.spec + ": " + e.what());
        }
        spec = j.get<SynthSpec>();
        if (j.contains("seed")) {
            file_seed = spec.seed;
        }
    }
    spec.seed = cli::resolve_seed(a.seed, file_seed);
    const Corpus corpus = synth_generate(spec);
    write_threads(a.out, corpus, false);

    cli::RunManifest m;
    m.command = "synth";
    m.argv = g_argv;
    m.seed = spec.seed;
    m.config = nlohmann::ordered_json(nlohmann::json(spec));
    m.add_input(a.spec);
    m.add_output(a.out);
    m.timings_ms["total"] = clock.ms();
    m.write(manifest_path(a.manifest, a.out));
    std::cout << fmt::format("wrote {} threads ({} intervened) to {}\n", corpus.threads.size(),
                             corpus.positives(), a.out);
    return 0;
}

// ---------------------------------------------------------------------------

struct PreprocessArgs {
    std::string in;
    std::string out;
    std::string report;
    std::string manifest;
    std::string comment_order = "chronological";
};

int cmd_preprocess(const PreprocessArgs &a) {
    cli::Stopwatch clock;
    PreprocessOptions opt;
    opt.comment_order = parse_comment_order(a.comment_order);
    PreprocessReport report;
    const Corpus corpus = preprocess(load_threads(a.in), report, opt);
    write_threads(a.out, corpus, true);
    const std::string report_path = a.report.empty() ? a.out + ".report.json" : a.report;
    write_text(report_path, report.to_json().dump(2) + "\n");

    cli::RunManifest m;
    m.command = "preprocess";
    m.argv = g_argv;
    m.config = {{"comment_order", a.comment_order}};
    m.add_input(a.in);
    m.add_output(a.out);
    m.add_output(report_path);
    m.timings_ms["total"] = clock.ms();
    m.write(manifest_path(a.manifest, a.out));
    std::cout << fmt::format("kept {} of {} threads ({} positive); report in {}\n", report.kept, report.records,
                             report.positives, report_path);
    return 0;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
    std::string variant;
    std::string config;
    std::string corpus;
    std::string embeddings;
    std::string out;
    std::string manifest;
    std::string loss_log;
    std::optional<std::uint64_t> seed;
    std::vector<std::string> set;
    std::optional<std::size_t> epochs;
    std::optional<double> lr;
    std::optional<std::size_t> hidden;
    std::optional<std::size_t> embed;
    std::optional<std::size_t> context_truncation;
    std::string multi_loss;
    bool quiet = false;
};

int cmd_train(const TrainArgs &a) {
    cli::Stopwatch clock;
    cli::RunConfig rc;
    if (!a.config.empty()) {
        cli::apply(rc, cli::load_key_values(a.config));
    }
    for (const auto &kv : a.set) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw CLI::ValidationError("--set", "expected key=value, got '" + kv + "'");
        }
        cli::apply_setting(rc, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!a.variant.empty()) {
        cli::apply_setting(rc, "variant", a.variant);
    }
    if (!a.embeddings.empty()) {
        rc.train.embeddings = a.embeddings;
    }
    if (a.epochs) {
        rc.train.epochs = *a.epochs;
    }
    if (a.lr) {
        rc.train.lr = *a.lr;
    }
    if (a.hidden) {
        rc.train.hidden = *a.hidden;
    }
    if (a.embed) {
        rc.train.embed = *a.embed;
    }
    if (a.context_truncation) {
        rc.train.context_truncation = *a.context_truncation;
    }
    if (!a.multi_loss.empty()) {
        cli::apply_setting(rc, "multi_loss_lengths", a.multi_loss);
    }
    rc.train.seed = cli::resolve_seed(a.seed, rc.seed);
    rc.train.validate();

    const Corpus corpus = load_processed(a.corpus);
    const PreparedData data = prepare(corpus, rc.train);
    const double t_prepare = clock.ms();

    Checkpoint ck;
    std::vector<InstanceLoss> losses;
    nlohmann::ordered_json fit_info = nlohmann::ordered_json::object();
    if (rc.logreg) {
        BaselineFit fit = train_baseline(rc.train, data, rc.logreg_options, rc.features);
        if (fit.fit.degenerate) {
            std::cerr << "warning: training split has a single class; the baseline is bias-only\n";
        }
        fit_info = {{"iterations", fit.fit.iterations},
                    {"grad_norm", fit.fit.grad_norm},
                    {"objective", fit.fit.objective},
                    {"degenerate", fit.fit.degenerate}};
        ck = std::move(fit.checkpoint);
    } else {
        const std::size_t total = data.split.train.threads.size() * rc.train.epochs;
        std::size_t done = 0;
        TrainObserver progress;
        if (!a.quiet) {
            progress = [&](const InstanceLoss &) {
                ++done;
                if (done % 100 == 0 || done == total) {
                    std::cerr << fmt::format("\rtrained {}/{} instances", done, total) << std::flush;
                }
            };
        }
        ck = train_neural(rc.train, data, &losses, progress);
        if (!a.quiet) {
            std::cerr << '\n';
        }
    }
    save_checkpoint(a.out, ck);
    if (!a.loss_log.empty()) {
        std::string text = "epoch,thread_id,loss\n";
        for (const auto &l : losses) {
            text += fmt::format("{},{},{:.17g}\n", l.epoch, l.thread_id, l.loss);
        }
        write_text(a.loss_log, text);
    }

    cli::RunManifest m;
    m.command = "train";
    m.argv = g_argv;
    m.seed = rc.train.seed;
    m.config = nlohmann::ordered_json(nlohmann::json(rc.train));
    m.config["variant"] = ck.variant_name();
    if (rc.logreg) {
        m.config["baseline"] = nlohmann::ordered_json(ck.baseline);
        m.config["fit"] = fit_info;
    }
    m.config["train_threads"] = data.split.train.threads.size();
    m.config["test_threads"] = data.split.test.threads.size();
    m.config["vocab_size"] = data.vocab.size();
    m.config["vocab_hash"] = data.vocab.hash();
    m.add_input(a.corpus);
    if (!a.config.empty()) {
        m.add_input(a.config);
    }
    if (rc.train.embeddings != "random") {
        m.add_input(rc.train.embeddings);
    }
    m.add_output(a.out);
    if (!a.loss_log.empty()) {
        m.add_output(a.loss_log);
    }
    m.checkpoint_hash = cli::file_hash(a.out);
    m.timings_ms["prepare"] = t_prepare;
    m.timings_ms["total"] = clock.ms();
    m.write(manifest_path(a.manifest, a.out));
    std::cout << fmt::format("trained {} on {} threads (vocab {}); checkpoint {} [{}]\n", ck.variant_name(),
                             data.split.train.threads.size(), data.vocab.size(), a.out, m.checkpoint_hash);
    return 0;
}

// ---------------------------------------------------------------------------

/// Loads a checkpoint and the threads it should be evaluated on, refusing
/// when the corpus does not rebuild the vocabulary the model was trained
/// with.
struct EvalInputs {
    Checkpoint ck;
    Corpus threads;
};

EvalInputs load_eval_inputs(const std::string &model, const std::string &corpus_path, const std::string &split) {
    EvalInputs in{load_checkpoint(model), {}};
    const Corpus corpus = load_processed(corpus_path);
    const PreparedData data = prepare(corpus, in.ck.config);
    if (data.vocab.hash() != in.ck.vocab_hash()) {
        throw DataError(fmt::format("vocabulary hash mismatch: checkpoint {} was trained with vocab {}, but {} "
                                    "rebuilds vocab {}; refusing to evaluate",
                                    model, in.ck.vocab_hash(), corpus_path, data.vocab.hash()));
    }
    if (split == "test") {
        in.threads = data.split.test;
    } else if (split == "train") {
        in.threads = data.split.train;
    } else {
        in.threads = corpus;
    }
    if (in.threads.threads.empty()) {
        throw DataError("no threads to evaluate");
    }
    return in;
}

struct EvalArgs {
    std::string model;
    std::string corpus;
    std::string out_dir;
    std::string split = "test";
    std::string length_basis = "model";
    std::string manifest;
    std::size_t workers = 1;
};

int cmd_eval(const EvalArgs &a) {
    cli::Stopwatch clock;
    const EvalInputs in = load_eval_inputs(a.model, a.corpus, a.split);
    const Evaluation ev = evaluate_checkpoint(in.ck, in.threads, a.workers);
    const double t_predict = clock.ms();
    const MetricsReport rep = build_report(ev.records);
    const LengthBinReport bins = bin_recall_by_length(
        ev.records, a.length_basis == "original" ? LengthBasis::kOriginal : LengthBasis::kModelInput);

    fs::create_directories(a.out_dir);
    const std::string table_path = (fs::path(a.out_dir) / "metrics.txt").string();
    const std::string json_path = (fs::path(a.out_dir) / "metrics.json").string();
    const std::string records_path = (fs::path(a.out_dir) / "predictions.jsonl").string();
    const std::string bins_path = (fs::path(a.out_dir) / "length_bins.csv").string();
    const std::string traces_path = (fs::path(a.out_dir) / "attention.jsonl").string();

    const std::string table = format_table(rep, in.ck.variant_name());
    write_text(table_path, table);
    nlohmann::ordered_json metrics = to_json(rep);
    metrics["variant"] = in.ck.variant_name();
    metrics["split"] = a.split;
    write_text(json_path, metrics.dump(2) + "\n");
    std::string records;
    for (const auto &r : ev.records) {
        records += to_json(r).dump() + "\n";
    }
    write_text(records_path, records);
    write_text(bins_path, bins_csv(bins));

    cli::RunManifest m;
    m.command = "eval";
    m.argv = g_argv;
    m.seed = in.ck.config.seed;
    m.config = {{"split", a.split}, {"length_basis", a.length_basis}, {"workers", a.workers}};
    m.add_input(a.model);
    m.add_input(a.corpus);
    m.checkpoint_hash = cli::file_hash(a.model);
    for (const auto &p : {table_path, json_path, records_path, bins_path}) {
        m.add_output(p);
    }
    if (!ev.traces.empty()) {
        std::map<std::string, const PredictionRecord *> by_id;
        for (const auto &r : ev.records) {
            by_id[r.thread_id] = &r;
        }
        std::string traces;
        for (const auto &t : ev.traces) {
            traces += trace_json(t, *by_id.at(t.thread_id)).dump() + "\n";
        }
        write_text(traces_path, traces);
        m.add_output(traces_path);
    }
    m.timings_ms["predict"] = t_predict;
    m.timings_ms["total"] = clock.ms();
    m.write(manifest_path(a.manifest, (fs::path(a.out_dir) / "eval").string()));
    std::cout << table;
    return 0;
}

// ---------------------------------------------------------------------------

struct IntrospectArgs {
    std::string model;
    std::string traces;
    std::string corpus;
    std::string out;
    std::string split = "test";
    std::string signal_tokens;
    std::string manifest;
    std::size_t workers = 1;
};

int cmd_introspect(const IntrospectArgs &a) {
    cli::Stopwatch clock;
    std::vector<AttentionTrace> traces;
    Corpus corpus;
    if (!a.model.empty()) {
        EvalInputs in = load_eval_inputs(a.model, a.corpus, a.split);
        if (in.ck.kind != Checkpoint::Kind::kNeural || in.ck.config.variant == Variant::kHlstm) {
            throw CLI::ValidationError("--model", "introspection needs an attention model (upa, ppa or apa)");
        }
        traces = evaluate_checkpoint(in.ck, in.threads, a.workers).traces;
        corpus = std::move(in.threads);
    } else {
        corpus = load_processed(a.corpus);
        std::ifstream tin(a.traces);
        if (!tin) {
            throw DataError("cannot open " + a.traces);
        }
        std::string line;
        std::size_t lineno = 0;
        while (std::getline(tin, line)) {
            ++lineno;
            if (line.find_first_not_of(" \t\r") == std::string::npos) {
                continue;
            }
            try {
                traces.push_back(trace_from_json(nlohmann::json::parse(line)));
            } catch (const nlohmann::json::exception &e) {
                throw ParseError(std::string("bad trace record: ") + e.what(), lineno);
            }
        }
    }
    IntrospectOptions opt;
    std::stringstream tokens(a.signal_tokens);
    for (std::string tok; std::getline(tokens, tok, ',');) {
        if (!tok.empty()) {
            opt.signal_tokens.insert(tok);
        }
    }
    const IntrospectionReport rep = introspect(traces, corpus, opt);
    write_text(a.out, to_json(rep).dump(2) + "\n");

    cli::RunManifest m;
    m.command = "introspect";
    m.argv = g_argv;
    m.config = {{"split", a.split}, {"signal_tokens", a.signal_tokens}};
    if (!a.model.empty()) {
        m.add_input(a.model);
        m.checkpoint_hash = cli::file_hash(a.model);
    } else {
        m.add_input(a.traces);
    }
    m.add_input(a.corpus);
    m.add_output(a.out);
    m.timings_ms["total"] = clock.ms();
    m.write(manifest_path(a.manifest, a.out));

    std::cout << fmt::format("{} threads; argmax position first/middle/last = {}/{}/{}\n", rep.rows.size(),
                             rep.position_histogram.at("first"), rep.position_histogram.at("middle"),
                             rep.position_histogram.at("last"));
    std::cout << fmt::format("mean attention on final context {:.4f} (uniform {:.4f})\n", rep.mean_final_mass,
                             rep.mean_uniform_baseline);
    if (rep.mean_signal_mass) {
        std::cout << fmt::format("mean attention on signal contexts {:.4f} over {} threads\n", *rep.mean_signal_mass,
                                 rep.signal_threads);
    }
    return 0;
}

}  // namespace

int main(int argc, char **argv) {
    g_argv.assign(argv, argv + argc);
    CLI::App app{"Instructor intervention prediction over forum threads"};
    app.require_subcommand(1);
    app.set_help_all_flag("--help-all");

    SynthArgs synth;
    auto *s = app.add_subcommand("synth", "generate a labelled synthetic corpus");
    s->add_option("--spec", synth.spec, "JSON corpus spec")->required()->check(CLI::ExistingFile);
    s->add_option("--out", synth.out, "output JSONL")->required();
    s->add_option("--seed", synth.seed, "overrides the spec seed");
    s->add_option("--manifest", synth.manifest);

    PreprocessArgs pre;
    auto *p = app.add_subcommand("preprocess", "normalize, filter, truncate and tokenize threads");
    p->add_option("--in", pre.in)->required()->check(CLI::ExistingFile);
    p->add_option("--out", pre.out)->required();
    p->add_option("--report", pre.report, "default: <out>.report.json");
    p->add_option("--comment-order", pre.comment_order)
        ->check(CLI::IsMember({"chronological", "after-parent"}));
    p->add_option("--manifest", pre.manifest);

    TrainArgs tr;
    auto *t = app.add_subcommand("train", "train a model on the 80% split");
    t->add_option("--variant", tr.variant)->check(CLI::IsMember({"hlstm", "upa", "ppa", "apa", "logreg"}));
    t->add_option("--config", tr.config, "key = value file")->check(CLI::ExistingFile);
    t->add_option("--corpus", tr.corpus, "preprocessed JSONL")->required()->check(CLI::ExistingFile);
    t->add_option("--embeddings", tr.embeddings, "vector file or 'random'");
    t->add_option("--out", tr.out, "checkpoint path")->required();
    t->add_option("--seed", tr.seed);
    t->add_option("--epochs", tr.epochs);
    t->add_option("--lr", tr.lr);
    t->add_option("--hidden", tr.hidden);
    t->add_option("--embed", tr.embed);
    t->add_option("--context-truncation", tr.context_truncation);
    t->add_option("--multi-loss", tr.multi_loss, "comma-separated context lengths");
    t->add_option("--set", tr.set, "extra key=value settings")->take_all();
    t->add_option("--loss-log", tr.loss_log, "per-instance loss CSV");
    t->add_option("--manifest", tr.manifest);
    t->add_flag("--quiet", tr.quiet);

    EvalArgs ev;
    auto *e = app.add_subcommand("eval", "evaluate a checkpoint on the held-out split");
    e->add_option("--model", ev.model)->required()->check(CLI::ExistingFile);
    e->add_option("--corpus", ev.corpus)->required()->check(CLI::ExistingFile);
    e->add_option("--out-dir", ev.out_dir)->required();
    e->add_option("--split", ev.split)->check(CLI::IsMember({"test", "train", "all"}));
    e->add_option("--length-basis", ev.length_basis)->check(CLI::IsMember({"model", "original"}));
    e->add_option("--workers", ev.workers)->check(CLI::PositiveNumber);
    e->add_option("--manifest", ev.manifest);

    IntrospectArgs in;
    auto *i = app.add_subcommand("introspect", "summarize attention traces");
    auto *model_opt = i->add_option("--model", in.model)->check(CLI::ExistingFile);
    auto *traces_opt = i->add_option("--traces", in.traces, "attention.jsonl from eval")->check(CLI::ExistingFile);
    model_opt->excludes(traces_opt);
    i->add_option("--corpus", in.corpus)->required()->check(CLI::ExistingFile);
    i->add_option("--out", in.out)->required();
    i->add_option("--split", in.split)->check(CLI::IsMember({"test", "train", "all"}));
    i->add_option("--signal-tokens", in.signal_tokens, "comma-separated");
    i->add_option("--workers", in.workers)->check(CLI::PositiveNumber);
    i->add_option("--manifest", in.manifest);

    try {
        app.parse(argc, argv);
        if (*i && in.model.empty() && in.traces.empty()) {
            throw CLI::RequiredError("--model or --traces");
        }
    } catch (const CLI::ParseError &err) {
        const int code = app.exit(err);
        return code == 0 ? 0 : kExitUsage;
    }

    try {
        if (*s) {
            return cmd_synth(synth);
        }
        if (*p) {
            return cmd_preprocess(pre);
        }
        if (*t) {
            return cmd_train(tr);
        }
        if (*e) {
            return cmd_eval(ev);
        }
        return cmd_introspect(in);
    } catch (const CLI::Error &err) {
        std::cerr << "error: " << err.what() << '\n';
        return kExitUsage;
    } catch (const NumericError &err) {
        std::cerr << "numeric error: " << err.what() << '\n';
        return kExitNumeric;
    } catch (const DataError &err) {
        std::cerr << "data error: " << err.what() << '\n';
        return kExitData;
    } catch (const ParseError &err) {
        std::cerr << "parse error: " << err.what() << '\n';
        return kExitData;
    } catch (const DimensionError &err) {
        std::cerr << "data error: " << err.what() << '\n';
        return kExitData;
    } catch (const std::exception &err) {
        std::cerr << "error: " << err.what() << '\n';
        return 1;
    }
}
