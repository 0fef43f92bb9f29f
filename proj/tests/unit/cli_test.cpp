#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <nlohmann/json.hpp>

#include "ivnet/cli/config.hpp"
#include "ivnet/cli/manifest.hpp"
#include "ivnet/corpus/io.hpp"

namespace fs = std::filesystem;
using namespace ivnet;
using namespace ivnet::cli;

namespace {

KeyValues parse(const std::string &text) {
    std::istringstream in(text);
    return parse_key_values(in);
}

std::size_t error_line(const std::string &text) {
    try {
        RunConfig rc;
        apply(rc, parse(text));
    } catch (const ParseError &e) {
        return e.line();
    }
    return 0;
}

std::string slurp(const fs::path &p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

void write(const fs::path &p, const std::string &text) { std::ofstream(p, std::ios::binary) << text; }

// Runs the CLI; returns its exit status.
int run(const std::string &args) {
    const std::string cmd = std::string(IVNET_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class CliRun : public ::testing::Test {
  protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() /
               ("ivnet_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
        write(dir_ / "spec.json", R"({"n_threads": 60, "courses": 2, "vocab_size": 15, "seed": 3})");
    }
    void TearDown() override { fs::remove_all(dir_); }

    std::string p(const std::string &name) const { return (dir_ / name).string(); }

    // synth -> preprocess -> train (tiny model)
    void pipeline(const std::string &variant = "upa") {
        ASSERT_EQ(run("synth --spec " + p("spec.json") + " --out " + p("raw.jsonl")), 0);
        ASSERT_EQ(run("preprocess --in " + p("raw.jsonl") + " --out " + p("proc.jsonl")), 0);
        ASSERT_EQ(run("train --variant " + variant + " --corpus " + p("proc.jsonl") + " --out " + p("m.ckpt") +
                      " --hidden 3 --embed 4 --epochs 1 --seed 2 --set min_count=1 --quiet"),
                  0);
    }

    fs::path dir_;
};

}  // namespace

TEST(KeyValueFile, ParsesCommentsAndWhitespace) {
    const auto kv = parse("# header\nlr = 0.01\n\n  epochs=3   # trailing\nurl = a#b\n");
    EXPECT_EQ(kv.values.at("lr"), "0.01");
    EXPECT_EQ(kv.values.at("epochs"), "3");
    EXPECT_EQ(kv.values.at("url"), "a#b");
    EXPECT_EQ(kv.lines.at("epochs"), 4u);
}

TEST(KeyValueFile, ErrorsNameTheLine) {
    EXPECT_EQ(error_line("lr = 0.1\nnonsense\n"), 2u);
    EXPECT_EQ(error_line("lr = 0.1\nlr = 0.2\n"), 2u);
    EXPECT_EQ(error_line(" = 3\n"), 1u);
    EXPECT_EQ(error_line("epochs = 1\nhidden = many\n"), 2u);
    EXPECT_EQ(error_line("\n\nmystery = 1\n"), 3u);
    EXPECT_EQ(error_line("variant = cnn\n"), 1u);
    EXPECT_EQ(error_line("lr = 0.1\n"), 0u);
}

TEST(RunConfigSettings, AppliesEveryKey) {
    RunConfig rc;
    apply(rc, parse("variant = apa\nlr = 0.005\nepochs = 2\nhidden = 8\nembed = 6\nseed = 11\n"
                    "context_truncation = 1\nmulti_loss_lengths = 3, 4\nmin_count = 1\n"
                    "apa_normalization = per-query-mean\nclip_norm = 5\nl2 = 0.5\niters = 50\n"
                    "agreement_norm = tokens\n"));
    EXPECT_EQ(rc.train.variant, Variant::kApa);
    EXPECT_EQ(rc.train.lr, 0.005);
    EXPECT_EQ(rc.train.epochs, 2u);
    EXPECT_EQ(rc.train.hidden, 8u);
    EXPECT_EQ(rc.train.embed, 6u);
    EXPECT_EQ(rc.seed, 11u);
    EXPECT_EQ(rc.train.context_truncation, 1u);
    EXPECT_EQ(rc.train.multi_loss_lengths, (std::vector<std::size_t>{3, 4}));
    EXPECT_EQ(rc.train.apa_normalization, ApaNormalization::kPerQueryMean);
    EXPECT_EQ(rc.train.clip_norm, 5.0);
    EXPECT_EQ(rc.logreg_options.l2, 0.5);
    EXPECT_EQ(rc.logreg_options.iters, 50u);
    EXPECT_EQ(rc.features.agreement_norm, AgreementNorm::kTokenCount);
    EXPECT_FALSE(rc.logreg);
    apply_setting(rc, "variant", "logreg");
    EXPECT_TRUE(rc.logreg);
    apply_setting(rc, "context_truncation", "none");
    EXPECT_FALSE(rc.train.context_truncation);
    EXPECT_THROW(apply_setting(rc, "epochs", "-1"), DataError);
}

TEST(Seed, Precedence) {
    EXPECT_EQ(resolve_seed(5, 6, "7"), 5u);
    EXPECT_EQ(resolve_seed(std::nullopt, 6, "7"), 6u);
    EXPECT_EQ(resolve_seed(std::nullopt, std::nullopt, "7"), 7u);
    EXPECT_EQ(resolve_seed(std::nullopt, std::nullopt, nullptr), 0u);
    EXPECT_EQ(resolve_seed(std::nullopt, std::nullopt, ""), 0u);
    EXPECT_THROW(resolve_seed(std::nullopt, std::nullopt, "abc"), DataError);
}

TEST(Manifest, RecordsHashesOfInputs) {
    const fs::path f = fs::temp_directory_path() / "ivnet_manifest_input.txt";
    write(f, "abc");
    RunManifest m;
    m.command = "demo";
    m.seed = 4;
    m.add_input(f.string());
    const auto j = m.to_json();
    EXPECT_EQ(j["seed"], 4);
    EXPECT_EQ(j["inputs"][f.string()], file_hash(f.string()));
    write(f, "abd");
    EXPECT_NE(j["inputs"][f.string()], file_hash(f.string()));
    fs::remove(f);
}

TEST_F(CliRun, SynthRatioAndDeterminism) {
    write(dir_ / "q.json", R"({"n_threads": 100, "intervention_ratio": 0.25, "seed": 1})");
    ASSERT_EQ(run("synth --spec " + p("q.json") + " --out " + p("a.jsonl")), 0);
    ASSERT_EQ(run("synth --spec " + p("q.json") + " --out " + p("b.jsonl")), 0);
    EXPECT_EQ(slurp(p("a.jsonl")), slurp(p("b.jsonl")));
    EXPECT_EQ(load_threads(p("a.jsonl")).corpus.positives(), 20u);
    EXPECT_TRUE(fs::exists(p("a.jsonl.manifest.json")));
}

TEST_F(CliRun, PreprocessDropsInstructorStartedAndIsIdempotent) {
    write(dir_ / "raw.jsonl",
          R"({"thread_id":"a","course_id":"c","forum":"Quiz","posts":[{"post_id":"1","author_role":"instructor","text":"hi"}]})"
          "\n"
          R"({"thread_id":"b","course_id":"c","forum":"Quiz","posts":[{"post_id":"1","author_role":"student","text":"see 1:23"}]})"
          "\n");
    const std::string input_before = slurp(p("raw.jsonl"));
    ASSERT_EQ(run("preprocess --in " + p("raw.jsonl") + " --out " + p("p1.jsonl") + " --report " + p("r.json")), 0);
    const auto report = nlohmann::json::parse(slurp(p("r.json")));
    EXPECT_EQ(report["excluded_instructor_started"], 1);
    EXPECT_EQ(report["kept"], 1);
    ASSERT_EQ(run("preprocess --in " + p("p1.jsonl") + " --out " + p("p2.jsonl")), 0);
    EXPECT_EQ(slurp(p("p1.jsonl")), slurp(p("p2.jsonl")));
    EXPECT_EQ(slurp(p("raw.jsonl")), input_before);
}

TEST_F(CliRun, TrainEvalEmitsReports) {
    pipeline();
    ASSERT_EQ(run("eval --model " + p("m.ckpt") + " --corpus " + p("proc.jsonl") + " --out-dir " + p("ev")), 0);
    const std::string table = slurp(p("ev/metrics.txt"));
    EXPECT_NE(table.find("Macro Avg."), std::string::npos);
    EXPECT_NE(table.find("Weighted Macro Avg"), std::string::npos);
    for (const char *f : {"metrics.json", "predictions.jsonl", "length_bins.csv", "attention.jsonl"}) {
        EXPECT_TRUE(fs::exists(dir_ / "ev" / f)) << f;
    }
    ASSERT_EQ(run("introspect --traces " + p("ev/attention.jsonl") + " --corpus " + p("proc.jsonl") + " --out " +
                  p("intro.json") + " --signal-tokens sig0,sig1,sig2"),
              0);
    const auto intro = nlohmann::json::parse(slurp(p("intro.json")));
    EXPECT_GT(intro["threads"].get<int>(), 0);
}

TEST_F(CliRun, RerunsAreBitwiseIdentical) {
    pipeline("apa");
    const std::string first = slurp(p("m.ckpt"));
    ASSERT_EQ(run("eval --model " + p("m.ckpt") + " --corpus " + p("proc.jsonl") + " --out-dir " + p("e1")), 0);
    ASSERT_EQ(run("train --variant apa --corpus " + p("proc.jsonl") + " --out " + p("m.ckpt") +
                  " --hidden 3 --embed 4 --epochs 1 --seed 2 --set min_count=1 --quiet"),
              0);
    EXPECT_EQ(slurp(p("m.ckpt")), first);
    ASSERT_EQ(run("eval --model " + p("m.ckpt") + " --corpus " + p("proc.jsonl") + " --out-dir " + p("e2") +
                  " --workers 3"),
              0);
    EXPECT_EQ(slurp(p("e1/metrics.json")), slurp(p("e2/metrics.json")));
    EXPECT_EQ(slurp(p("e1/predictions.jsonl")), slurp(p("e2/predictions.jsonl")));
}

TEST_F(CliRun, LogregBaselineTrainsAndEvaluates) {
    pipeline("logreg");
    ASSERT_EQ(run("eval --model " + p("m.ckpt") + " --corpus " + p("proc.jsonl") + " --out-dir " + p("ev")), 0);
    EXPECT_TRUE(fs::exists(dir_ / "ev" / "metrics.json"));
}

TEST_F(CliRun, ExitCodes) {
    EXPECT_EQ(run("train --variant cnn --corpus " + p("spec.json") + " --out " + p("x")), 2);
    EXPECT_EQ(run("frobnicate"), 2);
    EXPECT_EQ(run("synth --out " + p("x")), 2);
    write(dir_ / "bad.json", R"({"n_threads": 10, "intervention_ratio": -2})");
    EXPECT_EQ(run("synth --spec " + p("bad.json") + " --out " + p("x")), 3);
    write(dir_ / "broken.jsonl", "{not json\n");
    EXPECT_EQ(run("preprocess --in " + p("broken.jsonl") + " --out " + p("x")), 3);
}

TEST_F(CliRun, EvalRefusesMismatchedVocabulary) {
    pipeline();
    // same threads, different words: the rebuilt training vocabulary differs
    write(dir_ / "other.json", R"({"n_threads": 60, "courses": 2, "vocab_size": 40, "seed": 3})");
    ASSERT_EQ(run("synth --spec " + p("other.json") + " --out " + p("raw2.jsonl")), 0);
    ASSERT_EQ(run("preprocess --in " + p("raw2.jsonl") + " --out " + p("proc2.jsonl")), 0);
    EXPECT_EQ(run("eval --model " + p("m.ckpt") + " --corpus " + p("proc2.jsonl") + " --out-dir " + p("ev")), 3);
    EXPECT_FALSE(fs::exists(dir_ / "ev" / "metrics.json"));
}

TEST_F(CliRun, SeedFromEnvironment) {
    ASSERT_EQ(run("synth --spec " + p("spec.json") + " --out " + p("raw.jsonl")), 0);
    ASSERT_EQ(run("preprocess --in " + p("raw.jsonl") + " --out " + p("proc.jsonl")), 0);
    const std::string common = "train --variant hlstm --corpus " + p("proc.jsonl") +
                               " --hidden 2 --embed 2 --set min_count=1 --quiet --out ";
    ASSERT_EQ(run(common + p("flag.ckpt") + " --seed 9"), 0);
    ASSERT_EQ(std::system(("INTERVENTION_NET_SEED=9 " + std::string(IVNET_CLI_PATH) + " " + common + p("env.ckpt") +
                           " >/dev/null 2>&1")
                              .c_str()),
              0);
    EXPECT_EQ(slurp(p("flag.ckpt")), slurp(p("env.ckpt")));
    EXPECT_EQ(nlohmann::json::parse(slurp(p("env.ckpt.manifest.json")))["seed"], 9);
}
