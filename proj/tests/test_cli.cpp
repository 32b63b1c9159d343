#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "reguider/io.hpp"
#include "reguider/config.hpp"
#include "testutil.hpp"

namespace fs = std::filesystem;
using namespace reguider;

namespace {

struct CliResult {
    int code = -1;
    std::string output;
};

CliResult run_cli(const std::string& args, const testutil::TempDir& tmp) {
    static int counter = 0;
    const std::string out_file = tmp.file("cli_out_" + std::to_string(counter++) + ".txt");
    const std::string cmd = std::string(REGUIDER_CLI_PATH) + " " + args + " > " + out_file +
                            " 2>&1";
    const int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out_file);
    std::stringstream ss;
    ss << in.rdbuf();
    r.output = ss.str();
    return r;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// tiny but complete configuration shared by the CLI tests
std::string tiny_options(const std::string& out_dir) {
    return "'--dataset=synth:channels=2,n=400,periods=12|30,shift=200,noise=0.05,seed=3' "
           "--lookback=16 --horizons=8 --stride=1 --d_f=8 --d_g=8 "
           "--student_patch_len=4 --student_hidden=8 --teacher_patch_len=4 --teacher_hidden=8 "
           "--epochs=3 --teacher_epochs=2 --batch_size=16 --teacher_batch_size=16 "
           "--patience=0 --seeds=0,1 --out=" + out_dir;
}

}  // namespace

TEST_CASE("cli: usage and unknown commands exit with the config code") {
    testutil::TempDir tmp("cli_usage");
    CHECK(run_cli("", tmp).code == 2);
    CHECK(run_cli("frobnicate", tmp).code == 2);
    CHECK(run_cli("--help", tmp).code == 0);
    CHECK(run_cli("train --no_such_key=1 --dataset=synth", tmp).code == 2);
}

TEST_CASE("cli: gradcheck passes stock and fails at an impossible tolerance") {
    testutil::TempDir tmp("cli_gradcheck");
    CliResult ok = run_cli("gradcheck", tmp);
    CHECK(ok.code == 0);
    CHECK(ok.output.find("PASS euclidean") != std::string::npos);
    CHECK(ok.output.find("PASS cosine") != std::string::npos);
    CHECK(ok.output.find("PASS kl") != std::string::npos);
    // the report names the worst coordinate per metric
    CHECK(ok.output.find('[') != std::string::npos);

    CliResult strict = run_cli("gradcheck --tol=1e-12", tmp);
    CHECK(strict.code == 1);
    CHECK(strict.output.find("FAIL") != std::string::npos);
}

TEST_CASE("cli: pretrain-teacher writes a loadable frozen checkpoint deterministically") {
    testutil::TempDir tmp("cli_pretrain");
    const std::string base =
        "pretrain-teacher --dataset=synth:channels=1,n=300,periods=12,seed=5 "
        "--lookback=16 --horizons=8 --d_g=8 --teacher_patch_len=4 --teacher_hidden=8 "
        "--teacher_epochs=2 --teacher_batch_size=16 --teacher_seed=9 ";

    CliResult r1 = run_cli(base + "--out=" + tmp.file("runA"), tmp);
    REQUIRE(r1.code == 0);
    const std::string ckpt = tmp.file("runA") + "/teacher.rgm";
    REQUIRE(fs::exists(ckpt));
    TeacherHandle t = load_teacher(ckpt);
    CHECK(t.kind == TeacherKind::desk);
    CHECK(t.d_g == 8);
    CHECK(t.frozen_checksum == teacher_digest(t));
    CHECK(fs::exists(tmp.file("runA") + "/pretrain_log.txt"));

    CliResult r2 = run_cli(base + "--out=" + tmp.file("runB"), tmp);
    REQUIRE(r2.code == 0);
    CHECK(read_file(ckpt) == read_file(tmp.file("runB") + "/teacher.rgm"));

    // rerunning the same output dir without --overwrite is refused
    CliResult r3 = run_cli(base + "--out=" + tmp.file("runA"), tmp);
    CHECK(r3.code == 2);

    CliResult missing = run_cli(
        "pretrain-teacher --dataset=/definitely/not/here.csv --out=" + tmp.file("runC"), tmp);
    CHECK(missing.code == 2);
    CHECK(missing.output.find("/definitely/not/here.csv") != std::string::npos);
}

TEST_CASE("cli: train produces one run directory per (variant, T, seed) cell") {
    testutil::TempDir tmp("cli_train");
    const std::string out = tmp.file("runs");
    const std::string cmd = "train " + tiny_options(out) +
                            " --horizons=8,12 --teacher_source=pretrain --teacher_seed=4";

    CliResult r = run_cli(cmd, tmp);
    REQUIRE_MESSAGE(r.code == 0, r.output);

    std::vector<std::string> expected;
    for (const char* variant : {"base", "reguider_euclidean"})
        for (const char* t : {"8", "12"})
            for (const char* seed : {"0", "1"})
                expected.push_back(std::string(variant) + "_T" + t + "_seed" + seed);
    for (const std::string& dir : expected) {
        CAPTURE(dir);
        CHECK(fs::exists(out + "/" + dir + "/record.csv"));
        CHECK(fs::exists(out + "/" + dir + "/summary.txt"));
        CHECK(fs::exists(out + "/" + dir + "/model.rgm"));
        CHECK(fs::exists(out + "/" + dir + "/config.txt"));
    }

    // refuse to clobber without --overwrite, reproduce bytes with it
    const std::string probe = out + "/base_T8_seed0/record.csv";
    const std::string before = read_file(probe);
    CHECK(run_cli(cmd, tmp).code == 2);
    CliResult redo = run_cli(cmd + " --overwrite", tmp);
    REQUIRE(redo.code == 0);
    CHECK(read_file(probe) == before);
}

TEST_CASE("cli: base-only training needs no teacher configuration at all") {
    testutil::TempDir tmp("cli_base");
    const std::string out = tmp.file("runs");
    CliResult r = run_cli("train " + tiny_options(out), tmp);
    REQUIRE_MESSAGE(r.code == 0, r.output);
    CHECK(fs::exists(out + "/base_T8_seed0/summary.txt"));
    CHECK_FALSE(fs::exists(out + "/reguider_euclidean_T8_seed0"));

    KvMap summary = parse_config_file(out + "/base_T8_seed0/summary.txt");
    CHECK(summary.at("variant") == "base");
    CHECK(summary.at("teacher_checksum_before") == "0");
}

TEST_CASE("cli: report aggregates runs; means match a hand loop bit-for-bit") {
    testutil::TempDir tmp("cli_report");
    const std::string out = tmp.file("runs");
    CliResult train = run_cli("train " + tiny_options(out) +
                                  " --teacher_source=pretrain --jobs=2",
                              tmp);
    REQUIRE_MESSAGE(train.code == 0, train.output);

    CliResult rep = run_cli("report --out=" + out, tmp);
    REQUIRE_MESSAGE(rep.code == 0, rep.output);
    REQUIRE(fs::exists(out + "/report.csv"));

    std::ifstream csv(out + "/report.csv");
    std::string header, row, overread;
    REQUIRE(std::getline(csv, header));
    CHECK(header ==
          "dataset,T,base_mse_mean,base_mse_std,base_mae_mean,base_mae_std,"
          "reguider_mse_mean,reguider_mse_std,reguider_mae_mean,reguider_mae_std,"
          "improvement_pct_mean,improvement_pct_std");
    REQUIRE(std::getline(csv, row));
    CHECK_FALSE(std::getline(csv, overread));  // one (dataset, T) group

    // hand recomputation from the summaries, then identical 6-digit formatting
    double base_sum = 0, rg_sum = 0;
    std::size_t n_base = 0, n_rg = 0;
    for (const auto& entry : fs::directory_iterator(out)) {
        if (!entry.is_directory()) continue;
        KvMap kv = parse_config_file(entry.path().string() + "/summary.txt");
        const double mse = std::stod(kv.at("test_mse"));
        if (kv.at("variant") == "base") {
            base_sum += mse;
            ++n_base;
        } else {
            rg_sum += mse;
            ++n_rg;
        }
    }
    REQUIRE(n_base == 2);
    REQUIRE(n_rg == 2);
    char expect_base[32], expect_rg[32];
    std::snprintf(expect_base, sizeof expect_base, "%.6g", base_sum / 2.0);
    std::snprintf(expect_rg, sizeof expect_rg, "%.6g", rg_sum / 2.0);

    std::stringstream fields(row);
    std::vector<std::string> cols;
    std::string f;
    while (std::getline(fields, f, ',')) cols.push_back(f);
    REQUIRE(cols.size() == 12);
    CHECK(cols[0] == "synth");
    CHECK(cols[1] == "8");
    CHECK(std::abs(std::stod(cols[2]) - std::stod(expect_base)) <= 1e-12);
    CHECK(std::abs(std::stod(cols[6]) - std::stod(expect_rg)) <= 1e-12);

    // improvement sign: positive exactly when reguider mse is lower
    const double imp = std::stod(cols[10]);
    if (rg_sum < base_sum)
        CHECK(imp > 0.0);
    else if (rg_sum > base_sum)
        CHECK(imp < 0.0);

    CHECK(run_cli("report --out=" + tmp.file("empty_dir"), tmp).code == 2);
}

TEST_CASE("cli: metric sweep yields the per-metric table covering all three metrics") {
    testutil::TempDir tmp("cli_sweep");
    const std::string out = tmp.file("runs");
    CliResult train = run_cli("train " + tiny_options(out) +
                                  " --seeds=0 --teacher_source=pretrain --sweep_metrics",
                              tmp);
    REQUIRE_MESSAGE(train.code == 0, train.output);
    for (const char* metric : {"euclidean", "cosine", "kl"})
        CHECK(fs::exists(out + "/reguider_" + std::string(metric) + "_T8_seed0/summary.txt"));

    CliResult rep = run_cli("report --out=" + out, tmp);
    REQUIRE_MESSAGE(rep.code == 0, rep.output);
    REQUIRE(fs::exists(out + "/report_metrics.csv"));
    const std::string table = read_file(out + "/report_metrics.csv");
    CHECK(table.find("euclidean") != std::string::npos);
    CHECK(table.find("cosine") != std::string::npos);
    CHECK(table.find("kl") != std::string::npos);
}

TEST_CASE("cli: export-embeddings writes an RGE1 file for the chosen split") {
    testutil::TempDir tmp("cli_export");
    const std::string out = tmp.file("emb.rge");
    CliResult r = run_cli("export-embeddings " + tiny_options(tmp.file("unused")) +
                              " --teacher_source=pretrain --export_split=test --export_out=" + out,
                          tmp);
    REQUIRE_MESSAGE(r.code == 0, r.output);
    EmbeddingCache cache = read_embedding_cache(out);
    CHECK(cache.records.size() > 0);
    CHECK(cache.d_f == 8);
    CHECK(cache.d_g == 8);
    CHECK(r.output.find(std::to_string(cache.records.size())) != std::string::npos);

    CHECK(run_cli("export-embeddings " + tiny_options(tmp.file("unused")) + " --export_out=" + out,
                  tmp)
              .code == 2);  // refuses to clobber
}

TEST_CASE("cli: config file keys are applied and overridden by flags") {
    testutil::TempDir tmp("cli_config");
    const std::string cfg_path = tmp.file("exp.cfg");
    std::ofstream(cfg_path) << "# comment line\n"
                            << "dataset=synth:channels=1,n=200,periods=10,seed=2\n"
                            << "lookback=8\nhorizons=4\nd_f=4\nepochs=1\nbatch_size=8\n"
                            << "patience=0\nseeds=0\n"
                            << "out=" << tmp.file("from_file") << "\n";

    CliResult r1 = run_cli("train --config=" + cfg_path, tmp);
    REQUIRE_MESSAGE(r1.code == 0, r1.output);
    CHECK(fs::exists(tmp.file("from_file") + "/base_T4_seed0/summary.txt"));

    // CLI flag beats the file
    CliResult r2 = run_cli("train --config=" + cfg_path + " --out=" + tmp.file("cli_wins"), tmp);
    REQUIRE_MESSAGE(r2.code == 0, r2.output);
    CHECK(fs::exists(tmp.file("cli_wins") + "/base_T4_seed0/summary.txt"));
}
