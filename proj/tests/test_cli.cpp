// End-to-end exercises of the command-line surface: the full
// generate / train / stream / evaluate chain, config rejection at parse time,
// replay determinism, the sweep command, and live mode on a piped stream.

#include "spdmotion/io.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>

#ifndef SPDMOTION_CLI_PATH
#error "SPDMOTION_CLI_PATH must point at the built binary"
#endif

namespace fs = std::filesystem;
using namespace spdmotion;

namespace {

struct CliRun {
    int exit_code = -1;
    std::string out;
    std::string err;
};

struct CliFixture {
    fs::path dir;

    CliFixture() {
        dir = fs::temp_directory_path() / ("spdmotion_cli_" + std::to_string(::getpid()));
        fs::create_directories(dir);
    }
    ~CliFixture() { fs::remove_all(dir); }

    std::string path(const std::string& name) const { return (dir / name).string(); }

    CliRun run(const std::string& args, const std::string& stdin_file = "") const {
        const std::string out_file = path("_stdout"), err_file = path("_stderr");
        std::string cmd = std::string(SPDMOTION_CLI_PATH) + " " + args;
        if (!stdin_file.empty()) cmd += " < " + stdin_file;
        cmd += " > " + out_file + " 2> " + err_file;
        const int status = std::system(cmd.c_str());
        CliRun r;
        r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
        r.out = read_text_file(out_file);
        r.err = read_text_file(err_file);
        return r;
    }
};

}  // namespace

TEST_CASE("cli pipeline: gen-synth, train, run-online, evaluate, sweep", "[cli][slow]") {
    CliFixture cli;
    const std::string data = cli.path("data");
    const std::string tiny =
        " --feature-dim 8 --spdc-dim 6 --epochs 2 --pairs 60 --lr 0.02";

    REQUIRE(cli.run("gen-synth --out " + data +
                    " --count 5 --classes 3 --segments 4 --noise 0.04 --seed 5")
                .exit_code == 0);
    REQUIRE(fs::exists(data + "/stream_004.seq"));
    REQUIRE(fs::exists(data + "/scheme.json"));

    REQUIRE(cli.run("train-detector --data " + data + " --out " + cli.path("det.model") +
                    " --ws 12 --windows-per-stream 20 --seed 1" + tiny)
                .exit_code == 0);
    REQUIRE(cli.run("train-classifier --data " + data + " --out " + cli.path("cls.model") +
                    " --interp-length 24 --seed 2" + tiny)
                .exit_code == 0);

    SECTION("run-online and evaluate produce a full metrics report") {
        const CliRun run = cli.run("run-online --detector " + cli.path("det.model") +
                                   " --classifier " + cli.path("cls.model") + " --input " + data +
                                   "/stream_000.seq --out " + cli.path("events.jsonl") +
                                   " --refresh 6 --tests 3");
        REQUIRE(run.exit_code == 0);
        const auto events = read_event_log(cli.path("events.jsonl"));
        CHECK(!events.empty());

        const CliRun eval = cli.run("evaluate --events " + cli.path("events.jsonl") +
                                    " --truth " + data + "/stream_000.json --mode binary --out " +
                                    cli.path("report.json"));
        REQUIRE(eval.exit_code == 0);
        const nlohmann::json report = nlohmann::json::parse(read_text_file(cli.path("report.json")));
        for (const char* key : {"jaccard", "f1", "sl_score", "el_score", "detection_rate",
                                "fp_rate", "prediction_accuracy", "detection_accuracy"}) {
            REQUIRE(report.contains(key));
            CHECK(report.at(key).get<double>() >= 0.0);
        }
    }

    SECTION("replay runs are byte-identical") {
        const std::string base = "run-online --detector " + cli.path("det.model") +
                                 " --classifier " + cli.path("cls.model") + " --input " + data +
                                 "/stream_001.seq --refresh 6 --tests 3 --out ";
        REQUIRE(cli.run(base + cli.path("a.jsonl")).exit_code == 0);
        REQUIRE(cli.run(base + cli.path("b.jsonl")).exit_code == 0);
        CHECK(read_text_file(cli.path("a.jsonl")) == read_text_file(cli.path("b.jsonl")));
    }

    SECTION("config violations are rejected at parse time with the named constraint") {
        const CliRun bad = cli.run("run-online --detector " + cli.path("det.model") +
                                   " --classifier " + cli.path("cls.model") + " --input " + data +
                                   "/stream_000.seq --refresh 10 --tests 3");
        CHECK(bad.exit_code == 1);
        CHECK(bad.err.find("error:") == 0);
        CHECK(bad.err.find("r <= 0.3*cr") != std::string::npos);

        const CliRun bad_te = cli.run("run-online --detector " + cli.path("det.model") +
                                      " --classifier " + cli.path("cls.model") + " --input " +
                                      data + "/stream_000.seq --refresh 6 --tests 6 --early " +
                                      "--deadline 1.0");
        CHECK(bad_te.exit_code == 1);
        CHECK(bad_te.err.find("te <= (T/r)*cr") != std::string::npos);
    }

    SECTION("sweep writes one row per grid point") {
        const CliRun sweep = cli.run("sweep --data " + data + " --classifier " +
                                     cli.path("cls.model") + " --detector 12=" +
                                     cli.path("det.model") + " --te-list 2,3 --refresh 6 --out " +
                                     cli.path("sweep.csv"));
        REQUIRE(sweep.exit_code == 0);
        const std::string csv = read_text_file(cli.path("sweep.csv"));
        CHECK(csv.rfind("ws,te,deadline_s,", 0) == 0);
        CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);  // header + 2 rows
    }

    SECTION("live mode consumes a piped frame stream") {
        // the sequence body doubles as the line-delimited live input; header
        // lines start with '#' and are skipped by the reader
        const CliRun live = cli.run("run-online --detector " + cli.path("det.model") +
                                        " --classifier " + cli.path("cls.model") +
                                        " --live --capture-rate 30 --refresh 6 --tests 3 --out " +
                                        cli.path("live.jsonl"),
                                    data + "/stream_000.seq");
        REQUIRE(live.exit_code == 0);
        CHECK(!read_event_log(cli.path("live.jsonl")).empty());
    }

    SECTION("early classification flag requires a deadline") {
        const CliRun bad = cli.run("run-online --detector " + cli.path("det.model") +
                                   " --classifier " + cli.path("cls.model") + " --input " + data +
                                   "/stream_000.seq --early");
        CHECK(bad.exit_code == 1);
        CHECK(bad.err.find("--deadline") != std::string::npos);
    }
}

TEST_CASE("cli reports missing inputs cleanly", "[cli]") {
    CliFixture cli;
    const CliRun run = cli.run("evaluate --events /nonexistent.jsonl --truth /nonexistent.json");
    CHECK(run.exit_code == 1);
    CHECK(run.err.rfind("error:", 0) == 0);
}
