#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "imm/data.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;

namespace {

int run_cmd(const std::string& cmd) {
    const int st = std::system(cmd.c_str());
    if (st == -1) return -1;
    if (WIFEXITED(st)) return WEXITSTATUS(st);
    return -2;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

const std::string kBin = IMM_BIN;
const std::string kDir = "cli_tmp";

void write_config() {
    fs::create_directories(kDir);
    std::ofstream cfg(kDir + "/run.ini");
    cfg << "seed=7\n"
        << "out_dir=" << kDir << "/out\n"
        << "[train]\n"
        << "batch_size=8\n"
        << "particles=4\n"
        << "steps=25\n"
        << "eval_every=10\n";
}

int count_lines(const std::string& text, bool eval_lines) {
    std::istringstream in(text);
    std::string line;
    int n = 0;
    while (std::getline(in, line))
        if ((line.rfind("eval ", 0) == 0) == eval_lines) ++n;
    return n;
}

}  // namespace

TEST_CASE("train produces a metrics log and a final checkpoint, reproducibly") {
    write_config();
    REQUIRE(run_cmd(kBin + " train " + kDir + "/run.ini > " + kDir + "/train.log 2>&1") == 0);
    REQUIRE(fs::exists(kDir + "/out/metrics.txt"));
    REQUIRE(fs::exists(kDir + "/out/ckpt_final.imm"));

    const std::string metrics1 = slurp(kDir + "/out/metrics.txt");
    const std::string ckpt1 = slurp(kDir + "/out/ckpt_final.imm");
    CHECK(count_lines(metrics1, false) == 25);
    CHECK(count_lines(metrics1, true) == 3);  // steps 10, 20 and the final step
    CHECK(metrics1.rfind("1 ", 0) == 0);

    // Re-running the identical config overwrites with byte-identical outputs.
    REQUIRE(run_cmd(kBin + " train " + kDir + "/run.ini > /dev/null 2>&1") == 0);
    CHECK(slurp(kDir + "/out/metrics.txt") == metrics1);
    CHECK(slurp(kDir + "/out/ckpt_final.imm") == ckpt1);
}

TEST_CASE("sample writes a readable file; eval scores it") {
    REQUIRE(fs::exists(kDir + "/out/ckpt_final.imm"));  // produced by the train case
    REQUIRE(run_cmd(kBin + " sample " + kDir + "/out/ckpt_final.imm --n 64 --steps 2 --seed 3 --out " +
                    kDir + "/out/s.txt > /dev/null 2>&1") == 0);
    imm::Mat S;
    std::vector<int> labels;
    imm::read_samples(kDir + "/out/s.txt", S, labels);
    CHECK(S.rows() == 64);
    CHECK(S.cols() == 2);
    CHECK(labels.size() == 64);  // class-conditional by default

    REQUIRE(run_cmd(kBin + " sample " + kDir + "/out/ckpt_final.imm --n 16 --uncond --sampler restart --out " +
                    kDir + "/out/su.txt > /dev/null 2>&1") == 0);
    imm::Mat Su;
    std::vector<int> lu;
    imm::read_samples(kDir + "/out/su.txt", Su, lu);
    CHECK(Su.rows() == 16);
    CHECK(lu.empty());

    REQUIRE(run_cmd(kBin + " eval " + kDir + "/out/s.txt --n-ref 200 --seed 5 > " + kDir + "/out/eval.txt 2>&1") ==
            0);
    const std::string rep = slurp(kDir + "/out/eval.txt");
    CHECK(rep.find("mmd2=") != std::string::npos);
    CHECK(rep.find("mmd2_baseline=") != std::string::npos);
    CHECK(rep.find("sliced_w1=") != std::string::npos);
    CHECK(rep.find("mode_counts=") != std::string::npos);
    CHECK(rep.find("n_gen=64") != std::string::npos);
}

TEST_CASE("exit codes: 1 for bad input, 2 for runtime faults") {
    CHECK(run_cmd(kBin + " train " + kDir + "/does_not_exist.ini > /dev/null 2>&1") == 1);

    {
        std::ofstream bad(kDir + "/garbage.imm");
        bad << "this is not a checkpoint";
    }
    CHECK(run_cmd(kBin + " sample " + kDir + "/garbage.imm > /dev/null 2>&1") == 2);
    CHECK(run_cmd(kBin + " eval " + kDir + "/missing_samples.txt > /dev/null 2>&1") == 2);
    CHECK(run_cmd(kBin + " sample " + kDir + "/out/ckpt_final.imm --sampler warp > /dev/null 2>&1") == 1);
    CHECK(run_cmd(kBin + " frobnicate > /dev/null 2>&1") == 1);
    CHECK(run_cmd(kBin + " verify --filter bogus_suite > /dev/null 2>&1") == 1);
    CHECK(run_cmd(kBin + " --help > /dev/null 2>&1") == 0);

    // Invalid config contents (unknown key) also exit 1.
    {
        std::ofstream cfg(kDir + "/bad.ini");
        cfg << "zeta=1\n";
    }
    CHECK(run_cmd(kBin + " train " + kDir + "/bad.ini > /dev/null 2>&1") == 1);
}

TEST_CASE("verification suites run through the CLI") {
    REQUIRE(run_cmd(kBin + " verify --filter failure_case > " + kDir + "/verify.txt 2>&1") == 0);
    const std::string out = slurp(kDir + "/verify.txt");
    CHECK(out.find("PASS failure_case") != std::string::npos);
    fs::remove_all(kDir);
}
