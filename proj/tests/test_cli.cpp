#include "doctest.h"

#include <sys/wait.h>

#include <array>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code = -1;
    std::string output;  // stdout and stderr together
};

Outcome forge(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + HRA_FORGE_BIN + std::string(" ") + args + " 2>&1";
    Outcome o;
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe) != nullptr) o.output += buf.data();
    const int status = pclose(pipe);
    o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return o;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("hra_cli_test_" + name);
    fs::remove_all(dir);
    return dir;
}

void write(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("quantify") {
    auto o = forge("quantify --occurred 10 --potential 20");
    CHECK(o.code == 0);
    CHECK(o.output.find("composite_hep 0.5\n") != std::string::npos);

    o = forge("quantify --occurred 10 --potential 20 --level \"A=Expansive time\"");
    CHECK(o.code == 0);
    CHECK(o.output.find("psf_total 0.01\n") != std::string::npos);
    const auto pos = o.output.find("composite_hep ");
    REQUIRE(pos != std::string::npos);
    CHECK(std::stod(o.output.substr(pos + 14)) == doctest::Approx(0.005 / 0.505).epsilon(1e-15));

    o = forge("quantify --occurred 1 --potential 100 --level \"A=Inadequate time\"");
    CHECK(o.code == 0);
    CHECK(o.output.find("composite_hep 1\n") != std::string::npos);

    o = forge("quantify --occurred 1 --potential 4 --multiplier B=2 --multiplier C=5");
    CHECK(o.output.find("psf_total 10\n") != std::string::npos);
}

TEST_CASE("quantify input errors exit 2") {
    auto o = forge("quantify --occurred 10 --potential 20 --level \"A=Lots of time\"");
    CHECK(o.code == 2);
    CHECK(o.output.find("Lots of time") != std::string::npos);
    CHECK(forge("quantify --occurred 30 --potential 20").code == 2);
    CHECK(forge("quantify --occurred 1 --potential 2 --level \"B=High\"").code == 2);
    CHECK(forge("quantify --occurred 1 --potential 2 --tables /nonexistent/table.csv").code == 2);
    CHECK(forge("quantify --potential 2").code == 2);
    CHECK(forge("").code == 2);
    CHECK(forge("frobnicate").code == 2);
}

TEST_CASE("train, design, anova and screen") {
    const auto dir = scratch("steps");
    fs::create_directories(dir);
    write(dir / "train.cfg", "epochs=1500\nreplications=2\n");
    auto o = forge("train --config " + (dir / "train.cfg").string() + " --psfs ACDH --out " + (dir / "net").string());
    REQUIRE(o.code == 0);
    CHECK(fs::exists(dir / "net" / "predictor.txt"));
    CHECK(o.output.find("psfs ACDH") != std::string::npos);

    o = forge("design --predictor " + (dir / "net" / "predictor.txt").string() + " --generate --out " +
              (dir / "design.csv").string());
    REQUIRE(o.code == 0);
    CHECK(o.output.find("runs 30 factors ACDH") != std::string::npos);  // 16 + 8 + 6

    o = forge("anova --design " + (dir / "design.csv").string() + " --out " + (dir / "anova").string());
    CHECK(o.code == 0);
    CHECK(fs::exists(dir / "anova" / "anova.csv"));

    o = forge("screen --model \"1, A, B, C, D, F, G, H, AD, AF, BD, BF, BG, DF, C^2, D^2\" --out " +
              (dir / "screen").string());
    CHECK(o.code == 0);
    CHECK(o.output.find("eliminated E\n") != std::string::npos);
    CHECK(slurp(dir / "screen" / "screening.csv").find("Procedures,E,eliminated") != std::string::npos);

    o = forge("anova --model \"1, A, AD\"");
    CHECK(o.code == 2);

    // Bundled design against a 4-input predictor: factor mismatch.
    o = forge("design --predictor " + (dir / "net" / "predictor.txt").string() + " --out " + (dir / "x.csv").string());
    CHECK(o.code == 2);
    fs::remove_all(dir);
}

TEST_CASE("pipeline on the bundled fixtures") {
    const auto a = scratch("pipe_a");
    const auto b = scratch("pipe_b");
    auto o = forge("pipeline --replications 3 --out " + a.string());
    CHECK((o.code == 0 || o.code == 3));
    const auto summary = slurp(a / "summary.csv");
    std::istringstream lines(summary);
    std::string header, first;
    std::getline(lines, header);
    std::getline(lines, first);
    // Last two columns: eliminated, retained.
    const auto cut = first.rfind(',');
    const auto eliminated = first.substr(first.rfind(',', cut - 1) + 1, cut - first.rfind(',', cut - 1) - 1);
    CHECK(first.rfind("1,ABCDEFGH,", 0) == 0);
    CHECK(eliminated.find('E') != std::string::npos);

    o = forge("pipeline --replications 3 --out " + b.string(), "HRA_FORGE_THREADS=1");
    for (const auto& entry : fs::recursive_directory_iterator(a)) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a);
        CHECK_MESSAGE(slurp(entry.path()) == slurp(b / rel), rel.string());
    }

    o = forge("report --out " + a.string());
    CHECK(o.code == 0);
    CHECK(fs::exists(a / "report" / "hep_01.svg"));
    fs::remove_all(a);
    fs::remove_all(b);
}

TEST_CASE("pipeline exit codes") {
    const auto dir = scratch("codes");
    CHECK(forge("pipeline --max-iterations 0 --out " + dir.string()).code == 2);
    CHECK(forge("pipeline --alpha 2 --out " + dir.string()).code == 2);
    CHECK(forge("pipeline --observations /nonexistent.csv --out " + dir.string()).code == 2);
    CHECK(forge("pipeline --out " + dir.string(), "HRA_FORGE_THREADS=zero").code == 2);
    fs::create_directories(dir);
    write(dir / "zero.cfg", "max_iterations=0\n");
    CHECK(forge("pipeline --config " + (dir / "zero.cfg").string() + " --out " + (dir / "r").string()).code == 2);

    // A single allowed iteration that eliminates something stops early.
    write(dir / "one.cfg", "max_iterations=1\nepochs=1500\nreplications=2\ninitial_model=" +
                               std::string("1, A, B, C, D, F, G, H, AD, AF, BD, BF, BG, DF, C^2, D^2") + "\n");
    auto o = forge("pipeline --config " + (dir / "one.cfg").string() + " --out " + (dir / "r").string());
    CHECK(o.code == 3);
    CHECK(slurp(dir / "r" / "result.txt").find("reason max-iterations") != std::string::npos);

    // Rank-deficient supplied design: numerical failure, exit 4.
    std::string design = "std,run,A,B,C,D,E,F,G,H,reliability\n";
    for (int i = 0; i < 20; ++i) {
        const std::string v = std::to_string(0.1 + 0.04 * i);
        design += std::to_string(i + 1) + "," + std::to_string(i + 1) + "," + v + "," + v;
        for (int j = 2; j < 8; ++j) design += "," + std::to_string(0.5 + 0.3 * std::sin(i * (j + 1)));
        design += "," + std::to_string(50 + i) + "\n";
    }
    write(dir / "bad_design.csv", design);
    write(dir / "bad.cfg", "epochs=500\nreplications=1\ninitial_model=1, A, B\n");
    o = forge("pipeline --design " + (dir / "bad_design.csv").string() + " --config " + (dir / "bad.cfg").string() +
              " --out " + (dir / "bad").string());
    CHECK(o.code == 4);
    CHECK(fs::exists(dir / "bad" / "summary.csv"));

    o = forge("report --out " + (dir / "missing").string());
    CHECK(o.code == 2);
    CHECK(o.output.find("summary.csv") != std::string::npos);
    fs::remove_all(dir);
}
