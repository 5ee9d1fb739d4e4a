#include <doctest.h>

#include <sys/wait.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string err;
};

const fs::path& work_dir() {
    static const fs::path dir = [] {
        const fs::path d = fs::temp_directory_path() / ("emgnn_cli_" + std::to_string(::getpid()));
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    static const struct Cleanup {
        ~Cleanup() { fs::remove_all(dir); }
    } cleanup;
    return dir;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

Result run(const std::string& args) {
    const fs::path err = work_dir() / "stderr.txt";
    const std::string cmd = std::string(EMGNN_CLI_PATH) + " --threads 1 --log-level error " + args + " > /dev/null 2> " +
                            err.string();
    const int status = std::system(cmd.c_str());
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, slurp(err)};
}

// Synthetic dataset plus a short-training config, built once.
const fs::path& dataset() {
    static const fs::path dir = [] {
        const fs::path d = work_dir() / "data";
        REQUIRE(run("--seed 2024 --out " + d.string() + " synth").code == 0);
        json cfg = json::parse(slurp(d / "config.json"));
        cfg["training"]["epochs"] = 80;
        std::ofstream(d / "fast.json") << cfg.dump(2);
        return d;
    }();
    return dir;
}

std::string config() { return "--config " + (dataset() / "fast.json").string(); }

const fs::path& trained() {
    static const fs::path out = [] {
        const fs::path o = work_dir() / "run1";
        REQUIRE(run(config() + " --out " + o.string() + " train").code == 0);
        return o;
    }();
    return out;
}

}  // namespace

TEST_CASE("synth is deterministic") {
    const fs::path again = work_dir() / "data2";
    REQUIRE(run("--seed 2024 --out " + again.string() + " synth").code == 0);
    for (const char* f : {"layer_0.tsv", "layer_1.tsv", "features.csv", "labels.tsv", "gene_sets.gmt", "config.json"})
        CHECK(slurp(dataset() / f) == slurp(again / f));
    CHECK(run("--out " + again.string() + " synth").code == 1);  // seed required
}

TEST_CASE("train writes its outputs and reruns byte-identically") {
    for (const char* f : {"checkpoint.emgnn", "train_report.json", "split.json", "effective_config.json"})
        CHECK(fs::exists(trained() / f));
    const fs::path second = work_dir() / "run2";
    REQUIRE(run(config() + " --out " + second.string() + " train").code == 0);
    CHECK(slurp(trained() / "train_report.json") == slurp(second / "train_report.json"));
    CHECK(slurp(trained() / "checkpoint.emgnn") == slurp(second / "checkpoint.emgnn"));
    CHECK(slurp(trained() / "split.json") == slurp(second / "split.json"));
}

TEST_CASE("config errors name the field") {
    json cfg = json::parse(slurp(dataset() / "config.json"));
    cfg["data"]["features"] = "nowhere.csv";
    const fs::path bad = dataset() / "bad.json";
    std::ofstream(bad) << cfg.dump();
    const Result r = run("--config " + bad.string() + " --out " + (work_dir() / "bad").string() + " train");
    CHECK(r.code == 1);
    CHECK(r.err.find("data.features") != std::string::npos);

    CHECK(run("--config " + (work_dir() / "absent.json").string() + " train").code == 1);
    CHECK(run(config() + " train --no-such-flag").code == 1);
    CHECK(run("").code == 1);
}

TEST_CASE("evaluate and explain") {
    const std::string base = config() + " --out " + trained().string();
    REQUIRE(run(base + " evaluate").code == 0);
    CHECK(fs::exists(trained() / "predictions.csv"));
    const json ev = json::parse(slurp(trained() / "evaluation.json"));
    CHECK(ev.contains("test_auprc"));

    REQUIRE(run(base + " explain --genes G006 --steps 16").code == 0);
    const std::string first = slurp(trained() / "explain" / "G006.json");
    const json j = json::parse(first);
    CHECK(j["meta_edges"]["layers"].size() == 2);
    REQUIRE(run(base + " explain --genes G006 --steps 16").code == 0);
    CHECK(slurp(trained() / "explain" / "G006.json") == first);

    const Result unknown = run(base + " explain --genes G0066");
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("nearest") != std::string::npos);
    CHECK(unknown.err.find("G006") != std::string::npos);
}

TEST_CASE("discover and gsea") {
    const std::string base = config() + " --out " + trained().string();
    REQUIRE(run(base + " discover --threshold 0.5").code == 0);
    std::ifstream cand(trained() / "candidates.csv");
    std::string header;
    std::getline(cand, header);
    CHECK(header.find("0.5") != std::string::npos);
    CHECK(header.find("override") != std::string::npos);
    REQUIRE(run(base + " discover").code == 0);

    REQUIRE(run(base + " gsea --permutations 200").code == 0);
    const std::string csv = slurp(trained() / "enrichment.csv");
    REQUIRE(run(base + " gsea --permutations 200").code == 0);
    CHECK(slurp(trained() / "enrichment.csv") == csv);
    CHECK(csv.find("PLANTED_POSITIVES") != std::string::npos);

    REQUIRE(run(base + " gsea --permutations 0").code == 0);
    const std::string bare = slurp(trained() / "enrichment.csv");
    CHECK(bare.find(",NA,NA,") != std::string::npos);

    std::ofstream(work_dir() / "empty.gmt") << "S\td\tnot_a_gene\n";
    CHECK(run(base + " gsea --gene-sets " + (work_dir() / "empty.gmt").string()).code == 2);
}

TEST_CASE("ablate with an identity perturbation reproduces the baseline") {
    const fs::path out = work_dir() / "ablate";
    REQUIRE(run(config() + " --out " + out.string() + " ablate --modes edge_removal --fraction 0 --seeds 3").code == 0);
    const json r = json::parse(slurp(out / "ablation_report.json"));
    REQUIRE(r["modes"].size() == 1);
    CHECK(r["modes"][0]["auprc"][0] == r["unperturbed"]["auprc"][0]);
    CHECK(r["modes"][0]["delta_mean"] == 0.0);
}
