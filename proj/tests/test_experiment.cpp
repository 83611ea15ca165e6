#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "percolab/experiment.hpp"
#include "percolab/rand.hpp"

#include "json.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

using namespace percolab;
using nlohmann::json;

namespace {

ExperimentConfig cfg_from(const std::string& text) { return ExperimentConfig::parse_text(text); }

const std::string kTauConfig = "[graph]\n"
                               "spec = regular_tree(3)\n"
                               "radius = 6\n"
                               "[process]\n"
                               "kind = bernoulli\n"
                               "p = 0.7\n"
                               "[run]\n"
                               "operation = tau_estimate\n"
                               "n = 400\n"
                               "seed = 11\n"
                               "[op]\n"
                               "x = a\n"
                               "y = ab\n";

std::string field_of(const std::function<void()>& call) {
    try {
        call();
    } catch (const ValidationError& e) {
        return e.field;
    }
    return "<no error>";
}

} // namespace

// ---- parsing and canonical form ----

TEST_CASE("config parser: sections, comments, trimming") {
    const ExperimentConfig cfg = cfg_from("# leading comment\n"
                                          "[graph]\n"
                                          "  spec = regular_tree(3)   ; trailing comment\n"
                                          "\n"
                                          "radius=6\n"
                                          "[run]\n"
                                          "operation = tau_estimate\n");
    REQUIRE(cfg.find("graph", "spec") != nullptr);
    CHECK(*cfg.find("graph", "spec") == "regular_tree(3)");
    CHECK(*cfg.find("graph", "radius") == "6");
    CHECK(cfg.find("graph", "missing") == nullptr);
    CHECK(cfg.find("nope", "spec") == nullptr);
}

TEST_CASE("config parser: syntax errors carry field paths") {
    CHECK(field_of([] { cfg_from("[graph\nspec = x\n"); }) == "config.line1");
    CHECK(field_of([] { cfg_from("spec = x\n"); }) == "config.line1");
    CHECK(field_of([] { cfg_from("[graph]\nno equals sign\n"); }) == "config.line2");
    CHECK(field_of([] { cfg_from("[graph]\nspec =\n"); }) == "graph.spec");
    CHECK(field_of([] { cfg_from("[graph]\nspec = a\nspec = b\n"); }) == "graph.spec");
}

TEST_CASE("canonical form ignores layout; hash tracks content") {
    const ExperimentConfig a = cfg_from("[run]\nseed = 1\nn = 5\n[graph]\nspec = lattice(2)\n");
    const ExperimentConfig b =
        cfg_from("# comment\n[graph]\nspec  =  lattice(2)\n\n[run]\n  n=5\n  seed=1\n");
    CHECK(a.canonical() == b.canonical());
    CHECK(a.hash() == b.hash());
    CHECK(a.hash().size() == 16);

    const ExperimentConfig c = cfg_from("[run]\nseed = 2\nn = 5\n[graph]\nspec = lattice(2)\n");
    CHECK(a.hash() != c.hash());
}

// ---- validation ----

TEST_CASE("validation names the offending field") {
    auto broken = [&](const std::string& from, const std::string& to) {
        std::string text = kTauConfig;
        const std::size_t at = text.find(from);
        REQUIRE(at != std::string::npos);
        text.replace(at, from.size(), to);
        return cfg_from(text);
    };

    // The documented example: an out-of-range probability names "p".
    const std::string p_field =
        field_of([&] { validate_run(broken("p = 0.7", "p = 1.5")); });
    CHECK(p_field == "process.p");

    CHECK(field_of([&] { validate_run(broken("n = 400", "n = 0")); }) == "run.n");
    CHECK(field_of([&] { validate_run(broken("n = 400", "n = many")); }) == "run.n");
    CHECK(field_of([&] { validate_run(broken("seed = 11", "seed = -4")); }) == "run.seed");
    CHECK(field_of([&] { validate_run(broken("operation = tau_estimate",
                                             "operation = sharpen")); }) == "run.operation");
    CHECK(field_of([&] { validate_run(broken("spec = regular_tree(3)", "spec = blob(7)")); }) ==
          "graph.spec");
    CHECK(field_of([&] { validate_run(broken("y = ab", "y = zz")); }) == "op.y");
    CHECK(field_of([&] { validate_run(broken("x = a\n", "")); }) == "op.x");
    CHECK(field_of([&] { validate_run(broken("kind = bernoulli", "kind = osmosis")); }) ==
          "process.kind");

    // Unknown keys and sections are rejected, not ignored.
    CHECK(field_of([&] { validate_run(cfg_from(kTauConfig + "[plotting]\ncolor = red\n")); }) ==
          "plotting");
    CHECK(field_of([&] {
              validate_run(cfg_from(std::string(kTauConfig) + "[output]\nfolder = x\n"));
          }) == "output.folder");
    CHECK(field_of([&] { validate_run(cfg_from(std::string(kTauConfig) + "[sweep]\nparam = "
                                               "process.p\nvalues = 0.5\n")); }) == "sweep");
}

TEST_CASE("torus specs take no radius; mtp_check demands a torus") {
    const std::string torus = "[graph]\n"
                              "spec = torus(2,4)\n"
                              "[process]\n"
                              "kind = bernoulli\n"
                              "p = 0.55\n"
                              "[run]\n"
                              "operation = mtp_check\n"
                              "n = 1\n"
                              "seed = 3\n"
                              "[op]\n"
                              "kernel = offset(1,1)\n";
    CHECK_NOTHROW(validate_run(cfg_from(torus)));

    std::string with_radius = torus;
    with_radius.replace(with_radius.find("spec = torus(2,4)\n"), 18,
                        "spec = torus(2,4)\nradius = 3\n");
    CHECK(field_of([&] { validate_run(cfg_from(with_radius)); }) == "graph.radius");

    std::string on_tree = torus;
    on_tree.replace(on_tree.find("spec = torus(2,4)\n"), 18,
                    "spec = regular_tree(3)\nradius = 4\n");
    CHECK(field_of([&] { validate_run(cfg_from(on_tree)); }) == "graph.spec");

    std::string bad_kernel = torus;
    bad_kernel.replace(bad_kernel.find("kernel = offset(1,1)"), 20, "kernel = teleport");
    CHECK(field_of([&] { validate_run(cfg_from(bad_kernel)); }) == "op.kernel");
}

// ---- run ----

TEST_CASE("run: tau_estimate record is complete and deterministic") {
    const ExperimentConfig cfg = cfg_from(kTauConfig);
    const RunOutput a = run_experiment(cfg);
    CHECK(a.exit_code == 0);
    REQUIRE(a.records.size() == 1);

    const json rec = json::parse(a.records[0]);
    CHECK(rec["config_hash"] == cfg.hash());
    CHECK(rec["version"] == kVersion);
    CHECK(rec["operation"] == "tau_estimate");
    CHECK(rec["seed"] == 11);
    CHECK(rec["point"] == 0);
    CHECK(rec["params"]["process.p"] == "0.7");
    const double value = rec["payload"]["value"].get<double>();
    CHECK(value >= 0.0);
    CHECK(value <= 1.0);
    CHECK(rec["payload"]["n"] == 400);
    CHECK(rec["payload"]["x"] == "a");
    CHECK(!rec.contains("grid"));
    for (const auto& [key, entry] : rec.items()) {
        (void)entry;
        CHECK(key != "started_at"); // timestamps live only in the manifest
    }

    const RunOutput b = run_experiment(cfg);
    CHECK(a.records == b.records); // byte-identical payloads
}

TEST_CASE("run: unique-path connectivity at p = 1 is exact") {
    std::string text = kTauConfig;
    text.replace(text.find("p = 0.7"), 7, "p = 1.0");
    const RunOutput out = run_experiment(cfg_from(text));
    CHECK(json::parse(out.records[0])["payload"]["value"] == 1.0);
}

TEST_CASE("run: inconclusive-only outcomes exit 3") {
    const RunOutput out = run_experiment(cfg_from("[graph]\n"
                                                  "spec = regular_tree(3)\n"
                                                  "radius = 6\n"
                                                  "[process]\n"
                                                  "kind = bernoulli\n"
                                                  "p = 0.2\n"
                                                  "[run]\n"
                                                  "operation = indistinguishability\n"
                                                  "n = 10\n"
                                                  "seed = 7\n"
                                                  "[op]\n"
                                                  "statistic = density\n"));
    CHECK(out.exit_code == 3);
    CHECK(out.inconclusive == 1);
    CHECK(json::parse(out.records[0])["payload"]["verdict"] == "inconclusive");
}

TEST_CASE("run: mass-transport kernels balance through the runner") {
    const RunOutput out = run_experiment(cfg_from("[graph]\n"
                                                  "spec = torus(2,4)\n"
                                                  "[process]\n"
                                                  "kind = bernoulli\n"
                                                  "p = 0.55\n"
                                                  "[run]\n"
                                                  "operation = mtp_check\n"
                                                  "n = 1\n"
                                                  "seed = 3\n"
                                                  "[op]\n"
                                                  "kernel = offset(1,1)\n"
                                                  "origin = 5\n"));
    CHECK(out.exit_code == 0);
    const json payload = json::parse(out.records[0])["payload"];
    CHECK(payload["equal"] == true);
    CHECK(payload["lhs"] == "1");
    CHECK(payload["rhs"] == "1");
}

TEST_CASE("run: phase table rows arrive with their csv") {
    const RunOutput out = run_experiment(cfg_from("[graph]\n"
                                                  "spec = product(free_group(2),lattice(2))\n"
                                                  "radius = 3\n"
                                                  "[run]\n"
                                                  "operation = phases\n"
                                                  "n = 8\n"
                                                  "seed = 5\n"
                                                  "[op]\n"
                                                  "eps_list = 0.0, 1.0\n"));
    CHECK(out.exit_code == 0);
    const json payload = json::parse(out.records[0])["payload"];
    REQUIRE(payload["rows"].size() == 2);
    CHECK(payload["rows"][0]["fiber_mode"] == true);
    CHECK(payload["rows"][1]["modal_count"] == 1);
    CHECK(payload["csv"].get<std::string>().rfind("eps,", 0) == 0);
}

// ---- sweep ----

namespace {
const std::string kSweepConfig = "[graph]\n"
                                 "spec = lattice(2)\n"
                                 "radius = 32\n"
                                 "[process]\n"
                                 "kind = bernoulli\n"
                                 "p = 0.5\n"
                                 "[run]\n"
                                 "operation = spanning_cluster_count\n"
                                 "n = 60\n"
                                 "seed = 19\n"
                                 "[sweep]\n"
                                 "param = process.p\n"
                                 "values = 0.3, 0.38, 0.45\n";
} // namespace

TEST_CASE("sweep: crossing probability rises along the p grid") {
    const ExperimentConfig cfg = cfg_from(kSweepConfig);
    const RunOutput out = sweep_experiment(cfg);
    CHECK(out.exit_code == 0);
    REQUIRE(out.records.size() == 3);

    double prev = -1.0;
    for (std::size_t i = 0; i < 3; ++i) {
        const json rec = json::parse(out.records[i]);
        CHECK(rec["point"] == i);
        CHECK(rec["config_hash"] == cfg.hash()); // records cite the master config
        CHECK(rec["seed"] == derive_seed(19, i));
        const double cross = rec["payload"]["crossing_probability"].get<double>();
        CHECK(cross > prev); // coupled monotonicity, with a wide margin across p_c
        prev = cross;
    }
    const json first = json::parse(out.records[0]);
    CHECK(first["grid"]["process.p"] == "0.3");
    CHECK(first["params"]["process.p"] == "0.3");

    // Combined CSV: header plus one row per grid point.
    REQUIRE(!out.csv.empty());
    CHECK(out.csv.rfind("point,process.p,mean_spanning_clusters,crossing_probability", 0) == 0);
    CHECK(std::count(out.csv.begin(), out.csv.end(), '\n') == 4);
}

TEST_CASE("sweep: two axes give the full grid in canonical order") {
    const RunOutput out = sweep_experiment(cfg_from("[graph]\n"
                                                    "spec = regular_tree(3)\n"
                                                    "radius = 5\n"
                                                    "[process]\n"
                                                    "kind = bernoulli\n"
                                                    "p = 0.6\n"
                                                    "[run]\n"
                                                    "operation = spanning_cluster_count\n"
                                                    "n = 20\n"
                                                    "seed = 23\n"
                                                    "[sweep]\n"
                                                    "param = process.p\n"
                                                    "values = 0.5, 0.7\n"
                                                    "param2 = graph.radius\n"
                                                    "values2 = 4, 6\n"));
    REQUIRE(out.records.size() == 4);
    const json r2 = json::parse(out.records[2]);
    CHECK(r2["grid"]["process.p"] == "0.7");
    CHECK(r2["grid"]["graph.radius"] == "4");
    CHECK(r2["params"]["graph.radius"] == "4");
    CHECK(out.csv.rfind("point,process.p,graph.radius,", 0) == 0);
}

TEST_CASE("sweep: schema violations") {
    auto swap = [&](const std::string& from, const std::string& to) {
        std::string text = kSweepConfig;
        const std::size_t at = text.find(from);
        REQUIRE(at != std::string::npos);
        text.replace(at, from.size(), to);
        return cfg_from(text);
    };
    CHECK(field_of([&] { sweep_experiment(swap("values = 0.3, 0.38, 0.45", "values = ,")); }) ==
          "sweep.values");
    CHECK(field_of([&] { sweep_experiment(swap("param = process.p", "param = process.q")); }) ==
          "sweep.param");
    CHECK(field_of([&] { sweep_experiment(swap("param = process.p", "param = run.seed")); }) ==
          "sweep.param");
    CHECK(field_of([&] { sweep_experiment(swap("param = process.p", "param = p")); }) ==
          "sweep.param");
    CHECK(field_of([&] {
              sweep_experiment(swap("operation = spanning_cluster_count", "operation = phases"));
          }) == "run.operation");
    CHECK(field_of([&] { sweep_experiment(cfg_from(kTauConfig)); }) == "sweep");
    // A bad value anywhere in the grid fails validation before any point runs.
    CHECK(field_of([&] { sweep_experiment(swap("values = 0.3, 0.38, 0.45",
                                               "values = 0.3, 1.5")); }) == "process.p");
}

TEST_CASE("sweep: all-inconclusive grids exit 3") {
    const RunOutput out = sweep_experiment(cfg_from("[graph]\n"
                                                    "spec = regular_tree(3)\n"
                                                    "radius = 6\n"
                                                    "[process]\n"
                                                    "kind = bernoulli\n"
                                                    "p = 0.5\n"
                                                    "[run]\n"
                                                    "operation = indistinguishability\n"
                                                    "n = 8\n"
                                                    "seed = 29\n"
                                                    "[op]\n"
                                                    "statistic = density\n"
                                                    "[sweep]\n"
                                                    "param = process.p\n"
                                                    "values = 0.1, 0.2\n"));
    CHECK(out.records.size() == 2);
    CHECK(out.inconclusive == 2);
    CHECK(out.exit_code == 3);
}

// ---- outputs ----

TEST_CASE("write_outputs: records, csv, and manifest land on disk") {
    namespace fs = std::filesystem;
    const fs::path dir = fs::path("test_out_experiment");
    fs::remove_all(dir);

    const ExperimentConfig cfg = cfg_from(kSweepConfig);
    const RunOutput out = sweep_experiment(cfg);
    const auto written = write_outputs(cfg, out, dir.string(), "scan");
    REQUIRE(written.size() == 3);
    CHECK(fs::exists(written[0]));
    CHECK(fs::exists(written[1]));
    CHECK(fs::exists(written[2]));

    std::ifstream records(written[0]);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(records, line)) ++lines;
    CHECK(lines == out.records.size());

    std::ifstream manifest_in(written[2]);
    const json manifest = json::parse(manifest_in);
    CHECK(manifest["config_hash"] == cfg.hash());
    CHECK(manifest["records"] == out.records.size());
    CHECK(manifest["version"] == kVersion);
    CHECK(manifest["started_at"].get<std::string>().size() == 20);
    CHECK(manifest["exit_code"] == 0);
    CHECK(ExperimentConfig::parse_text(manifest["config"].get<std::string>()).hash() ==
          cfg.hash());
    fs::remove_all(dir);
}

TEST_CASE("default output directory honors the environment") {
    unsetenv("PERCOLAB_OUT");
    CHECK(default_output_dir() == ".");
    setenv("PERCOLAB_OUT", "/tmp/percolab_results", 1);
    CHECK(default_output_dir() == "/tmp/percolab_results");
    unsetenv("PERCOLAB_OUT");
}

TEST_CASE("operation table lists every bound operation") {
    const auto& ops = experiment_ops();
    CHECK(ops.size() == 8);
    for (const char* name : {"tau_estimate", "decay_scan", "spanning_cluster_count",
                             "indistinguishability", "uniqueness_monotonicity", "phases",
                             "stationarity", "mtp_check"})
        CHECK(find_if(ops.begin(), ops.end(),
                      [&](const OpInfo& op) { return op.name == name; }) != ops.end());
    for (const auto& op : ops) CHECK(!op.summary.empty());
}
