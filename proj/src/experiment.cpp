#include "percolab/experiment.hpp"

#include "percolab/cluster.hpp"
#include "percolab/connectivity.hpp"
#include "percolab/engine.hpp"
#include "percolab/invariance.hpp"
#include "percolab/rand.hpp"
#include "percolab/stats.hpp"
#include "percolab/walks.hpp"

#include "json.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace percolab {

namespace {

using nlohmann::json;

std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::stringstream ss(s);
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

long long parse_int(const std::string& field, const std::string& text) {
    std::size_t pos = 0;
    long long v = 0;
    try {
        v = std::stoll(text, &pos);
    } catch (const std::exception&) {
        throw ValidationError(field, "not an integer: '" + text + "'");
    }
    if (pos != text.size()) throw ValidationError(field, "not an integer: '" + text + "'");
    return v;
}

// Seeds span the full 64-bit range (derived point seeds land anywhere),
// so they get their own parser instead of the signed one.
std::uint64_t parse_seed(const std::string& field, const std::string& text) {
    if (!text.empty() && text.front() == '-')
        throw ValidationError(field, "must be nonnegative");
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(text, &pos);
    } catch (const std::exception&) {
        throw ValidationError(field, "not an integer: '" + text + "'");
    }
    if (pos != text.size()) throw ValidationError(field, "not an integer: '" + text + "'");
    return static_cast<std::uint64_t>(v);
}

double parse_real(const std::string& field, const std::string& text) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(text, &pos);
    } catch (const std::exception&) {
        throw ValidationError(field, "not a number: '" + text + "'");
    }
    if (pos != text.size()) throw ValidationError(field, "not a number: '" + text + "'");
    return v;
}

// ---- operation table ----

const std::vector<OpInfo>& op_table() {
    static const std::vector<OpInfo> ops = {
        {"tau_estimate",
         {"op.x", "op.y"},
         {},
         true,
         true,
         "P[x and y share a cluster] with Wilson CI"},
        {"decay_scan",
         {"op.distances", "op.pairs_per_distance"},
         {},
         true,
         false,
         "pair connectivity swept over distances"},
        {"spanning_cluster_count",
         {},
         {},
         true,
         true,
         "mean boundary-touching cluster count and inner-to-boundary crossing probability"},
        {"indistinguishability",
         {"op.statistic"},
         {},
         true,
         true,
         "per-cluster statistic comparison across spanning clusters"},
        {"uniqueness_monotonicity",
         {"op.p1", "op.p2"},
         {},
         false,
         true,
         "coupled containment of p1 spanning clusters in p2 spanning clusters"},
        {"phases",
         {"op.eps_list"},
         {},
         false,
         false,
         "crossing-cluster counts on the tree-times-lattice product under sprinkling"},
        {"stationarity",
         {"op.statistic", "op.steps"},
         {"op.t1", "op.t2"},
         true,
         true,
         "walk statistic law compared at two interior times"},
        {"mtp_check",
         {"op.kernel"},
         {"op.origin"},
         true,
         true,
         "mass-transport balance for a menu kernel on a torus"},
    };
    return ops;
}

const OpInfo* find_op(const std::string& name) {
    for (const auto& op : op_table())
        if (op.name == name) return &op;
    return nullptr;
}

// ---- schema ----

const std::map<std::string, std::vector<std::string>>& section_schema() {
    static const std::map<std::string, std::vector<std::string>> schema = {
        {"graph", {"spec", "radius"}},
        {"process", {"kind", "p", "p_prime", "eps"}},
        {"run", {"operation", "n", "seed"}},
        {"op", {}}, // validated against the operation's own lists
        {"sweep", {"param", "values", "param2", "values2"}},
        {"output", {"dir", "prefix"}},
    };
    return schema;
}

const std::string& require(const ExperimentConfig& cfg, const std::string& section,
                           const std::string& key) {
    const std::string* v = cfg.find(section, key);
    if (!v) throw ValidationError(section + "." + key, "required");
    return *v;
}

// Everything a validated config pins down, ready to execute.
struct Prepared {
    GraphSpec spec;
    GraphBall ball;
    Process process;
    const OpInfo* op = nullptr;
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
};

// Graph errors already lead with the offending field ("family.side: ...");
// prefix the section to make a field path.
[[noreturn]] void rethrow(const std::string& section, const std::invalid_argument& e) {
    const std::string what = e.what();
    const std::size_t colon = what.find(':');
    const std::string name = colon == std::string::npos ? "value" : what.substr(0, colon);
    throw ValidationError(section + "." + name, what);
}

// Process errors lead with the kind, not the parameter; recover the field
// from the parameter token in the message. Messages without one complain
// about the kind/graph pairing, so the kind is the field at fault.
[[noreturn]] void rethrow_process(const std::invalid_argument& e) {
    const std::string what = e.what();
    std::string field = "kind";
    if (what.find("p_prime") != std::string::npos)
        field = "p_prime";
    else if (what.find("eps") != std::string::npos)
        field = "eps";
    else if (what.find(" p ") != std::string::npos)
        field = "p";
    throw ValidationError("process." + field, what);
}

Prepared prepare(const ExperimentConfig& cfg) {
    // Unknown sections and keys are schema violations, not typos to skip.
    for (const auto& [section, entries] : cfg.sections) {
        const auto it = section_schema().find(section);
        if (it == section_schema().end()) throw ValidationError(section, "unknown section");
        if (section == "op") continue;
        for (const auto& [key, value] : entries) {
            (void)value;
            if (std::find(it->second.begin(), it->second.end(), key) == it->second.end())
                throw ValidationError(section + "." + key, "unknown key");
        }
    }

    Prepared prep;
    const std::string& op_name = require(cfg, "run", "operation");
    prep.op = find_op(op_name);
    if (!prep.op) throw ValidationError("run.operation", "unknown operation '" + op_name + "'");

    // Operation parameters: exactly the declared ones.
    if (const auto sec = cfg.sections.find("op"); sec != cfg.sections.end())
        for (const auto& [key, value] : sec->second) {
            (void)value;
            const std::string path = "op." + key;
            const bool known =
                std::find(prep.op->required.begin(), prep.op->required.end(), path) !=
                    prep.op->required.end() ||
                std::find(prep.op->optional.begin(), prep.op->optional.end(), path) !=
                    prep.op->optional.end();
            if (!known)
                throw ValidationError(path, "unknown key for operation '" + op_name + "'");
        }
    for (const std::string& path : prep.op->required)
        if (!cfg.find("op", path.substr(3))) throw ValidationError(path, "required");

    const long long n = parse_int("run.n", require(cfg, "run", "n"));
    if (n <= 0) throw ValidationError("run.n", "must be positive");
    prep.n = static_cast<std::uint64_t>(n);
    prep.seed = parse_seed("run.seed", require(cfg, "run", "seed"));

    try {
        prep.spec = GraphSpec::parse(require(cfg, "graph", "spec"));
    } catch (const std::invalid_argument& e) {
        throw ValidationError("graph.spec", e.what());
    }
    if (prep.spec.family == Family::torus) {
        if (cfg.find("graph", "radius"))
            throw ValidationError("graph.radius", "a torus quotient has no radius");
        prep.ball = quotient_torus(prep.spec.dim, prep.spec.side);
    } else {
        const long long radius = parse_int("graph.radius", require(cfg, "graph", "radius"));
        if (radius < 1) throw ValidationError("graph.radius", "must be at least 1");
        try {
            prep.ball = build_ball(prep.spec, static_cast<int>(radius));
        } catch (const std::invalid_argument& e) {
            rethrow("graph", e);
        }
    }

    if (prep.op->needs_process) {
        prep.process.kind = require(cfg, "process", "kind");
        static const std::vector<std::string> kinds = {"bernoulli", "delet", "fiber", "slab"};
        if (std::find(kinds.begin(), kinds.end(), prep.process.kind) == kinds.end())
            throw ValidationError("process.kind",
                                  "unknown process kind '" + prep.process.kind + "'");
        if (const auto* v = cfg.find("process", "p")) {
            prep.process.p = parse_real("process.p", *v);
            if (!(prep.process.p >= 0.0 && prep.process.p <= 1.0))
                throw ValidationError("process.p", "must lie in [0, 1]");
        }
        if (const auto* v = cfg.find("process", "p_prime")) {
            prep.process.p_prime = parse_real("process.p_prime", *v);
            if (!(prep.process.p_prime >= 0.0 && prep.process.p_prime <= 1.0))
                throw ValidationError("process.p_prime", "must lie in [0, 1]");
        }
        if (const auto* v = cfg.find("process", "eps")) {
            prep.process.eps = parse_real("process.eps", *v);
            if (!(prep.process.eps >= 0.0 && prep.process.eps <= 1.0))
                throw ValidationError("process.eps", "must lie in [0, 1]");
        }
        try {
            prep.process.validate(prep.ball);
        } catch (const std::invalid_argument& e) {
            rethrow_process(e);
        }
    }

    // Operation-specific argument checks that need the ball.
    const auto vertex = [&](const std::string& path) {
        const std::string& key = require(cfg, "op", path.substr(3));
        const auto it = prep.ball.index_of.find(key);
        if (it == prep.ball.index_of.end())
            throw ValidationError(path, "no vertex '" + key + "' in this ball");
        return it->second;
    };
    if (op_name == "tau_estimate") {
        vertex("op.x");
        vertex("op.y");
    } else if (op_name == "decay_scan") {
        const auto tokens = split_list(require(cfg, "op", "distances"));
        if (tokens.empty()) throw ValidationError("op.distances", "empty list");
        for (const auto& t : tokens)
            if (parse_int("op.distances", t) < 1)
                throw ValidationError("op.distances", "distances start at 1");
        if (parse_int("op.pairs_per_distance", require(cfg, "op", "pairs_per_distance")) < 1)
            throw ValidationError("op.pairs_per_distance", "must be positive");
    } else if (op_name == "indistinguishability") {
        const std::string& stat = require(cfg, "op", "statistic");
        const auto& menu = indist_statistics();
        if (std::find(menu.begin(), menu.end(), stat) == menu.end())
            throw ValidationError("op.statistic", "unknown statistic '" + stat + "'");
    } else if (op_name == "uniqueness_monotonicity") {
        const double p1 = parse_real("op.p1", require(cfg, "op", "p1"));
        const double p2 = parse_real("op.p2", require(cfg, "op", "p2"));
        if (!(p1 > 0.0 && p1 <= p2 && p2 <= 1.0))
            throw ValidationError("op.p1", "need 0 < p1 <= p2 <= 1");
    } else if (op_name == "phases") {
        if (prep.spec.to_string() != "product(free_group(2),lattice(2))")
            throw ValidationError("graph.spec",
                                  "phases runs on product(free_group(2),lattice(2))");
        if (prep.ball.radius < 2) throw ValidationError("graph.radius", "phases needs radius >= 2");
        const auto tokens = split_list(require(cfg, "op", "eps_list"));
        if (tokens.empty()) throw ValidationError("op.eps_list", "empty list");
        for (const auto& t : tokens) {
            const double eps = parse_real("op.eps_list", t);
            if (!(eps >= 0.0 && eps <= 1.0))
                throw ValidationError("op.eps_list", "entries must lie in [0, 1]");
        }
    } else if (op_name == "stationarity") {
        if (parse_int("op.steps", require(cfg, "op", "steps")) < 2)
            throw ValidationError("op.steps", "must be at least 2");
        if (const auto* v = cfg.find("op", "t1")) parse_int("op.t1", *v);
        if (const auto* v = cfg.find("op", "t2")) parse_int("op.t2", *v);
    } else if (op_name == "mtp_check") {
        if (prep.spec.family != Family::torus)
            throw ValidationError("graph.spec", "mtp_check runs on a torus");
        const std::string& kernel = require(cfg, "op", "kernel");
        bool found = false;
        for (const auto& phi : MassTransportFn::torus_menu(prep.spec.dim))
            if (phi.name() == kernel) found = true;
        if (!found) throw ValidationError("op.kernel", "not in the torus kernel menu");
        if (const auto* v = cfg.find("op", "origin")) {
            const long long o = parse_int("op.origin", *v);
            if (o < 0 || o >= static_cast<long long>(prep.ball.vertex_count()))
                throw ValidationError("op.origin", "vertex index out of range");
        }
    }
    return prep;
}

// ---- payload builders ----

json estimate_json(const EstimateWithCI& est) {
    return json{{"value", est.value},
                {"half_width", est.half_width},
                {"sigma", est.sigma()},
                {"n", est.n}};
}

struct OpResult {
    json payload;
    bool inconclusive = false;
    std::vector<std::pair<std::string, double>> headline; // CSV columns
};

OpResult execute(const ExperimentConfig& cfg, const Prepared& prep) {
    const std::string& op = prep.op->name;
    OpResult out;

    if (op == "tau_estimate") {
        const int x = prep.ball.index_of.at(*cfg.find("op", "x"));
        const int y = prep.ball.index_of.at(*cfg.find("op", "y"));
        const EstimateWithCI est = tau_estimate(prep.ball, prep.process, x, y, prep.n, prep.seed);
        out.payload = estimate_json(est);
        out.payload["x"] = *cfg.find("op", "x");
        out.payload["y"] = *cfg.find("op", "y");
        out.headline = {{"value", est.value}, {"half_width", est.half_width}};
    } else if (op == "decay_scan") {
        std::vector<int> distances;
        for (const auto& t : split_list(*cfg.find("op", "distances")))
            distances.push_back(static_cast<int>(parse_int("op.distances", t)));
        const int per = static_cast<int>(
            parse_int("op.pairs_per_distance", *cfg.find("op", "pairs_per_distance")));
        const auto rows = decay_scan(prep.ball, prep.process, distances, per, prep.n, prep.seed);
        json jrows = json::array();
        for (const auto& row : rows) {
            json jr{{"distance", row.distance},
                    {"flagged", row.flagged},
                    {"pooled", estimate_json(row.pooled)}};
            json jpairs = json::array();
            for (const auto& pt : row.pairs)
                jpairs.push_back(json{{"x", prep.ball.keys[static_cast<std::size_t>(pt.x)]},
                                      {"y", prep.ball.keys[static_cast<std::size_t>(pt.y)]},
                                      {"value", pt.tau.value},
                                      {"half_width", pt.tau.half_width}});
            jr["pairs"] = std::move(jpairs);
            jrows.push_back(std::move(jr));
        }
        out.payload = json{{"rows", std::move(jrows)}};
    } else if (op == "spanning_cluster_count") {
        const int inner = prep.ball.spec.family == Family::torus
                              ? 0
                              : default_inner_radius(prep.ball);
        long long total = 0;
        std::uint64_t crossing = 0;
        for (std::uint64_t k = 0; k < prep.n; ++k) {
            const Configuration c = prep.process.sample(prep.ball, prep.seed, k);
            const ClusterDecomposition dec = decompose(prep.ball, c);
            total += spanning_cluster_count(prep.ball, dec);
            for (int cl = 0; cl < dec.cluster_count(); ++cl)
                if (cluster_eligible(prep.ball, dec, cl, inner)) {
                    ++crossing;
                    break;
                }
        }
        const double mean = static_cast<double>(total) / static_cast<double>(prep.n);
        const double cross = static_cast<double>(crossing) / static_cast<double>(prep.n);
        out.payload = json{{"mean_spanning_clusters", mean},
                           {"crossing_probability", cross},
                           {"n", prep.n}};
        out.headline = {{"mean_spanning_clusters", mean}, {"crossing_probability", cross}};
    } else if (op == "indistinguishability") {
        const IndistReport report = indistinguishability_test(
            prep.ball, prep.process, *cfg.find("op", "statistic"), prep.n, prep.seed);
        out.payload = json::parse(report.json());
        out.inconclusive = report.verdict == "inconclusive";
        out.headline = {{"detected", report.detected ? 1.0 : 0.0},
                        {"significant_pairs", static_cast<double>(report.significant_pairs)},
                        {"split_mean_low", report.split.mean_low},
                        {"split_mean_high", report.split.mean_high}};
    } else if (op == "uniqueness_monotonicity") {
        const double p1 = parse_real("op.p1", *cfg.find("op", "p1"));
        const double p2 = parse_real("op.p2", *cfg.find("op", "p2"));
        const ContainmentReport report =
            uniqueness_monotonicity_check(prep.ball, p1, p2, prep.n, prep.seed);
        out.payload = json{{"fraction", estimate_json(report.fraction)},
                           {"anchored_fraction", estimate_json(report.anchored_fraction)},
                           {"qualifying_samples", report.qualifying_samples},
                           {"p2_clusters", report.p2_clusters},
                           {"contained", report.contained},
                           {"anchored_p2_clusters", report.anchored_p2_clusters},
                           {"anchored_contained", report.anchored_contained},
                           {"conclusive", report.conclusive}};
        out.inconclusive = !report.conclusive;
        out.headline = {{"fraction", report.fraction.value},
                        {"anchored_fraction", report.anchored_fraction.value}};
    } else if (op == "phases") {
        std::vector<double> eps_list;
        for (const auto& t : split_list(*cfg.find("op", "eps_list")))
            eps_list.push_back(parse_real("op.eps_list", t));
        const auto rows = phases_experiment(eps_list, prep.ball.radius, prep.n, prep.seed);
        json jrows = json::array();
        for (const auto& row : rows) {
            json hist = json::object();
            for (const auto& [count, samples] : row.count_histogram)
                hist[std::to_string(count)] = samples;
            jrows.push_back(json{{"eps", row.eps},
                                 {"fiber_mode", row.fiber_mode},
                                 {"modal_count", row.modal_count},
                                 {"mean_count", row.mean_count},
                                 {"histogram", std::move(hist)}});
        }
        out.payload = json{{"rows", std::move(jrows)}, {"csv", phases_csv(rows)}};
    } else if (op == "stationarity") {
        const long long steps = parse_int("op.steps", *cfg.find("op", "steps"));
        long long t1 = 0, t2 = 0;
        if (const auto* v = cfg.find("op", "t1")) t1 = parse_int("op.t1", *v);
        if (const auto* v = cfg.find("op", "t2")) t2 = parse_int("op.t2", *v);
        const StationarityReport report =
            stationarity_check(prep.ball, prep.process, *cfg.find("op", "statistic"), prep.n,
                               steps, prep.seed, t1, t2);
        out.payload = json{{"statistic", report.statistic}, {"certified", report.certified},
                           {"t1", report.t1},               {"t2", report.t2},
                           {"mean1", report.mean1},         {"mean2", report.mean2},
                           {"z", report.z},                 {"p", report.p},
                           {"threshold", report.threshold}, {"stationary", report.stationary},
                           {"walks", report.walks}};
        out.headline = {{"z", report.z},
                        {"p", report.p},
                        {"stationary", report.stationary ? 1.0 : 0.0}};
    } else { // mtp_check
        const std::string& kernel = *cfg.find("op", "kernel");
        int origin = 0;
        if (const auto* v = cfg.find("op", "origin"))
            origin = static_cast<int>(parse_int("op.origin", *v));
        MassTransportFn phi = MassTransportFn::zero();
        for (const auto& entry : MassTransportFn::torus_menu(prep.spec.dim))
            if (entry.name() == kernel) phi = entry;
        std::pair<Rational, Rational> sums;
        if (phi.needs_configuration()) {
            const Configuration c = prep.process.sample(prep.ball, prep.seed, 0);
            sums = mtp_check(prep.ball, phi, origin, &c);
        } else {
            sums = mtp_check(prep.ball, phi, origin);
        }
        out.payload = json{{"kernel", kernel},
                           {"origin", origin},
                           {"lhs", sums.first.str()},
                           {"rhs", sums.second.str()},
                           {"lhs_value", sums.first.approx()},
                           {"rhs_value", sums.second.approx()},
                           {"equal", sums.first == sums.second}};
        out.headline = {{"equal", sums.first == sums.second ? 1.0 : 0.0}};
    }
    return out;
}

// Flattened "section.key" echo of the exact configuration a record ran
// under, so records audit independently of the config file.
json params_echo(const ExperimentConfig& cfg) {
    json echo = json::object();
    for (const auto& [section, entries] : cfg.sections)
        for (const auto& [key, value] : entries) echo[section + "." + key] = value;
    return echo;
}

std::string iso_utc_now() {
    const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---- sweep plumbing ----

struct SweepGrid {
    std::string param;              // "section.key"
    std::vector<std::string> values;
    std::string param2;             // empty for one axis
    std::vector<std::string> values2;

    std::size_t size() const { return values.size() * std::max<std::size_t>(values2.size(), 1); }
};

std::pair<std::string, std::string> split_path(const std::string& field,
                                               const std::string& path) {
    const std::size_t dot = path.find('.');
    if (dot == std::string::npos || dot == 0 || dot + 1 == path.size())
        throw ValidationError(field, "expected section.key, got '" + path + "'");
    return {path.substr(0, dot), path.substr(dot + 1)};
}

SweepGrid parse_grid(const ExperimentConfig& cfg) {
    SweepGrid grid;
    grid.param = require(cfg, "sweep", "param");
    const auto [sec, key] = split_path("sweep.param", grid.param);
    if (sec == "sweep" || sec == "output" || grid.param == "run.seed")
        throw ValidationError("sweep.param", "'" + grid.param + "' cannot be swept");
    if (!cfg.find(sec, key))
        throw ValidationError("sweep.param", "config has no '" + grid.param + "'");
    grid.values = split_list(require(cfg, "sweep", "values"));
    if (grid.values.empty()) throw ValidationError("sweep.values", "empty grid");
    for (const auto& v : grid.values) parse_real("sweep.values", v);

    const bool has2 = cfg.find("sweep", "param2") != nullptr;
    if (cfg.find("sweep", "values2") && !has2)
        throw ValidationError("sweep.param2", "required when values2 is set");
    if (has2) {
        grid.param2 = require(cfg, "sweep", "param2");
        if (grid.param2 == grid.param)
            throw ValidationError("sweep.param2", "must differ from sweep.param");
        const auto [sec2, key2] = split_path("sweep.param2", grid.param2);
        if (sec2 == "sweep" || sec2 == "output" || grid.param2 == "run.seed")
            throw ValidationError("sweep.param2", "'" + grid.param2 + "' cannot be swept");
        if (!cfg.find(sec2, key2))
            throw ValidationError("sweep.param2", "config has no '" + grid.param2 + "'");
        grid.values2 = split_list(require(cfg, "sweep", "values2"));
        if (grid.values2.empty()) throw ValidationError("sweep.values2", "empty grid");
        for (const auto& v : grid.values2) parse_real("sweep.values2", v);
    }
    return grid;
}

ExperimentConfig at_point(const ExperimentConfig& cfg, const SweepGrid& grid, std::size_t i,
                          std::size_t j, std::uint64_t point_seed) {
    ExperimentConfig point = cfg;
    point.sections.erase("sweep");
    const auto [sec, key] = split_path("sweep.param", grid.param);
    point.sections[sec][key] = grid.values[i];
    if (!grid.param2.empty()) {
        const auto [sec2, key2] = split_path("sweep.param2", grid.param2);
        point.sections[sec2][key2] = grid.values2[j];
    }
    point.sections["run"]["seed"] = std::to_string(point_seed);
    return point;
}

std::string make_record(const ExperimentConfig& master, const ExperimentConfig& effective,
                        const OpResult& result, std::uint64_t point, std::uint64_t seed,
                        const json* grid_entry) {
    json record{{"config_hash", master.hash()},
                {"operation", *effective.find("run", "operation")},
                {"params", params_echo(effective)},
                {"payload", result.payload},
                {"point", point},
                {"seed", seed},
                {"version", kVersion}};
    if (grid_entry) record["grid"] = *grid_entry;
    return record.dump();
}

} // namespace

// ---- config type ----

const std::string* ExperimentConfig::find(const std::string& section,
                                          const std::string& key) const {
    const auto sec = sections.find(section);
    if (sec == sections.end()) return nullptr;
    const auto it = sec->second.find(key);
    return it == sec->second.end() ? nullptr : &it->second;
}

ExperimentConfig ExperimentConfig::parse_text(const std::string& text) {
    ExperimentConfig cfg;
    std::string section;
    std::stringstream ss(text);
    std::string line;
    int lineno = 0;
    while (std::getline(ss, line)) {
        ++lineno;
        const std::string field = "config.line" + std::to_string(lineno);
        const std::size_t comment = line.find_first_of("#;");
        if (comment != std::string::npos) line.erase(comment);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ValidationError(field, "unterminated section header");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty()) throw ValidationError(field, "empty section name");
            cfg.sections.try_emplace(section);
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos) throw ValidationError(field, "expected key = value");
        if (section.empty()) throw ValidationError(field, "key before any [section]");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ValidationError(field, "empty key");
        if (value.empty()) throw ValidationError(section + "." + key, "empty value");
        if (!cfg.sections[section].try_emplace(key, value).second)
            throw ValidationError(section + "." + key, "duplicate key");
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ValidationError("config", "cannot read '" + path + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str());
}

std::string ExperimentConfig::canonical() const {
    std::string out;
    for (const auto& [section, entries] : sections) {
        out += "[" + section + "]\n";
        for (const auto& [key, value] : entries) out += key + " = " + value + "\n";
    }
    return out;
}

std::string ExperimentConfig::hash() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a(canonical())));
    return buf;
}

// ---- public entry points ----

const std::vector<OpInfo>& experiment_ops() { return op_table(); }

void validate_run(const ExperimentConfig& config) {
    if (config.sections.count("sweep"))
        throw ValidationError("sweep", "run does not take a sweep section");
    prepare(config);
}

void validate_sweep(const ExperimentConfig& config) {
    if (!config.sections.count("sweep")) throw ValidationError("sweep", "required");
    const SweepGrid grid = parse_grid(config);
    const OpInfo* op = find_op(config.find("run", "operation")
                                   ? *config.find("run", "operation")
                                   : "");
    if (op && !op->sweepable)
        throw ValidationError("run.operation", "'" + op->name + "' emits a table, not a point; "
                                               "it cannot be swept");
    // Every grid point must validate before any point runs.
    const std::size_t cols = grid.param2.empty() ? 1 : grid.values2.size();
    for (std::size_t i = 0; i < grid.values.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) prepare(at_point(config, grid, i, j, 0));
}

RunOutput run_experiment(const ExperimentConfig& config) {
    validate_run(config);
    const auto t0 = std::chrono::steady_clock::now();
    const Prepared prep = prepare(config);
    const OpResult result = execute(config, prep);

    RunOutput out;
    out.records.push_back(make_record(config, config, result, 0, prep.seed, nullptr));
    if (result.inconclusive) ++out.inconclusive;
    out.exit_code = out.inconclusive == out.records.size() ? 3 : 0;
    out.wall_ms = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                              t0)
            .count());
    return out;
}

RunOutput sweep_experiment(const ExperimentConfig& config) {
    validate_sweep(config);
    const auto t0 = std::chrono::steady_clock::now();
    const SweepGrid grid = parse_grid(config);
    const std::uint64_t base_seed = parse_seed("run.seed", require(config, "run", "seed"));

    RunOutput out;
    std::string csv_header;
    const std::size_t cols = grid.param2.empty() ? 1 : grid.values2.size();
    for (std::size_t i = 0; i < grid.values.size(); ++i)
        for (std::size_t j = 0; j < cols; ++j) {
            const std::uint64_t point = static_cast<std::uint64_t>(i * cols + j);
            const std::uint64_t point_seed = derive_seed(base_seed, point);
            const ExperimentConfig effective = at_point(config, grid, i, j, point_seed);
            const Prepared prep = prepare(effective);
            const OpResult result = execute(effective, prep);

            json grid_entry{{grid.param, grid.values[i]}};
            if (!grid.param2.empty()) grid_entry[grid.param2] = grid.values2[j];
            out.records.push_back(
                make_record(config, effective, result, point, point_seed, &grid_entry));
            if (result.inconclusive) ++out.inconclusive;

            if (csv_header.empty()) {
                csv_header = "point," + grid.param;
                if (!grid.param2.empty()) csv_header += "," + grid.param2;
                for (const auto& [name, value] : result.headline) {
                    (void)value;
                    csv_header += "," + name;
                }
                out.csv = csv_header + "\n";
            }
            std::string row = std::to_string(point) + "," + grid.values[i];
            if (!grid.param2.empty()) row += "," + grid.values2[j];
            for (const auto& [name, value] : result.headline) {
                (void)name;
                row += "," + json(value).dump();
            }
            out.csv += row + "\n";
        }

    out.exit_code = !out.records.empty() && out.inconclusive == out.records.size() ? 3 : 0;
    out.wall_ms = static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                              t0)
            .count());
    return out;
}

std::string default_output_dir() {
    const char* env = std::getenv("PERCOLAB_OUT");
    return env && *env ? env : ".";
}

std::vector<std::string> write_outputs(const ExperimentConfig& config, const RunOutput& output,
                                       const std::string& dir, const std::string& prefix) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    std::vector<std::string> written;

    const std::string records_path = (fs::path(dir) / (prefix + ".jsonl")).string();
    {
        std::ofstream out(records_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + records_path);
        for (const auto& line : output.records) out << line << "\n";
    }
    written.push_back(records_path);

    if (!output.csv.empty()) {
        const std::string csv_path = (fs::path(dir) / (prefix + ".csv")).string();
        std::ofstream out(csv_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + csv_path);
        out << output.csv;
        written.push_back(csv_path);
    }

    const std::string manifest_path = (fs::path(dir) / (prefix + ".manifest.json")).string();
    {
        json manifest{{"config", config.canonical()},
                      {"config_hash", config.hash()},
                      {"exit_code", output.exit_code},
                      {"inconclusive_records", output.inconclusive},
                      {"outputs", written},
                      {"records", output.records.size()},
                      {"started_at", iso_utc_now()},
                      {"version", kVersion},
                      {"wall_ms", output.wall_ms}};
        std::ofstream out(manifest_path, std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + manifest_path);
        out << manifest.dump(2) << "\n";
    }
    written.push_back(manifest_path);
    return written;
}

} // namespace percolab
