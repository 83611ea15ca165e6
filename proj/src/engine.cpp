#include "percolab/engine.hpp"

#include "percolab/cluster.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace percolab {
namespace {

[[noreturn]] void fail(const std::string& what) { throw std::invalid_argument(what); }

// Canonical number text: shortest round-trip form (%.17g), used for
// provenance and export so byte-compares are meaningful.
std::string canon_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

double param_double(const std::map<std::string, std::string>& params, const std::string& key,
                    double fallback) {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    return std::strtod(it->second.c_str(), nullptr);
}

long long first_coord(const std::string& key) {
    return std::strtoll(key.c_str(), nullptr, 10);
}

std::string int_text(long long v) { return std::to_string(v); }

} // namespace

std::size_t Configuration::open_count() const {
    std::size_t k = 0;
    for (std::uint8_t b : open) k += b;
    return k;
}

bool Configuration::subset_of(const Configuration& other) const {
    if (open.size() != other.open.size()) return false;
    for (std::size_t i = 0; i < open.size(); ++i)
        if (open[i] && !other.open[i]) return false;
    return true;
}

double edge_value(const CouplingSeed& seed, std::uint64_t edge_base_hash) {
    return u01(prf64(seed.experiment, seed.sample, "edge", edge_base_hash));
}

double edge_value(const CouplingSeed& seed, const GraphBall& ball, int edge_id) {
    return edge_value(seed, ball.edges[static_cast<std::size_t>(edge_id)].base_hash);
}

Configuration sample_bernoulli(const GraphBall& ball, double p, const CouplingSeed& seed) {
    if (!(p >= 0.0 && p <= 1.0)) fail("sample_bernoulli: p must lie in [0, 1]");
    Configuration cfg;
    cfg.open.resize(ball.edge_count());
    for (std::size_t i = 0; i < ball.edges.size(); ++i)
        cfg.open[i] = edge_value(seed, ball.edges[i].base_hash) < p ? 1 : 0;
    cfg.provenance.process = "bernoulli";
    cfg.provenance.params = {{"p", canon_double(p)}};
    cfg.provenance.seed = seed.experiment;
    cfg.provenance.sample = seed.sample;
    return cfg;
}

namespace {

std::string edge_key_of(const GraphBall& ball, int edge_id) {
    const auto& e = ball.edges[static_cast<std::size_t>(edge_id)];
    return edge_key_string(ball.keys[static_cast<std::size_t>(e.u)],
                           ball.keys[static_cast<std::size_t>(e.v)]);
}

void check_edge_id(const GraphBall& ball, int edge_id, const char* who) {
    if (edge_id < 0 || static_cast<std::size_t>(edge_id) >= ball.edge_count())
        fail(std::string(who) + ": unknown edge id " + std::to_string(edge_id));
}

} // namespace

void insert_edge(const GraphBall& ball, Configuration& cfg, int edge_id) {
    check_edge_id(ball, edge_id, "insert_edge");
    cfg.open[static_cast<std::size_t>(edge_id)] = 1;
    cfg.provenance.surgery_log.push_back("+" + edge_key_of(ball, edge_id));
}

void delete_edge(const GraphBall& ball, Configuration& cfg, int edge_id) {
    check_edge_id(ball, edge_id, "delete_edge");
    cfg.open[static_cast<std::size_t>(edge_id)] = 0;
    cfg.provenance.surgery_log.push_back("-" + edge_key_of(ball, edge_id));
}

ColoredConfig color_clusters(const GraphBall& ball, const Configuration& cfg, int palette,
                             const CouplingSeed& seed) {
    if (palette < 1) fail("color_clusters: palette size must be >= 1");
    ColoredConfig out;
    out.cfg = cfg;
    out.palette = palette;
    const ClusterDecomposition dec = decompose(ball, cfg);
    // One palette draw per vertex; a cluster wears the draw of its least
    // vertex, so the cluster colors are i.i.d. uniform given cfg.
    out.cluster_color.resize(static_cast<std::size_t>(dec.cluster_count()));
    for (int c = 0; c < dec.cluster_count(); ++c) {
        const std::string& key = ball.keys[static_cast<std::size_t>(dec.least_vertex[c])];
        const std::uint64_t h = prf64(seed.experiment, seed.sample, "color", fnv1a(key));
        out.cluster_color[static_cast<std::size_t>(c)] =
            static_cast<int>(uniform_index(h, static_cast<std::uint64_t>(palette)));
    }
    out.color.resize(ball.vertex_count());
    for (std::size_t v = 0; v < ball.vertex_count(); ++v)
        out.color[v] = out.cluster_color[static_cast<std::size_t>(dec.cluster_of[v])];
    return out;
}

Configuration delet_process(const GraphBall& ball, double p, double p_prime,
                            const CouplingSeed& seed) {
    if (ball.spec.family != Family::regular_tree || ball.spec.branching != 3)
        fail("delet_process: defined on regular_tree(3) only");
    if (!(p > 0.5 && p < 1.0)) fail("delet_process: requires 1/2 < p < 1");
    if (!(p_prime > 1.0 / (2.0 * p) && p_prime <= 1.0))
        fail("delet_process: requires 1/(2p) < p_prime <= 1");

    Configuration cfg = sample_bernoulli(ball, p, seed);
    const ClusterDecomposition dec = decompose(ball, cfg);
    // Fair coin per cluster, keyed to its least vertex: order-stable and
    // independent of the coloring stream.
    std::vector<std::uint8_t> thinned(static_cast<std::size_t>(dec.cluster_count()));
    for (int c = 0; c < dec.cluster_count(); ++c) {
        const std::string& key = ball.keys[static_cast<std::size_t>(dec.least_vertex[c])];
        thinned[static_cast<std::size_t>(c)] =
            u01(prf64(seed.experiment, seed.sample, "delet-coin", fnv1a(key))) < 0.5 ? 1 : 0;
    }
    for (std::size_t i = 0; i < ball.edges.size(); ++i) {
        if (!cfg.open[i]) continue;
        const int c = dec.cluster_of[static_cast<std::size_t>(ball.edges[i].u)];
        if (!thinned[static_cast<std::size_t>(c)]) continue;
        // u01 < 1 always, so p_prime = 1 keeps the base bit-exactly.
        const double t = u01(prf64(seed.experiment, seed.sample, "delet-thin",
                                   ball.edges[i].base_hash));
        if (!(t < p_prime)) cfg.open[i] = 0;
    }
    cfg.provenance.process = "delet";
    cfg.provenance.params = {{"p", canon_double(p)}, {"p_prime", canon_double(p_prime)}};
    return cfg;
}

Configuration fiber_process(const GraphBall& ball, double eps, const CouplingSeed& seed) {
    const GraphSpec& s = ball.spec;
    if (s.family != Family::product || !s.left || !s.right ||
        s.left->family != Family::free_group || s.left->rank != 2 ||
        s.right->family != Family::lattice || s.right->dim != 2)
        fail("fiber_process: defined on product(free_group(2), lattice(2)) only");
    if (!(eps >= 0.0 && eps <= 1.0)) fail("fiber_process: eps must lie in [0, 1]");

    Configuration cfg;
    cfg.open.resize(ball.edge_count());
    for (std::size_t i = 0; i < ball.edges.size(); ++i) {
        const auto& e = ball.edges[i];
        bool open = false;
        // Lattice-direction edges carry the right-factor label prefix.
        if (e.label.rfind("R:", 0) == 0)
            open = u01(prf64(seed.experiment, seed.sample, "fiber-base", e.base_hash)) < 0.5;
        if (!open)
            open = u01(prf64(seed.experiment, seed.sample, "fiber-eps", e.base_hash)) < eps;
        cfg.open[i] = open ? 1 : 0;
    }
    cfg.provenance.process = "fiber";
    cfg.provenance.params = {{"eps", canon_double(eps)}};
    cfg.provenance.seed = seed.experiment;
    cfg.provenance.sample = seed.sample;
    return cfg;
}

Configuration slab_process(const GraphBall& ball, double eps, const CouplingSeed& seed) {
    if (ball.spec.family != Family::lattice || ball.spec.dim != 3)
        fail("slab_process: defined on lattice(3) only");
    if (!(eps > 0.0 && eps < kSlabEpsMax))
        fail("slab_process: requires 0 < eps < " + canon_double(kSlabEpsMax));

    const std::size_t nv = ball.vertex_count();
    const std::size_t ne = ball.edge_count();

    // Fair coin per x1-slab; a vertex is in A when its slab coin is 1.
    std::vector<std::uint8_t> in_a(nv);
    for (std::size_t v = 0; v < nv; ++v) {
        const long long x1 = first_coord(ball.keys[v]);
        in_a[v] = u01(prf64(seed.experiment, seed.sample, "slab-a", fnv1a(int_text(x1)))) < 0.5
                      ? 1
                      : 0;
    }

    std::vector<double> z(ne);
    for (std::size_t i = 0; i < ne; ++i)
        z[i] = u01(prf64(seed.experiment, seed.sample, "slab-z", ball.edges[i].base_hash));

    // Sparse layer first: its vertex set excludes edges from the third layer.
    std::vector<std::uint8_t> w2(ne);
    std::vector<std::uint8_t> touches_w2(nv);
    for (std::size_t i = 0; i < ne; ++i) {
        if (z[i] < eps) {
            w2[i] = 1;
            touches_w2[static_cast<std::size_t>(ball.edges[i].u)] = 1;
            touches_w2[static_cast<std::size_t>(ball.edges[i].v)] = 1;
        }
    }

    Configuration cfg;
    cfg.open.resize(ne);
    for (std::size_t i = 0; i < ne; ++i) {
        const auto u = static_cast<std::size_t>(ball.edges[i].u);
        const auto v = static_cast<std::size_t>(ball.edges[i].v);
        const bool inside_a = in_a[u] && in_a[v];
        const bool clear = !in_a[u] && !in_a[v] && !touches_w2[u] && !touches_w2[v];
        const bool dense = z[i] < 1.0 - eps;
        cfg.open[i] = ((inside_a && dense) || w2[i] || (clear && dense)) ? 1 : 0;
    }
    cfg.provenance.process = "slab";
    cfg.provenance.params = {{"eps", canon_double(eps)}};
    cfg.provenance.seed = seed.experiment;
    cfg.provenance.sample = seed.sample;
    return cfg;
}

void Process::validate(const GraphBall& ball) const {
    if (kind == "bernoulli") {
        if (!(p >= 0.0 && p <= 1.0)) fail("bernoulli: p must lie in [0, 1]");
    } else if (kind == "delet") {
        if (ball.spec.family != Family::regular_tree || ball.spec.branching != 3)
            fail("delet_process: defined on regular_tree(3) only");
        if (!(p > 0.5 && p < 1.0)) fail("delet_process: requires 1/2 < p < 1");
        if (!(p_prime > 1.0 / (2.0 * p) && p_prime <= 1.0))
            fail("delet_process: requires 1/(2p) < p_prime <= 1");
    } else if (kind == "fiber") {
        const GraphSpec& s = ball.spec;
        if (s.family != Family::product || !s.left || !s.right ||
            s.left->family != Family::free_group || s.left->rank != 2 ||
            s.right->family != Family::lattice || s.right->dim != 2)
            fail("fiber_process: defined on product(free_group(2), lattice(2)) only");
        if (!(eps >= 0.0 && eps <= 1.0)) fail("fiber_process: eps must lie in [0, 1]");
    } else if (kind == "slab") {
        if (ball.spec.family != Family::lattice || ball.spec.dim != 3)
            fail("slab_process: defined on lattice(3) only");
        if (!(eps > 0.0 && eps < kSlabEpsMax))
            fail("slab_process: requires 0 < eps < " + canon_double(kSlabEpsMax));
    } else {
        fail("unknown process kind: " + kind);
    }
}

Configuration Process::sample(const GraphBall& ball, std::uint64_t experiment_seed,
                              std::uint64_t sample_index) const {
    const CouplingSeed seed{experiment_seed, sample_index};
    if (kind == "bernoulli") return sample_bernoulli(ball, p, seed);
    if (kind == "delet") return delet_process(ball, p, p_prime, seed);
    if (kind == "fiber") return fiber_process(ball, eps, seed);
    if (kind == "slab") return slab_process(ball, eps, seed);
    fail("unknown process kind: " + kind);
}

std::map<std::string, std::string> Process::param_map() const {
    if (kind == "bernoulli") return {{"p", canon_double(p)}};
    if (kind == "delet") return {{"p", canon_double(p)}, {"p_prime", canon_double(p_prime)}};
    if (kind == "fiber" || kind == "slab") return {{"eps", canon_double(eps)}};
    fail("unknown process kind: " + kind);
}

Configuration regenerate(const GraphBall& ball, const Provenance& prov) {
    Process proc;
    proc.kind = prov.process;
    proc.p = param_double(prov.params, "p", proc.p);
    proc.p_prime = param_double(prov.params, "p_prime", proc.p_prime);
    proc.eps = param_double(prov.params, "eps", proc.eps);
    Configuration cfg = proc.sample(ball, prov.seed, prov.sample);
    if (!prov.surgery_log.empty()) {
        std::map<std::string, int> by_key;
        for (std::size_t i = 0; i < ball.edge_count(); ++i)
            by_key[edge_key_of(ball, static_cast<int>(i))] = static_cast<int>(i);
        for (const std::string& entry : prov.surgery_log) {
            if (entry.size() < 2 || (entry[0] != '+' && entry[0] != '-'))
                fail("regenerate: malformed surgery entry '" + entry + "'");
            auto it = by_key.find(entry.substr(1));
            if (it == by_key.end())
                fail("regenerate: surgery names an edge outside the ball: " + entry);
            if (entry[0] == '+')
                insert_edge(ball, cfg, it->second);
            else
                delete_edge(ball, cfg, it->second);
        }
    }
    cfg.provenance = prov;
    return cfg;
}

ConditionalMarginal conditional_marginal_estimate(const GraphBall& ball, const Process& process,
                                                  int edge_id, std::uint64_t n,
                                                  std::uint64_t seed, int bucket_radius,
                                                  std::uint64_t min_bucket) {
    check_edge_id(ball, edge_id, "conditional_marginal_estimate");
    if (n < 100) fail("conditional_marginal_estimate: needs n >= 100 samples");
    if (bucket_radius < 0) fail("conditional_marginal_estimate: bucket_radius must be >= 0");
    process.validate(ball);

    // Neighborhood: edges with an endpoint within bucket_radius of e.
    const auto& e = ball.edges[static_cast<std::size_t>(edge_id)];
    std::vector<int> depth(ball.vertex_count(), -1);
    std::vector<int> queue{e.u, e.v};
    depth[static_cast<std::size_t>(e.u)] = 0;
    depth[static_cast<std::size_t>(e.v)] = 0;
    for (std::size_t head = 0; head < queue.size(); ++head) {
        const int v = queue[head];
        if (depth[static_cast<std::size_t>(v)] == bucket_radius) continue;
        for (int w : ball.neighbors(v))
            if (depth[static_cast<std::size_t>(w)] < 0) {
                depth[static_cast<std::size_t>(w)] = depth[static_cast<std::size_t>(v)] + 1;
                queue.push_back(w);
            }
    }
    std::vector<int> hood;
    for (std::size_t i = 0; i < ball.edge_count(); ++i) {
        if (static_cast<int>(i) == edge_id) continue;
        if (depth[static_cast<std::size_t>(ball.edges[i].u)] >= 0 ||
            depth[static_cast<std::size_t>(ball.edges[i].v)] >= 0)
            hood.push_back(static_cast<int>(i));
    }

    std::map<std::string, std::pair<std::uint64_t, std::uint64_t>> tally; // count, open
    std::string pattern(hood.size(), '0');
    for (std::uint64_t k = 0; k < n; ++k) {
        const Configuration cfg = process.sample(ball, seed, k);
        for (std::size_t j = 0; j < hood.size(); ++j)
            pattern[j] = cfg.is_open(hood[j]) ? '1' : '0';
        auto& cell = tally[pattern];
        cell.first += 1;
        cell.second += cfg.is_open(edge_id) ? 1 : 0;
    }

    ConditionalMarginal out;
    std::uint64_t pooled_n = 0, pooled_open = 0;
    for (const auto& [pat, cell] : tally) {
        out.buckets.push_back(BucketStat{pat, cell.first, cell.second});
        if (cell.first >= min_bucket) {
            out.buckets_used += 1;
            pooled_n += cell.first;
            pooled_open += cell.second;
        } else {
            out.buckets_insufficient += 1;
        }
    }
    std::sort(out.buckets.begin(), out.buckets.end(), [](const BucketStat& a, const BucketStat& b) {
        if (a.count != b.count) return a.count > b.count;
        return a.pattern < b.pattern;
    });
    out.flagged = out.buckets_insufficient > 0 || out.buckets_used == 0;
    if (pooled_n > 0) {
        out.estimate = wilson_estimate(pooled_open, pooled_n, seed);
    } else {
        out.estimate.n = 0;
        out.estimate.seed = seed;
    }
    out.estimate.params = process.param_map();
    out.estimate.params["process"] = process.kind;
    out.estimate.params["edge"] = edge_key_of(ball, edge_id);
    out.estimate.params["bucket_radius"] = std::to_string(bucket_radius);
    return out;
}

std::string export_configuration(const GraphBall& ball, const Configuration& cfg) {
    if (cfg.open.size() != ball.edge_count())
        fail("export_configuration: configuration does not match the ball");
    std::string out = "# graph=" + ball.spec.to_string() + " radius=" + std::to_string(ball.radius)
                      + " process=" + cfg.provenance.process;
    for (const auto& [k, v] : cfg.provenance.params) out += " " + k + "=" + v;
    out += " seed=" + std::to_string(cfg.provenance.seed)
           + " sample=" + std::to_string(cfg.provenance.sample);
    if (!cfg.provenance.surgery_log.empty()) out += " surgered";
    out += "\n";
    for (const std::string& entry : cfg.provenance.surgery_log)
        out += "# surgery " + entry + "\n";
    for (std::size_t i = 0; i < ball.edge_count(); ++i)
        if (cfg.open[i]) out += edge_key_of(ball, static_cast<int>(i)) + "\n";
    return out;
}

} // namespace percolab
