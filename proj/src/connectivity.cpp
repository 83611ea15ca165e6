#include "percolab/connectivity.hpp"

#include "percolab/cluster.hpp"
#include "percolab/rand.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <stdexcept>

namespace percolab {
namespace {

[[noreturn]] void fail(const std::string& what) { throw std::invalid_argument(what); }

// Reusable epoch-stamped BFS: connected(x, y) in the open subgraph.
struct PairProbe {
    std::vector<int> stamp;
    std::vector<int> queue;
    int epoch = 0;

    explicit PairProbe(std::size_t n) : stamp(n, 0) { queue.reserve(n); }

    bool connected(const GraphBall& ball, const Configuration& cfg, int x, int y) {
        if (x == y) return true;
        ++epoch;
        queue.clear();
        queue.push_back(x);
        stamp[static_cast<std::size_t>(x)] = epoch;
        for (std::size_t head = 0; head < queue.size(); ++head) {
            const int v = queue[head];
            for (const auto& [eid, other] : ball.incident[static_cast<std::size_t>(v)]) {
                if (!cfg.is_open(eid) || stamp[static_cast<std::size_t>(other)] == epoch)
                    continue;
                if (other == y) return true;
                stamp[static_cast<std::size_t>(other)] = epoch;
                queue.push_back(other);
            }
        }
        return false;
    }
};

void check_vertex(const GraphBall& ball, int v, const char* name) {
    if (v < 0 || static_cast<std::size_t>(v) >= ball.vertex_count())
        fail(std::string(name) + ": vertex outside the ball");
}

std::vector<int> bfs_distances(const GraphBall& ball, int source) {
    std::vector<int> dist(ball.vertex_count(), -1);
    std::deque<int> queue;
    dist[static_cast<std::size_t>(source)] = 0;
    queue.push_back(source);
    while (!queue.empty()) {
        const int v = queue.front();
        queue.pop_front();
        for (int w : ball.adj[static_cast<std::size_t>(v)])
            if (dist[static_cast<std::size_t>(w)] < 0) {
                dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
                queue.push_back(w);
            }
    }
    return dist;
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

// ---- lamplighter word machinery ----

struct LampTarget {
    long long gamma = 0;
    std::map<long long, int> lamps; // site -> value in 1..m-1
};

LampTarget parse_lamp_target(const std::string& key) {
    const std::size_t at = key.find('@');
    if (at == std::string::npos) fail("lamplighter_path_sampler: bad vertex key");
    LampTarget t;
    t.gamma = std::strtoll(key.substr(0, at).c_str(), nullptr, 10);
    std::size_t pos = at + 1;
    while (pos < key.size()) {
        std::size_t colon = key.find(':', pos);
        if (colon == std::string::npos) fail("lamplighter_path_sampler: bad lamp entry");
        std::size_t comma = key.find(',', colon);
        const long long site = std::strtoll(key.substr(pos, colon - pos).c_str(), nullptr, 10);
        const int val =
            static_cast<int>(std::strtol(key.substr(colon + 1).c_str(), nullptr, 10));
        t.lamps.emplace(site, val);
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return t;
}

// Canonical key: position, then lamps sorted by site encoding.
std::string lamp_state_key(long long pos, const std::map<long long, int>& lamps) {
    std::vector<std::pair<std::string, int>> entries;
    entries.reserve(lamps.size());
    for (const auto& [site, val] : lamps) entries.emplace_back(std::to_string(site), val);
    std::sort(entries.begin(), entries.end());
    std::string key = std::to_string(pos);
    key += '@';
    for (std::size_t i = 0; i < entries.size(); ++i) {
        if (i) key += ',';
        key += entries[i].first;
        key += ':';
        key += std::to_string(entries[i].second);
    }
    return key;
}

// The walk word: two disposable rays of length n and three passes over
// the support sweep, concatenated as A A' G B B' G' A A' G B B'.
std::vector<int> wreath_word(const std::vector<int>& sweep, long long gamma) {
    const std::size_t n = sweep.size();
    const int alpha = gamma >= 0 ? -1 : +1; // v-ray direction, away from the target side
    const int beta = -alpha;                // u-ray direction, beyond the target
    std::vector<int> w;
    w.reserve(11 * n);
    auto run = [&](int letter, std::size_t count) { w.insert(w.end(), count, letter); };
    auto sweep_fwd = [&] { w.insert(w.end(), sweep.begin(), sweep.end()); };
    auto sweep_rev = [&] {
        for (std::size_t i = sweep.size(); i-- > 0;) w.push_back(-sweep[i]);
    };
    run(alpha, n);
    run(-alpha, n);
    sweep_fwd();
    run(beta, n);
    run(-beta, n);
    sweep_rev();
    run(alpha, n);
    run(-alpha, n);
    sweep_fwd();
    run(beta, n);
    run(-beta, n);
    return w;
}

} // namespace

EstimateWithCI tau_estimate(const GraphBall& ball, const Process& process, int x, int y,
                            std::uint64_t n, std::uint64_t seed) {
    check_vertex(ball, x, "tau_estimate");
    check_vertex(ball, y, "tau_estimate");
    process.validate(ball);
    if (n < 100) fail("tau_estimate: n must be >= 100");

    PairProbe probe(ball.vertex_count());
    std::uint64_t hits = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
        const Configuration cfg = process.sample(ball, seed, i);
        if (probe.connected(ball, cfg, x, y)) ++hits;
    }
    EstimateWithCI est = wilson_estimate(hits, n, seed);
    est.params = process.param_map();
    est.params["graph"] = ball.spec.to_string();
    est.params["x"] = ball.keys[static_cast<std::size_t>(x)];
    est.params["y"] = ball.keys[static_cast<std::size_t>(y)];
    return est;
}

std::vector<DecayRow> decay_scan(const GraphBall& ball, const Process& process,
                                 const std::vector<int>& distances, int pairs_per_distance,
                                 std::uint64_t n, std::uint64_t seed, const PairFilter& keep) {
    process.validate(ball);
    if (distances.empty()) fail("decay_scan: no distances requested");
    if (pairs_per_distance < 1) fail("decay_scan: pairs_per_distance must be >= 1");
    if (n < 100) fail("decay_scan: n must be >= 100");
    for (int d : distances)
        if (d < 1 || d > 2 * ball.radius - 2)
            fail("decay_scan: distances must lie in [1, 2R-2]");

    std::vector<DecayRow> rows;
    rows.reserve(distances.size());
    std::map<int, std::size_t> row_of;
    for (int d : distances) {
        if (row_of.count(d)) fail("decay_scan: duplicate distance");
        row_of[d] = rows.size();
        rows.push_back(DecayRow{d, false, {}, -1, -1, {}});
    }

    // Deterministic pair sweep in canonical vertex order.
    const std::size_t want = static_cast<std::size_t>(pairs_per_distance);
    std::size_t filled = 0;
    const int v_count = static_cast<int>(ball.vertex_count());
    for (int x = 0; x < v_count && filled < rows.size(); ++x) {
        const auto dist_x = bfs_distances(ball, x);
        for (int y = x + 1; y < v_count; ++y) {
            const auto it = row_of.find(dist_x[static_cast<std::size_t>(y)]);
            if (it == row_of.end()) continue;
            DecayRow& row = rows[it->second];
            if (row.pairs.size() >= want) continue;
            if (keep && !keep(ball, x, y)) continue;
            row.pairs.push_back(PairTau{x, y, {}});
            if (row.pairs.size() == want) ++filled;
        }
    }

    // Shared configurations: per-pair hit counts and per-sample averages.
    std::vector<std::vector<std::uint64_t>> hits(rows.size());
    std::vector<std::vector<double>> per_sample(rows.size());
    for (std::size_t r = 0; r < rows.size(); ++r) {
        hits[r].assign(rows[r].pairs.size(), 0);
        per_sample[r].assign(rows[r].pairs.empty() ? 0 : n, 0.0);
    }
    for (std::uint64_t i = 0; i < n; ++i) {
        const Configuration cfg = process.sample(ball, seed, i);
        const ClusterDecomposition dec = decompose(ball, cfg);
        for (std::size_t r = 0; r < rows.size(); ++r) {
            if (rows[r].pairs.empty()) continue;
            int connected = 0;
            for (std::size_t k = 0; k < rows[r].pairs.size(); ++k) {
                const auto& pr = rows[r].pairs[k];
                if (dec.cluster_of[static_cast<std::size_t>(pr.x)] ==
                    dec.cluster_of[static_cast<std::size_t>(pr.y)]) {
                    ++hits[r][k];
                    ++connected;
                }
            }
            per_sample[r][i] =
                static_cast<double>(connected) / static_cast<double>(rows[r].pairs.size());
        }
    }

    for (std::size_t r = 0; r < rows.size(); ++r) {
        DecayRow& row = rows[r];
        if (row.pairs.empty()) {
            row.flagged = true;
            continue;
        }
        for (std::size_t k = 0; k < row.pairs.size(); ++k) {
            auto& pr = row.pairs[k];
            pr.tau = wilson_estimate(hits[r][k], n, seed);
            pr.tau.params["x"] = ball.keys[static_cast<std::size_t>(pr.x)];
            pr.tau.params["y"] = ball.keys[static_cast<std::size_t>(pr.y)];
            pr.tau.params["distance"] = std::to_string(row.distance);
            if (row.min_index < 0 ||
                pr.tau.value < row.pairs[static_cast<std::size_t>(row.min_index)].tau.value)
                row.min_index = static_cast<int>(k);
            if (row.max_index < 0 ||
                pr.tau.value > row.pairs[static_cast<std::size_t>(row.max_index)].tau.value)
                row.max_index = static_cast<int>(k);
        }
        row.pooled = mean_estimate(per_sample[r], seed);
        row.pooled.params["distance"] = std::to_string(row.distance);
        row.pooled.params["pairs"] = std::to_string(row.pairs.size());
    }
    return rows;
}

std::string decay_csv(const std::vector<DecayRow>& rows, std::uint64_t n, std::uint64_t seed) {
    std::string out = "distance,pair_id,estimate,ci_low,ci_high,n,seed\n";
    for (const auto& row : rows) {
        if (row.flagged) {
            out += std::to_string(row.distance) + ",flagged,,,," + std::to_string(n) + "," +
                   std::to_string(seed) + "\n";
            continue;
        }
        for (std::size_t k = 0; k < row.pairs.size(); ++k) {
            const auto& est = row.pairs[k].tau;
            out += std::to_string(row.distance) + "," + std::to_string(k) + "," +
                   fmt_double(est.value) + "," + fmt_double(est.lo()) + "," +
                   fmt_double(est.hi()) + "," + std::to_string(n) + "," +
                   std::to_string(seed) + "\n";
        }
    }
    return out;
}

int z2z2_cut_count(const std::string& key) {
    return static_cast<int>(std::count(key.begin(), key.end(), 'c'));
}

void fit_and_certify(PathPairStats& stats) {
    if (stats.pairs < 1) fail("fit_and_certify: no sampled pairs");
    long long total = 0;
    for (const auto& [n, cnt] : stats.histogram) {
        if (n < 0 || cnt < 0) fail("fit_and_certify: malformed histogram");
        total += cnt;
    }
    if (total != stats.pairs) fail("fit_and_certify: histogram total != pairs");

    const double denom = static_cast<double>(stats.pairs);
    double theta = 0.0;
    for (const auto& [n, cnt] : stats.histogram) {
        if (n < 1 || cnt == 0) continue;
        theta = std::max(theta, std::pow(static_cast<double>(cnt) / denom,
                                         1.0 / static_cast<double>(n)));
    }
    if (theta == 0.0) // no observed intersections: floor at the resolution limit
        theta = 1.0 / (denom + 1.0);
    double c = 0.0;
    for (const auto& [n, cnt] : stats.histogram) {
        if (cnt == 0) continue;
        c = std::max(c, static_cast<double>(cnt) / denom /
                            std::pow(theta, static_cast<double>(n)));
    }
    stats.theta = theta;
    stats.c = std::max(c, 1e-300);
    bool ok = true;
    for (const auto& [n, cnt] : stats.histogram) {
        const double mass = static_cast<double>(cnt) / denom;
        if (mass > stats.c * std::pow(stats.theta, static_cast<double>(n)) * (1.0 + 1e-9))
            ok = false;
    }
    stats.certified = ok;
}

double eit_bound(const PathPairStats& stats, double p, bool clamp) {
    if (!stats.certified) fail("eit_bound: envelope not certified");
    if (!(stats.c > 0.0) || stats.theta < 0.0) fail("eit_bound: bad envelope parameters");
    if (!(0.0 < p && p < 1.0)) fail("eit_bound: need 0 < p < 1");
    if (stats.theta >= p) {
        if (clamp) return 0.0;
        fail("eit_bound: theta >= p (pass clamp to zero the bound)");
    }
    return (1.0 / stats.c) * (1.0 - stats.theta / p);
}

SampledPath lamplighter_path_sampler(const GraphBall& ball, int target, std::uint64_t seed) {
    if (ball.spec.family != Family::lamplighter || !ball.spec.left ||
        ball.spec.left->family != Family::lattice || ball.spec.left->dim != 1)
        fail("lamplighter_path_sampler: graph must be lamplighter(lattice(1), m)");
    check_vertex(ball, target, "lamplighter_path_sampler");
    const int m = ball.spec.lamp_modulus;
    const LampTarget tgt = parse_lamp_target(ball.keys[static_cast<std::size_t>(target)]);

    // Support sweep: down to the lowest relevant site, up to the highest,
    // back to gamma. It covers every lit site and ends at gamma.
    long long lo = std::min<long long>(0, tgt.gamma), hi = std::max<long long>(0, tgt.gamma);
    for (const auto& [site, val] : tgt.lamps) {
        (void)val;
        lo = std::min(lo, site);
        hi = std::max(hi, site);
    }
    std::vector<int> sweep;
    sweep.insert(sweep.end(), static_cast<std::size_t>(-lo), -1);
    sweep.insert(sweep.end(), static_cast<std::size_t>(hi - lo), +1);
    sweep.insert(sweep.end(), static_cast<std::size_t>(hi - tgt.gamma), -1);
    if (sweep.empty() && !tgt.lamps.empty()) {
        // Lone lit lamp at the origin: a there-and-back bounce visits it.
        sweep = {+1, -1};
    }

    SampledPath path;
    path.vertices.push_back(lamp_state_key(0, {}));
    path.left_ball = !ball.index_of.count(path.vertices.back());
    if (sweep.empty()) return path; // identity target: the empty word

    const std::vector<int> word = wreath_word(sweep, tgt.gamma);
    const std::size_t letters = word.size();

    // Visit lists: which letter indices stand on each site.
    std::map<long long, std::vector<std::size_t>> visits;
    {
        long long pos = 0;
        for (std::size_t j = 0; j < letters; ++j) {
            pos += word[j];
            visits[pos].push_back(j);
        }
    }
    for (const auto& [site, val] : tgt.lamps) {
        (void)val;
        if (!visits.count(site))
            throw std::logic_error("wreath word misses a lit site; word construction bug");
    }

    // Lamp letters: uniform, except the last visit to each site, which is
    // forced so the site's letter product lands on the target value.
    std::vector<int> lamp_letter(letters, 0);
    for (const auto& [site, idx] : visits) {
        int sum = 0;
        for (std::size_t k = 0; k + 1 < idx.size(); ++k) {
            const int draw = uniform_index(
                prf64(seed, 0, "eit-lamp", static_cast<std::uint64_t>(idx[k])), m);
            lamp_letter[idx[k]] = draw;
            sum = (sum + draw) % m;
        }
        const auto it = tgt.lamps.find(site);
        const int want = it == tgt.lamps.end() ? 0 : it->second;
        lamp_letter[idx.back()] = ((want - sum) % m + m) % m;
    }

    // Realize the path: one walk edge per letter, then the lamp letter
    // expanded into its shortest toggle run.
    long long pos = 0;
    std::map<long long, int> lamps;
    auto push_state = [&] {
        path.vertices.push_back(lamp_state_key(pos, lamps));
        path.edges.push_back(
            edge_key_string(path.vertices[path.vertices.size() - 2], path.vertices.back()));
        if (!ball.index_of.count(path.vertices.back())) path.left_ball = true;
    };
    for (std::size_t j = 0; j < letters; ++j) {
        pos += word[j];
        push_state();
        const int k = lamp_letter[j];
        if (k == 0) continue;
        const int step = k <= m - k ? +1 : -1;
        const int turns = std::min(k, m - k);
        for (int t = 0; t < turns; ++t) {
            int& cur = lamps[pos];
            cur = ((cur + step) % m + m) % m;
            if (cur == 0) lamps.erase(pos);
            push_state();
        }
    }
    if (path.vertices.back() != ball.keys[static_cast<std::size_t>(target)])
        throw std::logic_error("sampled path misses its target; word evaluation bug");
    return path;
}

PathPairStats lamplighter_pair_stats(const GraphBall& ball, int target, long long n_pairs,
                                     std::uint64_t seed) {
    if (n_pairs < 1) fail("lamplighter_pair_stats: need at least one pair");
    PathPairStats stats;
    stats.pairs = n_pairs;
    stats.x_key = ball.keys[static_cast<std::size_t>(ball.origin)];
    stats.y_key = ball.keys[static_cast<std::size_t>(target)];
    stats.measure = "wreath-word-mu0";
    long long lost = 0;
    for (long long k = 0; k < n_pairs; ++k) {
        const auto phi = lamplighter_path_sampler(
            ball, target, derive_seed(seed, static_cast<std::uint64_t>(2 * k)));
        const auto psi = lamplighter_path_sampler(
            ball, target, derive_seed(seed, static_cast<std::uint64_t>(2 * k + 1)));
        if (phi.left_ball || psi.left_ball) {
            ++lost; // counted as non-intersecting, conservatively
            stats.histogram[0] += 1;
            continue;
        }
        std::vector<std::string> a(phi.edges), b(psi.edges);
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
        std::sort(b.begin(), b.end());
        b.erase(std::unique(b.begin(), b.end()), b.end());
        std::vector<std::string> shared;
        std::set_intersection(a.begin(), a.end(), b.begin(), b.end(),
                              std::back_inserter(shared));
        stats.histogram[static_cast<long long>(shared.size())] += 1;
    }
    stats.lost_fraction = static_cast<double>(lost) / static_cast<double>(n_pairs);
    fit_and_certify(stats);
    return stats;
}

PathPairStats unique_path_stats(const GraphBall& ball, int target) {
    const Family f = ball.spec.family;
    if (f != Family::regular_tree && f != Family::fixed_end_tree && f != Family::free_group)
        fail("unique_path_stats: paths are unique only on tree families");
    check_vertex(ball, target, "unique_path_stats");
    PathPairStats stats;
    stats.pairs = 1;
    stats.histogram[ball.dist[static_cast<std::size_t>(target)]] = 1;
    stats.x_key = ball.keys[static_cast<std::size_t>(ball.origin)];
    stats.y_key = ball.keys[static_cast<std::size_t>(target)];
    stats.measure = "unique-path";
    fit_and_certify(stats);
    return stats;
}

double lss_bound(double p, int n, int m) {
    if (!(p >= 0.0 && p <= 1.0)) fail("lss_bound: p must be in [0,1]");
    if (n < 1 || m < 1) fail("lss_bound: n and m must be >= 1");
    return std::pow(1.0 - std::pow(1.0 - p, 1.0 / static_cast<double>(m)),
                    static_cast<double>(n));
}

InducedConfig induced_config_across_generators(const GraphBall& ball,
                                               const std::vector<GeneratorWord>& word_map,
                                               const Configuration& cfg) {
    if (ball.spec.family != Family::lattice)
        fail("induced_config_across_generators: supported on lattice balls");
    if (word_map.empty()) fail("induced_config_across_generators: empty word map");
    if (cfg.open.size() != ball.edge_count())
        fail("induced_config_across_generators: configuration does not fit the ball");
    const int dim = ball.spec.dim;
    for (const auto& gw : word_map) {
        if (gw.letters.empty()) fail("induced_config: generator word must be nonempty");
        for (int letter : gw.letters)
            if (letter == 0 || std::abs(letter) > dim)
                fail("induced_config: letter must be a signed axis index");
    }

    InducedConfig out;
    for (const auto& gw : word_map)
        out.block_radius = std::max(out.block_radius, static_cast<int>(gw.letters.size()));

    auto parse_coords = [&](const std::string& key) {
        std::vector<long long> c;
        std::size_t pos = 0;
        for (int d = 0; d < dim; ++d) {
            const std::size_t comma = key.find(',', pos);
            c.push_back(std::strtoll(key.substr(pos, comma - pos).c_str(), nullptr, 10));
            pos = comma == std::string::npos ? key.size() : comma + 1;
        }
        return c;
    };
    auto coords_key = [](const std::vector<long long>& c) {
        std::string s;
        for (std::size_t i = 0; i < c.size(); ++i) {
            if (i) s += ',';
            s += std::to_string(c[i]);
        }
        return s;
    };

    const int v_count = static_cast<int>(ball.vertex_count());
    for (int x = 0; x < v_count; ++x) {
        const auto base = parse_coords(ball.keys[static_cast<std::size_t>(x)]);
        for (const auto& gw : word_map) {
            InducedEdge edge;
            edge.u = x;
            edge.generator = gw.name;
            auto coords = base;
            int cur = x;
            bool open = true, lost = false;
            for (int letter : gw.letters) {
                const int axis = std::abs(letter) - 1;
                coords[static_cast<std::size_t>(axis)] += letter > 0 ? 1 : -1;
                const auto it = ball.index_of.find(coords_key(coords));
                if (it == ball.index_of.end()) {
                    lost = true;
                    break;
                }
                const int next = it->second;
                bool found = false;
                for (const auto& [eid, other] : ball.incident[static_cast<std::size_t>(cur)])
                    if (other == next) {
                        open = open && cfg.is_open(eid);
                        found = true;
                        break;
                    }
                if (!found) throw std::logic_error("adjacent lattice vertices share no edge");
                cur = next;
            }
            edge.lost = lost;
            edge.open = !lost && open;
            edge.v = lost ? -1 : cur;
            if (lost) ++out.lost_count;
            out.edges.push_back(std::move(edge));
        }
    }
    return out;
}

} // namespace percolab
