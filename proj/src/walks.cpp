#include "percolab/walks.hpp"

#include "percolab/rand.hpp"
#include "percolab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace percolab {
namespace {

[[noreturn]] void fail(const std::string& what) { throw std::invalid_argument(what); }

// One half of a walk: vertices visited and the proposal record.
void run_half(const GraphBall& ball, const Configuration& cfg, int start, long long steps,
              std::uint64_t seed, std::string_view domain, std::vector<int>& path,
              std::vector<int>& proposals, bool& truncated) {
    path.clear();
    proposals.clear();
    truncated = false;
    int v = start;
    for (long long t = 0; t < steps; ++t) {
        if (ball.boundary[static_cast<std::size_t>(v)]) {
            truncated = true; // neighbor set is cut off here; stop
            return;
        }
        const auto& nb = ball.adj[static_cast<std::size_t>(v)];
        const std::uint64_t h = prf64(seed, 0, domain, static_cast<std::uint64_t>(t));
        const int w = nb[uniform_index(h, nb.size())];
        proposals.push_back(w);
        bool open = false;
        for (const auto& [eid, other] : ball.incident[static_cast<std::size_t>(v)])
            if (other == w && cfg.is_open(eid)) {
                open = true;
                break;
            }
        if (open) v = w;
        path.push_back(v);
    }
}

double walk_statistic(const GraphBall& ball, const ClusterDecomposition& dec,
                      const WalkTrajectory& traj, const std::string& statistic, long long t) {
    if (statistic == "moved") return traj.at(t + 1) != traj.at(t) ? 1.0 : 0.0;
    if (statistic == "cluster_size")
        return static_cast<double>(
            dec.size[static_cast<std::size_t>(dec.cluster_of[static_cast<std::size_t>(traj.at(t))])]);
    if (statistic == "distance")
        return static_cast<double>(ball.dist[static_cast<std::size_t>(traj.at(t))]);
    fail("stationarity: unknown statistic '" + statistic + "'");
}

} // namespace

int WalkTrajectory::at(long long t) const {
    if (t >= 0) {
        if (t > max_time()) fail("walk time beyond the trajectory");
        return forward[static_cast<std::size_t>(t)];
    }
    if (t < min_time()) fail("walk time beyond the trajectory");
    return backward[static_cast<std::size_t>(-t - 1)];
}

WalkTrajectory delayed_walk(const GraphBall& ball, const Configuration& cfg, int start,
                            long long steps, std::uint64_t seed) {
    if (start < 0 || static_cast<std::size_t>(start) >= ball.vertex_count())
        fail("delayed_walk: start vertex outside the ball");
    if (steps < 1) fail("delayed_walk: steps must be >= 1");
    WalkTrajectory traj;
    traj.start = start;
    traj.seed = seed;
    std::vector<int> path, props;
    run_half(ball, cfg, start, steps, seed, "walk-fwd", path, props, traj.truncated_forward);
    traj.forward.reserve(path.size() + 1);
    traj.forward.push_back(start);
    traj.forward.insert(traj.forward.end(), path.begin(), path.end());
    traj.proposal_forward = std::move(props);
    return traj;
}

WalkTrajectory two_sided_walk(const GraphBall& ball, const Configuration& cfg, int start,
                              long long steps, std::uint64_t seed) {
    WalkTrajectory traj = delayed_walk(ball, cfg, start, steps, seed);
    std::vector<int> path, props;
    run_half(ball, cfg, start, steps, seed, "walk-bwd", path, props, traj.truncated_backward);
    traj.backward = std::move(path);
    traj.proposal_backward = std::move(props);
    return traj;
}

FrequencyTable visit_frequencies(const WalkTrajectory& traj, const ClusterDecomposition& dec,
                                 long long m, long long n, int top_j) {
    if (m >= n) fail("visit_frequencies: empty window");
    if (m < traj.min_time() || n > traj.max_time() + 1)
        fail("visit_frequencies: window outside the trajectory");
    if (top_j < 1) fail("visit_frequencies: top_j must be >= 1");

    FrequencyTable table;
    table.window_begin = m;
    table.window_end = n;
    std::map<int, long long> counts;
    for (long long t = m; t < n; ++t)
        counts[dec.cluster_of[static_cast<std::size_t>(traj.at(t))]] += 1;
    const double span = static_cast<double>(n - m);
    for (const auto& [c, k] : counts) table.alpha[c] = static_cast<double>(k) / span;

    std::vector<long long> sorted;
    sorted.reserve(counts.size());
    for (const auto& [c, k] : counts) sorted.push_back(k);
    std::sort(sorted.begin(), sorted.end(), std::greater<>());
    table.top_counts.resize(static_cast<std::size_t>(top_j));
    long long acc = 0;
    for (int j = 0; j < top_j; ++j) {
        if (static_cast<std::size_t>(j) < sorted.size()) acc += sorted[static_cast<std::size_t>(j)];
        table.top_counts[static_cast<std::size_t>(j)] = acc;
    }
    return table;
}

std::pair<long long, long long> subadditivity_check(const WalkTrajectory& traj,
                                                    const ClusterDecomposition& dec, int j,
                                                    long long split) {
    const long long end = traj.max_time() + 1;
    if (split <= 0 || split >= end) fail("subadditivity_check: split outside the window");
    const auto whole = visit_frequencies(traj, dec, 0, end, j);
    const auto head = visit_frequencies(traj, dec, 0, split, j);
    const auto tail = visit_frequencies(traj, dec, split, end, j);
    const long long lhs = whole.top_counts[static_cast<std::size_t>(j - 1)];
    const long long rhs = head.top_counts[static_cast<std::size_t>(j - 1)] +
                          tail.top_counts[static_cast<std::size_t>(j - 1)];
    if (lhs > rhs) throw std::logic_error("subadditivity violated; counting bug");
    return {lhs, rhs};
}

StationarityReport stationarity_check(const GraphBall& ball, const Process& process,
                                      const std::string& statistic, std::uint64_t n_walks,
                                      long long steps, std::uint64_t seed, long long t1,
                                      long long t2) {
    process.validate(ball);
    if (n_walks < 2) fail("stationarity: need at least two walks");
    if (statistic != "moved" && statistic != "cluster_size" && statistic != "distance")
        fail("stationarity: unknown statistic '" + statistic + "'");
    const bool is_torus = ball.spec.family == Family::torus;
    // Bernoulli acceptance needs only the states of proposed edges, so
    // the "moved" observable can walk the infinite graph symbolically:
    // no ball, no boundary, any horizon.
    const bool symbolic = process.kind == "bernoulli" && statistic == "moved" && !is_torus;
    // A materialized walk of at most radius-1 steps has exactly the
    // infinite-graph law: the walker cannot see the boundary.
    if (!symbolic && !is_torus && steps > ball.radius - 1)
        fail("stationarity: steps must stay below the ball radius for an exact walk law");
    if (t1 == 0 && t2 == 0) {
        t1 = std::max<long long>(1, steps / 8);
        t2 = (3 * steps) / 4;
    }
    if (!(0 <= t1 && t1 < t2 && t2 + 1 <= steps))
        fail("stationarity: need 0 <= t1 < t2 and t2 + 1 <= steps");

    StationarityReport report;
    report.statistic = statistic;
    report.certified = statistic == "moved" || statistic == "cluster_size";
    report.t1 = t1;
    report.t2 = t2;
    report.walks = n_walks;

    std::vector<double> a, b;
    a.reserve(n_walks);
    b.reserve(n_walks);
    const bool needs_clusters = statistic == "cluster_size";
    for (std::uint64_t i = 0; i < n_walks; ++i) {
        if (symbolic) {
            // "Moved at t" is the acceptance of the proposal at step t.
            const std::uint64_t walk_seed = derive_seed(seed, i);
            std::string cur = ball.keys[static_cast<std::size_t>(ball.origin)];
            for (long long t = 0; t <= t2; ++t) {
                const auto nb = neighbor_keys(ball.spec, cur);
                const std::uint64_t h = prf64(walk_seed, 0, "walk-fwd",
                                              static_cast<std::uint64_t>(t));
                const std::string& w = nb[uniform_index(h, nb.size())].first;
                const bool open =
                    u01(prf64(seed, i, "edge", edge_hash(cur, w))) < process.p;
                if (t == t1) a.push_back(open ? 1.0 : 0.0);
                if (t == t2) b.push_back(open ? 1.0 : 0.0);
                if (open) cur = w;
            }
            continue;
        }
        const Configuration cfg = process.sample(ball, seed, i);
        ClusterDecomposition dec;
        if (needs_clusters) dec = decompose(ball, cfg);
        const WalkTrajectory traj =
            delayed_walk(ball, cfg, ball.origin, steps, derive_seed(seed, i));
        a.push_back(walk_statistic(ball, dec, traj, statistic, t1));
        b.push_back(walk_statistic(ball, dec, traj, statistic, t2));
    }

    double m1 = 0, m2 = 0;
    for (double x : a) m1 += x;
    for (double x : b) m2 += x;
    m1 /= static_cast<double>(n_walks);
    m2 /= static_cast<double>(n_walks);
    report.mean1 = m1;
    report.mean2 = m2;

    if (statistic == "moved") {
        // Two-proportion z-test with a pooled variance.
        const double pool = (m1 + m2) / 2.0;
        const double var = pool * (1.0 - pool) * 2.0 / static_cast<double>(n_walks);
        if (var > 0) {
            report.z = (m1 - m2) / std::sqrt(var);
            report.p = 2.0 * (1.0 - normal_cdf(std::abs(report.z)));
        } else {
            report.z = 0.0;
            report.p = 1.0;
        }
    } else {
        const RankTestResult mw = mann_whitney(a, b);
        report.z = mw.z;
        report.p = mw.p;
    }
    report.stationary = report.p > report.threshold;
    return report;
}

ReturnStats return_statistics(const WalkTrajectory& traj) {
    ReturnStats stats;
    for (long long t = 1; t <= traj.max_time(); ++t)
        if (traj.at(t) == traj.start) {
            stats.returns += 1;
            stats.last_return = t;
        }
    return stats;
}

std::string trajectory_csv(const GraphBall& ball, const WalkTrajectory& traj,
                           const ClusterDecomposition& dec) {
    std::string out = "time,vertex_key,cluster_id,moved,truncated\n";
    for (long long t = traj.min_time(); t <= traj.max_time(); ++t) {
        const int v = traj.at(t);
        const bool moved = t < traj.max_time() && traj.at(t + 1) != v;
        const bool trunc = (t == traj.max_time() && traj.truncated_forward) ||
                           (t == traj.min_time() && t < 0 && traj.truncated_backward);
        out += std::to_string(t) + "," + ball.keys[static_cast<std::size_t>(v)] + "," +
               std::to_string(dec.cluster_of[static_cast<std::size_t>(v)]) + "," +
               (moved ? "1" : "0") + "," + (trunc ? "1" : "0") + "\n";
    }
    return out;
}

} // namespace percolab
