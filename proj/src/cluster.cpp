#include "percolab/cluster.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace percolab {

namespace {

// Union-find with union by size and path halving.
struct Dsu {
    std::vector<int> parent, sz;
    explicit Dsu(std::size_t n) : parent(n), sz(n, 1) {
        std::iota(parent.begin(), parent.end(), 0);
    }
    int find(int x) {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] =
                parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    bool unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (sz[static_cast<std::size_t>(a)] < sz[static_cast<std::size_t>(b)]) std::swap(a, b);
        parent[static_cast<std::size_t>(b)] = a;
        sz[static_cast<std::size_t>(a)] += sz[static_cast<std::size_t>(b)];
        return true;
    }
};

} // namespace

ClusterDecomposition decompose(const GraphBall& ball, const Configuration& cfg) {
    const std::size_t n = ball.vertex_count();
    if (cfg.open.size() != ball.edge_count())
        throw std::invalid_argument("configuration: edge count mismatch with ball");

    Dsu dsu(n);
    for (std::size_t eid = 0; eid < ball.edges.size(); ++eid)
        if (cfg.open[eid]) dsu.unite(ball.edges[eid].u, ball.edges[eid].v);

    ClusterDecomposition dec;
    dec.cluster_of.assign(n, -1);
    std::vector<int> id_of_root(n, -1);
    for (std::size_t v = 0; v < n; ++v) {
        const int root = dsu.find(static_cast<int>(v));
        int& id = id_of_root[static_cast<std::size_t>(root)];
        if (id < 0) { // v is the least vertex of its cluster
            id = dec.cluster_count();
            dec.least_vertex.push_back(static_cast<int>(v));
            dec.size.push_back(0);
            dec.edge_count.push_back(0);
            dec.spanning.push_back(false);
            dec.min_dist.push_back(ball.dist[v]);
        }
        dec.cluster_of[v] = id;
        dec.size[static_cast<std::size_t>(id)] += 1;
        dec.min_dist[static_cast<std::size_t>(id)] =
            std::min(dec.min_dist[static_cast<std::size_t>(id)], ball.dist[v]);
        if (ball.boundary[v]) dec.spanning[static_cast<std::size_t>(id)] = true;
    }
    for (std::size_t eid = 0; eid < ball.edges.size(); ++eid)
        if (cfg.open[eid])
            dec.edge_count[static_cast<std::size_t>(
                dec.cluster_of[static_cast<std::size_t>(ball.edges[eid].u)])] += 1;
    return dec;
}

int spanning_cluster_count(const GraphBall& ball, const ClusterDecomposition& dec) {
    (void)ball;
    int count = 0;
    for (bool s : dec.spanning)
        if (s) ++count;
    return count;
}

int default_inner_radius(const GraphBall& ball) { return ball.radius / 2; }

bool cluster_eligible(const GraphBall& ball, const ClusterDecomposition& dec, int cluster,
                      int inner_radius) {
    (void)ball;
    const std::size_t c = static_cast<std::size_t>(cluster);
    return dec.spanning[c] && dec.min_dist[c] <= inner_radius;
}

std::vector<int> find_pivotal_edges(const GraphBall& ball, const Configuration& cfg,
                                    const ClusterDecomposition& dec) {
    std::vector<int> out;
    for (std::size_t eid = 0; eid < ball.edges.size(); ++eid) {
        if (cfg.open[eid]) continue;
        const int cu = dec.cluster_of[static_cast<std::size_t>(ball.edges[eid].u)];
        const int cv = dec.cluster_of[static_cast<std::size_t>(ball.edges[eid].v)];
        if (cu != cv && dec.spanning[static_cast<std::size_t>(cu)] &&
            dec.spanning[static_cast<std::size_t>(cv)])
            out.push_back(static_cast<int>(eid));
    }
    return out;
}

double cluster_density(const GraphBall& ball, const ClusterDecomposition& dec, int cluster) {
    return static_cast<double>(dec.size[static_cast<std::size_t>(cluster)]) /
           static_cast<double>(ball.vertex_count());
}

double cluster_mean_degree(const ClusterDecomposition& dec, int cluster) {
    const std::size_t c = static_cast<std::size_t>(cluster);
    return 2.0 * static_cast<double>(dec.edge_count[c]) / static_cast<double>(dec.size[c]);
}

int cluster_boundary_contacts(const GraphBall& ball, const ClusterDecomposition& dec, int cluster) {
    int count = 0;
    for (std::size_t v = 0; v < ball.vertex_count(); ++v)
        if (ball.boundary[v] && dec.cluster_of[v] == cluster) ++count;
    return count;
}

int cluster_ends_proxy(const GraphBall& ball, const Configuration& cfg,
                       const ClusterDecomposition& dec, int cluster) {
    // Components of the cluster restricted to the two outermost layers,
    // counting only components that actually contain a boundary vertex.
    const int shell_floor = ball.radius - 1;
    const std::size_t n = ball.vertex_count();
    std::vector<int> comp(n, -1);
    int next = 0, with_boundary = 0;
    std::vector<int> stack;
    for (std::size_t v = 0; v < n; ++v) {
        if (comp[v] >= 0 || dec.cluster_of[v] != cluster || ball.dist[v] < shell_floor) continue;
        bool touches = false;
        comp[v] = next;
        stack.push_back(static_cast<int>(v));
        while (!stack.empty()) {
            const int x = stack.back();
            stack.pop_back();
            if (ball.boundary[static_cast<std::size_t>(x)]) touches = true;
            for (const auto& [eid, y] : ball.incident[static_cast<std::size_t>(x)]) {
                if (!cfg.open[static_cast<std::size_t>(eid)]) continue;
                if (ball.dist[static_cast<std::size_t>(y)] < shell_floor) continue;
                if (comp[static_cast<std::size_t>(y)] >= 0) continue;
                comp[static_cast<std::size_t>(y)] = next;
                stack.push_back(y);
            }
        }
        if (touches) ++with_boundary;
        ++next;
    }
    return with_boundary;
}

ClusterPcEstimate cluster_pc_estimate(const GraphBall& ball, const Configuration& cfg,
                                      const ClusterDecomposition& dec, int cluster,
                                      const std::vector<double>& grid, std::uint64_t replicates,
                                      std::uint64_t seed, double threshold) {
    if (grid.empty()) throw std::invalid_argument("grid: must be non-empty");
    for (std::size_t i = 1; i < grid.size(); ++i)
        if (grid[i] <= grid[i - 1]) throw std::invalid_argument("grid: must be strictly increasing");
    if (replicates == 0) throw std::invalid_argument("replicates: must be positive");
    if (threshold <= 0.0 || threshold >= 1.0)
        throw std::invalid_argument("threshold: must be in (0,1)");
    const std::size_t c = static_cast<std::size_t>(cluster);
    if (!dec.spanning[c])
        throw std::invalid_argument("cluster: pc estimate requires a spanning cluster");

    // Cluster-internal edges and the vertices involved.
    std::vector<int> edge_ids;
    for (std::size_t eid = 0; eid < ball.edges.size(); ++eid)
        if (cfg.open[eid] &&
            dec.cluster_of[static_cast<std::size_t>(ball.edges[eid].u)] == cluster)
            edge_ids.push_back(static_cast<int>(eid));

    const int least = dec.least_vertex[c];
    const std::size_t n = ball.vertex_count();

    std::vector<int> cluster_boundary;
    for (std::size_t v = 0; v < n; ++v)
        if (ball.boundary[v] && dec.cluster_of[v] == cluster)
            cluster_boundary.push_back(static_cast<int>(v));

    // One critical label per replicate: add cluster edges in label order
    // until the least vertex reaches the boundary.
    std::vector<double> critical;
    critical.reserve(replicates);
    std::vector<std::pair<double, int>> labeled(edge_ids.size());
    Dsu dsu(n + 1); // extra node n pools all boundary vertices
    const int kBoundaryNode = static_cast<int>(n);
    if (ball.boundary[static_cast<std::size_t>(least)]) {
        critical.assign(replicates, 0.0);
    } else {
        for (std::uint64_t rep = 0; rep < replicates; ++rep) {
            for (std::size_t i = 0; i < edge_ids.size(); ++i) {
                const auto& e = ball.edges[static_cast<std::size_t>(edge_ids[i])];
                labeled[i] = {u01(prf64(seed, rep, "pc-thin", e.base_hash)), edge_ids[i]};
            }
            std::sort(labeled.begin(), labeled.end());

            for (int v : cluster_boundary) dsu.unite(v, kBoundaryNode);
            double crit = 1.0;
            for (const auto& [lab, eid] : labeled) {
                const auto& e = ball.edges[static_cast<std::size_t>(eid)];
                dsu.unite(e.u, e.v);
                if (dsu.find(least) == dsu.find(kBoundaryNode)) {
                    crit = lab;
                    break;
                }
            }
            critical.push_back(crit);
            // Targeted reset: only vertices that ever entered a union are
            // mutated, and all of them are listed below.
            auto reset = [&](int v) {
                dsu.parent[static_cast<std::size_t>(v)] = v;
                dsu.sz[static_cast<std::size_t>(v)] = 1;
            };
            reset(kBoundaryNode);
            reset(least);
            for (int v : cluster_boundary) reset(v);
            for (const auto& [lab, eid] : labeled) {
                (void)lab;
                const auto& e = ball.edges[static_cast<std::size_t>(eid)];
                reset(e.u);
                reset(e.v);
            }
        }
    }

    std::sort(critical.begin(), critical.end());
    ClusterPcEstimate est;
    est.grid = grid;
    est.replicates = replicates;
    est.spanning_probability.resize(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const auto it = std::upper_bound(critical.begin(), critical.end(), grid[i]);
        est.spanning_probability[i] =
            static_cast<double>(it - critical.begin()) / static_cast<double>(replicates);
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (est.spanning_probability[i] >= threshold) {
            est.crossed = true;
            if (i == 0) {
                // Anchor at q = 0 with the exact mass of zero criticals,
                // so clusters born spanning report a zero crossing.
                const auto z = std::upper_bound(critical.begin(), critical.end(), 0.0);
                const double p0 =
                    static_cast<double>(z - critical.begin()) / static_cast<double>(replicates);
                const double y1 = est.spanning_probability[0];
                const double t = p0 >= threshold ? 0.0
                                 : y1 > p0       ? (threshold - p0) / (y1 - p0)
                                                 : 1.0;
                est.crossing = t * grid[0];
            } else {
                const double y0 = est.spanning_probability[i - 1];
                const double y1 = est.spanning_probability[i];
                const double t = y1 > y0 ? (threshold - y0) / (y1 - y0) : 1.0;
                est.crossing = grid[i - 1] + t * (grid[i] - grid[i - 1]);
            }
            break;
        }
    }
    return est;
}

double heavy_weight(const GraphBall& ball, const ClusterDecomposition& dec, int cluster) {
    if (ball.spec.family != Family::fixed_end_tree)
        throw std::invalid_argument("family: heavy_weight requires fixed_end_tree");
    double total = 0.0;
    for (std::size_t v = 0; v < ball.vertex_count(); ++v)
        if (dec.cluster_of[v] == cluster)
            total += std::pow(2.0, -static_cast<double>(ball.height[v]));
    return total;
}

int cluster_min_height_vertex(const GraphBall& ball, const ClusterDecomposition& dec, int cluster) {
    if (ball.spec.family != Family::fixed_end_tree)
        throw std::invalid_argument("family: min-height vertex requires fixed_end_tree");
    int best = -1;
    for (std::size_t v = 0; v < ball.vertex_count(); ++v) {
        if (dec.cluster_of[v] != cluster) continue;
        if (best < 0 || ball.height[v] < ball.height[static_cast<std::size_t>(best)])
            best = static_cast<int>(v);
    }
    return best;
}

int cluster_min_height_degree(const GraphBall& ball, const Configuration& cfg,
                              const ClusterDecomposition& dec, int cluster) {
    const int v = cluster_min_height_vertex(ball, dec, cluster);
    int deg = 0;
    for (const auto& [eid, other] : ball.incident[static_cast<std::size_t>(v)]) {
        (void)other;
        if (cfg.open[static_cast<std::size_t>(eid)]) ++deg;
    }
    return deg;
}

} // namespace percolab
