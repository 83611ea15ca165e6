#pragma once

#include "percolab/engine.hpp"
#include "percolab/graph.hpp"

#include <cstdint>
#include <vector>

namespace percolab {

// Partition of the vertex set into open clusters. Cluster ids follow
// least-vertex order: cluster 0 contains the smallest vertex index,
// cluster 1 the smallest index outside cluster 0, and so on. Isolated
// vertices are singleton clusters.
struct ClusterDecomposition {
    std::vector<int> cluster_of;        // per vertex
    std::vector<int> least_vertex;      // per cluster
    std::vector<int> size;              // per cluster
    std::vector<int> edge_count;        // open edges inside the cluster
    std::vector<bool> spanning;         // touches a boundary vertex
    std::vector<int> min_dist;          // least graph distance from origin
    int cluster_count() const { return static_cast<int>(least_vertex.size()); }
};

ClusterDecomposition decompose(const GraphBall& ball, const Configuration& cfg);

// Number of boundary-touching clusters.
int spanning_cluster_count(const GraphBall& ball, const ClusterDecomposition& dec);

// A cluster "looks infinite at this scale" when it joins the inner ball
// (distance <= inner_radius) to the boundary shell. Used as the
// infinite-cluster proxy by every population-level statistic.
bool cluster_eligible(const GraphBall& ball, const ClusterDecomposition& dec, int cluster,
                      int inner_radius);
int default_inner_radius(const GraphBall& ball);

// Closed edges whose endpoints lie in different spanning clusters;
// inserting any one of them drops the spanning count by exactly one.
std::vector<int> find_pivotal_edges(const GraphBall& ball, const Configuration& cfg,
                                    const ClusterDecomposition& dec);

// Per-cluster statistics drawn from the fixed menu.
double cluster_density(const GraphBall& ball, const ClusterDecomposition& dec, int cluster);
double cluster_mean_degree(const ClusterDecomposition& dec, int cluster);

// Number of connected components of the cluster's trace on the two-layer
// boundary shell (distance >= radius-1) that contain a boundary vertex;
// computed by a BFS restricted to the shell. Always <= the number of
// boundary vertices in the cluster.
int cluster_ends_proxy(const GraphBall& ball, const Configuration& cfg,
                       const ClusterDecomposition& dec, int cluster);

int cluster_boundary_contacts(const GraphBall& ball, const ClusterDecomposition& dec, int cluster);

// Sub-percolation threshold estimate for one cluster. Each replicate
// draws one uniform label per cluster edge and records the smallest q at
// which the cluster's least vertex reaches the boundary through edges
// with labels < q (an incremental union of edges in label order).
// spanning_probability[i] is then the fraction of replicates whose
// critical label is <= grid[i]; the estimate interpolates the grid
// crossing of `threshold`.
struct ClusterPcEstimate {
    std::vector<double> grid;
    std::vector<double> spanning_probability;
    double crossing = 1.0;    // interpolated; 1.0 when never crossing
    bool crossed = false;
    std::uint64_t replicates = 0;
};
ClusterPcEstimate cluster_pc_estimate(const GraphBall& ball, const Configuration& cfg,
                                      const ClusterDecomposition& dec, int cluster,
                                      const std::vector<double>& grid, std::uint64_t replicates,
                                      std::uint64_t seed, double threshold = 0.5);

// Sum of 2^{-height} over the cluster's vertices (fixed_end_tree only).
double heavy_weight(const GraphBall& ball, const ClusterDecomposition& dec, int cluster);

// Degree, within the configuration, of the cluster's unique
// minimum-height vertex (fixed_end_tree only).
int cluster_min_height_vertex(const GraphBall& ball, const ClusterDecomposition& dec, int cluster);
int cluster_min_height_degree(const GraphBall& ball, const Configuration& cfg,
                              const ClusterDecomposition& dec, int cluster);

} // namespace percolab
