#pragma once

#include "percolab/cluster.hpp"
#include "percolab/engine.hpp"
#include "percolab/graph.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace percolab {

// Delayed simple random walk: propose a uniform graph neighbor, accept
// the move only when the connecting edge is open. Walks stop (flagged)
// on boundary vertices, where the neighbor set is cut off; a walk of at
// most radius-1 steps from the origin never gets there, so short-horizon
// laws match the infinite graph exactly.
struct WalkTrajectory {
    int start = 0;
    std::vector<int> forward;            // vertex at times 0, 1, ...
    std::vector<int> backward;           // vertex at times -1, -2, ...
    std::vector<int> proposal_forward;   // proposed vertex per forward step
    std::vector<int> proposal_backward;  // same for the backward half
    bool truncated_forward = false;
    bool truncated_backward = false;
    std::uint64_t seed = 0;

    bool truncated() const { return truncated_forward || truncated_backward; }
    long long min_time() const { return -static_cast<long long>(backward.size()); }
    long long max_time() const { return static_cast<long long>(forward.size()) - 1; }
    int at(long long t) const; // vertex at time t, valid in [min_time, max_time]
};

WalkTrajectory delayed_walk(const GraphBall& ball, const Configuration& cfg, int start,
                            long long steps, std::uint64_t seed);

// Independent forward and backward halves from the same start on the
// same configuration.
WalkTrajectory two_sided_walk(const GraphBall& ball, const Configuration& cfg, int start,
                              long long steps, std::uint64_t seed);

// Visit frequencies per cluster over the window [m, n), plus the
// cumulative counts of the j most visited clusters for j = 1..top_j.
struct FrequencyTable {
    long long window_begin = 0;
    long long window_end = 0;
    std::map<int, double> alpha;          // cluster id -> visit frequency
    std::vector<long long> top_counts;    // [j-1] = visits to the top j clusters
};
FrequencyTable visit_frequencies(const WalkTrajectory& traj, const ClusterDecomposition& dec,
                                 long long m, long long n, int top_j = 8);

// Top-j counts over the full forward window versus the same counts
// accumulated separately on [0, split) and [split, end): the whole never
// exceeds the sum of the parts.
std::pair<long long, long long> subadditivity_check(const WalkTrajectory& traj,
                                                    const ClusterDecomposition& dec, int j,
                                                    long long split);

// Distribution comparison of a walk statistic at two interior times.
// Menu statistics ("moved", "cluster_size") are invariant in law and
// certified; anything else runs uncertified (notably the positive
// control "distance", which drifts).
struct StationarityReport {
    std::string statistic;
    bool certified = false;
    long long t1 = 0, t2 = 0;
    double mean1 = 0.0, mean2 = 0.0;
    double z = 0.0;
    double p = 1.0;
    double threshold = 0.01;
    bool stationary = false; // p-value above threshold
    std::uint64_t walks = 0;
};
StationarityReport stationarity_check(const GraphBall& ball, const Process& process,
                                      const std::string& statistic, std::uint64_t n_walks,
                                      long long steps, std::uint64_t seed, long long t1 = 0,
                                      long long t2 = 0);

struct ReturnStats {
    long long returns = 0;          // forward times t >= 1 with W(t) = start
    long long last_return = 0;      // largest such t, 0 when none
};
ReturnStats return_statistics(const WalkTrajectory& traj);

// CSV rows: time,vertex_key,cluster_id,moved,truncated.
std::string trajectory_csv(const GraphBall& ball, const WalkTrajectory& traj,
                           const ClusterDecomposition& dec);

} // namespace percolab
