#pragma once

#include "percolab/engine.hpp"
#include "percolab/graph.hpp"
#include "percolab/stats.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace percolab {

// P[x and y share a cluster] over n independent configurations.
EstimateWithCI tau_estimate(const GraphBall& ball, const Process& process, int x, int y,
                            std::uint64_t n, std::uint64_t seed);

// Pair connectivity swept over distances. Pairs are enumerated
// deterministically: x ascending in canonical vertex order, then y > x
// in the same order, keeping the first pairs_per_distance at each
// requested distance (optionally filtered). All pairs at one distance
// share the same n sampled configurations; per-pair CIs are Wilson,
// the pooled row mean gets a normal CI over per-sample pair averages.
struct PairTau {
    int x = 0, y = 0;
    EstimateWithCI tau;
};
struct DecayRow {
    int distance = 0;
    bool flagged = false; // no eligible pair found
    std::vector<PairTau> pairs;
    int min_index = -1, max_index = -1; // extremal point estimates
    EstimateWithCI pooled;
};
using PairFilter = std::function<bool(const GraphBall&, int, int)>;
std::vector<DecayRow> decay_scan(const GraphBall& ball, const Process& process,
                                 const std::vector<int>& distances, int pairs_per_distance,
                                 std::uint64_t n, std::uint64_t seed, const PairFilter& keep = {});

// CSV rows: distance, pair_id, estimate, ci_low, ci_high, n, seed.
std::string decay_csv(const std::vector<DecayRow>& rows, std::uint64_t n, std::uint64_t seed);

// Number of involution letters separating the sheet of `key` from the
// origin sheet of the two-dimensional free-product graph. Every path
// between the sheets crosses that many cut edges, so tau <= p^count.
int z2z2_cut_count(const std::string& key);

// Intersection-size histogram over sampled path pairs, with a fitted
// geometric envelope: histogram mass at every n is <= c * theta^n.
// The fit takes the least theta whose envelope needs no constant above
// one (theta = max over n >= 1 of mass(n)^(1/n); c = the exact sup of
// mass(n)/theta^n), then a direct scan certifies domination.
struct PathPairStats {
    std::map<long long, long long> histogram; // shared-edge count -> pairs
    long long pairs = 0;
    double c = 1.0;
    double theta = 0.0;
    bool certified = false;
    std::string x_key, y_key; // path endpoints
    std::string measure;      // path measure tag
    double lost_fraction = 0.0; // pairs zeroed because a path left the ball
};
void fit_and_certify(PathPairStats& stats);

// Second-moment connectivity lower bound c^-1 (1 - theta/p) from a
// certified envelope. theta >= p yields 0 with clamp, an error without.
double eit_bound(const PathPairStats& stats, double p, bool clamp = false);

// One path from the group identity to `target` on lamplighter(lattice(1), m),
// realized as alternating walk letters and lamp letters: the walk word
// sweeps two disposable rays and three passes over the support interval,
// and the lamp letters are uniform in Z_m subject to the per-site
// product landing on the target lamp pattern (the last visit to each
// site is forced). Lamp letters beyond +-1 expand into shortest toggle
// runs. Paths are built symbolically, so they never truncate; vertices
// outside the ball only raise the left_ball flag.
struct SampledPath {
    std::vector<std::string> vertices; // identity first
    std::vector<std::string> edges;    // canonical edge keys in traversal order
    bool left_ball = false;
};
SampledPath lamplighter_path_sampler(const GraphBall& ball, int target, std::uint64_t seed);

// Histogram of |phi ∩ psi| over n_pairs independent path pairs from the
// sampler above, fitted and certified. Pairs where either path leaves
// the ball are counted as non-intersecting and reported in lost_fraction.
PathPairStats lamplighter_pair_stats(const GraphBall& ball, int target, long long n_pairs,
                                     std::uint64_t seed);

// Point mass on the unique tree path: all pair mass sits at the path
// length, so the fit degenerates (theta = 1) and the bound clamps to 0.
PathPairStats unique_path_stats(const GraphBall& ball, int target);

// Domination bound (1 - (1-p)^(1/m))^n for splitting each of n edges
// into m stages.
double lss_bound(double p, int n, int m);

// Percolation induced across generating sets: each edge of the word
// graph opens iff its image path is fully open in the sampled
// configuration. Words are signed lattice steps (+k/-k = axis k), so the
// demonstration pairs are lattice generating sets.
struct GeneratorWord {
    std::string name;
    std::vector<int> letters;
};
struct InducedEdge {
    int u = -1, v = -1; // ball vertex indices; v = -1 when lost
    std::string generator;
    bool open = false;
    bool lost = false; // image path leaves the ball
};
struct InducedConfig {
    std::vector<InducedEdge> edges;
    int block_radius = 0; // longest word: dependence range of induced edges
    std::size_t lost_count = 0;
};
InducedConfig induced_config_across_generators(const GraphBall& ball,
                                               const std::vector<GeneratorWord>& word_map,
                                               const Configuration& cfg);

} // namespace percolab
