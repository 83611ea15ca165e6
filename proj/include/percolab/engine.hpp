#pragma once

#include "percolab/graph.hpp"
#include "percolab/rand.hpp"
#include "percolab/stats.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace percolab {

// Open/closed assignment for every edge of a ball, plus the provenance
// needed to regenerate it bit-exactly.
struct Provenance {
    std::string process;                        // "bernoulli", "delet", ...
    std::map<std::string, std::string> params;  // canonical text values
    std::uint64_t seed = 0;
    std::uint64_t sample = 0;
    std::vector<std::string> surgery_log;       // "+<edge key>" / "-<edge key>"
};

struct Configuration {
    std::vector<std::uint8_t> open; // per edge id
    Provenance provenance;

    bool is_open(int edge_id) const { return open[static_cast<std::size_t>(edge_id)] != 0; }
    std::size_t open_count() const;
    bool subset_of(const Configuration& other) const;
};

// The shared uniform label of an edge: one number per
// (seed, sample, edge), reused by every p so that configurations at
// different p are monotone-coupled by construction.
double edge_value(const CouplingSeed& seed, std::uint64_t edge_base_hash);
double edge_value(const CouplingSeed& seed, const GraphBall& ball, int edge_id);

// Bernoulli(p): edge open iff its label is strictly below p.
Configuration sample_bernoulli(const GraphBall& ball, double p, const CouplingSeed& seed);

// Surgery. Logged so a surgered configuration can be replayed.
void insert_edge(const GraphBall& ball, Configuration& cfg, int edge_id);
void delete_edge(const GraphBall& ball, Configuration& cfg, int edge_id);

// Per-cluster colors: a color is drawn for every vertex index from an
// i.i.d. uniform palette stream, and a cluster wears the color of its
// least vertex.
struct ColoredConfig {
    Configuration cfg;
    std::vector<int> cluster_color; // per cluster id
    std::vector<int> color;         // per vertex
    int palette = 0;
};
ColoredConfig color_clusters(const GraphBall& ball, const Configuration& cfg, int palette,
                             const CouplingSeed& seed);

// Two-population process on the 3-regular tree: Bernoulli(p) clusters,
// a fair coin per cluster (keyed by its least vertex), and coin-true
// clusters intersected with an independent Bernoulli(p_prime) thinning.
// Requires p in (1/2, 1) and p_prime in (1/(2p), 1].
Configuration delet_process(const GraphBall& ball, double p, double p_prime,
                            const CouplingSeed& seed);

// On product(free_group(2), lattice(2)): lattice-direction edges open at
// 1/2, then an independent Bernoulli(eps) sprinkle on all edges is
// unioned in.
Configuration fiber_process(const GraphBall& ball, double eps, const CouplingSeed& seed);

// On lattice(3): fair coins a(x1) select slabs A; edges inside A open at
// 1 - eps, a sparse Bernoulli(eps) layer everywhere, and edges at
// 1 - eps on the part untouched by either. eps in (0, eps_max).
inline constexpr double kSlabEpsMax = 0.05;
Configuration slab_process(const GraphBall& ball, double eps, const CouplingSeed& seed);

// An interface for "sample the k-th configuration of this process".
struct Process {
    std::string kind; // bernoulli | delet | fiber | slab
    double p = 0.5;
    double p_prime = 1.0;
    double eps = 0.0;

    Configuration sample(const GraphBall& ball, std::uint64_t experiment_seed,
                         std::uint64_t sample_index) const;
    void validate(const GraphBall& ball) const;
    std::map<std::string, std::string> param_map() const;
};

// Regenerate a configuration from its provenance (surgery replayed).
Configuration regenerate(const GraphBall& ball, const Provenance& prov);

// Monte Carlo estimate of P[edge open | rest of the configuration],
// bucketing samples by the restriction of the configuration to edges
// within graph distance `bucket_radius` of e. Buckets with fewer than
// `min_bucket` hits are reported as insufficient rather than folded in.
struct BucketStat {
    std::string pattern;     // open bits of the neighborhood edges, sorted by edge id
    std::uint64_t count = 0; // samples landing in this bucket
    std::uint64_t open = 0;  // of those, samples with e open
};
struct ConditionalMarginal {
    EstimateWithCI estimate;            // pooled over well-filled buckets
    std::vector<BucketStat> buckets;    // every observed bucket, largest first
    std::size_t buckets_used = 0;
    std::size_t buckets_insufficient = 0;
    bool flagged = false;               // some bucket was too thin (or none usable)
};
ConditionalMarginal conditional_marginal_estimate(const GraphBall& ball, const Process& process,
                                                  int edge_id, std::uint64_t n,
                                                  std::uint64_t seed, int bucket_radius = 1,
                                                  std::uint64_t min_bucket = 8);

// Serialization: provenance header plus the open edge keys.
std::string export_configuration(const GraphBall& ball, const Configuration& cfg);

} // namespace percolab
