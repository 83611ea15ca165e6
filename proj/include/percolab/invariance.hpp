#pragma once

#include "percolab/cluster.hpp"
#include "percolab/engine.hpp"
#include "percolab/graph.hpp"
#include "percolab/stats.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace percolab {

// Exact rational on __int128. Always reduced, denominator positive.
// Big enough for every sum in this module: denominators divide
// lcm(1..|V|) with |V| <= 64 on the tori the exact checks run on.
struct Rational {
    __int128 num = 0;
    __int128 den = 1;

    Rational() = default;
    Rational(long long n) : num(n), den(1) {}
    Rational(long long n, long long d);

    static Rational unit_fraction(long long d) { return Rational(1, d); }

    Rational& operator+=(const Rational& o);
    friend Rational operator+(Rational a, const Rational& b) { return a += b; }
    bool operator==(const Rational& o) const { return num == o.num && den == o.den; }
    bool operator!=(const Rational& o) const { return !(*this == o); }

    bool is_integer() const { return den == 1; }
    double approx() const;
    std::string str() const; // "3", "5/12"
};

// Closed kernel menu for the transport identity. Only these kernels are
// accepted: their diagonal invariance is established by construction
// (translations on tori; height-preserving maps on the fixed-end tree;
// equivariant cluster geometry for the branch split), which is exactly
// what the identity's hypothesis demands and what we cannot verify for
// arbitrary user code.
struct MassTransportFn {
    enum class Kind {
        zero,            // phi == 0
        offset,          // phi(x,y) = 1 iff y = x + delta (torus translation)
        branch_split,    // unit mass split equally among the nearest
                         // branch vertices (open degree >= 3) in x's cluster
        parent,          // phi(x,y) = 1 iff y is x's neighbor toward the end
        child,           // transpose of parent
        parent_or_child, // symmetrized height kernel
    };
    Kind kind = Kind::zero;
    std::vector<int> delta; // torus displacement, offset kernels only

    std::string name() const;
    bool needs_configuration() const { return kind == Kind::branch_split; }

    static MassTransportFn zero();
    static MassTransportFn offset_kernel(std::vector<int> delta);
    static MassTransportFn branch_split();
    static MassTransportFn parent();
    static MassTransportFn child();
    static MassTransportFn parent_or_child();

    // The kernels exercised by the torus exactness suite.
    static std::vector<MassTransportFn> torus_menu(int dim);
};

// Per-origin sums (sum_v phi(o,v), sum_v phi(v,o)) on a torus quotient,
// computed exactly. Deterministic kernels need no configuration; the
// branch split takes one and is equal in expectation only, so its exact
// identity is the all-origins transpose below.
std::pair<Rational, Rational> mtp_check(const GraphBall& ball, const MassTransportFn& phi,
                                        int origin, const Configuration* cfg = nullptr);

// Sums over every origin of the same two quantities; equal for every
// menu kernel and every configuration (the double sum is its own
// transpose), which is the exhaustive per-configuration oracle.
std::pair<Rational, Rational> mtp_exhaustive(const GraphBall& ball, const MassTransportFn& phi,
                                             const Configuration* cfg = nullptr);

// Height kernels on the fixed-end tree break the identity: "parent"
// returns exactly (1, 2) because every vertex has one neighbor toward
// the end and two away from it. "child" gives (2, 1) and
// "parent_or_child" restores (3, 3).
std::pair<long long, long long> mtp_violation_fixed_end(const std::string& kernel = "parent");

// ---- empirical indistinguishability harness ----

// One eligible cluster of one sample with its statistic value.
struct ClusterObservation {
    std::uint64_t sample = 0;
    int cluster = 0;
    int size = 0;
    double value = 0.0;
};

// One within-sample rank test between two clusters' vertex-level bags.
struct PairTestRecord {
    std::uint64_t sample = 0;
    int cluster_a = 0;
    int cluster_b = 0;
    double z = 0.0;
    double p = 1.0;
    bool significant = false;
};

struct IndistReport {
    std::string statistic;
    bool decomposable = false; // vertex-level bags exist, rank tests ran

    std::vector<ClusterObservation> values; // every eligible cluster, raw
    std::vector<PairTestRecord> pairs;

    std::uint64_t samples = 0;
    std::uint64_t multi_samples = 0; // samples contributing >= 2 eligible clusters

    double pair_level = 0.0; // 0.01 / number of pairs tested
    std::size_t significant_pairs = 0;

    TwoMeansSplit split;     // over the pooled per-cluster values
    bool split_detected = false;

    bool conclusive = false;
    bool detected = false;
    std::string verdict; // "difference detected" | "no difference detected" | "inconclusive"

    std::uint64_t seed = 0;
    std::map<std::string, std::string> params;

    std::string json() const; // all raw per-cluster values retained
};

// Statistic menu. "vc_degree" is gated to the fixed-end tree (it needs
// the canonical minimum-height vertex); the rest run anywhere.
const std::vector<std::string>& indist_statistics();

IndistReport indistinguishability_test(const GraphBall& ball, const Process& process,
                                       const std::string& statistic, std::uint64_t n_samples,
                                       std::uint64_t seed);

// ---- uniqueness monotonicity ----

// Shared-seed coupling at p1 <= p2: over samples whose p1-configuration
// has a spanning cluster, the fraction of p2 spanning clusters that
// contain at least one whole p1 spanning cluster. Nesting makes the
// headline fraction exactly 1 whenever the coupling and the
// decomposition are sound (the p1 cluster of any boundary vertex of a
// p2 spanning cluster is a contained witness), so it doubles as an
// end-to-end regression check. The anchored pair restricts both sides
// to clusters that also reach the inner half of the ball; nesting does
// not settle that question, and the anchored fraction genuinely dips
// below 1 at finite radius.
struct ContainmentReport {
    EstimateWithCI fraction; // boundary-touching sense
    std::uint64_t qualifying_samples = 0;
    std::uint64_t p2_clusters = 0;
    std::uint64_t contained = 0;
    EstimateWithCI anchored_fraction; // inner-half-anchored sense
    std::uint64_t anchored_p2_clusters = 0;
    std::uint64_t anchored_contained = 0;
    bool conclusive = false;
};

ContainmentReport uniqueness_monotonicity_check(const GraphBall& ball, double p1, double p2,
                                                std::uint64_t n, std::uint64_t seed);

// ---- sprinkled-union phase table ----

// For each eps: the distribution of the number of clusters that cross
// the product ball (touch the origin fiber and reach left-factor
// distance >= ceil(radius/2)). eps = 0 cannot cross by construction, so
// that row reports fiber-level spanning counts instead: the number of
// fibers owning at least one cluster that reaches the ball boundary.
struct PhaseRow {
    double eps = 0.0;
    std::map<int, std::uint64_t> count_histogram; // crossing-cluster count -> samples
    int modal_count = 0;
    double mean_count = 0.0;
    bool fiber_mode = false; // eps == 0: histogram counts spanning fibers
};

std::vector<PhaseRow> phases_experiment(const std::vector<double>& eps_list, int radius,
                                        std::uint64_t n, std::uint64_t seed,
                                        const BallLimits& limits = {});

std::string phases_csv(const std::vector<PhaseRow>& rows);

} // namespace percolab
