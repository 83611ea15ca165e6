#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace percolab {

// Graph families. Every family is a transitive graph realized as a
// finite ball around a canonical origin; vertices are identified by
// canonical string encodings so that labels, hashes and orderings are
// stable across runs, platforms and radii.
enum class Family {
    lattice,           // Z^d, d <= 4
    torus,             // (Z/L)^d, L >= 3 (quotient; no boundary)
    regular_tree,      // b-regular tree, 3 <= b <= 6
    free_group,        // Cayley graph of F_k, k <= 3 (2k-regular tree)
    free_product_z2z2, // Z^2 * Z/2: <a, b, c | ab = ba, c = c^{-1}>
    product,           // cartesian product of two families
    lamplighter,       // wreath Z_m wr base, base in {Z, Z^2}, 2 <= m <= 4
    fixed_end_tree,    // b-regular tree with a distinguished end
};

struct GraphSpec {
    Family family = Family::lattice;
    int dim = 1;          // lattice / torus
    int side = 0;         // torus
    int branching = 3;    // regular_tree / fixed_end_tree
    int rank = 2;         // free_group
    int lamp_modulus = 2; // lamplighter
    std::shared_ptr<GraphSpec> left, right; // product factors; left = lamplighter base

    static GraphSpec make_lattice(int d);
    static GraphSpec make_torus(int d, int L);
    static GraphSpec make_regular_tree(int b);
    static GraphSpec make_free_group(int k);
    static GraphSpec make_free_product_z2z2();
    static GraphSpec make_product(GraphSpec a, GraphSpec b);
    static GraphSpec make_lamplighter(GraphSpec base, int m);
    static GraphSpec make_fixed_end_tree(int b);

    // "lattice(2)", "product(free_group(2),lattice(2))", ...
    static GraphSpec parse(const std::string& text);
    std::string to_string() const;

    // Degree of the transitive graph (every vertex).
    int degree() const;

    void validate() const; // throws std::invalid_argument naming the field
};

// One edge of a ball. `key` is the canonical serialization
// "<lesser endpoint key>\t<greater endpoint key>" (lexicographic on the
// encodings), so the same edge hashes identically in balls of different
// radii; the generator label rides along for exports.
struct BallEdge {
    int u = 0, v = 0; // endpoint indices, u < v in vertex order
    std::string label;
    std::uint64_t base_hash = 0;
};

// Finite ball with free boundary (or torus quotient). Vertex indices
// are assigned in the canonical total order (graph distance from the
// origin, then encoding lexicographic), so index comparisons implement
// the "least vertex" rule everywhere downstream.
struct GraphBall {
    GraphSpec spec;
    int radius = 0;

    std::vector<std::string> keys;   // index -> canonical encoding
    std::vector<int> dist;           // graph distance from origin
    std::vector<bool> boundary;      // dist == radius (always false on tori)
    std::vector<std::vector<int>> adj; // sorted neighbor indices
    std::vector<BallEdge> edges;       // sorted by (u, v)
    std::vector<std::vector<std::pair<int, int>>> incident; // vertex -> (edge id, other end)
    std::vector<int> height;           // fixed_end_tree only: Busemann height

    std::unordered_map<std::string, int> index_of;

    int origin = 0;
    std::size_t vertex_count() const { return keys.size(); }
    std::size_t edge_count() const { return edges.size(); }

    int index(const std::string& key) const; // -1 if absent
    const std::vector<int>& neighbors(int v) const;
};

// Memory guard rails, checked against a size bound computed before any
// allocation happens.
struct BallLimits {
    std::size_t max_vertices = 4'000'000;
    std::size_t max_edges = 16'000'000;
};

// Upper bound on the vertex count of the radius-R ball (exact for
// trees/tori, conservative otherwise; a counting pass for lamplighter).
std::size_t ball_size_bound(const GraphSpec& spec, int radius, const BallLimits& limits = {});

GraphBall build_ball(const GraphSpec& spec, int radius, const BallLimits& limits = {});

// Torus quotient: the full finite graph (Z/L)^d, no boundary vertices.
GraphBall quotient_torus(int dim, int side, const BallLimits& limits = {});

// Busemann height toward the fixed end; origin has height 0, the
// neighbor toward the end has height -1. Errors on other families.
int end_height(const GraphBall& ball, int v);

// Neighbor keys of a vertex encoding in the infinite graph, with
// generator labels; the building block for balls and for symbolic walks
// that never materialize a ball.
std::vector<std::pair<std::string, std::string>> neighbor_keys(const GraphSpec& spec,
                                                               const std::string& key);

// Canonical edge serialization shared by balls and symbolic walkers.
std::string edge_key_string(const std::string& a, const std::string& b);
std::uint64_t edge_hash(const std::string& a, const std::string& b);

} // namespace percolab
