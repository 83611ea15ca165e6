#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "percolab/cluster.hpp"
#include "percolab/engine.hpp"

#include <cmath>
#include <cstdlib>
#include <set>
#include <string>
#include <vector>

using namespace percolab;

TEST_CASE("edge labels are canonical: shared edges agree across radii") {
    auto small = build_ball(GraphSpec::parse("regular_tree(3)"), 2);
    auto large = build_ball(GraphSpec::parse("regular_tree(3)"), 3);
    const CouplingSeed seed{11, 4};
    for (std::size_t i = 0; i < small.edge_count(); ++i) {
        const auto& e = small.edges[i];
        const std::string ka = small.keys[static_cast<std::size_t>(e.u)];
        const std::string kb = small.keys[static_cast<std::size_t>(e.v)];
        // Locate the same edge in the larger ball by endpoint keys.
        const int a = large.index(ka), b = large.index(kb);
        REQUIRE(a >= 0);
        REQUIRE(b >= 0);
        bool found = false;
        for (const auto& [eid, other] : large.incident[static_cast<std::size_t>(a)])
            if (other == b) {
                CHECK(edge_value(seed, large, eid) == edge_value(seed, small, static_cast<int>(i)));
                found = true;
            }
        CHECK(found);
    }
}

TEST_CASE("bernoulli endpoints and binomial midpoint") {
    auto ball = build_ball(GraphSpec::parse("lattice(2)"), 8);
    const CouplingSeed seed{3, 0};
    CHECK(sample_bernoulli(ball, 0.0, seed).open_count() == 0);
    CHECK(sample_bernoulli(ball, 1.0, seed).open_count() == ball.edge_count());
    auto half = sample_bernoulli(ball, 0.5, seed);
    const double m = static_cast<double>(ball.edge_count());
    const double frac = static_cast<double>(half.open_count()) / m;
    CHECK(std::abs(frac - 0.5) < 3.0 * std::sqrt(0.25 / m));
    CHECK(half.provenance.process == "bernoulli");
    CHECK(half.provenance.params.at("p") == "0.5");
    CHECK_THROWS(sample_bernoulli(ball, 1.5, seed));
}

TEST_CASE("monotone coupling is exact along any p grid") {
    auto ball = build_ball(GraphSpec::parse("free_product_z2z2()"), 3);
    const CouplingSeed seed{77, 2};
    Configuration prev = sample_bernoulli(ball, 0.0, seed);
    for (double p : {0.1, 0.3, 0.5, 0.64, 0.9, 1.0}) {
        Configuration next = sample_bernoulli(ball, p, seed);
        CHECK(prev.subset_of(next));
        prev = std::move(next);
    }
}

TEST_CASE("distinct sample indices give distinct configurations") {
    auto ball = build_ball(GraphSpec::parse("lattice(1)"), 3);
    auto a = sample_bernoulli(ball, 0.5, CouplingSeed{5, 0});
    auto b = sample_bernoulli(ball, 0.5, CouplingSeed{5, 1});
    CHECK(a.open != b.open);
}

TEST_CASE("edge label stream is uniform over a ten-thousand-edge ball") {
    auto ball = build_ball(GraphSpec::parse("lattice(2)"), 50);
    REQUIRE(ball.edge_count() >= 10000);
    const CouplingSeed seed{2024, 0};
    std::vector<double> values;
    values.reserve(ball.edge_count());
    for (std::size_t i = 0; i < ball.edge_count(); ++i)
        values.push_back(edge_value(seed, ball, static_cast<int>(i)));
    CHECK(ks_uniform_statistic(values) < 0.02);
}

TEST_CASE("surgery flips exactly one bit and is logged") {
    auto ball = build_ball(GraphSpec::parse("lattice(2)"), 4);
    auto cfg = sample_bernoulli(ball, 0.4, CouplingSeed{9, 0});
    const auto before = cfg.open;
    const int e = 7;

    insert_edge(ball, cfg, e);
    CHECK(cfg.is_open(e));
    delete_edge(ball, cfg, e);
    CHECK(!cfg.is_open(e));
    insert_edge(ball, cfg, e);

    int diffs = 0;
    for (std::size_t i = 0; i < before.size(); ++i) diffs += before[i] != cfg.open[i];
    CHECK(diffs <= 1); // zero if e was already open
    CHECK(cfg.provenance.surgery_log.size() == 3);
    CHECK(cfg.provenance.surgery_log[0][0] == '+');
    CHECK(cfg.provenance.surgery_log[1][0] == '-');
    CHECK_THROWS(insert_edge(ball, cfg, static_cast<int>(ball.edge_count())));

    // Empty configuration plus one insertion has exactly one open edge.
    auto empty = sample_bernoulli(ball, 0.0, CouplingSeed{9, 1});
    insert_edge(ball, empty, 0);
    CHECK(empty.open_count() == 1);
}

TEST_CASE("inserting an edge merges at most two clusters") {
    auto ball = build_ball(GraphSpec::parse("lattice(2)"), 5);
    for (std::uint64_t s = 0; s < 20; ++s) {
        auto cfg = sample_bernoulli(ball, 0.45, CouplingSeed{100 + s, 0});
        const int before = decompose(ball, cfg).cluster_count();
        auto copy = cfg;
        insert_edge(ball, copy, static_cast<int>(s * 13 % ball.edge_count()));
        const int after = decompose(ball, copy).cluster_count();
        CHECK(before - after >= 0);
        CHECK(before - after <= 1);
    }
}

TEST_CASE("cluster coloring follows the least-vertex rule") {
    auto ball = build_ball(GraphSpec::parse("lattice(2)"), 6);
    const CouplingSeed seed{15, 0};

    // Full configuration: everything one cluster, one color.
    auto full = color_clusters(ball, sample_bernoulli(ball, 1.0, seed), 4, seed);
    CHECK(std::set<int>(full.color.begin(), full.color.end()).size() == 1);

    // Empty configuration: singleton clusters, i.i.d. colors.
    auto empty = color_clusters(ball, sample_bernoulli(ball, 0.0, seed), 2, seed);
    double zeros = 0;
    for (int c : empty.color) zeros += c == 0 ? 1 : 0;
    const double n = static_cast<double>(empty.color.size());
    CHECK(std::abs(zeros / n - 0.5) < 3.0 * std::sqrt(0.25 / n));

    // Vertices of one cluster share the cluster's color.
    auto cfg = sample_bernoulli(ball, 0.5, seed);
    auto colored = color_clusters(ball, cfg, 3, seed);
    auto dec = decompose(ball, cfg);
    for (std::size_t v = 0; v < ball.vertex_count(); ++v) {
        CHECK(colored.color[v] ==
              colored.cluster_color[static_cast<std::size_t>(dec.cluster_of[v])]);
        CHECK(colored.color[v] >= 0);
        CHECK(colored.color[v] < 3);
    }

    // Determinism.
    auto again = color_clusters(ball, cfg, 3, seed);
    CHECK(again.color == colored.color);
    CHECK_THROWS(color_clusters(ball, cfg, 0, seed));
}

TEST_CASE("thinning with p_prime = 1 is the identity on the base sample") {
    auto ball = build_ball(GraphSpec::parse("regular_tree(3)"), 6);
    const CouplingSeed seed{21, 3};
    auto base = sample_bernoulli(ball, 0.8, seed);
    auto same = delet_process(ball, 0.8, 1.0, seed);
    CHECK(same.open == base.open);
    CHECK(same.provenance.process == "delet");
}

TEST_CASE("thinning hits half of the boundary-touching clusters") {
    auto ball = build_ball(GraphSpec::parse("regular_tree(3)"), 7);
    int touched = 0, thinned = 0;
    for (std::uint64_t s = 0; s < 60; ++s) {
        const CouplingSeed seed{400, s};
        auto base = sample_bernoulli(ball, 0.9, seed);
        auto out = delet_process(ball, 0.9, 0.7, seed);
        auto dec = decompose(ball, base);
        // A cluster was thinned iff it lost at least one edge. Spanning
        // clusters at p = 0.9 carry hundreds of edges, so a thinned one
        // keeps them all with negligible probability 0.7^edges.
        std::vector<char> lost(static_cast<std::size_t>(dec.cluster_count()), 0);
        for (std::size_t i = 0; i < ball.edge_count(); ++i)
            if (base.is_open(static_cast<int>(i)) && !out.is_open(static_cast<int>(i)))
                lost[static_cast<std::size_t>(
                    dec.cluster_of[static_cast<std::size_t>(ball.edges[i].u)])] = 1;
        for (int c = 0; c < dec.cluster_count(); ++c)
            if (dec.spanning[static_cast<std::size_t>(c)] &&
                dec.size[static_cast<std::size_t>(c)] > 20) {
                ++touched;
                thinned += lost[static_cast<std::size_t>(c)];
            }
    }
    REQUIRE(touched > 100);
    const double frac = static_cast<double>(thinned) / touched;
    // Clusters within one sample share no coin, and samples are
    // independent; 3 sigma on the pessimistic independent bound.
    CHECK(std::abs(frac - 0.5) < 3.0 * std::sqrt(0.25 / static_cast<double>(touched)));
}

TEST_CASE("delet parameter ranges are enforced") {
    auto tree = build_ball(GraphSpec::parse("regular_tree(3)"), 3);
    auto line = build_ball(GraphSpec::parse("lattice(1)"), 3);
    const CouplingSeed seed{1, 0};
    CHECK_THROWS(delet_process(line, 0.8, 0.9, seed));
    CHECK_THROWS(delet_process(tree, 0.5, 0.9, seed));  // p too low
    CHECK_THROWS(delet_process(tree, 1.0, 0.9, seed));  // p too high
    CHECK_THROWS(delet_process(tree, 0.8, 0.6, seed));  // p' <= 1/(2p)
    CHECK_THROWS(delet_process(tree, 0.8, 1.01, seed)); // p' > 1
    CHECK_NOTHROW(delet_process(tree, 0.8, 0.7, seed));
}

TEST_CASE("fiber process marginals") {
    auto ball = build_ball(GraphSpec::parse("product(free_group(2),lattice(2))"), 3);
    const CouplingSeed seed{31, 0};

    // eps = 0: only lattice-direction edges can be open.
    auto sparse = fiber_process(ball, 0.0, seed);
    std::size_t tree_edges = 0, tree_open = 0, lat_edges = 0, lat_open = 0;
    for (std::size_t i = 0; i < ball.edge_count(); ++i) {
        const bool lat = ball.edges[i].label.rfind("R:", 0) == 0;
        (lat ? lat_edges : tree_edges) += 1;
        if (sparse.is_open(static_cast<int>(i))) (lat ? lat_open : tree_open) += 1;
    }
    CHECK(tree_open == 0);
    CHECK(std::abs(static_cast<double>(lat_open) / static_cast<double>(lat_edges) - 0.5) <
          3.0 * std::sqrt(0.25 / static_cast<double>(lat_edges)));

    // eps = 0.1: tree edges open at 0.1, lattice edges at 1-(1-0.1)/2.
    std::size_t t10 = 0, l10 = 0;
    auto mixed = fiber_process(ball, 0.1, seed);
    for (std::size_t i = 0; i < ball.edge_count(); ++i) {
        const bool lat = ball.edges[i].label.rfind("R:", 0) == 0;
        if (mixed.is_open(static_cast<int>(i))) (lat ? l10 : t10) += 1;
    }
    CHECK(std::abs(static_cast<double>(t10) / static_cast<double>(tree_edges) - 0.1) <
          3.0 * std::sqrt(0.1 * 0.9 / static_cast<double>(tree_edges)));
    CHECK(std::abs(static_cast<double>(l10) / static_cast<double>(lat_edges) - 0.55) <
          3.0 * std::sqrt(0.55 * 0.45 / static_cast<double>(lat_edges)));

    // The sprinkle only adds on top of the base.
    CHECK(sparse.subset_of(mixed));
    CHECK_THROWS(fiber_process(build_ball(GraphSpec::parse("lattice(2)"), 2), 0.1, seed));
}

TEST_CASE("slab process matches its layer-by-layer definition") {
    auto ball = build_ball(GraphSpec::parse("lattice(3)"), 6);
    const double eps = 0.03;
    const CouplingSeed seed{57, 4};
    auto cfg = slab_process(ball, eps, seed);

    // Independent reconstruction of the three layers from the stream
    // contract: slab coins keyed by the first coordinate, one z per edge.
    std::vector<char> in_a(ball.vertex_count());
    for (std::size_t v = 0; v < ball.vertex_count(); ++v) {
        const long long x1 = std::strtoll(ball.keys[v].c_str(), nullptr, 10);
        in_a[v] =
            u01(prf64(seed.experiment, seed.sample, "slab-a", fnv1a(std::to_string(x1)))) < 0.5;
    }
    std::vector<double> z(ball.edge_count());
    std::vector<char> near_sparse(ball.vertex_count());
    for (std::size_t i = 0; i < ball.edge_count(); ++i) {
        z[i] = u01(prf64(seed.experiment, seed.sample, "slab-z", ball.edges[i].base_hash));
        if (z[i] < eps) {
            near_sparse[static_cast<std::size_t>(ball.edges[i].u)] = 1;
            near_sparse[static_cast<std::size_t>(ball.edges[i].v)] = 1;
        }
    }
    std::size_t sparse_count = 0;
    for (std::size_t i = 0; i < ball.edge_count(); ++i) {
        const auto u = static_cast<std::size_t>(ball.edges[i].u);
        const auto v = static_cast<std::size_t>(ball.edges[i].v);
        const bool w1 = in_a[u] && in_a[v] && z[i] < 1.0 - eps;
        const bool w2 = z[i] < eps;
        const bool w3 = !in_a[u] && !in_a[v] && !near_sparse[u] && !near_sparse[v] &&
                        z[i] < 1.0 - eps;
        CHECK(cfg.is_open(static_cast<int>(i)) == (w1 || w2 || w3));
        sparse_count += w2 ? 1 : 0;
        // An A-crossing edge outside the sparse layer must be closed.
        if (in_a[u] != in_a[v] && !w2) CHECK(!cfg.is_open(static_cast<int>(i)));
    }
    const double m = static_cast<double>(ball.edge_count());
    CHECK(std::abs(static_cast<double>(sparse_count) / m - eps) <
          3.0 * std::sqrt(eps * (1 - eps) / m));

    CHECK_THROWS(slab_process(ball, 0.0, seed));
    CHECK_THROWS(slab_process(ball, 0.08, seed));
    CHECK_THROWS(slab_process(build_ball(GraphSpec::parse("lattice(2)"), 3), 0.01, seed));
}

TEST_CASE("regeneration reproduces samples and replays surgery") {
    auto ball = build_ball(GraphSpec::parse("regular_tree(3)"), 5);
    Process proc{"delet", 0.8, 0.75, 0.0};
    auto cfg = proc.sample(ball, 123, 7);
    insert_edge(ball, cfg, 3);
    delete_edge(ball, cfg, 11);

    auto replay = regenerate(ball, cfg.provenance);
    CHECK(replay.open == cfg.open);
    CHECK(export_configuration(ball, replay) == export_configuration(ball, cfg));

    // Unsurgered regeneration round-trips too.
    Process slab{"slab", 0.5, 1.0, 0.02};
    auto cube = build_ball(GraphSpec::parse("lattice(3)"), 4);
    auto s = slab.sample(cube, 9, 1);
    CHECK(regenerate(cube, s.provenance).open == s.open);
}

TEST_CASE("export carries a provenance header and the open edge keys") {
    auto ball = build_ball(GraphSpec::parse("lattice(1)"), 2);
    auto cfg = sample_bernoulli(ball, 1.0, CouplingSeed{8, 2});
    const std::string text = export_configuration(ball, cfg);
    CHECK(text.find("# graph=lattice(1) radius=2 process=bernoulli p=1 seed=8 sample=2\n") == 0);
    std::size_t lines = 0;
    for (char c : text) lines += c == '\n' ? 1 : 0;
    CHECK(lines == 1 + cfg.open_count());

    delete_edge(ball, cfg, 0);
    const std::string surgered = export_configuration(ball, cfg);
    CHECK(surgered.find(" surgered\n") != std::string::npos);
    CHECK(surgered.find("# surgery -") != std::string::npos);
}

TEST_CASE("conditional marginal of a product measure is p in every bucket") {
    auto ball = build_ball(GraphSpec::parse("regular_tree(3)"), 2);
    Process proc{"bernoulli", 0.7, 1.0, 0.0};
    // Radius 0 keeps the neighborhood to four edges, so all 16 buckets
    // fill comfortably at this sample count.
    auto cm = conditional_marginal_estimate(ball, proc, 0, 8000, 99, 0, 20);
    CHECK(!cm.flagged);
    CHECK(cm.buckets_used >= 1);
    CHECK(std::abs(cm.estimate.value - 0.7) < cm.estimate.half_width + 0.02);
    for (const auto& b : cm.buckets) {
        if (b.count < 50) continue;
        const double phat = static_cast<double>(b.open) / static_cast<double>(b.count);
        CHECK(std::abs(phat - 0.7) <
              4.0 * std::sqrt(0.7 * 0.3 / static_cast<double>(b.count)));
    }

    Process zero{"bernoulli", 0.0, 1.0, 0.0};
    auto cz = conditional_marginal_estimate(ball, zero, 0, 500, 99);
    CHECK(cz.estimate.value == doctest::Approx(0.0));
}

TEST_CASE("conditional marginal of the thinned tree matches the closed form") {
    // Star ball: three edges at the origin of the 3-regular tree. Any
    // open edge lies in the one cluster at the origin, the coin is fair
    // and thinning keeps an edge with chance p', so
    // P[e open] = p (1 + p') / 2 exactly.
    auto ball = build_ball(GraphSpec::parse("regular_tree(3)"), 1);
    REQUIRE(ball.edge_count() == 3);
    Process proc{"delet", 0.8, 0.7, 0.0};
    auto cm = conditional_marginal_estimate(ball, proc, 1, 20000, 5, 1, 100);
    const double exact = 0.8 * (1.0 + 0.7) / 2.0;
    CHECK(std::abs(cm.estimate.value - exact) < cm.estimate.half_width + 0.01);
    CHECK(cm.estimate.lo() > 0.0);
    CHECK(cm.estimate.hi() < 0.8); // strictly below the ambient p

    CHECK_THROWS(conditional_marginal_estimate(ball, proc, 0, 50, 5)); // too few samples
}
