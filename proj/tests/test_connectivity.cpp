#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "percolab/connectivity.hpp"

#include <cmath>
#include <set>

using namespace percolab;

namespace {

Process bern(double p) { return Process{"bernoulli", p, 1.0, 0.0}; }

// Adjacency oracle: the step u -> v exists in the graph itself.
bool graph_adjacent(const GraphSpec& spec, const std::string& u, const std::string& v) {
    for (const auto& [nk, lab] : neighbor_keys(spec, u)) {
        (void)lab;
        if (nk == v) return true;
    }
    return false;
}

} // namespace

TEST_CASE("tau endpoints: identical, empty, full") {
    auto ball = build_ball(GraphSpec::parse("lattice(2)"), 3);
    const int far = ball.index("2,1");
    REQUIRE(far > 0);
    CHECK(tau_estimate(ball, bern(0.4), far, far, 200, 1).value == 1.0);
    CHECK(tau_estimate(ball, bern(0.0), ball.origin, far, 200, 1).value == 0.0);
    CHECK(tau_estimate(ball, bern(1.0), ball.origin, far, 200, 1).value == 1.0);
    CHECK_THROWS(tau_estimate(ball, bern(0.5), ball.origin, far, 99, 1));
    CHECK_THROWS(tau_estimate(ball, bern(0.5), -1, far, 200, 1));
    CHECK_THROWS(tau_estimate(ball, bern(0.5), ball.origin, 10000, 200, 1));
}

TEST_CASE("tree connectivity matches the unique-path product") {
    auto ball = build_ball(GraphSpec::parse("regular_tree(3)"), 6);
    // Distance-d connectivity on a tree is p^d: the one path must be open.
    struct Case {
        double p;
        int d;
    } cases[] = {{0.7, 5}, {0.5, 3}, {0.9, 4}};
    for (const auto& cs : cases) {
        int y = -1;
        for (std::size_t i = 0; i < ball.vertex_count(); ++i)
            if (ball.dist[i] == cs.d) {
                y = static_cast<int>(i);
                break;
            }
        REQUIRE(y > 0);
        const auto est = tau_estimate(ball, bern(cs.p), ball.origin, y, 4000, 77);
        CHECK(std::abs(est.value - std::pow(cs.p, cs.d)) < 3.0 * est.sigma() + 1e-9);
    }
}

TEST_CASE("tau is symmetric and monotone in p under shared seeds") {
    auto ball = build_ball(GraphSpec::parse("regular_tree(3)"), 5);
    const int y = ball.index("aba");
    REQUIRE(y > 0);
    const auto xy = tau_estimate(ball, bern(0.6), ball.origin, y, 500, 9);
    const auto yx = tau_estimate(ball, bern(0.6), y, ball.origin, 500, 9);
    CHECK(xy.value == yx.value);
    CHECK(xy.half_width == yx.half_width);

    // Same seed couples the samples, so the indicator never decreases.
    const auto lo = tau_estimate(ball, bern(0.4), ball.origin, y, 500, 9);
    const auto hi = tau_estimate(ball, bern(0.7), ball.origin, y, 500, 9);
    CHECK(lo.value <= hi.value);
}

TEST_CASE("tau half-width shrinks like the square root of n") {
    auto ball = build_ball(GraphSpec::parse("regular_tree(3)"), 4);
    const int y = ball.index("aba");
    REQUIRE(y > 0);
    const auto small = tau_estimate(ball, bern(0.7), ball.origin, y, 400, 3);
    const auto big = tau_estimate(ball, bern(0.7), ball.origin, y, 6400, 3);
    const double ratio = small.half_width / big.half_width;
    CHECK(ratio > 3.2);
    CHECK(ratio < 4.8);
}

TEST_CASE("decay scan reproduces tree decay per distance") {
    auto ball = build_ball(GraphSpec::parse("regular_tree(3)"), 6);
    const auto rows = decay_scan(ball, bern(0.7), {1, 2, 3}, 4, 2000, 5);
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) {
        REQUIRE(!row.flagged);
        REQUIRE(row.pairs.size() == 4);
        const double want = std::pow(0.7, row.distance);
        double sum = 0.0;
        for (const auto& pr : row.pairs) {
            CHECK(std::abs(pr.tau.value - want) < 3.0 * pr.tau.sigma() + 1e-9);
            sum += pr.tau.value;
        }
        CHECK(row.pooled.value == doctest::Approx(sum / 4.0).epsilon(1e-12));
        CHECK(row.min_index >= 0);
        CHECK(row.max_index >= 0);
        CHECK(row.pairs[static_cast<std::size_t>(row.min_index)].tau.value <=
              row.pairs[static_cast<std::size_t>(row.max_index)].tau.value);
    }
}

TEST_CASE("decay scan degenerate and error cases") {
    auto ball = build_ball(GraphSpec::parse("lattice(2)"), 4);
    const auto full = decay_scan(ball, bern(1.0), {2}, 3, 200, 1);
    for (const auto& pr : full[0].pairs) CHECK(pr.tau.value == 1.0);

    // A filter nothing passes leaves the row flagged.
    const auto none = decay_scan(ball, bern(0.5), {2}, 3, 200, 1,
                                 [](const GraphBall&, int, int) { return false; });
    CHECK(none[0].flagged);

    CHECK_THROWS(decay_scan(ball, bern(0.5), {0}, 3, 200, 1));
    CHECK_THROWS(decay_scan(ball, bern(0.5), {2 * ball.radius - 1}, 3, 200, 1));
    CHECK_THROWS(decay_scan(ball, bern(0.5), {2, 2}, 3, 200, 1));
    CHECK_THROWS(decay_scan(ball, bern(0.5), {2}, 0, 200, 1));
    CHECK_THROWS(decay_scan(ball, bern(0.5), {2}, 3, 99, 1));

    const std::string csv = decay_csv(none, 200, 1);
    CHECK(csv.rfind("distance,pair_id,estimate,ci_low,ci_high,n,seed\n", 0) == 0);
    CHECK(csv.find("2,flagged") != std::string::npos);
    const std::string csv2 = decay_csv(full, 200, 1);
    std::size_t lines = 0;
    for (char c : csv2) lines += c == '\n' ? 1 : 0;
    CHECK(lines == 1 + full[0].pairs.size());
}

TEST_CASE("involution syllables cut the free product") {
    CHECK(z2z2_cut_count("e") == 0);
    CHECK(z2z2_cut_count("3,-2") == 0);
    CHECK(z2z2_cut_count("c") == 1);
    CHECK(z2z2_cut_count("1,0;c;3,4") == 1);
    CHECK(z2z2_cut_count("c;1,1;c") == 2);

    // Every path to a vertex k involutions away crosses k cut edges, so
    // tau is at most p^k; within one sheet it stays far larger.
    auto ball = build_ball(GraphSpec::parse("free_product_z2_z2()"), 5);
    const int in_sheet = ball.index("2,2");
    const int across = ball.index("1,0;c;1,0;c");
    REQUIRE(in_sheet > 0);
    REQUIRE(across > 0);
    CHECK(ball.dist[static_cast<std::size_t>(in_sheet)] == 4);
    CHECK(ball.dist[static_cast<std::size_t>(across)] == 4);
    const auto near = tau_estimate(ball, bern(0.7), ball.origin, in_sheet, 2000, 11);
    const auto cut = tau_estimate(ball, bern(0.7), ball.origin, across, 2000, 11);
    CHECK(cut.value <= 0.7 * 0.7 + 3.0 * cut.sigma());
    CHECK(near.value > cut.value);
}

TEST_CASE("eit bound evaluates the envelope formula") {
    PathPairStats st;
    st.pairs = 1;
    st.c = 2.0;
    st.theta = 0.5;
    st.certified = true;
    CHECK(eit_bound(st, 0.75) == doctest::Approx(1.0 / 6.0));

    st.c = 1.0;
    st.theta = 1e-15;
    CHECK(eit_bound(st, 0.5) == doctest::Approx(1.0).epsilon(1e-9));

    st.theta = 0.8;
    CHECK(eit_bound(st, 0.7, true) == 0.0);
    CHECK_THROWS(eit_bound(st, 0.7));
    CHECK_THROWS(eit_bound(st, 1.0, true));
    st.certified = false;
    st.theta = 0.1;
    CHECK_THROWS(eit_bound(st, 0.7));
}

TEST_CASE("geometric tail fit hugs the histogram") {
    PathPairStats st;
    st.pairs = 100;
    st.histogram = {{0, 90}, {2, 9}, {5, 1}};
    fit_and_certify(st);
    CHECK(st.certified);
    CHECK(st.theta == doctest::Approx(std::pow(0.01, 0.2)));
    CHECK(st.c == doctest::Approx(1.0));
    // Domination holds pointwise.
    for (const auto& [n, cnt] : st.histogram)
        CHECK(static_cast<double>(cnt) / 100.0 <=
              st.c * std::pow(st.theta, static_cast<double>(n)) * (1.0 + 1e-9));

    PathPairStats flat;
    flat.pairs = 50;
    flat.histogram = {{0, 50}};
    fit_and_certify(flat);
    CHECK(flat.certified);
    CHECK(flat.theta == doctest::Approx(1.0 / 51.0));
    CHECK(eit_bound(flat, 0.5, false) == doctest::Approx(1.0 - (1.0 / 51.0) / 0.5));

    PathPairStats bad;
    bad.pairs = 10;
    bad.histogram = {{0, 3}};
    CHECK_THROWS(fit_and_certify(bad));
    PathPairStats empty;
    CHECK_THROWS(fit_and_certify(empty));
}

TEST_CASE("domination bound closed forms") {
    CHECK(lss_bound(0.37, 1, 1) == doctest::Approx(0.37));
    CHECK(lss_bound(0.99, 1, 2) == doctest::Approx(0.9));
    CHECK(lss_bound(0.99, 2, 1) == doctest::Approx(0.9801));
    CHECK(lss_bound(0.0, 3, 2) == 0.0);
    CHECK(lss_bound(1.0, 3, 2) == 1.0);
    CHECK_THROWS(lss_bound(1.2, 1, 1));
    CHECK_THROWS(lss_bound(0.5, 0, 1));
    CHECK_THROWS(lss_bound(0.5, 1, 0));
}

TEST_CASE("wreath word paths land on their targets") {
    auto ball = build_ball(GraphSpec::parse("lamplighter(lattice(1),2)"), 8);
    REQUIRE(ball.keys[static_cast<std::size_t>(ball.origin)] == "0@");

    // Identity target: the minimal word is empty and the path stays put.
    const auto still = lamplighter_path_sampler(ball, ball.origin, 4);
    CHECK(still.vertices.size() == 1);
    CHECK(still.edges.empty());
    CHECK(!still.left_ball);

    const int lamp_on = ball.index("0@0:1");
    const int far = ball.index("2@1:1");
    REQUIRE(lamp_on > 0);
    REQUIRE(far > 0);
    for (int target : {lamp_on, far}) {
        std::set<std::string> seen;
        for (std::uint64_t s = 0; s < 25; ++s) {
            const auto path = lamplighter_path_sampler(ball, target, derive_seed(31, s));
            CHECK(path.vertices.back() == ball.keys[static_cast<std::size_t>(target)]);
            REQUIRE(path.edges.size() + 1 == path.vertices.size());
            for (std::size_t i = 0; i + 1 < path.vertices.size(); ++i) {
                CHECK(graph_adjacent(ball.spec, path.vertices[i], path.vertices[i + 1]));
                CHECK(path.edges[i] ==
                      edge_key_string(path.vertices[i], path.vertices[i + 1]));
            }
            seen.insert(path.vertices[path.vertices.size() / 2]);
        }
        CHECK(seen.size() > 1); // the lamp letters really vary
    }
    // Same seed, same path.
    const auto a = lamplighter_path_sampler(ball, far, 99);
    const auto b = lamplighter_path_sampler(ball, far, 99);
    CHECK(a.vertices == b.vertices);

    CHECK_THROWS(lamplighter_path_sampler(ball, 100000, 1));
    auto tree = build_ball(GraphSpec::parse("regular_tree(3)"), 3);
    CHECK_THROWS(lamplighter_path_sampler(tree, 0, 1));
}

TEST_CASE("wreath sampler supports modulus three") {
    auto ball = build_ball(GraphSpec::parse("lamplighter(lattice(1),3)"), 7);
    const int target = ball.index("1@0:2");
    REQUIRE(target > 0);
    for (std::uint64_t s = 0; s < 10; ++s) {
        const auto path = lamplighter_path_sampler(ball, target, derive_seed(7, s));
        CHECK(path.vertices.back() == "1@0:2");
        for (std::size_t i = 0; i + 1 < path.vertices.size(); ++i)
            CHECK(graph_adjacent(ball.spec, path.vertices[i], path.vertices[i + 1]));
    }
}

TEST_CASE("path pair statistics dominate their own tail") {
    auto ball = build_ball(GraphSpec::parse("lamplighter(lattice(1),2)"), 14);
    const int target = ball.index("0@0:1");
    REQUIRE(target > 0);
    const auto stats = lamplighter_pair_stats(ball, target, 300, 17);
    long long total = 0;
    for (const auto& [n, cnt] : stats.histogram) {
        (void)n;
        total += cnt;
    }
    CHECK(total == 300);
    CHECK(stats.pairs == 300);
    CHECK(stats.certified);
    CHECK(stats.theta < 1.0);
    CHECK(stats.theta > 0.0);
    // This target's paths stay well inside radius 14.
    CHECK(stats.lost_fraction == 0.0);
    CHECK(stats.measure == "wreath-word-mu0");
    // Identical pairs share their whole path, so some mass sits high.
    CHECK(stats.histogram.rbegin()->first >= 1);
}

TEST_CASE("second-moment bound stays below measured connectivity") {
    auto ball = build_ball(GraphSpec::parse("lamplighter(lattice(1),2)"), 14);
    const int target = ball.index("0@0:1");
    REQUIRE(target > 0);
    const auto stats = lamplighter_pair_stats(ball, target, 300, 21);
    const double bound = eit_bound(stats, 0.9, true);
    const auto tau = tau_estimate(ball, bern(0.9), ball.origin, target, 1500, 23);
    CHECK(bound <= tau.value + 3.0 * tau.sigma());
    CHECK(bound >= 0.0);
}

TEST_CASE("unique tree paths give the degenerate certificate") {
    auto ball = build_ball(GraphSpec::parse("regular_tree(3)"), 6);
    int y = -1;
    for (std::size_t i = 0; i < ball.vertex_count(); ++i)
        if (ball.dist[i] == 4) {
            y = static_cast<int>(i);
            break;
        }
    REQUIRE(y > 0);
    const auto stats = unique_path_stats(ball, y);
    CHECK(stats.pairs == 1);
    CHECK(stats.histogram.at(4) == 1);
    CHECK(stats.certified);
    CHECK(stats.theta == doctest::Approx(1.0));
    // The degenerate fit clamps to zero, which sits below p^d.
    CHECK(eit_bound(stats, 0.7, true) == 0.0);
    CHECK_THROWS(eit_bound(stats, 0.7));
    auto grid = build_ball(GraphSpec::parse("lattice(2)"), 3);
    CHECK_THROWS(unique_path_stats(grid, 1));
}

TEST_CASE("induced generator percolation agrees with the word oracle") {
    auto ball = build_ball(GraphSpec::parse("lattice(2)"), 5);
    const std::vector<GeneratorWord> identity = {{"e1", {+1}}, {"e2", {+2}}};

    auto cfg = sample_bernoulli(ball, 0.5, CouplingSeed{40, 0});
    const auto induced = induced_config_across_generators(ball, identity, cfg);
    CHECK(induced.block_radius == 1);
    std::size_t live = 0;
    for (const auto& e : induced.edges) {
        if (e.lost) {
            CHECK(e.v == -1);
            continue;
        }
        ++live;
        bool open_in_cfg = false, found = false;
        for (const auto& [eid, other] : ball.incident[static_cast<std::size_t>(e.u)])
            if (other == e.v) {
                open_in_cfg = cfg.is_open(eid);
                found = true;
                break;
            }
        REQUIRE(found);
        CHECK(e.open == open_in_cfg);
    }
    CHECK(live == ball.edge_count());
    CHECK(induced.lost_count == induced.edges.size() - live);
    CHECK(induced.lost_count > 0);

    auto full = sample_bernoulli(ball, 1.0, CouplingSeed{40, 0});
    for (const auto& e : induced_config_across_generators(ball, identity, full).edges)
        if (!e.lost) CHECK(e.open);
}

TEST_CASE("induced diagonal edge opens with the product marginal") {
    auto ball = build_ball(GraphSpec::parse("lattice(2)"), 5);
    const std::vector<GeneratorWord> diag = {{"diag", {+1, +2}}};
    int hits = 0;
    const int n = 3000;
    for (int i = 0; i < n; ++i) {
        auto cfg = sample_bernoulli(ball, 0.5, CouplingSeed{50, static_cast<std::uint64_t>(i)});
        const auto induced = induced_config_across_generators(ball, diag, cfg);
        CHECK(induced.block_radius == 2);
        bool found = false;
        for (const auto& e : induced.edges)
            if (e.u == ball.origin) {
                REQUIRE(!e.lost);
                hits += e.open ? 1 : 0;
                found = true;
                break;
            }
        REQUIRE(found);
    }
    const double frac = static_cast<double>(hits) / n;
    CHECK(std::abs(frac - 0.25) < 3.0 * std::sqrt(0.25 * 0.75 / n));

    auto cfg = sample_bernoulli(ball, 0.5, CouplingSeed{50, 0});
    CHECK_THROWS(induced_config_across_generators(ball, {}, cfg));
    CHECK_THROWS(induced_config_across_generators(ball, {{"bad", {0}}}, cfg));
    CHECK_THROWS(induced_config_across_generators(ball, {{"bad", {3}}}, cfg));
    auto tree = build_ball(GraphSpec::parse("regular_tree(3)"), 3);
    auto tcfg = sample_bernoulli(tree, 0.5, CouplingSeed{50, 0});
    CHECK_THROWS(induced_config_across_generators(tree, diag, tcfg));
}
