#include "percolab/invariance.hpp"

#include "percolab/rand.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdlib>
#include <deque>
#include <stdexcept>

namespace percolab {

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::invalid_argument(msg); }

__int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        __int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

__int128 checked_mul(__int128 a, __int128 b) {
    __int128 out;
    if (__builtin_mul_overflow(a, b, &out)) throw std::overflow_error("rational: overflow");
    return out;
}

__int128 checked_add(__int128 a, __int128 b) {
    __int128 out;
    if (__builtin_add_overflow(a, b, &out)) throw std::overflow_error("rational: overflow");
    return out;
}

std::string int128_str(__int128 v) {
    if (v == 0) return "0";
    const bool neg = v < 0;
    unsigned __int128 u = neg ? -static_cast<unsigned __int128>(v) : static_cast<unsigned __int128>(v);
    std::string digits;
    while (u != 0) {
        digits.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
        u /= 10;
    }
    if (neg) digits.push_back('-');
    std::reverse(digits.begin(), digits.end());
    return digits;
}

} // namespace

Rational::Rational(long long n, long long d) : num(n), den(d) {
    if (d == 0) fail("rational: zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const __int128 g = gcd128(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
}

Rational& Rational::operator+=(const Rational& o) {
    num = checked_add(checked_mul(num, o.den), checked_mul(o.num, den));
    den = checked_mul(den, o.den);
    const __int128 g = gcd128(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    if (num == 0) den = 1;
    return *this;
}

double Rational::approx() const { return static_cast<double>(num) / static_cast<double>(den); }

std::string Rational::str() const {
    if (den == 1) return int128_str(num);
    return int128_str(num) + "/" + int128_str(den);
}

// ---- kernel menu ----

MassTransportFn MassTransportFn::zero() { return {}; }

MassTransportFn MassTransportFn::offset_kernel(std::vector<int> delta) {
    MassTransportFn f;
    f.kind = Kind::offset;
    f.delta = std::move(delta);
    return f;
}

MassTransportFn MassTransportFn::branch_split() {
    MassTransportFn f;
    f.kind = Kind::branch_split;
    return f;
}

MassTransportFn MassTransportFn::parent() {
    MassTransportFn f;
    f.kind = Kind::parent;
    return f;
}

MassTransportFn MassTransportFn::child() {
    MassTransportFn f;
    f.kind = Kind::child;
    return f;
}

MassTransportFn MassTransportFn::parent_or_child() {
    MassTransportFn f;
    f.kind = Kind::parent_or_child;
    return f;
}

std::string MassTransportFn::name() const {
    switch (kind) {
    case Kind::zero: return "zero";
    case Kind::offset: {
        std::string s = "offset(";
        for (std::size_t i = 0; i < delta.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(delta[i]);
        }
        return s + ")";
    }
    case Kind::branch_split: return "branch_split";
    case Kind::parent: return "parent";
    case Kind::child: return "child";
    case Kind::parent_or_child: return "parent_or_child";
    }
    return "";
}

std::vector<MassTransportFn> MassTransportFn::torus_menu(int dim) {
    if (dim < 1 || dim > 4) fail("dim: torus menu supports 1 <= dim <= 4");
    std::vector<MassTransportFn> menu;
    menu.push_back(zero());
    for (int d = 0; d < dim; ++d) {
        std::vector<int> delta(static_cast<std::size_t>(dim), 0);
        delta[static_cast<std::size_t>(d)] = 1;
        menu.push_back(offset_kernel(delta));
    }
    menu.push_back(offset_kernel(std::vector<int>(static_cast<std::size_t>(dim), 1)));
    {
        std::vector<int> delta(static_cast<std::size_t>(dim), 1);
        delta[0] = 2;
        menu.push_back(offset_kernel(delta));
    }
    menu.push_back(branch_split());
    return menu;
}

namespace {

std::vector<int> parse_torus_coords(const std::string& key, int dim) {
    std::vector<int> c;
    std::size_t pos = 0;
    while (pos <= key.size()) {
        const std::size_t comma = key.find(',', pos);
        const std::string part =
            comma == std::string::npos ? key.substr(pos) : key.substr(pos, comma - pos);
        c.push_back(std::atoi(part.c_str()));
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    if (static_cast<int>(c.size()) != dim) fail("vertex key: wrong coordinate count");
    return c;
}

std::string torus_shift(const GraphBall& ball, const std::string& key,
                        const std::vector<int>& delta, int sign) {
    const int L = ball.spec.side;
    auto c = parse_torus_coords(key, ball.spec.dim);
    std::string out;
    for (std::size_t d = 0; d < c.size(); ++d) {
        int x = (c[d] + sign * delta[d]) % L;
        if (x < 0) x += L;
        if (d) out += ",";
        out += std::to_string(x);
    }
    return out;
}

// Nearest-branch geometry of one configuration: for every vertex, the
// open-metric distance to the closest open-degree->=3 vertex of its
// cluster and how many such vertices achieve it; plus the full distance
// field from each branch vertex, reused by the receiving-side sums.
struct BranchSplitData {
    std::vector<int> branch;                 // branch vertices, ascending
    std::vector<int> branch_index_of;        // vertex -> slot in `branch`, -1
    std::vector<int> nearest_dist;           // m(v), -1 when the cluster has none
    std::vector<int> nearest_count;          // |K(v)|
    std::vector<std::vector<int>> dist_from; // per branch slot, -1 unreachable
};

BranchSplitData branch_split_data(const GraphBall& ball, const Configuration& cfg) {
    const std::size_t n = ball.vertex_count();
    std::vector<std::vector<int>> open_adj(n);
    std::vector<int> open_deg(n, 0);
    for (std::size_t eid = 0; eid < ball.edges.size(); ++eid) {
        if (!cfg.open[eid]) continue;
        const auto& e = ball.edges[eid];
        open_adj[static_cast<std::size_t>(e.u)].push_back(e.v);
        open_adj[static_cast<std::size_t>(e.v)].push_back(e.u);
        ++open_deg[static_cast<std::size_t>(e.u)];
        ++open_deg[static_cast<std::size_t>(e.v)];
    }

    BranchSplitData data;
    data.branch_index_of.assign(n, -1);
    for (std::size_t v = 0; v < n; ++v)
        if (open_deg[v] >= 3) {
            data.branch_index_of[v] = static_cast<int>(data.branch.size());
            data.branch.push_back(static_cast<int>(v));
        }

    data.dist_from.resize(data.branch.size());
    for (std::size_t t = 0; t < data.branch.size(); ++t) {
        auto& dist = data.dist_from[t];
        dist.assign(n, -1);
        std::deque<int> queue{data.branch[t]};
        dist[static_cast<std::size_t>(data.branch[t])] = 0;
        while (!queue.empty()) {
            const int v = queue.front();
            queue.pop_front();
            for (int w : open_adj[static_cast<std::size_t>(v)])
                if (dist[static_cast<std::size_t>(w)] < 0) {
                    dist[static_cast<std::size_t>(w)] = dist[static_cast<std::size_t>(v)] + 1;
                    queue.push_back(w);
                }
        }
    }

    data.nearest_dist.assign(n, -1);
    data.nearest_count.assign(n, 0);
    for (std::size_t v = 0; v < n; ++v) {
        int best = -1;
        int count = 0;
        for (std::size_t t = 0; t < data.branch.size(); ++t) {
            const int d = data.dist_from[t][v];
            if (d < 0) continue;
            if (best < 0 || d < best) {
                best = d;
                count = 1;
            } else if (d == best) {
                ++count;
            }
        }
        data.nearest_dist[v] = best;
        data.nearest_count[v] = count;
    }
    return data;
}

std::pair<Rational, Rational> branch_split_sums(const GraphBall& ball,
                                                const BranchSplitData& data, int origin) {
    Rational lhs(data.nearest_dist[static_cast<std::size_t>(origin)] >= 0 ? 1 : 0);
    Rational rhs(0);
    const int slot = data.branch_index_of[static_cast<std::size_t>(origin)];
    if (slot >= 0) {
        const auto& dist = data.dist_from[static_cast<std::size_t>(slot)];
        for (std::size_t v = 0; v < ball.vertex_count(); ++v)
            if (dist[v] >= 0 && dist[v] == data.nearest_dist[v])
                rhs += Rational::unit_fraction(data.nearest_count[v]);
    }
    return {lhs, rhs};
}

void check_torus_kernel(const GraphBall& ball, const MassTransportFn& phi,
                        const Configuration* cfg) {
    if (ball.spec.family != Family::torus)
        fail("graph: transport sums run on torus quotients");
    switch (phi.kind) {
    case MassTransportFn::Kind::zero: break;
    case MassTransportFn::Kind::offset:
        if (static_cast<int>(phi.delta.size()) != ball.spec.dim)
            fail("kernel: offset length must match the torus dimension");
        break;
    case MassTransportFn::Kind::branch_split:
        if (cfg == nullptr) fail("kernel: branch split needs a configuration");
        if (cfg->open.size() != ball.edge_count())
            fail("kernel: configuration does not fit the ball");
        if (ball.vertex_count() > 512)
            fail("graph: exact branch-split sums are limited to 512 vertices");
        break;
    default:
        fail("kernel: height kernels run on the fixed-end tree via mtp_violation_fixed_end");
    }
}

} // namespace

std::pair<Rational, Rational> mtp_check(const GraphBall& ball, const MassTransportFn& phi,
                                        int origin, const Configuration* cfg) {
    check_torus_kernel(ball, phi, cfg);
    if (origin < 0 || origin >= static_cast<int>(ball.vertex_count()))
        fail("origin: out of range");

    switch (phi.kind) {
    case MassTransportFn::Kind::zero: return {Rational(0), Rational(0)};
    case MassTransportFn::Kind::offset: {
        const std::string target = torus_shift(ball, ball.keys[static_cast<std::size_t>(origin)],
                                               phi.delta, +1);
        long long lhs = 0, rhs = 0;
        for (std::size_t v = 0; v < ball.vertex_count(); ++v) {
            if (ball.keys[v] == target) ++lhs;
            if (torus_shift(ball, ball.keys[v], phi.delta, +1) ==
                ball.keys[static_cast<std::size_t>(origin)])
                ++rhs;
        }
        return {Rational(lhs), Rational(rhs)};
    }
    default: {
        const BranchSplitData data = branch_split_data(ball, *cfg);
        return branch_split_sums(ball, data, origin);
    }
    }
}

std::pair<Rational, Rational> mtp_exhaustive(const GraphBall& ball, const MassTransportFn& phi,
                                             const Configuration* cfg) {
    check_torus_kernel(ball, phi, cfg);

    Rational lhs(0), rhs(0);
    switch (phi.kind) {
    case MassTransportFn::Kind::zero: break;
    case MassTransportFn::Kind::offset: {
        for (std::size_t o = 0; o < ball.vertex_count(); ++o) {
            const auto [l, r] = mtp_check(ball, phi, static_cast<int>(o));
            lhs += l;
            rhs += r;
        }
        break;
    }
    default: {
        const BranchSplitData data = branch_split_data(ball, *cfg);
        long long senders = 0;
        for (std::size_t v = 0; v < ball.vertex_count(); ++v)
            if (data.nearest_dist[v] >= 0) ++senders;
        lhs = Rational(senders);
        for (int t : data.branch) rhs += branch_split_sums(ball, data, t).second;
        break;
    }
    }
    return {lhs, rhs};
}

std::pair<long long, long long> mtp_violation_fixed_end(const std::string& kernel) {
    const bool count_parent = kernel == "parent" || kernel == "parent_or_child";
    const bool count_child = kernel == "child" || kernel == "parent_or_child";
    if (!count_parent && !count_child)
        fail("kernel: fixed-end menu is parent | child | parent_or_child");

    const GraphBall ball = build_ball(GraphSpec::make_fixed_end_tree(3), 3);
    const int o = ball.origin;
    const int ho = ball.height[static_cast<std::size_t>(o)];

    long long lhs = 0, rhs = 0;
    for (std::size_t v = 0; v < ball.vertex_count(); ++v) {
        const int hv = ball.height[v];
        bool adjacent = false;
        for (int w : ball.neighbors(o))
            if (w == static_cast<int>(v)) adjacent = true;
        if (!adjacent) continue;
        // phi(o, v): v on the end side of o, or the reverse for child.
        if ((count_parent && hv == ho - 1) || (count_child && hv == ho + 1)) ++lhs;
        // phi(v, o): o is v's parent (or child).
        if ((count_parent && ho == hv - 1) || (count_child && ho == hv + 1)) ++rhs;
    }
    return {lhs, rhs};
}

// ---- indistinguishability harness ----

namespace {

// Harness constants, calibrated once on the release controls and
// frozen. The size floor keeps per-cluster statistics in the regime
// where they concentrate; the dispersion rule only fires on a clean
// two-population separation (near-empty midband, both sides populated,
// gap well above the within-side spread). Calibration data, four seeds
// per control: single-population runs always leave at least 8% of the
// values in the midband because the split cuts a continuum, while a
// genuine two-mode population leaves under 4.5% there and carries a
// gap/spread ratio above 5.5.
constexpr int kIndistSizeFloor = 64;
constexpr std::uint64_t kIndistMinMulti = 10;
constexpr std::size_t kIndistMinValues = 40;
constexpr double kIndistLevel = 0.01;
constexpr double kSplitBalance = 0.08;
constexpr double kSplitMidband = 0.06;
constexpr double kSplitRatio = 3.0;

// cluster_pc needs more interior edges than the other statistics before
// its occupancy estimate concentrates, so it gets a higher floor.
constexpr int kPcSizeFloor = 96;
constexpr int kFreqStarts = 256;

// Threshold estimate from edge occupancy: the fraction of open edges
// among the cluster's outward slots (edges to the next distance shell)
// estimates the per-edge retention rate the process applied, and on a
// degree-d graph independent percolation turns critical when retention
// times the forward arity d-1 reaches one. Tight for clusters past the
// size floor: on the depth-10 tree the two delet populations land on
// 1/(2p) and 1/(2pp') to within a few thousandths.
double branching_threshold(const GraphBall& ball, const Configuration& cfg,
                           const ClusterDecomposition& dec, int c) {
    long long slots = 0;
    long long open = 0;
    for (std::size_t v = 0; v < ball.vertex_count(); ++v) {
        if (dec.cluster_of[v] != c) continue;
        for (const auto& [eid, w] : ball.incident[v]) {
            if (ball.dist[static_cast<std::size_t>(w)] != ball.dist[v] + 1) continue;
            ++slots;
            if (cfg.open[static_cast<std::size_t>(eid)]) ++open;
        }
    }
    // A qualifying cluster joins the inner ball to the boundary, so it
    // has at least one open outward edge.
    return 1.0 / (static_cast<double>(ball.spec.degree() - 1) *
                  (static_cast<double>(open) / static_cast<double>(slots)));
}

const std::vector<std::string> kIndistMenu = {"frequency", "density",    "cluster_pc",
                                              "mean_degree", "ends_proxy", "vc_degree"};

} // namespace

const std::vector<std::string>& indist_statistics() { return kIndistMenu; }

IndistReport indistinguishability_test(const GraphBall& ball, const Process& process,
                                       const std::string& statistic, std::uint64_t n_samples,
                                       std::uint64_t seed) {
    if (std::find(kIndistMenu.begin(), kIndistMenu.end(), statistic) == kIndistMenu.end())
        fail("statistic: unknown (menu: frequency density cluster_pc mean_degree ends_proxy "
             "vc_degree)");
    if (statistic == "vc_degree" && ball.spec.family != Family::fixed_end_tree)
        fail("statistic: vc_degree requires fixed_end_tree");
    if (ball.spec.family == Family::torus)
        fail("graph: the harness needs a free boundary, not a torus quotient");
    if (n_samples == 0) fail("n_samples: must be positive");
    process.validate(ball);

    IndistReport report;
    report.statistic = statistic;
    report.decomposable = statistic == "mean_degree";
    report.samples = n_samples;
    report.seed = seed;
    report.params = process.param_map();
    report.params["graph"] = ball.spec.to_string();
    report.params["radius"] = std::to_string(ball.radius);
    report.params["statistic"] = statistic;
    report.params["n_samples"] = std::to_string(n_samples);

    const int inner = default_inner_radius(ball);
    const int floor_ = statistic == "cluster_pc" ? kPcSizeFloor : kIndistSizeFloor;
    std::vector<double> pooled;
    std::vector<std::vector<double>> bags; // parallel to report.values when decomposable

    for (std::uint64_t k = 0; k < n_samples; ++k) {
        const Configuration cfg = process.sample(ball, seed, k);
        const ClusterDecomposition dec = decompose(ball, cfg);

        std::vector<int> eligible;
        for (int c = 0; c < dec.cluster_count(); ++c)
            if (cluster_eligible(ball, dec, c, inner) &&
                dec.size[static_cast<std::size_t>(c)] >= floor_)
                eligible.push_back(c);
        if (eligible.empty()) continue;
        if (eligible.size() >= 2) ++report.multi_samples;

        // Shared per-sample fields used by some statistics.
        std::vector<int> freq_count;
        if (statistic == "frequency") {
            freq_count.assign(static_cast<std::size_t>(dec.cluster_count()), 0);
            const std::size_t n = ball.vertex_count();
            for (int j = 0; j < kFreqStarts; ++j) {
                const double u = u01(prf64(seed, k, "indist-start", static_cast<std::uint64_t>(j)));
                std::size_t v = static_cast<std::size_t>(u * static_cast<double>(n));
                if (v >= n) v = n - 1;
                ++freq_count[static_cast<std::size_t>(dec.cluster_of[v])];
            }
        }
        std::vector<int> open_deg;
        if (statistic == "mean_degree") {
            open_deg.assign(ball.vertex_count(), 0);
            for (std::size_t eid = 0; eid < ball.edges.size(); ++eid)
                if (cfg.open[eid]) {
                    ++open_deg[static_cast<std::size_t>(ball.edges[eid].u)];
                    ++open_deg[static_cast<std::size_t>(ball.edges[eid].v)];
                }
        }

        const std::size_t first_of_sample = report.values.size();
        for (int c : eligible) {
            ClusterObservation obs;
            obs.sample = k;
            obs.cluster = c;
            obs.size = dec.size[static_cast<std::size_t>(c)];
            if (statistic == "density") {
                obs.value = cluster_density(ball, dec, c);
            } else if (statistic == "mean_degree") {
                obs.value = cluster_mean_degree(dec, c);
                std::vector<double> bag;
                bag.reserve(static_cast<std::size_t>(obs.size));
                for (std::size_t v = 0; v < ball.vertex_count(); ++v)
                    if (dec.cluster_of[v] == c) bag.push_back(static_cast<double>(open_deg[v]));
                bags.push_back(std::move(bag));
            } else if (statistic == "ends_proxy") {
                obs.value = static_cast<double>(cluster_ends_proxy(ball, cfg, dec, c));
            } else if (statistic == "cluster_pc") {
                obs.value = branching_threshold(ball, cfg, dec, c);
            } else if (statistic == "frequency") {
                obs.value = static_cast<double>(freq_count[static_cast<std::size_t>(c)]) /
                            static_cast<double>(kFreqStarts);
            } else { // vc_degree
                obs.value = static_cast<double>(cluster_min_height_degree(ball, cfg, dec, c));
            }
            pooled.push_back(obs.value);
            report.values.push_back(obs);
        }

        if (report.decomposable && eligible.size() >= 2) {
            for (std::size_t i = first_of_sample; i < report.values.size(); ++i)
                for (std::size_t j = i + 1; j < report.values.size(); ++j) {
                    PairTestRecord rec;
                    rec.sample = k;
                    rec.cluster_a = report.values[i].cluster;
                    rec.cluster_b = report.values[j].cluster;
                    const RankTestResult mw = mann_whitney(bags[i], bags[j]);
                    rec.z = mw.z;
                    rec.p = mw.p;
                    report.pairs.push_back(rec);
                }
        }
    }

    if (!report.pairs.empty()) {
        report.pair_level = kIndistLevel / static_cast<double>(report.pairs.size());
        for (auto& rec : report.pairs)
            if (rec.p < report.pair_level) {
                rec.significant = true;
                ++report.significant_pairs;
            }
    }

    if (pooled.size() >= 2) {
        report.split = two_means_split(pooled);
        const auto& s = report.split;
        const bool separated = s.sd_within == 0.0 ? s.gap > 0.0 : s.gap >= kSplitRatio * s.sd_within;
        report.split_detected = s.balance >= kSplitBalance && s.midband_mass <= kSplitMidband &&
                                separated && pooled.size() >= kIndistMinValues;
    }

    report.conclusive =
        report.multi_samples >= kIndistMinMulti && pooled.size() >= kIndistMinValues;
    report.detected = report.conclusive && (report.significant_pairs > 0 || report.split_detected);
    report.verdict = !report.conclusive  ? "inconclusive"
                     : report.detected   ? "difference detected"
                                         : "no difference detected";
    return report;
}

std::string IndistReport::json() const {
    nlohmann::json j;
    j["statistic"] = statistic;
    j["decomposable"] = decomposable;
    j["samples"] = samples;
    j["multi_samples"] = multi_samples;
    j["seed"] = seed;
    j["pair_level"] = pair_level;
    j["significant_pairs"] = significant_pairs;
    j["split"] = {{"n_low", split.n_low},
                  {"n_high", split.n_high},
                  {"mean_low", split.mean_low},
                  {"mean_high", split.mean_high},
                  {"sd_within", split.sd_within},
                  {"gap", split.gap},
                  {"balance", split.balance},
                  {"midband_mass", split.midband_mass}};
    j["split_detected"] = split_detected;
    j["conclusive"] = conclusive;
    j["detected"] = detected;
    j["verdict"] = verdict;
    j["params"] = params;
    auto& vals = j["values"] = nlohmann::json::array();
    for (const auto& v : values)
        vals.push_back({{"sample", v.sample},
                        {"cluster", v.cluster},
                        {"size", v.size},
                        {"value", v.value}});
    auto& prs = j["pairs"] = nlohmann::json::array();
    for (const auto& p : pairs)
        prs.push_back({{"sample", p.sample},
                       {"cluster_a", p.cluster_a},
                       {"cluster_b", p.cluster_b},
                       {"z", p.z},
                       {"p", p.p},
                       {"significant", p.significant}});
    return j.dump();
}

// ---- uniqueness monotonicity ----

ContainmentReport uniqueness_monotonicity_check(const GraphBall& ball, double p1, double p2,
                                                std::uint64_t n, std::uint64_t seed) {
    if (!(p1 > 0.0 && p1 <= p2 && p2 <= 1.0)) fail("p: need 0 < p1 <= p2 <= 1");
    if (n == 0) fail("n: must be positive");
    if (ball.spec.family == Family::torus)
        fail("graph: containment needs a free boundary, not a torus quotient");

    Process low{"bernoulli", p1, 1.0, 0.0};
    Process high{"bernoulli", p2, 1.0, 0.0};
    const int inner = default_inner_radius(ball);

    ContainmentReport report;
    for (std::uint64_t k = 0; k < n; ++k) {
        const Configuration cfg1 = low.sample(ball, seed, k);
        const Configuration cfg2 = high.sample(ball, seed, k);
        const ClusterDecomposition dec1 = decompose(ball, cfg1);

        std::vector<int> span1;     // boundary-touching p1 clusters
        std::vector<int> anchored1; // those that also reach the inner half
        for (int c = 0; c < dec1.cluster_count(); ++c) {
            if (!dec1.spanning[static_cast<std::size_t>(c)]) continue;
            span1.push_back(c);
            if (cluster_eligible(ball, dec1, c, inner)) anchored1.push_back(c);
        }
        if (span1.empty()) continue;
        ++report.qualifying_samples;

        const ClusterDecomposition dec2 = decompose(ball, cfg2);
        // cfg1 is edgewise below cfg2, so every p1 cluster lies whole
        // inside the p2 cluster of (say) its least vertex.
        const auto supercluster = [&](int c) {
            const int root = dec1.least_vertex[static_cast<std::size_t>(c)];
            return static_cast<std::size_t>(
                dec2.cluster_of[static_cast<std::size_t>(root)]);
        };
        std::vector<bool> receives(static_cast<std::size_t>(dec2.cluster_count()), false);
        std::vector<bool> receives_anchored(receives.size(), false);
        for (int c : span1) receives[supercluster(c)] = true;
        for (int c : anchored1) receives_anchored[supercluster(c)] = true;
        for (int c = 0; c < dec2.cluster_count(); ++c) {
            if (!dec2.spanning[static_cast<std::size_t>(c)]) continue;
            ++report.p2_clusters;
            if (receives[static_cast<std::size_t>(c)]) ++report.contained;
            if (cluster_eligible(ball, dec2, c, inner)) {
                ++report.anchored_p2_clusters;
                if (receives_anchored[static_cast<std::size_t>(c)]) ++report.anchored_contained;
            }
        }
    }

    report.conclusive = report.qualifying_samples > 0 && report.p2_clusters > 0;
    if (report.conclusive)
        report.fraction = wilson_estimate(report.contained, report.p2_clusters, seed);
    if (report.anchored_p2_clusters > 0)
        report.anchored_fraction =
            wilson_estimate(report.anchored_contained, report.anchored_p2_clusters, seed);
    for (EstimateWithCI* est : {&report.fraction, &report.anchored_fraction}) {
        est->params["graph"] = ball.spec.to_string();
        est->params["radius"] = std::to_string(ball.radius);
        est->params["p1"] = std::to_string(p1);
        est->params["p2"] = std::to_string(p2);
        est->params["n"] = std::to_string(n);
    }
    return report;
}

// ---- sprinkled-union phase table ----

std::vector<PhaseRow> phases_experiment(const std::vector<double>& eps_list, int radius,
                                        std::uint64_t n, std::uint64_t seed,
                                        const BallLimits& limits) {
    if (n == 0) fail("n: must be positive");
    if (radius < 2) fail("radius: must be at least 2");
    for (double eps : eps_list)
        if (!(eps >= 0.0 && eps <= 1.0)) fail("eps: must lie in [0, 1]");

    const GraphSpec spec =
        GraphSpec::make_product(GraphSpec::make_free_group(2), GraphSpec::make_lattice(2));
    const GraphBall ball = build_ball(spec, radius, limits);
    const GraphBall left_ball = build_ball(GraphSpec::make_free_group(2), radius, limits);

    // Per vertex: free-group distance and fiber id, plus the lattice
    // distance within the fiber.
    const std::size_t nv = ball.vertex_count();
    std::vector<int> left_dist(nv), lat_dist(nv), fiber(nv);
    std::unordered_map<std::string, int> fiber_ids;
    for (std::size_t v = 0; v < nv; ++v) {
        const std::string& key = ball.keys[v];
        const std::size_t hash_pos = key.find('#');
        const std::string lk = key.substr(0, hash_pos);
        const int li = left_ball.index(lk);
        if (li < 0) fail("vertex key: left factor outside its ball");
        left_dist[v] = left_ball.dist[static_cast<std::size_t>(li)];
        const auto c = parse_torus_coords(key.substr(hash_pos + 1), 2);
        lat_dist[v] = std::abs(c[0]) + std::abs(c[1]);
        auto [it, inserted] = fiber_ids.try_emplace(lk, static_cast<int>(fiber_ids.size()));
        fiber[v] = it->second;
    }
    const int cross_extent = (radius + 1) / 2;

    std::vector<PhaseRow> rows;
    for (std::size_t row_idx = 0; row_idx < eps_list.size(); ++row_idx) {
        PhaseRow row;
        row.eps = eps_list[row_idx];
        row.fiber_mode = row.eps == 0.0;
        Process proc{"fiber", 0.5, 1.0, row.eps};
        const std::uint64_t row_seed = derive_seed(seed, row_idx);

        double total = 0.0;
        for (std::uint64_t k = 0; k < n; ++k) {
            const Configuration cfg = proc.sample(ball, row_seed, k);
            const ClusterDecomposition dec = decompose(ball, cfg);
            int count = 0;
            if (!row.fiber_mode) {
                // Clusters crossing the free-group direction: they touch
                // the origin fiber and reach left-distance >= ceil(R/2).
                std::vector<bool> touches0(static_cast<std::size_t>(dec.cluster_count()), false);
                std::vector<bool> reaches(static_cast<std::size_t>(dec.cluster_count()), false);
                for (std::size_t v = 0; v < nv; ++v) {
                    const std::size_t c = static_cast<std::size_t>(dec.cluster_of[v]);
                    if (left_dist[v] == 0) touches0[c] = true;
                    if (left_dist[v] >= cross_extent) reaches[c] = true;
                }
                for (std::size_t c = 0; c < touches0.size(); ++c)
                    if (touches0[c] && reaches[c]) ++count;
            } else {
                // No free-group edge is ever open: report how many fibers
                // own a cluster joining the fiber's inner half to its rim
                // (rim fibers with fewer than 2 lattice shells are skipped).
                std::vector<int> cluster_min(static_cast<std::size_t>(dec.cluster_count()),
                                             radius + 1);
                std::vector<int> cluster_max(static_cast<std::size_t>(dec.cluster_count()), -1);
                std::vector<int> cluster_fiber(static_cast<std::size_t>(dec.cluster_count()), -1);
                std::vector<int> fiber_radius(fiber_ids.size(), 0);
                for (std::size_t v = 0; v < nv; ++v) {
                    const std::size_t c = static_cast<std::size_t>(dec.cluster_of[v]);
                    cluster_fiber[c] = fiber[v];
                    cluster_min[c] = std::min(cluster_min[c], lat_dist[v]);
                    cluster_max[c] = std::max(cluster_max[c], lat_dist[v]);
                    fiber_radius[static_cast<std::size_t>(fiber[v])] =
                        std::max(fiber_radius[static_cast<std::size_t>(fiber[v])], lat_dist[v]);
                }
                std::vector<char> fiber_spans(fiber_ids.size(), 0);
                for (std::size_t c = 0; c < cluster_fiber.size(); ++c) {
                    const int f = cluster_fiber[c];
                    const int fr = fiber_radius[static_cast<std::size_t>(f)];
                    if (fr < 2) continue;
                    if (cluster_max[c] == fr && cluster_min[c] <= fr / 2)
                        fiber_spans[static_cast<std::size_t>(f)] = 1;
                }
                for (char s : fiber_spans) count += s;
            }
            ++row.count_histogram[count];
            total += count;
        }

        row.mean_count = total / static_cast<double>(n);
        std::uint64_t best = 0;
        for (const auto& [count, hits] : row.count_histogram)
            if (hits > best) {
                best = hits;
                row.modal_count = count;
            }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string phases_csv(const std::vector<PhaseRow>& rows) {
    std::string out = "eps,fiber_mode,count,samples\n";
    for (const auto& row : rows)
        for (const auto& [count, hits] : row.count_histogram)
            out += std::to_string(row.eps) + "," + (row.fiber_mode ? "1" : "0") + "," +
                   std::to_string(count) + "," + std::to_string(hits) + "\n";
    return out;
}

} // namespace percolab
