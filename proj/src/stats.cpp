#include "percolab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace percolab {

EstimateWithCI wilson_estimate(std::uint64_t successes, std::uint64_t n, std::uint64_t seed) {
    if (n == 0) throw std::invalid_argument("wilson_estimate: n must be positive");
    if (successes > n) throw std::invalid_argument("wilson_estimate: successes > n");
    const double z = kZ99, z2 = z * z;
    const double nn = static_cast<double>(n);
    const double phat = static_cast<double>(successes) / nn;
    const double denom = 1.0 + z2 / nn;
    const double center = (phat + z2 / (2.0 * nn)) / denom;
    const double hw = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
    // Report the raw proportion; the symmetric half-width is stretched
    // to cover the (asymmetric) Wilson interval, never to shrink it.
    EstimateWithCI e;
    e.value = phat;
    e.half_width = std::max(center + hw - phat, phat - (center - hw));
    e.n = n;
    e.seed = seed;
    return e;
}

EstimateWithCI mean_estimate(const std::vector<double>& xs, std::uint64_t seed) {
    if (xs.empty()) throw std::invalid_argument("mean_estimate: empty sample");
    double mean = 0.0;
    for (double x : xs) mean += x;
    mean /= static_cast<double>(xs.size());
    double ss = 0.0;
    for (double x : xs) ss += (x - mean) * (x - mean);
    const double nn = static_cast<double>(xs.size());
    const double sd = xs.size() > 1 ? std::sqrt(ss / (nn - 1.0)) : 0.0;
    EstimateWithCI e;
    e.value = mean;
    e.half_width = kZ99 * sd / std::sqrt(nn);
    e.n = xs.size();
    e.seed = seed;
    return e;
}

double normal_cdf(double z) {
    return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

double ks_uniform_statistic(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("ks_uniform_statistic: empty sample");
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    double d = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
        const double u = values[i];
        d = std::max(d, (static_cast<double>(i) + 1.0) / n - u);
        d = std::max(d, u - static_cast<double>(i) / n);
    }
    return d;
}

RankTestResult mann_whitney(const std::vector<double>& xs, const std::vector<double>& ys) {
    RankTestResult r;
    const std::size_t n1 = xs.size(), n2 = ys.size();
    if (n1 == 0 || n2 == 0) return r;

    struct Obs { double v; int group; };
    std::vector<Obs> all;
    all.reserve(n1 + n2);
    for (double v : xs) all.push_back({v, 0});
    for (double v : ys) all.push_back({v, 1});
    std::sort(all.begin(), all.end(), [](const Obs& a, const Obs& b) { return a.v < b.v; });

    // Midranks with tie groups; accumulate sum(t^3 - t) for the variance
    // correction.
    const double n = static_cast<double>(n1 + n2);
    double rank_sum_x = 0.0;
    double tie_term = 0.0;
    std::size_t i = 0;
    while (i < all.size()) {
        std::size_t j = i;
        while (j < all.size() && all[j].v == all[i].v) ++j;
        const double t = static_cast<double>(j - i);
        const double midrank = (static_cast<double>(i) + 1.0 + static_cast<double>(j)) / 2.0;
        for (std::size_t k = i; k < j; ++k)
            if (all[k].group == 0) rank_sum_x += midrank;
        tie_term += t * t * t - t;
        i = j;
    }
    const double u = rank_sum_x - static_cast<double>(n1) * (static_cast<double>(n1) + 1.0) / 2.0;
    const double mu = static_cast<double>(n1) * static_cast<double>(n2) / 2.0;
    const double var = static_cast<double>(n1) * static_cast<double>(n2) / 12.0 *
                       ((n + 1.0) - tie_term / (n * (n - 1.0)));
    r.u = u;
    if (var <= 0.0) return r; // all values tied: no evidence either way
    const double cc = u > mu ? -0.5 : (u < mu ? 0.5 : 0.0); // continuity correction
    r.z = (u - mu + cc) / std::sqrt(var);
    r.p = 2.0 * (1.0 - normal_cdf(std::fabs(r.z)));
    if (r.p > 1.0) r.p = 1.0;
    return r;
}

TwoMeansSplit two_means_split(std::vector<double> values) {
    TwoMeansSplit s;
    if (values.size() < 2) return s;
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();

    std::vector<double> pre(n + 1, 0.0), pre2(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        pre[i + 1] = pre[i] + values[i];
        pre2[i + 1] = pre2[i] + values[i] * values[i];
    }
    auto ss_range = [&](std::size_t a, std::size_t b) { // within-SS of [a, b)
        const double cnt = static_cast<double>(b - a);
        const double sum = pre[b] - pre[a];
        return (pre2[b] - pre2[a]) - sum * sum / cnt;
    };

    std::size_t best_k = 1;
    double best = ss_range(0, 1) + ss_range(1, n);
    for (std::size_t k = 2; k < n; ++k) {
        const double w = ss_range(0, k) + ss_range(k, n);
        if (w < best) {
            best = w;
            best_k = k;
        }
    }

    s.n_low = best_k;
    s.n_high = n - best_k;
    s.mean_low = pre[best_k] / static_cast<double>(best_k);
    s.mean_high = (pre[n] - pre[best_k]) / static_cast<double>(s.n_high);
    s.sd_within = std::sqrt(std::max(0.0, best) / static_cast<double>(n));
    s.gap = s.mean_high - s.mean_low;
    s.balance = static_cast<double>(std::min(s.n_low, s.n_high)) / static_cast<double>(n);

    const double c = 0.5 * (s.mean_low + s.mean_high);
    const double w = 0.15 * s.gap;
    std::size_t inside = 0;
    for (double v : values)
        if (v >= c - w && v <= c + w) ++inside;
    s.midband_mass = static_cast<double>(inside) / static_cast<double>(n);
    return s;
}

} // namespace percolab
