#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace percolab {

// z for two-sided 99% coverage.
inline constexpr double kZ99 = 2.5758293035489004;

// Point estimate with symmetric confidence half-width at 99%.
// `sigma` is half_width / z, the scale used in 3-sigma tolerances.
struct EstimateWithCI {
    double value = 0.0;
    double half_width = 0.0;
    std::uint64_t n = 0;
    std::uint64_t seed = 0;
    std::map<std::string, std::string> params; // echo of the producing call

    double sigma() const { return half_width / kZ99; }
    double lo() const { return value - half_width; }
    double hi() const { return value + half_width; }
};

// Wilson score interval for a Bernoulli proportion.
EstimateWithCI wilson_estimate(std::uint64_t successes, std::uint64_t n, std::uint64_t seed);

// Normal interval for a mean given per-observation values.
EstimateWithCI mean_estimate(const std::vector<double>& xs, std::uint64_t seed);

double normal_cdf(double z);

// Kolmogorov-Smirnov distance between the sample and U(0,1).
double ks_uniform_statistic(std::vector<double> values);

// Two-sided Mann-Whitney rank test with tie-corrected normal
// approximation. Returns (z, p). Degenerate inputs give p = 1.
struct RankTestResult {
    double z = 0.0;
    double p = 1.0;
    double u = 0.0;
};
RankTestResult mann_whitney(const std::vector<double>& xs, const std::vector<double>& ys);

// Exact 1-D 2-means: the split of the sorted values minimizing total
// within-group sum of squares. Used to locate and score mode pairs.
struct TwoMeansSplit {
    std::size_t n_low = 0, n_high = 0;
    double mean_low = 0.0, mean_high = 0.0;
    double sd_within = 0.0;   // pooled within-group standard deviation
    double gap = 0.0;         // mean_high - mean_low
    double balance = 0.0;     // min(n_low, n_high) / n
    double midband_mass = 0.0; // fraction of values within 0.15*gap of the midpoint
};
TwoMeansSplit two_means_split(std::vector<double> values);

} // namespace percolab
