#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace driftmon {

// Neumaier-compensated accumulator. All dataset-level sums in the toolkit
// run left-to-right over the stored record order through this type, so
// totals are reproducible and accurate to roughly one ulp of the result.
class KahanSum {
public:
    void add(double x) {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

inline double compensated_sum(const std::vector<double>& xs) {
    KahanSum s;
    for (double x : xs) s.add(x);
    return s.value();
}

// Standard normal CDF via the C library erfc; absolute error is a few ulp,
// far inside the 1e-12 budget the hypothesis test requires.
inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

struct SampleMoments {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;               // sample standard deviation, divisor n-1
    double skewness = 0.0;         // g1 = m3 / m2^(3/2)
    double excess_kurtosis = 0.0;  // g2 = m4 / m2^2 - 3
};

// Central moments in two compensated passes.
inline SampleMoments sample_moments(const std::vector<double>& xs) {
    SampleMoments m;
    m.n = xs.size();
    if (m.n == 0) return m;
    m.mean = compensated_sum(xs) / static_cast<double>(m.n);
    KahanSum m2, m3, m4;
    for (double x : xs) {
        const double d = x - m.mean;
        m2.add(d * d);
        m3.add(d * d * d);
        m4.add(d * d * d * d);
    }
    const double n = static_cast<double>(m.n);
    const double v2 = m2.value() / n;
    if (m.n > 1) m.sd = std::sqrt(m2.value() / (n - 1.0));
    if (v2 > 0.0) {
        m.skewness = (m3.value() / n) / std::pow(v2, 1.5);
        m.excess_kurtosis = (m4.value() / n) / (v2 * v2) - 3.0;
    }
    return m;
}

}  // namespace driftmon
