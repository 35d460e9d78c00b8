#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace dac {

/// The discrete action set for the population size: powers of two up to the
/// problem size, ascending, starting at 1.
struct Portfolio {
    std::vector<int> lambdas;

    static Portfolio for_dimension(int n) {
        if (n < 1) throw std::invalid_argument("Portfolio: n must be >= 1");
        Portfolio p;
        for (long long v = 1; v <= n; v *= 2) p.lambdas.push_back(static_cast<int>(v));
        return p;
    }

    int size() const { return static_cast<int>(lambdas.size()); }
    int lambda_at(int index) const { return lambdas.at(static_cast<std::size_t>(index)); }

    int index_of(int lambda) const {
        for (int i = 0; i < size(); ++i)
            if (lambdas[static_cast<std::size_t>(i)] == lambda) return i;
        throw std::invalid_argument("Portfolio: lambda " + std::to_string(lambda) +
                                    " is not in the portfolio");
    }

    /// Index of the entry closest to `target`; ties go to the smaller lambda.
    int nearest_index(double target) const {
        int best = 0;
        double best_dist = std::fabs(lambdas[0] - target);
        for (int i = 1; i < size(); ++i) {
            const double d = std::fabs(lambdas[static_cast<std::size_t>(i)] - target);
            if (d < best_dist) {
                best = i;
                best_dist = d;
            }
        }
        return best;
    }
};

} // namespace dac
