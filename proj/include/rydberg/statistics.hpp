// SPDX-License-Identifier: Apache-2.0
//
// rydberg-sources: dipole blockade single atom and single photon source simulations
// ------------------------------------------------------------------------

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace rydberg::stats
{
    inline double mean(std::span<const double> xs)
    {
        if (xs.empty())
            return std::numeric_limits<double>::quiet_NaN();
        double s = 0.0;
        for (double x : xs)
            s += x;
        return s / static_cast<double>(xs.size());
    }

    /// Standard error of the mean (sample standard deviation / sqrt(n)); 0 for n < 2.
    inline double standard_error(std::span<const double> xs)
    {
        const auto n = xs.size();
        if (n < 2)
            return 0.0;
        const double m = mean(xs);
        double ss = 0.0;
        for (double x : xs)
            ss += (x - m) * (x - m);
        return std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
    }

    inline double median(std::vector<double> xs)
    {
        if (xs.empty())
            return std::numeric_limits<double>::quiet_NaN();
        std::sort(xs.begin(), xs.end());
        const auto n = xs.size();
        return n % 2 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
    }

    struct LinearFit
    {
        double slope = 0.0;
        double intercept = 0.0;
        double r_squared = 0.0;
    };

    /// Ordinary least squares y = slope * x + intercept.
    inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y)
    {
        if (x.size() != y.size() || x.size() < 2)
            throw std::invalid_argument("linear_fit needs at least two paired samples");
        const double mx = mean(x);
        const double my = mean(y);
        double sxx = 0.0, sxy = 0.0, syy = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            sxx += (x[i] - mx) * (x[i] - mx);
            sxy += (x[i] - mx) * (y[i] - my);
            syy += (y[i] - my) * (y[i] - my);
        }
        if (sxx == 0.0)
            throw std::invalid_argument("linear_fit: x values are all equal");
        LinearFit fit;
        fit.slope = sxy / sxx;
        fit.intercept = my - fit.slope * mx;
        double ss_res = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
        {
            const double r = y[i] - (fit.slope * x[i] + fit.intercept);
            ss_res += r * r;
        }
        fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
        return fit;
    }
}
