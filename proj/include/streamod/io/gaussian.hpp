/*
    Licensed under the Apache License, Version 2.0 (the "License");
    you may not use this file except in compliance with the License.
    You may obtain a copy of the License at

        https://www.apache.org/licenses/LICENSE-2.0

    Unless required by applicable law or agreed to in writing, software
    distributed under the License is distributed on an "AS IS" BASIS,
    WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
    See the License for the specific language governing permissions and
    limitations under the License.
*/

#ifndef STREAMOD_IO_GAUSSIAN_HPP_
#define STREAMOD_IO_GAUSSIAN_HPP_

#include <streamod/core.hpp>

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace streamod {

struct GaussianComponent {
    Point mean;
    double scale = 1.0;  ///< isotropic standard deviation
    double weight = 1.0;
};

/**
 * @brief Three-component isotropic Gaussian mixture.
 *
 * The defaults are calibrated so that W=10000, R=0.28, k=50 marks roughly one percent of each window.
 */
struct GaussianMixtureSpec {
    std::size_t dims = 1;
    std::vector<GaussianComponent> components;
    std::uint64_t seed = 42;

    void validate() const {
        if (components.size() != 3) throw UsageError("the Gaussian mixture has exactly three components");
        double total = 0.0;
        for (const auto& c : components) {
            if (c.mean.size() != dims) throw UsageError("mixture component mean has the wrong dimensionality");
            if (!(c.scale > 0.0)) throw UsageError("mixture component scale must be positive");
            if (c.weight < 0.0) throw UsageError("mixture weights must be non-negative");
            total += c.weight;
        }
        if (std::fabs(total - 1.0) > 1e-9) throw UsageError("mixture weights must sum to 1");
    }
};

inline GaussianMixtureSpec default_gaussian_spec(std::size_t dims, std::uint64_t seed = 42) {
    GaussianMixtureSpec spec;
    spec.dims = dims;
    spec.seed = seed;
    const double weights[3] = {0.40, 0.35, 0.25};
    switch (dims) {
    case 1:
        spec.components = {{Point{0.0}, 1.4, weights[0]}, {Point{4.0}, 1.4, weights[1]}, {Point{8.0}, 1.4, weights[2]}};
        break;
    case 2:
        spec.components = {{Point{0.0, 0.0}, 0.24, weights[0]},
                           {Point{2.0, 2.0}, 0.24, weights[1]},
                           {Point{4.0, 0.0}, 0.24, weights[2]}};
        break;
    case 3:
        spec.components = {{Point{0.0, 0.0, 0.0}, 0.16, weights[0]},
                           {Point{1.0, 1.0, 1.0}, 0.16, weights[1]},
                           {Point{2.0, 0.0, 1.0}, 0.16, weights[2]}};
        break;
    default: throw UsageError("calibrated Gaussian defaults exist for 1 to 3 dimensions only");
    }
    return spec;
}

/// Same spec and seed give the same stream.
inline std::vector<Point> generate_gaussian_values(const GaussianMixtureSpec& spec, std::size_t n) {
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::vector<double> w;
    for (const auto& c : spec.components) w.push_back(c.weight);
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Point> out;
    out.reserve(n);
    std::vector<double> v(spec.dims);
    for (std::size_t i = 0; i < n; ++i) {
        const auto& c = spec.components[pick(rng)];
        for (std::size_t j = 0; j < spec.dims; ++j) v[j] = c.mean[j] + c.scale * normal(rng);
        out.emplace_back(std::span<const double>(v));
    }
    return out;
}

}  // namespace streamod

#endif  // STREAMOD_IO_GAUSSIAN_HPP_
