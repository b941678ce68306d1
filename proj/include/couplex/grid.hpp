#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "couplex/model.hpp"
#include "couplex/rng.hpp"

namespace couplex {

/// Ascending time nodes on [0, T_eff].
class TimeGrid {
public:
    TimeGrid() = default;

    /// Uniform nodes up to T(1 − 1/n₀), then the geometric tail
    /// t_{k+1} = T − q(T − t_k) while T − t > h_min, then T_eff = T − h_min.
    static TimeGrid refined(double T, std::size_t n0, double q, double h_min);

    /// n equal steps on [0, T].
    static TimeGrid uniform(double T, std::size_t n);

    std::span<const double> nodes() const noexcept { return nodes_; }
    std::size_t steps() const noexcept { return nodes_.empty() ? 0 : nodes_.size() - 1; }
    double node(std::size_t k) const noexcept { return nodes_[k]; }
    double step(std::size_t k) const noexcept { return nodes_[k + 1] - nodes_[k]; }
    double end() const noexcept { return nodes_.back(); }
    double horizon() const noexcept { return horizon_; }
    double h_min() const noexcept { return h_min_; }
    std::size_t base_steps() const noexcept { return n0_; }
    double ratio() const noexcept { return q_; }

private:
    std::vector<double> nodes_;
    double horizon_ = 0.0;
    double h_min_ = 0.0;
    double q_ = 0.0;
    std::size_t n0_ = 0;
};

/// Brownian increments for one path: entry k has per-coordinate variance
/// nodes[k+1] − nodes[k].
std::vector<Vec> gaussian_increments(const RngStream& rng, const TimeGrid& grid, int d);

}  // namespace couplex
