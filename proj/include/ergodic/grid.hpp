#pragma once

#include "ergodic/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

namespace ergodic {

/// Uniform tensor grid on [-R, R]^m, flattened row-major (last axis fastest).
class Grid {
public:
    Grid() = default;

    Grid(int dim, double radius, int n_per_axis)
        : Grid(dim, radius, std::vector<int>(dim > 0 ? static_cast<std::size_t>(dim) : 0u,
                                             n_per_axis)) {}

    /// Per-axis node counts; all axes share the radius.
    Grid(int dim, double radius, const std::vector<int>& n_per_axis) {
        if (dim < 1) throw ArgumentError("build_grid: dim must be >= 1");
        if (!(radius > 0.0)) throw ArgumentError("build_grid: radius must be > 0");
        if (n_per_axis.size() != static_cast<std::size_t>(dim))
            throw ArgumentError("build_grid: need one node count per axis");
        for (int n : n_per_axis)
            if (n < 3) throw ArgumentError("build_grid: n_per_axis must be >= 3");
        dim_ = dim;
        radius_.assign(static_cast<std::size_t>(dim), radius);
        n_ = n_per_axis;
        for (int n : n_) spacing_.push_back(2.0 * radius / (n - 1));
        strides_.assign(static_cast<std::size_t>(dim), 1);
        for (int ax = dim - 2; ax >= 0; --ax)
            strides_[ax] = strides_[ax + 1] * static_cast<std::size_t>(n_[ax + 1]);
        size_ = strides_[0] * static_cast<std::size_t>(n_[0]);
    }

    [[nodiscard]] int dim() const { return dim_; }
    [[nodiscard]] std::size_t size() const { return size_; }
    [[nodiscard]] double radius(int axis = 0) const { return radius_[axis]; }
    [[nodiscard]] int n_per_axis(int axis = 0) const { return n_[axis]; }
    [[nodiscard]] double spacing(int axis = 0) const { return spacing_[axis]; }
    [[nodiscard]] std::size_t stride(int axis) const { return strides_[axis]; }

    [[nodiscard]] double cell_volume() const {
        double v = 1.0;
        for (double h : spacing_) v *= h;
        return v;
    }

    [[nodiscard]] std::vector<int> multi_index(std::size_t flat) const {
        if (flat >= size_) throw ArgumentError("Grid: flat index out of range");
        std::vector<int> idx(static_cast<std::size_t>(dim_));
        for (int ax = 0; ax < dim_; ++ax) {
            idx[ax] = static_cast<int>(flat / strides_[ax]);
            flat %= strides_[ax];
        }
        return idx;
    }

    [[nodiscard]] std::size_t flat_index(const std::vector<int>& idx) const {
        if (idx.size() != static_cast<std::size_t>(dim_))
            throw ArgumentError("Grid: multi-index has wrong length");
        std::size_t flat = 0;
        for (int ax = 0; ax < dim_; ++ax) {
            if (idx[ax] < 0 || idx[ax] >= n_[ax])
                throw ArgumentError("Grid: multi-index out of range");
            flat += static_cast<std::size_t>(idx[ax]) * strides_[ax];
        }
        return flat;
    }

    [[nodiscard]] double coordinate(int axis, int i) const {
        // symmetric evaluation so that mirrored nodes have exactly opposite coordinates
        const int mid2 = n_[axis] - 1;  // 2 * (index of the midpoint)
        return 0.5 * (2 * i - mid2) * spacing_[axis];
    }

    [[nodiscard]] Eigen::VectorXd point(std::size_t flat) const {
        const auto idx = multi_index(flat);
        Eigen::VectorXd x(dim_);
        for (int ax = 0; ax < dim_; ++ax) x[ax] = coordinate(ax, idx[ax]);
        return x;
    }

    /// Node at (or, for even n, next to) the origin.
    [[nodiscard]] std::size_t center_index() const {
        std::vector<int> idx(static_cast<std::size_t>(dim_));
        for (int ax = 0; ax < dim_; ++ax) idx[ax] = n_[ax] / 2;
        return flat_index(idx);
    }

    bool operator==(const Grid&) const = default;

private:
    int dim_ = 0;
    std::vector<double> radius_;
    std::vector<int> n_;
    std::vector<double> spacing_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 0;
};

inline Grid build_grid(int dim, double radius, int n_per_axis) {
    return Grid(dim, radius, n_per_axis);
}

/// Node count per axis giving spacing h on [-R, R]; 2R/h must be an integer.
inline int nodes_for_spacing(double radius, double h) {
    if (!(radius > 0.0) || !(h > 0.0))
        throw ArgumentError("nodes_for_spacing: radius and h must be > 0");
    const double cells = 2.0 * radius / h;
    const double rounded = std::round(cells);
    if (std::abs(cells - rounded) > 1e-9 * std::max(1.0, cells))
        throw ArgumentError("nodes_for_spacing: 2R/h = " + std::to_string(cells) +
                            " is not an integer");
    return static_cast<int>(rounded) + 1;
}

}  // namespace ergodic
