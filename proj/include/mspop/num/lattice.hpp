#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mspop::num {

struct Axis {
    double lo = 0;
    double hi = 1;
    std::size_t n = 2; // node count, at least 2

    double step() const { return (hi - lo) / static_cast<double>(n - 1); }
    double coord(std::size_t i) const {
        return lo + step() * static_cast<double>(i);
    }
};

// Uniform tensor-product lattice with node values.  Interpolation is
// multilinear; points outside the box evaluate to zero (densities are
// extended by zero off their support).
class Lattice {
  public:
    Lattice() = default;
    explicit Lattice(std::vector<Axis> axes);

    std::size_t dims() const { return axes_.size(); }
    const Axis& axis(std::size_t d) const { return axes_[d]; }
    std::size_t size() const { return values_.size(); }

    std::span<double> values() { return values_; }
    std::span<const double> values() const { return values_; }

    std::size_t flat_index(std::span<const std::size_t> idx) const;
    void unflatten(std::size_t flat, std::span<std::size_t> idx) const;
    void node_coords(std::size_t flat, std::span<double> coords) const;

    double value(std::span<const double> point) const;

    // Trapezoid weight of a node (product of per-axis end-point halving)
    // times the cell volume; sum of value*node_weight approximates the
    // integral over the box.
    double node_weight(std::size_t flat) const;
    double integral() const;
    double max_abs() const;

    // Fill from a callable taking node coordinates.
    template <class F>
    void fill(F&& f) {
        std::vector<double> c(dims());
        for (std::size_t k = 0; k < values_.size(); ++k) {
            node_coords(k, c);
            values_[k] = f(std::span<const double>(c));
        }
    }

  private:
    std::vector<Axis> axes_;
    std::vector<std::size_t> strides_;
    std::vector<double> values_;
};

} // namespace mspop::num
