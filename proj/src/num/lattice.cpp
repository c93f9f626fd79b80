#include "mspop/num/lattice.hpp"

#include "mspop/errors.hpp"

#include <algorithm>
#include <cmath>

namespace mspop::num {

Lattice::Lattice(std::vector<Axis> axes) : axes_(std::move(axes)) {
    if (axes_.size() > 8)
        throw OutOfRange("lattice supports at most 8 dimensions");
    std::size_t total = 1;
    strides_.resize(axes_.size());
    for (std::size_t d = axes_.size(); d-- > 0;) {
        const Axis& ax = axes_[d];
        if (ax.n < 2 || !(ax.hi > ax.lo))
            throw OutOfRange("lattice axis needs hi > lo and at least 2 nodes");
        strides_[d] = total;
        total *= ax.n;
    }
    values_.assign(total, 0.0);
}

std::size_t Lattice::flat_index(std::span<const std::size_t> idx) const {
    std::size_t flat = 0;
    for (std::size_t d = 0; d < axes_.size(); ++d) flat += idx[d] * strides_[d];
    return flat;
}

void Lattice::unflatten(std::size_t flat, std::span<std::size_t> idx) const {
    for (std::size_t d = 0; d < axes_.size(); ++d) {
        idx[d] = flat / strides_[d];
        flat %= strides_[d];
    }
}

void Lattice::node_coords(std::size_t flat, std::span<double> coords) const {
    for (std::size_t d = 0; d < axes_.size(); ++d) {
        std::size_t i = flat / strides_[d];
        flat %= strides_[d];
        coords[d] = axes_[d].coord(i);
    }
}

double Lattice::value(std::span<const double> point) const {
    constexpr std::size_t MAXD = 8;
    std::size_t base[MAXD];
    double frac[MAXD];
    const std::size_t d = axes_.size();
    for (std::size_t k = 0; k < d; ++k) {
        const Axis& ax = axes_[k];
        double p = point[k];
        if (p < ax.lo || p > ax.hi) return 0.0;
        double u = (p - ax.lo) / ax.step();
        std::size_t i = std::min(static_cast<std::size_t>(u), ax.n - 2);
        base[k] = i;
        frac[k] = u - static_cast<double>(i);
    }
    // Accumulate over the 2^d cell corners.
    double acc = 0;
    const std::size_t corners = std::size_t{1} << d;
    for (std::size_t c = 0; c < corners; ++c) {
        double w = 1;
        std::size_t flat = 0;
        for (std::size_t k = 0; k < d; ++k) {
            const bool hi = (c >> k) & 1u;
            w *= hi ? frac[k] : 1.0 - frac[k];
            flat += (base[k] + (hi ? 1 : 0)) * strides_[k];
        }
        if (w != 0) acc += w * values_[flat];
    }
    return acc;
}

double Lattice::node_weight(std::size_t flat) const {
    double w = 1;
    for (std::size_t d = 0; d < axes_.size(); ++d) {
        std::size_t i = flat / strides_[d];
        flat %= strides_[d];
        double wd = axes_[d].step();
        if (i == 0 || i == axes_[d].n - 1) wd *= 0.5;
        w *= wd;
    }
    return w;
}

double Lattice::integral() const {
    double s = 0;
    for (std::size_t k = 0; k < values_.size(); ++k)
        s += values_[k] * node_weight(k);
    return s;
}

double Lattice::max_abs() const {
    double m = 0;
    for (double v : values_) m = std::max(m, std::abs(v));
    return m;
}

} // namespace mspop::num
