#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace mspop::num {

// Determinant of a dense n x n matrix (row-major) by LU with partial
// pivoting.  The matrix is taken by value; dimensions here are tiny.
inline double det_lu(std::vector<double> a, std::size_t n) {
    double det = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[piv * n + col])) piv = r;
        if (a[piv * n + col] == 0.0) return 0.0;
        if (piv != col) {
            for (std::size_t c = 0; c < n; ++c)
                std::swap(a[piv * n + c], a[col * n + c]);
            det = -det;
        }
        det *= a[col * n + col];
        for (std::size_t r = col + 1; r < n; ++r) {
            double m = a[r * n + col] / a[col * n + col];
            for (std::size_t c = col + 1; c < n; ++c)
                a[r * n + c] -= m * a[col * n + c];
        }
    }
    return det;
}

} // namespace mspop::num
