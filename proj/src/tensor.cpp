#include "flatgcd/tensor.hpp"

#include <cmath>

namespace flatgcd {

bool Tensor::all_finite() const {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

double global_norm(const std::vector<Tensor>& ts) {
    double ss = 0.0;
    for (const auto& t : ts) {
        for (double v : t.values()) ss += v * v;
    }
    return std::sqrt(ss);
}

} // namespace flatgcd
