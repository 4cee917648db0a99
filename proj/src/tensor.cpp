#include "iakd/tensor.hpp"

#include "iakd/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

namespace iakd {

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

Tensor::Tensor(Shape s) : shape(std::move(s)), data(shape_size(shape), 0.0) {
    for (auto d : shape) {
        if (d == 0) throw ConfigError("tensor dimensions must be positive, got " + shape_string(shape));
    }
}

Tensor::Tensor(Shape s, std::vector<double> values) : shape(std::move(s)), data(std::move(values)) {
    if (data.size() != shape_size(shape)) {
        throw ConfigError("tensor data length " + std::to_string(data.size()) +
                          " does not match shape " + shape_string(shape));
    }
}

bool Tensor::all_finite() const {
    return std::all_of(data.begin(), data.end(), [](double v) { return std::isfinite(v); });
}

Tensor gather_rows(const Tensor& src, const std::vector<std::size_t>& rows) {
    const std::size_t width = src.cols();
    Tensor out({rows.size(), width});
    for (std::size_t r = 0; r < rows.size(); ++r) {
        std::memcpy(&out.data[r * width], &src.data[rows[r] * width], width * sizeof(double));
    }
    return out;
}

} // namespace iakd
