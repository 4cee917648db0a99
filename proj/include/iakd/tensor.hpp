#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace iakd {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles with an optional gradient of the same length.
struct Tensor {
    Shape shape;
    std::vector<double> data;
    std::optional<std::vector<double>> grad;

    Tensor() = default;
    explicit Tensor(Shape s);
    Tensor(Shape s, std::vector<double> values);

    static Tensor zeros(Shape s) { return Tensor(std::move(s)); }
    static Tensor scalar(double v) { return Tensor({1}, {v}); }

    std::size_t size() const { return data.size(); }
    std::size_t rank() const { return shape.size(); }
    std::size_t rows() const { return shape.at(0); }
    std::size_t cols() const { return shape.at(1); }

    double& at(std::size_t r, std::size_t c) { return data[r * shape[1] + c]; }
    double at(std::size_t r, std::size_t c) const { return data[r * shape[1] + c]; }

    bool all_finite() const;
};

// Gathers rows of a 2-D tensor in the given order.
Tensor gather_rows(const Tensor& src, const std::vector<std::size_t>& rows);

} // namespace iakd
