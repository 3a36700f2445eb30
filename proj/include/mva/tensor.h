#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace mva {

using Shape = std::vector<std::size_t>;

/// Element precision tag. The numeric codes are the on-disk dtype codes.
enum class DType : std::uint8_t { f32 = 1, f64 = 2 };

const char* dtype_name(DType dtype);
std::string shape_string(const Shape& shape);
std::size_t shape_numel(const Shape& shape);

/// Thrown when operand shapes violate an op's precondition.
class ShapeError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Dense row-major tensor.
///
/// Values are held in a double buffer regardless of dtype; an f32 tensor
/// keeps every element rounded to the nearest float, so it serializes and
/// compares exactly as a float buffer would. Rank 0 is a scalar holding one
/// element. Every extent must be at least 1.
class Tensor {
public:
    Tensor();
    explicit Tensor(Shape shape, DType dtype = DType::f64);
    Tensor(Shape shape, std::vector<double> data, DType dtype = DType::f64);

    static Tensor zeros(Shape shape, DType dtype = DType::f64);
    static Tensor ones(Shape shape, DType dtype = DType::f64);
    static Tensor full(Shape shape, double value, DType dtype = DType::f64);
    static Tensor scalar(double value, DType dtype = DType::f64);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t numel() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const;
    DType dtype() const noexcept { return dtype_; }

    std::span<const double> data() const noexcept { return data_; }
    /// Raw write access for builders. f32 tensors must be passed through
    /// round_to_dtype() after writing.
    std::span<double> mutable_data() noexcept { return data_; }

    double operator[](std::size_t flat) const { return data_[flat]; }
    double at(std::initializer_list<std::size_t> index) const;
    void set(std::initializer_list<std::size_t> index, double value);
    std::size_t offset(std::initializer_list<std::size_t> index) const;

    /// Same data, new shape with identical element count.
    Tensor reshaped(Shape shape) const;
    Tensor to(DType dtype) const;
    void round_to_dtype();

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    /// Bitwise equality of shape, dtype and every element.
    bool identical(const Tensor& other) const noexcept;

private:
    Shape shape_;
    std::vector<double> data_;
    DType dtype_ = DType::f64;
};

/// f64 if either operand is f64.
DType promote(DType a, DType b) noexcept;

}  // namespace mva
