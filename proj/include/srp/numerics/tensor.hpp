// SPDX-License-Identifier: Apache-2.0
//
// srpsim: subband-to-RB precoder upsampling simulator
// Copyright (C) 2026 The srpsim authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace srp::nn
{

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape &shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i)
        os << (i ? "," : "") << shape[i];
    os << ']';
    return os.str();
}

inline std::size_t shape_numel(const Shape &shape)
{
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

// Shape mismatch raised by a primitive. Carries the op name and both shapes.
class ShapeError : public std::invalid_argument
{
public:
    ShapeError(std::string op, Shape expected, Shape actual)
        : std::invalid_argument(op + ": expected shape " + shape_str(expected) + ", got " + shape_str(actual)),
          op_(std::move(op)), expected_(std::move(expected)), actual_(std::move(actual))
    {
    }

    const std::string &op() const noexcept { return op_; }
    const Shape &expected() const noexcept { return expected_; }
    const Shape &actual() const noexcept { return actual_; }

private:
    std::string op_;
    Shape expected_;
    Shape actual_;
};

// Dense row-major tensor of doubles. Complex data uses a leading axis of size 2 (re, im).
class Tensor
{
public:
    Tensor() = default;

    explicit Tensor(Shape shape, double fill = 0.0)
        : shape_(std::move(shape)), data_(shape_numel(shape_), fill)
    {
        check_dims();
    }

    Tensor(Shape shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data))
    {
        check_dims();
        if (data_.size() != shape_numel(shape_))
            throw std::invalid_argument("Tensor: data length " + std::to_string(data_.size()) +
                                        " does not match shape " + shape_str(shape_));
    }

    static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }

    const Shape &shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::span<const double> data() const noexcept { return data_; }
    std::span<double> data() noexcept { return data_; }
    const std::vector<double> &vec() const noexcept { return data_; }

    double &operator[](std::size_t i) { return data_[i]; }
    const double &operator[](std::size_t i) const { return data_[i]; }

    // Scalar value of a one-element tensor.
    double item() const
    {
        if (data_.size() != 1)
            throw ShapeError("item", {1}, shape_);
        return data_[0];
    }

    bool all_finite() const
    {
        for (double v : data_)
            if (!std::isfinite(v))
                return false;
        return true;
    }

    Tensor reshaped(Shape shape) const
    {
        if (shape_numel(shape) != data_.size())
            throw ShapeError("reshape", shape, shape_);
        return Tensor(std::move(shape), data_);
    }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    friend bool operator==(const Tensor &a, const Tensor &b) = default;

private:
    void check_dims() const
    {
        for (auto d : shape_)
            if (d == 0)
                throw std::invalid_argument("Tensor: zero-sized dimension in " + shape_str(shape_));
    }

    Shape shape_;
    std::vector<double> data_;
};

// Named parameter tensors in a fixed order (the checkpoint manifest order).
struct NamedTensor
{
    std::string name;
    Tensor value;
};

class ParamList
{
public:
    ParamList() = default;

    void add(std::string name, Tensor value)
    {
        if (find(name))
            throw std::invalid_argument("ParamList: duplicate parameter '" + name + "'");
        items_.push_back({std::move(name), std::move(value)});
    }

    const Tensor *find(const std::string &name) const
    {
        for (const auto &it : items_)
            if (it.name == name)
                return &it.value;
        return nullptr;
    }

    Tensor *find(const std::string &name)
    {
        for (auto &it : items_)
            if (it.name == name)
                return &it.value;
        return nullptr;
    }

    const Tensor &at(const std::string &name) const
    {
        if (auto *t = find(name))
            return *t;
        throw std::out_of_range("ParamList: no parameter '" + name + "'");
    }

    Tensor &at(const std::string &name)
    {
        if (auto *t = find(name))
            return *t;
        throw std::out_of_range("ParamList: no parameter '" + name + "'");
    }

    std::size_t size() const noexcept { return items_.size(); }
    auto begin() noexcept { return items_.begin(); }
    auto end() noexcept { return items_.end(); }
    auto begin() const noexcept { return items_.begin(); }
    auto end() const noexcept { return items_.end(); }
    const NamedTensor &operator[](std::size_t i) const { return items_[i]; }
    NamedTensor &operator[](std::size_t i) { return items_[i]; }

    std::size_t numel() const
    {
        std::size_t n = 0;
        for (const auto &it : items_)
            n += it.value.size();
        return n;
    }

    bool all_finite() const
    {
        for (const auto &it : items_)
            if (!it.value.all_finite())
                return false;
        return true;
    }

    friend bool operator==(const ParamList &a, const ParamList &b)
    {
        if (a.items_.size() != b.items_.size())
            return false;
        for (std::size_t i = 0; i < a.items_.size(); ++i)
            if (a.items_[i].name != b.items_[i].name || !(a.items_[i].value == b.items_[i].value))
                return false;
        return true;
    }

private:
    std::vector<NamedTensor> items_;
};

} // namespace srp::nn
