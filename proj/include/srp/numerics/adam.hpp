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

#include "tensor.hpp"

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace srp::nn
{

struct AdamConfig
{
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam. Moments are keyed by position in the ParamList.
class Adam
{
public:
    explicit Adam(AdamConfig cfg = {}) : cfg_(cfg) {}

    const AdamConfig &config() const noexcept { return cfg_; }
    std::uint64_t step_count() const noexcept { return step_; }
    const std::vector<Tensor> &first_moments() const noexcept { return m_; }
    const std::vector<Tensor> &second_moments() const noexcept { return v_; }

    // Descends along grads (minimization). Shapes must match entry by entry.
    void step(ParamList &params, const ParamList &grads)
    {
        if (params.size() != grads.size())
            throw std::invalid_argument("adam: " + std::to_string(params.size()) + " parameters but " +
                                        std::to_string(grads.size()) + " gradients");
        if (m_.empty())
            for (const auto &p : params)
            {
                m_.emplace_back(p.value.shape(), 0.0);
                v_.emplace_back(p.value.shape(), 0.0);
            }
        if (m_.size() != params.size())
            throw std::invalid_argument("adam: parameter count changed between steps");
        for (std::size_t k = 0; k < params.size(); ++k)
            if (params[k].value.shape() != grads[k].value.shape() || m_[k].shape() != params[k].value.shape())
                throw ShapeError("adam_step '" + params[k].name + "'", params[k].value.shape(),
                                 grads[k].value.shape());

        ++step_;
        const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
        const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
        for (std::size_t k = 0; k < params.size(); ++k)
        {
            auto &p = params[k].value;
            const auto &g = grads[k].value;
            auto &m = m_[k];
            auto &v = v_[k];
            for (std::size_t i = 0; i < p.size(); ++i)
            {
                m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * g[i];
                v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * g[i] * g[i];
                const double mhat = m[i] / bc1;
                const double vhat = v[i] / bc2;
                p[i] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
            }
        }
    }

private:
    AdamConfig cfg_;
    std::vector<Tensor> m_;
    std::vector<Tensor> v_;
    std::uint64_t step_ = 0;
};

} // namespace srp::nn
