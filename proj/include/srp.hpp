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

#include "srp/channel.hpp"
#include "srp/codebook.hpp"
#include "srp/codebook_io.hpp"
#include "srp/dsp.hpp"
#include "srp/errors.hpp"
#include "srp/harness/dataset.hpp"
#include "srp/harness/experiment.hpp"
#include "srp/harness/metrics.hpp"
#include "srp/harness/pipeline.hpp"
#include "srp/numerics/adam.hpp"
#include "srp/numerics/autodiff.hpp"
#include "srp/numerics/checkpoint.hpp"
#include "srp/numerics/gradcheck.hpp"
#include "srp/numerics/tensor.hpp"
#include "srp/srpnet.hpp"
#include "srp/switching.hpp"
#include "srp/upsample.hpp"
