// Copyright 2026 The mddetect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef MDDETECT_MDDETECT_HPP_
#define MDDETECT_MDDETECT_HPP_

#include "mddetect/audio.hpp"
#include "mddetect/augment.hpp"
#include "mddetect/dataset.hpp"
#include "mddetect/dsp.hpp"
#include "mddetect/error.hpp"
#include "mddetect/experiments.hpp"
#include "mddetect/fft.hpp"
#include "mddetect/metrics.hpp"
#include "mddetect/model.hpp"
#include "mddetect/rng.hpp"

#endif  // MDDETECT_MDDETECT_HPP_
