// Copyright 2026 The kmotion Authors.
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#pragma once

// Umbrella header.

#include "kmotion/artifacts.hpp"
#include "kmotion/decomposition.hpp"
#include "kmotion/diff.hpp"
#include "kmotion/errors.hpp"
#include "kmotion/eval.hpp"
#include "kmotion/experiment.hpp"
#include "kmotion/fixtures.hpp"
#include "kmotion/geometry.hpp"
#include "kmotion/image.hpp"
#include "kmotion/io.hpp"
#include "kmotion/losses.hpp"
#include "kmotion/optim.hpp"
#include "kmotion/random.hpp"
#include "kmotion/selfcheck.hpp"
#include "kmotion/synth.hpp"
#include "kmotion/version.hpp"
#include "kmotion/warp.hpp"
