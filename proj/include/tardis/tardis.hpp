// Copyright 2026 The Tardis Authors
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

#pragma once

#include "tardis/baselines.hpp"
#include "tardis/bench.hpp"
#include "tardis/classifier.hpp"
#include "tardis/clustering.hpp"
#include "tardis/data_model.hpp"
#include "tardis/errors.hpp"
#include "tardis/geojson.hpp"
#include "tardis/io.hpp"
#include "tardis/metrics.hpp"
#include "tardis/pipeline.hpp"
#include "tardis/pooling.hpp"
#include "tardis/synth.hpp"
