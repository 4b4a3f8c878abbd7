// Copyright 2026 The CV-MIML Authors. All Rights Reserved.
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

// Convenience header for the library (everything but the CLI).

#pragma once

#include "cvmiml/align.hpp"
#include "cvmiml/core.hpp"
#include "cvmiml/dataset_io.hpp"
#include "cvmiml/eval.hpp"
#include "cvmiml/miml.hpp"
#include "cvmiml/model.hpp"
#include "cvmiml/train.hpp"
#include "cvmiml/weakdata.hpp"
