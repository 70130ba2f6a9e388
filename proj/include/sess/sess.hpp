// Copyright 2026 The SESS Authors.
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

// Umbrella header. The scorer client pulls in cpp-httplib and is included
// separately through "sess/scorer_client.hpp".

#include "sess/confidence.hpp"
#include "sess/corpus.hpp"
#include "sess/error.hpp"
#include "sess/objectives.hpp"
#include "sess/oracle.hpp"
#include "sess/selection.hpp"
#include "sess/similarity.hpp"
#include "sess/simharness.hpp"
