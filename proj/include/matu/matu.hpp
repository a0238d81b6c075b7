// Copyright 2026 The matu-sim Authors. All Rights Reserved.
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
// =============================================================================

#pragma once

#include "matu/codec.hpp"
#include "matu/config.hpp"
#include "matu/federation.hpp"
#include "matu/local_training.hpp"
#include "matu/random.hpp"
#include "matu/report.hpp"
#include "matu/server.hpp"
#include "matu/task_suite.hpp"
#include "matu/task_vector.hpp"
#include "matu/unification.hpp"
