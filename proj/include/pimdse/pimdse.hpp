// Copyright 2026 The pimdse Authors.
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

// Umbrella header.

#pragma once

#include "pimdse/arch.hpp"
#include "pimdse/costmodel.hpp"
#include "pimdse/error.hpp"
#include "pimdse/layout.hpp"
#include "pimdse/mapper.hpp"
#include "pimdse/nn.hpp"
#include "pimdse/noc.hpp"
#include "pimdse/partition.hpp"
#include "pimdse/report.hpp"
#include "pimdse/scheduler.hpp"
#include "pimdse/tuner.hpp"
#include "pimdse/workload.hpp"
