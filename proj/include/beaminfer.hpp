// SPDX-License-Identifier: Apache-2.0
//
// beaminfer - beam inference from partial L1-RSRP measurements
// Copyright (C) 2026 The beaminfer authors
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

#ifndef BEAMINFER_HPP
#define BEAMINFER_HPP

#include "beaminfer/common.hpp"
#include "beaminfer/scenario.hpp"
#include "beaminfer/dataio.hpp"
#include "beaminfer/forest.hpp"
#include "beaminfer/rf_impute.hpp"
#include "beaminfer/missforest.hpp"
#include "beaminfer/neuralnet.hpp"
#include "beaminfer/cgan.hpp"
#include "beaminfer/pipeline.hpp"
#include "beaminfer/evaluation.hpp"
#include "beaminfer/experiment.hpp"

#endif
