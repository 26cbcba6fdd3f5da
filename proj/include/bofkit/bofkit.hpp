// Copyright 2026 The bofkit Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include "bofkit/augment.hpp"
#include "bofkit/decode.hpp"
#include "bofkit/evalap.hpp"
#include "bofkit/evolve.hpp"
#include "bofkit/featuremap.hpp"
#include "bofkit/geometry.hpp"
#include "bofkit/image.hpp"
#include "bofkit/ingest.hpp"
#include "bofkit/losses.hpp"
#include "bofkit/nms.hpp"
#include "bofkit/random.hpp"
#include "bofkit/trainsched.hpp"
