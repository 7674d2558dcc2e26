// Copyright 2026 The AngerNet Authors
// SPDX-License-Identifier: Apache-2.0
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

/*!
 * \file angernet.hpp
 * \brief Umbrella header.
 */

#pragma once

#include "angernet/error.hpp"
#include "angernet/tensor.hpp"
#include "angernet/nn.hpp"
#include "angernet/anw.hpp"
#include "angernet/model.hpp"
#include "angernet/checkpoint.hpp"
#include "angernet/audio.hpp"
#include "angernet/augment.hpp"
#include "angernet/data.hpp"
#include "angernet/eval.hpp"
#include "angernet/train.hpp"
#include "angernet/stream.hpp"
#include "angernet/runtime.hpp"
