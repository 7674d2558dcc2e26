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

#include <gtest/gtest.h>

#include "support/gradcheck_cases.hpp"

namespace {

class GradCheck : public ::testing::TestWithParam<gradcases::Case> {};

TEST_P(GradCheck, TwentyRandomInstances) {
  const auto& c = GetParam();
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto r = c.run(seed);
    EXPECT_GT(r.checked, 0u);
    EXPECT_LT(r.max_relative_error, 1e-4) << c.name << " seed " << seed << " worst " << r.worst;
  }
}

INSTANTIATE_TEST_SUITE_P(Layers, GradCheck, ::testing::ValuesIn(gradcases::all_cases()),
                         [](const auto& info) { return std::string(info.param.name); });

TEST(GradCheckTool, FlagsAWrongGradient) {
  std::vector<double> x{1.0, 2.0};
  const std::vector<double> wrong{2.0, 5.0};  // true gradient of x0^2 + x1^2 is (2, 4)
  const std::vector<angernet::GradProbe> probes{{"x", x, wrong}};
  const auto r = angernet::grad_check([&] { return x[0] * x[0] + x[1] * x[1]; }, probes);
  EXPECT_GT(r.max_relative_error, 0.1);
  EXPECT_EQ(r.worst, "x[1]");
}

}  // namespace
