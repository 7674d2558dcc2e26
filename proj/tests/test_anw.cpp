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

#include <cstring>

#include <gtest/gtest.h>

#include "angernet/checkpoint.hpp"
#include "support/oracles.hpp"

namespace angernet {
namespace {

WeightStore tiny_store() {
  WeightStore s;
  s.add({"a", {2, 3}, {1, 2, 3, 4, 5, 6}});
  s.add({"b.bias", {1}, {-0.5f}});
  return s;
}

TEST(Anw, ByteLayout) {
  const auto bytes = encode_anw(tiny_store());
  ASSERT_GE(bytes.size(), 12u);
  EXPECT_EQ(std::memcmp(bytes.data(), "ANW1", 4), 0);
  std::uint32_t version, count;
  std::memcpy(&version, bytes.data() + 4, 4);
  std::memcpy(&count, bytes.data() + 8, 4);
  EXPECT_EQ(version, 1u);
  EXPECT_EQ(count, 2u);
  // 12 header + (2 + 1 + 1 + 8 + 24) + (2 + 6 + 1 + 4 + 4)
  EXPECT_EQ(bytes.size(), 12u + 36u + 17u);
  std::uint16_t name_len;
  std::memcpy(&name_len, bytes.data() + 12, 2);
  EXPECT_EQ(name_len, 1u);
  EXPECT_EQ(bytes[14], 'a');
  EXPECT_EQ(bytes[15], 2u);  // rank
}

TEST(Anw, RoundTripWithAndWithoutMetadata) {
  const auto store = tiny_store();
  const auto plain = decode_anw(encode_anw(store));
  EXPECT_FALSE(plain.metadata);
  ASSERT_EQ(plain.store.size(), 2u);
  EXPECT_EQ(plain.store.find("a")->data, store.find("a")->data);
  EXPECT_EQ(plain.store.find("a")->dims, (std::vector<std::uint32_t>{2, 3}));

  const nlohmann::json meta{{"note", "x"}, {"n", 3}};
  const auto bytes = encode_anw(store, std::optional<nlohmann::json>(std::in_place, meta));
  const auto withmeta = decode_anw(bytes);
  ASSERT_TRUE(withmeta.metadata);
  EXPECT_EQ(*withmeta.metadata, meta);
  EXPECT_EQ(encode_anw(withmeta.store, withmeta.metadata), bytes);
}

TEST(Anw, TruncationIsFormatError) {
  const auto bytes = encode_anw(tiny_store(), nlohmann::json{{"k", 1}});
  for (std::size_t cut : {std::size_t{3}, std::size_t{10}, std::size_t{20}, bytes.size() - 1}) {
    std::vector<std::uint8_t> part(bytes.begin(), bytes.begin() + static_cast<std::ptrdiff_t>(cut));
    EXPECT_THROW(decode_anw(part), FormatError) << "cut at " << cut;
  }
}

TEST(Anw, BadMagicAndVersion) {
  auto bytes = encode_anw(tiny_store());
  bytes[0] = 'X';
  EXPECT_THROW(decode_anw(bytes), FormatError);
  bytes = encode_anw(tiny_store());
  bytes[4] = 2;
  EXPECT_THROW(decode_anw(bytes), FormatError);
}

TEST(Anw, StoreRejectsDuplicatesAndBadShapes) {
  WeightStore s;
  s.add({"x", {2}, {1, 2}});
  EXPECT_THROW(s.add({"x", {1}, {1}}), FormatError);
  EXPECT_THROW(s.add({"y", {3}, {1, 2}}), FormatError);
}

TEST(Anw, ModelWeightsUseOutInKernelDims) {
  Rng rng(0);
  const auto net = build_model(ModelConfig::standard(), rng);
  const auto store = save_weights(net);
  EXPECT_EQ(store.size(), 26u);
  EXPECT_EQ(store.find("layer1.conv.weight")->dims, (std::vector<std::uint32_t>{32, 1, 64}));
  EXPECT_EQ(store.find("layer5.conv.weight")->dims, (std::vector<std::uint32_t>{2, 16, 2}));
  EXPECT_EQ(store.find("layer5.bn.gamma"), nullptr);
}

TEST(Anw, SaveLoadSaveIsByteIdentical) {
  oracle::TempDir dir("anw");
  Rng rng(1);
  const auto net = build_model(ModelConfig::standard(), rng);
  const auto first = encode_anw(save_weights(net));
  write_file_bytes(dir.str("w.anw"), first);
  const auto loaded = net_from_store(read_anw_file(dir.str("w.anw")).store, ModelConfig::standard());
  EXPECT_EQ(encode_anw(save_weights(loaded)), first);
}

TEST(Checkpoint, RoundTripIsByteIdentical) {
  Rng rng(2);
  Checkpoint ckpt{build_model(ModelConfig::standard(256, 0.3), rng), Optimizer(AdamHyper{1e-3f}),
                  42, {{"best_val_auc", 0.75}}};
  ckpt.net.set_frozen(2);
  // populate optimizer moments with one fake update
  ckpt.net.for_each_parameter([](const std::string&, Tensor& t) {
    if (!t.has_grad()) return;
    for (auto& g : t.grad()) g = 0.01f;
  });
  ckpt.optimizer.step(ckpt.net);
  const auto bytes = encode_checkpoint(ckpt);
  const auto back = decode_checkpoint(bytes);
  EXPECT_EQ(back.step, 42u);
  EXPECT_EQ(back.net.config(), ckpt.net.config());
  EXPECT_EQ(back.net.freeze_mask(), ckpt.net.freeze_mask());
  EXPECT_EQ(back.optimizer.states().size(), ckpt.optimizer.states().size());
  EXPECT_EQ(back.extra.at("best_val_auc").get<double>(), 0.75);
  EXPECT_EQ(encode_checkpoint(back), bytes);
}

TEST(Checkpoint, PlainWeightFileLoadsAsStandardModel) {
  Rng rng(3);
  const auto net = build_model(ModelConfig::standard(), rng);
  const auto ckpt = decode_checkpoint(encode_anw(save_weights(net)));
  EXPECT_EQ(ckpt.net.parameter_count(), 215826u);
  EXPECT_EQ(ckpt.step, 0u);
}

TEST(Checkpoint, ForeignMetadataIsRejected) {
  const auto bytes = encode_anw(tiny_store(), nlohmann::json{{"format", "other"}});
  EXPECT_THROW(decode_checkpoint(bytes), FormatError);
}

TEST(Checkpoint, MissingFileIsIoError) {
  EXPECT_THROW(load_checkpoint("/nonexistent/dir/x.anw"), IoError);
}

}  // namespace
}  // namespace angernet
