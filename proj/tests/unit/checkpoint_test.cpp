// Copyright 2026 The essayscore Authors.
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

#include <cstring>
#include <random>
#include <sstream>

#include "doctest.h"
#include "essayscore/checkpoint.hpp"
#include "essayscore/error.hpp"
#include "test_support.hpp"

using namespace essayscore;

namespace {

Checkpoint sample(PoolingMode mode) {
  const std::vector<EssayRecord> recs{{"1", "alpha beta, gamma \"delta\" beta", std::nullopt}};
  Vocabulary vocab = Vocabulary::build(recs);
  ModelSpec spec;
  spec.vocab_size = vocab.size();
  spec.d_model = 8;
  spec.n_heads = 2;
  spec.d_ff = 12;
  spec.n_layers = 2;
  spec.max_seq_len = 7;
  spec.pooling = mode;
  spec.dropout_p = 0.125;
  Model model = Model::init(spec, 31);
  // Awkward values must survive bit-exactly.
  auto first = model.parameters().front().tensor;
  first.mutable_data()[0] = 0.1 + 0.2;
  first.mutable_data()[1] = -0.0;
  first.mutable_data()[2] = 5e-324;
  return {model, vocab};
}

}  // namespace

TEST_SUITE("checkpoint") {
  TEST_CASE("round trip is bit-exact for every pooling mode") {
    for (const auto mode : {PoolingMode::six_metric_attention, PoolingMode::single_attention, PoolingMode::mean}) {
      const auto ck = sample(mode);
      std::stringstream buf;
      write_checkpoint(buf, ck.model, ck.vocab);
      const auto back = read_checkpoint(buf);
      CHECK(back.model.spec() == ck.model.spec());
      CHECK(back.vocab == ck.vocab);
      const auto a = ck.model.parameters();
      const auto b = back.model.parameters();
      REQUIRE(a.size() == b.size());
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].path == b[i].path);
        CHECK(a[i].tensor.shape() == b[i].tensor.shape());
        CHECK(std::memcmp(a[i].tensor.data().data(), b[i].tensor.data().data(), a[i].tensor.size() * 8) == 0);
      }
      const EncodedText text = ck.vocab.encode("beta gamma alpha", 7);
      CHECK(back.model.predict(text) == ck.model.predict(text));

      std::stringstream again;
      write_checkpoint(again, back.model, back.vocab);
      CHECK(again.str() == buf.str());
    }
  }

  TEST_CASE("header and head paths") {
    const auto ck = sample(PoolingMode::six_metric_attention);
    std::stringstream buf;
    write_checkpoint(buf, ck.model, ck.vocab);
    const auto text = buf.str();
    CHECK(text.rfind("essayscore-checkpoint 1\n", 0) == 0);
    CHECK(text.find("param head.cohesion.score.weight 2 8 1\n") != std::string::npos);
    CHECK(text.find("param head.conventions.out.bias 1 1\n") != std::string::npos);
    CHECK(text.find("model.pooling six_metric_attention\n") != std::string::npos);
  }

  TEST_CASE("corrupt input is rejected") {
    const auto ck = sample(PoolingMode::single_attention);
    std::stringstream buf;
    write_checkpoint(buf, ck.model, ck.vocab);
    const auto good = buf.str();

    std::istringstream magic("not-a-checkpoint 1\n");
    CHECK_THROWS_AS(read_checkpoint(magic), InputError);

    std::string version = good;
    version.replace(0, std::strlen("essayscore-checkpoint 1"), "essayscore-checkpoint 9");
    std::istringstream v(version);
    CHECK_THROWS_AS(read_checkpoint(v), InputError);

    std::istringstream truncated(good.substr(0, good.size() / 2));
    CHECK_THROWS_AS(read_checkpoint(truncated), InputError);

    std::string renamed = good;
    const auto pos = renamed.find("head.shared.score.weight");
    REQUIRE(pos != std::string::npos);
    renamed.replace(pos, std::strlen("head.shared"), "head.bogus!");
    std::istringstream r(renamed);
    CHECK_THROWS_AS(read_checkpoint(r), InputError);

    CHECK_THROWS_AS(load_checkpoint("/nonexistent/model.ckpt"), InputError);
  }

  TEST_CASE("file round trip") {
    const auto dir = essayscore::testing::scratch_dir("checkpoint");
    const auto ck = sample(PoolingMode::mean);
    save_checkpoint(dir / "m.ckpt", ck.model, ck.vocab);
    const auto back = load_checkpoint(dir / "m.ckpt");
    CHECK(parameter_values(back.model) == parameter_values(ck.model));
  }
}
