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

#include <cmath>
#include <random>

#include "doctest.h"
#include "essayscore/error.hpp"
#include "essayscore/tensor.hpp"
#include "test_support.hpp"

using namespace essayscore;
using essayscore::testing::gradcheck;
using essayscore::testing::probe_loss;
using essayscore::testing::random_tensor;

namespace {

void check_values(const Tensor& t, const std::vector<double>& expected, double tol = 1e-12) {
  REQUIRE(t.size() == expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) CHECK(t.at(i) == doctest::Approx(expected[i]).epsilon(tol));
}

}  // namespace

TEST_SUITE("tensor-core") {
  TEST_CASE("matmul identity and hand product") {
    const auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
    const auto b = Tensor::from({2, 2}, {3, 4, 5, 6});
    const auto c = matmul(eye, b);
    CHECK(c.shape() == Shape{2, 2});
    CHECK(std::vector<double>(c.data().begin(), c.data().end()) == std::vector<double>{3, 4, 5, 6});

    const auto row = Tensor::from({1, 2}, {1, 2});
    const auto col = Tensor::from({2, 1}, {3, 4});
    CHECK(matmul(row, col).item() == 11.0);
  }

  TEST_CASE("matmul gradient of sum(a.b) w.r.t. a") {
    auto a = Tensor::from({1, 2}, {1, 2}, true);
    const auto b = Tensor::from({2, 1}, {3, 4});
    backward(sum(matmul(a, b)));
    check_values(Tensor::from({1, 2}, {a.grad()[0], a.grad()[1]}), {3, 4});

    // Central difference with step 1e-6 agrees.
    const double h = 1e-6;
    for (std::size_t i = 0; i < 2; ++i) {
      auto ap = Tensor::from({1, 2}, {1, 2});
      auto am = Tensor::from({1, 2}, {1, 2});
      ap.mutable_data()[i] += h;
      am.mutable_data()[i] -= h;
      const double fd = (sum(matmul(ap, b)).item() - sum(matmul(am, b)).item()) / (2 * h);
      CHECK(fd == doctest::Approx(a.grad()[i]).epsilon(1e-8));
    }
  }

  TEST_CASE("matmul shape mismatch names both shapes") {
    const auto a = Tensor::zeros({2, 3});
    const auto b = Tensor::zeros({2, 3});
    try {
      (void)matmul(a, b);
      FAIL("expected DimensionError");
    } catch (const DimensionError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2x3]") != std::string::npos);
    }
  }

  TEST_CASE("softmax examples") {
    check_values(softmax(Tensor::from({3}, {0, 0, 0}), 0), {1.0 / 3, 1.0 / 3, 1.0 / 3});
    const auto big = softmax(Tensor::from({2}, {1000, 0}), 0);
    CHECK(std::abs(big.at(0) - 1.0) <= 1e-12);
    CHECK(std::abs(big.at(1)) <= 1e-12);
    check_values(softmax(Tensor::from({3}, {std::log(1.0), std::log(2.0), std::log(3.0)}), 0),
                 {1.0 / 6, 2.0 / 6, 3.0 / 6});
    CHECK_THROWS_AS(softmax(Tensor::from({2}, {NAN, 0}), 0), NumericDomainError);
  }

  TEST_CASE("softmax rows sum to one and stay positive") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
      const auto x = random_tensor({4, 7}, rng, false, 5.0);
      for (std::size_t axis = 0; axis < 2; ++axis) {
        const auto y = softmax(x, axis);
        const std::size_t rows = axis == 1 ? 4 : 7;
        for (std::size_t r = 0; r < rows; ++r) {
          double total = 0.0;
          for (std::size_t c = 0; c < (axis == 1 ? 7u : 4u); ++c) {
            const double v = axis == 1 ? y.at(r * 7 + c) : y.at(c * 7 + r);
            CHECK(v > 0.0);
            total += v;
          }
          CHECK(std::abs(total - 1.0) <= 1e-9);
        }
      }
    }
  }

  TEST_CASE("backward examples") {
    auto w = Tensor::from({2}, {2, 3}, true);
    backward(sum(w));
    CHECK(w.grad()[0] == 1.0);
    CHECK(w.grad()[1] == 1.0);

    auto v = Tensor::from({2}, {2, 3}, true);
    backward(sum(v * v));
    CHECK(v.grad()[0] == 4.0);
    CHECK(v.grad()[1] == 6.0);

    // Repeated calls accumulate on leaves.
    backward(sum(v * v));
    CHECK(v.grad()[0] == 8.0);
    v.zero_grad();
    CHECK(v.grad()[0] == 0.0);

    CHECK_THROWS_AS(backward(v * v), ContractError);
  }

  TEST_CASE("tensors without requires_grad never get gradients") {
    auto w = Tensor::from({2}, {1, 2}, true);
    const auto c = Tensor::from({2}, {3, 4});
    backward(sum(w * c));
    CHECK_FALSE(c.has_grad());
    CHECK(w.has_grad());
  }

  TEST_CASE("no-grad guard records nothing") {
    auto w = Tensor::from({2}, {1, 2}, true);
    const NoGradGuard guard;
    const auto y = sum(w * w);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.is_leaf());
  }

  TEST_CASE("finite-difference check of every op") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
      const auto cases = essayscore::testing::differentiable_op_cases(rng);
      for (const auto& cs : cases) {
        const auto r = gradcheck(cs.loss, cs.inputs);
        INFO(cs.name, " trial ", trial, " worst ", r.worst);
        CHECK(r.max_rel_error < 1e-4);
      }
    }
  }

  TEST_CASE("elementwise shape mismatch") {
    CHECK_THROWS_AS(add(Tensor::zeros({2}), Tensor::zeros({3})), DimensionError);
    CHECK_THROWS_AS(reshape(Tensor::zeros({2, 3}), {4}), DimensionError);
  }

  TEST_CASE("embedding scatter-adds repeated ids") {
    auto table = Tensor::from({3, 2}, {1, 2, 3, 4, 5, 6}, true);
    const std::vector<std::int32_t> ids{2, 0, 2};
    backward(sum(embedding(table, ids)));
    CHECK(std::vector<double>(table.grad().begin(), table.grad().end()) == std::vector<double>{1, 1, 0, 0, 2, 2});
  }

  TEST_CASE("dropout is deterministic per seed and identity when off") {
    std::mt19937_64 rng(3);
    const auto x = random_tensor({8, 8}, rng, false);
    DropoutStream s1(99, 0.5);
    DropoutStream s2(99, 0.5);
    const auto y1 = dropout(x, &s1);
    const auto y2 = dropout(x, &s2);
    CHECK(std::equal(y1.data().begin(), y1.data().end(), y2.data().begin()));
    // The counter advances, so the next call draws a different mask.
    const auto y3 = dropout(x, &s1);
    CHECK_FALSE(std::equal(y1.data().begin(), y1.data().end(), y3.data().begin()));
    const auto same = dropout(x, nullptr);
    CHECK(std::equal(same.data().begin(), same.data().end(), x.data().begin()));
  }

  TEST_CASE("identical inputs give bitwise identical buffers") {
    const auto run = [] {
      std::mt19937_64 rng(5);
      auto a = random_tensor({6, 5}, rng);
      auto b = random_tensor({5, 4}, rng);
      const auto y = layer_norm(gelu(matmul(a, b)), Tensor::full({4}, 1.0), Tensor::zeros({4}));
      backward(sum(softmax(y, 1) * y));
      std::vector<double> out(y.data().begin(), y.data().end());
      out.insert(out.end(), a.grad().begin(), a.grad().end());
      return out;
    };
    CHECK(run() == run());
  }
}
