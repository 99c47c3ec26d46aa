// Copyright 2026 The soapsim Authors
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

#include "soapsim/core_model.h"

#include <gtest/gtest.h>

#include <random>
#include <string>
#include <vector>

#include "soapsim/error.h"
#include "soapsim/serialization.h"
#include "test_util.h"

namespace soapsim {
namespace {

using testing::matmul;
using testing::mesh;
using testing::sc;
using testing::shape;

bool has_violation(const ValidationReport& r, const std::string& message) {
  for (const Violation& v : r.violations) {
    if (v.message.find(message) != std::string::npos) return true;
  }
  return false;
}

TEST(ValidateGraphTest, MatMulThenElementWiseIsValid) {
  GraphBuilder b;
  b.add(matmul("fc", 64, 1024, 512));
  b.add(testing::elementwise("relu", sc(64, 1024)));
  b.connect("fc", "relu");
  EXPECT_TRUE(validate_graph(b.build()).ok()) << validate_graph(b.build()).to_string();
}

TEST(ValidateGraphTest, DanglingEdge) {
  OperatorGraph g({matmul("a", 4, 4, 4)}, {{"a", "ghost", 0, sc(4, 4)}});
  ValidationReport r = validate_graph(g);
  EXPECT_TRUE(has_violation(r, "dangling edge")) << r.to_string();
}

TEST(ValidateGraphTest, TwoCycle) {
  OperatorGraph g({testing::elementwise("a", sc(4, 4)), testing::elementwise("b", sc(4, 4))},
                  {{"a", "b", 0, sc(4, 4)}, {"b", "a", 0, sc(4, 4)}});
  ValidationReport r = validate_graph(g);
  EXPECT_TRUE(has_violation(r, "cycle detected")) << r.to_string();
  EXPECT_FALSE(g.topological_order().has_value());
}

TEST(ValidateGraphTest, EdgeShapeMustMatchSource) {
  OperatorGraph g({matmul("a", 4, 4, 4), testing::elementwise("b", sc(4, 4))},
                  {{"a", "b", 0, sc(4, 8)}});
  EXPECT_FALSE(validate_graph(g).ok());
}

TEST(ValidateGraphTest, ShapeInvariants) {
  Operation no_sample{"x", OperatorKind::element_wise(), shape({{DimName::kChannel, 4}}), 0};
  EXPECT_FALSE(validate_graph(OperatorGraph({no_sample}, {})).ok());
  Operation dup{"x", OperatorKind::element_wise(),
                shape({{DimName::kSample, 4}, {DimName::kSample, 4}}), 0};
  EXPECT_FALSE(validate_graph(OperatorGraph({dup}, {})).ok());
  Operation zero{"x", OperatorKind::element_wise(), sc(4, 0), 0};
  EXPECT_FALSE(validate_graph(OperatorGraph({zero}, {})).ok());
  Operation bad_element{"x", OperatorKind::element_wise(), shape({{DimName::kSample, 4}}, 0), 0};
  EXPECT_FALSE(validate_graph(OperatorGraph({bad_element}, {})).ok());
  Operation negative{"x", OperatorKind::element_wise(), sc(4, 4), -1};
  EXPECT_FALSE(validate_graph(OperatorGraph({negative}, {})).ok());
}

TEST(ValidateGraphTest, WindowHyperparameters) {
  Operation conv{"c",
                 OperatorKind::conv1d({0, 1, Padding::kSame}, 4),
                 shape({{DimName::kSample, 2}, {DimName::kLength, 8}, {DimName::kChannel, 4}}),
                 0};
  EXPECT_FALSE(validate_graph(OperatorGraph({conv}, {})).ok());
  conv.kind = OperatorKind::conv1d({3, 0, Padding::kSame}, 4);
  EXPECT_FALSE(validate_graph(OperatorGraph({conv}, {})).ok());
  conv.kind = OperatorKind::conv1d({3, 1, Padding::kSame}, 4);
  EXPECT_TRUE(validate_graph(OperatorGraph({conv}, {})).ok());
}

TEST(ValidateGraphTest, ConvOutputMustMatchWindow) {
  const auto in = shape({{DimName::kSample, 2}, {DimName::kLength, 8}, {DimName::kChannel, 4}});
  GraphBuilder b;
  b.add({"src", OperatorKind::element_wise(), in, 0});
  b.add({"conv", OperatorKind::conv1d({3, 1, Padding::kValid}, 4),
         shape({{DimName::kSample, 2}, {DimName::kLength, 8}, {DimName::kChannel, 4}}), 0});
  b.connect("src", "conv");
  EXPECT_FALSE(validate_graph(b.build()).ok());
}

TEST(ValidateGraphTest, MatMulFanInMustMatch) {
  GraphBuilder b;
  b.add(matmul("a", 4, 8, 2));
  b.add(matmul("b", 4, 8, 3));
  b.connect("a", "b");
  EXPECT_FALSE(validate_graph(b.build()).ok());
}

TEST(ValidateGraphTest, DuplicateOpId) {
  OperatorGraph g({matmul("a", 4, 4, 4), matmul("a", 4, 4, 4)}, {});
  EXPECT_FALSE(validate_graph(g).ok());
}

TEST(ValidateTopologyTest, FullyConnectedIsValid) {
  EXPECT_TRUE(validate_topology(mesh(4, 1e9)).ok());
}

TEST(ValidateTopologyTest, DuplicateConnection) {
  DeviceTopology t({{"a", "gpu", "n"}, {"b", "gpu", "n"}},
                   {{"a", "b", 1e9, 0.0}, {"b", "a", 1e9, 0.0}});
  EXPECT_TRUE(has_violation(validate_topology(t), "duplicate connection"));
}

TEST(ValidateTopologyTest, ZeroBandwidth) {
  DeviceTopology t({{"a", "gpu", "n"}, {"b", "gpu", "n"}}, {{"a", "b", 0.0, 0.0}});
  EXPECT_FALSE(validate_topology(t).ok());
}

TEST(ValidateTopologyTest, OtherViolations) {
  EXPECT_FALSE(validate_topology(DeviceTopology({{"a", "gpu", "n"}}, {{"a", "a", 1.0, 0.0}})).ok());
  EXPECT_FALSE(validate_topology(DeviceTopology({{"a", "gpu", "n"}}, {{"a", "z", 1.0, 0.0}})).ok());
  EXPECT_FALSE(validate_topology(
                   DeviceTopology({{"a", "gpu", "n"}, {"b", "gpu", "n"}}, {{"a", "b", 1.0, -1.0}}))
                   .ok());
  EXPECT_FALSE(validate_topology(DeviceTopology({{"a", "gpu", "n"}, {"a", "gpu", "n"}}, {})).ok());
}

TEST(ParallelizableDimsTest, MatMul) {
  std::vector<ParallelDim> want = {{DimName::kSample, DimClass::kSample},
                                   {DimName::kChannel, DimClass::kParameter}};
  EXPECT_EQ(parallelizable_dims(matmul("m", 4, 4, 4)), want);
}

TEST(ParallelizableDimsTest, Conv1D) {
  Operation op{"c", OperatorKind::conv1d({3, 1, Padding::kSame}, 4),
               shape({{DimName::kSample, 2}, {DimName::kLength, 8}, {DimName::kChannel, 4}}), 0};
  std::vector<ParallelDim> want = {{DimName::kSample, DimClass::kSample},
                                   {DimName::kLength, DimClass::kAttribute},
                                   {DimName::kChannel, DimClass::kParameter}};
  EXPECT_EQ(parallelizable_dims(op), want);
}

TEST(ParallelizableDimsTest, ElementWise) {
  std::vector<ParallelDim> want = {{DimName::kSample, DimClass::kSample},
                                   {DimName::kChannel, DimClass::kAttribute}};
  EXPECT_EQ(parallelizable_dims(testing::elementwise("e", sc(4, 4))), want);
}

TEST(ParallelizableDimsTest, Embedding) {
  Operation op{"e", OperatorKind::embedding(100), sc(4, 8), 3200};
  std::vector<ParallelDim> want = {{DimName::kSample, DimClass::kSample},
                                   {DimName::kChannel, DimClass::kParameter}};
  EXPECT_EQ(parallelizable_dims(op), want);
}

TEST(ParallelizableDimsTest, UnknownKind) {
  Operation op = matmul("m", 4, 4, 4);
  op.kind.tag = static_cast<OpTag>(99);
  EXPECT_THROW(parallelizable_dims(op), InputError);
}

// One sample-class entry for every op; pools never split parameters; conv
// and matmul split parameters along channel.
TEST(ParallelizableDimsProperty, ClassesOverRandomGraphs) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    OperatorGraph g = testing::random_graph(rng);
    for (const Operation& op : g.ops()) {
      const auto dims = parallelizable_dims(op);
      int samples = 0;
      for (const ParallelDim& d : dims) {
        if (d.dim_class == DimClass::kSample) {
          ++samples;
          EXPECT_EQ(d.name, DimName::kSample);
        }
        if (d.dim_class == DimClass::kParameter) {
          EXPECT_EQ(d.name, DimName::kChannel);
        }
        const bool pool = op.kind.tag == OpTag::kPool1D || op.kind.tag == OpTag::kPool2D;
        if (pool) {
          EXPECT_NE(d.dim_class, DimClass::kParameter);
        }
        const bool weighted = op.kind.tag == OpTag::kConv1D || op.kind.tag == OpTag::kConv2D ||
                              op.kind.tag == OpTag::kMatMul;
        if (weighted && d.name == DimName::kChannel) {
          EXPECT_EQ(d.dim_class, DimClass::kParameter);
        }
      }
      EXPECT_EQ(samples, 1) << op.id;
    }
  }
}

TEST(ValidateGraphProperty, RandomGraphsAreValidAndSurviveRoundTrip) {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 300; ++trial) {
    OperatorGraph g = testing::random_graph(rng);
    ASSERT_TRUE(validate_graph(g).ok()) << validate_graph(g).to_string();
    OperatorGraph back = parse_graph(write_graph(g));
    EXPECT_EQ(back, g);
    EXPECT_TRUE(validate_graph(back).ok());
  }
}

// Corrupting a random graph is detected both before and after a round trip.
TEST(ValidateGraphProperty, RoundTripPreservesVerdict) {
  std::mt19937_64 rng(12);
  for (int trial = 0; trial < 200; ++trial) {
    OperatorGraph g = testing::random_graph(rng, {.min_ops = 3});
    std::vector<Operation> ops = g.ops();
    std::vector<TensorEdge> tensors = g.tensors();
    const auto which = std::uniform_int_distribution<std::size_t>(0, ops.size() - 1)(rng);
    ops[which].output_shape.dims.front().size += 1;
    OperatorGraph broken(ops, tensors);
    const bool ok = validate_graph(broken).ok();
    EXPECT_EQ(validate_graph(parse_graph(write_graph(broken))).ok(), ok);
  }
}

TEST(TopologicalOrderTest, TiesBrokenByIndex) {
  GraphBuilder b;
  b.add(matmul("z", 2, 2, 2));
  b.add(matmul("a", 2, 2, 2));
  b.add(matmul("m", 2, 2, 4));
  b.connect("z", "m").connect("a", "m");
  OperatorGraph g = b.build();
  ASSERT_TRUE(g.topological_order().has_value());
  EXPECT_EQ(*g.topological_order(), (std::vector<std::size_t>{0, 1, 2}));
}

}  // namespace
}  // namespace soapsim
