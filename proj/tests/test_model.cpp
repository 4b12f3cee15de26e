// Copyright 2026 The mddetect Authors
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

#include "mddetect/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <vector>

#include "mddetect/rng.hpp"
#include "oracles.hpp"

namespace {

namespace fs = std::filesystem;
using mdd::Rng;
using mdd::dsp::Label;
using namespace mdd::model;

std::vector<float> random_gray(int h, int w, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<float> g(static_cast<std::size_t>(h) * w);
  for (auto& v : g) v = static_cast<float>(rng.uniform01());
  return g;
}

TEST(InitModel, DeterministicAndZeroBiases) {
  const auto a = init_model<float>(42);
  const auto b = init_model<float>(42);
  std::vector<const std::vector<float>*> av, bv;
  for_each_array(a, [&av](const char*, const std::vector<float>& v) {
    av.push_back(&v);
  });
  for_each_array(b, [&bv](const char*, const std::vector<float>& v) {
    bv.push_back(&v);
  });
  ASSERT_EQ(av.size(), bv.size());
  for (std::size_t k = 0; k < av.size(); ++k) EXPECT_EQ(*av[k], *bv[k]);

  for (float v : a.stem.b) EXPECT_EQ(v, 0.0f);
  for (float v : a.block1.conv1.b) EXPECT_EQ(v, 0.0f);
  for (float v : a.block2.proj.b) EXPECT_EQ(v, 0.0f);
  for (float v : a.head.b) EXPECT_EQ(v, 0.0f);

  const auto c = init_model<float>(43);
  EXPECT_NE(a.stem.w, c.stem.w);
}

TEST(InitModel, HeStdOnStemWeights) {
  const auto p = init_model<double>(7);
  ASSERT_EQ(p.stem.w.size(), 432u);  // >= 400 draws
  double sum = 0, sum_sq = 0;
  for (double v : p.stem.w) {
    sum += v;
    sum_sq += v * v;
  }
  const double n = static_cast<double>(p.stem.w.size());
  const double std_dev = std::sqrt(sum_sq / n - (sum / n) * (sum / n));
  const double expected = std::sqrt(2.0 / 27.0);  // fan_in = 3*3*3
  EXPECT_NEAR(std_dev, expected, 0.15 * expected);
}

TEST(ModelParams, ParameterCountIsDocumented) {
  EXPECT_EQ(param_count(make_model<float>()), kParamCount);
  EXPECT_EQ(kParamCount, 72546u);
}

TEST(Forward, LogitsShapeAndFiniteness) {
  const auto p = init_model<float>(1);
  Workspace<float> ws;
  for (int i = 0; i < 3; ++i) {  // batch of 3 -> 3 x 2 logits
    const auto gray = random_gray(224, 224, 100 + i);
    const auto logits = forward(p, gray, 224, 224, ws);
    EXPECT_TRUE(std::isfinite(logits[0]));
    EXPECT_TRUE(std::isfinite(logits[1]));
  }
}

TEST(Forward, AllZeroImageZeroBiasGivesZeroLogits) {
  const auto p = init_model<float>(2);  // biases are zero at init
  Workspace<float> ws;
  ws.input.resize(3, 32, 32);  // all-zero input tensor
  const auto logits = forward(p, ws);
  EXPECT_EQ(logits[0], 0.0f);
  EXPECT_EQ(logits[1], 0.0f);
}

TEST(Forward, PositivelyHomogeneousOfDegreeOne) {
  // conv -> ReLU -> pool -> affine with zero biases scales linearly
  const auto p = init_model<double>(3);
  Workspace<double> ws;
  ws.input.resize(3, 24, 24);
  Rng rng(8);
  for (auto& v : ws.input.v) v = rng.uniform(-1.0, 1.0);
  const auto base = forward(p, ws);

  Workspace<double> ws2;
  ws2.input.resize(3, 24, 24);
  for (std::size_t i = 0; i < ws.input.v.size(); ++i) {
    ws2.input.v[i] = 2.0 * ws.input.v[i];
  }
  const auto doubled = forward(p, ws2);
  EXPECT_NEAR(doubled[0], 2.0 * base[0], 1e-9);
  EXPECT_NEAR(doubled[1], 2.0 * base[1], 1e-9);
}

TEST(Forward, AcceptsSmallInputs) {
  const auto p = init_model<float>(4);
  Workspace<float> ws;
  const auto logits = forward(p, random_gray(16, 16, 5), 16, 16, ws);
  EXPECT_TRUE(std::isfinite(logits[0] + logits[1]));
}

TEST(Forward, RejectsWrongChannelCount) {
  const auto p = init_model<float>(4);
  Workspace<float> ws;
  ws.input.resize(1, 16, 16);
  EXPECT_THROW(forward(p, ws), mdd::Error);
}

TEST(CrossEntropy, UniformLogitsGiveLogTwo) {
  const std::array<double, 2> logits{0.0, 0.0};
  EXPECT_NEAR(cross_entropy_single(logits, Label::kDeepfake), std::log(2.0),
              1e-12);
  EXPECT_NEAR(cross_entropy_single(logits, Label::kHuman), std::log(2.0),
              1e-12);
}

TEST(CrossEntropy, SaturatedLogitsStayFinite) {
  const std::array<double, 2> logits{100.0, 0.0};
  const double loss = cross_entropy_single(logits, Label::kDeepfake);
  EXPECT_TRUE(std::isfinite(loss));
  EXPECT_NEAR(loss, 0.0, 1e-12);
  // the wrong label costs ~100 but never overflows
  const double wrong = cross_entropy_single(logits, Label::kHuman);
  EXPECT_TRUE(std::isfinite(wrong));
  EXPECT_NEAR(wrong, 100.0, 1e-9);
}

TEST(CrossEntropy, ClosedFormExample) {
  // logits [1, 2], label human -> log(1 + e^-1)
  const std::array<double, 2> logits{1.0, 2.0};
  EXPECT_NEAR(cross_entropy_single(logits, Label::kHuman),
              std::log(1.0 + std::exp(-1.0)), 1e-12);
}

TEST(CrossEntropy, ShiftInvariance) {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const std::array<double, 2> logits{rng.uniform(-5, 5), rng.uniform(-5, 5)};
    const double c = rng.uniform(-50, 50);
    const std::array<double, 2> shifted{logits[0] + c, logits[1] + c};
    for (const Label label : {Label::kDeepfake, Label::kHuman}) {
      EXPECT_NEAR(cross_entropy_single(logits, label),
                  cross_entropy_single(shifted, label), 1e-9);
      EXPECT_EQ(predict_from_logits(logits).label,
                predict_from_logits(shifted).label);
    }
  }
}

TEST(CrossEntropy, BatchMeanAndMismatch) {
  std::vector<std::array<double, 2>> logits{{0.0, 0.0}, {1.0, 2.0}};
  std::vector<Label> labels{Label::kDeepfake, Label::kHuman};
  const double expected =
      0.5 * (std::log(2.0) + std::log(1.0 + std::exp(-1.0)));
  EXPECT_NEAR(cross_entropy(logits, labels), expected, 1e-12);
  labels.pop_back();
  EXPECT_THROW(cross_entropy(logits, labels), mdd::Error);
}

// Loss over a tiny batch as a plain function of the parameters, for finite
// differences.
double batch_loss(const ModelParams<double>& p,
                  const std::vector<std::vector<float>>& grays, int hw,
                  const std::vector<Label>& labels) {
  Workspace<double> ws;
  double acc = 0.0;
  for (std::size_t i = 0; i < grays.size(); ++i) {
    const auto logits = forward(p, grays[i], hw, hw, ws);
    acc += cross_entropy_single(logits, labels[i]);
  }
  return acc / static_cast<double>(grays.size());
}

TEST(Backward, MatchesFiniteDifferencesOnSampledParams) {
  const int hw = 16;
  auto p = init_model<double>(21);
  const std::vector<std::vector<float>> grays{random_gray(hw, hw, 31),
                                              random_gray(hw, hw, 32)};
  const std::vector<Label> labels{Label::kHuman, Label::kDeepfake};

  // analytic mean gradient
  auto grad = make_model<double>();
  {
    auto sample_grad = make_model<double>();
    Workspace<double> ws;
    for (std::size_t i = 0; i < grays.size(); ++i) {
      const auto logits = forward(p, grays[i], hw, hw, ws);
      std::array<double, 2> dlogits;
      cross_entropy_single(logits, labels[i], &dlogits);
      backward(p, ws, dlogits, sample_grad);
      std::vector<std::vector<double>*> dst;
      std::vector<const std::vector<double>*> src;
      for_each_array(grad, [&dst](const char*, std::vector<double>& a) {
        dst.push_back(&a);
      });
      for_each_array(sample_grad,
                     [&src](const char*, const std::vector<double>& a) {
                       src.push_back(&a);
                     });
      for (std::size_t k = 0; k < dst.size(); ++k) {
        for (std::size_t j = 0; j < dst[k]->size(); ++j) {
          (*dst[k])[j] += (*src[k])[j] / static_cast<double>(grays.size());
        }
      }
    }
  }

  // sampled finite differences: a few entries of every array
  const double h = 1e-3;
  std::vector<std::vector<double>*> arrays;
  std::vector<const std::vector<double>*> grads;
  for_each_array(p, [&arrays](const char*, std::vector<double>& a) {
    arrays.push_back(&a);
  });
  for_each_array(grad, [&grads](const char*, const std::vector<double>& a) {
    grads.push_back(&a);
  });
  Rng rng(77);
  double max_rel = 0.0;
  for (std::size_t k = 0; k < arrays.size(); ++k) {
    std::vector<double>& arr = *arrays[k];
    for (int probe = 0; probe < 12; ++probe) {
      const std::size_t j = rng.below(arr.size());
      const double saved = arr[j];
      arr[j] = saved + h;
      const double up = batch_loss(p, grays, hw, labels);
      arr[j] = saved - h;
      const double down = batch_loss(p, grays, hw, labels);
      arr[j] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double analytic = (*grads[k])[j];
      const double rel = std::abs(analytic - fd) /
                         std::max({std::abs(analytic), std::abs(fd), 1e-4});
      max_rel = std::max(max_rel, rel);
    }
  }
  EXPECT_LT(max_rel, 1e-4);
}

TEST(Backward, ZeroInputLeavesOnlyHeadBiasGradient) {
  const auto p = init_model<double>(5);  // biases zero
  Workspace<double> ws;
  ws.input.resize(3, 16, 16);  // all zeros
  const auto logits = forward(p, ws);
  ASSERT_EQ(logits[0], 0.0);
  ASSERT_EQ(logits[1], 0.0);
  std::array<double, 2> dlogits;
  cross_entropy_single(logits, Label::kHuman, &dlogits);
  auto grad = make_model<double>();
  backward(p, ws, dlogits, grad);

  EXPECT_NEAR(grad.head.b[0], 0.5, 1e-12);
  EXPECT_NEAR(grad.head.b[1], -0.5, 1e-12);
  for_each_array(grad, [](const char* name, const std::vector<double>& v) {
    if (std::string(name) == "head.b") return;
    for (double g : v) EXPECT_EQ(g, 0.0) << name;
  });
}

ModelParams<double> mean_batch_gradient(const ModelParams<double>& p,
                                        const std::vector<std::vector<float>>& grays,
                                        int hw, const std::vector<Label>& labels) {
  auto grad = make_model<double>();
  auto sample = make_model<double>();
  Workspace<double> ws;
  for (std::size_t i = 0; i < grays.size(); ++i) {
    const auto logits = forward(p, grays[i], hw, hw, ws);
    std::array<double, 2> dlogits;
    cross_entropy_single(logits, labels[i], &dlogits);
    backward(p, ws, dlogits, sample);
    std::vector<std::vector<double>*> dst;
    std::vector<const std::vector<double>*> src;
    for_each_array(grad, [&dst](const char*, std::vector<double>& a) {
      dst.push_back(&a);
    });
    for_each_array(sample, [&src](const char*, const std::vector<double>& a) {
      src.push_back(&a);
    });
    for (std::size_t k = 0; k < dst.size(); ++k) {
      for (std::size_t j = 0; j < dst[k]->size(); ++j) {
        (*dst[k])[j] += (*src[k])[j] / static_cast<double>(grays.size());
      }
    }
  }
  return grad;
}

double max_grad_difference(const ModelParams<double>& a,
                           const ModelParams<double>& b) {
  std::vector<const std::vector<double>*> av, bv;
  for_each_array(a, [&av](const char*, const std::vector<double>& v) {
    av.push_back(&v);
  });
  for_each_array(b, [&bv](const char*, const std::vector<double>& v) {
    bv.push_back(&v);
  });
  double m = 0.0;
  for (std::size_t k = 0; k < av.size(); ++k) {
    for (std::size_t j = 0; j < av[k]->size(); ++j) {
      m = std::max(m, std::abs((*av[k])[j] - (*bv[k])[j]));
    }
  }
  return m;
}

TEST(Backward, BatchDuplicationKeepsMeanGradient) {
  const int hw = 16;
  const auto p = init_model<double>(6);
  const std::vector<std::vector<float>> batch{random_gray(hw, hw, 1),
                                              random_gray(hw, hw, 2)};
  const std::vector<Label> labels{Label::kHuman, Label::kDeepfake};
  std::vector<std::vector<float>> doubled{batch[0], batch[1], batch[0],
                                          batch[1]};
  const std::vector<Label> doubled_labels{Label::kHuman, Label::kDeepfake,
                                          Label::kHuman, Label::kDeepfake};
  const auto g1 = mean_batch_gradient(p, batch, hw, labels);
  const auto g2 = mean_batch_gradient(p, doubled, hw, doubled_labels);
  EXPECT_LT(max_grad_difference(g1, g2), 1e-12);
}

TEST(Backward, PermutationInvariance) {
  const int hw = 16;
  const auto p = init_model<double>(9);
  const std::vector<std::vector<float>> batch{
      random_gray(hw, hw, 11), random_gray(hw, hw, 12), random_gray(hw, hw, 13)};
  const std::vector<Label> labels{Label::kHuman, Label::kDeepfake,
                                  Label::kHuman};
  const std::vector<std::vector<float>> shuffled{batch[2], batch[0], batch[1]};
  const std::vector<Label> shuffled_labels{Label::kHuman, Label::kHuman,
                                           Label::kDeepfake};
  const auto g1 = mean_batch_gradient(p, batch, hw, labels);
  const auto g2 = mean_batch_gradient(p, shuffled, hw, shuffled_labels);
  EXPECT_LT(max_grad_difference(g1, g2), 1e-9);

  Workspace<double> ws;
  double l1 = 0, l2 = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    l1 += cross_entropy_single(forward(p, batch[i], hw, hw, ws), labels[i]);
    l2 += cross_entropy_single(forward(p, shuffled[i], hw, hw, ws),
                               shuffled_labels[i]);
  }
  EXPECT_NEAR(l1, l2, 1e-9);
}

TEST(Adam, FirstStepMagnitude) {
  auto params = make_model<double>();
  auto state = make_adam<double>(1e-4);
  auto grads = make_model<double>();
  const double g = 0.01;
  for_each_array(grads, [g](const char*, std::vector<double>& v) {
    std::fill(v.begin(), v.end(), g);
  });
  adam_step(state, params, grads);
  // t=1: m_hat = g, v_hat = g^2 -> step = lr * g / (|g| + eps)
  const double expected = 1e-4 * g / (g + 1e-8);
  for_each_array(params, [expected](const char* name,
                                    const std::vector<double>& v) {
    for (double x : v) EXPECT_NEAR(-x, expected, 1e-15) << name;
  });
  EXPECT_NEAR(expected, 1e-4, 1e-9);  // approximately lr
}

TEST(Adam, ZeroGradientIsFixedPoint) {
  auto params = init_model<double>(10);
  const auto before = params;
  auto state = make_adam<double>(1e-3);
  const auto grads = make_model<double>();  // zeros
  for (int i = 0; i < 5; ++i) adam_step(state, params, grads);
  EXPECT_EQ(max_grad_difference(params, before), 0.0);
}

TEST(Adam, DeterministicAcrossInstances) {
  auto p1 = init_model<double>(11);
  auto p2 = init_model<double>(11);
  auto s1 = make_adam<double>(1e-3);
  auto s2 = make_adam<double>(1e-3);
  auto grads = init_model<double>(12);  // arbitrary nonzero values
  for (int i = 0; i < 3; ++i) {
    adam_step(s1, p1, grads);
    adam_step(s2, p2, grads);
  }
  EXPECT_EQ(max_grad_difference(p1, p2), 0.0);
  EXPECT_EQ(s1.t, s2.t);
}

TEST(Adam, FiftyStepsReduceLossOnFixedBatch) {
  const int hw = 32;
  auto p = init_model<float>(14);
  auto state = make_adam<float>(1e-4);
  std::vector<std::vector<float>> grays;
  std::vector<Label> labels;
  for (int i = 0; i < 8; ++i) {
    grays.push_back(random_gray(hw, hw, 200 + i));
    labels.push_back(i % 2 == 0 ? Label::kHuman : Label::kDeepfake);
  }
  Workspace<float> ws;
  const auto loss_of = [&](const ModelParams<float>& params) {
    double acc = 0;
    for (std::size_t i = 0; i < grays.size(); ++i) {
      acc += cross_entropy_single(forward(params, grays[i], hw, hw, ws),
                                  labels[i]);
    }
    return acc / static_cast<double>(grays.size());
  };
  const double initial = loss_of(p);
  auto grad = make_model<float>();
  auto sample = make_model<float>();
  for (int step = 0; step < 50; ++step) {
    for_each_array(grad, [](const char*, std::vector<float>& v) {
      std::fill(v.begin(), v.end(), 0.0f);
    });
    for (std::size_t i = 0; i < grays.size(); ++i) {
      const auto logits = forward(p, grays[i], hw, hw, ws);
      std::array<float, 2> dlogits;
      cross_entropy_single(logits, labels[i], &dlogits);
      backward(p, ws, dlogits, sample);
      std::vector<std::vector<float>*> dst;
      std::vector<const std::vector<float>*> src;
      for_each_array(grad, [&dst](const char*, std::vector<float>& a) {
        dst.push_back(&a);
      });
      for_each_array(sample, [&src](const char*, const std::vector<float>& a) {
        src.push_back(&a);
      });
      for (std::size_t k = 0; k < dst.size(); ++k) {
        for (std::size_t j = 0; j < dst[k]->size(); ++j) {
          (*dst[k])[j] += (*src[k])[j] / static_cast<float>(grays.size());
        }
      }
    }
    adam_step(state, p, grad);
  }
  EXPECT_LT(loss_of(p), initial);
}

TEST(Predict, TieGoesToDeepfake) {
  const auto pred = predict_from_logits(std::array<double, 2>{0.0, 0.0});
  EXPECT_EQ(pred.label, Label::kDeepfake);
  EXPECT_NEAR(pred.probabilities[0], 0.5, 1e-12);
  EXPECT_NEAR(pred.probabilities[1], 0.5, 1e-12);
}

TEST(Predict, ConfidentHuman) {
  const auto pred = predict_from_logits(std::array<double, 2>{-3.0, 3.0});
  EXPECT_EQ(pred.label, Label::kHuman);
  EXPECT_NEAR(pred.probabilities[1], 1.0 / (1.0 + std::exp(-6.0)), 1e-12);
}

TEST(Predict, ProbabilitiesSumToOne) {
  Rng rng(19);
  for (int i = 0; i < 50; ++i) {
    const auto pred = predict_from_logits(
        std::array<double, 2>{rng.uniform(-30, 30), rng.uniform(-30, 30)});
    EXPECT_NEAR(pred.probabilities[0] + pred.probabilities[1], 1.0, 1e-12);
  }
}

FeatureSet tiny_feature_set(int count, int hw, std::uint64_t seed) {
  FeatureSet set;
  set.height = hw;
  set.width = hw;
  for (int i = 0; i < count; ++i) {
    auto gray = random_gray(hw, hw, seed + static_cast<std::uint64_t>(i));
    // separable toy task: humans are brighter in the top half
    const bool human = i % 2 == 0;
    for (int y = 0; y < hw / 2; ++y) {
      for (int x = 0; x < hw; ++x) {
        gray[static_cast<std::size_t>(y) * hw + x] =
            human ? 0.9f : 0.1f;
      }
    }
    set.gray.push_back(std::move(gray));
    set.labels.push_back(human ? Label::kHuman : Label::kDeepfake);
  }
  return set;
}

TEST(Train, HistoryBookkeepingAndDeterminism) {
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch_size = 4;
  cfg.seed = 99;
  const FeatureSet train_set = tiny_feature_set(12, 32, 1000);
  const FeatureSet val_set = tiny_feature_set(6, 32, 2000);

  const Checkpoint a = train(cfg, train_set, val_set);
  EXPECT_EQ(a.history.size(), 3u);
  for (const auto& s : a.history) {
    EXPECT_TRUE(std::isfinite(s.train_loss));
    EXPECT_TRUE(std::isfinite(s.val_loss));
  }
  EXPECT_GE(a.best_epoch, 0);

  const Checkpoint b = train(cfg, train_set, val_set);
  const fs::path pa = fs::temp_directory_path() / "mddetect_ckpt_a.mgck";
  const fs::path pb = fs::temp_directory_path() / "mddetect_ckpt_b.mgck";
  save_checkpoint(a, pa);
  save_checkpoint(b, pb);
  EXPECT_EQ(oracle::slurp(pa), oracle::slurp(pb));
}

TEST(Checkpoint, RoundtripReproducesForwardBitExactly) {
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.seed = 5;
  const FeatureSet train_set = tiny_feature_set(8, 32, 3000);
  const FeatureSet val_set = tiny_feature_set(4, 32, 4000);
  const Checkpoint ckpt = train(cfg, train_set, val_set);

  const fs::path path = fs::temp_directory_path() / "mddetect_roundtrip.mgck";
  save_checkpoint(ckpt, path);
  const Checkpoint back = load_checkpoint(path);

  EXPECT_EQ(back.best_epoch, ckpt.best_epoch);
  EXPECT_EQ(back.best_val_accuracy, ckpt.best_val_accuracy);
  ASSERT_EQ(back.history.size(), ckpt.history.size());
  EXPECT_EQ(back.adam.t, ckpt.adam.t);

  const auto probe = random_gray(32, 32, 777);
  Workspace<float> ws1, ws2;
  const auto l1 = forward(ckpt.params, probe, 32, 32, ws1);
  const auto l2 = forward(back.params, probe, 32, 32, ws2);
  EXPECT_EQ(l1[0], l2[0]);
  EXPECT_EQ(l1[1], l2[1]);
}

TEST(Checkpoint, RejectsCorruptFiles) {
  const fs::path path = fs::temp_directory_path() / "mddetect_corrupt.mgck";
  {
    std::ofstream os(path, std::ios::binary);
    os << "NOPE";
  }
  EXPECT_THROW(load_checkpoint(path), mdd::Error);
}

TEST(Evaluate, AccuracyOnSeparableToyTask) {
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.lr = 1e-3;  // toy task, bigger steps
  cfg.seed = 321;
  const FeatureSet train_set = tiny_feature_set(32, 32, 5000);
  const FeatureSet val_set = tiny_feature_set(16, 32, 6000);
  const Checkpoint ckpt = train(cfg, train_set, val_set);
  const EvalResult result = evaluate(ckpt.params, val_set);
  EXPECT_GE(result.accuracy, 0.9);
}

}  // namespace
